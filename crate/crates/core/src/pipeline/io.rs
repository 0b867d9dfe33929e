//! CSV formats for molecule inputs and the filtered library.

use std::collections::HashSet;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::demo::DemoLibrary;
use crate::molgraph::{parse_smiles, MolGraph, ParseError};
use crate::reactor::{Reactant, ReactantSets};

/// One input record. Files carry a `smiles` column and optionally `id`;
/// rows without an id get `M<row>`.
#[derive(Debug, Clone, PartialEq, Deserialize)]
struct MoleculeRow {
    #[serde(default)]
    id: Option<String>,
    smiles: String,
}

pub type ParsedMolecule = (String, String, Result<MolGraph, ParseError>);

/// Reads `id,smiles` records, parsing each SMILES. Parse failures are
/// returned in place so callers can count them.
pub fn read_molecules<R: Read>(input: R) -> Result<Vec<ParsedMolecule>, csv::Error> {
    let mut rd = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let mut out = Vec::new();
    for (row, rec) in rd.deserialize::<MoleculeRow>().enumerate() {
        let rec = rec?;
        let id = rec.id.filter(|s| !s.is_empty()).unwrap_or_else(|| format!("M{:05}", row + 1));
        let parsed = parse_smiles(&rec.smiles);
        out.push((id, rec.smiles, parsed));
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum Kind {
    Alcohol,
    Chloride,
    Acid,
    Purchasable,
}

#[derive(Debug, Serialize, Deserialize)]
struct LibraryRow {
    id: String,
    kind: Kind,
    smiles: String,
}

/// `id,kind,smiles`; a reactant with several roles gets one row per role.
pub fn write_library_csv<W: Write>(out: W, lib: &DemoLibrary) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    let lists = [
        (Kind::Alcohol, &lib.sets.alcohols),
        (Kind::Chloride, &lib.sets.chlorides),
        (Kind::Acid, &lib.sets.acids),
        (Kind::Purchasable, &lib.purchasables),
    ];
    for (kind, list) in lists {
        for r in list {
            w.serialize(LibraryRow {
                id: r.id.clone(),
                kind,
                smiles: r.smiles.clone(),
            })?;
        }
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, thiserror::Error)]
pub enum LibraryReadError {
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("row {row}: {source}")]
    Smiles { row: usize, source: ParseError },
    #[error("row {row}: id {id} appears twice with the same kind")]
    Duplicate { row: usize, id: String },
}

pub fn read_library_csv<R: Read>(input: R) -> Result<DemoLibrary, LibraryReadError> {
    let mut rd = csv::Reader::from_reader(input);
    let mut sets = ReactantSets::default();
    let mut purchasables = Vec::new();
    let mut seen = HashSet::new();
    for (row, rec) in rd.deserialize::<LibraryRow>().enumerate() {
        let rec = rec?;
        let g = parse_smiles(&rec.smiles).map_err(|source| LibraryReadError::Smiles { row: row + 1, source })?;
        if !seen.insert((rec.id.clone(), rec.kind)) {
            return Err(LibraryReadError::Duplicate { row: row + 1, id: rec.id });
        }
        let r = Reactant::new(rec.id, g);
        match rec.kind {
            Kind::Alcohol => sets.alcohols.push(r),
            Kind::Chloride => sets.chlorides.push(r),
            Kind::Acid => sets.acids.push(r),
            Kind::Purchasable => purchasables.push(r),
        }
    }
    Ok(DemoLibrary { sets, purchasables })
}
