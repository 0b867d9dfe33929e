//! Teacher access and the reactant embedding lookup table.

use std::collections::HashMap;
use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};

use sha2::{Digest, Sha256};

use crate::encoder::featurize;
use crate::gate::GateModel;
use crate::molgraph::MolGraph;
use crate::nncore::{weights_to_bytes, Tensor};
use crate::properties::{Property, PropertyVector};

use super::SurrogateError;

/// The expensive model. Every molecule passed to `embed` or `predict`
/// counts as one teacher evaluation.
pub trait Teacher: Sync {
    fn latent_dim(&self) -> usize;
    /// Hash identifying the teacher weights.
    fn provenance(&self) -> &str;
    /// Shared latent vectors, one row per molecule.
    fn embed(&self, graphs: &[&MolGraph]) -> Result<Tensor, SurrogateError>;
    fn predict(&self, graphs: &[&MolGraph]) -> Result<Vec<PropertyVector>, SurrogateError>;
    /// Molecules evaluated so far.
    fn calls(&self) -> u64;
}

/// A ten-task GATE model acting as teacher, with an evaluation counter.
#[derive(Debug)]
pub struct GateTeacher {
    model: GateModel,
    provenance: String,
    calls: AtomicU64,
}

impl GateTeacher {
    /// The model's tasks must be the ten properties in canonical order.
    pub fn new(model: GateModel) -> Result<Self, SurrogateError> {
        let expected: Vec<&str> = Property::ALL.iter().map(|p| p.name()).collect();
        if model.task_names.iter().map(String::as_str).ne(expected.iter().copied()) {
            return Err(SurrogateError::TeacherLayout(model.task_names.join(",")));
        }
        let mut h = Sha256::new();
        h.update(weights_to_bytes(&model.params));
        for s in &model.scalers {
            h.update(s.mean.to_le_bytes());
            h.update(s.std.to_le_bytes());
        }
        let provenance = hex::encode(h.finalize());
        Ok(GateTeacher {
            model,
            provenance,
            calls: AtomicU64::new(0),
        })
    }

    pub fn model(&self) -> &GateModel {
        &self.model
    }

    pub fn reset_calls(&self) {
        self.calls.store(0, Ordering::SeqCst);
    }
}

impl Teacher for GateTeacher {
    fn latent_dim(&self) -> usize {
        self.model.latent_dim()
    }

    fn provenance(&self) -> &str {
        &self.provenance
    }

    fn embed(&self, graphs: &[&MolGraph]) -> Result<Tensor, SurrogateError> {
        self.calls.fetch_add(graphs.len() as u64, Ordering::SeqCst);
        let feats: Vec<_> = graphs.iter().map(|g| featurize(g)).collect();
        Ok(self.model.latent_batch(&feats)?)
    }

    fn predict(&self, graphs: &[&MolGraph]) -> Result<Vec<PropertyVector>, SurrogateError> {
        self.calls.fetch_add(graphs.len() as u64, Ordering::SeqCst);
        let feats: Vec<_> = graphs.iter().map(|g| featurize(g)).collect();
        let y = self.model.predict_batch(&feats)?;
        Ok((0..y.rows()).map(|r| PropertyVector::from_slice(y.row_slice(r))).collect())
    }

    fn calls(&self) -> u64 {
        self.calls.load(Ordering::SeqCst)
    }
}

const MAGIC: &[u8; 4] = b"EMB1";
const VERSION: u32 = 1;

/// Reactant id → teacher latent. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    dim: usize,
    provenance: String,
    ids: Vec<String>,
    index: HashMap<String, usize>,
    data: Vec<f64>,
}

impl EmbeddingTable {
    fn from_parts(dim: usize, provenance: String, ids: Vec<String>, data: Vec<f64>) -> Result<Self, SurrogateError> {
        let mut index = HashMap::with_capacity(ids.len());
        for (i, id) in ids.iter().enumerate() {
            if index.insert(id.clone(), i).is_some() {
                return Err(SurrogateError::DuplicateId(id.clone()));
            }
        }
        Ok(EmbeddingTable {
            dim,
            provenance,
            ids,
            index,
            data,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn provenance(&self) -> &str {
        &self.provenance
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn position(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn get(&self, id: &str) -> Option<&[f64]> {
        self.position(id).map(|i| self.row(i))
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn check_provenance(&self, expected: &str) -> Result<(), SurrogateError> {
        if self.provenance != expected {
            return Err(SurrogateError::ProvenanceMismatch {
                table: self.provenance.clone(),
                expected: expected.to_string(),
            });
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(self.dim as u32).to_le_bytes());
        out.extend_from_slice(&(self.provenance.len() as u32).to_le_bytes());
        out.extend_from_slice(self.provenance.as_bytes());
        out.extend_from_slice(&(self.ids.len() as u64).to_le_bytes());
        for (i, id) in self.ids.iter().enumerate() {
            out.extend_from_slice(&(id.len() as u32).to_le_bytes());
            out.extend_from_slice(id.as_bytes());
            for v in self.row(i) {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, SurrogateError> {
        let mut pos = 0usize;
        let mut take = |n: usize| -> Result<&[u8], SurrogateError> {
            let end = pos.checked_add(n).filter(|&e| e <= bytes.len()).ok_or(SurrogateError::BadTable)?;
            let s = &bytes[pos..end];
            pos = end;
            Ok(s)
        };
        if take(4)? != MAGIC {
            return Err(SurrogateError::BadTable);
        }
        let u32_at = |b: &[u8]| u32::from_le_bytes(b.try_into().expect("4 bytes"));
        if u32_at(take(4)?) != VERSION {
            return Err(SurrogateError::BadTable);
        }
        let dim = u32_at(take(4)?) as usize;
        let plen = u32_at(take(4)?) as usize;
        let provenance = String::from_utf8(take(plen)?.to_vec()).map_err(|_| SurrogateError::BadTable)?;
        let count = u64::from_le_bytes(take(8)?.try_into().expect("8 bytes")) as usize;
        let mut ids = Vec::new();
        let mut data = Vec::new();
        for _ in 0..count {
            let len = u32_at(take(4)?) as usize;
            ids.push(String::from_utf8(take(len)?.to_vec()).map_err(|_| SurrogateError::BadTable)?);
            for c in take(dim * 8)?.chunks_exact(8) {
                data.push(f64::from_le_bytes(c.try_into().expect("8 bytes")));
            }
        }
        if pos != bytes.len() {
            return Err(SurrogateError::BadTable);
        }
        Self::from_parts(dim, provenance, ids, data)
    }

    pub fn write(&self, path: &Path) -> Result<(), SurrogateError> {
        std::fs::write(path, self.to_bytes()).map_err(|e| SurrogateError::Io(format!("{}: {e}", path.display())))
    }

    pub fn read(path: &Path) -> Result<Self, SurrogateError> {
        let bytes = std::fs::read(path).map_err(|e| SurrogateError::Io(format!("{}: {e}", path.display())))?;
        Self::from_bytes(&bytes)
    }
}

/// Embeds every reactant once with the teacher.
pub fn build_lookup(reactants: &[(String, &MolGraph)], teacher: &dyn Teacher) -> Result<EmbeddingTable, SurrogateError> {
    let dim = teacher.latent_dim();
    let ids: Vec<String> = reactants.iter().map(|(id, _)| id.clone()).collect();
    let data = if reactants.is_empty() {
        Vec::new()
    } else {
        let graphs: Vec<&MolGraph> = reactants.iter().map(|(_, g)| *g).collect();
        teacher.embed(&graphs)?.into_data()
    };
    EmbeddingTable::from_parts(dim, teacher.provenance().to_string(), ids, data)
}
