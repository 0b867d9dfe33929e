//! Single-step virtual reactions: Williamson ether synthesis (alcohol +
//! alkyl chloride) and esterification (alcohol + carboxylic acid).
//!
//! Each ordered reactant pair yields exactly one product. When a reactant
//! carries several reactive sites, the site whose key atom has the lowest
//! canonical rank is used, so the choice does not depend on input order.

mod enumerate;

use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::filters::prefilter;
use crate::molgraph::{
    canonical_ranks, detect_groups, write_smiles, AtomSpec, Bond, BondOrder, MolGraph,
};

pub use enumerate::{
    count_from_sizes, count_products, enumerate, Checkpoint, Counts, EnumerateError, Mode,
    ProductSink, ProductStream, Shard, ShardParseError, SinkError, VecSink,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Alcohol,
    Chloride,
    Acid,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Reaction {
    Ether,
    Ester,
}

impl Reaction {
    pub fn name(self) -> &'static str {
        match self {
            Reaction::Ether => "ether",
            Reaction::Ester => "ester",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ReactionError {
    #[error("reactant has no {0:?} site")]
    NoReactiveSite(Role),
}

/// Reactive roles of a (prefiltered) molecule.
pub fn classify_reactant(g: &MolGraph) -> BTreeSet<Role> {
    let p = detect_groups(g);
    let mut roles = BTreeSet::new();
    if p.alcohol() {
        roles.insert(Role::Alcohol);
    }
    if p.alkyl_chloride() {
        roles.insert(Role::Chloride);
    }
    if p.carboxylic_acid() {
        roles.insert(Role::Acid);
    }
    roles
}

/// Product of one template application. `site_choice` holds the reacting
/// atom of each parent: alcohol oxygen first, then the partner's carbon.
#[derive(Debug, Clone, PartialEq)]
pub struct ReactionProduct {
    pub product: MolGraph,
    pub site_choice: (usize, usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProductRecord {
    pub product: MolGraph,
    pub reaction: Reaction,
    /// Indices into the alcohol list and the partner (chloride or acid) list.
    pub parents: (usize, usize),
    pub site_choice: (usize, usize),
}

fn lowest_ranked<T: Copy>(sites: &[T], ranks: &[usize], key: impl Fn(&T) -> (usize, usize)) -> Option<T> {
    sites
        .iter()
        .copied()
        .min_by_key(|s| {
            let (a, b) = key(s);
            (ranks[a], ranks[b])
        })
}

fn alcohol_site(a: &MolGraph) -> Result<usize, ReactionError> {
    let ranks = canonical_ranks(a);
    lowest_ranked(&detect_groups(a).alcohols, &ranks, |&o| (o, o)).ok_or(ReactionError::NoReactiveSite(Role::Alcohol))
}

/// Joins `a` and `b` with a single bond between `a_atom` and `b_atom`,
/// dropping `b_leaving` from `b`.
fn join(a: &MolGraph, a_atom: usize, b: &MolGraph, b_atom: usize, b_leaving: usize) -> MolGraph {
    let offset = a.atom_count();
    let remap = |i: usize| if i < b_leaving { offset + i } else { offset + i - 1 };
    let mut atoms: Vec<AtomSpec> = a.specs();
    atoms.extend(
        b.specs()
            .into_iter()
            .enumerate()
            .filter(|&(i, _)| i != b_leaving)
            .map(|(_, s)| s),
    );
    let mut bonds: Vec<Bond> = a.bonds().to_vec();
    bonds.extend(
        b.bonds()
            .iter()
            .filter(|bond| bond.a != b_leaving && bond.b != b_leaving)
            .map(|bond| Bond {
                a: remap(bond.a),
                b: remap(bond.b),
                order: bond.order,
            }),
    );
    bonds.push(Bond {
        a: a_atom,
        b: remap(b_atom),
        order: BondOrder::Single,
    });
    MolGraph::new(&atoms, bonds).expect("template joins two valid fragments at free valences")
}

/// Alcohol + alkyl chloride: the alcohol oxygen bonds to the chloride's
/// carbon, chlorine leaves (as HCl with the hydroxyl hydrogen).
pub fn williamson(alcohol: &MolGraph, chloride: &MolGraph) -> Result<ReactionProduct, ReactionError> {
    let o = alcohol_site(alcohol)?;
    let ranks = canonical_ranks(chloride);
    let site = lowest_ranked(&detect_groups(chloride).alkyl_chlorides, &ranks, |s| (s.carbon, s.chlorine))
        .ok_or(ReactionError::NoReactiveSite(Role::Chloride))?;
    Ok(ReactionProduct {
        product: join(alcohol, o, chloride, site.carbon, site.chlorine),
        site_choice: (o, site.carbon),
    })
}

/// Alcohol + carboxylic acid: the alcohol oxygen bonds to the carbonyl
/// carbon, the acid hydroxyl leaves (as water with the alcohol hydrogen).
pub fn esterify(alcohol: &MolGraph, acid: &MolGraph) -> Result<ReactionProduct, ReactionError> {
    let o = alcohol_site(alcohol)?;
    let ranks = canonical_ranks(acid);
    let site = lowest_ranked(&detect_groups(acid).carboxylic_acids, &ranks, |s| (s.carbon, s.hydroxyl))
        .ok_or(ReactionError::NoReactiveSite(Role::Acid))?;
    Ok(ReactionProduct {
        product: join(alcohol, o, acid, site.carbon, site.hydroxyl),
        site_choice: (o, site.carbon),
    })
}

pub fn react(reaction: Reaction, alcohol: &MolGraph, partner: &MolGraph) -> Result<ReactionProduct, ReactionError> {
    match reaction {
        Reaction::Ether => williamson(alcohol, partner),
        Reaction::Ester => esterify(alcohol, partner),
    }
}

/// A library entry: identifier, graph and canonical SMILES.
#[derive(Debug, Clone, PartialEq)]
pub struct Reactant {
    pub id: String,
    pub graph: MolGraph,
    pub smiles: String,
}

impl Reactant {
    pub fn new(id: impl Into<String>, graph: MolGraph) -> Self {
        let smiles = write_smiles(&graph);
        Reactant {
            id: id.into(),
            graph,
            smiles,
        }
    }
}

/// Why a candidate did not enter any reactant list.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Rejection {
    Prefilter,
    NoRole,
    Duplicate,
}

/// Reactant lists by role, deduplicated by canonical SMILES. A molecule
/// with several roles appears in each matching list.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ReactantSets {
    pub alcohols: Vec<Reactant>,
    pub chlorides: Vec<Reactant>,
    pub acids: Vec<Reactant>,
}

impl ReactantSets {
    /// Classifies candidates, keeping prefilter-clean molecules with at
    /// least one role. Returns the sets and the rejection of each dropped
    /// candidate, by input position.
    pub fn build(candidates: impl IntoIterator<Item = Reactant>) -> (Self, Vec<(usize, Rejection)>) {
        let mut sets = ReactantSets::default();
        let mut seen = BTreeSet::new();
        let mut rejected = Vec::new();
        for (pos, r) in candidates.into_iter().enumerate() {
            if !prefilter(&r.graph).passed {
                rejected.push((pos, Rejection::Prefilter));
                continue;
            }
            let roles = classify_reactant(&r.graph);
            if roles.is_empty() {
                rejected.push((pos, Rejection::NoRole));
                continue;
            }
            if !seen.insert(r.smiles.clone()) {
                rejected.push((pos, Rejection::Duplicate));
                continue;
            }
            for role in roles {
                sets.list_mut(role).push(r.clone());
            }
        }
        (sets, rejected)
    }

    pub fn list(&self, role: Role) -> &[Reactant] {
        match role {
            Role::Alcohol => &self.alcohols,
            Role::Chloride => &self.chlorides,
            Role::Acid => &self.acids,
        }
    }

    fn list_mut(&mut self, role: Role) -> &mut Vec<Reactant> {
        match role {
            Role::Alcohol => &mut self.alcohols,
            Role::Chloride => &mut self.chlorides,
            Role::Acid => &mut self.acids,
        }
    }

    pub fn partners(&self, reaction: Reaction) -> &[Reactant] {
        match reaction {
            Reaction::Ether => &self.chlorides,
            Reaction::Ester => &self.acids,
        }
    }

    /// For each alcohol, the partner index holding the same molecule, if any.
    /// Such pairs are intramolecular and skipped.
    pub(crate) fn self_pairs(&self, reaction: Reaction) -> Vec<Option<usize>> {
        let index: HashMap<&str, usize> = self
            .partners(reaction)
            .iter()
            .enumerate()
            .map(|(j, r)| (r.smiles.as_str(), j))
            .collect();
        self.alcohols
            .iter()
            .map(|a| index.get(a.smiles.as_str()).copied())
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::filters::postfilter;
    use crate::molgraph::{iso::is_isomorphic, parse_smiles};

    fn mol(s: &str) -> MolGraph {
        parse_smiles(s).unwrap()
    }

    #[test]
    fn classification() {
        assert_eq!(classify_reactant(&mol("CCO")), BTreeSet::from([Role::Alcohol]));
        assert_eq!(classify_reactant(&mol("CC(=O)O")), BTreeSet::from([Role::Acid]));
        assert_eq!(
            classify_reactant(&mol("OCCCl")),
            BTreeSet::from([Role::Alcohol, Role::Chloride])
        );
        assert!(classify_reactant(&mol("CCOCC")).is_empty());
    }

    #[test]
    fn williamson_products() {
        let p = williamson(&mol("CCO"), &mol("CCCl")).unwrap();
        assert!(is_isomorphic(&p.product, &mol("CCOCC")));
        let m = williamson(&mol("CO"), &mol("CCl")).unwrap();
        assert_eq!(m.product.atom_count(), 3);
        assert!(is_isomorphic(&m.product, &mol("COC")));
        let k = williamson(&mol("OCCCl"), &mol("CCl")).unwrap();
        assert!(is_isomorphic(&k.product, &mol("COCCCl")));
        assert!(!postfilter(&k.product).passed);
    }

    #[test]
    fn ester_products() {
        let p = esterify(&mol("CCO"), &mol("CC(=O)O")).unwrap();
        assert!(is_isomorphic(&p.product, &mol("CCOC(C)=O")));
        let f = esterify(&mol("CO"), &mol("C(=O)O")).unwrap();
        assert_eq!(f.product.atom_count(), 4);
        assert!(is_isomorphic(&f.product, &mol("COC=O")));
    }

    #[test]
    fn atom_conservation() {
        let a = mol("CCCCO");
        let c = mol("ClCC(C)C");
        let x = mol("OC(=O)CC=C");
        assert_eq!(williamson(&a, &c).unwrap().product.atom_count(), a.atom_count() + c.atom_count() - 1);
        assert_eq!(esterify(&a, &x).unwrap().product.atom_count(), a.atom_count() + x.atom_count() - 1);
    }

    #[test]
    fn missing_sites() {
        assert_eq!(
            williamson(&mol("CCC"), &mol("CCCl")).unwrap_err(),
            ReactionError::NoReactiveSite(Role::Alcohol)
        );
        assert_eq!(
            williamson(&mol("CCO"), &mol("CCC")).unwrap_err(),
            ReactionError::NoReactiveSite(Role::Chloride)
        );
        assert_eq!(
            esterify(&mol("CCO"), &mol("CCO")).unwrap_err(),
            ReactionError::NoReactiveSite(Role::Acid)
        );
    }

    #[test]
    fn site_choice_is_order_independent() {
        // diol: both OH sites, but the product must not depend on atom order
        let a = mol("OCCC(C)CO");
        let b = mol("OCC(C)CCO");
        let x = mol("CC(=O)O");
        let pa = esterify(&a, &x).unwrap();
        let pb = esterify(&b, &x).unwrap();
        assert_eq!(write_smiles(&pa.product), write_smiles(&pb.product));
    }

    #[test]
    fn build_sets_dedups_and_rejects() {
        let input = ["CCO", "OCC", "c1ccccc1O", "CCC", "OCCCl", "CC(=O)O"]
            .iter()
            .enumerate()
            .map(|(i, s)| Reactant::new(format!("m{i}"), mol(s)));
        let (sets, rejected) = ReactantSets::build(input);
        assert_eq!(sets.alcohols.len(), 2);
        assert_eq!(sets.chlorides.len(), 1);
        assert_eq!(sets.acids.len(), 1);
        assert_eq!(
            rejected,
            vec![(1, Rejection::Duplicate), (2, Rejection::Prefilter), (3, Rejection::NoRole)]
        );
        assert_eq!(sets.self_pairs(Reaction::Ether), vec![None, Some(0)]);
    }
}
