//! Molecular graphs over a small SMILES subset.
//!
//! A [`MolGraph`] holds heavy atoms only; hydrogens are implicit and derived
//! from the element's default valence. Graphs are always connected and
//! valence-consistent: every constructor validates.

mod canon;
mod descriptors;
mod element;
mod groups;
pub mod iso;
mod parse;
pub mod random;
mod rings;

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use canon::{canonical_ranks, write_smiles};
pub use descriptors::{descriptors, Descriptors};
pub use element::{Element, HYDROGEN_MASS};
pub use groups::{
    detect_groups, AcidSite, ChlorideSite, EsterSite, FunctionalGroupProfile, SiloxaneSite,
};
pub use parse::{parse_smiles, ParseError, ParseErrorKind};
pub use rings::{ring_atoms, Ring};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum BondOrder {
    Single,
    Double,
    Triple,
    Aromatic,
}

impl BondOrder {
    pub fn index(self) -> usize {
        match self {
            BondOrder::Single => 0,
            BondOrder::Double => 1,
            BondOrder::Triple => 2,
            BondOrder::Aromatic => 3,
        }
    }

    fn valence_units(self) -> u8 {
        match self {
            BondOrder::Single => 1,
            BondOrder::Double => 2,
            BondOrder::Triple => 3,
            // aromatic bonds are accounted per atom, see `explicit_valence`
            BondOrder::Aromatic => 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Atom {
    pub element: Element,
    pub aromatic: bool,
    pub implicit_h: u8,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Bond {
    pub a: usize,
    pub b: usize,
    pub order: BondOrder,
}

impl Bond {
    pub fn other(&self, atom: usize) -> usize {
        if self.a == atom {
            self.b
        } else {
            self.a
        }
    }
}

/// Structural problems found while assembling a graph. Parsing wraps these
/// with byte offsets.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GraphError {
    #[error("graph has no atoms")]
    Empty,
    #[error("bond {0} has an endpoint out of range")]
    BondOutOfRange(usize),
    #[error("bond {0} is a self loop")]
    SelfLoop(usize),
    #[error("atoms {0} and {1} are bonded twice")]
    ParallelBond(usize, usize),
    #[error("atom {0} exceeds its valence")]
    Valence(usize),
    #[error("aromatic flag on unsupported atom {0}")]
    Aromaticity(usize),
    #[error("graph is disconnected (atom {0} unreachable)")]
    Disconnected(usize),
}

/// Connected heavy-atom graph with implicit hydrogens.
#[derive(Debug, Clone)]
pub struct MolGraph {
    atoms: Vec<Atom>,
    bonds: Vec<Bond>,
    // (neighbor, bond index), sorted by neighbor index
    adjacency: Vec<Vec<(usize, usize)>>,
    rings: OnceLock<Vec<Ring>>,
}

impl PartialEq for MolGraph {
    fn eq(&self, other: &Self) -> bool {
        self.atoms == other.atoms && self.bonds == other.bonds
    }
}

/// Minimal description of an atom before hydrogens are assigned.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AtomSpec {
    pub element: Element,
    pub aromatic: bool,
}

impl AtomSpec {
    pub fn new(element: Element) -> Self {
        AtomSpec {
            element,
            aromatic: false,
        }
    }

    pub fn aromatic(element: Element) -> Self {
        AtomSpec {
            element,
            aromatic: true,
        }
    }
}

impl MolGraph {
    /// Builds a validated graph, assigning implicit hydrogens from valence.
    pub fn new(atoms: &[AtomSpec], bonds: Vec<Bond>) -> Result<Self, GraphError> {
        if atoms.is_empty() {
            return Err(GraphError::Empty);
        }
        let n = atoms.len();
        let mut adjacency: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n];
        for (k, bond) in bonds.iter().enumerate() {
            if bond.a >= n || bond.b >= n {
                return Err(GraphError::BondOutOfRange(k));
            }
            if bond.a == bond.b {
                return Err(GraphError::SelfLoop(k));
            }
            if adjacency[bond.a].iter().any(|&(nb, _)| nb == bond.b) {
                return Err(GraphError::ParallelBond(bond.a.min(bond.b), bond.a.max(bond.b)));
            }
            adjacency[bond.a].push((bond.b, k));
            adjacency[bond.b].push((bond.a, k));
        }
        for list in &mut adjacency {
            list.sort_unstable();
        }

        let mut out = Vec::with_capacity(n);
        for (i, spec) in atoms.iter().enumerate() {
            if spec.aromatic && !spec.element.can_be_aromatic() {
                return Err(GraphError::Aromaticity(i));
            }
            let used = explicit_valence(spec, adjacency[i].iter().map(|&(_, k)| bonds[k].order))
                .ok_or(GraphError::Valence(i))?;
            let valence = spec.element.default_valence();
            if used > valence {
                return Err(GraphError::Valence(i));
            }
            out.push(Atom {
                element: spec.element,
                aromatic: spec.aromatic,
                implicit_h: valence - used,
            });
        }

        let graph = MolGraph {
            atoms: out,
            bonds,
            adjacency,
            rings: OnceLock::new(),
        };
        if let Some(lost) = graph.first_unreachable() {
            return Err(GraphError::Disconnected(lost));
        }
        Ok(graph)
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn atom(&self, i: usize) -> &Atom {
        &self.atoms[i]
    }

    pub fn bonds(&self) -> &[Bond] {
        &self.bonds
    }

    pub fn atom_count(&self) -> usize {
        self.atoms.len()
    }

    pub fn bond_count(&self) -> usize {
        self.bonds.len()
    }

    /// Neighbors of `i` as `(atom, bond index)`, ascending by atom index.
    pub fn neighbors(&self, i: usize) -> &[(usize, usize)] {
        &self.adjacency[i]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.adjacency[i].len()
    }

    pub fn bond_between(&self, a: usize, b: usize) -> Option<&Bond> {
        self.adjacency[a]
            .iter()
            .find(|&&(nb, _)| nb == b)
            .map(|&(_, k)| &self.bonds[k])
    }

    /// Simple cycles (chordless, up to eight atoms), computed once.
    pub fn ring_info(&self) -> &[Ring] {
        self.rings.get_or_init(|| rings::perceive(self))
    }

    pub fn specs(&self) -> Vec<AtomSpec> {
        self.atoms
            .iter()
            .map(|a| AtomSpec {
                element: a.element,
                aromatic: a.aromatic,
            })
            .collect()
    }

    /// Relabels atoms: atom `i` of `self` becomes atom `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> MolGraph {
        assert_eq!(perm.len(), self.atoms.len());
        let mut specs = vec![AtomSpec::new(Element::C); perm.len()];
        for (i, spec) in self.specs().into_iter().enumerate() {
            specs[perm[i]] = spec;
        }
        let bonds = self
            .bonds
            .iter()
            .map(|b| Bond {
                a: perm[b.a],
                b: perm[b.b],
                order: b.order,
            })
            .collect();
        MolGraph::new(&specs, bonds).expect("relabeling preserves validity")
    }

    /// Sum of bond valence units plus implicit hydrogens for atom `i`.
    pub fn total_valence(&self, i: usize) -> u8 {
        let spec = AtomSpec {
            element: self.atoms[i].element,
            aromatic: self.atoms[i].aromatic,
        };
        explicit_valence(&spec, self.adjacency[i].iter().map(|&(_, k)| self.bonds[k].order))
            .expect("validated at construction")
            + self.atoms[i].implicit_h
    }

    fn first_unreachable(&self) -> Option<usize> {
        let n = self.atoms.len();
        let mut seen = vec![false; n];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(v) = stack.pop() {
            for &(w, _) in &self.adjacency[v] {
                if !seen[w] {
                    seen[w] = true;
                    stack.push(w);
                }
            }
        }
        seen.iter().position(|s| !s)
    }
}

/// Valence consumed by explicit bonds. Aromatic bonds count 1.5 each for
/// pyridine-type atoms (C, N), rounded down over the atom's aromatic bonds,
/// and 1 each for lone-pair donors (O, S). Returns `None` when an aromatic
/// bond touches a non-aromatic atom or an aromatic atom has fewer than two
/// aromatic bonds.
fn explicit_valence(spec: &AtomSpec, orders: impl Iterator<Item = BondOrder>) -> Option<u8> {
    let mut units = 0u8;
    let mut aromatic = 0u8;
    for order in orders {
        if order == BondOrder::Aromatic {
            aromatic += 1;
        } else {
            units += order.valence_units();
        }
    }
    if aromatic > 0 && !spec.aromatic {
        return None;
    }
    if spec.aromatic {
        if aromatic < 2 {
            return None;
        }
        units += match spec.element {
            Element::O | Element::S => aromatic,
            _ => (3 * aromatic) / 2,
        };
    }
    Some(units)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chain(n: usize) -> MolGraph {
        let atoms = vec![AtomSpec::new(Element::C); n];
        let bonds = (1..n)
            .map(|i| Bond {
                a: i - 1,
                b: i,
                order: BondOrder::Single,
            })
            .collect();
        MolGraph::new(&atoms, bonds).unwrap()
    }

    #[test]
    fn implicit_hydrogens_from_valence() {
        let g = chain(3);
        let hs: Vec<u8> = g.atoms().iter().map(|a| a.implicit_h).collect();
        assert_eq!(hs, vec![3, 2, 3]);
        for i in 0..3 {
            assert_eq!(g.total_valence(i), 4);
        }
    }

    #[test]
    fn rejects_structural_errors() {
        let c = AtomSpec::new(Element::C);
        let single = |a, b| Bond {
            a,
            b,
            order: BondOrder::Single,
        };
        assert_eq!(MolGraph::new(&[], vec![]).unwrap_err(), GraphError::Empty);
        assert_eq!(
            MolGraph::new(&[c, c], vec![single(0, 2)]).unwrap_err(),
            GraphError::BondOutOfRange(0)
        );
        assert_eq!(
            MolGraph::new(&[c, c], vec![single(0, 0)]).unwrap_err(),
            GraphError::SelfLoop(0)
        );
        assert_eq!(
            MolGraph::new(&[c, c], vec![single(0, 1), single(1, 0)]).unwrap_err(),
            GraphError::ParallelBond(0, 1)
        );
        assert_eq!(
            MolGraph::new(&[c, c], vec![]).unwrap_err(),
            GraphError::Disconnected(1)
        );
        let f = AtomSpec::new(Element::F);
        assert_eq!(
            MolGraph::new(&[f, c, c], vec![single(0, 1), single(0, 2)]).unwrap_err(),
            GraphError::Valence(0)
        );
    }

    #[test]
    fn permutation_preserves_hydrogens() {
        let g = chain(4);
        let p = g.permuted(&[3, 1, 0, 2]);
        assert_eq!(p.atom(3).implicit_h, 3);
        assert_eq!(p.atom(1).implicit_h, 2);
        assert!(p.bond_between(3, 1).is_some());
    }
}
