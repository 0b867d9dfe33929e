use serde::{Deserialize, Serialize};

use super::{BondOrder, MolGraph};

/// Largest ring size enumerated.
pub const MAX_RING_SIZE: usize = 8;

/// A simple cycle, atoms listed in traversal order starting from the
/// smallest index.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ring {
    pub atoms: Vec<usize>,
    pub aromatic: bool,
}

impl Ring {
    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }
}

/// All chordless cycles with at most [`MAX_RING_SIZE`] atoms.
pub fn ring_atoms(g: &MolGraph) -> Vec<Ring> {
    g.ring_info().to_vec()
}

pub(super) fn perceive(g: &MolGraph) -> Vec<Ring> {
    let n = g.atom_count();
    let mut out = Vec::new();
    if g.bond_count() < n {
        return out;
    }
    let mut path = Vec::with_capacity(MAX_RING_SIZE);
    let mut on_path = vec![false; n];
    for start in 0..n {
        path.clear();
        path.push(start);
        on_path[start] = true;
        extend(g, start, &mut path, &mut on_path, &mut out);
        on_path[start] = false;
    }
    out.sort_by(|a, b| a.atoms.len().cmp(&b.atoms.len()).then(a.atoms.cmp(&b.atoms)));
    out
}

fn extend(g: &MolGraph, start: usize, path: &mut Vec<usize>, on_path: &mut [bool], out: &mut Vec<Ring>) {
    let last = *path.last().unwrap();
    for &(v, _) in g.neighbors(last) {
        if v <= start || on_path[v] {
            continue;
        }
        // v may touch only `last` and, when it closes the ring, `start`
        let mut closes = false;
        let mut chord = false;
        for &(w, _) in g.neighbors(v) {
            if w == last || !on_path[w] {
                continue;
            }
            if w == start && path.len() >= 2 {
                closes = true;
            } else {
                chord = true;
                break;
            }
        }
        if chord {
            continue;
        }
        path.push(v);
        if closes {
            if path[1] < v {
                let aromatic = path
                    .iter()
                    .zip(path.iter().cycle().skip(1))
                    .all(|(&a, &b)| g.bond_between(a, b).map(|b| b.order) == Some(BondOrder::Aromatic));
                out.push(Ring {
                    atoms: path.clone(),
                    aromatic,
                });
            }
        } else if path.len() < MAX_RING_SIZE {
            on_path[v] = true;
            extend(g, start, path, on_path, out);
            on_path[v] = false;
        }
        path.pop();
    }
}
