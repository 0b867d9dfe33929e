use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{Element, MolGraph, HYDROGEN_MASS};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Descriptors {
    /// Average molecular weight including implicit hydrogens, amu.
    pub molecular_weight: f64,
    pub heavy_atom_count: usize,
    /// Atoms on the longest simple heavy-atom path; rings may be traversed.
    pub longest_chain: usize,
    /// Fraction of heavy atoms with three or more heavy neighbors.
    pub branching_degree: f64,
    /// Heavy-atom fraction per element present.
    pub element_fractions: BTreeMap<Element, f64>,
}

impl Descriptors {
    pub fn fraction(&self, e: Element) -> f64 {
        self.element_fractions.get(&e).copied().unwrap_or(0.0)
    }

    /// Heavy-atom fraction of elements other than C, O and Si.
    pub fn other_fraction(&self) -> f64 {
        self.element_fractions
            .iter()
            .filter(|(e, _)| !matches!(e, Element::C | Element::O | Element::Si))
            .map(|(_, f)| f)
            .sum()
    }
}

pub fn descriptors(g: &MolGraph) -> Descriptors {
    let n = g.atom_count();
    let molecular_weight = g
        .atoms()
        .iter()
        .map(|a| a.element.atomic_mass() + a.implicit_h as f64 * HYDROGEN_MASS)
        .sum();
    let mut counts: BTreeMap<Element, usize> = BTreeMap::new();
    for a in g.atoms() {
        *counts.entry(a.element).or_default() += 1;
    }
    let element_fractions = counts
        .into_iter()
        .map(|(e, c)| (e, c as f64 / n as f64))
        .collect();
    let branched = (0..n).filter(|&i| g.degree(i) >= 3).count();
    Descriptors {
        molecular_weight,
        heavy_atom_count: n,
        longest_chain: longest_chain(g),
        branching_degree: branched as f64 / n as f64,
        element_fractions,
    }
}

fn longest_chain(g: &MolGraph) -> usize {
    let n = g.atom_count();
    if g.bond_count() + 1 == n {
        // tree: two sweeps find the diameter
        let (far, _) = farthest(g, 0);
        let (_, dist) = farthest(g, far);
        return dist + 1;
    }
    let mut on_path = vec![false; n];
    let mut best = 1;
    for start in 0..n {
        on_path[start] = true;
        best = best.max(deepest(g, start, 1, &mut on_path));
        on_path[start] = false;
    }
    best
}

fn farthest(g: &MolGraph, from: usize) -> (usize, usize) {
    let mut dist = vec![usize::MAX; g.atom_count()];
    dist[from] = 0;
    let mut queue = std::collections::VecDeque::from([from]);
    let mut last = from;
    while let Some(v) = queue.pop_front() {
        last = v;
        for &(w, _) in g.neighbors(v) {
            if dist[w] == usize::MAX {
                dist[w] = dist[v] + 1;
                queue.push_back(w);
            }
        }
    }
    (last, dist[last])
}

fn deepest(g: &MolGraph, v: usize, len: usize, on_path: &mut [bool]) -> usize {
    let mut best = len;
    for &(w, _) in g.neighbors(v) {
        if !on_path[w] {
            on_path[w] = true;
            best = best.max(deepest(g, w, len + 1, on_path));
            on_path[w] = false;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::molgraph::parse_smiles;

    fn d(s: &str) -> Descriptors {
        descriptors(&parse_smiles(s).unwrap())
    }

    #[test]
    fn hexane() {
        let x = d("CCCCCC");
        assert_eq!(x.heavy_atom_count, 6);
        assert_eq!(x.longest_chain, 6);
        assert_eq!(x.branching_degree, 0.0);
    }

    #[test]
    fn neopentane() {
        let x = d("CC(C)(C)C");
        assert_eq!(x.heavy_atom_count, 5);
        assert_eq!(x.longest_chain, 3);
        assert!((x.branching_degree - 0.2).abs() < 1e-15);
    }

    #[test]
    fn ethanol_weight() {
        let x = d("CCO");
        let expected = 2.0 * 12.011 + 6.0 * 1.008 + 15.999;
        assert!((x.molecular_weight - expected).abs() < 1e-9);
        assert!((x.molecular_weight - 46.069).abs() < 1e-9);
        assert!((x.fraction(Element::C) - 2.0 / 3.0).abs() < 1e-15);
        assert!((x.fraction(Element::O) - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn chains_through_rings() {
        // propyl cyclohexane: 3 chain atoms + 6 ring atoms walked around
        assert_eq!(d("CCCC1CCCCC1").longest_chain, 9);
        assert_eq!(d("C1CC1").longest_chain, 3);
        assert_eq!(d("C").longest_chain, 1);
    }

    #[test]
    fn other_fraction_counts_heteroatoms() {
        let x = d("CCN(C)P");
        assert!((x.other_fraction() - 0.4).abs() < 1e-15);
        let total: f64 = x.element_fractions.values().sum();
        assert!((total - 1.0).abs() < 1e-12);
    }
}
