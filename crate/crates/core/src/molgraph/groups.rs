use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::{BondOrder, Element, MolGraph};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct AcidSite {
    pub carbon: usize,
    pub hydroxyl: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ChlorideSite {
    pub carbon: usize,
    pub chlorine: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct EsterSite {
    pub carbonyl: usize,
    pub oxygen: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SiloxaneSite {
    pub silicon: usize,
    pub oxygen: usize,
}

/// Functional-group matches. Each list holds every match; an empty list
/// means the group is absent.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FunctionalGroupProfile {
    /// Hydroxyl oxygens on a non-carbonyl carbon.
    pub alcohols: Vec<usize>,
    pub carboxylic_acids: Vec<AcidSite>,
    pub alkyl_chlorides: Vec<ChlorideSite>,
    /// Oxygens bridging two non-carbonyl carbons.
    pub ethers: Vec<usize>,
    pub esters: Vec<EsterSite>,
    pub siloxanes: Vec<SiloxaneSite>,
    pub aromatic_rings: Vec<Vec<usize>>,
    pub contains: BTreeSet<Element>,
}

impl FunctionalGroupProfile {
    pub fn alcohol(&self) -> bool {
        !self.alcohols.is_empty()
    }
    pub fn carboxylic_acid(&self) -> bool {
        !self.carboxylic_acids.is_empty()
    }
    pub fn alkyl_chloride(&self) -> bool {
        !self.alkyl_chlorides.is_empty()
    }
    pub fn ether(&self) -> bool {
        !self.ethers.is_empty()
    }
    pub fn ester(&self) -> bool {
        !self.esters.is_empty()
    }
    pub fn siloxane(&self) -> bool {
        !self.siloxanes.is_empty()
    }
    pub fn aromatic_ring(&self) -> bool {
        !self.aromatic_rings.is_empty()
    }
}

fn is_carbonyl_carbon(g: &MolGraph, c: usize) -> bool {
    let atom = g.atom(c);
    atom.element == Element::C
        && !atom.aromatic
        && g.neighbors(c)
            .iter()
            .any(|&(o, k)| g.atom(o).element == Element::O && g.bonds()[k].order == BondOrder::Double)
}

fn single(g: &MolGraph, k: usize) -> bool {
    g.bonds()[k].order == BondOrder::Single
}

/// Matches the group patterns on element, bond order and hydrogen count.
pub fn detect_groups(g: &MolGraph) -> FunctionalGroupProfile {
    let mut p = FunctionalGroupProfile::default();
    for (i, atom) in g.atoms().iter().enumerate() {
        p.contains.insert(atom.element);
        match atom.element {
            Element::O if !atom.aromatic => {
                let nbrs = g.neighbors(i);
                let carbons: Vec<usize> = nbrs
                    .iter()
                    .filter(|&&(c, k)| g.atom(c).element == Element::C && single(g, k))
                    .map(|&(c, _)| c)
                    .collect();
                if nbrs.len() == 1 && carbons.len() == 1 && atom.implicit_h >= 1 {
                    let c = carbons[0];
                    if is_carbonyl_carbon(g, c) {
                        p.carboxylic_acids.push(AcidSite { carbon: c, hydroxyl: i });
                    } else {
                        p.alcohols.push(i);
                    }
                }
                if nbrs.len() == 2 && carbons.len() == 2 {
                    let (c0, c1) = (carbons[0], carbons[1]);
                    match (is_carbonyl_carbon(g, c0), is_carbonyl_carbon(g, c1)) {
                        (false, false) => p.ethers.push(i),
                        (true, false) => p.esters.push(EsterSite { carbonyl: c0, oxygen: i }),
                        (false, true) => p.esters.push(EsterSite { carbonyl: c1, oxygen: i }),
                        // anhydride: neither ether nor ester
                        (true, true) => {}
                    }
                }
                for &(si, _) in nbrs {
                    if g.atom(si).element == Element::Si {
                        p.siloxanes.push(SiloxaneSite { silicon: si, oxygen: i });
                    }
                }
            }
            Element::Cl => {
                if let Some(&(c, k)) = g.neighbors(i).first() {
                    let carbon = g.atom(c);
                    let sp3 = g.neighbors(c).iter().all(|&(_, kk)| single(g, kk));
                    if carbon.element == Element::C && !carbon.aromatic && single(g, k) && sp3 {
                        p.alkyl_chlorides.push(ChlorideSite { carbon: c, chlorine: i });
                    }
                }
            }
            _ => {}
        }
    }
    p.carboxylic_acids.sort_unstable();
    p.esters.sort_unstable();
    p.siloxanes.sort_unstable();
    p.alkyl_chlorides.sort_unstable();
    p.aromatic_rings = g
        .ring_info()
        .iter()
        .filter(|r| r.aromatic)
        .map(|r| r.atoms.clone())
        .collect();
    p
}
