//! Structure-based screening rules applied before and after virtual
//! synthesis.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::molgraph::{Element, MolGraph};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Violation {
    HalogenFBrI,
    Sulfur,
    AromaticRing,
    StrainedRing,
    Chlorine,
}

impl Violation {
    pub const ALL: [Violation; 5] = [
        Violation::HalogenFBrI,
        Violation::Sulfur,
        Violation::AromaticRing,
        Violation::StrainedRing,
        Violation::Chlorine,
    ];
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilterVerdict {
    pub passed: bool,
    /// Every triggered rule, in [`Violation::ALL`] order.
    pub violations: Vec<Violation>,
}

impl FilterVerdict {
    fn from(violations: Vec<Violation>) -> Self {
        FilterVerdict {
            passed: violations.is_empty(),
            violations,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Pre,
    Post,
}

/// Largest ring size counted as strained.
pub const STRAINED_RING_MAX: usize = 4;

/// Pre-synthesis rules. Chlorine is allowed so alkyl chlorides can react.
pub fn prefilter(g: &MolGraph) -> FilterVerdict {
    FilterVerdict::from(common_violations(g))
}

/// Post-synthesis rules: everything in [`prefilter`] plus any chlorine.
pub fn postfilter(g: &MolGraph) -> FilterVerdict {
    let mut v = common_violations(g);
    if g.atoms().iter().any(|a| a.element == Element::Cl) {
        v.push(Violation::Chlorine);
    }
    FilterVerdict::from(v)
}

pub fn apply(stage: Stage, g: &MolGraph) -> FilterVerdict {
    match stage {
        Stage::Pre => prefilter(g),
        Stage::Post => postfilter(g),
    }
}

fn common_violations(g: &MolGraph) -> Vec<Violation> {
    let mut v = Vec::new();
    let atoms = g.atoms();
    if atoms
        .iter()
        .any(|a| matches!(a.element, Element::F | Element::Br | Element::I))
    {
        v.push(Violation::HalogenFBrI);
    }
    if atoms.iter().any(|a| a.element == Element::S) {
        v.push(Violation::Sulfur);
    }
    let rings = g.ring_info();
    if atoms.iter().any(|a| a.aromatic) || rings.iter().any(|r| r.aromatic) {
        v.push(Violation::AromaticRing);
    }
    if rings.iter().any(|r| r.len() <= STRAINED_RING_MAX) {
        v.push(Violation::StrainedRing);
    }
    v
}

/// Aggregate counts over a molecule stream.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilterReport {
    pub total: u64,
    pub passed: u64,
    pub violations: BTreeMap<Violation, u64>,
}

impl FilterReport {
    pub fn record(&mut self, verdict: &FilterVerdict) {
        self.total += 1;
        if verdict.passed {
            self.passed += 1;
        }
        for &v in &verdict.violations {
            *self.violations.entry(v).or_default() += 1;
        }
    }

    pub fn merge(&mut self, other: &FilterReport) {
        self.total += other.total;
        self.passed += other.passed;
        for (&k, &c) in &other.violations {
            *self.violations.entry(k).or_default() += c;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::molgraph::parse_smiles;
    use Violation::*;

    fn pre(s: &str) -> Vec<Violation> {
        prefilter(&parse_smiles(s).unwrap()).violations
    }

    fn post(s: &str) -> Vec<Violation> {
        postfilter(&parse_smiles(s).unwrap()).violations
    }

    #[test]
    fn prefilter_rules() {
        assert_eq!(pre("c1ccccc1"), vec![AromaticRing]);
        assert_eq!(pre("CCCl"), vec![]);
        assert_eq!(pre("C1CCC1"), vec![StrainedRing]);
        assert_eq!(pre("C1CC1"), vec![StrainedRing]);
        assert_eq!(pre("C1CCCC1"), vec![]);
        assert_eq!(pre("CCS"), vec![Sulfur]);
        assert_eq!(pre("FC(F)(F)C(F)(F)C(F)(F)C(F)(F)C(F)(F)C(F)(F)F"), vec![HalogenFBrI]);
        assert_eq!(pre("CCBr"), vec![HalogenFBrI]);
        assert_eq!(pre("CCI"), vec![HalogenFBrI]);
    }

    #[test]
    fn postfilter_rules() {
        assert_eq!(post("CCCl"), vec![Chlorine]);
        assert_eq!(post("CCOCC"), vec![]);
        assert_eq!(post("c1ccsc1"), vec![Sulfur, AromaticRing]);
        assert_eq!(post("ClC1CC1c1ccccc1"), vec![AromaticRing, StrainedRing, Chlorine]);
    }

    #[test]
    fn report_counts_every_violation() {
        let mut r = FilterReport::default();
        for s in ["CCO", "c1ccsc1", "CCCl"] {
            r.record(&postfilter(&parse_smiles(s).unwrap()));
        }
        assert_eq!(r.total, 3);
        assert_eq!(r.passed, 1);
        assert_eq!(r.violations[&Sulfur], 1);
        assert_eq!(r.violations[&AromaticRing], 1);
        assert_eq!(r.violations[&Chlorine], 1);
    }
}
