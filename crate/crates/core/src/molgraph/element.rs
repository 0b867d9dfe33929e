use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Standard atomic weight of hydrogen, used for implicit hydrogens.
pub const HYDROGEN_MASS: f64 = 1.008;

/// Elements accepted by the SMILES subset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Element {
    B,
    C,
    N,
    O,
    F,
    Si,
    P,
    S,
    Cl,
    Br,
    I,
}

impl Element {
    pub const ALL: [Element; 11] = [
        Element::B,
        Element::C,
        Element::N,
        Element::O,
        Element::F,
        Element::Si,
        Element::P,
        Element::S,
        Element::Cl,
        Element::Br,
        Element::I,
    ];

    /// Standard atomic weight (amu), three decimals.
    pub fn atomic_mass(self) -> f64 {
        match self {
            Element::B => 10.81,
            Element::C => 12.011,
            Element::N => 14.007,
            Element::O => 15.999,
            Element::F => 18.998,
            Element::Si => 28.085,
            Element::P => 30.974,
            Element::S => 32.06,
            Element::Cl => 35.45,
            Element::Br => 79.904,
            Element::I => 126.904,
        }
    }

    pub fn default_valence(self) -> u8 {
        match self {
            Element::C | Element::Si => 4,
            Element::N | Element::P | Element::B => 3,
            Element::O | Element::S => 2,
            Element::F | Element::Cl | Element::Br | Element::I => 1,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Element::B => "B",
            Element::C => "C",
            Element::N => "N",
            Element::O => "O",
            Element::F => "F",
            Element::Si => "Si",
            Element::P => "P",
            Element::S => "S",
            Element::Cl => "Cl",
            Element::Br => "Br",
            Element::I => "I",
        }
    }

    /// Position in [`Element::ALL`]; used for one-hot features.
    pub fn index(self) -> usize {
        Element::ALL.iter().position(|&e| e == self).unwrap()
    }

    /// Whether the element may carry a lowercase aromatic flag.
    pub fn can_be_aromatic(self) -> bool {
        matches!(self, Element::C | Element::N | Element::O | Element::S)
    }

    /// Whether the element may be written outside brackets.
    pub fn in_organic_subset(self) -> bool {
        self != Element::Si
    }

    pub fn is_halogen(self) -> bool {
        matches!(self, Element::F | Element::Cl | Element::Br | Element::I)
    }
}

impl fmt::Display for Element {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

impl FromStr for Element {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Element::ALL
            .iter()
            .copied()
            .find(|e| e.symbol() == s)
            .ok_or(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn valence_table() {
        let expected = [
            (Element::C, 4),
            (Element::O, 2),
            (Element::N, 3),
            (Element::Si, 4),
            (Element::P, 3),
            (Element::S, 2),
            (Element::F, 1),
            (Element::Cl, 1),
            (Element::Br, 1),
            (Element::I, 1),
            (Element::B, 3),
        ];
        for (e, v) in expected {
            assert_eq!(e.default_valence(), v, "{e}");
            assert!(e.atomic_mass() > 0.0);
        }
    }

    #[test]
    fn symbols_round_trip() {
        for e in Element::ALL {
            assert_eq!(e.symbol().parse::<Element>(), Ok(e));
            assert_eq!(Element::ALL[e.index()], e);
        }
        assert!("Xe".parse::<Element>().is_err());
    }
}
