use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::properties::{Property, PropertyVector};

use super::ScreeningError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Greater,
    Less,
    Leq,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdSpec {
    pub property: Property,
    pub direction: Direction,
    pub value: f64,
}

impl ThresholdSpec {
    pub fn new(property: Property, direction: Direction, value: f64) -> Self {
        ThresholdSpec {
            property,
            direction,
            value,
        }
    }

    pub fn passes(&self, v: f64) -> bool {
        match self.direction {
            Direction::Greater => v > self.value,
            Direction::Less => v < self.value,
            Direction::Leq => v <= self.value,
        }
    }

    /// Whether every value passing `self` also passes `other`.
    pub fn implies(&self, other: &ThresholdSpec) -> bool {
        if self.property != other.property {
            return false;
        }
        use Direction::*;
        match (self.direction, other.direction) {
            (Greater, Greater) => self.value >= other.value,
            (Less, Less) | (Leq, Leq) | (Less, Leq) => self.value <= other.value,
            (Leq, Less) => self.value < other.value,
            _ => false,
        }
    }

    /// Shifted by `fraction·|value|` in the lenient direction.
    pub fn relaxed(&self, fraction: f64) -> ThresholdSpec {
        let shift = fraction * self.value.abs();
        let value = match self.direction {
            Direction::Greater => self.value - shift,
            Direction::Less | Direction::Leq => self.value + shift,
        };
        ThresholdSpec { value, ..*self }
    }
}

/// Property thresholds, at most one per property. Structural rules are
/// the filters' postfilter, applied by the pipeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<ThresholdSpec>", into = "Vec<ThresholdSpec>")]
pub struct CriteriaSet {
    thresholds: Vec<ThresholdSpec>,
}

impl TryFrom<Vec<ThresholdSpec>> for CriteriaSet {
    type Error = ScreeningError;

    fn try_from(v: Vec<ThresholdSpec>) -> Result<Self, Self::Error> {
        CriteriaSet::new(v)
    }
}

impl From<CriteriaSet> for Vec<ThresholdSpec> {
    fn from(c: CriteriaSet) -> Self {
        c.thresholds
    }
}

impl CriteriaSet {
    pub fn new(thresholds: Vec<ThresholdSpec>) -> Result<Self, ScreeningError> {
        for (i, t) in thresholds.iter().enumerate() {
            if !t.value.is_finite() {
                return Err(ScreeningError::NonFiniteThreshold(t.property));
            }
            if thresholds[..i].iter().any(|o| o.property == t.property) {
                return Err(ScreeningError::DuplicateThreshold(t.property));
            }
        }
        Ok(CriteriaSet { thresholds })
    }

    /// Adapted immersion-fluid criteria. Specific heat carries no gate.
    pub fn immersion_default() -> Self {
        use Direction::*;
        use Property::*;
        CriteriaSet::new(vec![
            ThresholdSpec::new(BoilingPoint, Greater, 150.0),
            ThresholdSpec::new(MeltingPoint, Less, -30.0),
            ThresholdSpec::new(FlashPoint, Greater, 140.0),
            ThresholdSpec::new(CriticalTemperature, Greater, 155.0),
            ThresholdSpec::new(DecompositionTemperature, Greater, 150.0),
            ThresholdSpec::new(VaporPressure, Less, 0.8),
            ThresholdSpec::new(DynamicViscosity, Less, 0.015),
            ThresholdSpec::new(Density, Less, 2000.0),
            ThresholdSpec::new(DielectricConstant, Leq, 6.0),
        ])
        .expect("default criteria are valid")
    }

    pub fn thresholds(&self) -> &[ThresholdSpec] {
        &self.thresholds
    }

    pub fn get(&self, p: Property) -> Option<&ThresholdSpec> {
        self.thresholds.iter().find(|t| t.property == p)
    }

    pub fn from_json(s: &str) -> Result<Self, ScreeningError> {
        serde_json::from_str(s).map_err(|e| ScreeningError::Config(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("criteria serialize")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Evaluation {
    /// One entry per threshold, in set order.
    pub passes: Vec<bool>,
    pub pass: bool,
}

pub fn evaluate(pv: &PropertyVector, set: &CriteriaSet) -> Evaluation {
    let passes: Vec<bool> = set.thresholds.iter().map(|t| t.passes(pv.get(t.property))).collect();
    let pass = passes.iter().all(|&p| p);
    Evaluation { passes, pass }
}

/// Surrogate-stage loosening: each threshold moves by a fraction of its
/// magnitude, `default_fraction` unless overridden per property.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Relaxation {
    pub default_fraction: f64,
    #[serde(default)]
    pub per_property: BTreeMap<Property, f64>,
}

impl Default for Relaxation {
    fn default() -> Self {
        Relaxation::uniform(0.15)
    }
}

impl Relaxation {
    pub fn uniform(fraction: f64) -> Self {
        Relaxation {
            default_fraction: fraction,
            per_property: BTreeMap::new(),
        }
    }

    pub fn apply(&self, set: &CriteriaSet) -> CriteriaSet {
        CriteriaSet {
            thresholds: set
                .thresholds
                .iter()
                .map(|t| t.relaxed(*self.per_property.get(&t.property).unwrap_or(&self.default_fraction)))
                .collect(),
        }
    }
}

/// Fails unless every vector passing `final_set` also passes `relaxed`.
pub fn check_relaxation(relaxed: &CriteriaSet, final_set: &CriteriaSet) -> Result<(), ScreeningError> {
    for r in &relaxed.thresholds {
        let implied = final_set.get(r.property).is_some_and(|f| f.implies(r));
        if !implied {
            return Err(ScreeningError::RelaxationInversion(r.property));
        }
    }
    Ok(())
}

pub const DIELECTRIC_EDGES: [f64; 3] = [2.3, 4.0, 6.0];
pub const FLASH_EDGES: [f64; 2] = [140.0, 150.0];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum DielectricBin {
    /// ε ≤ 2.3
    Low,
    /// 2.3 < ε ≤ 4
    Mid,
    /// 4 < ε ≤ 6
    High,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum FlashBin {
    /// fp > 150 °C
    Above,
    /// 140 ≤ fp ≤ 150 °C
    Band,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CriterionPartition {
    pub dielectric: DielectricBin,
    pub flash: FlashBin,
}

impl CriterionPartition {
    /// 1-6, dielectric bin major, high flash point first.
    pub fn index(&self) -> u8 {
        let d = match self.dielectric {
            DielectricBin::Low => 0,
            DielectricBin::Mid => 1,
            DielectricBin::High => 2,
        };
        let f = match self.flash {
            FlashBin::Above => 0,
            FlashBin::Band => 1,
        };
        1 + 2 * d + f
    }

    pub fn from_index(index: u8) -> Option<Self> {
        if !(1..=6).contains(&index) {
            return None;
        }
        let k = index - 1;
        Some(CriterionPartition {
            dielectric: [DielectricBin::Low, DielectricBin::Mid, DielectricBin::High][usize::from(k / 2)],
            flash: [FlashBin::Above, FlashBin::Band][usize::from(k % 2)],
        })
    }
}

pub fn partition_of(pv: &PropertyVector) -> Option<CriterionPartition> {
    let eps = pv.dielectric_constant;
    let fp = pv.flash_point;
    let dielectric = if eps <= DIELECTRIC_EDGES[0] {
        DielectricBin::Low
    } else if eps <= DIELECTRIC_EDGES[1] {
        DielectricBin::Mid
    } else if eps <= DIELECTRIC_EDGES[2] {
        DielectricBin::High
    } else {
        return None;
    };
    let flash = if fp > FLASH_EDGES[1] {
        FlashBin::Above
    } else if fp >= FLASH_EDGES[0] {
        FlashBin::Band
    } else {
        return None;
    };
    Some(CriterionPartition { dielectric, flash })
}

/// Criterion index 1-6 of the dielectric × flash-point cell, if any.
pub fn assign_partition(pv: &PropertyVector) -> Option<u8> {
    partition_of(pv).map(|p| p.index())
}

/// Inputs to the convection figures of merit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FomInputs {
    /// Thermal conductivity, W/(m·K).
    pub k: f64,
    /// Thermal expansion, 1/K.
    pub beta: f64,
    /// Density, kg/m³.
    pub rho: f64,
    /// Specific heat, J/(g·°C).
    pub c_p: f64,
    /// Dynamic viscosity, N·s/m².
    pub mu: f64,
}

impl FomInputs {
    fn check(&self) -> Result<(), ScreeningError> {
        for (name, v) in [("k", self.k), ("beta", self.beta), ("rho", self.rho), ("c_p", self.c_p), ("mu", self.mu)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(ScreeningError::NonPositiveInput(name));
            }
        }
        Ok(())
    }
}

/// Natural convection: `k·(β·c_p·ρ²/(μ·k))^0.2813`.
pub fn fom1(i: &FomInputs) -> Result<f64, ScreeningError> {
    i.check()?;
    Ok(i.k * (i.beta * i.c_p * i.rho * i.rho / (i.mu * i.k)).powf(0.2813))
}

/// Developing laminar flow: `k·ρ·c_p/μ`.
pub fn fom2(i: &FomInputs) -> Result<f64, ScreeningError> {
    i.check()?;
    Ok(i.k * i.rho * i.c_p / i.mu)
}

/// Dynamic viscosity itself.
pub fn fom3(i: &FomInputs) -> Result<f64, ScreeningError> {
    i.check()?;
    Ok(i.mu)
}
