//! The ten immersion-relevant properties and their units.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Property {
    BoilingPoint,
    MeltingPoint,
    FlashPoint,
    CriticalTemperature,
    DecompositionTemperature,
    SpecificHeat,
    VaporPressure,
    DynamicViscosity,
    Density,
    DielectricConstant,
}

impl Property {
    pub const ALL: [Property; 10] = [
        Property::BoilingPoint,
        Property::MeltingPoint,
        Property::FlashPoint,
        Property::CriticalTemperature,
        Property::DecompositionTemperature,
        Property::SpecificHeat,
        Property::VaporPressure,
        Property::DynamicViscosity,
        Property::Density,
        Property::DielectricConstant,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Property::BoilingPoint => "boiling_point",
            Property::MeltingPoint => "melting_point",
            Property::FlashPoint => "flash_point",
            Property::CriticalTemperature => "critical_temperature",
            Property::DecompositionTemperature => "decomposition_temperature",
            Property::SpecificHeat => "specific_heat",
            Property::VaporPressure => "vapor_pressure",
            Property::DynamicViscosity => "dynamic_viscosity",
            Property::Density => "density",
            Property::DielectricConstant => "dielectric_constant",
        }
    }

    pub fn unit(self) -> &'static str {
        match self {
            Property::BoilingPoint
            | Property::MeltingPoint
            | Property::FlashPoint
            | Property::CriticalTemperature
            | Property::DecompositionTemperature => "°C",
            Property::SpecificHeat => "J/(g·°C)",
            Property::VaporPressure => "kPa",
            Property::DynamicViscosity => "N·s/m²",
            Property::Density => "kg/m³",
            Property::DielectricConstant => "1",
        }
    }
}

impl fmt::Display for Property {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown property {0:?}")]
pub struct UnknownProperty(pub String);

impl FromStr for Property {
    type Err = UnknownProperty;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Property::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| UnknownProperty(s.to_string()))
    }
}

/// One value per [`Property`], in the units of [`Property::unit`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PropertyVector {
    pub boiling_point: f64,
    pub melting_point: f64,
    pub flash_point: f64,
    pub critical_temperature: f64,
    pub decomposition_temperature: f64,
    pub specific_heat: f64,
    pub vapor_pressure: f64,
    pub dynamic_viscosity: f64,
    pub density: f64,
    pub dielectric_constant: f64,
}

impl PropertyVector {
    pub fn from_array(v: [f64; 10]) -> Self {
        PropertyVector {
            boiling_point: v[0],
            melting_point: v[1],
            flash_point: v[2],
            critical_temperature: v[3],
            decomposition_temperature: v[4],
            specific_heat: v[5],
            vapor_pressure: v[6],
            dynamic_viscosity: v[7],
            density: v[8],
            dielectric_constant: v[9],
        }
    }

    /// Panics unless `v` has exactly ten entries.
    pub fn from_slice(v: &[f64]) -> Self {
        Self::from_array(v.try_into().expect("ten property values"))
    }

    pub fn to_array(&self) -> [f64; 10] {
        [
            self.boiling_point,
            self.melting_point,
            self.flash_point,
            self.critical_temperature,
            self.decomposition_temperature,
            self.specific_heat,
            self.vapor_pressure,
            self.dynamic_viscosity,
            self.density,
            self.dielectric_constant,
        ]
    }

    pub fn get(&self, p: Property) -> f64 {
        self.to_array()[p.index()]
    }

    pub fn set(&mut self, p: Property, v: f64) {
        let mut a = self.to_array();
        a[p.index()] = v;
        *self = Self::from_array(a);
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        for p in Property::ALL {
            assert_eq!(p.name().parse::<Property>().unwrap(), p);
            assert_eq!(Property::ALL[p.index()], p);
        }
        assert!("pour_point".parse::<Property>().is_err());
    }

    #[test]
    fn vector_accessors() {
        let mut v = PropertyVector::from_array([0.0; 10]);
        v.set(Property::Density, 950.0);
        assert_eq!(v.density, 950.0);
        assert_eq!(v.get(Property::Density), 950.0);
        assert_eq!(v.to_array()[8], 950.0);
    }
}
