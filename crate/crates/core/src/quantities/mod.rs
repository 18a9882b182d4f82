//! Dimension-tagged scalars, physical constants and unit conversions.
//!
//! Everything internal is SI. Values that arrive in eV or other
//! convenience units are converted once, at the boundary, by [`units`].

pub mod constants;
pub mod extended;
pub mod units;

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{finite, positive, Error, Result};

pub use constants::{ConstantsTable, CODATA_2018};

/// Closed set of physical dimensions understood by the toolkit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dimension {
    Mass,
    Length,
    Time,
    Frequency,
    Force,
    Acceleration,
    Charge,
    Energy,
    Temperature,
    ElectricField,
    ForcePsd,
    ForceAsd,
    AccelerationAsd,
    Momentum,
    DipoleMoment,
    Voltage,
    Density,
    Velocity,
    Dimensionless,
}

impl Dimension {
    pub const ALL: [Dimension; 19] = [
        Dimension::Mass,
        Dimension::Length,
        Dimension::Time,
        Dimension::Frequency,
        Dimension::Force,
        Dimension::Acceleration,
        Dimension::Charge,
        Dimension::Energy,
        Dimension::Temperature,
        Dimension::ElectricField,
        Dimension::ForcePsd,
        Dimension::ForceAsd,
        Dimension::AccelerationAsd,
        Dimension::Momentum,
        Dimension::DipoleMoment,
        Dimension::Voltage,
        Dimension::Density,
        Dimension::Velocity,
        Dimension::Dimensionless,
    ];

    /// SI unit symbol used when a quantity is written back out.
    pub fn si_symbol(self) -> &'static str {
        match self {
            Dimension::Mass => "kg",
            Dimension::Length => "m",
            Dimension::Time => "s",
            Dimension::Frequency => "Hz",
            Dimension::Force => "N",
            Dimension::Acceleration => "m/s^2",
            Dimension::Charge => "C",
            Dimension::Energy => "J",
            Dimension::Temperature => "K",
            Dimension::ElectricField => "V/m",
            Dimension::ForcePsd => "N^2/Hz",
            Dimension::ForceAsd => "N/rtHz",
            Dimension::AccelerationAsd => "m/s^2/rtHz",
            Dimension::Momentum => "kg*m/s",
            Dimension::DipoleMoment => "C*m",
            Dimension::Voltage => "V",
            Dimension::Density => "kg/m^3",
            Dimension::Velocity => "m/s",
            Dimension::Dimensionless => "",
        }
    }
}

impl fmt::Display for Dimension {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Dimension::Mass => "mass",
            Dimension::Length => "length",
            Dimension::Time => "time",
            Dimension::Frequency => "frequency",
            Dimension::Force => "force",
            Dimension::Acceleration => "acceleration",
            Dimension::Charge => "charge",
            Dimension::Energy => "energy",
            Dimension::Temperature => "temperature",
            Dimension::ElectricField => "electric field",
            Dimension::ForcePsd => "force PSD",
            Dimension::ForceAsd => "force ASD",
            Dimension::AccelerationAsd => "acceleration ASD",
            Dimension::Momentum => "momentum",
            Dimension::DipoleMoment => "dipole moment",
            Dimension::Voltage => "voltage",
            Dimension::Density => "density",
            Dimension::Velocity => "velocity",
            Dimension::Dimensionless => "dimensionless",
        };
        f.write_str(name)
    }
}

/// A finite SI value tagged with its dimension.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Quantity {
    value: f64,
    dimension: Dimension,
}

impl Quantity {
    pub fn new(value: f64, dimension: Dimension) -> Result<Self> {
        finite("quantity", value)?;
        Ok(Quantity { value, dimension })
    }

    pub fn value(&self) -> f64 {
        self.value
    }

    pub fn dimension(&self) -> Dimension {
        self.dimension
    }

    /// Returns the SI value after checking the dimension.
    pub fn expect(&self, dimension: Dimension) -> Result<f64> {
        if self.dimension == dimension {
            Ok(self.value)
        } else {
            Err(Error::DimensionMismatch {
                expected: dimension,
                found: self.dimension,
            })
        }
    }

    pub fn checked_add(self, rhs: Quantity) -> Result<Quantity> {
        rhs.expect(self.dimension)?;
        Quantity::new(self.value + rhs.value, self.dimension)
    }

    pub fn checked_sub(self, rhs: Quantity) -> Result<Quantity> {
        rhs.expect(self.dimension)?;
        Quantity::new(self.value - rhs.value, self.dimension)
    }

    /// Multiplies by a dimensionless factor.
    pub fn scale(self, factor: f64) -> Result<Quantity> {
        Quantity::new(self.value * factor, self.dimension)
    }

    /// Ratio of two like quantities.
    pub fn ratio(self, rhs: Quantity) -> Result<f64> {
        rhs.expect(self.dimension)?;
        finite("ratio", self.value / rhs.value)
    }

    pub fn try_cmp(&self, rhs: &Quantity) -> Result<Ordering> {
        rhs.expect(self.dimension)?;
        Ok(self.value.total_cmp(&rhs.value))
    }
}

impl fmt::Display for Quantity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.dimension.si_symbol() {
            "" => write!(f, "{:e}", self.value),
            sym => write!(f, "{:e} {}", self.value, sym),
        }
    }
}

macro_rules! ctor {
    ($($name:ident => $dim:ident),* $(,)?) => {
        impl Quantity {
            $(
                #[doc = concat!("Builds a ", stringify!($dim), " quantity from an SI value.")]
                pub fn $name(value: f64) -> Result<Self> {
                    Quantity::new(value, Dimension::$dim)
                }
            )*
        }
    };
}

ctor! {
    mass => Mass,
    length => Length,
    time => Time,
    frequency => Frequency,
    force => Force,
    acceleration => Acceleration,
    charge => Charge,
    energy => Energy,
    temperature => Temperature,
    electric_field => ElectricField,
    force_asd => ForceAsd,
    acceleration_asd => AccelerationAsd,
    momentum => Momentum,
    dipole_moment => DipoleMoment,
    voltage => Voltage,
    density => Density,
    velocity => Velocity,
    dimensionless => Dimensionless,
}

/// Yukawa range λ = ħ/(m c) of a mediator with rest energy `mass`.
pub fn convert_mediator_mass_to_range(mass: Quantity) -> Result<Quantity> {
    let energy = mass.expect(Dimension::Energy)?;
    positive("mediator mass", energy)?;
    let c = &CODATA_2018;
    Quantity::length(c.hbar * c.c / energy)
}

/// Inverse of [`convert_mediator_mass_to_range`].
pub fn convert_range_to_mediator_mass(range: Quantity) -> Result<Quantity> {
    let lambda = range.expect(Dimension::Length)?;
    positive("range", lambda)?;
    let c = &CODATA_2018;
    Quantity::energy(c.hbar * c.c / lambda)
}

/// Electronvolts to joules.
pub fn ev(value: f64) -> f64 {
    value * CODATA_2018.e
}

/// Joules to electronvolts.
pub fn to_ev(joules: f64) -> f64 {
    joules / CODATA_2018.e
}
