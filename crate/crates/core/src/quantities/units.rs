//! Parsing of `"<number> <unit>"` strings into SI quantities.
//!
//! The table is deliberately small: every symbol maps to exactly one
//! dimension and one multiplicative factor to SI.

use super::constants::{CODATA_2018 as C, STANDARD_GRAVITY};
use super::{Dimension, Quantity};
use crate::error::{Error, Result};

use Dimension::*;

const EV: f64 = C.e;
const GEV: f64 = 1e9 * C.e;

/// (symbol, dimension, factor to SI)
static UNITS: &[(&str, Dimension, f64)] = &[
    ("", Dimensionless, 1.0),
    ("1", Dimensionless, 1.0),
    // length
    ("m", Length, 1.0),
    ("km", Length, 1e3),
    ("cm", Length, 1e-2),
    ("mm", Length, 1e-3),
    ("um", Length, 1e-6),
    ("µm", Length, 1e-6),
    ("nm", Length, 1e-9),
    // mass
    ("kg", Mass, 1.0),
    ("g", Mass, 1e-3),
    ("mg", Mass, 1e-6),
    ("ug", Mass, 1e-9),
    ("ng", Mass, 1e-12),
    ("pg", Mass, 1e-15),
    ("fg", Mass, 1e-18),
    ("amu", Mass, C.amu),
    // time
    ("s", Time, 1.0),
    ("ms", Time, 1e-3),
    ("us", Time, 1e-6),
    ("µs", Time, 1e-6),
    ("ns", Time, 1e-9),
    ("min", Time, 60.0),
    ("h", Time, 3600.0),
    ("day", Time, 86_400.0),
    ("yr", Time, 365.25 * 86_400.0),
    // frequency and rates
    ("Hz", Frequency, 1.0),
    ("mHz", Frequency, 1e-3),
    ("kHz", Frequency, 1e3),
    ("MHz", Frequency, 1e6),
    ("1/s", Frequency, 1.0),
    ("s^-1", Frequency, 1.0),
    // force
    ("N", Force, 1.0),
    ("mN", Force, 1e-3),
    ("uN", Force, 1e-6),
    ("nN", Force, 1e-9),
    ("pN", Force, 1e-12),
    ("fN", Force, 1e-15),
    ("aN", Force, 1e-18),
    ("zN", Force, 1e-21),
    ("yN", Force, 1e-24),
    // acceleration
    ("m/s^2", Acceleration, 1.0),
    ("g_n", Acceleration, STANDARD_GRAVITY),
    // charge
    ("C", Charge, 1.0),
    ("e", Charge, C.e),
    // energy
    ("J", Energy, 1.0),
    ("neV", Energy, 1e-9 * EV),
    ("ueV", Energy, 1e-6 * EV),
    ("meV", Energy, 1e-3 * EV),
    ("eV", Energy, EV),
    ("keV", Energy, 1e3 * EV),
    ("MeV", Energy, 1e6 * EV),
    ("GeV", Energy, GEV),
    ("TeV", Energy, 1e12 * EV),
    // temperature
    ("K", Temperature, 1.0),
    ("mK", Temperature, 1e-3),
    ("uK", Temperature, 1e-6),
    ("µK", Temperature, 1e-6),
    ("nK", Temperature, 1e-9),
    // electric field
    ("V/m", ElectricField, 1.0),
    ("kV/m", ElectricField, 1e3),
    ("MV/m", ElectricField, 1e6),
    ("V/cm", ElectricField, 1e2),
    ("kV/cm", ElectricField, 1e5),
    ("V/mm", ElectricField, 1e3),
    ("kV/mm", ElectricField, 1e6),
    // spectral densities
    ("N^2/Hz", ForcePsd, 1.0),
    ("N/rtHz", ForceAsd, 1.0),
    ("fN/rtHz", ForceAsd, 1e-15),
    ("aN/rtHz", ForceAsd, 1e-18),
    ("zN/rtHz", ForceAsd, 1e-21),
    ("m/s^2/rtHz", AccelerationAsd, 1.0),
    ("ug_n/rtHz", AccelerationAsd, 1e-6 * STANDARD_GRAVITY),
    ("ng_n/rtHz", AccelerationAsd, 1e-9 * STANDARD_GRAVITY),
    // momentum
    ("kg*m/s", Momentum, 1.0),
    ("keV/c", Momentum, 1e3 * EV / C.c),
    ("MeV/c", Momentum, 1e6 * EV / C.c),
    ("GeV/c", Momentum, GEV / C.c),
    // dipole moment
    ("C*m", DipoleMoment, 1.0),
    ("e*cm", DipoleMoment, C.e * 1e-2),
    // voltage
    ("V", Voltage, 1.0),
    ("mV", Voltage, 1e-3),
    ("kV", Voltage, 1e3),
    // density
    ("kg/m^3", Density, 1.0),
    ("g/cm^3", Density, 1e3),
    ("GeV/cm^3", Density, GEV / (C.c * C.c) * 1e6),
    // velocity
    ("m/s", Velocity, 1.0),
    ("km/s", Velocity, 1e3),
];

/// Looks up a unit symbol.
pub fn unit(symbol: &str) -> Option<(Dimension, f64)> {
    UNITS
        .iter()
        .find(|(s, _, _)| *s == symbol)
        .map(|&(_, d, f)| (d, f))
}

/// Parses `"5 um"`, `"1e-18 N/rtHz"`, `"3"` (dimensionless).
pub fn parse_quantity(text: &str) -> Result<Quantity> {
    let text = text.trim();
    let (number, symbol) = match text.find(char::is_whitespace) {
        Some(i) => (&text[..i], text[i..].trim()),
        None => (text, ""),
    };
    let value: f64 = number
        .parse()
        .map_err(|_| Error::UnitParse(format!("bad number {number:?} in {text:?}")))?;
    let (dim, factor) = unit(symbol)
        .ok_or_else(|| Error::UnitParse(format!("unknown unit {symbol:?} in {text:?}")))?;
    Quantity::new(scale(value, factor), dim)
        .map_err(|_| Error::UnitParse(format!("non-finite value in {text:?}")))
}

/// `value · factor`, dividing by the exact power of ten for submultiple
/// prefixes so that "100 um" is 1e-4 m to the last bit.
fn scale(value: f64, factor: f64) -> f64 {
    if factor < 1.0 {
        let inverse = (1.0 / factor).round();
        if inverse * factor == 1.0 && inverse < 1e22 {
            return value / inverse;
        }
    }
    value * factor
}

/// Parses and checks the dimension.
pub fn parse_as(text: &str, dimension: Dimension) -> Result<f64> {
    let q = parse_quantity(text)?;
    if q.dimension() != dimension {
        return Err(Error::UnitParse(format!(
            "{text:?} has dimension {}, expected {dimension}",
            q.dimension()
        )));
    }
    Ok(q.value())
}

/// Canonical SI rendering, parseable by [`parse_quantity`] bit-exactly.
pub fn format_si(value: f64, dimension: Dimension) -> String {
    match dimension.si_symbol() {
        "" => format!("{value:e}"),
        sym => format!("{value:e} {sym}"),
    }
}
