//! CODATA 2018 recommended values, SI units.

use serde::Serialize;

/// Standard gravity, exact by definition.
pub const STANDARD_GRAVITY: f64 = 9.806_65;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConstantsTable {
    /// Reduced Planck constant (J s)
    pub hbar: f64,
    /// Boltzmann constant (J/K)
    pub k_b: f64,
    /// Speed of light (m/s)
    pub c: f64,
    /// Newtonian constant of gravitation (m^3 kg^-1 s^-2)
    pub g_n: f64,
    /// Elementary charge (C)
    pub e: f64,
    /// Vacuum permittivity (F/m)
    pub epsilon_0: f64,
    /// Fine-structure constant
    pub alpha_em: f64,
    /// Atomic mass unit (kg)
    pub amu: f64,
    pub source: &'static str,
}

pub const CODATA_2018: ConstantsTable = ConstantsTable {
    hbar: 1.054_571_817e-34,
    k_b: 1.380_649e-23,
    c: 299_792_458.0,
    g_n: 6.674_30e-11,
    e: 1.602_176_634e-19,
    epsilon_0: 8.854_187_812_8e-12,
    alpha_em: 7.297_352_569_3e-3,
    amu: 1.660_539_066_60e-27,
    source: "CODATA 2018",
};

impl ConstantsTable {
    /// Planck constant h = 2πħ.
    pub fn h(&self) -> f64 {
        2.0 * std::f64::consts::PI * self.hbar
    }

    /// ħc in J m.
    pub fn hbar_c(&self) -> f64 {
        self.hbar * self.c
    }
}
