//! Levitated sphere, trap state and force-noise floors.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{finite, non_negative, positive, Error, Result};
use crate::quantities::constants::STANDARD_GRAVITY;
use crate::quantities::{Dimension, Quantity, CODATA_2018};

/// Low-density silica, kg/m³.
pub const SILICA_DENSITY: f64 = 1850.0;
/// Relative permittivity of silica.
pub const SILICA_PERMITTIVITY: f64 = 3.9;

pub const MIN_RADIUS: f64 = 10e-9;
pub const MAX_RADIUS: f64 = 200e-6;

/// A uniform dielectric sphere.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sphere {
    radius: f64,
    density: f64,
    relative_permittivity: f64,
    net_charge: i64,
    material_label: String,
}

impl Sphere {
    pub fn new(
        radius: f64,
        density: f64,
        relative_permittivity: f64,
        net_charge: i64,
        material_label: impl Into<String>,
    ) -> Result<Self> {
        finite("radius", radius)?;
        if !(MIN_RADIUS..=MAX_RADIUS).contains(&radius) {
            return Err(Error::domain(
                "radius",
                format!("{radius} m outside [10 nm, 200 um]"),
            ));
        }
        positive("density", density)?;
        finite("relative permittivity", relative_permittivity)?;
        if relative_permittivity <= 1.0 {
            return Err(Error::domain("relative permittivity", "must be > 1"));
        }
        Ok(Sphere {
            radius,
            density,
            relative_permittivity,
            net_charge,
            material_label: material_label.into(),
        })
    }

    /// Neutral silica sphere of the given diameter.
    pub fn silica(diameter: f64) -> Result<Self> {
        Sphere::new(
            diameter / 2.0,
            SILICA_DENSITY,
            SILICA_PERMITTIVITY,
            0,
            "silica",
        )
    }

    pub fn with_net_charge(mut self, charge_in_e: i64) -> Self {
        self.net_charge = charge_in_e;
        self
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn diameter(&self) -> f64 {
        2.0 * self.radius
    }

    pub fn density(&self) -> f64 {
        self.density
    }

    pub fn relative_permittivity(&self) -> f64 {
        self.relative_permittivity
    }

    pub fn net_charge(&self) -> i64 {
        self.net_charge
    }

    /// Net charge in coulombs.
    pub fn charge(&self) -> f64 {
        self.net_charge as f64 * CODATA_2018.e
    }

    pub fn material_label(&self) -> &str {
        &self.material_label
    }

    pub fn volume(&self) -> f64 {
        4.0 / 3.0 * PI * self.radius.powi(3)
    }

    pub fn mass(&self) -> f64 {
        self.volume() * self.density
    }

    /// Mass in atomic mass units, rounded.
    pub fn nucleon_count(&self) -> f64 {
        (self.mass() / CODATA_2018.amu).round().max(1.0)
    }

    /// Clausius–Mossotti factor (ε−1)/(ε+2).
    pub fn clausius_mossotti(&self) -> f64 {
        let e = self.relative_permittivity;
        (e - 1.0) / (e + 2.0)
    }

    /// Static polarizability α with p = α E, in C m²/V.
    pub fn polarizability(&self) -> f64 {
        4.0 * PI * CODATA_2018.epsilon_0 * self.radius.powi(3) * self.clausius_mossotti()
    }
}

/// Trap resonance, gas damping, bath temperature and cold-damping gain.
///
/// `feedback_gain` multiplies the gas damping: the closed-loop damping rate
/// is γ(1 + gain) and the centre-of-mass temperature is T/(1 + gain).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrapState {
    resonant_frequency: f64,
    damping_rate: f64,
    temperature: f64,
    feedback_gain: f64,
}

impl TrapState {
    pub fn new(
        resonant_frequency: f64,
        damping_rate: f64,
        temperature: f64,
        feedback_gain: f64,
    ) -> Result<Self> {
        positive("resonant frequency", resonant_frequency)?;
        positive("damping rate", damping_rate)?;
        positive("temperature", temperature)?;
        non_negative("feedback gain", feedback_gain)?;
        Ok(TrapState {
            resonant_frequency,
            damping_rate,
            temperature,
            feedback_gain,
        })
    }

    pub fn resonant_frequency(&self) -> f64 {
        self.resonant_frequency
    }

    pub fn angular_frequency(&self) -> f64 {
        2.0 * PI * self.resonant_frequency
    }

    pub fn damping_rate(&self) -> f64 {
        self.damping_rate
    }

    /// Bath temperature.
    pub fn temperature(&self) -> f64 {
        self.temperature
    }

    pub fn feedback_gain(&self) -> f64 {
        self.feedback_gain
    }

    pub fn effective_damping(&self) -> f64 {
        self.damping_rate * (1.0 + self.feedback_gain)
    }

    /// Cold-damped centre-of-mass temperature.
    pub fn effective_temperature(&self) -> f64 {
        self.temperature / (1.0 + self.feedback_gain)
    }

    pub fn with_feedback_gain(mut self, gain: f64) -> Result<Self> {
        non_negative("feedback gain", gain)?;
        self.feedback_gain = gain;
        Ok(self)
    }

    /// Gain that cools the bath temperature down to `target`.
    pub fn gain_for_temperature(&self, target: f64) -> Result<f64> {
        positive("target temperature", target)?;
        if target > self.temperature {
            return Err(Error::domain(
                "target temperature",
                "above bath temperature",
            ));
        }
        Ok(self.temperature / target - 1.0)
    }
}

/// Frequency dependence of one noise contribution, as a force ASD.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Spectrum {
    White {
        asd: f64,
    },
    /// Log-log interpolated table, clamped at the ends.
    Table {
        frequencies: Vec<f64>,
        asds: Vec<f64>,
    },
}

impl Spectrum {
    pub fn table(frequencies: Vec<f64>, asds: Vec<f64>) -> Result<Self> {
        if frequencies.is_empty() || frequencies.len() != asds.len() {
            return Err(Error::invalid(
                "noise table",
                "need equal, non-empty frequency and ASD columns",
            ));
        }
        if frequencies.windows(2).any(|w| !(w[1] > w[0])) || frequencies[0] <= 0.0 {
            return Err(Error::invalid(
                "noise table",
                "frequencies must be positive and strictly increasing",
            ));
        }
        if asds.iter().any(|a| !a.is_finite() || *a <= 0.0) {
            return Err(Error::invalid("noise table", "ASD values must be positive"));
        }
        Ok(Spectrum::Table { frequencies, asds })
    }

    pub fn asd(&self, frequency: f64) -> f64 {
        match self {
            Spectrum::White { asd } => *asd,
            Spectrum::Table { frequencies, asds } => {
                let n = frequencies.len();
                if n == 1 || frequency <= frequencies[0] {
                    return asds[0];
                }
                if frequency >= frequencies[n - 1] {
                    return asds[n - 1];
                }
                let i = frequencies.partition_point(|&f| f <= frequency) - 1;
                let t =
                    (frequency / frequencies[i]).ln() / (frequencies[i + 1] / frequencies[i]).ln();
                (asds[i].ln() * (1.0 - t) + asds[i + 1].ln() * t).exp()
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseContribution {
    pub label: String,
    pub spectrum: Spectrum,
}

/// Independent force-noise contributions, combined in quadrature.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    contributions: Vec<NoiseContribution>,
}

impl NoiseModel {
    pub fn new() -> Self {
        NoiseModel::default()
    }

    pub fn with(mut self, label: impl Into<String>, spectrum: Spectrum) -> Result<Self> {
        self.add(label, spectrum)?;
        Ok(self)
    }

    pub fn add(&mut self, label: impl Into<String>, spectrum: Spectrum) -> Result<()> {
        if let Spectrum::White { asd } = spectrum {
            non_negative("noise ASD", asd)?;
        }
        self.contributions.push(NoiseContribution {
            label: label.into(),
            spectrum,
        });
        Ok(())
    }

    /// Single white floor.
    pub fn white(label: impl Into<String>, asd: f64) -> Result<Self> {
        NoiseModel::new().with(label, Spectrum::White { asd })
    }

    /// Thermal, standard-quantum-limit and an optional technical floor.
    pub fn standard(
        sphere: &Sphere,
        trap: &TrapState,
        technical_floor: Option<f64>,
    ) -> Result<Self> {
        let mut model = NoiseModel::new()
            .with(
                "thermal",
                Spectrum::White {
                    asd: thermal_force_asd(sphere, trap).value(),
                },
            )?
            .with(
                "sql",
                Spectrum::White {
                    asd: sql_force_asd(sphere, trap).value(),
                },
            )?;
        if let Some(floor) = technical_floor {
            model.add("technical", Spectrum::White { asd: floor })?;
        }
        Ok(model)
    }

    pub fn contributions(&self) -> &[NoiseContribution] {
        &self.contributions
    }

    /// Scales every contribution by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        let contributions = self
            .contributions
            .iter()
            .map(|c| NoiseContribution {
                label: c.label.clone(),
                spectrum: match &c.spectrum {
                    Spectrum::White { asd } => Spectrum::White { asd: asd * factor },
                    Spectrum::Table { frequencies, asds } => Spectrum::Table {
                        frequencies: frequencies.clone(),
                        asds: asds.iter().map(|a| a * factor).collect(),
                    },
                },
            })
            .collect();
        NoiseModel { contributions }
    }

    pub fn total_psd(&self, frequency: f64) -> f64 {
        self.contributions
            .iter()
            .map(|c| c.spectrum.asd(frequency).powi(2))
            .sum()
    }

    pub fn total_asd(&self, frequency: f64) -> Quantity {
        Quantity::force_asd(self.total_psd(frequency).sqrt()).expect("finite contributions")
    }
}

/// On-resonance standard quantum limit √(2 ħ m ω₀ γ).
pub fn sql_force_asd(sphere: &Sphere, trap: &TrapState) -> Quantity {
    let s = 2.0 * CODATA_2018.hbar * sphere.mass() * trap.angular_frequency() * trap.damping_rate();
    Quantity::force_asd(s.sqrt()).expect("validated inputs")
}

/// Thermal force noise √(2 k_B T m γ) of the gas bath.
///
/// Cold damping leaves this unchanged: T_eff γ_eff = T γ.
pub fn thermal_force_asd(sphere: &Sphere, trap: &TrapState) -> Quantity {
    let s = 2.0 * CODATA_2018.k_b * trap.temperature() * sphere.mass() * trap.damping_rate();
    Quantity::force_asd(s.sqrt()).expect("validated inputs")
}

/// Force ASD divided by the sphere mass.
pub fn acceleration_asd(force_asd: Quantity, sphere: &Sphere) -> Result<Quantity> {
    let f = force_asd.expect(Dimension::ForceAsd)?;
    non_negative("force ASD", f)?;
    Quantity::acceleration_asd(f / sphere.mass())
}

/// Acceleration ASD in units of ng/√Hz (g = 9.80665 m/s²).
pub fn in_nano_g(acceleration_asd: Quantity) -> Result<f64> {
    Ok(acceleration_asd.expect(Dimension::AccelerationAsd)? / STANDARD_GRAVITY * 1e9)
}

/// Force resolvable at unit amplitude SNR after integrating for τ.
pub fn min_detectable_force(
    noise: &NoiseModel,
    frequency: f64,
    integration_time: f64,
) -> Result<Quantity> {
    positive("integration time", integration_time)?;
    Quantity::force(noise.total_asd(frequency).value() / integration_time.sqrt())
}

/// Induced dipole moment p = 4πε₀ r³ (ε−1)/(ε+2) E.
pub fn induced_dipole(sphere: &Sphere, field: Quantity) -> Result<Quantity> {
    let e = field.expect(Dimension::ElectricField)?;
    non_negative("electric field", e)?;
    Quantity::dipole_moment(sphere.polarizability() * e)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// A 10 µm sphere whose density gives m = 1.05e-12 kg.
    fn reference_sphere() -> Sphere {
        let r: f64 = 5e-6;
        let rho = 1.05e-12 / (4.0 / 3.0 * PI * r.powi(3));
        Sphere::new(r, rho, SILICA_PERMITTIVITY, 0, "silica").unwrap()
    }

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    #[test]
    fn sphere_validation() {
        assert!(Sphere::new(5e-9, 2000.0, 3.9, 0, "x").is_err());
        assert!(Sphere::new(300e-6, 2000.0, 3.9, 0, "x").is_err());
        assert!(Sphere::new(1e-6, 0.0, 3.9, 0, "x").is_err());
        assert!(Sphere::new(1e-6, 2000.0, 1.0, 0, "x").is_err());
        assert!(Sphere::new(10e-9, 2000.0, 1.5, 0, "x").is_ok());
    }

    #[test]
    fn derived_mass_and_nucleons() {
        let s = reference_sphere();
        assert!(rel(s.mass(), 1.05e-12) < 1e-12);
        let s = Sphere::silica(10e-6).unwrap();
        let m = 4.0 / 3.0 * PI * 125e-18 * 1850.0;
        assert!(rel(s.mass(), m) < 1e-12);
        assert!(rel(s.nucleon_count(), m / 1.66053906660e-27) < 1e-12);
    }

    #[test]
    fn sql_example() {
        let trap = TrapState::new(100.0, 1e-2, 300.0, 0.0).unwrap();
        // 2 * 1.054571817e-34 * 1.05e-12 * 2π·100 * 1e-2, by hand: 1.3914e-45
        let v = sql_force_asd(&reference_sphere(), &trap).value();
        assert!(rel(v, 1.391_47e-45f64.sqrt()) < 1e-4, "{v}");
        assert!(rel(v, 3.73e-23) < 2e-3);
    }

    #[test]
    fn thermal_example() {
        let trap = TrapState::new(100.0, 1e-2, 300.0, 0.0).unwrap();
        let v = thermal_force_asd(&reference_sphere(), &trap).value();
        assert!(rel(v, (2.0 * 1.380649e-23 * 300.0 * 1.05e-12 * 1e-2f64).sqrt()) < 1e-12);
        assert!(rel(v, 9.33e-18) < 1e-3);

        let doubled = TrapState::new(100.0, 2e-2, 300.0, 0.0).unwrap();
        let v2 = thermal_force_asd(&reference_sphere(), &doubled).value();
        assert!(rel(v2 / v, 2f64.sqrt()) < 1e-12);
    }

    #[test]
    fn mass_doubling() {
        let trap = TrapState::new(100.0, 1e-2, 300.0, 0.0).unwrap();
        let s = reference_sphere();
        let heavy = Sphere::new(
            s.radius(),
            2.0 * s.density(),
            s.relative_permittivity(),
            0,
            "heavy",
        )
        .unwrap();
        let force = Quantity::force_asd(1e-18).unwrap();
        let a1 = acceleration_asd(force, &s).unwrap().value();
        let a2 = acceleration_asd(force, &heavy).unwrap().value();
        // fixed force: 1/m
        assert!(rel(a1 / a2, 2.0) < 1e-12);
        assert!(
            rel(
                thermal_force_asd(&heavy, &trap).value() / thermal_force_asd(&s, &trap).value(),
                2f64.sqrt()
            ) < 1e-12
        );
        assert!(
            rel(
                sql_force_asd(&heavy, &trap).value() / sql_force_asd(&s, &trap).value(),
                2f64.sqrt()
            ) < 1e-12
        );
        // thermal-limited: 1/√m
        let t1 = acceleration_asd(thermal_force_asd(&s, &trap), &s)
            .unwrap()
            .value();
        let t2 = acceleration_asd(thermal_force_asd(&heavy, &trap), &heavy)
            .unwrap()
            .value();
        assert!(rel(t1 / t2, 2f64.sqrt()) < 1e-12);
    }

    #[test]
    fn cold_damping_keeps_thermal_asd() {
        let s = reference_sphere();
        let trap = TrapState::new(100.0, 1e-2, 300.0, 0.0).unwrap();
        let cooled = trap.with_feedback_gain(99.0).unwrap();
        assert!(rel(cooled.effective_temperature(), 3.0) < 1e-12);
        let a = thermal_force_asd(&s, &trap).value();
        let b = (2.0
            * CODATA_2018.k_b
            * cooled.effective_temperature()
            * s.mass()
            * cooled.effective_damping())
        .sqrt();
        assert!(rel(a, b) < 1e-12);
    }

    #[test]
    fn effective_temperature_decreases_with_gain() {
        let trap = TrapState::new(100.0, 1e-2, 300.0, 0.0).unwrap();
        let temps: Vec<f64> = [0.0, 0.5, 1.0, 10.0, 1e6]
            .iter()
            .map(|&g| trap.with_feedback_gain(g).unwrap().effective_temperature())
            .collect();
        assert!(temps.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn acceleration_benchmark() {
        let f = Quantity::force_asd(1e-18).unwrap();
        let a = acceleration_asd(f, &reference_sphere()).unwrap();
        assert!(rel(a.value(), 9.524e-7) < 1e-3);
        assert!((in_nano_g(a).unwrap() - 97.1).abs() < 0.5);
        assert_eq!(
            acceleration_asd(Quantity::force_asd(0.0).unwrap(), &reference_sphere())
                .unwrap()
                .value(),
            0.0
        );
    }

    #[test]
    fn min_detectable_force_examples() {
        let noise = NoiseModel::white("floor", 1e-18).unwrap();
        assert!(
            rel(
                min_detectable_force(&noise, 50.0, 1e4).unwrap().value(),
                1e-20
            ) < 1e-12
        );
        assert_eq!(
            min_detectable_force(&noise, 50.0, 1.0).unwrap().value(),
            1e-18
        );
        let a = min_detectable_force(&noise, 50.0, 3.0).unwrap().value();
        let b = min_detectable_force(&noise, 50.0, 12.0).unwrap().value();
        assert!(rel(a / b, 2.0) < 1e-12);
        assert!(min_detectable_force(&noise, 50.0, 0.0).is_err());
        assert!(min_detectable_force(&noise, 50.0, -1.0).is_err());
    }

    #[test]
    fn induced_dipole_example() {
        let s = Sphere::new(5e-6, SILICA_DENSITY, 3.9, 0, "silica").unwrap();
        let p = induced_dipole(&s, Quantity::electric_field(1e6).unwrap())
            .unwrap()
            .value();
        // 4π ε0 (5e-6)^3 (2.9/5.9) 1e6 by hand
        let hand = 4.0 * PI * 8.8541878128e-12 * 1.25e-16 * (2.9 / 5.9) * 1e6;
        assert!(rel(p, hand) < 1e-12);
        assert!(rel(p, 6.84e-21) < 1e-2);
        let e_cm = p / (1.602176634e-19 * 1e-2);
        assert!(e_cm > 1.0 && e_cm < 10.0);
        assert_eq!(
            induced_dipole(&s, Quantity::electric_field(0.0).unwrap())
                .unwrap()
                .value(),
            0.0
        );
        let big = Sphere::new(10e-6, SILICA_DENSITY, 3.9, 0, "silica").unwrap();
        let p2 = induced_dipole(&big, Quantity::electric_field(1e6).unwrap())
            .unwrap()
            .value();
        assert!(rel(p2 / p, 8.0) < 1e-12);
    }

    #[test]
    fn noise_model_quadrature_sum_and_monotone() {
        let s = reference_sphere();
        let trap = TrapState::new(100.0, 1e-2, 300.0, 0.0).unwrap();
        let mut model = NoiseModel::standard(&s, &trap, None).unwrap();
        let before = model.total_asd(100.0).value();
        model
            .add(
                "technical",
                Spectrum::table(vec![1.0, 1e3], vec![1e-17, 1e-18]).unwrap(),
            )
            .unwrap();
        for f in [0.5, 1.0, 10.0, 100.0, 999.0, 5e3] {
            let sum: f64 = model
                .contributions()
                .iter()
                .map(|c| c.spectrum.asd(f).powi(2))
                .sum();
            assert!(rel(model.total_asd(f).value().powi(2), sum) < 1e-12);
            assert!(model
                .contributions()
                .iter()
                .all(|c| c.spectrum.asd(f) >= 0.0));
        }
        assert!(model.total_asd(100.0).value() >= before);
        assert!(
            rel(
                Spectrum::table(vec![1.0, 100.0], vec![1.0, 100.0])
                    .unwrap()
                    .asd(10.0),
                10.0
            ) < 1e-12
        );
    }

    #[test]
    fn sql_limits() {
        let s = reference_sphere();
        let small = TrapState::new(100.0, 1e-300, 300.0, 0.0).unwrap();
        assert!(sql_force_asd(&s, &small).value() < 1e-170);
    }

    proptest::proptest! {
        #[test]
        fn sql_equals_thermal_at_quantum_temperature(
            log_r in -7.5f64..-4.0,
            f0 in 1.0f64..1e5,
            log_g in -8.0f64..2.0,
        ) {
            let s = Sphere::new(10f64.powf(log_r), 2000.0, 3.9, 0, "x").unwrap();
            let probe = TrapState::new(f0, 10f64.powf(log_g), 1.0, 0.0).unwrap();
            let t = CODATA_2018.hbar * probe.angular_frequency() / CODATA_2018.k_b;
            let trap = TrapState::new(f0, 10f64.powf(log_g), t, 0.0).unwrap();
            let a = sql_force_asd(&s, &trap).value();
            let b = thermal_force_asd(&s, &trap).value();
            proptest::prop_assert!((a - b).abs() <= 1e-12 * a);
        }

        #[test]
        fn asd_scalings(log_r in -7.0f64..-4.0, log_g in -6.0f64..1.0) {
            let s1 = Sphere::new(10f64.powf(log_r), 1000.0, 3.9, 0, "x").unwrap();
            let s2 = Sphere::new(10f64.powf(log_r), 2000.0, 3.9, 0, "x").unwrap();
            let trap = TrapState::new(100.0, 10f64.powf(log_g), 300.0, 0.0).unwrap();
            let root2 = 2f64.sqrt();
            proptest::prop_assert!((thermal_force_asd(&s2, &trap).value() / thermal_force_asd(&s1, &trap).value() - root2).abs() < 1e-12);
            proptest::prop_assert!((sql_force_asd(&s2, &trap).value() / sql_force_asd(&s1, &trap).value() - root2).abs() < 1e-12);
            let f = Quantity::force_asd(1e-18).unwrap();
            let r = acceleration_asd(f, &s1).unwrap().value() / acceleration_asd(f, &s2).unwrap().value();
            proptest::prop_assert!((r - 2.0).abs() < 1e-12);
            // thermally limited acceleration goes as 1/√m
            let a1 = acceleration_asd(thermal_force_asd(&s1, &trap), &s1).unwrap().value();
            let a2 = acceleration_asd(thermal_force_asd(&s2, &trap), &s2).unwrap().value();
            proptest::prop_assert!((a1 / a2 - root2).abs() < 1e-12);
        }
    }
}
