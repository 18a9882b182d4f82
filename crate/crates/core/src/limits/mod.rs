//! Projected coupling limits from a noise floor and a signal model.
//!
//! Every projection inverts a signal that is linear (or a known power) in
//! the coupling, so a limit is a ratio of the smallest resolvable force to
//! the unit-coupling signal; there is no root finding.

mod dm;

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;

pub use dm::{
    dm_projection, dm_rate_monte_carlo, DmRateModel, Halo, MonteCarloRate, SpeedDistribution,
    LIMIT_COUNTS,
};

use crate::error::{positive, Error, Result};
use crate::newforces::{
    capacitor_leakage_field, yukawa_force_modulated, yukawa_force_plane, AttractorGeometry,
    YukawaCoupling,
};
use crate::quantities::{convert_range_to_mediator_mass, to_ev, Quantity, CODATA_2018};
use crate::sensor::{min_detectable_force, NoiseModel, Sphere, TrapState};

pub const CURVE_SCHEMA: &str = "levkit-curve/1";

/// Two-plate capacitor whose field leaks out when photons mix with a
/// massive hidden photon.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Capacitor {
    pub voltage: f64,
    pub spacing: f64,
    /// Outer plate to sphere centre.
    pub standoff: f64,
}

/// How the leakage field couples to the sphere.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChargeMode {
    /// F = qE on the sphere's net charge.
    #[default]
    NetCharge,
    /// F = αE ∂E/∂z on the dipole the leakage field itself induces.
    InducedDipole,
}

fn default_significance() -> f64 {
    1.0
}

fn default_harmonic() -> usize {
    1
}

fn default_array() -> u32 {
    1
}

/// Everything a projection needs besides its abscissa grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SearchPlan {
    pub sphere: Sphere,
    pub trap: TrapState,
    pub noise: NoiseModel,
    /// Integration time per sphere, s. Also the DM livetime.
    pub integration_time: f64,
    /// Frequency at which the noise floor is read for static or
    /// capacitor-modulated signals; defaults to the trap resonance.
    #[serde(default)]
    pub signal_frequency: Option<f64>,
    #[serde(default)]
    pub geometry: Option<AttractorGeometry>,
    #[serde(default = "default_harmonic")]
    pub harmonic: usize,
    #[serde(default)]
    pub capacitor: Option<Capacitor>,
    #[serde(default)]
    pub charge_mode: ChargeMode,
    /// Required SNR; 1 reproduces background-free projections.
    #[serde(default = "default_significance")]
    pub significance: f64,
    #[serde(default = "default_array")]
    pub array_size: u32,
}

impl SearchPlan {
    pub fn new(
        sphere: Sphere,
        trap: TrapState,
        noise: NoiseModel,
        integration_time: f64,
    ) -> Result<Self> {
        let plan = SearchPlan {
            sphere,
            trap,
            noise,
            integration_time,
            signal_frequency: None,
            geometry: None,
            harmonic: 1,
            capacitor: None,
            charge_mode: ChargeMode::NetCharge,
            significance: 1.0,
            array_size: 1,
        };
        plan.validate()?;
        Ok(plan)
    }

    pub fn validate(&self) -> Result<()> {
        positive("integration time", self.integration_time)?;
        positive("significance", self.significance)?;
        if let Some(f) = self.signal_frequency {
            positive("signal frequency", f)?;
        }
        if self.array_size < 1 {
            return Err(Error::domain("array size", "must be >= 1"));
        }
        if self.harmonic < 1 {
            return Err(Error::domain("harmonic", "must be >= 1"));
        }
        if let Some(g) = &self.geometry {
            g.validate(&self.sphere)?;
        }
        if let Some(c) = &self.capacitor {
            positive("capacitor voltage", c.voltage)?;
            positive("plate spacing", c.spacing)?;
            positive("standoff", c.standoff)?;
        }
        Ok(())
    }

    /// Sphere-seconds of exposure across the array.
    pub fn exposure(&self) -> f64 {
        self.array_size as f64 * self.integration_time
    }

    /// Frequency of the expected signal.
    pub fn readout_frequency(&self) -> f64 {
        match self
            .geometry
            .as_ref()
            .and_then(AttractorGeometry::drive_frequency)
        {
            Some(f) => f * self.harmonic as f64,
            None => self
                .signal_frequency
                .unwrap_or(self.trap.resonant_frequency()),
        }
    }

    /// Smallest force resolved at unit SNR.
    pub fn force_floor(&self) -> Result<f64> {
        Ok(
            min_detectable_force(&self.noise, self.readout_frequency(), self.integration_time)?
                .value(),
        )
    }

    pub fn with_noise(&self, noise: NoiseModel) -> Self {
        SearchPlan {
            noise,
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AbscissaKind {
    RangeM,
    MediatorMassEv,
    DmMassEv,
}

impl AbscissaKind {
    pub fn column(self) -> &'static str {
        match self {
            AbscissaKind::RangeM => "range_m",
            AbscissaKind::MediatorMassEv => "mediator_mass_ev",
            AbscissaKind::DmMassEv => "dm_mass_ev",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub abscissa: f64,
    pub coupling: f64,
    /// The same point on the alternate axis, when the curve has one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alternate: Option<f64>,
}

/// A grid point without a finite limit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedPoint {
    pub abscissa: f64,
    pub reason: String,
}

/// Inputs that produced a curve, sufficient to recompute it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub code_version: String,
    pub plan: SearchPlan,
    /// Case-specific inputs (grids, halo, threshold, ...).
    pub inputs: BTreeMap<String, Value>,
    #[serde(default)]
    pub rng_seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExclusionCurve {
    pub schema: String,
    pub case: String,
    pub abscissa: AbscissaKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alternate_abscissa: Option<AbscissaKind>,
    /// Name of the bounded coupling column.
    pub coupling: String,
    pub points: Vec<CurvePoint>,
    /// Points where the signal vanished.
    #[serde(default)]
    pub omitted: Vec<SkippedPoint>,
    /// Points with no sensitivity at all (limit at infinity).
    #[serde(default)]
    pub censored: Vec<SkippedPoint>,
    pub provenance: Provenance,
}

impl ExclusionCurve {
    fn new(
        case: &str,
        abscissa: AbscissaKind,
        coupling: &str,
        plan: &SearchPlan,
        inputs: BTreeMap<String, Value>,
    ) -> Self {
        ExclusionCurve {
            schema: CURVE_SCHEMA.into(),
            case: case.into(),
            abscissa,
            alternate_abscissa: None,
            coupling: coupling.into(),
            points: Vec::new(),
            omitted: Vec::new(),
            censored: Vec::new(),
            provenance: Provenance {
                code_version: crate::VERSION.into(),
                plan: plan.clone(),
                inputs,
                rng_seed: None,
            },
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.provenance.rng_seed = Some(seed);
        self
    }

    pub fn with_input(mut self, key: &str, value: Value) -> Self {
        self.provenance.inputs.insert(key.into(), value);
        self
    }

    pub fn couplings(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.coupling).collect()
    }

    /// Checks the curve invariants: increasing abscissa, finite positive couplings.
    pub fn validate(&self) -> Result<()> {
        for w in self.points.windows(2) {
            if !(w[1].abscissa > w[0].abscissa) {
                return Err(Error::invalid("curve", "abscissa not strictly increasing"));
            }
        }
        if let Some(p) = self
            .points
            .iter()
            .find(|p| !(p.coupling.is_finite() && p.coupling > 0.0))
        {
            return Err(Error::invalid(
                "curve",
                format!("coupling {:e} at {:e}", p.coupling, p.abscissa),
            ));
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("curve serialises")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::invalid("curve document", e.to_string()))
    }

    /// CSV with a `#` header; the `provenance` line holds the full JSON.
    pub fn to_csv(&self) -> String {
        use std::fmt::Write as _;
        let mut out = String::new();
        let _ = writeln!(out, "# schema: {}", self.schema);
        let _ = writeln!(out, "# case: {}", self.case);
        let _ = writeln!(out, "# code_version: {}", self.provenance.code_version);
        if let Some(seed) = self.provenance.rng_seed {
            let _ = writeln!(out, "# rng_seed: {seed}");
        }
        let _ = writeln!(
            out,
            "# provenance: {}",
            serde_json::to_string(&self.provenance).expect("serialises")
        );
        for s in &self.omitted {
            let _ = writeln!(out, "# omitted: {:e} ({})", s.abscissa, s.reason);
        }
        for s in &self.censored {
            let _ = writeln!(out, "# censored: {:e} ({})", s.abscissa, s.reason);
        }
        match self.alternate_abscissa {
            Some(alt) => {
                let _ = writeln!(
                    out,
                    "{},{},{}",
                    self.abscissa.column(),
                    alt.column(),
                    self.coupling
                );
                for p in &self.points {
                    let _ = writeln!(
                        out,
                        "{:e},{:e},{:e}",
                        p.abscissa,
                        p.alternate.unwrap_or(f64::NAN),
                        p.coupling
                    );
                }
            }
            None => {
                let _ = writeln!(out, "{},{}", self.abscissa.column(), self.coupling);
                for p in &self.points {
                    let _ = writeln!(out, "{:e},{:e}", p.abscissa, p.coupling);
                }
            }
        }
        out
    }
}

/// `per_decade` logarithmically spaced points from `lo` to `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, per_decade: usize) -> Result<Vec<f64>> {
    positive("grid start", lo)?;
    positive("grid end", hi)?;
    if !(hi > lo) || per_decade == 0 {
        return Err(Error::invalid(
            "grid",
            format!("need lo < hi and points per decade > 0, got [{lo:e}, {hi:e}]"),
        ));
    }
    let decades = (hi / lo).log10();
    let n = (decades * per_decade as f64).ceil().max(1.0) as usize;
    Ok((0..=n)
        .map(|i| {
            if i == n {
                hi
            } else {
                lo * 10f64.powf(decades * i as f64 / n as f64)
            }
        })
        .collect())
}

fn check_grid(grid: &[f64], what: &'static str) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::invalid(what, "empty grid"));
    }
    for &x in grid {
        positive(what, x)?;
    }
    if grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::invalid(what, "grid must be strictly increasing"));
    }
    Ok(())
}

fn grid_input(grid: &[f64]) -> Value {
    Value::from(grid.to_vec())
}

enum Outcome {
    Point(CurvePoint),
    Omitted(SkippedPoint),
}

fn assemble(mut curve: ExclusionCurve, outcomes: Vec<Outcome>) -> Result<ExclusionCurve> {
    for o in outcomes {
        match o {
            Outcome::Point(p) => curve.points.push(p),
            Outcome::Omitted(s) => curve.omitted.push(s),
        }
    }
    curve.validate()?;
    Ok(curve)
}

/// Unit-α Yukawa signal of the plan geometry: the static force for a
/// slab, the drive-harmonic amplitude for a modulated attractor.
pub fn isl_signal(plan: &SearchPlan, range: f64) -> Result<f64> {
    let coupling = YukawaCoupling::isl(1.0, range)?;
    match plan.geometry.as_ref() {
        Some(AttractorGeometry::PlaneSlab(slab)) => {
            Ok(yukawa_force_plane(&plan.sphere, &coupling, slab)?
                .value()
                .abs())
        }
        Some(g) => Ok(yukawa_force_modulated(&plan.sphere, &coupling, g, plan.harmonic)?.value()),
        None => Err(Error::invalid(
            "plan",
            "ISL projection needs an attractor geometry",
        )),
    }
}

/// α_min(λ) = significance · F_min / F_signal(α = 1, λ).
pub fn isl_projection(plan: &SearchPlan, ranges: &[f64]) -> Result<ExclusionCurve> {
    plan.validate()?;
    check_grid(ranges, "range grid")?;
    let floor = plan.force_floor()?;
    let outcomes = ranges
        .par_iter()
        .map(|&lambda| {
            let signal = isl_signal(plan, lambda)?;
            Ok(if signal > 0.0 && signal.is_finite() {
                let alpha = plan.significance * floor / signal;
                if alpha.is_finite() {
                    Outcome::Point(CurvePoint {
                        abscissa: lambda,
                        coupling: alpha,
                        alternate: None,
                    })
                } else {
                    Outcome::Omitted(SkippedPoint {
                        abscissa: lambda,
                        reason: "signal underflows".into(),
                    })
                }
            } else {
                Outcome::Omitted(SkippedPoint {
                    abscissa: lambda,
                    reason: "zero signal force".into(),
                })
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut inputs = BTreeMap::new();
    inputs.insert("ranges_m".into(), grid_input(ranges));
    inputs.insert("force_floor_n".into(), Value::from(floor));
    assemble(
        ExclusionCurve::new("isl", AbscissaKind::RangeM, "alpha", plan, inputs),
        outcomes,
    )
}

/// χ_min(λ) from the capacitor leakage field acting on the sphere, with
/// the dark-photon mass as an alternate axis.
pub fn coulomb_projection(plan: &SearchPlan, ranges: &[f64]) -> Result<ExclusionCurve> {
    plan.validate()?;
    check_grid(ranges, "range grid")?;
    let cap = plan
        .capacitor
        .ok_or_else(|| Error::invalid("plan", "Coulomb projection needs a capacitor"))?;
    let floor = plan.force_floor()? * plan.significance;
    let charge = plan.sphere.charge().abs();
    let polarizability = plan.sphere.polarizability();
    if plan.charge_mode == ChargeMode::NetCharge && charge == 0.0 {
        return Err(Error::invalid(
            "sphere",
            "net-charge mode needs a charged sphere",
        ));
    }
    let outcomes = ranges
        .par_iter()
        .map(|&lambda| {
            let field = capacitor_leakage_field(
                cap.voltage,
                cap.spacing,
                cap.standoff,
                &YukawaCoupling::coulomb(1.0, lambda)?,
            )?
            .value();
            let chi = match plan.charge_mode {
                ChargeMode::NetCharge => (floor / (charge * field)).sqrt(),
                // E ∝ e^{−z/λ} outside the plates, so F = αE²/λ ∝ χ⁴
                ChargeMode::InducedDipole => {
                    (floor * lambda / (polarizability * field * field)).powf(0.25)
                }
            };
            if !(chi.is_finite() && chi > 0.0) {
                return Ok(Outcome::Omitted(SkippedPoint {
                    abscissa: lambda,
                    reason: "leakage field vanishes".into(),
                }));
            }
            let mass = to_ev(convert_range_to_mediator_mass(Quantity::length(lambda)?)?.value());
            Ok(Outcome::Point(CurvePoint {
                abscissa: lambda,
                coupling: chi,
                alternate: Some(mass),
            }))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut inputs = BTreeMap::new();
    inputs.insert("ranges_m".into(), grid_input(ranges));
    inputs.insert(
        "force_floor_n".into(),
        Value::from(floor / plan.significance),
    );
    let mut curve = ExclusionCurve::new("coulomb", AbscissaKind::RangeM, "chi", plan, inputs);
    curve.alternate_abscissa = Some(AbscissaKind::MediatorMassEv);
    assemble(curve, outcomes)
}

/// Smallest fractional charge, in units of e, resolved in a field `field`.
pub fn millicharge_sensitivity(plan: &SearchPlan, field: f64) -> Result<f64> {
    plan.validate()?;
    positive("electric field", field)?;
    Ok(plan.significance * plan.force_floor()? / (CODATA_2018.e * field))
}

/// Bound on |q_p + q_n + q_e| per nucleon, in units of e.
pub fn neutrality_sensitivity(plan: &SearchPlan, field: f64) -> Result<f64> {
    Ok(millicharge_sensitivity(plan, field)? / plan.sphere.nucleon_count())
}

/// Axion mass and the frequency of the gravitational waves it sources.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AxionLine {
    pub decay_constant_gev: f64,
    pub mass_ev: f64,
    pub gw_frequency_hz: f64,
}

/// m_a at f_a = 10⁹ GeV.
pub const AXION_MASS_AT_1E9_GEV: f64 = 5.7e-3;

/// m_a = 5.7 meV (10⁹ GeV / f_a); f_gw = 2 m_a c²/h.
pub fn axion_gw_line(decay_constant_gev: f64) -> Result<AxionLine> {
    positive("axion decay constant", decay_constant_gev)?;
    let mass_ev = AXION_MASS_AT_1E9_GEV * 1e9 / decay_constant_gev;
    Ok(AxionLine {
        decay_constant_gev,
        mass_ev,
        gw_frequency_hz: 2.0 * mass_ev * CODATA_2018.e / CODATA_2018.h(),
    })
}

/// Decay constant whose line falls at `gw_frequency_hz`.
pub fn axion_decay_constant_for_frequency(gw_frequency_hz: f64) -> Result<f64> {
    positive("GW frequency", gw_frequency_hz)?;
    Ok(2.0 * AXION_MASS_AT_1E9_GEV * 1e9 * CODATA_2018.e / (CODATA_2018.h() * gw_frequency_hz))
}
