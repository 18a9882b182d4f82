//! Dark matter scattering off a levitated sphere through a light mediator.
//!
//! The DM particle sees V(r) = κ e^{−r/λ}/r with κ = α_n N ħc. In Born
//! approximation dσ/dq² = 4πκ² / (v² (q² + q_φ²)²), q_φ = ħ/λ, so the cross
//! section for kicks above q_min is
//!
//!   σ(v) = 4πκ²/v² · [1/(q_min² + q_φ²) − 1/(q_max² + q_φ²)],  q_max = 2μv.
//!
//! For a massless mediator this is exactly the classical Rutherford result,
//! which the Monte Carlo reference samples orbit by orbit.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{check_grid, AbscissaKind, CurvePoint, ExclusionCurve, SearchPlan, SkippedPoint};
use crate::dynamics::derive_seed;
use crate::error::{non_negative, positive, Error, Result};
use crate::quadrature::{integrate_piecewise, pairwise_sum, Tolerance};
use crate::quantities::{ev, CODATA_2018};

/// Expected events that a zero-background search excludes at ≈95 % CL.
pub const LIMIT_COUNTS: f64 = 3.0;

/// Standard halo model. SI units: kg/m³ and m/s.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Halo {
    pub density: f64,
    pub v0: f64,
    pub v_escape: f64,
    pub v_earth: f64,
}

impl Default for Halo {
    fn default() -> Self {
        let c = CODATA_2018.c;
        Halo {
            density: 0.3 * ev(1e9) / (c * c) * 1e6,
            v0: 220e3,
            v_escape: 550e3,
            v_earth: 230e3,
        }
    }
}

impl Halo {
    pub fn validate(&self) -> Result<()> {
        positive("DM density", self.density)?;
        positive("v0", self.v0)?;
        positive("escape speed", self.v_escape)?;
        non_negative("Earth speed", self.v_earth)?;
        if self.v_earth >= self.v_escape {
            return Err(Error::domain(
                "Earth speed",
                "must be below the escape speed",
            ));
        }
        Ok(())
    }
}

/// Lab-frame speed distribution of a Maxwellian halo truncated at the
/// escape speed, boosted by the Earth's motion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpeedDistribution {
    halo: Halo,
    norm: f64,
}

impl SpeedDistribution {
    pub fn new(halo: Halo) -> Result<Self> {
        halo.validate()?;
        let mut d = SpeedDistribution { halo, norm: 1.0 };
        let total = d.integrate(0.0, |_| 1.0);
        d.norm = 1.0 / total;
        Ok(d)
    }

    pub fn max_speed(&self) -> f64 {
        self.halo.v_escape + self.halo.v_earth
    }

    fn shape(&self, v: f64) -> f64 {
        let Halo {
            v0,
            v_escape,
            v_earth,
            ..
        } = self.halo;
        if v <= 0.0 || v >= v_escape + v_earth {
            return 0.0;
        }
        if v_earth == 0.0 {
            return v * v * (-(v * v) / (v0 * v0)).exp();
        }
        // angular integral of the boosted Maxwellian, up to constants
        let near = (-(v - v_earth).powi(2) / (v0 * v0)).exp();
        let far = if v < v_escape - v_earth {
            (-(v + v_earth).powi(2) / (v0 * v0)).exp()
        } else {
            (-(v_escape * v_escape) / (v0 * v0)).exp()
        };
        v / v_earth * (near - far)
    }

    /// Normalised probability density in speed, s/m.
    pub fn pdf(&self, v: f64) -> f64 {
        self.norm * self.shape(v)
    }

    /// ∫_{v_lo} f(v) g(v) dv.
    pub fn integrate(&self, v_lo: f64, mut g: impl FnMut(f64) -> f64) -> f64 {
        let Halo {
            v_escape, v_earth, ..
        } = self.halo;
        let mut breaks = vec![v_lo.max(0.0)];
        for b in [v_escape - v_earth, v_escape + v_earth] {
            if b > breaks[breaks.len() - 1] {
                breaks.push(b);
            }
        }
        if breaks.len() < 2 {
            return 0.0;
        }
        integrate_piecewise(|v| self.pdf(v) * g(v), &breaks, Tolerance::relative(1e-11)).value
    }
}

/// Event rate model for one DM mass, mediator range and threshold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DmRateModel {
    pub speeds: SpeedDistribution,
    /// kg
    pub dm_mass: f64,
    pub sphere_mass: f64,
    pub nucleons: f64,
    /// m; infinite for a massless mediator.
    pub mediator_range: f64,
    /// kg m/s
    pub q_min: f64,
}

impl DmRateModel {
    pub fn new(
        halo: Halo,
        dm_mass: f64,
        sphere_mass: f64,
        nucleons: f64,
        mediator_range: f64,
        q_min: f64,
    ) -> Result<Self> {
        positive("DM mass", dm_mass)?;
        positive("sphere mass", sphere_mass)?;
        positive("nucleon count", nucleons)?;
        positive("threshold", q_min)?;
        if !(mediator_range > 0.0) {
            return Err(Error::domain("mediator range", "must be > 0"));
        }
        Ok(DmRateModel {
            speeds: SpeedDistribution::new(halo)?,
            dm_mass,
            sphere_mass,
            nucleons,
            mediator_range,
            q_min,
        })
    }

    pub fn reduced_mass(&self) -> f64 {
        self.dm_mass * self.sphere_mass / (self.dm_mass + self.sphere_mass)
    }

    /// κ = α_n N ħc
    pub fn kappa(&self, alpha_n: f64) -> f64 {
        alpha_n * self.nucleons * CODATA_2018.hbar_c()
    }

    fn q_phi(&self) -> f64 {
        if self.mediator_range.is_infinite() {
            0.0
        } else {
            CODATA_2018.hbar / self.mediator_range
        }
    }

    /// Largest kick any halo particle can deliver.
    pub fn kinematic_limit(&self) -> f64 {
        2.0 * self.reduced_mass() * self.speeds.max_speed()
    }

    /// Cross section for kicks above threshold at speed `v`, m².
    pub fn cross_section(&self, v: f64, alpha_n: f64) -> f64 {
        let q_max = 2.0 * self.reduced_mass() * v;
        if q_max <= self.q_min {
            return 0.0;
        }
        let qp2 = self.q_phi().powi(2);
        let k = self.kappa(alpha_n);
        4.0 * PI * k * k / (v * v)
            * (1.0 / (self.q_min.powi(2) + qp2) - 1.0 / (q_max * q_max + qp2))
    }

    /// DM number density, 1/m³.
    pub fn number_density(&self) -> f64 {
        self.speeds.halo.density / self.dm_mass
    }

    /// Events above threshold per second per sphere.
    pub fn rate(&self, alpha_n: f64) -> f64 {
        let v_min = self.q_min / (2.0 * self.reduced_mass());
        if v_min >= self.speeds.max_speed() {
            return 0.0;
        }
        self.number_density()
            * self
                .speeds
                .integrate(v_min, |v| v * self.cross_section(v, alpha_n))
    }

    /// α_n giving [`LIMIT_COUNTS`] expected events over `exposure`
    /// sphere-seconds; `None` when the threshold is kinematically out of reach.
    pub fn alpha_limit(&self, exposure: f64) -> Option<f64> {
        let counts = self.rate(1.0) * exposure;
        (counts > 0.0).then(|| (LIMIT_COUNTS / counts).sqrt())
    }
}

/// Monte Carlo rate estimate and its one-sigma statistical error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MonteCarloRate {
    pub rate: f64,
    pub std_error: f64,
    pub samples: usize,
}

const MC_CHUNK: usize = 1 << 16;

/// Rate above threshold from sampled halo velocities and classical
/// Rutherford orbits, tan(θ/2) = κ/(μv²b), q = 2μv sin(θ/2). Massless
/// mediator only. Chunks carry their own derived seeds, so the result does
/// not depend on the number of worker threads.
pub fn dm_rate_monte_carlo(
    model: &DmRateModel,
    alpha_n: f64,
    samples: usize,
    seed: u64,
) -> Result<MonteCarloRate> {
    if model.mediator_range.is_finite() {
        return Err(Error::invalid(
            "mediator range",
            "the orbit sampler covers the massless case only",
        ));
    }
    if samples == 0 {
        return Err(Error::invalid("samples", "must be > 0"));
    }
    let halo = model.speeds.halo;
    let mu = model.reduced_mass();
    let kappa = model.kappa(alpha_n);
    let q_min = model.q_min;
    let chunks = samples.div_ceil(MC_CHUNK);
    let sums: Vec<(f64, f64)> = (0..chunks)
        .into_par_iter()
        .map(|chunk| {
            let n = MC_CHUNK.min(samples - chunk * MC_CHUNK);
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, chunk as u64));
            let gauss = Normal::new(0.0, halo.v0 / 2f64.sqrt()).expect("positive width");
            let mut w = Vec::with_capacity(n);
            for _ in 0..n {
                let u = loop {
                    let u = [
                        gauss.sample(&mut rng),
                        gauss.sample(&mut rng),
                        gauss.sample(&mut rng),
                    ];
                    if u[0] * u[0] + u[1] * u[1] + u[2] * u[2] < halo.v_escape * halo.v_escape {
                        break u;
                    }
                };
                let v = (u[0] * u[0] + u[1] * u[1] + (u[2] - halo.v_earth).powi(2)).sqrt();
                let b_max = 2.0 * kappa / (v * q_min);
                let b = b_max * rng.random::<f64>().sqrt();
                let t = kappa / (mu * v * v * b);
                let q = 2.0 * mu * v * t / (1.0 + t * t).sqrt();
                w.push(if q > q_min {
                    v * PI * b_max * b_max
                } else {
                    0.0
                });
            }
            let sq: Vec<f64> = w.iter().map(|x| x * x).collect();
            (pairwise_sum(&w), pairwise_sum(&sq))
        })
        .collect();
    let sum = pairwise_sum(&sums.iter().map(|s| s.0).collect::<Vec<_>>());
    let sum_sq = pairwise_sum(&sums.iter().map(|s| s.1).collect::<Vec<_>>());
    let n = samples as f64;
    let mean = sum / n;
    let var = (sum_sq / n - mean * mean).max(0.0);
    let density = model.number_density();
    Ok(MonteCarloRate {
        rate: density * mean,
        std_error: density * (var / n).sqrt(),
        samples,
    })
}

/// α_n limit versus DM mass (eV) for a fixed mediator range and kick
/// threshold `q_min` (kg m/s), over the plan's array exposure.
pub fn dm_projection(
    plan: &SearchPlan,
    halo: &Halo,
    dm_masses_ev: &[f64],
    mediator_range: f64,
    q_min: f64,
) -> Result<ExclusionCurve> {
    plan.validate()?;
    halo.validate()?;
    check_grid(dm_masses_ev, "DM mass grid")?;
    let c2 = CODATA_2018.c.powi(2);
    let exposure = plan.exposure();
    let outcomes = dm_masses_ev
        .par_iter()
        .map(|&m| {
            let model = DmRateModel::new(
                *halo,
                ev(m) / c2,
                plan.sphere.mass(),
                plan.sphere.nucleon_count(),
                mediator_range,
                q_min,
            )?;
            Ok(match model.alpha_limit(exposure) {
                Some(alpha) if alpha.is_finite() => Ok(CurvePoint {
                    abscissa: m,
                    coupling: alpha,
                    alternate: None,
                }),
                _ => Err(SkippedPoint {
                    abscissa: m,
                    reason: format!(
                        "threshold {q_min:e} kg m/s above kinematic limit {:e}",
                        model.kinematic_limit()
                    ),
                }),
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut inputs = BTreeMap::new();
    inputs.insert("dm_masses_ev".into(), Value::from(dm_masses_ev.to_vec()));
    inputs.insert(
        "mediator_range_m".into(),
        if mediator_range.is_finite() {
            Value::from(mediator_range)
        } else {
            Value::from("inf")
        },
    );
    inputs.insert("q_min_kg_m_per_s".into(), Value::from(q_min));
    inputs.insert(
        "halo".into(),
        serde_json::to_value(halo).expect("serialises"),
    );
    inputs.insert("exposure_sphere_s".into(), Value::from(exposure));
    inputs.insert("limit_counts".into(), Value::from(LIMIT_COUNTS));
    let mut curve = ExclusionCurve::new("dm", AbscissaKind::DmMassEv, "alpha_n", plan, inputs);
    for o in outcomes {
        match o {
            Ok(p) => curve.points.push(p),
            Err(s) => curve.censored.push(s),
        }
    }
    curve.validate()?;
    Ok(curve)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::limits::tests::plan;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    fn model(q_min: f64, range: f64) -> DmRateModel {
        let s = crate::Sphere::silica(10e-6).unwrap();
        DmRateModel::new(
            Halo::default(),
            ev(1e12) / CODATA_2018.c.powi(2),
            s.mass(),
            s.nucleon_count(),
            range,
            q_min,
        )
        .unwrap()
    }

    #[test]
    fn halo_defaults() {
        let h = Halo::default();
        let gev_cm3 =
            crate::quantities::units::parse_as("0.3 GeV/cm^3", crate::Dimension::Density).unwrap();
        assert!(rel(h.density, gev_cm3) < 1e-12);
    }

    #[test]
    fn speed_distribution_is_normalised_and_matches_sampling() {
        let d = SpeedDistribution::new(Halo::default()).unwrap();
        assert!(rel(d.integrate(0.0, |_| 1.0), 1.0) < 1e-10);
        // mean speed against direct 3-D sampling
        let h = Halo::default();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let g = Normal::new(0.0, h.v0 / 2f64.sqrt()).unwrap();
        let mut speeds = Vec::new();
        while speeds.len() < 400_000 {
            let u: [f64; 3] = [g.sample(&mut rng), g.sample(&mut rng), g.sample(&mut rng)];
            if u.iter().map(|x| x * x).sum::<f64>() < h.v_escape.powi(2) {
                speeds.push((u[0] * u[0] + u[1] * u[1] + (u[2] - h.v_earth).powi(2)).sqrt());
            }
        }
        let mc = speeds.iter().sum::<f64>() / speeds.len() as f64;
        assert!(rel(d.integrate(0.0, |v| v), mc) < 3e-3);
        // without the boost it is a truncated Maxwellian
        let rest = SpeedDistribution::new(Halo { v_earth: 0.0, ..h }).unwrap();
        assert!(rel(rest.integrate(0.0, |_| 1.0), 1.0) < 1e-10);
    }

    #[test]
    fn analytic_rate_matches_orbit_sampling() {
        for q_min in [2e-20, 1e-19, 5e-19] {
            let m = model(q_min, f64::INFINITY);
            let mc = dm_rate_monte_carlo(&m, 1e-8, 1 << 20, 3).unwrap();
            let exact = m.rate(1e-8);
            assert!(
                (mc.rate - exact).abs() < 4.0 * mc.std_error + 2e-3 * exact,
                "{q_min:e}: {:e} vs {exact:e}",
                mc.rate
            );
            assert!(mc.std_error < 0.01 * mc.rate);
        }
    }

    #[test]
    fn rate_scalings() {
        let m = model(1e-19, f64::INFINITY);
        assert!(rel(m.rate(2e-8), 4.0 * m.rate(1e-8)) < 1e-12);
        // massless: σ ∝ 1/q_min² once q_max ≫ q_min
        let tiny = model(1e-22, f64::INFINITY);
        let half = model(0.5e-22, f64::INFINITY);
        assert!(rel(half.rate(1.0) / tiny.rate(1.0), 4.0) < 1e-3);
        // a short-range mediator saturates below q_φ
        let screened = model(1e-22, 1e-14);
        let screened_half = model(0.5e-22, 1e-14);
        assert!(rel(screened_half.rate(1.0), screened.rate(1.0)) < 1e-3);
        assert!(screened.rate(1.0) < tiny.rate(1.0));
    }

    #[test]
    fn kinematic_censoring() {
        let m = model(1e-10, f64::INFINITY);
        assert_eq!(m.rate(1.0), 0.0);
        assert_eq!(m.alpha_limit(1e7), None);
        let p = plan(1e-18);
        let c = dm_projection(
            &p,
            &Halo::default(),
            &[1e9, 1e12, 1e15],
            f64::INFINITY,
            1e-17,
        )
        .unwrap();
        assert!(c.censored.iter().any(|s| s.abscissa == 1e9));
        assert!(c.points.iter().all(|pt| pt.abscissa > 1e9));
    }

    #[test]
    fn limit_scalings() {
        let p = plan(1e-18);
        let masses = [1e12, 3e12, 1e13];
        let base = dm_projection(&p, &Halo::default(), &masses, f64::INFINITY, 3e-19).unwrap();
        let longer = SearchPlan {
            array_size: 100,
            ..p.clone()
        };
        let more = dm_projection(&longer, &Halo::default(), &masses, f64::INFINITY, 3e-19).unwrap();
        for (a, b) in base.points.iter().zip(&more.points) {
            assert!(rel(b.coupling, a.coupling / 10.0) < 1e-12);
        }
        // doubling N at fixed threshold and mass halves α_n
        let m = model(3e-19, f64::INFINITY);
        let heavy = DmRateModel {
            nucleons: 2.0 * m.nucleons,
            ..m
        };
        assert!(
            rel(
                heavy.alpha_limit(1e6).unwrap(),
                m.alpha_limit(1e6).unwrap() / 2.0
            ) < 1e-12
        );
    }

    #[test]
    fn monte_carlo_is_seed_deterministic() {
        let m = model(1e-19, f64::INFINITY);
        let a = dm_rate_monte_carlo(&m, 1.0, 200_000, 11).unwrap();
        let b = dm_rate_monte_carlo(&m, 1.0, 200_000, 11).unwrap();
        assert_eq!(a, b);
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(3)
            .build()
            .unwrap();
        let c = pool.install(|| dm_rate_monte_carlo(&m, 1.0, 200_000, 11).unwrap());
        assert_eq!(a, c);
        assert!(dm_rate_monte_carlo(&model(1e-19, 1e-6), 1.0, 10, 1).is_err());
    }
}
