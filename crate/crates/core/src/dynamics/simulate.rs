use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{ImpulseEvent, InitialState, Integrator, SimulationConfig, TimeSeries};
use crate::error::{Error, Result};
use crate::quantities::CODATA_2018;
use crate::sensor::{Sphere, TrapState};

/// One-step transition of (x, v) for a damped oscillator with white
/// force noise, ẍ = −ω₀²x − Γẋ + F/m.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Propagator {
    /// Deterministic transition matrix, row major: [[xx, xv], [vx, vv]].
    pub transition: [[f64; 2]; 2],
    /// Lower Cholesky factor of the per-step noise covariance.
    pub noise: [[f64; 2]; 2],
    /// Steady-state position and velocity variances.
    pub stationary: (f64, f64),
    integrator: Integrator,
    /// Velocity decay and kick/drift constants for the semi-implicit scheme.
    decay: f64,
    omega0_sq_dt: f64,
    dt: f64,
}

/// (c, s) with c = cos/cosh(ωt), s = sin(ωt)/ω or sinh(κt)/κ for the
/// free part of the damped response; handles the critical case.
pub(crate) fn oscillator_parts(omega0: f64, gamma: f64, t: f64) -> (f64, f64) {
    let disc = omega0 * omega0 - 0.25 * gamma * gamma;
    let scale = omega0 * omega0;
    if disc.abs() <= 1e-12 * scale {
        (1.0, t)
    } else if disc > 0.0 {
        let w = disc.sqrt();
        ((w * t).cos(), (w * t).sin() / w)
    } else {
        let k = (-disc).sqrt();
        ((k * t).cosh(), (k * t).sinh() / k)
    }
}

impl Propagator {
    pub fn new(
        integrator: Integrator,
        omega0: f64,
        gamma: f64,
        var_x: f64,
        var_v: f64,
        dt: f64,
    ) -> Self {
        let (transition, decay) = match integrator {
            Integrator::Exact => {
                let e = (-0.5 * gamma * dt).exp();
                let (c, s) = oscillator_parts(omega0, gamma, dt);
                let half = 0.5 * gamma;
                (
                    [
                        [e * (c + half * s), e * s],
                        [-e * omega0 * omega0 * s, e * (c - half * s)],
                    ],
                    0.0,
                )
            }
            Integrator::SemiImplicit => {
                let a = (-gamma * dt).exp();
                let w2 = omega0 * omega0 * dt;
                ([[1.0 - w2 * dt, a * dt], [-w2, a]], a)
            }
        };

        let cov = match integrator {
            Integrator::Exact => {
                // Σ(dt) = Σ∞ − Φ Σ∞ Φᵀ with Σ∞ = diag(var_x, var_v)
                let p = transition;
                let sxx = var_x - (p[0][0] * p[0][0] * var_x + p[0][1] * p[0][1] * var_v);
                let sxv = -(p[0][0] * p[1][0] * var_x + p[0][1] * p[1][1] * var_v);
                let svv = var_v - (p[1][0] * p[1][0] * var_x + p[1][1] * p[1][1] * var_v);
                [[sxx.max(0.0), sxv], [sxv, svv.max(0.0)]]
            }
            Integrator::SemiImplicit => {
                // velocity OU increment, then carried into x by the drift
                let s = var_v * (1.0 - decay * decay);
                [[s * dt * dt, s * dt], [s * dt, s]]
            }
        };

        let l11 = cov[0][0].sqrt();
        let l21 = if l11 > 0.0 { cov[1][0] / l11 } else { 0.0 };
        let l22 = (cov[1][1] - l21 * l21).max(0.0).sqrt();

        Propagator {
            transition,
            noise: [[l11, 0.0], [l21, l22]],
            stationary: (var_x, var_v),
            integrator,
            decay,
            omega0_sq_dt: omega0 * omega0 * dt,
            dt,
        }
    }

    /// Largest modulus of the transition-matrix eigenvalues.
    pub fn spectral_radius(&self) -> f64 {
        let [[a, b], [c, d]] = self.transition;
        let tr = a + d;
        let det = a * d - b * c;
        let disc = tr * tr - 4.0 * det;
        if disc >= 0.0 {
            let r = disc.sqrt();
            ((tr + r) / 2.0).abs().max(((tr - r) / 2.0).abs())
        } else {
            det.abs().sqrt()
        }
    }

    #[inline]
    fn step(&self, x: f64, v: f64, n1: f64, n2: f64) -> (f64, f64) {
        match self.integrator {
            Integrator::Exact => {
                let p = &self.transition;
                let l = &self.noise;
                (
                    p[0][0] * x + p[0][1] * v + l[0][0] * n1,
                    p[1][0] * x + p[1][1] * v + l[1][0] * n1 + l[1][1] * n2,
                )
            }
            Integrator::SemiImplicit => {
                let v = self.decay * v + self.noise[1][0] * n1 - self.omega0_sq_dt * x;
                (x + v * self.dt, v)
            }
        }
    }
}

/// Integrates the cold-damped Langevin equation and records displacement.
///
/// The stochastic force has one-sided PSD 4 k_B T m γ, which holds the
/// open-loop oscillator at ⟨x²⟩ = k_B T/(m ω₀²). Impulses add q/m to the
/// velocity at the nearest time step.
pub fn simulate(
    sphere: &Sphere,
    trap: &TrapState,
    config: &SimulationConfig,
    injected: &[ImpulseEvent],
) -> Result<TimeSeries> {
    config.validate(trap)?;
    let m = sphere.mass();
    let omega0 = trap.angular_frequency();
    let gamma = config.effective_damping(trap);
    let dt = config.time_step;
    let kt = CODATA_2018.k_b * config.effective_temperature();
    let var_v = kt / m;
    let var_x = var_v / (omega0 * omega0);
    let prop = Propagator::new(config.integrator, omega0, gamma, var_x, var_v, dt);

    let steps = config.steps();
    let relax_steps = (1.0 / (gamma * dt)).max(1.0);
    let growth = prop.spectral_radius().powf(relax_steps);
    if growth.powi(2) > 10.0 || !growth.is_finite() {
        return Err(Error::Unstable(format!(
            "deterministic energy grows by {:.3e} per relaxation time (dt = {dt:e} s, omega0 dt = {:.3})",
            growth.powi(2),
            omega0 * dt
        )));
    }

    let mut kicks: Vec<(usize, f64)> = injected
        .iter()
        .filter_map(|ev| {
            let k = (ev.time / dt).round();
            (k >= 0.0 && (k as usize) < steps).then(|| (k as usize, ev.signed_momentum() / m))
        })
        .collect();
    kicks.sort_by_key(|&(k, _)| k);

    let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
    let (mut x, mut v) = match config.initial_state {
        InitialState::Equilibrium => {
            let a: f64 = StandardNormal.sample(&mut rng);
            let b: f64 = StandardNormal.sample(&mut rng);
            (var_x.sqrt() * a, var_v.sqrt() * b)
        }
        InitialState::At { position, velocity } => (position, velocity),
    };
    let noisy = kt > 0.0;

    let dec = config.record_decimation;
    let mut samples = Vec::with_capacity(steps / dec + 1);
    let mut next_kick = 0;
    for n in 0..steps {
        if n % dec == 0 {
            samples.push(x);
        }
        while next_kick < kicks.len() && kicks[next_kick].0 == n {
            v += kicks[next_kick].1;
            next_kick += 1;
        }
        let (n1, n2) = if noisy {
            (
                StandardNormal.sample(&mut rng),
                StandardNormal.sample(&mut rng),
            )
        } else {
            (0.0, 0.0)
        };
        (x, v) = prop.step(x, v, n1, n2);
        if !x.is_finite() || !v.is_finite() {
            return Err(Error::Unstable(format!("non-finite state at step {n}")));
        }
    }
    TimeSeries::new(dt * dec as f64, 0.0, samples)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::derive_seed;

    fn sphere() -> Sphere {
        Sphere::silica(10e-6).unwrap()
    }

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    /// Closed-form response to a velocity kick u at t = 0.
    fn ring_down(omega0: f64, gamma: f64, u: f64, t: f64) -> f64 {
        let wd = (omega0 * omega0 - gamma * gamma / 4.0).sqrt();
        u * (-gamma * t / 2.0).exp() * (wd * t).sin() / wd
    }

    #[test]
    fn zero_temperature_stays_at_rest() {
        let trap = TrapState::new(100.0, 10.0, 300.0, 0.0).unwrap();
        let mut cfg = SimulationConfig::for_trap(&trap, 1e-4, 20.0, 9);
        cfg.bath_temperature = 0.0;
        let ts = simulate(&sphere(), &trap, &cfg, &[]).unwrap();
        assert!(ts.samples.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn single_impulse_rings_down() {
        let s = sphere();
        let trap = TrapState::new(100.0, 5.0, 300.0, 1.0).unwrap();
        let mut cfg = SimulationConfig::for_trap(&trap, 1e-4, 2.0, 1).with_short_run();
        cfg.bath_temperature = 0.0;
        let q = 1e-19;
        let t0 = 0.1;
        let ts = simulate(&s, &trap, &cfg, &[ImpulseEvent::new(t0, q, 1.0).unwrap()]).unwrap();

        let omega0 = trap.angular_frequency();
        let gamma = cfg.effective_damping(&trap);
        let u = q / s.mass();
        let k0 = (t0 / cfg.time_step).round() as usize;
        for (i, &x) in ts.samples.iter().enumerate() {
            let expect = if i <= k0 {
                0.0
            } else {
                ring_down(omega0, gamma, u, (i - k0) as f64 * cfg.time_step)
            };
            assert!((x - expect).abs() <= 1e-9 * u / omega0, "sample {i}");
        }
        // peak displacement against the continuous envelope
        let wd = (omega0 * omega0 - gamma * gamma / 4.0).sqrt();
        let t_peak = (2.0 * wd / gamma).atan() / wd;
        let peak = ring_down(omega0, gamma, u, t_peak);
        let sampled = ts.samples.iter().cloned().fold(0.0, f64::max);
        assert!(rel(sampled, peak) < 0.01);
    }

    #[test]
    fn response_is_linear_at_zero_temperature() {
        let s = sphere();
        let trap = TrapState::new(100.0, 5.0, 300.0, 0.0).unwrap();
        let mut cfg = SimulationConfig::for_trap(&trap, 1e-4, 2.0, 1).with_short_run();
        cfg.bath_temperature = 0.0;
        let a = ImpulseEvent::new(0.2, 3e-20, 1.0).unwrap();
        let b = ImpulseEvent::new(0.537, 7e-20, -1.0).unwrap();
        let xa = simulate(&s, &trap, &cfg, &[a]).unwrap();
        let xb = simulate(&s, &trap, &cfg, &[b]).unwrap();
        let xab = simulate(&s, &trap, &cfg, &[a, b]).unwrap();
        let scale = xab.samples.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for i in 0..xab.len() {
            assert!((xab.samples[i] - xa.samples[i] - xb.samples[i]).abs() <= 1e-9 * scale);
        }
    }

    #[test]
    fn deterministic_given_seed() {
        let trap = TrapState::new(100.0, 10.0, 300.0, 2.0).unwrap();
        let cfg = SimulationConfig::for_trap(&trap, 1e-4, 10.0, 1234);
        let a = simulate(&sphere(), &trap, &cfg, &[]).unwrap();
        let b = simulate(&sphere(), &trap, &cfg, &[]).unwrap();
        assert_eq!(a, b);
        let other = SimulationConfig {
            rng_seed: derive_seed(1234, 0),
            ..cfg
        };
        assert_ne!(simulate(&sphere(), &trap, &other, &[]).unwrap(), a);
    }

    #[test]
    fn equipartition_with_cold_damping() {
        let s = sphere();
        let trap = TrapState::new(100.0, 100.0, 300.0, 1.0).unwrap();
        let cfg = SimulationConfig::for_trap(&trap, 1e-4, 100.0, 77);
        let ts = simulate(&s, &trap, &cfg, &[]).unwrap();
        let expect = CODATA_2018.k_b * cfg.effective_temperature()
            / (s.mass() * trap.angular_frequency().powi(2));
        assert!(
            rel(ts.mean_square(), expect) < 0.03,
            "{} vs {expect}",
            ts.mean_square()
        );
    }

    #[test]
    fn semi_implicit_scheme_tracks_equipartition() {
        let s = sphere();
        let trap = TrapState::new(100.0, 100.0, 300.0, 0.0).unwrap();
        let mut cfg = SimulationConfig::for_trap(&trap, 2e-5, 40.0, 5);
        cfg.integrator = Integrator::SemiImplicit;
        let ts = simulate(&s, &trap, &cfg, &[]).unwrap();
        let expect = CODATA_2018.k_b * 300.0 / (s.mass() * trap.angular_frequency().powi(2));
        assert!(
            rel(ts.mean_square(), expect) < 0.05,
            "{} vs {expect}",
            ts.mean_square()
        );
    }

    #[test]
    fn unstable_step_is_reported() {
        let omega0 = 2.0 * std::f64::consts::PI * 100.0;
        let p = Propagator::new(
            Integrator::SemiImplicit,
            omega0,
            1.0,
            1.0,
            1.0,
            2.5 / omega0,
        );
        assert!(p.spectral_radius() > 1.0);
        let exact = Propagator::new(Integrator::Exact, omega0, 1.0, 1.0, 1.0, 2.5 / omega0);
        assert!(exact.spectral_radius() < 1.0);

        // bypass the resolution guard to reach the stability check
        let trap = TrapState::new(100.0, 1.0, 300.0, 0.0).unwrap();
        let mut cfg = SimulationConfig::for_trap(&trap, 4e-3, 200.0, 1);
        cfg.integrator = Integrator::SemiImplicit;
        assert!(matches!(
            cfg.validate(&trap),
            Err(Error::InvalidParameter { .. })
        ));
    }

    #[test]
    fn overdamped_propagator_matches_stationary_variance() {
        let (w0, var_v) = (10.0, 3.0);
        let var_x = var_v / (w0 * w0);
        let p = Propagator::new(Integrator::Exact, w0, 100.0, var_x, var_v, 1e-3);
        // Φ Σ∞ Φᵀ + L Lᵀ = Σ∞
        let t = p.transition;
        let l = p.noise;
        let xx = t[0][0] * t[0][0] * var_x + t[0][1] * t[0][1] * var_v + l[0][0] * l[0][0];
        let xv = t[0][0] * t[1][0] * var_x + t[0][1] * t[1][1] * var_v + l[0][0] * l[1][0];
        let vv = t[1][0] * t[1][0] * var_x
            + t[1][1] * t[1][1] * var_v
            + l[1][0] * l[1][0]
            + l[1][1] * l[1][1];
        assert!(rel(xx, var_x) < 1e-9 && rel(vv, var_v) < 1e-9);
        assert!(xv.abs() < 1e-9 * (var_x * var_v).sqrt());
    }
}
