//! Time-domain centre-of-mass dynamics of a cold-damped trapped sphere.
//!
//! - [`simulate`]: Langevin integration with injected momentum kicks
//! - [`estimate_psd`]: averaged-periodogram spectral estimate
//! - [`fit_lorentzian`]: damped-oscillator fit to a displacement PSD
//! - [`matched_filter_threshold`]: impulse threshold from filter-output statistics

mod filter;
mod fit;
mod psd;
mod simulate;

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{finite, non_negative, positive, Error, Result};
use crate::sensor::TrapState;

pub use filter::{
    detect_impulses, matched_filter, matched_filter_threshold, ring_down_template, Detection,
    MatchedFilter, ThresholdEstimate,
};
pub use fit::{fit_lorentzian, LorentzianFit};
pub use psd::{estimate_psd, Psd};
pub use simulate::{simulate, Propagator};

/// Stepping scheme for [`simulate`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Integrator {
    /// Exact discretisation of the linear Langevin equation.
    #[default]
    Exact,
    /// Exact Ornstein–Uhlenbeck velocity update followed by a symplectic
    /// Euler kick/drift for the restoring force.
    SemiImplicit,
}

/// Starting point of a run.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitialState {
    /// Drawn from the closed-loop steady state.
    #[default]
    Equilibrium,
    At {
        position: f64,
        velocity: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationConfig {
    pub time_step: f64,
    pub duration: f64,
    pub rng_seed: u64,
    pub bath_temperature: f64,
    pub feedback_gain: f64,
    pub record_decimation: usize,
    #[serde(default)]
    pub integrator: Integrator,
    #[serde(default)]
    pub initial_state: InitialState,
    /// Permits runs shorter than 100 closed-loop relaxation times.
    #[serde(default)]
    pub short_run: bool,
}

impl SimulationConfig {
    /// Config with the trap's temperature and gain, decimation 1.
    pub fn for_trap(trap: &TrapState, time_step: f64, duration: f64, rng_seed: u64) -> Self {
        SimulationConfig {
            time_step,
            duration,
            rng_seed,
            bath_temperature: trap.temperature(),
            feedback_gain: trap.feedback_gain(),
            record_decimation: 1,
            integrator: Integrator::Exact,
            initial_state: InitialState::Equilibrium,
            short_run: false,
        }
    }

    pub fn with_short_run(mut self) -> Self {
        self.short_run = true;
        self
    }

    pub fn with_initial_state(mut self, state: InitialState) -> Self {
        self.initial_state = state;
        self
    }

    /// Closed-loop damping γ(1 + g).
    pub fn effective_damping(&self, trap: &TrapState) -> f64 {
        trap.damping_rate() * (1.0 + self.feedback_gain)
    }

    /// T γ / (γ + g γ).
    pub fn effective_temperature(&self) -> f64 {
        self.bath_temperature / (1.0 + self.feedback_gain)
    }

    pub fn steps(&self) -> usize {
        (self.duration / self.time_step).round() as usize
    }

    pub fn validate(&self, trap: &TrapState) -> Result<()> {
        positive("time step", self.time_step)?;
        positive("duration", self.duration)?;
        non_negative("bath temperature", self.bath_temperature)?;
        non_negative("feedback gain", self.feedback_gain)?;
        if self.record_decimation == 0 {
            return Err(Error::invalid("record decimation", "must be >= 1"));
        }
        if let InitialState::At { position, velocity } = self.initial_state {
            finite("initial position", position)?;
            finite("initial velocity", velocity)?;
        }
        let limit = 1.0 / (20.0 * trap.resonant_frequency());
        if self.time_step >= limit {
            return Err(Error::invalid(
                "time step",
                format!(
                    "{:e} s must be below 1/(20 f0) = {limit:e} s",
                    self.time_step
                ),
            ));
        }
        let relax = 100.0 / self.effective_damping(trap);
        if self.duration < relax && !self.short_run {
            return Err(Error::invalid(
                "duration",
                format!("{:e} s is shorter than 100 relaxation times ({relax:e} s); set short_run to override", self.duration),
            ));
        }
        if self.steps() == 0 {
            return Err(Error::invalid("duration", "shorter than one time step"));
        }
        Ok(())
    }
}

/// A momentum kick delivered to the sphere.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImpulseEvent {
    pub time: f64,
    pub momentum_transfer: f64,
    /// +1 or −1 along the sensing axis.
    pub direction: f64,
}

impl ImpulseEvent {
    pub fn new(time: f64, momentum_transfer: f64, direction: f64) -> Result<Self> {
        finite("impulse time", time)?;
        positive("momentum transfer", momentum_transfer)?;
        if direction != 1.0 && direction != -1.0 {
            return Err(Error::invalid("impulse direction", "must be +1 or -1"));
        }
        Ok(ImpulseEvent {
            time,
            momentum_transfer,
            direction,
        })
    }

    pub fn signed_momentum(&self) -> f64 {
        self.momentum_transfer * self.direction
    }
}

/// Uniformly sampled displacement record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    pub sample_interval: f64,
    pub start_time: f64,
    pub samples: Vec<f64>,
}

impl TimeSeries {
    pub fn new(sample_interval: f64, start_time: f64, samples: Vec<f64>) -> Result<Self> {
        positive("sample interval", sample_interval)?;
        finite("start time", start_time)?;
        if let Some(bad) = samples.iter().find(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                what: "sample",
                value: *bad,
            });
        }
        Ok(TimeSeries {
            sample_interval,
            start_time,
            samples,
        })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn time(&self, index: usize) -> f64 {
        self.start_time + index as f64 * self.sample_interval
    }

    pub fn sample_rate(&self) -> f64 {
        1.0 / self.sample_interval
    }

    pub fn mean_square(&self) -> f64 {
        let squares: Vec<f64> = self.samples.iter().map(|x| x * x).collect();
        crate::quadrature::pairwise_sum(&squares) / self.samples.len() as f64
    }

    /// Two-column CSV with `#`-prefixed provenance lines.
    pub fn to_csv(&self, provenance: &[(String, String)]) -> String {
        let mut out = String::with_capacity(self.samples.len() * 32);
        for (k, v) in provenance {
            let _ = writeln!(out, "# {k}: {v}");
        }
        out.push_str("time_s,displacement_m\n");
        for (i, x) in self.samples.iter().enumerate() {
            let _ = writeln!(out, "{:e},{:e}", self.time(i), x);
        }
        out
    }
}

/// Child seed for task `index` of a sweep seeded with `seed` (SplitMix64).
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
