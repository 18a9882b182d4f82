//! Matched filtering of displacement records for momentum kicks.
//!
//! The template is the closed-loop ring-down per unit momentum, so the
//! normalised filter output at sample n estimates the kick delivered there.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::Serialize;

use super::simulate::oscillator_parts;
use super::{simulate, SimulationConfig, TimeSeries};
use crate::error::{positive, Error, Result};
use crate::sensor::{Sphere, TrapState};

/// Templates are cut at this many closed-loop damping times.
pub const TEMPLATE_DAMPING_TIMES: f64 = 10.0;
/// Minimum number of independent filter windows for a threshold estimate.
pub const MIN_WINDOWS: usize = 10_000;
/// Minimum expected number of noise exceedances at the threshold.
pub const MIN_EXCEEDANCES: f64 = 10.0;

/// Displacement response to a unit momentum kick at t = 0, sampled every `dt`.
pub fn ring_down_template(mass: f64, omega0: f64, gamma: f64, dt: f64) -> Vec<f64> {
    let len = ((TEMPLATE_DAMPING_TIMES / gamma) / dt).ceil() as usize + 1;
    (0..len)
        .map(|k| {
            let t = k as f64 * dt;
            let (_, s) = oscillator_parts(omega0, gamma, t);
            (-0.5 * gamma * t).exp() * s / mass
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatchedFilter {
    template: Vec<f64>,
    energy: f64,
}

impl MatchedFilter {
    pub fn new(template: Vec<f64>) -> Result<Self> {
        let energy: f64 = template.iter().map(|h| h * h).sum();
        if template.is_empty() || !(energy > 0.0) {
            return Err(Error::invalid(
                "filter template",
                "must have non-zero energy",
            ));
        }
        Ok(MatchedFilter { template, energy })
    }

    pub fn for_trap(sphere: &Sphere, trap: &TrapState, gamma_eff: f64, dt: f64) -> Result<Self> {
        MatchedFilter::new(ring_down_template(
            sphere.mass(),
            trap.angular_frequency(),
            gamma_eff,
            dt,
        ))
    }

    pub fn len(&self) -> usize {
        self.template.len()
    }

    pub fn is_empty(&self) -> bool {
        self.template.is_empty()
    }

    /// y[n] = Σ h[k] x[n+k] / Σ h², for every n with a full template overlap.
    pub fn apply(&self, samples: &[f64]) -> Vec<f64> {
        let l = self.template.len();
        if samples.len() < l {
            return Vec::new();
        }
        let out_len = samples.len() - l + 1;
        let n = (4 * l).max(4096).next_power_of_two();
        let block = n - l + 1;

        let mut planner = FftPlanner::<f64>::new();
        let fwd = planner.plan_fft_forward(n);
        let inv = planner.plan_fft_inverse(n);
        let mut h = vec![Complex::new(0.0, 0.0); n];
        for (c, &v) in h.iter_mut().zip(&self.template) {
            *c = Complex::new(v, 0.0);
        }
        fwd.process(&mut h);
        let scale = 1.0 / (n as f64 * self.energy);

        let mut out = Vec::with_capacity(out_len);
        let mut buf = vec![Complex::new(0.0, 0.0); n];
        let mut start = 0;
        while start < out_len {
            for (i, c) in buf.iter_mut().enumerate() {
                *c = Complex::new(samples.get(start + i).copied().unwrap_or(0.0), 0.0);
            }
            fwd.process(&mut buf);
            for (c, hk) in buf.iter_mut().zip(&h) {
                *c *= hk.conj();
            }
            inv.process(&mut buf);
            let take = block.min(out_len - start);
            out.extend(buf[..take].iter().map(|c| c.re * scale));
            start += take;
        }
        out
    }
}

/// Convenience wrapper: filter a series with a template.
pub fn matched_filter(series: &TimeSeries, filter: &MatchedFilter) -> Vec<f64> {
    filter.apply(&series.samples)
}

/// A filter peak above threshold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Detection {
    pub time: f64,
    /// Signed momentum estimate, kg m/s.
    pub momentum: f64,
}

/// Local maxima of |y| above `threshold`, at least `separation` samples apart.
pub fn detect_impulses(
    output: &[f64],
    threshold: f64,
    separation: usize,
    dt: f64,
    start_time: f64,
) -> Vec<Detection> {
    let mut found = Vec::new();
    let mut i = 0;
    while i < output.len() {
        if output[i].abs() > threshold {
            let end = (i + separation.max(1)).min(output.len());
            let best = (i..end)
                .max_by(|&a, &b| output[a].abs().total_cmp(&output[b].abs()))
                .expect("non-empty");
            found.push(Detection {
                time: start_time + best as f64 * dt,
                momentum: output[best],
            });
            i = best + separation.max(1);
        } else {
            i += 1;
        }
    }
    found
}

/// Threshold and the statistics behind it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThresholdEstimate {
    /// Smallest kick whose filter response reaches the threshold, kg m/s.
    pub q_min: f64,
    pub false_alarm_rate: f64,
    /// Length of one independent trial, s.
    pub window: f64,
    pub windows: usize,
    pub expected_exceedances: f64,
    /// RMS of the noise-only filter output, kg m/s.
    pub noise_rms: f64,
    pub template_length: usize,
    pub sample_interval: f64,
}

impl ThresholdEstimate {
    pub fn window_samples(&self) -> usize {
        (self.window / self.sample_interval).round() as usize
    }
}

/// Threshold for a requested false-alarm rate from the empirical
/// distribution of per-window filter maxima in a noise-only run.
///
/// A window is one closed-loop damping time; the threshold is the
/// (1 − R·τ_w) quantile of the window maxima of |y|.
pub fn matched_filter_threshold(
    sphere: &Sphere,
    trap: &TrapState,
    config: &SimulationConfig,
    false_alarm_rate: f64,
) -> Result<ThresholdEstimate> {
    positive("false alarm rate", false_alarm_rate)?;
    let series = simulate(sphere, trap, config, &[])?;
    let gamma = config.effective_damping(trap);
    let dt = series.sample_interval;
    let filter = MatchedFilter::for_trap(sphere, trap, gamma, dt)?;
    let output = filter.apply(&series.samples);
    threshold_from_output(&output, gamma, dt, false_alarm_rate, filter.len())
}

pub(crate) fn threshold_from_output(
    output: &[f64],
    gamma: f64,
    dt: f64,
    false_alarm_rate: f64,
    template_length: usize,
) -> Result<ThresholdEstimate> {
    let w = ((1.0 / gamma) / dt).round().max(1.0) as usize;
    let windows = output.len() / w;
    if windows < MIN_WINDOWS {
        return Err(Error::NotConverged(format!(
            "{windows} filter correlation times available, need {MIN_WINDOWS}; lengthen the run"
        )));
    }
    let window = w as f64 * dt;
    let p = false_alarm_rate * window;
    if p >= 1.0 {
        return Err(Error::invalid(
            "false alarm rate",
            format!("{false_alarm_rate:e}/s exceeds one per window"),
        ));
    }
    let expected = p * windows as f64;
    if expected < MIN_EXCEEDANCES {
        return Err(Error::NotConverged(format!(
            "only {expected:.2} noise exceedances expected at {false_alarm_rate:e}/s over {windows} windows; need {MIN_EXCEEDANCES}"
        )));
    }
    let mut maxima: Vec<f64> = output
        .chunks_exact(w)
        .map(|c| c.iter().fold(0.0f64, |m, v| m.max(v.abs())))
        .collect();
    maxima.sort_by(f64::total_cmp);
    let idx = (((1.0 - p) * windows as f64).floor() as usize).min(windows - 1);
    let squares: Vec<f64> = output.iter().map(|y| y * y).collect();
    let noise_rms = (crate::quadrature::pairwise_sum(&squares) / output.len() as f64).sqrt();
    Ok(ThresholdEstimate {
        q_min: maxima[idx],
        false_alarm_rate,
        window,
        windows,
        expected_exceedances: expected,
        noise_rms,
        template_length,
        sample_interval: dt,
    })
}
