use std::f64::consts::PI;

use serde::Serialize;

use super::Psd;
use crate::error::{Error, Result};

/// Damped-oscillator fit S_x(f) = A / ((ω₀² − ω²)² + Γ²ω²).
///
/// `amplitude` is the one-sided force PSD divided by m².
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LorentzianFit {
    pub resonant_frequency: f64,
    pub damping_rate: f64,
    pub amplitude: f64,
    pub iterations: usize,
}

impl LorentzianFit {
    pub fn model(&self, frequency: f64) -> f64 {
        let w = 2.0 * PI * frequency;
        let w0 = 2.0 * PI * self.resonant_frequency;
        self.amplitude / ((w0 * w0 - w * w).powi(2) + (self.damping_rate * w).powi(2))
    }

    /// Force ASD in the √(2 k_B T m γ) convention of
    /// [`thermal_force_asd`](crate::sensor::thermal_force_asd).
    pub fn force_asd(&self, mass: f64) -> f64 {
        (self.amplitude / 2.0).sqrt() * mass
    }

    /// ∫ S_x df of the fitted model, k_B T_eff/(m ω₀²) for a thermal spectrum.
    pub fn variance(&self) -> f64 {
        let w0 = 2.0 * PI * self.resonant_frequency;
        self.amplitude / (4.0 * self.damping_rate * w0 * w0)
    }
}

fn solve3(a: [[f64; 3]; 3], b: [f64; 3]) -> Option<[f64; 3]> {
    let det = |m: [[f64; 3]; 3]| {
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
            - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    };
    let d = det(a);
    if d == 0.0 || !d.is_finite() {
        return None;
    }
    let mut out = [0.0; 3];
    for (col, o) in out.iter_mut().enumerate() {
        let mut m = a;
        for row in 0..3 {
            m[row][col] = b[row];
        }
        *o = det(m) / d;
    }
    Some(out)
}

/// Start from the peak bin and its half-power width.
fn peak_start(pts: &[(f64, f64)], resolution: f64) -> Option<[f64; 3]> {
    let (ipk, &(wpk, lpk)) = pts
        .iter()
        .enumerate()
        .max_by(|a, b| a.1 .1.total_cmp(&b.1 .1))?;
    let half = lpk - 2f64.ln();
    let lo = pts[..ipk]
        .iter()
        .rev()
        .find(|p| p.1 < half)
        .map_or(pts[0].0, |p| p.0);
    let hi = pts[ipk..]
        .iter()
        .find(|p| p.1 < half)
        .map_or(pts[pts.len() - 1].0, |p| p.0);
    let gamma = (hi - lo).max(resolution * 2.0 * PI);
    Some([lpk + 2.0 * (gamma * wpk).ln(), wpk, gamma])
}

/// Start from spectral moments: ω₀² = ⟨ẋ²⟩/⟨x²⟩, A from the low-frequency
/// plateau, Γ from ∫S = A/(4Γω₀²). Works for overdamped spectra.
fn moment_start(psd: &Psd) -> Option<[f64; 3]> {
    let mut var = 0.0;
    let mut var_v = 0.0;
    for (f, p) in psd.frequencies.iter().zip(&psd.values).skip(1) {
        let w = 2.0 * PI * f;
        var += p;
        var_v += w * w * p;
    }
    if !(var > 0.0 && var_v > 0.0) {
        return None;
    }
    let w0 = (var_v / var).sqrt();
    let var = var * psd.resolution;
    let plateau = psd.values.iter().skip(1).take(3).sum::<f64>() / 3.0;
    let a = plateau * w0.powi(4);
    let gamma = a / (4.0 * var * w0 * w0);
    (a > 0.0 && gamma > 0.0).then(|| [a.ln(), w0, gamma])
}

fn levenberg_marquardt(
    pts: &[(f64, f64)],
    start: [f64; 3],
    cost_of: &dyn Fn(f64, f64, f64) -> f64,
) -> ([f64; 3], f64, usize) {
    let [mut ln_a, mut w0, mut gamma] = start;
    let mut lambda = 1e-3;
    let mut cost = cost_of(ln_a, w0, gamma);
    let mut iterations = 0;
    for _ in 0..500 {
        iterations += 1;
        let mut jtj = [[0.0; 3]; 3];
        let mut jtr = [0.0; 3];
        for &(w, l) in pts {
            let u = w0 * w0 - w * w;
            let d = u * u + (gamma * w).powi(2);
            let r = l - (ln_a - d.ln());
            let j = [1.0, -4.0 * u * w0 / d, -2.0 * gamma * w * w / d];
            for a in 0..3 {
                jtr[a] += j[a] * r;
                for b in 0..3 {
                    jtj[a][b] += j[a] * j[b];
                }
            }
        }
        let mut improved = false;
        for _ in 0..30 {
            let mut damped = jtj;
            for (a, row) in damped.iter_mut().enumerate() {
                row[a] *= 1.0 + lambda;
            }
            let Some(step) = solve3(damped, jtr) else {
                break;
            };
            let (na, nw, ng) = (ln_a + step[0], w0 + step[1], gamma + step[2]);
            if nw > 0.0 && ng > 0.0 {
                let c = cost_of(na, nw, ng);
                if c < cost {
                    let rel = (cost - c) / cost;
                    (ln_a, w0, gamma, cost) = (na, nw, ng, c);
                    lambda = (lambda * 0.3).max(1e-12);
                    improved = rel > 1e-12;
                    break;
                }
            }
            lambda *= 10.0;
        }
        if !improved {
            break;
        }
    }
    ([ln_a, w0, gamma], cost, iterations)
}

/// Levenberg–Marquardt fit on log S over `[f_lo, f_hi]`.
pub fn fit_lorentzian(psd: &Psd, f_lo: f64, f_hi: f64) -> Result<LorentzianFit> {
    let pts: Vec<(f64, f64)> = psd
        .frequencies
        .iter()
        .zip(&psd.values)
        .filter(|(f, p)| **f >= f_lo && **f <= f_hi && **f > 0.0 && **p > 0.0)
        .map(|(f, p)| (2.0 * PI * f, p.ln()))
        .collect();
    if pts.len() < 6 {
        return Err(Error::Fit(format!(
            "only {} usable bins in [{f_lo}, {f_hi}] Hz",
            pts.len()
        )));
    }

    let cost_of = |ln_a: f64, w0: f64, g: f64| -> f64 {
        pts.iter()
            .map(|&(w, l)| {
                let d = (w0 * w0 - w * w).powi(2) + (g * w).powi(2);
                (l - (ln_a - d.ln())).powi(2)
            })
            .sum()
    };

    let mut best: Option<([f64; 3], f64, usize)> = None;
    for start in [peak_start(&pts, psd.resolution), moment_start(psd)]
        .into_iter()
        .flatten()
    {
        let (p, cost, iterations) = levenberg_marquardt(&pts, start, &cost_of);
        if p.iter().all(|v| v.is_finite()) && best.as_ref().is_none_or(|b| cost < b.1) {
            best = Some((p, cost, iterations));
        }
    }
    let Some(([ln_a, w0, gamma], _, iterations)) = best else {
        return Err(Error::Fit("no usable starting point".into()));
    };

    if !(w0.is_finite() && gamma.is_finite() && ln_a.is_finite()) {
        return Err(Error::Fit("diverged".into()));
    }
    Ok(LorentzianFit {
        resonant_frequency: w0 / (2.0 * PI),
        damping_rate: gamma,
        amplitude: ln_a.exp(),
        iterations,
    })
}
