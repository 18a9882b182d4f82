use std::f64::consts::PI;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::Serialize;

use super::TimeSeries;
use crate::error::{Error, Result};
use crate::quadrature::pairwise_sum;

/// One-sided power spectral density in units²/Hz.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Psd {
    pub frequencies: Vec<f64>,
    pub values: Vec<f64>,
    pub resolution: f64,
    pub segments: usize,
}

impl Psd {
    /// Σ PSD·Δf over all bins.
    pub fn total_power(&self) -> f64 {
        pairwise_sum(&self.values) * self.resolution
    }

    /// Σ PSD·Δf over bins with `lo <= f <= hi`.
    pub fn band_power(&self, lo: f64, hi: f64) -> f64 {
        let v: Vec<f64> = self
            .frequencies
            .iter()
            .zip(&self.values)
            .filter(|(f, _)| **f >= lo && **f <= hi)
            .map(|(_, p)| *p)
            .collect();
        pairwise_sum(&v) * self.resolution
    }

    pub fn to_csv(&self, provenance: &[(String, String)]) -> String {
        use std::fmt::Write as _;
        let mut out = String::new();
        for (k, v) in provenance {
            let _ = writeln!(out, "# {k}: {v}");
        }
        out.push_str("frequency_hz,psd_m2_per_hz\n");
        for (f, p) in self.frequencies.iter().zip(&self.values) {
            let _ = writeln!(out, "{f:e},{p:e}");
        }
        out
    }
}

fn hann(n: usize) -> Vec<f64> {
    // periodic Hann
    (0..n)
        .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / n as f64).cos())
        .collect()
}

/// Welch estimate: Hann window, 50 % overlap, per-segment mean removed.
pub fn estimate_psd(series: &TimeSeries, segment_length: usize) -> Result<Psd> {
    let n = series.len();
    if segment_length < 2 || n < segment_length {
        return Err(Error::SeriesTooShort {
            len: n,
            needed: segment_length.max(2),
        });
    }
    let step = (segment_length / 2).max(1);
    let window = hann(segment_length);
    let window_power: f64 = window.iter().map(|w| w * w).sum();
    let fs = series.sample_rate();

    let mut planner = FftPlanner::<f64>::new();
    let fft = planner.plan_fft_forward(segment_length);
    let bins = segment_length / 2 + 1;
    let mut accum = vec![0.0; bins];
    let mut buf = vec![Complex::new(0.0, 0.0); segment_length];
    let mut segments = 0;

    let mut start = 0;
    while start + segment_length <= n {
        let seg = &series.samples[start..start + segment_length];
        let mean = pairwise_sum(seg) / segment_length as f64;
        for ((b, &x), &w) in buf.iter_mut().zip(seg).zip(&window) {
            *b = Complex::new((x - mean) * w, 0.0);
        }
        fft.process(&mut buf);
        for (a, c) in accum.iter_mut().zip(&buf) {
            *a += c.norm_sqr();
        }
        segments += 1;
        start += step;
    }

    let norm = 1.0 / (fs * window_power * segments as f64);
    let values: Vec<f64> = accum
        .iter()
        .enumerate()
        .map(|(k, &p)| {
            let one_sided = if k == 0 || (segment_length % 2 == 0 && k == bins - 1) {
                1.0
            } else {
                2.0
            };
            p * norm * one_sided
        })
        .collect();
    let resolution = fs / segment_length as f64;
    let frequencies = (0..bins).map(|k| k as f64 * resolution).collect();
    Ok(Psd {
        frequencies,
        values,
        resolution,
        segments,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    #[test]
    fn too_short_is_an_error() {
        let ts = TimeSeries::new(1.0, 0.0, vec![0.0; 10]).unwrap();
        assert!(matches!(
            estimate_psd(&ts, 16),
            Err(Error::SeriesTooShort { .. })
        ));
    }

    #[test]
    fn tone_power_is_half_amplitude_squared() {
        let fs = 1000.0;
        let a = 3.0;
        let f = 62.5; // bin-centred for 256-point segments
        let samples = (0..65_536)
            .map(|i| a * (2.0 * PI * f * i as f64 / fs).sin())
            .collect();
        let ts = TimeSeries::new(1.0 / fs, 0.0, samples).unwrap();
        let psd = estimate_psd(&ts, 256).unwrap();
        let p = psd.band_power(f - 10.0, f + 10.0);
        assert!((p - a * a / 2.0).abs() / (a * a / 2.0) < 0.02, "{p}");

        // off-bin tone still integrates correctly across the main lobe
        let f = 101.3;
        let samples = (0..65_536)
            .map(|i| a * (2.0 * PI * f * i as f64 / fs).cos())
            .collect();
        let ts = TimeSeries::new(1.0 / fs, 0.0, samples).unwrap();
        let psd = estimate_psd(&ts, 256).unwrap();
        let p = psd.band_power(f - 12.0, f + 12.0);
        assert!((p - a * a / 2.0).abs() / (a * a / 2.0) < 0.02, "{p}");
    }

    #[test]
    fn white_noise_is_flat_at_injected_level() {
        let fs = 2000.0;
        let sigma = 0.7;
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let dist = Normal::new(0.0, sigma).unwrap();
        let samples: Vec<f64> = (0..1 << 20).map(|_| dist.sample(&mut rng)).collect();
        let ts = TimeSeries::new(1.0 / fs, 0.0, samples).unwrap();
        let psd = estimate_psd(&ts, 1024).unwrap();
        let level = 2.0 * sigma * sigma / fs;
        let interior = &psd.values[5..psd.values.len() - 5];
        let mean = interior.iter().sum::<f64>() / interior.len() as f64;
        assert!((mean - level).abs() / level < 0.05);
        // bands of 32 bins stay within 5 %
        for chunk in interior.chunks(32) {
            let m = chunk.iter().sum::<f64>() / chunk.len() as f64;
            assert!((m - level).abs() / level < 0.05, "{m} vs {level}");
        }
        assert!((psd.total_power() - ts.mean_square()).abs() / ts.mean_square() < 0.02);
    }
}
