//! Closed-form Yukawa forces on a uniform sphere.
//!
//! Every source is split into Fourier modes ρ_k cos(kx). A mode's Yukawa
//! field decays away from the source as e^{−κz} with κ² = k² + 1/λ², and
//! because it solves (∇² − 1/λ²)φ = 0 outside the source, its average over
//! the sphere is the centre value times Φ(R/λ) for every k.

use std::f64::consts::PI;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::Serialize;

use super::bessel::{i1e, k1e};
use super::geometry::{AttractorGeometry, FingerArray, FluidCapillary, PlaneSlab};
use super::{damped_form_factor, CouplingKind, YukawaCoupling};
use crate::error::{Error, Result};
use crate::quadrature::pairwise_sum;
use crate::quantities::{Quantity, CODATA_2018};
use crate::sensor::Sphere;

pub const MIN_PHASE_SAMPLES: usize = 64;
pub const MAX_PHASE_SAMPLES: usize = 1 << 16;
/// Largest accepted relative error on a harmonic amplitude.
pub const MODULATED_TOLERANCE: f64 = 1e-3;

const MAX_MODES: usize = 1_000_000;

fn finite_range(coupling: &YukawaCoupling) -> Result<f64> {
    coupling.expect(CouplingKind::IslAlpha)?;
    if !coupling.range.is_finite() {
        return Err(Error::domain(
            "range",
            "attractor forces need a finite Yukawa range",
        ));
    }
    Ok(coupling.range)
}

fn shield_factor(thickness: Option<f64>, lambda: f64) -> f64 {
    thickness.map_or(1.0, |t| (-t / lambda).exp())
}

/// Yukawa part of the force between a sphere and an infinite slab.
///
/// F = 2πGαΔρ λ (1 − e^{−t/λ}) m Φ(R/λ) e^{−d/λ}
pub fn yukawa_force_plane(
    sphere: &Sphere,
    coupling: &YukawaCoupling,
    slab: &PlaneSlab,
) -> Result<Quantity> {
    let lambda = finite_range(coupling)?;
    slab.validate(sphere)?;
    let depth = -(-slab.thickness / lambda).exp_m1();
    let f = 2.0
        * PI
        * CODATA_2018.g_n
        * coupling.strength
        * slab.density_contrast
        * lambda
        * depth
        * sphere.mass()
        * damped_form_factor(sphere.radius() / lambda, slab.distance / lambda);
    Quantity::force(f)
}

/// Σ over the mean and the odd square-wave harmonics of a two-material
/// pattern with half-period `half_period`; `mode(κ)` is the force per unit
/// density of a cos(kx) mode.
fn square_wave_sum(
    mean: f64,
    half: f64,
    half_period: f64,
    x: f64,
    lambda: f64,
    mode: impl Fn(f64) -> f64,
) -> f64 {
    let mut total = mean * mode(1.0 / lambda);
    if half == 0.0 {
        return total;
    }
    let mut terms = Vec::new();
    for j in 0..MAX_MODES {
        let n = (2 * j + 1) as f64;
        let k = n * PI / half_period;
        let kappa = (k * k + 1.0 / (lambda * lambda)).sqrt();
        let weight = 4.0 / (n * PI) * if j % 2 == 0 { 1.0 } else { -1.0 };
        let bound = (half * weight * mode(kappa)).abs();
        terms.push(half * weight * mode(kappa) * (k * x).cos());
        if bound <= 1e-17 * (total.abs() + terms[0].abs()) || bound == 0.0 {
            break;
        }
    }
    total += pairwise_sum(&terms);
    total
}

/// Force normal to a finger array with its pattern displaced by `x`.
pub fn finger_force_at(
    sphere: &Sphere,
    coupling: &YukawaCoupling,
    geom: &FingerArray,
    x: f64,
) -> Result<f64> {
    let lambda = finite_range(coupling)?;
    geom.validate(sphere)?;
    let (r, d, h) = (sphere.radius(), geom.distance, geom.finger_height);
    let prefactor = 2.0 * PI * CODATA_2018.g_n * coupling.strength * sphere.mass();
    let mode = |kappa: f64| -> f64 {
        damped_form_factor(r / lambda, kappa * d) * -(-kappa * h).exp_m1() / kappa
    };
    let mean = 0.5 * (geom.density_a + geom.density_b);
    let half = 0.5 * (geom.density_a - geom.density_b);
    let sum = square_wave_sum(mean, half, geom.finger_width, x, lambda, mode);
    Ok(prefactor * sum * shield_factor(geom.shield_thickness, lambda))
}

/// Force toward the axis of a droplet-filled capillary with the droplet
/// train displaced by `x`.
pub fn capillary_force_at(
    sphere: &Sphere,
    coupling: &YukawaCoupling,
    geom: &FluidCapillary,
    x: f64,
) -> Result<f64> {
    let lambda = finite_range(coupling)?;
    geom.validate(sphere)?;
    let (r, d, a, rho) = (
        sphere.radius(),
        geom.distance,
        geom.inner_radius(),
        geom.axis_distance(),
    );
    let prefactor = 4.0 * PI * CODATA_2018.g_n * coupling.strength * sphere.mass() * a;
    // I₁(κa)K₁(κρ) = i1e·k1e·e^{−κd}; the exponential is folded into Φ
    let mode = |kappa: f64| -> f64 {
        damped_form_factor(r / lambda, kappa * d) * i1e(kappa * a) * k1e(kappa * rho)
    };
    let mean = 0.5 * (geom.density_a + geom.density_b);
    let half = 0.5 * (geom.density_a - geom.density_b);
    let sum = square_wave_sum(mean, half, geom.droplet_length, x, lambda, mode);
    Ok(prefactor * sum * shield_factor(geom.shield_thickness, lambda))
}

/// Force waveform over one drive period and its harmonic content.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModulatedSpectrum {
    pub drive_frequency: f64,
    pub phase_samples: usize,
    /// Force at phases 2πj/N, N.
    pub waveform: Vec<f64>,
    pub mean: f64,
    /// Amplitude of harmonic n at index n, for n = 1..N/2; index 0 is |mean|.
    pub amplitudes: Vec<f64>,
}

impl ModulatedSpectrum {
    /// Mean square implied by the harmonic amplitudes.
    pub fn parseval_power(&self) -> f64 {
        let n = self.phase_samples;
        let mut terms = vec![self.mean * self.mean];
        for (k, a) in self.amplitudes.iter().enumerate().skip(1) {
            // Nyquist bin has no quadrature partner
            terms.push(if 2 * k == n { a * a } else { 0.5 * a * a });
        }
        pairwise_sum(&terms)
    }
}

fn waveform(
    sphere: &Sphere,
    coupling: &YukawaCoupling,
    geom: &AttractorGeometry,
    n: usize,
) -> Result<(f64, Vec<f64>)> {
    let phases = (0..n).map(|j| 2.0 * PI * j as f64 / n as f64);
    match geom {
        AttractorGeometry::FingerArray(g) => phases
            .map(|p| finger_force_at(sphere, coupling, g, g.position(p)))
            .collect::<Result<_>>()
            .map(|w| (g.drive_frequency, w)),
        AttractorGeometry::FluidCapillary(g) => phases
            .map(|p| capillary_force_at(sphere, coupling, g, g.position(p)))
            .collect::<Result<_>>()
            .map(|w| (g.modulation_frequency, w)),
        AttractorGeometry::PlaneSlab(_) => Err(Error::invalid(
            "geometry",
            "a static slab has no drive harmonics",
        )),
    }
}

/// Samples the force at `samples` equally spaced drive phases and takes
/// its discrete Fourier series.
pub fn modulated_spectrum(
    sphere: &Sphere,
    coupling: &YukawaCoupling,
    geom: &AttractorGeometry,
    samples: usize,
) -> Result<ModulatedSpectrum> {
    if samples < MIN_PHASE_SAMPLES {
        return Err(Error::invalid(
            "phase samples",
            format!("need at least {MIN_PHASE_SAMPLES}, got {samples}"),
        ));
    }
    let (drive_frequency, waveform) = waveform(sphere, coupling, geom, samples)?;
    let mean = pairwise_sum(&waveform) / samples as f64;
    let mut buf: Vec<Complex<f64>> = waveform
        .iter()
        .map(|f| Complex::new(f - mean, 0.0))
        .collect();
    FftPlanner::new()
        .plan_fft_forward(samples)
        .process(&mut buf);
    let mut amplitudes = vec![mean.abs()];
    for (k, c) in buf.iter().enumerate().take(samples / 2 + 1).skip(1) {
        let scale = if 2 * k == samples { 1.0 } else { 2.0 };
        amplitudes.push(scale * c.norm() / samples as f64);
    }
    Ok(ModulatedSpectrum {
        drive_frequency,
        phase_samples: samples,
        waveform,
        mean,
        amplitudes,
    })
}

/// Amplitude of the force at `harmonic` × drive frequency.
///
/// The phase grid starts at 64 samples and doubles until successive
/// amplitudes agree to [`MODULATED_TOLERANCE`].
pub fn yukawa_force_modulated(
    sphere: &Sphere,
    coupling: &YukawaCoupling,
    geom: &AttractorGeometry,
    harmonic: usize,
) -> Result<Quantity> {
    if harmonic < 1 {
        return Err(Error::invalid("harmonic", "must be >= 1"));
    }
    // Forces are linear in α and in the shield factor, so the grid is
    // refined on the bare unit-strength waveform and scaled afterwards.
    let unit = YukawaCoupling {
        strength: 1.0,
        ..*coupling
    };
    let (bare, shield) = match *geom {
        AttractorGeometry::FingerArray(g) => (
            AttractorGeometry::FingerArray(FingerArray {
                shield_thickness: None,
                ..g
            }),
            shield_factor(g.shield_thickness, coupling.range),
        ),
        AttractorGeometry::FluidCapillary(g) => (
            AttractorGeometry::FluidCapillary(FluidCapillary {
                shield_thickness: None,
                ..g
            }),
            shield_factor(g.shield_thickness, coupling.range),
        ),
        AttractorGeometry::PlaneSlab(_) => (*geom, 1.0),
    };
    let mut n = MIN_PHASE_SAMPLES.max((4 * harmonic).next_power_of_two());
    let mut coarse = modulated_spectrum(sphere, &unit, &bare, n)?;
    let mut error = f64::INFINITY;
    while 2 * n <= MAX_PHASE_SAMPLES {
        let fine = modulated_spectrum(sphere, &unit, &bare, 2 * n)?;
        let a = fine.amplitudes[harmonic];
        let scale = fine.waveform.iter().fold(0.0f64, |m, f| m.max(f.abs()));
        let diff = (a - coarse.amplitudes[harmonic]).abs();
        if diff <= MODULATED_TOLERANCE * a || diff <= 1e-14 * scale {
            return Quantity::force(a * coupling.strength.abs() * shield);
        }
        error = diff / a;
        coarse = fine;
        n *= 2;
    }
    Err(Error::Quadrature {
        estimate: error,
        tolerance: MODULATED_TOLERANCE,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    fn fingers() -> FingerArray {
        FingerArray {
            finger_width: 25e-6,
            finger_height: 10e-6,
            density_a: 19300.0,
            density_b: 2330.0,
            distance: 5e-6,
            drive_amplitude: 25e-6,
            drive_frequency: 13.0,
            lateral_offset: 12.5e-6,
            shield_thickness: None,
        }
    }

    fn capillary() -> FluidCapillary {
        FluidCapillary {
            inner_diameter: 50e-6,
            droplet_length: 40e-6,
            density_a: 3000.0,
            density_b: 800.0,
            distance: 5e-6,
            modulation_frequency: 50.0,
            shield_thickness: None,
        }
    }

    #[test]
    fn slab_reduces_to_point_mass_over_plane() {
        // thick slab, tiny sphere, far away: 2πGαΔρλ m e^{−d/λ}
        let s = Sphere::silica(40e-9).unwrap();
        let c = YukawaCoupling::isl(1.0, 1e-6).unwrap();
        let slab = PlaneSlab {
            thickness: f64::INFINITY,
            density_contrast: 1000.0,
            distance: 3e-6,
        };
        let f = yukawa_force_plane(&s, &c, &slab).unwrap().value();
        let point = 2.0 * PI * CODATA_2018.g_n * 1000.0 * 1e-6 * s.mass() * (-3.0f64).exp();
        assert!(rel(f, point) < 1e-4);
        assert_eq!(
            yukawa_force_plane(&s, &c.with_strength(0.0).unwrap(), &slab)
                .unwrap()
                .value(),
            0.0
        );
        assert!(
            yukawa_force_plane(&s, &YukawaCoupling::coulomb(1.0, 1e-6).unwrap(), &slab).is_err()
        );
    }

    #[test]
    fn slab_log_slope() {
        let s = Sphere::silica(2e-6).unwrap();
        let lambda = 5e-6;
        let c = YukawaCoupling::isl(1.0, lambda).unwrap();
        let f = |d: f64| {
            let slab = PlaneSlab {
                thickness: 1e-4,
                density_contrast: 19300.0,
                distance: d,
            };
            yukawa_force_plane(&s, &c, &slab).unwrap().value()
        };
        for d in [2.0 * lambda, 5.0 * lambda, 10.0 * lambda] {
            let h = 1e-3 * lambda;
            let slope = (f(d + h).ln() - f(d - h).ln()) / (2.0 * h);
            assert!(rel(slope, -1.0 / lambda) < 0.01);
        }
    }

    #[test]
    fn finger_mean_mode_is_a_slab() {
        let s = Sphere::silica(5e-6).unwrap();
        let c = YukawaCoupling::isl(1.0, 10e-6).unwrap();
        let g = FingerArray {
            density_b: 19300.0,
            ..fingers()
        };
        let slab = PlaneSlab {
            thickness: g.finger_height,
            density_contrast: 19300.0,
            distance: g.distance,
        };
        let a = finger_force_at(&s, &c, &g, 3e-6).unwrap();
        let b = yukawa_force_plane(&s, &c, &slab).unwrap().value();
        assert!(rel(a, b) < 1e-14);
    }

    #[test]
    fn equal_densities_have_no_harmonics() {
        let s = Sphere::silica(5e-6).unwrap();
        let c = YukawaCoupling::isl(1.0, 10e-6).unwrap();
        for g in [
            AttractorGeometry::FingerArray(FingerArray {
                density_b: 19300.0,
                ..fingers()
            }),
            AttractorGeometry::FluidCapillary(FluidCapillary {
                density_b: 3000.0,
                ..capillary()
            }),
        ] {
            for n in 1..=4 {
                assert_eq!(yukawa_force_modulated(&s, &c, &g, n).unwrap().value(), 0.0);
            }
        }
    }

    #[test]
    fn capillary_pattern_has_odd_harmonics_only() {
        let s = Sphere::silica(5e-6).unwrap();
        let c = YukawaCoupling::isl(1.0, 20e-6).unwrap();
        let g = AttractorGeometry::FluidCapillary(capillary());
        let spec = modulated_spectrum(&s, &c, &g, 128).unwrap();
        assert!(spec.amplitudes[1] > 0.0);
        assert!(spec.amplitudes[2] < 1e-12 * spec.amplitudes[1]);
        assert!(spec.amplitudes[3] > 1e-6 * spec.amplitudes[1]);
    }

    #[test]
    fn shield_attenuates_by_exponential() {
        let s = Sphere::silica(5e-6).unwrap();
        let c = YukawaCoupling::isl(1.0, 10e-6).unwrap();
        let open = AttractorGeometry::FingerArray(fingers());
        let shielded = AttractorGeometry::FingerArray(FingerArray {
            shield_thickness: Some(1e-6),
            ..fingers()
        });
        let a = yukawa_force_modulated(&s, &c, &open, 1).unwrap().value();
        let b = yukawa_force_modulated(&s, &c, &shielded, 1)
            .unwrap()
            .value();
        assert!(rel(b / a, (-0.1f64).exp()) < 1e-12);
    }

    #[test]
    fn parseval_against_resampled_waveform() {
        // the dense waveform's mean square against the 64-sample harmonics
        let s = Sphere::silica(5e-6).unwrap();
        let c = YukawaCoupling::isl(1.0, 10e-6).unwrap();
        for g in [
            AttractorGeometry::FingerArray(fingers()),
            AttractorGeometry::FluidCapillary(capillary()),
        ] {
            let coarse = modulated_spectrum(&s, &c, &g, 64).unwrap();
            let dense = modulated_spectrum(&s, &c, &g, 4096).unwrap();
            let direct =
                pairwise_sum(&dense.waveform.iter().map(|f| f * f).collect::<Vec<_>>()) / 4096.0;
            assert!(rel(coarse.parseval_power(), direct) < 1e-6);
        }
    }

    #[test]
    fn harmonic_requests_are_validated() {
        let s = Sphere::silica(5e-6).unwrap();
        let c = YukawaCoupling::isl(1.0, 10e-6).unwrap();
        let slab = AttractorGeometry::PlaneSlab(PlaneSlab {
            thickness: 1e-5,
            density_contrast: 1.0,
            distance: 1e-5,
        });
        assert!(yukawa_force_modulated(&s, &c, &slab, 1).is_err());
        assert!(
            yukawa_force_modulated(&s, &c, &AttractorGeometry::FingerArray(fingers()), 0).is_err()
        );
        assert!(
            modulated_spectrum(&s, &c, &AttractorGeometry::FingerArray(fingers()), 32).is_err()
        );
        let inf = YukawaCoupling::isl(1.0, f64::INFINITY).unwrap();
        assert!(
            yukawa_force_modulated(&s, &inf, &AttractorGeometry::FingerArray(fingers()), 1)
                .is_err()
        );
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn linear_in_alpha(k in -10.0f64..10.0, lambda in 2e-6f64..50e-6) {
            let s = Sphere::silica(5e-6).unwrap();
            let c = YukawaCoupling::isl(1.0, lambda).unwrap();
            let ck = c.with_strength(k).unwrap();
            let slab = PlaneSlab { thickness: 1e-5, density_contrast: 19300.0, distance: 4e-6 };
            let a = yukawa_force_plane(&s, &c, &slab).unwrap().value();
            let b = yukawa_force_plane(&s, &ck, &slab).unwrap().value();
            prop_assert!((b - k * a).abs() <= 1e-12 * (k * a).abs());
            let g = AttractorGeometry::FingerArray(fingers());
            let a = yukawa_force_modulated(&s, &c, &g, 1).unwrap().value();
            let b = yukawa_force_modulated(&s, &ck, &g, 1).unwrap().value();
            prop_assert!((b - k.abs() * a).abs() <= 1e-12 * (k * a).abs());
        }
    }
}
