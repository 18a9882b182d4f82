//! Brute-force reference values by direct quadrature over source volumes.
//!
//! These integrate the point Yukawa force Gα m₁m₂ (1/r² + 1/(λr)) e^{−r/λ}
//! element by element and share nothing with the closed forms except the
//! quadrature rule. The slab reference also integrates over the sphere
//! volume; the patterned references treat the sphere as a point mass
//! scaled by Φ(R/λ), which [`form_factor`] checks separately. Slow by
//! design.

use std::cell::Cell;
use std::f64::consts::PI;

use rayon::prelude::*;
use serde::Serialize;

use super::geometry::{AttractorGeometry, FingerArray, FluidCapillary, PlaneSlab};
use super::yukawa::{capillary_force_at, finger_force_at, yukawa_force_plane};
use super::{form_factor as closed_form_factor, YukawaCoupling};
use crate::error::Result;
use crate::quadrature::{
    integrate, integrate_piecewise, integrate_to_infinity, Estimate, Tolerance,
};
use crate::quantities::CODATA_2018;
use crate::sensor::Sphere;

/// Relative tolerance requested from each nested integral.
pub const ORACLE_TOLERANCE: f64 = 1e-9;
/// Sources further than this many ranges beyond the nearest point are dropped.
pub const CUTOFF_RANGES: f64 = 45.0;

/// Reference value and whether every nested integral converged.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OracleValue {
    pub value: f64,
    pub converged: bool,
}

struct Nest {
    tol: Tolerance,
    ok: Cell<bool>,
}

impl Nest {
    fn new() -> Self {
        Nest {
            tol: Tolerance::relative(ORACLE_TOLERANCE).with_max_intervals(400),
            ok: Cell::new(true),
        }
    }

    fn take(&self, e: Estimate) -> f64 {
        if !e.converged {
            self.ok.set(false);
        }
        e.value
    }

    fn finite(&self, f: impl FnMut(f64) -> f64, a: f64, b: f64) -> f64 {
        self.take(integrate(f, a, b, self.tol))
    }

    fn to_infinity(&self, f: impl FnMut(f64) -> f64, a: f64, scale: f64) -> f64 {
        self.take(integrate_to_infinity(f, a, scale, self.tol))
    }

    fn piecewise(&self, f: impl FnMut(f64) -> f64, breaks: &[f64]) -> f64 {
        self.take(integrate_piecewise(f, breaks, self.tol))
    }

    fn result(&self, value: f64) -> OracleValue {
        OracleValue {
            value,
            converged: self.ok.get(),
        }
    }
}

/// (1/r² + 1/(λr)) e^{−r/λ}
fn kernel(r: f64, lambda: f64) -> f64 {
    (1.0 / (r * r) + 1.0 / (lambda * r)) * (-r / lambda).exp()
}

/// Φ(x) from the Yukawa potential of a uniform unit sphere at distance 2,
/// integrated over its volume and divided by that of a point mass.
pub fn form_factor(x: f64) -> OracleValue {
    if x == 0.0 {
        return OracleValue {
            value: 1.0,
            converged: true,
        };
    }
    let lambda = 1.0 / x;
    let dist: f64 = 2.0;
    let nest = Nest::new();
    // spherical shells r', polar cosine u; azimuth is trivial
    let total = nest.finite(
        |rp| {
            let shell = nest.finite(
                |u| {
                    let s = (dist * dist + rp * rp - 2.0 * dist * rp * u).sqrt();
                    // scaled by e^{D/λ} to keep large x finite
                    ((dist - s) / lambda).exp() / s
                },
                -1.0,
                1.0,
            );
            2.0 * PI * rp * rp * shell
        },
        0.0,
        1.0,
    );
    let point = 4.0 / 3.0 * PI / dist;
    nest.result(total / point)
}

/// Sphere–slab Yukawa force by integrating over sphere slices and the
/// slab in cylindrical coordinates.
pub fn slab_force(sphere: &Sphere, coupling: &YukawaCoupling, slab: &PlaneSlab) -> OracleValue {
    let lambda = coupling.range;
    let r = sphere.radius();
    let scale = CODATA_2018.g_n * coupling.strength * sphere.density() * slab.density_contrast;
    let nest = Nest::new();
    let column = |h: f64| {
        // force on a unit point mass from a unit-density plane layer at depth h
        nest.to_infinity(
            |s| 2.0 * PI * s * kernel((s * s + h * h).sqrt(), lambda) * h / (s * s + h * h).sqrt(),
            0.0,
            h + lambda,
        )
    };
    let at_height = |z: f64| {
        if slab.thickness.is_infinite() {
            nest.to_infinity(|zp| column(z + zp), 0.0, lambda)
        } else {
            nest.finite(|zp| column(z + zp), 0.0, slab.thickness)
        }
    };
    let total = nest.finite(
        |u| PI * (r * r - u * u) * at_height(slab.distance + u),
        -r,
        r,
    );
    nest.result(scale * total)
}

fn pattern_breaks(half_period: f64, centre: f64, reach: f64) -> Vec<f64> {
    // material boundaries at (j + ½)·half_period from the pattern origin
    let lo = ((centre - reach) / half_period - 0.5).ceil() as i64;
    let hi = ((centre + reach) / half_period - 0.5).floor() as i64;
    let mut b = vec![-reach];
    b.extend(
        (lo..=hi)
            .map(|j| (j as f64 + 0.5) * half_period - centre)
            .filter(|x| x.abs() < reach),
    );
    b.push(reach);
    b
}

fn pattern_density(u: f64, half_period: f64, a: f64, b: f64) -> f64 {
    // A occupies |u − 2j·half_period| < half_period/2
    let cell = (u / (2.0 * half_period)).round();
    if (u - cell * 2.0 * half_period).abs() < 0.5 * half_period {
        a
    } else {
        b
    }
}

fn point_scale(sphere: &Sphere, coupling: &YukawaCoupling, shield: Option<f64>) -> f64 {
    let lambda = coupling.range;
    CODATA_2018.g_n
        * coupling.strength
        * sphere.mass()
        * closed_form_factor(sphere.radius() / lambda)
        * shield.map_or(1.0, |t| (-t / lambda).exp())
}

/// Normal force from a finger array displaced laterally by `x`.
pub fn finger_force(
    sphere: &Sphere,
    coupling: &YukawaCoupling,
    geom: &FingerArray,
    x: f64,
) -> OracleValue {
    let lambda = coupling.range;
    let d = geom.distance;
    let reach = d + geom.finger_height + CUTOFF_RANGES * lambda;
    let breaks = pattern_breaks(geom.finger_width, -x, reach);
    let nest = Nest::new();
    let total = nest.piecewise(
        |xp| {
            // sphere at the origin; material at xp belongs to pattern coordinate xp − x
            let rho = pattern_density(xp - x, geom.finger_width, geom.density_a, geom.density_b);
            rho * nest.finite(
                |zp| {
                    let h = d + zp;
                    2.0 * nest.to_infinity(
                        |y| {
                            let r = (xp * xp + y * y + h * h).sqrt();
                            kernel(r, lambda) * h / r
                        },
                        0.0,
                        (xp * xp + h * h).sqrt() + lambda,
                    )
                },
                0.0,
                geom.finger_height,
            )
        },
        &breaks,
    );
    nest.result(point_scale(sphere, coupling, geom.shield_thickness) * total)
}

/// Force toward the capillary axis with the droplet train displaced by `x`.
pub fn capillary_force(
    sphere: &Sphere,
    coupling: &YukawaCoupling,
    geom: &FluidCapillary,
    x: f64,
) -> OracleValue {
    let lambda = coupling.range;
    let a = geom.inner_radius();
    let rho0 = geom.axis_distance();
    let reach = rho0 + CUTOFF_RANGES * lambda;
    let breaks = pattern_breaks(geom.droplet_length, -x, reach);
    let nest = Nest::new();
    let total = nest.piecewise(
        |xp| {
            let rho = pattern_density(xp - x, geom.droplet_length, geom.density_a, geom.density_b);
            rho * nest.finite(
                |rp| {
                    2.0 * rp
                        * nest.finite(
                            |t| {
                                let c = t.cos();
                                let r =
                                    (xp * xp + rho0 * rho0 + rp * rp - 2.0 * rho0 * rp * c).sqrt();
                                kernel(r, lambda) * (rho0 - rp * c) / r
                            },
                            0.0,
                            PI,
                        )
                },
                0.0,
                a,
            )
        },
        &breaks,
    );
    nest.result(point_scale(sphere, coupling, geom.shield_thickness) * total)
}

/// Harmonic amplitude from the reference force on `phases` drive phases.
pub fn modulated_harmonic(
    sphere: &Sphere,
    coupling: &YukawaCoupling,
    geom: &AttractorGeometry,
    harmonic: usize,
    phases: usize,
) -> OracleValue {
    let samples: Vec<OracleValue> = (0..phases)
        .into_par_iter()
        .map(|j| {
            let phase = 2.0 * PI * j as f64 / phases as f64;
            match geom {
                AttractorGeometry::FingerArray(g) => {
                    finger_force(sphere, coupling, g, g.position(phase))
                }
                AttractorGeometry::FluidCapillary(g) => {
                    capillary_force(sphere, coupling, g, g.position(phase))
                }
                AttractorGeometry::PlaneSlab(g) => slab_force(sphere, coupling, g),
            }
        })
        .collect();
    let (mut re, mut im) = (0.0, 0.0);
    for (j, s) in samples.iter().enumerate() {
        let arg = 2.0 * PI * (harmonic * j % phases) as f64 / phases as f64;
        re += s.value * arg.cos();
        im -= s.value * arg.sin();
    }
    OracleValue {
        value: 2.0 * re.hypot(im) / phases as f64,
        converged: samples.iter().all(|s| s.converged),
    }
}

/// One closed-form versus reference comparison.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegressionRow {
    pub case: &'static str,
    pub radius: f64,
    pub range: f64,
    pub distance: f64,
    pub extent: f64,
    pub position: f64,
    pub closed_form: f64,
    pub oracle: f64,
    pub converged: bool,
    pub tolerance: f64,
}

impl RegressionRow {
    pub fn rel_diff(&self) -> f64 {
        (self.closed_form - self.oracle).abs() / self.oracle.abs()
    }

    pub fn passes(&self) -> bool {
        self.converged && self.rel_diff() <= self.tolerance
    }
}

pub const SLAB_TOLERANCE: f64 = 1e-4;

enum Point {
    Slab(f64, PlaneSlab),
    Finger(f64, FingerArray, f64),
    Capillary(f64, FluidCapillary, f64),
}

fn grid_points() -> Vec<(f64, Point)> {
    let mut points = Vec::new();
    // slab: radius, range, distance, thickness
    for (r, lambda, d, t) in [
        (0.15e-6, 1e-6, 0.25e-6, f64::INFINITY),
        (0.15e-6, 1e-6, 0.5e-6, 20e-6),
        (0.15e-6, 0.2e-6, 0.3e-6, 1e-6),
        (0.15e-6, 5e-6, 1e-6, 2e-6),
        (0.5e-6, 1e-6, 0.6e-6, 10e-6),
        (0.5e-6, 0.1e-6, 0.55e-6, 1e-6),
        (0.5e-6, 3e-6, 2e-6, 0.5e-6),
        (1e-6, 1e-6, 1.2e-6, f64::INFINITY),
        (1e-6, 10e-6, 5e-6, 10e-6),
        (1e-6, 0.5e-6, 3e-6, 5e-6),
        (2.5e-6, 1e-6, 3e-6, 10e-6),
        (2.5e-6, 10e-6, 5e-6, 10e-6),
        (2.5e-6, 2.5e-6, 10e-6, 1e-6),
        (2.5e-6, 0.3e-6, 2.6e-6, f64::INFINITY),
        (5e-6, 5e-6, 6e-6, 20e-6),
        (5e-6, 20e-6, 10e-6, 5e-6),
        (5e-6, 1e-6, 5.5e-6, 3e-6),
        (7.5e-6, 3e-6, 9e-6, f64::INFINITY),
        (7.5e-6, 30e-6, 20e-6, 50e-6),
        (10e-6, 10e-6, 15e-6, 25e-6),
    ] {
        points.push((
            r,
            Point::Slab(
                lambda,
                PlaneSlab {
                    thickness: t,
                    density_contrast: 19300.0,
                    distance: d,
                },
            ),
        ));
    }
    let f0 = FingerArray {
        finger_width: 25e-6,
        finger_height: 10e-6,
        density_a: 19300.0,
        density_b: 2330.0,
        distance: 5e-6,
        drive_amplitude: 25e-6,
        drive_frequency: 13.0,
        lateral_offset: 0.0,
        shield_thickness: None,
    };
    // fingers: radius, range, width, height, distance, position
    for (r, lambda, w, h, d, x) in [
        (2.5e-6, 10e-6, 25e-6, 10e-6, 5e-6, 0.0),
        (2.5e-6, 10e-6, 25e-6, 10e-6, 5e-6, 12.5e-6),
        (2.5e-6, 10e-6, 25e-6, 10e-6, 5e-6, 20e-6),
        (2.5e-6, 3e-6, 25e-6, 10e-6, 4e-6, 7e-6),
        (2.5e-6, 30e-6, 25e-6, 25e-6, 8e-6, 3e-6),
        (1e-6, 1e-6, 5e-6, 5e-6, 2e-6, 1e-6),
        (1e-6, 5e-6, 10e-6, 2e-6, 3e-6, 4e-6),
        (5e-6, 20e-6, 50e-6, 20e-6, 10e-6, 30e-6),
        (5e-6, 2e-6, 25e-6, 10e-6, 6e-6, 0.0),
        (0.5e-6, 0.5e-6, 2e-6, 1e-6, 1e-6, 0.3e-6),
    ] {
        let g = FingerArray {
            finger_width: w,
            finger_height: h,
            distance: d,
            ..f0
        };
        points.push((r, Point::Finger(lambda, g, x)));
    }
    let c0 = FluidCapillary {
        inner_diameter: 50e-6,
        droplet_length: 40e-6,
        density_a: 3000.0,
        density_b: 800.0,
        distance: 5e-6,
        modulation_frequency: 50.0,
        shield_thickness: None,
    };
    // capillary: radius, range, inner diameter, droplet length, distance, position
    for (r, lambda, id, l, d, x) in [
        (2.5e-6, 10e-6, 50e-6, 40e-6, 5e-6, 0.0),
        (2.5e-6, 10e-6, 50e-6, 40e-6, 5e-6, 40e-6),
        (2.5e-6, 10e-6, 50e-6, 40e-6, 5e-6, 17e-6),
        (2.5e-6, 30e-6, 100e-6, 100e-6, 10e-6, 25e-6),
        (2.5e-6, 3e-6, 20e-6, 20e-6, 3e-6, 5e-6),
        (1e-6, 1e-6, 10e-6, 10e-6, 1.5e-6, 2e-6),
        (5e-6, 50e-6, 200e-6, 150e-6, 20e-6, 60e-6),
        (5e-6, 5e-6, 30e-6, 60e-6, 6e-6, 0.0),
        (1e-6, 20e-6, 5e-6, 30e-6, 2e-6, 10e-6),
        (0.5e-6, 0.5e-6, 4e-6, 3e-6, 0.8e-6, 1e-6),
    ] {
        let g = FluidCapillary {
            inner_diameter: id,
            droplet_length: l,
            distance: d,
            ..c0
        };
        points.push((r, Point::Capillary(lambda, g, x)));
    }
    points
}

/// The fixed regression grid: 20 slab points and 20 patterned-attractor
/// points, α = 1 on silica spheres.
pub fn regression_grid() -> Result<Vec<RegressionRow>> {
    grid_points()
        .into_par_iter()
        .map(|(radius, point)| {
            let sphere = Sphere::silica(2.0 * radius)?;
            Ok(match point {
                Point::Slab(lambda, slab) => {
                    let c = YukawaCoupling::isl(1.0, lambda)?;
                    let o = slab_force(&sphere, &c, &slab);
                    RegressionRow {
                        case: "slab",
                        radius,
                        range: lambda,
                        distance: slab.distance,
                        extent: slab.thickness,
                        position: 0.0,
                        closed_form: yukawa_force_plane(&sphere, &c, &slab)?.value(),
                        oracle: o.value,
                        converged: o.converged,
                        tolerance: SLAB_TOLERANCE,
                    }
                }
                Point::Finger(lambda, g, x) => {
                    let c = YukawaCoupling::isl(1.0, lambda)?;
                    let o = finger_force(&sphere, &c, &g, x);
                    RegressionRow {
                        case: "fingers",
                        radius,
                        range: lambda,
                        distance: g.distance,
                        extent: g.finger_width,
                        position: x,
                        closed_form: finger_force_at(&sphere, &c, &g, x)?,
                        oracle: o.value,
                        converged: o.converged,
                        tolerance: super::MODULATED_TOLERANCE,
                    }
                }
                Point::Capillary(lambda, g, x) => {
                    let c = YukawaCoupling::isl(1.0, lambda)?;
                    let o = capillary_force(&sphere, &c, &g, x);
                    RegressionRow {
                        case: "capillary",
                        radius,
                        range: lambda,
                        distance: g.distance,
                        extent: g.droplet_length,
                        position: x,
                        closed_form: capillary_force_at(&sphere, &c, &g, x)?,
                        oracle: o.value,
                        converged: o.converged,
                        tolerance: super::MODULATED_TOLERANCE,
                    }
                }
            })
        })
        .collect()
}

pub fn regression_csv(rows: &[RegressionRow]) -> String {
    use std::fmt::Write as _;
    let mut out = String::from(
        "case,radius_m,range_m,distance_m,extent_m,position_m,closed_form_n,oracle_n,rel_diff,tolerance,pass\n",
    );
    for r in rows {
        let _ = writeln!(
            out,
            "{},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{}",
            r.case,
            r.radius,
            r.range,
            r.distance,
            r.extent,
            r.position,
            r.closed_form,
            r.oracle,
            r.rel_diff(),
            r.tolerance,
            r.passes()
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn form_factor_matches_volume_integral() {
        for x in [0.1, 1.0, 10.0] {
            let o = form_factor(x);
            assert!(o.converged);
            let c = closed_form_factor(x);
            assert!(
                (o.value - c).abs() < 1e-6 * c,
                "x = {x}: {} vs {c}",
                o.value
            );
        }
    }

    #[test]
    fn pattern_helpers() {
        assert_eq!(pattern_density(0.0, 1.0, 7.0, 3.0), 7.0);
        assert_eq!(pattern_density(0.49, 1.0, 7.0, 3.0), 7.0);
        assert_eq!(pattern_density(0.51, 1.0, 7.0, 3.0), 3.0);
        assert_eq!(pattern_density(-1.9, 1.0, 7.0, 3.0), 7.0);
        let b = pattern_breaks(1.0, 0.0, 2.0);
        assert_eq!(b, vec![-2.0, -1.5, -0.5, 0.5, 1.5, 2.0]);
    }
}
