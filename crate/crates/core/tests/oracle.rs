//! Closed-form attractor forces against brute-force volume quadrature.

use levkit_core::newforces::oracle::{self, regression_csv, regression_grid};
use levkit_core::newforces::{
    yukawa_force_modulated, yukawa_force_plane, AttractorGeometry, FingerArray, FluidCapillary,
    PlaneSlab, YukawaCoupling,
};
use levkit_core::Sphere;

#[test]
fn regression_grid_agrees() {
    let rows = regression_grid().unwrap();
    assert!(rows.iter().filter(|r| r.case == "slab").count() >= 20);
    assert!(rows.iter().filter(|r| r.case != "slab").count() >= 20);
    let csv = regression_csv(&rows);
    for r in &rows {
        assert!(r.passes(), "{csv}");
    }
}

#[test]
fn slab_example_pinned() {
    // 0.3 µm silica sphere, gold half-space 250 nm from its centre, λ = 1 µm
    let s = Sphere::silica(0.3e-6).unwrap();
    let c = YukawaCoupling::isl(1.0, 1e-6).unwrap();
    let slab = PlaneSlab {
        thickness: f64::INFINITY,
        density_contrast: 19300.0,
        distance: 0.25e-6,
    };
    let f = yukawa_force_plane(&s, &c, &slab).unwrap().value();
    let o = oracle::slab_force(&s, &c, &slab);
    assert!(o.converged);
    assert!(
        (f - o.value).abs() < 1e-4 * o.value,
        "{f:e} vs {:e}",
        o.value
    );
    assert!(
        (o.value - PINNED_SLAB).abs() < 1e-6 * PINNED_SLAB,
        "{:e}",
        o.value
    );
}

const PINNED_SLAB: f64 = 1.652_267_057_639_924e-28;

#[test]
fn finger_fundamental_against_phase_resolved_oracle() {
    let s = Sphere::silica(5e-6).unwrap();
    let c = YukawaCoupling::isl(1.0, 10e-6).unwrap();
    let g = AttractorGeometry::FingerArray(FingerArray {
        finger_width: 25e-6,
        finger_height: 10e-6,
        density_a: 19300.0,
        density_b: 2330.0,
        distance: 5e-6,
        drive_amplitude: 25e-6,
        drive_frequency: 13.0,
        lateral_offset: 12.5e-6,
        shield_thickness: None,
    });
    let closed = yukawa_force_modulated(&s, &c, &g, 1).unwrap().value();
    let o = oracle::modulated_harmonic(&s, &c, &g, 1, 64);
    assert!(o.converged);
    assert!(
        (closed - o.value).abs() < 1e-3 * o.value,
        "{closed:e} vs {:e}",
        o.value
    );
}

#[test]
fn capillary_fundamental_against_phase_resolved_oracle() {
    let s = Sphere::silica(5e-6).unwrap();
    let c = YukawaCoupling::isl(1.0, 20e-6).unwrap();
    let g = AttractorGeometry::FluidCapillary(FluidCapillary {
        inner_diameter: 50e-6,
        droplet_length: 40e-6,
        density_a: 3000.0,
        density_b: 800.0,
        distance: 5e-6,
        modulation_frequency: 50.0,
        shield_thickness: None,
    });
    let closed = yukawa_force_modulated(&s, &c, &g, 1).unwrap().value();
    let o = oracle::modulated_harmonic(&s, &c, &g, 1, 64);
    assert!(o.converged);
    assert!(
        (closed - o.value).abs() < 1e-3 * o.value,
        "{closed:e} vs {:e}",
        o.value
    );
}
