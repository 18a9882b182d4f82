//! New-force potentials for extended source and sensor geometries.
//!
//! Forces are reported as the component toward the attractor, so a
//! positive (attractive) Yukawa strength gives a positive force.

mod bessel;
mod geometry;
pub mod oracle;
mod yukawa;

use serde::{Deserialize, Serialize};

pub use geometry::{AttractorGeometry, FingerArray, FluidCapillary, PlaneSlab};
pub use yukawa::{
    capillary_force_at, finger_force_at, modulated_spectrum, yukawa_force_modulated,
    yukawa_force_plane, ModulatedSpectrum, MAX_PHASE_SAMPLES, MIN_PHASE_SAMPLES,
    MODULATED_TOLERANCE,
};

use crate::error::{finite, non_negative, positive, Error, Result};
use crate::quantities::{Quantity, CODATA_2018};
use crate::sensor::Sphere;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CouplingKind {
    /// Gravity-strength Yukawa correction α.
    #[serde(rename = "ISL_alpha")]
    IslAlpha,
    /// Kinetic mixing of a massive hidden photon, χ².
    #[serde(rename = "Coulomb_chi2")]
    CoulombChi2,
    /// Dark matter–neutron coupling α_n.
    #[serde(rename = "DM_alpha_n")]
    DmAlphaN,
}

/// Strength and range of a Yukawa-type interaction. `range` may be
/// infinite for a massless mediator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct YukawaCoupling {
    pub kind: CouplingKind,
    pub strength: f64,
    #[serde(with = "crate::quantities::extended")]
    pub range: f64,
}

impl YukawaCoupling {
    pub fn new(kind: CouplingKind, strength: f64, range: f64) -> Result<Self> {
        finite("coupling strength", strength)?;
        if kind != CouplingKind::IslAlpha {
            non_negative("coupling strength", strength)?;
        }
        if range.is_nan() || range <= 0.0 {
            return Err(Error::domain(
                "range",
                format!("must be > 0, got {range:e}"),
            ));
        }
        Ok(YukawaCoupling {
            kind,
            strength,
            range,
        })
    }

    pub fn isl(alpha: f64, range: f64) -> Result<Self> {
        YukawaCoupling::new(CouplingKind::IslAlpha, alpha, range)
    }

    pub fn coulomb(chi2: f64, range: f64) -> Result<Self> {
        YukawaCoupling::new(CouplingKind::CoulombChi2, chi2, range)
    }

    pub fn dark_matter(alpha_n: f64, range: f64) -> Result<Self> {
        YukawaCoupling::new(CouplingKind::DmAlphaN, alpha_n, range)
    }

    pub fn with_strength(mut self, strength: f64) -> Result<Self> {
        self.strength = strength;
        YukawaCoupling::new(self.kind, self.strength, self.range)
    }

    pub(crate) fn expect(&self, kind: CouplingKind) -> Result<()> {
        if self.kind == kind {
            Ok(())
        } else {
            Err(Error::invalid(
                "coupling",
                format!("expected {kind:?}, got {:?}", self.kind),
            ))
        }
    }
}

/// Φ(x) = 3(x cosh x − sinh x)/x³: a uniform sphere of radius R sources
/// (and feels) a Yukawa field of range λ like a point mass m·Φ(R/λ).
pub fn sphere_form_factor(x: f64) -> Result<f64> {
    if !(x >= 0.0) {
        return Err(Error::domain("R/λ", format!("must be >= 0, got {x:e}")));
    }
    Ok(form_factor(x))
}

pub(crate) fn form_factor(x: f64) -> f64 {
    if x < 0.5 {
        // 3 Σ 2n x^(2n−2) / (2n+1)!
        let x2 = x * x;
        let mut term = 1.0;
        let mut sum = 1.0;
        for n in 2..20 {
            let n = n as f64;
            term *= x2 * n / ((n - 1.0) * (2.0 * n) * (2.0 * n + 1.0));
            sum += term;
            if term < 1e-17 * sum {
                break;
            }
        }
        sum
    } else {
        damped_form_factor(x, 0.0)
    }
}

/// Φ(x)·e^{−y}, finite whenever y ≥ x (a sphere outside the source).
pub(crate) fn damped_form_factor(x: f64, y: f64) -> f64 {
    if x < 0.5 {
        return form_factor(x) * (-y).exp();
    }
    1.5 * ((x - 1.0) * (x - y).exp() + (x + 1.0) * (-x - y).exp()) / (x * x * x)
}

/// Field leaking outside a parallel-plate capacitor when the photon mixes
/// with a massive hidden photon of range λ, at standoff `standoff` from the
/// outer plate. Both λ → 0 and λ → ∞ screen it completely.
pub fn capacitor_leakage_field(
    plate_voltage: f64,
    plate_spacing: f64,
    standoff: f64,
    coupling: &YukawaCoupling,
) -> Result<Quantity> {
    coupling.expect(CouplingKind::CoulombChi2)?;
    positive("plate voltage", plate_voltage)?;
    positive("plate spacing", plate_spacing)?;
    positive("standoff", standoff)?;
    let lambda = coupling.range;
    let shape = if lambda.is_infinite() {
        0.0
    } else {
        (-standoff / lambda).exp() - (-(standoff + plate_spacing) / lambda).exp()
    };
    Quantity::electric_field(coupling.strength * plate_voltage / (2.0 * plate_spacing) * shape)
}

/// α_n N ħc e^{−r/λ}/r, with α_n in its natural-unit form.
pub fn dm_yukawa_point_potential(
    coupling: &YukawaCoupling,
    nucleons: f64,
    r: f64,
) -> Result<Quantity> {
    coupling.expect(CouplingKind::DmAlphaN)?;
    non_negative("nucleon count", nucleons)?;
    if !(r > 0.0) || !r.is_finite() {
        return Err(Error::domain(
            "r",
            format!("must be finite and > 0, got {r:e}"),
        ));
    }
    let screening = if coupling.range.is_infinite() {
        1.0
    } else {
        (-r / coupling.range).exp()
    };
    Quantity::energy(coupling.strength * nucleons * CODATA_2018.hbar_c() / r * screening)
}

/// Order-of-magnitude Casimir background.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CasimirEstimate {
    /// |F| from the perfect-conductor proximity-force approximation.
    pub force: Quantity,
    /// False when the gap is not small against the radius.
    pub pfa_valid: bool,
}

/// Gaps above this fraction of the radius are flagged as outside the
/// proximity-force regime.
pub const PFA_MAX_GAP_RATIO: f64 = 0.1;

/// π³ħcR/(360 d³) between a perfectly conducting sphere and plane.
pub fn casimir_background_sphere_plane(sphere: &Sphere, gap: f64) -> Result<CasimirEstimate> {
    positive("gap", gap)?;
    let r = sphere.radius();
    let f = std::f64::consts::PI.powi(3) * CODATA_2018.hbar_c() * r / (360.0 * gap.powi(3));
    Ok(CasimirEstimate {
        force: Quantity::force(f)?,
        pfa_valid: gap <= PFA_MAX_GAP_RATIO * r,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    #[test]
    fn form_factor_values() {
        assert_eq!(form_factor(0.0), 1.0);
        assert!(rel(form_factor(1.0), 3.0 / 1f64.exp()) < 1e-14);
        let x: f64 = 10.0;
        assert!(rel(form_factor(x), 3.0 * (x * x.cosh() - x.sinh()) / x.powi(3)) < 1e-14);
        assert!(rel(form_factor(10.0), 297.357_288_978_989_6) < 1e-12);
        assert!(rel(form_factor(1e-4), 1.0 + 1e-9) < 1e-15);
        assert!(sphere_form_factor(-1.0).is_err());
    }

    #[test]
    fn form_factor_branches_join() {
        let closed = |x: f64| 3.0 * (x * x.cosh() - x.sinh()) / x.powi(3);
        for x in [0.3, 0.49, 0.5, 0.51, 0.7] {
            assert!(rel(form_factor(x), closed(x)) < 1e-12, "{x}");
        }
        assert!(damped_form_factor(800.0, 801.0).is_finite());
        assert!(
            rel(
                damped_form_factor(3.0, 4.0),
                form_factor(3.0) * (-4f64).exp()
            ) < 1e-14
        );
    }

    #[test]
    fn leakage_field_example() {
        let c = YukawaCoupling::coulomb(1.0, 1e-3).unwrap();
        let e = capacitor_leakage_field(2000.0, 2e-3, 25e-6, &c)
            .unwrap()
            .value();
        let expect = 5e5 * ((-0.025f64).exp() - (-2.025f64).exp());
        assert!(rel(e, expect) < 1e-14);
        assert!(rel(e, 4.22e5) < 2e-3);
        let zero = YukawaCoupling::coulomb(0.0, 1e-3).unwrap();
        assert_eq!(
            capacitor_leakage_field(2000.0, 2e-3, 25e-6, &zero)
                .unwrap()
                .value(),
            0.0
        );
        for lambda in [1e-9, f64::INFINITY] {
            let c = YukawaCoupling::coulomb(1.0, lambda).unwrap();
            assert!(
                capacitor_leakage_field(2000.0, 2e-3, 25e-6, &c)
                    .unwrap()
                    .value()
                    < 1e-6
            );
        }
        assert!(capacitor_leakage_field(
            2000.0,
            2e-3,
            25e-6,
            &YukawaCoupling::isl(1.0, 1e-3).unwrap()
        )
        .is_err());
    }

    #[test]
    fn dm_potential() {
        let c = YukawaCoupling::dark_matter(1.2e-7, f64::INFINITY).unwrap();
        let v = dm_yukawa_point_potential(&c, 6.3e14, 1e-6).unwrap().value();
        let hbar_c = 1.054_571_817e-34 * 299_792_458.0;
        assert!(rel(v, 1.2e-7 * 6.3e14 * hbar_c / 1e-6) < 1e-14);
        let v2 = dm_yukawa_point_potential(&c, 6.3e14, 2e-6).unwrap().value();
        assert!(rel(v / v2, 2.0) < 1e-14);
        assert!(dm_yukawa_point_potential(&c, 1.0, 0.0).is_err());
        let zero = YukawaCoupling::dark_matter(0.0, 1e-6).unwrap();
        assert_eq!(
            dm_yukawa_point_potential(&zero, 6.3e14, 1e-6)
                .unwrap()
                .value(),
            0.0
        );
        assert!(YukawaCoupling::dark_matter(-1.0, 1e-6).is_err());
    }

    #[test]
    fn casimir_example() {
        let s = Sphere::silica(5e-6).unwrap();
        let c = casimir_background_sphere_plane(&s, 1e-6).unwrap();
        let hbar_c = 1.054_571_817e-34 * 299_792_458.0;
        let expect = std::f64::consts::PI.powi(3) * hbar_c * 2.5e-6 / (360.0 * 1e-18);
        assert!(rel(c.force.value(), expect) < 1e-14);
        assert!(rel(c.force.value(), 6.8e-15) < 0.01);
        assert!(!c.pfa_valid);
        let far = casimir_background_sphere_plane(&s, 2e-6).unwrap();
        assert!(rel(c.force.value() / far.force.value(), 8.0) < 1e-14);
        assert!(
            casimir_background_sphere_plane(&s, 0.1e-6)
                .unwrap()
                .pfa_valid
        );
    }

    #[test]
    fn coupling_validation() {
        assert!(YukawaCoupling::isl(-2.0, 1e-6).is_ok());
        assert!(YukawaCoupling::isl(1.0, 0.0).is_err());
        assert!(YukawaCoupling::isl(f64::NAN, 1.0).is_err());
        assert!(YukawaCoupling::coulomb(-1e-3, 1.0).is_err());
        let json = serde_json::to_string(&YukawaCoupling::isl(1.0, 1e-6).unwrap()).unwrap();
        assert!(json.contains("ISL_alpha"));
    }

    proptest! {
        #[test]
        fn leakage_and_dm_are_linear(k in 0.0f64..1e3, lambda in 1e-6f64..1.0) {
            let c = YukawaCoupling::coulomb(1e-6, lambda).unwrap();
            let e1 = capacitor_leakage_field(100.0, 1e-3, 1e-4, &c).unwrap().value();
            let e2 = capacitor_leakage_field(100.0, 1e-3, 1e-4, &c.with_strength(k * 1e-6).unwrap()).unwrap().value();
            prop_assert!((e2 - k * e1).abs() <= 1e-12 * (k * e1).abs());
            let d = YukawaCoupling::dark_matter(1e-7, lambda).unwrap();
            let v1 = dm_yukawa_point_potential(&d, 1e12, 1e-5).unwrap().value();
            let v2 = dm_yukawa_point_potential(&d.with_strength(k * 1e-7).unwrap(), 1e12, 1e-5).unwrap().value();
            prop_assert!((v2 - k * v1).abs() <= 1e-12 * (k * v1).abs());
        }

        #[test]
        fn form_factor_is_increasing(x in 0.0f64..50.0) {
            prop_assert!(form_factor(x + 1e-3) > form_factor(x));
            prop_assert!(form_factor(x) >= 1.0);
        }
    }
}
