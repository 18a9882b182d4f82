//! Exponentially scaled modified Bessel functions of order one.
//!
//! Mode sums need I₁(κa)K₁(κr) with r > a, which over- and underflows
//! long before the product does.

use puruspe::{In, Kn};

const ASYMPTOTIC: f64 = 500.0;

/// e^{−x} I₁(x)
pub(crate) fn i1e(x: f64) -> f64 {
    if x < ASYMPTOTIC {
        In(1, x) * (-x).exp()
    } else {
        let t = 1.0 / x;
        (1.0 - t * (3.0 / 8.0 + t * (15.0 / 128.0 + t * 315.0 / 3072.0)))
            / (2.0 * std::f64::consts::PI * x).sqrt()
    }
}

/// e^{x} K₁(x)
pub(crate) fn k1e(x: f64) -> f64 {
    if x < ASYMPTOTIC {
        Kn(1, x) * x.exp()
    } else {
        let t = 1.0 / x;
        (std::f64::consts::PI / (2.0 * x)).sqrt()
            * (1.0 + t * (3.0 / 8.0 - t * (15.0 / 128.0 - t * 315.0 / 3072.0)))
    }
}

/// I₁(z)K₁(w) for w ≥ z ≥ 0.
#[cfg(test)]
pub(crate) fn i1_k1(z: f64, w: f64) -> f64 {
    i1e(z) * k1e(w) * (z - w).exp()
}
