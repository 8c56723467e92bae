//! Von Mises sampling.

use crate::expfam::wrap_angle;
use rand::Rng;
use std::f64::consts::{PI, TAU};

/// One draw from `vM(mu, kappa)` in `[0, 2π)` by the Best–Fisher wrapped
/// Cauchy envelope.
pub fn sample_von_mises<R: Rng + ?Sized>(mu: f64, kappa: f64, rng: &mut R) -> f64 {
    if kappa < 1e-8 {
        return TAU * rng.random::<f64>();
    }
    let tau = 1.0 + (1.0 + 4.0 * kappa * kappa).sqrt();
    let rho = (tau - (2.0 * tau).sqrt()) / (2.0 * kappa);
    let r = (1.0 + rho * rho) / (2.0 * rho);
    loop {
        let u1: f64 = rng.random();
        let u2: f64 = rng.random();
        let z = (PI * u1).cos();
        let f = (1.0 + r * z) / (r + z);
        let c = kappa * (r - f);
        if c * (2.0 - c) - u2 > 0.0 || (c / u2).ln() + 1.0 - c >= 0.0 {
            let theta = f.clamp(-1.0, 1.0).acos();
            let sign = if rng.random::<f64>() < 0.5 { -1.0 } else { 1.0 };
            return wrap_angle(mu + sign * theta);
        }
    }
}

/// Draw from the density `∝ exp(a cos x + b sin x)`.
pub fn sample_natural<R: Rng + ?Sized>(a: f64, b: f64, rng: &mut R) -> f64 {
    sample_von_mises(b.atan2(a), a.hypot(b), rng)
}
