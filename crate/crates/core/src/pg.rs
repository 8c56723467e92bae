//! Exact Pólya–Gamma PG(1, c) sampling.
//!
//! Draws use Devroye's alternating-series rejection sampler on the Jacobi
//! distribution J* = 4·PG(1, ·): proposals come from a truncated inverse
//! Gaussian on (0, t] and an exponential tail on (t, ∞), and the alternating
//! series for the J* density decides acceptance without truncation error.
//! Expected cost per draw is bounded uniformly in `c`.

use crate::error::{Error, Result};
use crate::special::log_ndtr;
use rand::Rng;
use rand_distr::{Exp1, StandardNormal};
use std::f64::consts::PI;

/// Switch point between the left and right series representations.
const TRUNC: f64 = 0.64;
const PI2_OVER_8: f64 = PI * PI / 8.0;

/// Tilt of a PG(1, c) law, stored as `|c|` since PG(1, c) = PG(1, −c).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PgTilt(f64);

impl PgTilt {
    pub fn new(c: f64) -> Result<Self> {
        if !c.is_finite() {
            return Err(Error::InvalidParameter(format!("Pólya–Gamma tilt must be finite, got {c}")));
        }
        Ok(Self(c.abs()))
    }

    pub fn c(self) -> f64 {
        self.0
    }
}

/// `E[ω]` for ω ~ PG(1, c): `tanh(c/2) / (2c)`, equal to 1/4 at `c = 0`.
pub fn pg1_mean(tilt: PgTilt) -> f64 {
    let c = tilt.0;
    if c < 1e-6 {
        // Taylor series of tanh(c/2)/(2c) around zero.
        0.25 - c * c / 48.0
    } else {
        (0.5 * c).tanh() / (2.0 * c)
    }
}

/// `Var[ω]` for ω ~ PG(1, c): `(sinh c − c) / (4 c³ cosh²(c/2))`, 1/24 at zero.
pub fn pg1_variance(tilt: PgTilt) -> f64 {
    let c = tilt.0;
    if c < 1e-3 {
        1.0 / 24.0 - c * c / 240.0
    } else if c > 700.0 {
        // sinh c / cosh²(c/2) → 2 as c grows.
        (2.0 - 4.0 * c * (-c).exp()) / (4.0 * c * c * c)
    } else {
        (c.sinh() - c) / (4.0 * c * c * c * (0.5 * c).cosh().powi(2))
    }
}

/// One exact draw from PG(1, c).
pub fn sample_pg1<R: Rng + ?Sized>(tilt: PgTilt, rng: &mut R) -> f64 {
    0.25 * sample_jacobi_star(0.5 * tilt.0, rng)
}

/// Convenience wrapper validating a raw tilt.
pub fn sample_pg1_raw<R: Rng + ?Sized>(c: f64, rng: &mut R) -> Result<f64> {
    Ok(sample_pg1(PgTilt::new(c)?, rng))
}

/// n-th coefficient of the alternating series for the J*(1, 0) density.
fn series_coef(n: usize, x: f64) -> f64 {
    let k = (n as f64 + 0.5) * PI;
    if x > TRUNC {
        k * (-0.5 * k * k * x).exp()
    } else if x > 0.0 {
        let h = n as f64 + 0.5;
        let expnt = -1.5 * ((0.5 * PI).ln() + x.ln()) + k.ln() - 2.0 * h * h / x;
        expnt.exp()
    } else {
        0.0
    }
}

/// Probability of choosing the exponential-tail proposal, computed in log
/// space so that large tilts do not overflow.
fn tail_mass(z: f64) -> f64 {
    let fz = PI2_OVER_8 + 0.5 * z * z;
    let root = (1.0 / TRUNC).sqrt();
    let b = root * (TRUNC * z - 1.0);
    let a = -root * (TRUNC * z + 1.0);
    let x0 = fz.ln() + fz * TRUNC;
    let xb = x0 - z + log_ndtr(b);
    let xa = x0 + z + log_ndtr(a);
    let m = xb.max(xa);
    let log_q_over_p = (4.0 / PI).ln() + m + ((xb - m).exp() + (xa - m).exp()).ln();
    // 1 / (1 + q/p)
    if log_q_over_p > 0.0 {
        let e = (-log_q_over_p).exp();
        e / (1.0 + e)
    } else {
        1.0 / (1.0 + log_q_over_p.exp())
    }
}

/// Inverse Gaussian IG(1/z, 1) truncated to (0, TRUNC].
fn truncated_inverse_gaussian<R: Rng + ?Sized>(z: f64, rng: &mut R) -> f64 {
    let mu = if z > 0.0 { 1.0 / z } else { f64::INFINITY };
    if mu > TRUNC {
        // Proposal from the z = 0 (Lévy) law truncated at TRUNC, then
        // accept with probability exp(-z² x / 2).
        loop {
            let e1 = loop {
                let e1: f64 = rng.sample(Exp1);
                let e2: f64 = rng.sample(Exp1);
                if e1 * e1 <= 2.0 * e2 / TRUNC {
                    break e1;
                }
            };
            let s = 1.0 + TRUNC * e1;
            let x = TRUNC / (s * s);
            let alpha = (-0.5 * z * z * x).exp();
            if rng.random::<f64>() <= alpha {
                return x;
            }
        }
    } else {
        loop {
            let n: f64 = rng.sample(StandardNormal);
            let y = n * n;
            let muy = mu * y;
            let mut x = mu + 0.5 * mu * muy - 0.5 * mu * (4.0 * muy + muy * muy).sqrt();
            if rng.random::<f64>() > mu / (mu + x) {
                x = mu * mu / x;
            }
            if x <= TRUNC {
                return x;
            }
        }
    }
}

/// Draw from J*(1, z); PG(1, 2z) = J*(1, z) / 4.
fn sample_jacobi_star<R: Rng + ?Sized>(z: f64, rng: &mut R) -> f64 {
    let fz = PI2_OVER_8 + 0.5 * z * z;
    let p_tail = tail_mass(z);
    loop {
        let x = if rng.random::<f64>() < p_tail {
            TRUNC + rng.sample::<f64, _>(Exp1) / fz
        } else {
            truncated_inverse_gaussian(z, rng)
        };
        let mut s = series_coef(0, x);
        let y = rng.random::<f64>() * s;
        let mut n = 0;
        loop {
            n += 1;
            if n % 2 == 1 {
                s -= series_coef(n, x);
                if y <= s {
                    return x;
                }
            } else {
                s += series_coef(n, x);
                if y > s {
                    break;
                }
            }
        }
    }
}

/// Density of PG(1, c) at `x`, by the alternating series with the
/// relative truncation rule `|term| ≤ 1e-12 · |sum|`.
///
/// Used as a test oracle; the sampler never evaluates it.
pub fn pg1_density(tilt: PgTilt, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    // PG(1,0) density at x is 4 · f_{J*}(4x).
    let u = 4.0 * x;
    let mut sum = 0.0;
    let mut n = 0;
    loop {
        let term = series_coef(n, u);
        sum += if n % 2 == 0 { term } else { -term };
        if term <= 1e-12 * sum.abs() || n > 10_000 {
            break;
        }
        n += 1;
    }
    let c = tilt.0;
    // cosh(c/2) · exp(-c² x / 2) in log space.
    let log_tilt = 0.5 * c + (-c).exp().ln_1p() - std::f64::consts::LN_2 - 0.5 * c * c * x;
    4.0 * sum * log_tilt.exp()
}
