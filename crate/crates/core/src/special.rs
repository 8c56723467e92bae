//! Scalar special functions used across the samplers.

use statrs::function::erf::erfc;
use std::f64::consts::{PI, SQRT_2};

/// Logistic function `1 / (1 + e^{-x})`, stable for large `|x|`.
pub fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + e^x)` without overflow.
pub fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

pub fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// Natural log of the standard normal CDF.
pub fn log_ndtr(x: f64) -> f64 {
    if x > -30.0 {
        (0.5 * erfc(-x / SQRT_2)).ln()
    } else {
        // Asymptotic Mills-ratio expansion; erfc underflows out here.
        let x2 = x * x;
        -0.5 * x2 - (-x).ln() - 0.5 * (2.0 * PI).ln() + (1.0 - 1.0 / x2 + 3.0 / (x2 * x2)).ln()
    }
}

/// Modified Bessel function of the first kind, order `nu` (integer), by its
/// power series. Accurate to machine precision for the moderate arguments the
/// crate needs (|x| up to a few dozen).
pub fn bessel_i(nu: u32, x: f64) -> f64 {
    let half = 0.5 * x;
    let mut term = 1.0;
    for k in 1..=nu {
        term *= half / k as f64;
    }
    let mut sum = term;
    let q = half * half;
    let mut k = 0u32;
    loop {
        k += 1;
        term *= q / (k as f64 * (k + nu) as f64);
        sum += term;
        if term < sum * 1e-17 || k > 500 {
            break;
        }
    }
    sum
}

/// `log Γ(x)` for `x > 0`.
pub fn ln_gamma(x: f64) -> f64 {
    statrs::function::gamma::ln_gamma(x)
}

/// `log(2π)`.
pub const LN_2PI: f64 = 1.837_877_066_409_345_5;
