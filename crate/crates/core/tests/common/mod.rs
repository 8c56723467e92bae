//! Small models and quadrature oracles shared by the integration tests.
#![allow(dead_code)]

use ncbayes::expfam::{Domain, ExpFamModel};
use ncbayes::special::softplus;
use ncbayes::RandomStream;
use rand::Rng;

/// No natural parameters: only the normalizer is unknown.
pub struct InterceptOnly {
    pub domain: Domain,
}

impl ExpFamModel for InterceptOnly {
    fn dim(&self) -> usize {
        0
    }
    fn domain(&self) -> &Domain {
        &self.domain
    }
    fn suff_stat_into(&self, _x: &[f64], _out: &mut [f64]) {}
}

/// η(x) = x on an interval.
pub struct Linear1D {
    pub domain: Domain,
}

impl ExpFamModel for Linear1D {
    fn dim(&self) -> usize {
        1
    }
    fn domain(&self) -> &Domain {
        &self.domain
    }
    fn suff_stat_into(&self, x: &[f64], out: &mut [f64]) {
        out[0] = x[0];
    }
}

pub fn unit_interval() -> Domain {
    Domain::rectangle(vec![0.0], vec![1.0]).unwrap()
}

/// Draws from the density ∝ exp(slope·x) on [0, 1] by inversion.
pub fn exp_tilted(n: usize, slope: f64, rng: &mut RandomStream) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| {
            let u: f64 = rng.random();
            vec![(1.0 + u * (slope.exp() - 1.0)).ln() / slope]
        })
        .collect()
}

/// Classification log likelihood for a list of (z, C, s) triples.
pub fn loglik(rows: &[(Vec<f64>, f64, bool)], gamma: &[f64]) -> f64 {
    rows.iter()
        .map(|(z, c, s)| {
            let psi: f64 = z.iter().zip(gamma).map(|(a, b)| a * b).sum::<f64>() + c;
            (if *s { psi } else { 0.0 }) - softplus(psi)
        })
        .sum()
}

/// Posterior moments on a 1-D grid from unnormalized log density values.
pub fn grid_moments(grid: &[f64], logd: &[f64]) -> (f64, f64, Vec<f64>) {
    let max = logd.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = logd.iter().map(|l| (l - max).exp()).collect();
    let total: f64 = w.iter().sum();
    let mean = grid.iter().zip(&w).map(|(g, w)| g * w).sum::<f64>() / total;
    let var = grid.iter().zip(&w).map(|(g, w)| (g - mean).powi(2) * w).sum::<f64>() / total;
    (mean, var.sqrt(), w)
}

pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}
