//! Joint Gibbs check of the inverse-gamma horseshoe updates on a single
//! coefficient with a Gaussian likelihood.

use ncbayes::shrinkage::{update_global, update_local, HorseshoeState, ShrinkageLayout};
use ncbayes::stats::ks_against_grid;
use ncbayes::RandomStream;
use rand::Rng;
use rand_distr::StandardNormal;
use std::f64::consts::PI;

/// Density of the product of two independent half-Cauchy(0, 1) scales.
fn product_scale_density(r: f64) -> f64 {
    if (r - 1.0).abs() < 1e-6 {
        2.0 / (PI * PI)
    } else {
        4.0 / (PI * PI) * r.ln() / (r * r - 1.0)
    }
}

/// Marginal horseshoe prior density by quadrature over the log scale.
fn horseshoe_density(phi: f64) -> f64 {
    let (lo, hi, k) = (-25.0, 25.0, 20_000);
    let h = (hi - lo) / k as f64;
    (0..k)
        .map(|i| {
            let u = lo + (i as f64 + 0.5) * h;
            let r = u.exp();
            let normal = (-0.5 * phi * phi / (r * r)).exp() / (r * (2.0 * PI).sqrt());
            normal * product_scale_density(r) * r * h
        })
        .sum()
}

#[test]
fn single_coefficient_marginal_matches_quadrature() {
    let (y, s2) = (1.5, 0.25);
    let layout = ShrinkageLayout { dim: 1, local: vec![0], groups: vec![], fixed: vec![] };
    let mut state = HorseshoeState::new(&layout, None).unwrap();
    let mut rng = RandomStream::new(2024);
    let (burn, thin, keep) = (5_000, 10, 20_000);
    let mut draws = Vec::with_capacity(keep);
    for it in 0..burn + thin * keep {
        let prec = 1.0 / s2 + 1.0 / (state.lambda2[0] * state.tau2);
        let z: f64 = rng.sample(StandardNormal);
        let phi = (y / s2) / prec + z / prec.sqrt();
        update_local(&mut state, &layout, &[phi], &mut rng).unwrap();
        update_global(&mut state, &layout, &[phi], &mut rng).unwrap();
        if it >= burn && (it - burn) % thin == 0 {
            draws.push(phi);
        }
    }

    let k = 7_000;
    let grid: Vec<f64> = (0..k).map(|i| -2.0 + 6.0 * (i as f64 + 0.5) / k as f64).collect();
    let masses: Vec<f64> = grid
        .iter()
        .map(|&p| (-0.5 * (y - p) * (y - p) / s2).exp() * horseshoe_density(p))
        .collect();
    let d = ks_against_grid(&mut draws, &grid, &masses);
    assert!(d < 0.05, "KS distance {d}");
}
