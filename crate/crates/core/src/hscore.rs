//! Generalized Bayes with the Hyvärinen score for torus graphs.
//!
//! The score-matching loss of a periodic exponential family is quadratic in
//! the coefficients, `L(φ) = ½φᵀΓ̂φ − φᵀĤ`, so the tempered posterior
//! `π(φ) exp{−n w L(φ)}` is Gaussian given the prior scales.

use crate::error::{Error, Result};
use crate::linalg::{factor_with_jitter, sample_gaussian_precision};
use crate::rng::RandomStream;
use crate::shrinkage::{fixed_tau_value, prior_precision, update_global, update_group, update_local, HorseshoeState, PriorMode, ShrinkageLayout};
use crate::gibbs::{GibbsConfig, PosteriorDraws};
use crate::torus::model::{coefficient_count, edge_list, edge_offset};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

/// `Γ̂ = n⁻¹ Σ_i Σ_a ∂_a t(x_i) ∂_a t(x_i)ᵀ` and
/// `Ĥ = −n⁻¹ Σ_i Σ_a ∂²_a t(x_i)`; the loss minimizer is `Γ̂⁻¹Ĥ`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreMatchingMatrices {
    pub gamma: DMatrix<f64>,
    pub h: DVector<f64>,
    pub n: usize,
}

impl ScoreMatchingMatrices {
    /// Minimizer of the quadratic loss.
    pub fn minimizer(&self) -> Result<DVector<f64>> {
        Ok(factor_with_jitter(&self.gamma)?.0.solve(&self.h))
    }
}

/// Accumulates the score-matching matrices over rows of `d` angles.
pub fn score_matrices(data: &[Vec<f64>]) -> Result<ScoreMatchingMatrices> {
    let d = data.first().map(Vec::len).ok_or_else(|| Error::Precondition("no observations".into()))?;
    let p = coefficient_count(d);
    let edges = edge_list(d);
    // Edges touching each node, with whether the node is listed first.
    let mut incident: Vec<Vec<(usize, bool)>> = vec![Vec::new(); d];
    for (e, &(j, k)) in edges.iter().enumerate() {
        incident[j].push((e, true));
        incident[k].push((e, false));
    }
    let mut gamma = DMatrix::zeros(p, p);
    let mut h = DVector::zeros(p);
    let mut idx = Vec::with_capacity(4 * d);
    let mut val = Vec::with_capacity(4 * d);
    for x in data {
        if x.len() != d {
            return Err(Error::Precondition("rows have different numbers of angles".into()));
        }
        for (j, &xj) in x.iter().enumerate() {
            h[2 * j] += xj.cos();
            h[2 * j + 1] += xj.sin();
        }
        for (e, &(j, k)) in edges.iter().enumerate() {
            let (dm, sm) = (x[j] - x[k], x[j] + x[k]);
            let o = edge_offset(d, e);
            // Each endpoint's second derivative contributes −η.
            h[o] += 2.0 * dm.cos();
            h[o + 1] += 2.0 * dm.sin();
            h[o + 2] += 2.0 * sm.cos();
            h[o + 3] += 2.0 * sm.sin();
        }
        for a in 0..d {
            idx.clear();
            val.clear();
            idx.extend([2 * a, 2 * a + 1]);
            val.extend([-x[a].sin(), x[a].cos()]);
            for &(e, first) in &incident[a] {
                let (j, k) = edges[e];
                let (dm, sm) = (x[j] - x[k], x[j] + x[k]);
                let sign = if first { 1.0 } else { -1.0 };
                let o = edge_offset(d, e);
                idx.extend(o..o + 4);
                val.extend([-sign * dm.sin(), sign * dm.cos(), -sm.sin(), sm.cos()]);
            }
            for (r, &ir) in idx.iter().enumerate() {
                for (c, &ic) in idx.iter().enumerate() {
                    gamma[(ir, ic)] += val[r] * val[c];
                }
            }
        }
    }
    let n = data.len() as f64;
    gamma /= n;
    h /= n;
    Ok(ScoreMatchingMatrices { gamma, h, n: data.len() })
}

/// Settings of the generalized posterior.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HBayesConfig {
    /// Loss scale.
    pub w: f64,
    pub prior: PriorMode,
    pub slab_c: f64,
    pub gaussian_var: f64,
    pub tau_fixed: bool,
    pub gibbs: GibbsConfig,
}

impl Default for HBayesConfig {
    fn default() -> Self {
        Self {
            w: 1.0,
            prior: PriorMode::Grouped,
            slab_c: 1.0,
            gaussian_var: 10.0,
            tau_fixed: false,
            gibbs: GibbsConfig { iterations: 3000, burn_in: 1000, ..GibbsConfig::default() },
        }
    }
}

/// Mean and covariance of `φ` given a diagonal prior precision:
/// `B̃⁻¹ = P0 + n w Γ̂`, `b̃ = B̃ (n w Ĥ)`.
pub fn hbayes_conditional(
    prior_precision: &DVector<f64>,
    mats: &ScoreMatchingMatrices,
    w: f64,
) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let (q, shift) = conditional_terms(prior_precision, mats, w);
    let factor = factor_with_jitter(&q)?.0;
    Ok((factor.solve(&shift), factor.inverse()))
}

fn conditional_terms(prior_precision: &DVector<f64>, mats: &ScoreMatchingMatrices, w: f64) -> (DMatrix<f64>, DVector<f64>) {
    let scale = mats.n as f64 * w;
    let mut q = &mats.gamma * scale;
    for (i, v) in prior_precision.iter().enumerate() {
        q[(i, i)] += v;
    }
    (q, &mats.h * scale)
}

/// Posterior draws of the `2d²` coefficients.
#[derive(Debug, Clone)]
pub struct HBayesFit {
    pub nodes: usize,
    pub draws: PosteriorDraws,
    pub tau2_trace: Vec<f64>,
}

/// Gibbs sampler for the generalized posterior: Gaussian step for `φ`, then
/// the shrinkage hyperparameters.
pub fn run_hbayes(data: &[Vec<f64>], cfg: &HBayesConfig) -> Result<HBayesFit> {
    if !(cfg.w > 0.0 && cfg.w.is_finite()) {
        return Err(Error::InvalidParameter(format!("loss scale w must be positive, got {}", cfg.w)));
    }
    let kept = cfg.gibbs.validate()?;
    let mats = score_matrices(data)?;
    let d = data[0].len();
    let p = coefficient_count(d);
    let mut rng = RandomStream::new(cfg.gibbs.seed).substream(0);
    let names: Vec<String> = (1..=p).map(|k| format!("theta_{k}")).collect();
    let mut draws = DMatrix::zeros(kept, p);
    let mut tau2_trace = Vec::new();
    let mut jitter_events = 0;

    let mut shrink = if cfg.prior == PriorMode::Gaussian {
        None
    } else {
        let grouped = matches!(cfg.prior, PriorMode::Grouped | PriorMode::RegularizedGrouped);
        let layout = ShrinkageLayout::torus_coefficients(d, grouped);
        let slab = (cfg.prior == PriorMode::RegularizedGrouped).then_some(cfg.slab_c);
        let mut state = HorseshoeState::new(&layout, slab)?;
        if cfg.tau_fixed {
            state = state.with_fixed_tau(fixed_tau_value(d, data.len(), data.len())?)?;
        }
        Some((layout, state))
    };
    let mut row = 0;
    for it in 0..cfg.gibbs.iterations {
        let precision = match &shrink {
            Some((layout, state)) => prior_precision(state, layout),
            None => DVector::from_element(p, 1.0 / cfg.gaussian_var),
        };
        let (q, shift) = conditional_terms(&precision, &mats, cfg.w);
        let (phi, _, jittered) = sample_gaussian_precision(&q, &shift, &mut rng)?;
        jitter_events += usize::from(jittered);
        if let Some((layout, state)) = &mut shrink {
            update_local(state, layout, phi.as_slice(), &mut rng)?;
            update_group(state, layout, phi.as_slice(), &mut rng)?;
            update_global(state, layout, phi.as_slice(), &mut rng)?;
        }
        if it >= cfg.gibbs.burn_in && (it - cfg.gibbs.burn_in + 1) % cfg.gibbs.thin == 0 {
            draws.row_mut(row).copy_from(&phi.transpose());
            if let Some((_, state)) = &shrink {
                tau2_trace.push(state.tau2);
            }
            row += 1;
        }
    }
    let draws = PosteriorDraws {
        names,
        draws,
        log_likelihood: Vec::new(),
        noise_ess: Vec::new(),
        prior_trace: tau2_trace.iter().map(|t| vec![*t]).collect(),
        noise_refreshes: 0,
        jitter_events,
        ess_warnings: 0,
    };
    Ok(HBayesFit { nodes: d, draws, tau2_trace })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::torus::generate::generate_vm_chain;
    use crate::torus::model::torus_suff_stat;
    use crate::torus::vonmises::sample_von_mises;

    #[test]
    fn single_point_at_zero() {
        let m = score_matrices(&[vec![0.0]]).unwrap();
        assert_eq!(m.gamma, DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 0.0, 1.0]));
        assert_eq!(m.h, DVector::from_vec(vec![1.0, 0.0]));
    }

    /// Finite-difference oracle for the first and second derivatives of t.
    #[test]
    fn matrices_match_finite_differences() {
        let data = vec![vec![0.3, 2.1, 4.7], vec![5.9, 1.2, 0.8]];
        let m = score_matrices(&data).unwrap();
        let p = 18;
        let eps = 1e-4;
        let mut gamma = DMatrix::zeros(p, p);
        let mut h = DVector::zeros(p);
        for x in &data {
            for a in 0..3 {
                let shifted = |delta: f64| {
                    let mut y = x.clone();
                    y[a] += delta;
                    DVector::from_vec(torus_suff_stat(&y)[..p].to_vec())
                };
                let (up, mid, dn) = (shifted(eps), shifted(0.0), shifted(-eps));
                let first = (&up - &dn) / (2.0 * eps);
                gamma += &first * first.transpose();
                h -= (&up - &mid * 2.0 + &dn) / (eps * eps);
            }
        }
        gamma /= 2.0;
        h /= 2.0;
        assert!((gamma - &m.gamma).amax() < 1e-7);
        assert!((h - &m.h).amax() < 1e-5);
    }

    #[test]
    fn gamma_is_symmetric_psd() {
        let mut rng = RandomStream::new(3);
        let data = generate_vm_chain(4, 50, 0.5, 1.0, &mut rng).unwrap();
        let m = score_matrices(&data).unwrap();
        assert!((&m.gamma - m.gamma.transpose()).amax() < 1e-12);
        let eig = m.gamma.clone().symmetric_eigen();
        assert!(eig.eigenvalues.iter().all(|&e| e >= -1e-10));
    }

    #[test]
    fn minimizer_recovers_von_mises_parameters() {
        let mut rng = RandomStream::new(4);
        let data: Vec<Vec<f64>> = (0..10_000).map(|_| vec![sample_von_mises(0.0, 2.0, &mut rng)]).collect();
        let phi = score_matrices(&data).unwrap().minimizer().unwrap();
        assert!((phi[0] - 2.0).abs() < 0.05 && phi[1].abs() < 0.05, "{phi}");
    }

    #[test]
    fn vanishing_loss_scale_returns_the_prior() {
        let mut rng = RandomStream::new(5);
        let data = generate_vm_chain(3, 40, 0.5, 1.0, &mut rng).unwrap();
        let m = score_matrices(&data).unwrap();
        let prior = DVector::from_element(18, 0.1);
        let (mean, cov) = hbayes_conditional(&prior, &m, 1e-12).unwrap();
        assert!(mean.amax() < 1e-4);
        for i in 0..18 {
            for j in 0..18 {
                let expect = if i == j { 10.0 } else { 0.0 };
                assert!((cov[(i, j)] - expect).abs() < 1e-4 * 10.0);
            }
        }
    }

    #[test]
    fn conditional_matches_dense_oracle() {
        let mut rng = RandomStream::new(6);
        let data = generate_vm_chain(2, 30, 0.5, 1.0, &mut rng).unwrap();
        let m = score_matrices(&data).unwrap();
        let prior = DVector::from_vec(vec![0.5, 1.0, 2.0, 0.1, 0.3, 0.7, 1.1, 0.9]);
        let (mean, cov) = hbayes_conditional(&prior, &m, 0.7).unwrap();
        let q = DMatrix::from_diagonal(&prior) + &m.gamma * (30.0 * 0.7);
        let inv = q.clone().try_inverse().unwrap();
        let oracle_mean = &inv * (&m.h * (30.0 * 0.7));
        assert!((cov - &inv).amax() < 1e-10);
        assert!((mean - oracle_mean).amax() < 1e-10);
    }

    #[test]
    fn gaussian_prior_chain_is_independent_and_concentrates_in_w() {
        let mut rng = RandomStream::new(7);
        let data = generate_vm_chain(3, 100, 0.5, 1.0, &mut rng).unwrap();
        let mut traces = Vec::new();
        for w in [0.2, 1.0, 5.0] {
            let cfg = HBayesConfig { w, prior: PriorMode::Gaussian, gibbs: GibbsConfig::new(4000, 0, 8), ..HBayesConfig::default() };
            let fit = run_hbayes(&data, &cfg).unwrap();
            assert_eq!(fit.draws.dim(), 18);
            let col = fit.draws.column(6);
            assert!(crate::stats::autocorrelation(&col, 1).abs() < 0.05);
            let m = score_matrices(&data).unwrap();
            let (_, cov) = hbayes_conditional(&DVector::from_element(18, 0.1), &m, w).unwrap();
            traces.push(cov.trace());
        }
        assert!(traces[0] > traces[1] && traces[1] > traces[2]);
        let bad = HBayesConfig { w: 0.0, ..HBayesConfig::default() };
        assert!(run_hbayes(&data, &bad).is_err());
    }
}
