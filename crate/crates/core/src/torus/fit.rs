//! NC-Bayes fitting of torus graphs.

use super::model::{coefficient_count, TorusGraph};
use crate::error::{Error, Result};
use crate::expfam::{Domain, NoiseDistribution, NoiseMode, UniformNoise};
use crate::gibbs::{run_with_prior, ConditionalPrior, GaussianPrior, GibbsConfig, NoisePlan, PosteriorDraws};
use crate::rng::{derive_seed, RandomStream};
use crate::shrinkage::{fixed_tau_value, HorseshoeState, PriorMode, ShrinkageLayout, ShrinkagePrior};
use nalgebra::DVector;
use serde::{Deserialize, Serialize};

/// Prior and noise settings for a torus-graph fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TorusFitConfig {
    pub prior: PriorMode,
    /// Noise count; `None` means `m = n`.
    pub noise_count: Option<usize>,
    /// Fix the global scale from the expected share of signals.
    pub tau_fixed: bool,
    pub slab_c: f64,
    /// Coefficient variance under the Gaussian prior.
    pub gaussian_var: f64,
    /// Variance of the log-normalizer prior.
    pub beta_var: f64,
    pub gibbs: GibbsConfig,
}

impl Default for TorusFitConfig {
    fn default() -> Self {
        Self {
            prior: PriorMode::RegularizedGrouped,
            noise_count: None,
            tau_fixed: false,
            slab_c: 1.0,
            gaussian_var: 10.0,
            beta_var: 1e3,
            gibbs: GibbsConfig { iterations: 3000, burn_in: 1000, noise_mode: NoiseMode::Generator, ..GibbsConfig::default() },
        }
    }
}

/// Posterior draws with the global-scale trajectory (shrinkage modes).
#[derive(Debug, Clone)]
pub struct TorusFit {
    pub nodes: usize,
    pub draws: PosteriorDraws,
    pub tau2_trace: Vec<f64>,
}

impl TorusFit {
    /// Posterior mean of the log-normalizer.
    pub fn beta_mean(&self) -> f64 {
        self.draws.mean()[coefficient_count(self.nodes)]
    }
}

fn build_prior(d: usize, n: usize, m: usize, cfg: &TorusFitConfig) -> Result<Box<dyn ConditionalPrior>> {
    let p = coefficient_count(d);
    if cfg.prior == PriorMode::Gaussian {
        let mut vars = vec![cfg.gaussian_var; p];
        vars.push(cfg.beta_var);
        return Ok(Box::new(GaussianPrior::diagonal(DVector::zeros(p + 1), &vars)?));
    }
    let grouped = matches!(cfg.prior, PriorMode::Grouped | PriorMode::RegularizedGrouped);
    let layout = ShrinkageLayout::torus(d, grouped, cfg.beta_var);
    let slab = (cfg.prior == PriorMode::RegularizedGrouped).then_some(cfg.slab_c);
    let mut state = HorseshoeState::new(&layout, slab)?;
    if cfg.tau_fixed {
        state = state.with_fixed_tau(fixed_tau_value(d, n, m)?)?;
    }
    Ok(Box::new(ShrinkagePrior::new(layout, state)))
}

/// Fits a torus graph to `data` (rows of `d` angles in `[0, 2π)`) against
/// uniform noise on the torus.
pub fn fit_torus_ncbayes(data: &[Vec<f64>], cfg: &TorusFitConfig) -> Result<TorusFit> {
    let d = data.first().map(Vec::len).ok_or_else(|| Error::Precondition("no observations".into()))?;
    if data.iter().any(|x| x.len() != d) {
        return Err(Error::Precondition("all observations must have the same number of angles".into()));
    }
    let model = TorusGraph::new(d)?;
    let n = data.len();
    let m = cfg.noise_count.unwrap_or(n);
    let uniform = UniformNoise::new(Domain::torus(d));
    let mut prior = build_prior(d, n, m, cfg)?;
    let fixed_noise;
    let plan = match cfg.gibbs.noise_mode {
        NoiseMode::FixedSet => {
            let mut rng = RandomStream::new(derive_seed(cfg.gibbs.seed, 0xF1));
            fixed_noise = uniform.sample(m, &mut rng);
            NoisePlan::Fixed { noise: &fixed_noise, density: &uniform }
        }
        NoiseMode::Generator => NoisePlan::Refresh { generator: &uniform, m },
        NoiseMode::Adaptive => NoisePlan::Adaptive { base: &uniform, m },
    };
    let draws = run_with_prior(&model, data, plan, prior.as_mut(), &cfg.gibbs)?;
    let tau2_trace = draws.prior_trace.iter().filter_map(|t| t.first().copied()).collect();
    Ok(TorusFit { nodes: d, draws, tau2_trace })
}
