//! Pólya–Gamma augmented Gibbs samplers for the classification posterior.
//!
//! Each sweep draws `ω_i ~ PG(1, ψ_i)` for every labeled point and then `γ`
//! from its Gaussian full conditional with precision
//! `B0⁻¹ + Σ ω_i z_i z_iᵀ` and shift `Σ (s_i − ½ − ω_i C_i) z_i + B0⁻¹A0`.
//! The noise set may be kept fixed, redrawn every sweep, or adapted by
//! tempered resampling.

use crate::dist::{sample_inverse_gamma, sample_wishart_from_inverse_scale};
use crate::error::{Error, Result};
use crate::expfam::{build_labeled, log_likelihood_at, ExpFamModel, GammaVector, LabeledSample, LabeledSet, NoiseDistribution, NoiseMode};
use crate::linalg::{factor_with_jitter, sample_gaussian_precision, spd_inverse, SpdFactor};
use crate::noise::{batch_mean, tempered_resample, AdaptiveSettings, TemperedDensity, TemperedNoiseState};
use crate::pg::sample_pg1_raw;
use crate::rng::RandomStream;
use nalgebra::{DMatrix, DVector};
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::io::Write;
use std::path::Path;

/// Prior precision `B0⁻¹` and shift `B0⁻¹A0` in the form the sampler adds
/// them to the data terms.
#[derive(Debug, Clone, PartialEq)]
pub enum PriorPrecision {
    Dense { precision: DMatrix<f64>, shift: DVector<f64> },
    Diagonal { precision: DVector<f64>, shift: DVector<f64> },
}

impl PriorPrecision {
    pub fn dim(&self) -> usize {
        match self {
            PriorPrecision::Dense { shift, .. } | PriorPrecision::Diagonal { shift, .. } => shift.len(),
        }
    }

    pub fn shift(&self) -> &DVector<f64> {
        match self {
            PriorPrecision::Dense { shift, .. } | PriorPrecision::Diagonal { shift, .. } => shift,
        }
    }

    fn add_precision(&self, q: &mut DMatrix<f64>) {
        match self {
            PriorPrecision::Dense { precision, .. } => *q += precision,
            PriorPrecision::Diagonal { precision, .. } => {
                for (i, v) in precision.iter().enumerate() {
                    q[(i, i)] += v;
                }
            }
        }
    }
}

/// `γ ~ N(A0, B0)`.
#[derive(Debug, Clone)]
pub struct GaussianPrior {
    mean: DVector<f64>,
    covariance: DMatrix<f64>,
    precision: PriorPrecision,
}

impl GaussianPrior {
    pub fn new(mean: DVector<f64>, covariance: DMatrix<f64>) -> Result<Self> {
        if covariance.nrows() != mean.len() || covariance.ncols() != mean.len() {
            return Err(Error::InvalidParameter("prior mean and covariance dimensions differ".into()));
        }
        let factor = SpdFactor::new(&covariance)
            .ok_or_else(|| Error::InvalidParameter("prior covariance is not positive definite".into()))?;
        let precision = factor.inverse();
        let shift = &precision * &mean;
        Ok(Self { mean, covariance, precision: PriorPrecision::Dense { precision, shift } })
    }

    /// Independent coordinates with the given means and variances.
    pub fn diagonal(mean: DVector<f64>, variances: &[f64]) -> Result<Self> {
        if variances.len() != mean.len() || variances.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(Error::InvalidParameter("diagonal prior needs one positive variance per coordinate".into()));
        }
        let precision = DVector::from_iterator(mean.len(), variances.iter().map(|v| 1.0 / v));
        let shift = precision.component_mul(&mean);
        let covariance = DMatrix::from_diagonal(&DVector::from_column_slice(variances));
        Ok(Self { mean, covariance, precision: PriorPrecision::Diagonal { precision, shift } })
    }

    pub fn isotropic(dim: usize, variance: f64) -> Result<Self> {
        Self::diagonal(DVector::zeros(dim), &vec![variance; dim])
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.covariance
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }
}

/// A prior on `γ` that may carry its own latent state, updated once per
/// sweep after `γ`.
pub trait ConditionalPrior {
    fn dim(&self) -> usize;

    fn precision(&self) -> &PriorPrecision;

    /// Starting value of the chain.
    fn initial_value(&self) -> DVector<f64>;

    fn update(&mut self, _gamma: &DVector<f64>, _rng: &mut RandomStream) -> Result<()> {
        Ok(())
    }

    /// Hyperparameter snapshot stored with each kept draw.
    fn trace(&self) -> Vec<f64> {
        Vec::new()
    }
}

impl ConditionalPrior for GaussianPrior {
    fn dim(&self) -> usize {
        self.mean.len()
    }

    fn precision(&self) -> &PriorPrecision {
        &self.precision
    }

    fn initial_value(&self) -> DVector<f64> {
        self.mean.clone()
    }
}

/// Run length, thinning, seed, and noise handling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GibbsConfig {
    pub iterations: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub seed: u64,
    pub noise_mode: NoiseMode,
    #[serde(default)]
    pub adaptive: AdaptiveSettings,
}

impl Default for GibbsConfig {
    fn default() -> Self {
        Self { iterations: 5000, burn_in: 2000, thin: 1, seed: 0, noise_mode: NoiseMode::FixedSet, adaptive: AdaptiveSettings::default() }
    }
}

impl GibbsConfig {
    pub fn new(iterations: usize, burn_in: usize, seed: u64) -> Self {
        Self { iterations, burn_in, seed, ..Self::default() }
    }

    pub fn with_mode(mut self, mode: NoiseMode) -> Self {
        self.noise_mode = mode;
        self
    }

    /// Checks the configuration and returns the number of kept draws.
    pub fn validate(&self) -> Result<usize> {
        if self.iterations == 0 || self.thin == 0 {
            return Err(Error::InvalidParameter("iterations and thin must be positive".into()));
        }
        if self.burn_in >= self.iterations {
            return Err(Error::InvalidParameter(format!(
                "burn-in {} must be below the iteration count {}",
                self.burn_in, self.iterations
            )));
        }
        let kept = (self.iterations - self.burn_in) / self.thin;
        if kept == 0 {
            return Err(Error::InvalidParameter("configuration keeps no draws".into()));
        }
        if self.noise_mode == NoiseMode::Adaptive {
            self.adaptive.validate()?;
        }
        Ok(kept)
    }

    pub(crate) fn keeps(&self, it: usize) -> bool {
        it >= self.burn_in && (it - self.burn_in + 1) % self.thin == 0
    }
}

/// Kept draws of `γ` with per-draw diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorDraws {
    pub names: Vec<String>,
    /// One row per kept iteration.
    pub draws: DMatrix<f64>,
    /// Log classification likelihood at each kept draw.
    pub log_likelihood: Vec<f64>,
    /// ESS of the last resampling at each kept draw (adaptive noise only).
    pub noise_ess: Vec<f64>,
    /// Prior hyperparameter snapshots, when the prior has any.
    pub prior_trace: Vec<Vec<f64>>,
    pub noise_refreshes: usize,
    pub jitter_events: usize,
    pub ess_warnings: usize,
}

impl PosteriorDraws {
    fn empty(names: Vec<String>, kept: usize) -> Self {
        let dim = names.len();
        Self {
            names,
            draws: DMatrix::zeros(kept, dim),
            log_likelihood: Vec::with_capacity(kept),
            noise_ess: Vec::new(),
            prior_trace: Vec::new(),
            noise_refreshes: 0,
            jitter_events: 0,
            ess_warnings: 0,
        }
    }

    pub fn kept(&self) -> usize {
        self.draws.nrows()
    }

    pub fn dim(&self) -> usize {
        self.draws.ncols()
    }

    pub fn column(&self, k: usize) -> Vec<f64> {
        self.draws.column(k).iter().copied().collect()
    }

    pub fn mean(&self) -> DVector<f64> {
        DVector::from_iterator(self.dim(), self.draws.column_iter().map(|c| c.mean()))
    }

    pub fn gamma(&self, row: usize) -> GammaVector {
        let v: Vec<f64> = self.draws.row(row).iter().copied().collect();
        GammaVector::from_slice(&v).expect("stored draws are finite")
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(&self.names)?;
        for row in self.draws.row_iter() {
            w.write_record(row.iter().map(|v| format!("{v:.17e}")))?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)
    }
}

/// `(A1, B1)` of the Gaussian full conditional of `γ` given `ω`.
pub fn gaussian_conditional(
    prior: &GaussianPrior,
    samples: &[LabeledSample],
    omegas: &[f64],
) -> Result<(DVector<f64>, DMatrix<f64>)> {
    if samples.len() != omegas.len() {
        return Err(Error::Precondition("one PG variable is needed per labeled sample".into()));
    }
    if omegas.iter().any(|w| !(*w >= 0.0 && w.is_finite())) {
        return Err(Error::InvalidParameter("PG variables must be finite and nonnegative".into()));
    }
    let dim = prior.dim();
    let mut q = DMatrix::zeros(dim, dim);
    prior.precision.add_precision(&mut q);
    let mut b = prior.precision.shift().clone();
    for (s, &w) in samples.iter().zip(omegas) {
        if s.z.len() != dim {
            return Err(Error::Precondition("design row length does not match the prior".into()));
        }
        let z = DVector::from_column_slice(&s.z);
        q.ger(w, &z, &z, 1.0);
        let label = if s.s { 0.5 } else { -0.5 };
        b.axpy(label - w * s.c, &z, 1.0);
    }
    let (factor, _) = factor_with_jitter(&q)?;
    let cov = factor.inverse();
    let mean = &cov * b;
    Ok((mean, cov))
}

/// Scratch buffers for one `ω`/`γ` sweep over a labeled set.
struct SweepWorkspace {
    omega: Vec<f64>,
    weighted: DMatrix<f64>,
    precision: DMatrix<f64>,
    resid: DVector<f64>,
}

impl SweepWorkspace {
    fn new(dim: usize, len: usize) -> Self {
        Self {
            omega: vec![0.0; len],
            weighted: DMatrix::zeros(dim, len),
            precision: DMatrix::zeros(dim, dim),
            resid: DVector::zeros(len),
        }
    }

    /// One PG step followed by one Gaussian step. Returns whether jitter
    /// was needed.
    fn sweep(
        &mut self,
        set: &LabeledSet,
        prior: &PriorPrecision,
        gamma: &mut DVector<f64>,
        rng: &mut RandomStream,
    ) -> Result<bool> {
        let psi = set.linear_predictor(gamma);
        for (w, &p) in self.omega.iter_mut().zip(psi.iter()) {
            *w = sample_pg1_raw(p, rng)?;
        }
        self.weighted.copy_from(set.design());
        for (i, &w) in self.omega.iter().enumerate() {
            self.weighted.column_mut(i).scale_mut(w.sqrt());
            let label = if set.label(i) { 0.5 } else { -0.5 };
            self.resid[i] = label - w * set.offsets()[i];
        }
        self.precision.fill(0.0);
        prior.add_precision(&mut self.precision);
        self.precision.gemm(1.0, &self.weighted, &self.weighted.transpose(), 1.0);
        let mut shift = prior.shift().clone();
        shift.gemv(1.0, set.design(), &self.resid, 1.0);
        let (draw, _, jittered) = sample_gaussian_precision(&self.precision, &shift, rng)?;
        if draw.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical("non-finite draw of gamma".into()));
        }
        *gamma = draw;
        Ok(jittered)
    }
}

/// Where the noise comes from during a run.
pub enum NoisePlan<'a> {
    /// A single noise set kept throughout.
    Fixed { noise: &'a [Vec<f64>], density: &'a dyn NoiseDistribution },
    /// A fresh set of `m` points from `generator` at every sweep.
    Refresh { generator: &'a dyn NoiseDistribution, m: usize },
    /// Tempered resampling from `base`, refreshed on the configured cadence.
    Adaptive { base: &'a dyn NoiseDistribution, m: usize },
}

impl NoisePlan<'_> {
    fn mode(&self) -> NoiseMode {
        match self {
            NoisePlan::Fixed { .. } => NoiseMode::FixedSet,
            NoisePlan::Refresh { .. } => NoiseMode::Generator,
            NoisePlan::Adaptive { .. } => NoiseMode::Adaptive,
        }
    }
}

/// Runs the sampler with an arbitrary conditional prior.
pub fn run_with_prior(
    model: &dyn ExpFamModel,
    data: &[Vec<f64>],
    plan: NoisePlan<'_>,
    prior: &mut dyn ConditionalPrior,
    cfg: &GibbsConfig,
) -> Result<PosteriorDraws> {
    let kept = cfg.validate()?;
    if plan.mode() != cfg.noise_mode {
        return Err(Error::Precondition(format!(
            "noise plan {:?} does not match configured mode {:?}",
            plan.mode(),
            cfg.noise_mode
        )));
    }
    if prior.dim() != model.dim() + 1 {
        return Err(Error::Precondition("prior dimension must equal the parameter count plus one".into()));
    }
    let master = RandomStream::new(cfg.seed);
    let mut rng = master.substream(0);
    let mut noise_rng = master.substream(1);

    let mut set = match &plan {
        NoisePlan::Fixed { noise, density } => build_labeled(data, noise, model, *density)?,
        NoisePlan::Refresh { generator, m } | NoisePlan::Adaptive { base: generator, m } => {
            if *m == 0 {
                return Err(Error::Precondition("noise count m must be at least one".into()));
            }
            build_labeled(data, &generator.sample(*m, &mut noise_rng), model, *generator)?
        }
    };

    let mut out = PosteriorDraws::empty(model.parameter_names(), kept);
    let mut work = SweepWorkspace::new(model.dim() + 1, set.len());
    let mut gamma = prior.initial_value();
    let mut tempered: Option<(TemperedNoiseState, TemperedDensity<'_>)> = None;
    let mut batch: Vec<DVector<f64>> = Vec::new();
    let mut row = 0;
    if plan.mode() != NoiseMode::FixedSet {
        out.noise_refreshes = 1;
    }

    for it in 0..cfg.iterations {
        match &plan {
            NoisePlan::Fixed { .. } => {}
            NoisePlan::Refresh { generator, m } => {
                if it > 0 {
                    set.replace_noise(model, generator.sample(*m, &mut noise_rng), *generator)?;
                    out.noise_refreshes += 1;
                }
            }
            NoisePlan::Adaptive { base, m } => {
                let s = &cfg.adaptive;
                let active = !s.burn_in_only || it <= cfg.burn_in;
                if it > 0 && it % s.cadence == 0 && active && !batch.is_empty() {
                    let tilde = batch_mean(&batch)?;
                    batch.clear();
                    let mut state = match tempered.take() {
                        Some((mut st, _)) => {
                            st.gamma_tilde = tilde;
                            st
                        }
                        None => {
                            let mut st = TemperedNoiseState::new(tilde, s.alpha, s.proposal_factor * m)?;
                            st.scheme = s.scheme;
                            st
                        }
                    };
                    let (noise, density) = tempered_resample(&mut state, *m, model, *base, &mut noise_rng)?;
                    set.replace_noise(model, noise, &density)?;
                    out.noise_refreshes += 1;
                    if state.last_ess < state.proposals as f64 / 10.0 {
                        out.ess_warnings += 1;
                    }
                    tempered = Some((state, density));
                }
            }
        }

        if work.sweep(&set, prior.precision(), &mut gamma, &mut rng)? {
            out.jitter_events += 1;
        }
        prior.update(&gamma, &mut rng)?;
        if matches!(plan, NoisePlan::Adaptive { .. }) {
            batch.push(gamma.clone());
        }

        if cfg.keeps(it) {
            out.draws.row_mut(row).copy_from(&gamma.transpose());
            out.log_likelihood.push(log_likelihood_at(&gamma, &set));
            if let NoisePlan::Adaptive { m, .. } = &plan {
                let ess = tempered.as_ref().map_or((cfg.adaptive.proposal_factor * m) as f64, |(s, _)| s.last_ess);
                out.noise_ess.push(ess);
            }
            let trace = prior.trace();
            if !trace.is_empty() {
                out.prior_trace.push(trace);
            }
            row += 1;
        }
    }
    Ok(out)
}

/// Sampler with one noise set held fixed for the whole run.
pub fn run_fixed_noise(
    model: &dyn ExpFamModel,
    data: &[Vec<f64>],
    noise: &[Vec<f64>],
    density: &dyn NoiseDistribution,
    prior: &GaussianPrior,
    cfg: &GibbsConfig,
) -> Result<PosteriorDraws> {
    let cfg = cfg.clone().with_mode(NoiseMode::FixedSet);
    run_with_prior(model, data, NoisePlan::Fixed { noise, density }, &mut prior.clone(), &cfg)
}

/// Sampler drawing a fresh noise set from `generator` at every sweep.
pub fn run_refreshed_noise(
    model: &dyn ExpFamModel,
    data: &[Vec<f64>],
    generator: &dyn NoiseDistribution,
    m: usize,
    prior: &GaussianPrior,
    cfg: &GibbsConfig,
) -> Result<PosteriorDraws> {
    let cfg = cfg.clone().with_mode(NoiseMode::Generator);
    run_with_prior(model, data, NoisePlan::Refresh { generator, m }, &mut prior.clone(), &cfg)
}

/// Sampler with tempered adaptive noise drawn from `base`.
pub fn run_adaptive(
    model: &dyn ExpFamModel,
    data: &[Vec<f64>],
    base: &dyn NoiseDistribution,
    m: usize,
    prior: &GaussianPrior,
    cfg: &GibbsConfig,
) -> Result<PosteriorDraws> {
    let cfg = cfg.clone().with_mode(NoiseMode::Adaptive);
    run_with_prior(model, data, NoisePlan::Adaptive { base, m }, &mut prior.clone(), &cfg)
}

/// Conjugate hyperpriors of the hierarchical model.
#[derive(Debug, Clone, PartialEq)]
pub struct HyperPriors {
    /// `μ ~ N(mu_mean, mu_var · I)`.
    pub mu_mean: DVector<f64>,
    pub mu_var: f64,
    /// `Σ ~ IW(sigma_df, sigma_scale)`.
    pub sigma_df: f64,
    pub sigma_scale: DMatrix<f64>,
    /// `μ_β ~ N(mu_beta_mean, mu_beta_var)`.
    pub mu_beta_mean: f64,
    pub mu_beta_var: f64,
    /// `σ_β² ~ IG(shape, scale)`.
    pub sigma_beta_shape: f64,
    pub sigma_beta_scale: f64,
}

impl HyperPriors {
    /// Weakly informative defaults for `p` natural parameters.
    pub fn weak(p: usize) -> Self {
        Self {
            mu_mean: DVector::zeros(p),
            mu_var: 100.0,
            sigma_df: p as f64 + 2.0,
            sigma_scale: DMatrix::identity(p, p),
            mu_beta_mean: 0.0,
            mu_beta_var: 100.0,
            sigma_beta_shape: 1.0,
            sigma_beta_scale: 1.0,
        }
    }
}

/// Population law of the group parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct HierarchicalState {
    pub mu: DVector<f64>,
    pub sigma: DMatrix<f64>,
    pub mu_beta: f64,
    pub sigma_beta2: f64,
}

impl HierarchicalState {
    pub fn neutral(p: usize) -> Self {
        Self { mu: DVector::zeros(p), sigma: DMatrix::identity(p, p), mu_beta: 0.0, sigma_beta2: 1.0 }
    }

    fn group_prior(&self) -> Result<PriorPrecision> {
        if !(self.sigma_beta2 > 0.0) {
            return Err(Error::Numerical("population variance of beta is not positive".into()));
        }
        let p = self.mu.len();
        let sigma_inv = spd_inverse(&self.sigma)?;
        let mut precision = DMatrix::zeros(p + 1, p + 1);
        precision.view_mut((0, 0), (p, p)).copy_from(&sigma_inv);
        precision[(p, p)] = 1.0 / self.sigma_beta2;
        let mut shift = DVector::zeros(p + 1);
        shift.rows_mut(0, p).copy_from(&(&sigma_inv * &self.mu));
        shift[p] = self.mu_beta / self.sigma_beta2;
        Ok(PriorPrecision::Dense { precision, shift })
    }
}

/// Data of one group: genuine points and a fixed noise set.
pub struct GroupInput<'a> {
    pub data: &'a [Vec<f64>],
    pub noise: &'a [Vec<f64>],
    pub density: &'a dyn NoiseDistribution,
}

/// Group draws plus the population hyperparameter draws.
#[derive(Debug, Clone)]
pub struct HierarchicalDraws {
    pub groups: Vec<PosteriorDraws>,
    /// Rows are kept draws of `μ`.
    pub mu: DMatrix<f64>,
    /// Kept draws of `Σ`.
    pub sigma: Vec<DMatrix<f64>>,
    pub mu_beta: Vec<f64>,
    pub sigma_beta2: Vec<f64>,
}

/// Hierarchical sampler: per-group PG and Gaussian steps, then conjugate
/// updates of the population law. With `freeze` set the population law
/// stays at `init`.
pub fn run_hierarchical(
    model: &dyn ExpFamModel,
    groups: &[GroupInput<'_>],
    hyper: &HyperPriors,
    init: Option<HierarchicalState>,
    freeze: bool,
    cfg: &GibbsConfig,
) -> Result<HierarchicalDraws> {
    let kept = cfg.validate()?;
    if groups.is_empty() {
        return Err(Error::Precondition("at least one group is required".into()));
    }
    if cfg.noise_mode != NoiseMode::FixedSet {
        return Err(Error::Precondition("the hierarchical sampler uses fixed noise sets".into()));
    }
    let p = model.dim();
    if hyper.mu_mean.len() != p || hyper.sigma_scale.nrows() != p {
        return Err(Error::InvalidParameter("hyperprior dimensions do not match the model".into()));
    }
    let j_count = groups.len();
    let master = RandomStream::new(cfg.seed);
    let mut group_rngs: Vec<RandomStream> = (0..j_count).map(|j| master.substream(2 * j as u64)).collect();
    let mut hyper_rng = master.substream(2 * j_count as u64);

    let sets: Vec<LabeledSet> =
        groups.iter().map(|g| build_labeled(g.data, g.noise, model, g.density)).collect::<Result<_>>()?;
    let mut work: Vec<SweepWorkspace> = sets.iter().map(|s| SweepWorkspace::new(p + 1, s.len())).collect();
    let mut state = init.unwrap_or_else(|| HierarchicalState::neutral(p));
    let start = {
        let mut v = DVector::zeros(p + 1);
        v.rows_mut(0, p).copy_from(&state.mu);
        v[p] = state.mu_beta;
        v
    };
    let mut gammas = vec![start; j_count];
    let mut out_groups: Vec<PosteriorDraws> = (0..j_count).map(|_| PosteriorDraws::empty(model.parameter_names(), kept)).collect();
    let mut out = HierarchicalDraws {
        groups: Vec::new(),
        mu: DMatrix::zeros(kept, p),
        sigma: Vec::with_capacity(kept),
        mu_beta: Vec::with_capacity(kept),
        sigma_beta2: Vec::with_capacity(kept),
    };
    let mut prior = state.group_prior()?;
    let mut row = 0;

    for it in 0..cfg.iterations {
        for j in 0..j_count {
            if work[j].sweep(&sets[j], &prior, &mut gammas[j], &mut group_rngs[j])? {
                out_groups[j].jitter_events += 1;
            }
        }
        if !freeze {
            update_population(&mut state, &gammas, hyper, &mut hyper_rng)?;
            prior = state.group_prior()?;
        }
        if cfg.keeps(it) {
            for j in 0..j_count {
                out_groups[j].draws.row_mut(row).copy_from(&gammas[j].transpose());
                out_groups[j].log_likelihood.push(log_likelihood_at(&gammas[j], &sets[j]));
            }
            out.mu.row_mut(row).copy_from(&state.mu.transpose());
            out.sigma.push(state.sigma.clone());
            out.mu_beta.push(state.mu_beta);
            out.sigma_beta2.push(state.sigma_beta2);
            row += 1;
        }
    }
    out.groups = out_groups;
    Ok(out)
}

fn update_population(
    state: &mut HierarchicalState,
    gammas: &[DVector<f64>],
    hyper: &HyperPriors,
    rng: &mut RandomStream,
) -> Result<()> {
    let p = state.mu.len();
    let j_count = gammas.len() as f64;
    let thetas: Vec<DVector<f64>> = gammas.iter().map(|g| g.rows(0, p).into_owned()).collect();
    let betas: Vec<f64> = gammas.iter().map(|g| g[p]).collect();

    // μ | θ, Σ.
    let sigma_inv = spd_inverse(&state.sigma)?;
    let mut precision = &sigma_inv * j_count;
    for i in 0..p {
        precision[(i, i)] += 1.0 / hyper.mu_var;
    }
    let theta_sum = thetas.iter().fold(DVector::zeros(p), |acc, t| acc + t);
    let shift = &hyper.mu_mean / hyper.mu_var + &sigma_inv * theta_sum;
    state.mu = sample_gaussian_precision(&precision, &shift, rng)?.0;

    // Σ | θ, μ.
    let mut scatter = hyper.sigma_scale.clone();
    for t in &thetas {
        let d = t - &state.mu;
        scatter.ger(1.0, &d, &d, 1.0);
    }
    let w = sample_wishart_from_inverse_scale(hyper.sigma_df + j_count, &scatter, rng)?;
    state.sigma = spd_inverse(&w)
        .map_err(|_| Error::Numerical("population covariance lost positive definiteness".into()))?;

    // μ_β | β, σ_β².
    let prec = 1.0 / hyper.mu_beta_var + j_count / state.sigma_beta2;
    let mean = (hyper.mu_beta_mean / hyper.mu_beta_var + betas.iter().sum::<f64>() / state.sigma_beta2) / prec;
    let z: f64 = rand::Rng::sample(rng, StandardNormal);
    state.mu_beta = mean + z / prec.sqrt();

    // σ_β² | β, μ_β.
    let ss: f64 = betas.iter().map(|b| (b - state.mu_beta).powi(2)).sum();
    state.sigma_beta2 =
        sample_inverse_gamma(hyper.sigma_beta_shape + 0.5 * j_count, hyper.sigma_beta_scale + 0.5 * ss, rng)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(z: &[f64], s: bool, c: f64) -> LabeledSample {
        LabeledSample { x: vec![0.0], s, z: z.to_vec(), c }
    }

    fn prior2() -> GaussianPrior {
        GaussianPrior::new(DVector::from_vec(vec![0.5, -1.0]), DMatrix::from_row_slice(2, 2, &[2.0, 0.3, 0.3, 1.5])).unwrap()
    }

    #[test]
    fn empty_sample_list_returns_prior() {
        let prior = prior2();
        let (a1, b1) = gaussian_conditional(&prior, &[], &[]).unwrap();
        assert!((a1 - prior.mean()).norm() < 1e-12);
        assert!((b1 - prior.covariance()).norm() < 1e-12);
    }

    #[test]
    fn zero_omega_adds_only_the_label_term() {
        let prior = prior2();
        let z = [0.7, 1.0];
        let (a1, b1) = gaussian_conditional(&prior, &[sample(&z, true, 0.4)], &[0.0]).unwrap();
        let expect = prior.mean() + prior.covariance() * DVector::from_vec(z.to_vec()) * 0.5;
        assert!((a1 - expect).norm() < 1e-12);
        assert!((b1 - prior.covariance()).norm() < 1e-12);
    }

    #[test]
    fn matches_dense_oracle() {
        let prior = prior2();
        let samples = [sample(&[0.2, 1.0], true, 0.1), sample(&[-1.3, 1.0], false, -0.4), sample(&[0.9, 1.0], true, 1.2)];
        let omegas = [0.21, 0.05, 0.33];
        let (a1, b1) = gaussian_conditional(&prior, &samples, &omegas).unwrap();

        // Explicit entrywise sums and a closed-form 2×2 inverse.
        let cov = prior.covariance();
        let det0 = cov[(0, 0)] * cov[(1, 1)] - cov[(0, 1)] * cov[(1, 0)];
        let p0 = [cov[(1, 1)] / det0, -cov[(0, 1)] / det0, cov[(0, 0)] / det0];
        let (mut q00, mut q01, mut q11) = (p0[0], p0[1], p0[2]);
        let m = prior.mean();
        let mut b = [p0[0] * m[0] + p0[1] * m[1], p0[1] * m[0] + p0[2] * m[1]];
        for (s, w) in samples.iter().zip(omegas) {
            q00 += w * s.z[0] * s.z[0];
            q01 += w * s.z[0] * s.z[1];
            q11 += w * s.z[1] * s.z[1];
            let r = if s.s { 0.5 } else { -0.5 } - w * s.c;
            b[0] += r * s.z[0];
            b[1] += r * s.z[1];
        }
        let det = q00 * q11 - q01 * q01;
        let inv = [q11 / det, -q01 / det, q00 / det];
        assert!((b1[(0, 0)] - inv[0]).abs() < 1e-10);
        assert!((b1[(0, 1)] - inv[1]).abs() < 1e-10);
        assert!((b1[(1, 1)] - inv[2]).abs() < 1e-10);
        assert!((a1[0] - (inv[0] * b[0] + inv[1] * b[1])).abs() < 1e-10);
        assert!((a1[1] - (inv[1] * b[0] + inv[2] * b[1])).abs() < 1e-10);
        assert!((b1[(0, 1)] - b1[(1, 0)]).abs() < 1e-12);
        assert!(SpdFactor::new(&b1).is_some());
    }

    #[test]
    fn conditional_rejects_mismatched_input() {
        let prior = prior2();
        let s = [sample(&[0.2, 1.0], true, 0.0)];
        assert!(gaussian_conditional(&prior, &s, &[]).is_err());
        assert!(gaussian_conditional(&prior, &s, &[-1.0]).is_err());
        assert!(gaussian_conditional(&prior, &[sample(&[1.0], true, 0.0)], &[0.1]).is_err());
    }

    #[test]
    fn config_validation_and_kept_count() {
        assert_eq!(GibbsConfig::new(5000, 2000, 1).validate().unwrap(), 3000);
        let mut c = GibbsConfig::new(10, 4, 1);
        c.thin = 4;
        assert_eq!(c.validate().unwrap(), 1);
        assert_eq!((0..10).filter(|&i| c.keeps(i)).count(), 1);
        c.thin = 7;
        assert!(c.validate().is_err());
        assert!(GibbsConfig::new(10, 10, 1).validate().is_err());
        assert!(GibbsConfig::new(0, 0, 1).validate().is_err());
        let mut a = GibbsConfig::new(10, 2, 1).with_mode(NoiseMode::Adaptive);
        a.adaptive.alpha = 0.0;
        assert!(a.validate().is_err());
    }

    #[test]
    fn prior_constructors_validate() {
        assert!(GaussianPrior::new(DVector::zeros(2), DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0])).is_err());
        assert!(GaussianPrior::diagonal(DVector::zeros(2), &[1.0, 0.0]).is_err());
        let p = GaussianPrior::isotropic(3, 4.0).unwrap();
        assert_eq!(p.precision(), &PriorPrecision::Diagonal { precision: DVector::from_element(3, 0.25), shift: DVector::zeros(3) });
    }
}
