//! Gibbs sampler for the time-varying density model.
//!
//! `f_t(x) = Φ(x)ᵀθ_t`, `θ_t | θ_{t−1} ~ N(θ_{t−1}, λI)` with `θ_0 = 0`,
//! `β_t ~ N(0, b0)` and `λ ~ IG(n0, ν0)`. Each time point has its own
//! labeled set of genuine and noise points over the same basis.

use super::basis::RbfBasis;
use crate::dist::sample_inverse_gamma;
use crate::error::{Error, Result};
use crate::expfam::{LabeledSet, NoiseDistribution};
use crate::gibbs::GibbsConfig;
use crate::linalg::sample_gaussian_precision;
use crate::noise::{batch_mean, tempered_resample, TemperedNoiseState};
use crate::pg::sample_pg1_raw;
use crate::rng::RandomStream;
use nalgebra::{DMatrix, DVector};
use rand_distr::StandardNormal;
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Fixed hyperparameters of the model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TvPriors {
    /// Prior variance of each `β_t`.
    pub beta_var: f64,
    /// Shape of the inverse-gamma prior on `λ`.
    pub lambda_shape: f64,
    /// Scale of the inverse-gamma prior on `λ`.
    pub lambda_scale: f64,
}

impl Default for TvPriors {
    fn default() -> Self {
        Self { beta_var: 1e3, lambda_shape: 1.0, lambda_scale: 1.0 }
    }
}

/// Kept draws. `theta` has one row per draw laid out as `T` blocks of `L`.
#[derive(Debug, Clone, PartialEq)]
pub struct TvDraws {
    pub times: usize,
    pub basis: usize,
    pub theta: DMatrix<f64>,
    pub beta: DMatrix<f64>,
    pub lambda: Vec<f64>,
    pub noise_refreshes: usize,
    pub ess_warnings: usize,
    pub jitter_events: usize,
}

impl TvDraws {
    pub fn kept(&self) -> usize {
        self.lambda.len()
    }

    /// `θ_t` of draw `r`.
    pub fn theta_at(&self, r: usize, t: usize) -> Vec<f64> {
        (0..self.basis).map(|l| self.theta[(r, t * self.basis + l)]).collect()
    }

    /// `Σ_t ‖θ_t − θ_{t−1}‖²` for each draw, with `θ_0 = 0`.
    pub fn roughness(&self) -> Vec<f64> {
        (0..self.kept())
            .map(|r| {
                let row = self.theta.row(r);
                (0..self.times * self.basis)
                    .map(|j| {
                        let prev = if j >= self.basis { row[j - self.basis] } else { 0.0 };
                        (row[j] - prev).powi(2)
                    })
                    .sum()
            })
            .collect()
    }
}

/// How noise sets evolve during the run.
pub enum TvNoiseUpdate<'a> {
    /// Keep the initial sets.
    Fixed,
    /// Draw a fresh set from each time's law every iteration.
    Refresh(Vec<&'a dyn NoiseDistribution>),
    /// Tempered resampling from the running fit against a shared base law.
    Adaptive { base: &'a dyn NoiseDistribution },
}

struct TimeState {
    theta: DVector<f64>,
    beta: f64,
}

/// Prior precision `b0t` (times the identity) and shift `a0t` contributed to
/// `θ_t` by its neighbours in the random walk; `prev` is `None` at the first
/// time (`θ_0 = 0`) and `next` is `None` at the last.
pub fn random_walk_prior(
    basis: usize,
    prev: Option<&DVector<f64>>,
    next: Option<&DVector<f64>>,
    lambda: f64,
) -> (f64, DVector<f64>) {
    let mut shift = prev.cloned().unwrap_or_else(|| DVector::zeros(basis));
    match next {
        Some(n) => {
            shift += n;
            (2.0 / lambda, shift / lambda)
        }
        None => (1.0 / lambda, shift / lambda),
    }
}

/// Shape and scale of `λ | Θ`: `(n0 + TL/2, ν0 + ½ Σ_t ‖θ_t − θ_{t−1}‖²)`.
pub fn lambda_conditional(thetas: &[&DVector<f64>], priors: &TvPriors) -> (f64, f64) {
    let mut ss = 0.0;
    for (t, th) in thetas.iter().enumerate() {
        ss += if t == 0 { th.norm_squared() } else { (*th - thetas[t - 1]).norm_squared() };
    }
    let count: usize = thetas.iter().map(|t| t.len()).sum();
    (priors.lambda_shape + count as f64 / 2.0, priors.lambda_scale + ss / 2.0)
}

/// Runs the sampler on per-time labeled sets built over `basis`.
pub fn run_tv_gibbs(
    basis: &RbfBasis,
    sets: &mut [LabeledSet],
    priors: &TvPriors,
    update: TvNoiseUpdate<'_>,
    cfg: &GibbsConfig,
) -> Result<TvDraws> {
    let kept = cfg.validate()?;
    if sets.is_empty() {
        return Err(Error::Precondition("at least one time point is required".into()));
    }
    if !(priors.beta_var > 0.0 && priors.lambda_shape > 0.0 && priors.lambda_scale > 0.0) {
        return Err(Error::InvalidParameter("prior variance and inverse-gamma parameters must be positive".into()));
    }
    let l = basis.len();
    let t_count = sets.len();
    if let TvNoiseUpdate::Refresh(laws) = &update {
        if laws.len() != t_count {
            return Err(Error::Precondition("one refresh law per time point is required".into()));
        }
    }
    if sets.iter().any(|s| s.dim() != l + 1) {
        return Err(Error::Precondition("labeled sets do not match the basis".into()));
    }
    let root = RandomStream::new(cfg.seed);
    let mut rng = root.substream(0);
    let mut noise_rng = root.substream(1);

    let mut states: Vec<TimeState> = (0..t_count).map(|_| TimeState { theta: DVector::zeros(l), beta: 0.0 }).collect();
    let mut lambda = 1.0;
    let mut draws = TvDraws {
        times: t_count,
        basis: l,
        theta: DMatrix::zeros(kept, t_count * l),
        beta: DMatrix::zeros(kept, t_count),
        lambda: Vec::with_capacity(kept),
        noise_refreshes: 0,
        ess_warnings: 0,
        jitter_events: 0,
    };
    let mut batches: Vec<Vec<DVector<f64>>> = vec![Vec::new(); t_count];
    let mut tempered: Vec<Option<TemperedNoiseState>> = (0..t_count).map(|_| None).collect();
    let mut omega: Vec<f64> = Vec::new();
    let mut row = 0;

    for it in 0..cfg.iterations {
        for t in 0..t_count {
            let set = &sets[t];
            let phi = set.design().rows(0, l);
            let offsets = set.offsets();
            let n = set.len();
            // ω | θ_t, β_t
            let fitted = phi.tr_mul(&states[t].theta);
            omega.clear();
            for i in 0..n {
                omega.push(sample_pg1_raw(fitted[i] + states[t].beta + offsets[i], &mut rng)?);
            }
            // θ_t | ω, β_t, θ_{t±1}, λ
            let prev = if t > 0 { Some(&states[t - 1].theta) } else { None };
            let next = states.get(t + 1).map(|s| &s.theta);
            let (b0t, mut shift) = random_walk_prior(l, prev, next, lambda);
            let mut weighted = phi.into_owned();
            for i in 0..n {
                let w = omega[i].sqrt();
                weighted.column_mut(i).scale_mut(w);
                let coef = f64::from(u8::from(set.label(i))) - 0.5 - omega[i] * (states[t].beta + offsets[i]);
                shift.axpy(coef, &phi.column(i), 1.0);
            }
            let mut q = &weighted * weighted.transpose();
            for d in 0..l {
                q[(d, d)] += b0t;
            }
            let (theta, _, jittered) = sample_gaussian_precision(&q, &shift, &mut rng)?;
            draws.jitter_events += usize::from(jittered);
            states[t].theta = theta;
            // β_t | ω, θ_t
            let fitted = phi.tr_mul(&states[t].theta);
            let mut prec = 1.0 / priors.beta_var;
            let mut b = 0.0;
            for i in 0..n {
                prec += omega[i];
                b += f64::from(u8::from(set.label(i))) - 0.5 - omega[i] * (fitted[i] + offsets[i]);
            }
            let z: f64 = rng.sample(StandardNormal);
            states[t].beta = b / prec + z / prec.sqrt();
        }
        // λ | Θ
        let thetas: Vec<&DVector<f64>> = states.iter().map(|s| &s.theta).collect();
        let (shape, scale) = lambda_conditional(&thetas, priors);
        lambda = sample_inverse_gamma(shape, scale, &mut rng)?;

        if let TvNoiseUpdate::Refresh(laws) = &update {
            for (set, law) in sets.iter_mut().zip(laws) {
                let noise = law.sample(set.n_noise(), &mut noise_rng);
                set.replace_noise(basis, noise, *law)?;
            }
            draws.noise_refreshes += t_count;
        }
        if let TvNoiseUpdate::Adaptive { base } = &update {
            let settings = &cfg.adaptive;
            let active = !settings.burn_in_only || it < cfg.burn_in;
            for t in 0..t_count {
                if !active {
                    break;
                }
                batches[t].push(states[t].theta.clone().insert_row(l, states[t].beta));
                if batches[t].len() < settings.cadence {
                    continue;
                }
                let tilde = batch_mean(&batches[t])?;
                batches[t].clear();
                let m = sets[t].n_noise();
                let state = match &mut tempered[t] {
                    Some(s) => {
                        s.gamma_tilde = tilde;
                        s
                    }
                    slot => {
                        let mut s = TemperedNoiseState::new(tilde, settings.alpha, settings.proposal_factor * m)?;
                        s.scheme = settings.scheme;
                        slot.insert(s)
                    }
                };
                let (noise, density) = tempered_resample(state, m, basis, *base, &mut noise_rng)?;
                if state.last_ess < state.proposals as f64 / 10.0 {
                    draws.ess_warnings += 1;
                }
                sets[t].replace_noise(basis, noise, &density)?;
                draws.noise_refreshes += 1;
            }
        }

        if cfg.keeps(it) && row < kept {
            for t in 0..t_count {
                draws.theta.view_mut((row, t * l), (1, l)).copy_from(&states[t].theta.transpose());
                draws.beta[(row, t)] = states[t].beta;
            }
            draws.lambda.push(lambda);
            row += 1;
        }
    }
    Ok(draws)
}
