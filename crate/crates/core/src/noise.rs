//! Adaptive noise by tempered importance resampling.
//!
//! Proposals from a base law `q0` are reweighted toward
//! `q_α(x) ∝ exp{α z(x)ᵀγ̃}`, where `γ̃` is a recent posterior mean, and `m`
//! of them are resampled to serve as the next noise set.

use crate::error::{Error, Result};
use crate::expfam::{ExpFamModel, GammaVector, NoiseDistribution};
use crate::rng::RandomStream;
use crate::special::log_sum_exp;
use nalgebra::DVector;
use rand::Rng;
use serde::{Deserialize, Serialize};

/// How `m` points are drawn from the normalized weights.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum ResamplingScheme {
    #[default]
    Multinomial,
    Systematic,
}

/// Tuning knobs for adaptive noise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdaptiveSettings {
    /// Tempering exponent in `(0, 1]`.
    pub alpha: f64,
    /// Iterations between refreshes; also the length of the mini-batch
    /// averaged into `γ̃`.
    pub cadence: usize,
    /// Proposal count as a multiple of `m`.
    pub proposal_factor: usize,
    /// Stop adapting once burn-in ends.
    pub burn_in_only: bool,
    pub scheme: ResamplingScheme,
}

impl Default for AdaptiveSettings {
    fn default() -> Self {
        Self { alpha: 0.2, cadence: 50, proposal_factor: 50, burn_in_only: false, scheme: ResamplingScheme::Multinomial }
    }
}

impl AdaptiveSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::InvalidParameter(format!("alpha must lie in (0, 1], got {}", self.alpha)));
        }
        if self.cadence == 0 || self.proposal_factor == 0 {
            return Err(Error::InvalidParameter("cadence and proposal factor must be positive".into()));
        }
        Ok(())
    }
}

/// Current tempering target and the outcome of the last resampling.
#[derive(Debug, Clone)]
pub struct TemperedNoiseState {
    pub gamma_tilde: DVector<f64>,
    pub alpha: f64,
    /// Number of proposals `M`.
    pub proposals: usize,
    pub scheme: ResamplingScheme,
    pub last_ess: f64,
    pub log_z_alpha: f64,
}

impl TemperedNoiseState {
    pub fn new(gamma_tilde: DVector<f64>, alpha: f64, proposals: usize) -> Result<Self> {
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(Error::InvalidParameter(format!("alpha must lie in (0, 1], got {alpha}")));
        }
        if proposals == 0 {
            return Err(Error::InvalidParameter("proposal count must be positive".into()));
        }
        Ok(Self {
            gamma_tilde,
            alpha,
            proposals,
            scheme: ResamplingScheme::Multinomial,
            last_ess: proposals as f64,
            log_z_alpha: 0.0,
        })
    }

    pub fn z_alpha(&self) -> f64 {
        self.log_z_alpha.exp()
    }
}

/// `q_α(x) = exp{α z(x)ᵀγ̃} / Ẑ_α` on the support of the base law.
pub struct TemperedDensity<'a> {
    model: &'a dyn ExpFamModel,
    base: &'a dyn NoiseDistribution,
    coef: DVector<f64>,
    log_z: f64,
}

impl TemperedDensity<'_> {
    fn exponent(&self, x: &[f64]) -> f64 {
        let z = self.model.design_row(x);
        z.iter().zip(self.coef.iter()).map(|(a, b)| a * b).sum()
    }

    pub fn log_normalizer(&self) -> f64 {
        self.log_z
    }
}

impl NoiseDistribution for TemperedDensity<'_> {
    fn log_density(&self, x: &[f64]) -> f64 {
        if !self.base.log_density(x).is_finite() {
            return f64::NEG_INFINITY;
        }
        self.exponent(x) - self.log_z
    }

    /// Approximate draws by one round of importance resampling with `50·m`
    /// proposals.
    fn sample(&self, m: usize, rng: &mut RandomStream) -> Vec<Vec<f64>> {
        let proposals = self.base.sample(50 * m.max(1), rng);
        let logw: Vec<f64> = proposals.iter().map(|x| self.exponent(x) - self.base.log_density(x)).collect();
        match normalized_weights(&logw) {
            Ok(w) => resample_indices(&w, m, ResamplingScheme::Multinomial, rng)
                .into_iter()
                .map(|j| proposals[j].clone())
                .collect(),
            Err(_) => proposals.into_iter().take(m).collect(),
        }
    }
}

/// Effective sample size `(Σw)² / Σw²`.
pub fn ess(weights: &[f64]) -> Result<f64> {
    if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
        return Err(Error::DegenerateWeights("weights must be finite and nonnegative".into()));
    }
    let max = weights.iter().cloned().fold(0.0, f64::max);
    if max <= 0.0 {
        return Err(Error::DegenerateWeights("all weights are zero".into()));
    }
    // Rescaling by the maximum keeps the squares in range.
    let (s, s2) = weights.iter().fold((0.0, 0.0), |(s, s2), w| {
        let v = w / max;
        (s + v, s2 + v * v)
    });
    Ok(s * s / s2)
}

/// Componentwise mean of a mini-batch of draws.
pub fn update_gamma_tilde(draws: &[GammaVector]) -> Result<GammaVector> {
    let vectors: Vec<DVector<f64>> = draws.iter().map(GammaVector::to_dvector).collect();
    GammaVector::from_dvector(&batch_mean(&vectors)?)
}

pub(crate) fn batch_mean(draws: &[DVector<f64>]) -> Result<DVector<f64>> {
    let first = draws.first().ok_or_else(|| Error::Precondition("empty mini-batch".into()))?;
    let mut acc = DVector::zeros(first.len());
    for d in draws {
        acc += d;
    }
    Ok(acc / draws.len() as f64)
}

/// Turns log weights into probabilities summing to one.
fn normalized_weights(logw: &[f64]) -> Result<Vec<f64>> {
    let finite: Vec<f64> = logw.iter().map(|&l| if l.is_nan() { f64::NEG_INFINITY } else { l }).collect();
    let lse = log_sum_exp(&finite);
    if !lse.is_finite() {
        return Err(Error::DegenerateWeights("no proposal has a finite positive weight".into()));
    }
    Ok(finite.iter().map(|l| (l - lse).exp()).collect())
}

fn resample_indices(probs: &[f64], m: usize, scheme: ResamplingScheme, rng: &mut RandomStream) -> Vec<usize> {
    let mut cdf = Vec::with_capacity(probs.len());
    let mut acc = 0.0;
    for p in probs {
        acc += p;
        cdf.push(acc);
    }
    let total = acc;
    let locate = |u: f64| cdf.partition_point(|&c| c <= u).min(probs.len() - 1);
    match scheme {
        ResamplingScheme::Multinomial => (0..m).map(|_| locate(rng.random::<f64>() * total)).collect(),
        ResamplingScheme::Systematic => {
            let u0: f64 = rng.random();
            (0..m).map(|k| locate((k as f64 + u0) / m as f64 * total)).collect()
        }
    }
}

/// One round of tempered importance resampling. Returns the new noise set
/// and the density `q_α` to use for offsets; `state` records `Ẑ_α` and the
/// ESS of the proposal weights.
pub fn tempered_resample<'a>(
    state: &mut TemperedNoiseState,
    m: usize,
    model: &'a dyn ExpFamModel,
    base: &'a dyn NoiseDistribution,
    rng: &mut RandomStream,
) -> Result<(Vec<Vec<f64>>, TemperedDensity<'a>)> {
    if m == 0 {
        return Err(Error::Precondition("noise count must be positive".into()));
    }
    let coef = &state.gamma_tilde * state.alpha;
    let proposals = base.sample(state.proposals, rng);
    let logw: Vec<f64> = proposals
        .iter()
        .map(|x| {
            let z = model.design_row(x);
            let e: f64 = z.iter().zip(coef.iter()).map(|(a, b)| a * b).sum();
            e - base.log_density(x)
        })
        .collect();
    let probs = normalized_weights(&logw)?;
    let log_z = log_sum_exp(&logw) - (state.proposals as f64).ln();
    state.last_ess = ess(&probs)?;
    state.log_z_alpha = log_z;
    let noise = resample_indices(&probs, m, state.scheme, rng).into_iter().map(|j| proposals[j].clone()).collect();
    Ok((noise, TemperedDensity { model, base, coef, log_z }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expfam::{Domain, UniformNoise};
    use crate::stats::ks_two_sample;
    use std::f64::consts::TAU;

    /// η(x) = (cos x, sin x) on the circle.
    struct Circle {
        domain: Domain,
    }

    impl ExpFamModel for Circle {
        fn dim(&self) -> usize {
            2
        }
        fn domain(&self) -> &Domain {
            &self.domain
        }
        fn suff_stat_into(&self, x: &[f64], out: &mut [f64]) {
            out[0] = x[0].cos();
            out[1] = x[0].sin();
        }
    }

    fn circle() -> (Circle, UniformNoise) {
        (Circle { domain: Domain::torus(1) }, UniformNoise::new(Domain::torus(1)))
    }

    #[test]
    fn ess_examples() {
        assert!((ess(&[3.0; 40]).unwrap() - 40.0).abs() < 1e-12);
        assert!((ess(&[0.0, 0.0, 5.0, 0.0]).unwrap() - 1.0).abs() < 1e-12);
        assert!((ess(&[1.0, 1.0, 2.0]).unwrap() - 16.0 / 6.0).abs() < 1e-12);
        assert!(ess(&[0.0, 0.0]).is_err());
        let w = [0.3, 1.7, 2.2, 0.01];
        let scaled: Vec<f64> = w.iter().map(|v| v * 1e250).collect();
        let (a, b) = (ess(&w).unwrap(), ess(&scaled).unwrap());
        assert!(((a - b) / a).abs() < 1e-12);
    }

    #[test]
    fn gamma_tilde_is_componentwise_mean() {
        let one = GammaVector::new(vec![1.0, 2.0], 3.0).unwrap();
        assert_eq!(update_gamma_tilde(&[one.clone()]).unwrap(), one);
        let pair = [GammaVector::zeros(2), GammaVector::new(vec![2.0, 2.0], 2.0).unwrap()];
        assert_eq!(update_gamma_tilde(&pair).unwrap(), GammaVector::new(vec![1.0, 1.0], 1.0).unwrap());

        let mut rng = RandomStream::new(50);
        let draws: Vec<GammaVector> = (0..50)
            .map(|_| GammaVector::new(vec![rng.random(), rng.random()], rng.random()).unwrap())
            .collect();
        let mean = update_gamma_tilde(&draws).unwrap();
        let oracle = draws.iter().map(|g| g.theta[1]).sum::<f64>() / 50.0;
        assert!((mean.theta[1] - oracle).abs() < 1e-12);
        assert!(update_gamma_tilde(&[]).is_err());
    }

    #[test]
    fn vanishing_temper_resamples_the_base_law() {
        let (model, base) = circle();
        for (alpha, g) in [(1e-12, DVector::from_vec(vec![3.0, -1.0, 0.5])), (0.7, DVector::zeros(3))] {
            let mut state = TemperedNoiseState::new(g, alpha, 10_000).unwrap();
            let mut rng = RandomStream::new(9);
            let (noise, q) = tempered_resample(&mut state, 10_000, &model, &base, &mut rng).unwrap();
            assert_eq!(noise.len(), 10_000);
            assert!(state.last_ess > 9_999.0);
            let mut a: Vec<f64> = noise.iter().map(|x| x[0]).collect();
            let mut b: Vec<f64> = base.sample(10_000, &mut rng).into_iter().map(|x| x[0]).collect();
            assert!(ks_two_sample(&mut a, &mut b) < 0.05);
            assert!((q.log_density(&[1.0]) + TAU.ln()).abs() < 1e-6);
        }
    }

    /// Midpoint-rule moments of exp(a cos x + b sin x) on the circle.
    fn quadrature(a: f64, b: f64) -> (f64, f64, f64) {
        let k = 200_000;
        let (mut z, mut c, mut s) = (0.0, 0.0, 0.0);
        for i in 0..k {
            let x = (i as f64 + 0.5) * TAU / k as f64;
            let w = (a * x.cos() + b * x.sin()).exp() * TAU / k as f64;
            z += w;
            c += w * x.cos();
            s += w * x.sin();
        }
        (z, c / z, s / z)
    }

    #[test]
    fn resampled_mean_direction_matches_quadrature() {
        let (model, base) = circle();
        let (kappa, mu) = (2.0f64, 1.0f64);
        let g = DVector::from_vec(vec![kappa * mu.cos(), kappa * mu.sin(), 0.0]);
        let mut state = TemperedNoiseState::new(g, 1.0, 100_000).unwrap();
        let mut rng = RandomStream::new(77);
        let (noise, q) = tempered_resample(&mut state, 20_000, &model, &base, &mut rng).unwrap();
        let (c, s) = noise.iter().fold((0.0, 0.0), |(c, s), x| (c + x[0].cos(), s + x[0].sin()));
        let (z, qc, qs) = quadrature(kappa * mu.cos(), kappa * mu.sin());
        let target = qs.atan2(qc);
        assert!((s.atan2(c) - target).abs() < 0.05);
        assert!((target - mu).abs() < 1e-9);
        // Ẑ_α estimates the integral of exp(α zᵀγ̃).
        assert!((state.z_alpha() / z - 1.0).abs() < 0.02);
        assert!((q.log_density(&[0.3]) - ((kappa * (0.3 - mu).cos()) - z.ln())).abs() < 0.02);
        assert!(state.last_ess >= 1.0 && state.last_ess <= 100_000.0);
    }

    #[test]
    fn self_normalized_estimate_converges() {
        let (model, base) = circle();
        let g = DVector::from_vec(vec![1.5, 0.0, 0.0]);
        let (_, truth, _) = quadrature(0.3, 0.0);
        let mut rng = RandomStream::new(5);
        let proposals = base.sample(100_000, &mut rng);
        let w: Vec<f64> = proposals
            .iter()
            .map(|x| (0.2 * model.design_row(x).iter().zip(g.iter()).map(|(a, b)| a * b).sum::<f64>()).exp())
            .collect();
        let sw: f64 = w.iter().sum();
        let vals: Vec<f64> = proposals.iter().map(|x| x[0].cos()).collect();
        let est: f64 = w.iter().zip(&vals).map(|(w, v)| w * v).sum::<f64>() / sw;
        let se = (w.iter().zip(&vals).map(|(w, v)| (w / sw).powi(2) * (v - est).powi(2)).sum::<f64>()).sqrt();
        assert!((est - truth).abs() < 3.0 * se, "est {est} truth {truth} se {se}");
    }

    #[test]
    fn systematic_scheme_and_degenerate_weights() {
        let (model, base) = circle();
        let mut state = TemperedNoiseState::new(DVector::from_vec(vec![1.0, 0.0, 0.0]), 0.5, 500).unwrap();
        state.scheme = ResamplingScheme::Systematic;
        let mut rng = RandomStream::new(1);
        let (noise, _) = tempered_resample(&mut state, 37, &model, &base, &mut rng).unwrap();
        assert_eq!(noise.len(), 37);

        let mut bad = TemperedNoiseState::new(DVector::from_vec(vec![f64::NAN, 0.0, 0.0]), 0.5, 50).unwrap();
        assert!(matches!(
            tempered_resample(&mut bad, 5, &model, &base, &mut rng),
            Err(Error::DegenerateWeights(_))
        ));
        assert!(TemperedNoiseState::new(DVector::zeros(3), 0.0, 10).is_err());
        assert!(TemperedNoiseState::new(DVector::zeros(3), 1.5, 10).is_err());
    }
}
