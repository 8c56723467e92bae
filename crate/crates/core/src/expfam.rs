//! Unnormalized exponential-family models and the noise-contrastive
//! classification likelihood.
//!
//! A model `p̃(x|θ) = h(x) exp(η(x)ᵀθ)` is classified against noise drawn
//! from a known density `q`. With `β = −log Z`, design row
//! `z(x) = (η(x)ᵀ, 1)ᵀ` and offset `C(x) = log n − log m + log h(x) − log q(x)`,
//! each labeled point contributes a logistic term in `ψ = z(x)ᵀγ + C(x)`
//! where `γ = (θᵀ, β)ᵀ`.

use crate::error::{Error, Result};
use crate::rng::RandomStream;
use crate::special::{logistic, softplus};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;

/// Sample space of a model: a bounded box or the d-torus `[0, 2π)^d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Domain {
    Rectangle { lower: Vec<f64>, upper: Vec<f64> },
    Torus { dim: usize },
}

impl Domain {
    pub fn rectangle(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() || lower.is_empty() {
            return Err(Error::InvalidParameter("rectangle bounds must be non-empty and equal length".into()));
        }
        if lower.iter().zip(&upper).any(|(l, u)| !(l < u) || !l.is_finite() || !u.is_finite()) {
            return Err(Error::InvalidParameter("rectangle requires finite lower < upper".into()));
        }
        Ok(Domain::Rectangle { lower, upper })
    }

    pub fn torus(dim: usize) -> Self {
        Domain::Torus { dim }
    }

    /// Componentwise range of `points`, widened by `expand` times the range
    /// on each side.
    pub fn bounding_box(points: &[Vec<f64>], expand: f64) -> Result<Self> {
        let first = points
            .first()
            .ok_or_else(|| Error::Precondition("bounding box of an empty point set".into()))?;
        let mut lower = first.clone();
        let mut upper = first.clone();
        for p in points {
            for (k, &v) in p.iter().enumerate() {
                lower[k] = lower[k].min(v);
                upper[k] = upper[k].max(v);
            }
        }
        for k in 0..lower.len() {
            let mut w = upper[k] - lower[k];
            if w <= 0.0 {
                w = 1.0;
            }
            lower[k] -= expand * w;
            upper[k] += expand * w;
        }
        Domain::rectangle(lower, upper)
    }

    pub fn dim(&self) -> usize {
        match self {
            Domain::Rectangle { lower, .. } => lower.len(),
            Domain::Torus { dim } => *dim,
        }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        if x.len() != self.dim() {
            return false;
        }
        match self {
            Domain::Rectangle { lower, upper } => {
                x.iter().zip(lower.iter().zip(upper)).all(|(v, (l, u))| *v >= *l && *v <= *u)
            }
            Domain::Torus { .. } => x.iter().all(|v| (0.0..TAU).contains(v)),
        }
    }

    pub fn log_volume(&self) -> f64 {
        match self {
            Domain::Rectangle { lower, upper } => lower.iter().zip(upper).map(|(l, u)| (u - l).ln()).sum(),
            Domain::Torus { dim } => *dim as f64 * TAU.ln(),
        }
    }

    pub fn volume(&self) -> f64 {
        self.log_volume().exp()
    }

    pub fn sample_uniform<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        match self {
            Domain::Rectangle { lower, upper } => {
                lower.iter().zip(upper).map(|(l, u)| l + (u - l) * rng.random::<f64>()).collect()
            }
            Domain::Torus { dim } => (0..*dim).map(|_| TAU * rng.random::<f64>()).collect(),
        }
    }
}

/// Wraps an angle into `[0, 2π)`.
pub fn wrap_angle(x: f64) -> f64 {
    let r = x.rem_euclid(TAU);
    // rem_euclid can round up to exactly TAU for tiny negative inputs.
    if r >= TAU {
        0.0
    } else {
        r
    }
}

/// `p̃(x|θ) = h(x) exp(η(x)ᵀθ)` on a [`Domain`].
pub trait ExpFamModel: Send + Sync {
    /// Number of natural parameters `p`.
    fn dim(&self) -> usize;

    fn domain(&self) -> &Domain;

    /// Writes `η(x)` into `out` (length `p`).
    fn suff_stat_into(&self, x: &[f64], out: &mut [f64]);

    fn log_base(&self, _x: &[f64]) -> f64 {
        0.0
    }

    fn suff_stat(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.suff_stat_into(x, &mut out);
        out
    }

    /// `z(x) = (η(x)ᵀ, 1)ᵀ`.
    fn design_row(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim() + 1];
        self.suff_stat_into(x, &mut out[..self.dim()]);
        out[self.dim()] = 1.0;
        out
    }

    /// Column names for serialized draws.
    fn parameter_names(&self) -> Vec<String> {
        let mut names: Vec<String> = (1..=self.dim()).map(|k| format!("theta_{k}")).collect();
        names.push("beta".into());
        names
    }
}

/// Natural parameters together with `β = −log Z`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GammaVector {
    pub theta: Vec<f64>,
    pub beta: f64,
}

impl GammaVector {
    pub fn new(theta: Vec<f64>, beta: f64) -> Result<Self> {
        if theta.iter().any(|v| !v.is_finite()) || !beta.is_finite() {
            return Err(Error::InvalidParameter("gamma entries must be finite".into()));
        }
        Ok(Self { theta, beta })
    }

    pub fn zeros(p: usize) -> Self {
        Self { theta: vec![0.0; p], beta: 0.0 }
    }

    /// Splits a length `p+1` slice into `(θ, β)`.
    pub fn from_slice(values: &[f64]) -> Result<Self> {
        let (beta, theta) = values
            .split_last()
            .ok_or_else(|| Error::InvalidParameter("gamma vector needs at least the beta entry".into()))?;
        Self::new(theta.to_vec(), *beta)
    }

    pub fn len(&self) -> usize {
        self.theta.len() + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn to_dvector(&self) -> DVector<f64> {
        DVector::from_iterator(self.len(), self.theta.iter().copied().chain(std::iter::once(self.beta)))
    }

    pub fn from_dvector(v: &DVector<f64>) -> Result<Self> {
        Self::from_slice(v.as_slice())
    }
}

/// How the noise sample is handled during a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseMode {
    /// One noise set drawn up front and kept for the whole run.
    FixedSet,
    /// A fresh set drawn from the generator at every iteration.
    Generator,
    /// Tempered importance resampling toward the current fit.
    Adaptive,
}

/// A noise law with a tractable log density.
pub trait NoiseDistribution: Send + Sync {
    fn log_density(&self, x: &[f64]) -> f64;

    fn sample(&self, m: usize, rng: &mut RandomStream) -> Vec<Vec<f64>>;
}

/// Uniform noise on a domain.
#[derive(Debug, Clone)]
pub struct UniformNoise {
    domain: Domain,
    log_density: f64,
}

impl UniformNoise {
    pub fn new(domain: Domain) -> Self {
        let log_density = -domain.log_volume();
        Self { domain, log_density }
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }
}

impl NoiseDistribution for UniformNoise {
    fn log_density(&self, x: &[f64]) -> f64 {
        if self.domain.contains(x) {
            self.log_density
        } else {
            f64::NEG_INFINITY
        }
    }

    fn sample(&self, m: usize, rng: &mut RandomStream) -> Vec<Vec<f64>> {
        (0..m).map(|_| self.domain.sample_uniform(rng)).collect()
    }
}

/// One genuine or noise observation with its design row and offset.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSample {
    pub x: Vec<f64>,
    /// `true` for genuine observations (s = 1).
    pub s: bool,
    pub z: Vec<f64>,
    pub c: f64,
}

impl LabeledSample {
    pub fn psi(&self, gamma: &[f64]) -> f64 {
        self.z.iter().zip(gamma).map(|(a, b)| a * b).sum::<f64>() + self.c
    }
}

/// The `n + m` labeled points of one classification problem.
///
/// Design rows are stored as the columns of a `(p+1) × (n+m)` matrix so that
/// each `z(x_i)` is contiguous. Genuine points come first.
#[derive(Debug, Clone)]
pub struct LabeledSet {
    points: Vec<Vec<f64>>,
    design: DMatrix<f64>,
    offsets: Vec<f64>,
    n_genuine: usize,
}

/// Builds the labeled set for genuine `data` against `noise` points drawn
/// from `noise_density`.
pub fn build_labeled(
    data: &[Vec<f64>],
    noise: &[Vec<f64>],
    model: &dyn ExpFamModel,
    noise_density: &dyn NoiseDistribution,
) -> Result<LabeledSet> {
    if data.is_empty() {
        return Err(Error::Precondition("at least one genuine observation is required".into()));
    }
    if noise.is_empty() {
        return Err(Error::Precondition("at least one noise observation is required".into()));
    }
    let n = data.len();
    let total = n + noise.len();
    let mut set = LabeledSet {
        points: Vec::with_capacity(total),
        design: DMatrix::zeros(model.dim() + 1, total),
        offsets: vec![0.0; total],
        n_genuine: n,
    };
    set.points.extend(data.iter().cloned());
    set.points.extend(noise.iter().cloned());
    for i in 0..total {
        set.fill_row(model, i)?;
    }
    set.recompute_offsets(model, noise_density)?;
    Ok(set)
}

impl LabeledSet {
    fn fill_row(&mut self, model: &dyn ExpFamModel, i: usize) -> Result<()> {
        let x = &self.points[i];
        if !model.domain().contains(x) {
            return Err(Error::OutsideDomain { index: i });
        }
        let p = model.dim();
        let mut col = self.design.column_mut(i);
        let slice = col.as_mut_slice();
        model.suff_stat_into(x, &mut slice[..p]);
        slice[p] = 1.0;
        Ok(())
    }

    /// Recomputes every offset against `noise_density`; needed whenever the
    /// noise law itself changes.
    pub fn recompute_offsets(&mut self, model: &dyn ExpFamModel, noise_density: &dyn NoiseDistribution) -> Result<()> {
        let base = (self.n_genuine as f64).ln() - (self.n_noise() as f64).ln();
        for (i, x) in self.points.iter().enumerate() {
            let lq = noise_density.log_density(x);
            if !lq.is_finite() {
                return Err(Error::OffsetUndefined { index: i });
            }
            self.offsets[i] = base + model.log_base(x) - lq;
        }
        Ok(())
    }

    /// Swaps in a new noise set of the same size. Offsets are recomputed for
    /// all points against `noise_density`.
    pub fn replace_noise(
        &mut self,
        model: &dyn ExpFamModel,
        noise: Vec<Vec<f64>>,
        noise_density: &dyn NoiseDistribution,
    ) -> Result<()> {
        if noise.len() != self.n_noise() {
            return Err(Error::Precondition(format!(
                "replacement noise has {} points, expected {}",
                noise.len(),
                self.n_noise()
            )));
        }
        let n = self.n_genuine;
        for (k, x) in noise.into_iter().enumerate() {
            self.points[n + k] = x;
            self.fill_row(model, n + k)?;
        }
        self.recompute_offsets(model, noise_density)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn n_genuine(&self) -> usize {
        self.n_genuine
    }

    pub fn n_noise(&self) -> usize {
        self.points.len() - self.n_genuine
    }

    pub fn dim(&self) -> usize {
        self.design.nrows()
    }

    /// `(p+1) × (n+m)` matrix whose i-th column is `z(x_i)`.
    pub fn design(&self) -> &DMatrix<f64> {
        &self.design
    }

    pub fn z(&self, i: usize) -> &[f64] {
        let d = self.dim();
        &self.design.as_slice()[i * d..(i + 1) * d]
    }

    pub fn offsets(&self) -> &[f64] {
        &self.offsets
    }

    pub fn label(&self, i: usize) -> bool {
        i < self.n_genuine
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn noise_points(&self) -> &[Vec<f64>] {
        &self.points[self.n_genuine..]
    }

    pub fn sample(&self, i: usize) -> LabeledSample {
        LabeledSample {
            x: self.points[i].clone(),
            s: self.label(i),
            z: self.z(i).to_vec(),
            c: self.offsets[i],
        }
    }

    pub fn samples(&self) -> impl Iterator<Item = LabeledSample> + '_ {
        (0..self.len()).map(|i| self.sample(i))
    }

    /// `ψ_i = z_iᵀγ + C_i` for all points.
    pub fn linear_predictor(&self, gamma: &DVector<f64>) -> DVector<f64> {
        let mut psi = self.design.tr_mul(gamma);
        for (p, c) in psi.iter_mut().zip(&self.offsets) {
            *p += c;
        }
        psi
    }
}

/// Probability that `sample` is classified as genuine: `logistic(zᵀγ + C)`.
pub fn classifier_prob(gamma: &GammaVector, sample: &LabeledSample) -> f64 {
    let g = gamma.to_dvector();
    logistic(sample.psi(g.as_slice()))
}

/// `Σ_i [s_i ψ_i − log(1 + e^{ψ_i})]`.
pub fn log_classification_likelihood(gamma: &GammaVector, samples: &LabeledSet) -> f64 {
    log_likelihood_at(&gamma.to_dvector(), samples)
}

pub(crate) fn log_likelihood_at(gamma: &DVector<f64>, samples: &LabeledSet) -> f64 {
    samples
        .linear_predictor(gamma)
        .iter()
        .enumerate()
        .map(|(i, &psi)| if samples.label(i) { psi } else { 0.0 } - softplus(psi))
        .sum()
}

/// Log likelihood of an explicit list of labeled samples.
pub fn log_classification_likelihood_of(gamma: &GammaVector, samples: &[LabeledSample]) -> f64 {
    let g = gamma.to_dvector();
    samples
        .iter()
        .map(|s| {
            let psi = s.psi(g.as_slice());
            let label = if s.s { psi } else { 0.0 };
            label - softplus(psi)
        })
        .sum()
}

/// Gradient `Σ_i (s_i − r(ψ_i)) z_i`.
pub fn log_likelihood_gradient(gamma: &GammaVector, samples: &LabeledSet) -> DVector<f64> {
    let psi = samples.linear_predictor(&gamma.to_dvector());
    let resid = DVector::from_iterator(
        samples.len(),
        psi.iter().enumerate().map(|(i, &p)| f64::from(u8::from(samples.label(i))) - logistic(p)),
    );
    samples.design() * resid
}

/// Hessian `−Σ_i r(ψ_i)(1 − r(ψ_i)) z_i z_iᵀ`.
pub fn log_likelihood_hessian(gamma: &GammaVector, samples: &LabeledSet) -> DMatrix<f64> {
    let psi = samples.linear_predictor(&gamma.to_dvector());
    let mut weighted = samples.design().clone();
    for (i, &p) in psi.iter().enumerate() {
        let r = logistic(p);
        weighted.column_mut(i).scale_mut((r * (1.0 - r)).sqrt());
    }
    -(&weighted * weighted.transpose())
}
