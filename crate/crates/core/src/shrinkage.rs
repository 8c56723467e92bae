//! Horseshoe-type shrinkage priors for the natural parameters.
//!
//! Half-Cauchy scales are written as inverse-gamma mixtures, so every
//! hyperparameter has a closed-form conditional. Coefficients are either
//! shrunk individually (local scale `λ_k`) or in groups sharing one scale
//! `u_g`; all share a global scale `τ`. Remaining coordinates, such as the
//! log-normalizer, keep a fixed Gaussian prior.

use crate::dist::sample_inverse_gamma;
use crate::error::{Error, Result};
use crate::gibbs::{ConditionalPrior, PriorPrecision};
use crate::rng::RandomStream;
use nalgebra::DVector;
use serde::{Deserialize, Serialize};

/// Prior family for the torus-graph coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PriorMode {
    /// Fixed independent Gaussians.
    Gaussian,
    /// One local scale per coefficient.
    Horseshoe,
    /// Local scales for node terms, one scale per edge group.
    Grouped,
    /// Grouped with a finite slab width.
    RegularizedGrouped,
}

impl PriorMode {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "gaussian" => Ok(Self::Gaussian),
            "hs" | "horseshoe" => Ok(Self::Horseshoe),
            "ghs" | "grouped" => Ok(Self::Grouped),
            "rghs" | "regularized-grouped" => Ok(Self::RegularizedGrouped),
            other => Err(Error::InvalidParameter(format!("unknown prior mode `{other}`"))),
        }
    }
}

/// Which coordinates of the parameter vector are shrunk and how.
#[derive(Debug, Clone, PartialEq)]
pub struct ShrinkageLayout {
    pub dim: usize,
    /// Coordinates with their own local scale.
    pub local: Vec<usize>,
    /// Coordinate groups sharing one scale.
    pub groups: Vec<Vec<usize>>,
    /// Coordinates with a fixed `N(0, variance)` prior.
    pub fixed: Vec<(usize, f64)>,
}

impl ShrinkageLayout {
    /// Torus-graph layout on `d` nodes: `2d` node terms, four terms per edge
    /// for `d(d−1)/2` edges, then the log-normalizer with variance
    /// `beta_var`. With `grouped` each edge's four terms share one scale.
    pub fn torus(d: usize, grouped: bool, beta_var: f64) -> Self {
        let nodes = 2 * d;
        let edges = d * (d - 1) / 2;
        let dim = nodes + 4 * edges + 1;
        let (local, groups) = if grouped {
            ((0..nodes).collect(), (0..edges).map(|e| (nodes + 4 * e..nodes + 4 * e + 4).collect()).collect())
        } else {
            ((0..nodes + 4 * edges).collect(), Vec::new())
        };
        Self { dim, local, groups, fixed: vec![(dim - 1, beta_var)] }
    }

    /// Torus layout over the `2d²` coefficients alone, with no
    /// log-normalizer coordinate.
    pub fn torus_coefficients(d: usize, grouped: bool) -> Self {
        let mut layout = Self::torus(d, grouped, 1.0);
        layout.dim -= 1;
        layout.fixed.clear();
        layout
    }

    /// Number of shrunk coefficients.
    pub fn shrunk_count(&self) -> usize {
        self.local.len() + self.groups.iter().map(Vec::len).sum::<usize>()
    }
}

/// Local, group, and global variances with their auxiliaries.
#[derive(Debug, Clone, PartialEq)]
pub struct HorseshoeState {
    pub lambda2: Vec<f64>,
    pub nu: Vec<f64>,
    pub u2: Vec<f64>,
    pub t: Vec<f64>,
    pub tau2: f64,
    pub xi: f64,
    /// Slab width; `None` means unregularized.
    pub slab_c: Option<f64>,
    pub tau_fixed: bool,
}

impl HorseshoeState {
    /// All scales and auxiliaries start at one.
    pub fn new(layout: &ShrinkageLayout, slab_c: Option<f64>) -> Result<Self> {
        if let Some(c) = slab_c {
            if !(c > 0.0) {
                return Err(Error::InvalidParameter(format!("slab width must be positive, got {c}")));
            }
        }
        Ok(Self {
            lambda2: vec![1.0; layout.local.len()],
            nu: vec![1.0; layout.local.len()],
            u2: vec![1.0; layout.groups.len()],
            t: vec![1.0; layout.groups.len()],
            tau2: 1.0,
            xi: 1.0,
            slab_c,
            tau_fixed: false,
        })
    }

    /// Freezes the global scale at `tau`.
    pub fn with_fixed_tau(mut self, tau: f64) -> Result<Self> {
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(Error::InvalidParameter(format!("fixed tau must be positive, got {tau}")));
        }
        self.tau2 = tau * tau;
        self.tau_fixed = true;
        Ok(self)
    }
}

fn check_finite(phi: &[f64]) -> Result<()> {
    if phi.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter("non-finite coefficient in shrinkage update".into()));
    }
    Ok(())
}

/// `λ²_k | · ~ IG(1, φ_k²/(2τ²) + 1/ν_k)` then `ν_k | · ~ IG(1, 1 + 1/λ²_k)`.
pub fn update_local(state: &mut HorseshoeState, layout: &ShrinkageLayout, phi: &[f64], rng: &mut RandomStream) -> Result<()> {
    check_finite(phi)?;
    for (k, &idx) in layout.local.iter().enumerate() {
        let f = phi[idx];
        state.lambda2[k] = sample_inverse_gamma(1.0, f * f / (2.0 * state.tau2) + 1.0 / state.nu[k], rng)?;
        state.nu[k] = sample_inverse_gamma(1.0, 1.0 + 1.0 / state.lambda2[k], rng)?;
    }
    Ok(())
}

/// `u²_g | · ~ IG((|g|+1)/2, ½Σφ²/τ² + 1/t_g)` then `t_g | · ~ IG(1, 1 + 1/u²_g)`.
/// For the four-term edge groups the shape is 5/2.
pub fn update_group(state: &mut HorseshoeState, layout: &ShrinkageLayout, phi: &[f64], rng: &mut RandomStream) -> Result<()> {
    check_finite(phi)?;
    for (g, members) in layout.groups.iter().enumerate() {
        let ss: f64 = members.iter().map(|&i| phi[i] * phi[i]).sum();
        let shape = 0.5 * (members.len() as f64 + 1.0);
        state.u2[g] = sample_inverse_gamma(shape, 0.5 * ss / state.tau2 + 1.0 / state.t[g], rng)?;
        state.t[g] = sample_inverse_gamma(1.0, 1.0 + 1.0 / state.u2[g], rng)?;
    }
    Ok(())
}

/// `τ² | · ~ IG((N+1)/2, ½(Σφ²/λ² + Σφ²/u²) + 1/ξ)` over all `N` shrunk
/// coefficients, then `ξ | · ~ IG(1, 1 + 1/τ²)`. No-op when τ is fixed.
pub fn update_global(state: &mut HorseshoeState, layout: &ShrinkageLayout, phi: &[f64], rng: &mut RandomStream) -> Result<()> {
    if state.tau_fixed {
        return Ok(());
    }
    check_finite(phi)?;
    let mut ss = 0.0;
    for (k, &idx) in layout.local.iter().enumerate() {
        ss += phi[idx] * phi[idx] / state.lambda2[k];
    }
    for (g, members) in layout.groups.iter().enumerate() {
        ss += members.iter().map(|&i| phi[i] * phi[i]).sum::<f64>() / state.u2[g];
    }
    let shape = 0.5 * (layout.shrunk_count() as f64 + 1.0);
    state.tau2 = sample_inverse_gamma(shape, 0.5 * ss + 1.0 / state.xi, rng)?;
    state.xi = sample_inverse_gamma(1.0, 1.0 + 1.0 / state.tau2, rng)?;
    Ok(())
}

/// Diagonal prior precision: `1/(λ²τ²)` or `1/(u²τ²)` for shrunk terms,
/// plus `1/c²` when a slab is set, and `1/variance` for fixed coordinates.
/// The prior mean is zero.
pub fn prior_precision(state: &HorseshoeState, layout: &ShrinkageLayout) -> DVector<f64> {
    let slab = state.slab_c.map_or(0.0, |c| 1.0 / (c * c));
    let mut prec = DVector::zeros(layout.dim);
    for (k, &idx) in layout.local.iter().enumerate() {
        prec[idx] = slab + 1.0 / (state.lambda2[k] * state.tau2);
    }
    for (g, members) in layout.groups.iter().enumerate() {
        let v = slab + 1.0 / (state.u2[g] * state.tau2);
        for &i in members {
            prec[i] = v;
        }
    }
    for &(i, var) in &layout.fixed {
        prec[i] = 1.0 / var;
    }
    prec
}

/// Global scale fixed from the expected share of nonzero coefficients:
/// `τ = p0 / (√(n+m)·(2d² − p0))` with `p0 = ⌊1.7d² + 0.5⌋`.
pub fn fixed_tau_value(d: usize, n: usize, m: usize) -> Result<f64> {
    if d == 0 || n == 0 || m == 0 {
        return Err(Error::InvalidParameter("node, genuine, and noise counts must be positive".into()));
    }
    let d2 = (d * d) as f64;
    let p0 = (1.7 * d2 + 0.5).floor();
    let total = 2.0 * d2;
    if p0 >= total {
        return Err(Error::InvalidParameter(format!("expected signal count {p0} leaves no null coefficients for d = {d}")));
    }
    Ok(p0 / (((n + m) as f64).sqrt() * (total - p0)))
}

/// Shrinkage prior that refreshes its hyperparameters after each `γ` draw.
#[derive(Debug, Clone)]
pub struct ShrinkagePrior {
    pub layout: ShrinkageLayout,
    pub state: HorseshoeState,
    precision: PriorPrecision,
}

impl ShrinkagePrior {
    pub fn new(layout: ShrinkageLayout, state: HorseshoeState) -> Self {
        let precision = PriorPrecision::Diagonal {
            precision: prior_precision(&state, &layout),
            shift: DVector::zeros(layout.dim),
        };
        Self { layout, state, precision }
    }

    /// One hyperparameter sweep: local, group, then global.
    pub fn update_hyper(&mut self, phi: &[f64], rng: &mut RandomStream) -> Result<()> {
        update_local(&mut self.state, &self.layout, phi, rng)?;
        update_group(&mut self.state, &self.layout, phi, rng)?;
        update_global(&mut self.state, &self.layout, phi, rng)?;
        if let PriorPrecision::Diagonal { precision, .. } = &mut self.precision {
            *precision = prior_precision(&self.state, &self.layout);
        }
        Ok(())
    }

    pub fn precision_vector(&self) -> &DVector<f64> {
        match &self.precision {
            PriorPrecision::Diagonal { precision, .. } => precision,
            PriorPrecision::Dense { .. } => unreachable!("shrinkage precision is diagonal"),
        }
    }
}

impl ConditionalPrior for ShrinkagePrior {
    fn dim(&self) -> usize {
        self.layout.dim
    }

    fn precision(&self) -> &PriorPrecision {
        &self.precision
    }

    fn initial_value(&self) -> DVector<f64> {
        DVector::zeros(self.layout.dim)
    }

    fn update(&mut self, gamma: &DVector<f64>, rng: &mut RandomStream) -> Result<()> {
        self.update_hyper(gamma.as_slice(), rng)
    }

    fn trace(&self) -> Vec<f64> {
        vec![self.state.tau2]
    }
}
