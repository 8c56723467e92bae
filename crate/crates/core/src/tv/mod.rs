//! Time-varying density estimation with a radial basis, a random-walk prior
//! over time and noise-contrastive Pólya–Gamma Gibbs sampling.

pub mod basis;
pub mod density;
pub mod sampler;
pub mod scenarios;

pub use basis::{kmeans_knots, median_knot_distance, RbfBasis};
pub use density::{abe, interval_metrics, kde_baseline, BandwidthRule, DensityGrid, KernelDensity};
pub use sampler::{lambda_conditional, random_walk_prior, run_tv_gibbs, TvDraws, TvNoiseUpdate, TvPriors};
pub use scenarios::{read_incidents, scenario1_generate, scenario2_generate, GeoBounds, IncidentData, Scenario, TimeSeriesData};

use crate::error::{Error, Result};
use crate::expfam::{build_labeled, Domain, NoiseDistribution, UniformNoise};
use crate::gibbs::GibbsConfig;
use crate::rng::{derive_seed, RandomStream};
use crate::stats::{quantile_sorted, sort_floats};
use serde::{Deserialize, Serialize};

/// How noise points are drawn for each time point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TvNoise {
    /// Uniform on the pooled data box, shared by all times.
    #[default]
    Common,
    /// Uniform on each time's own data box.
    PerTime,
    /// Tempered resampling from the running fit.
    Adaptive,
}

impl TvNoise {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "n1" | "common" => Ok(TvNoise::Common),
            "n2" | "per-time" => Ok(TvNoise::PerTime),
            "adaptive" | "an" => Ok(TvNoise::Adaptive),
            _ => Err(Error::InvalidParameter(format!("unknown noise mode '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TvFitConfig {
    pub basis_count: usize,
    /// RBF bandwidth; the median knot distance when absent.
    pub bandwidth: Option<f64>,
    pub priors: TvPriors,
    pub noise: TvNoise,
    /// Noise points per time; the genuine count of that time when absent.
    pub noise_count: Option<usize>,
    /// Redraw the uniform noise sets every iteration.
    pub refresh: bool,
    pub gibbs: GibbsConfig,
}

impl Default for TvFitConfig {
    fn default() -> Self {
        Self {
            basis_count: 30,
            bandwidth: None,
            priors: TvPriors::default(),
            noise: TvNoise::Common,
            noise_count: None,
            refresh: false,
            gibbs: GibbsConfig { iterations: 5000, burn_in: 2000, ..GibbsConfig::default() },
        }
    }
}

#[derive(Debug, Clone)]
pub struct TvFit {
    pub basis: RbfBasis,
    /// Pooled data range, the region the estimates are judged on.
    pub domain: Domain,
    pub draws: TvDraws,
}

/// Fits the model to per-time 2-D samples.
pub fn fit_tv_density(data: &TimeSeriesData, cfg: &TvFitConfig) -> Result<TvFit> {
    if data.is_empty() || data.iter().any(Vec::is_empty) {
        return Err(Error::Precondition("every time point needs observations".into()));
    }
    let pooled: Vec<Vec<f64>> = data.iter().flatten().cloned().collect();
    let domain = Domain::bounding_box(&pooled, 0.0)?;
    let outer = Domain::bounding_box(&pooled, 0.1)?;
    let knots = kmeans_knots(&pooled, cfg.basis_count, derive_seed(cfg.gibbs.seed, 0x4B))?;
    let h = cfg.bandwidth.unwrap_or_else(|| median_knot_distance(&knots));
    let basis = RbfBasis::new(knots, h, outer.clone())?;

    let mut rng = RandomStream::new(derive_seed(cfg.gibbs.seed, 0x7E));
    let common = UniformNoise::new(domain.clone());
    let base = UniformNoise::new(outer);
    let own: Vec<UniformNoise> = match cfg.noise {
        TvNoise::PerTime => data.iter().map(|xt| Domain::bounding_box(xt, 0.0).map(UniformNoise::new)).collect::<Result<_>>()?,
        _ => Vec::new(),
    };
    let laws: Vec<&dyn NoiseDistribution> = (0..data.len())
        .map(|t| -> &dyn NoiseDistribution {
            match cfg.noise {
                TvNoise::Common => &common,
                TvNoise::PerTime => &own[t],
                TvNoise::Adaptive => &base,
            }
        })
        .collect();
    let mut sets = Vec::with_capacity(data.len());
    for (xt, law) in data.iter().zip(&laws) {
        let noise = law.sample(cfg.noise_count.unwrap_or(xt.len()), &mut rng);
        sets.push(build_labeled(xt, &noise, &basis, *law)?);
    }
    let update = match cfg.noise {
        TvNoise::Adaptive => TvNoiseUpdate::Adaptive { base: &base },
        _ if cfg.refresh => TvNoiseUpdate::Refresh(laws),
        _ => TvNoiseUpdate::Fixed,
    };
    let draws = run_tv_gibbs(&basis, &mut sets, &cfg.priors, update, &cfg.gibbs)?;
    Ok(TvFit { basis, domain, draws })
}

impl TvFit {
    /// Per-draw densities at time `t` (0-based), each renormalized so that
    /// `Σ f · weight = 1`.
    pub fn density_draws(&self, t: usize, points: &[Vec<f64>], weight: f64) -> Vec<Vec<f64>> {
        let phi: Vec<Vec<f64>> = points.iter().map(|x| self.basis.rbf_design(x)).collect();
        (0..self.draws.kept())
            .map(|r| {
                let theta = self.draws.theta_at(r, t);
                let beta = self.draws.beta[(r, t)];
                let logf: Vec<f64> = phi.iter().map(|p| p.iter().zip(&theta).map(|(a, b)| a * b).sum::<f64>() + beta).collect();
                // Shift before exponentiating; the renormalization absorbs it.
                let top = logf.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let mut f: Vec<f64> = logf.iter().map(|v| (v - top).exp()).collect();
                let mass: f64 = f.iter().sum::<f64>() * weight;
                f.iter_mut().for_each(|v| *v /= mass);
                f
            })
            .collect()
    }

    /// Posterior mean of `exp(Φθ_t + β_t)` renormalized over the points,
    /// with pointwise equal-tailed bounds at `level`.
    pub fn density_grid(&self, points: &[Vec<f64>], weight: f64, level: f64) -> DensityGrid {
        let phi: Vec<Vec<f64>> = points.iter().map(|x| self.basis.rbf_design(x)).collect();
        let mut grid = DensityGrid::new(points.to_vec(), weight, Vec::new());
        let (mut lower, mut upper) = (Vec::new(), Vec::new());
        let a = 0.5 * (1.0 - level);
        for t in 0..self.draws.times {
            let mut mean = vec![0.0; points.len()];
            for r in 0..self.draws.kept() {
                let theta = self.draws.theta_at(r, t);
                let beta = self.draws.beta[(r, t)];
                for (m, p) in mean.iter_mut().zip(&phi) {
                    *m += (p.iter().zip(&theta).map(|(a, b)| a * b).sum::<f64>() + beta).exp();
                }
            }
            let mass: f64 = mean.iter().sum::<f64>() * weight;
            grid.values.push(mean.iter().map(|v| v / mass).collect());
            let per_draw = self.density_draws(t, points, weight);
            let (mut lo, mut hi) = (Vec::new(), Vec::new());
            let mut col = Vec::with_capacity(per_draw.len());
            for i in 0..points.len() {
                col.clear();
                col.extend(per_draw.iter().map(|d| d[i]));
                sort_floats(&mut col);
                lo.push(quantile_sorted(&col, a));
                hi.push(quantile_sorted(&col, 1.0 - a));
            }
            lower.push(lo);
            upper.push(hi);
        }
        grid.lower = Some(lower);
        grid.upper = Some(upper);
        grid
    }
}

/// Accuracy of one synthetic replication.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TvReplication {
    pub abe_model: f64,
    pub abe_kde: f64,
    /// Coverage of pointwise 95% intervals, in percent.
    pub coverage: f64,
    pub interval_length: f64,
}

/// Simulates, fits and scores one replication on `eval_count` uniform
/// points over the pooled data range.
pub fn tv_replication(
    scenario: Scenario,
    times: usize,
    per_time: usize,
    eval_count: usize,
    cfg: &TvFitConfig,
) -> Result<TvReplication> {
    let seed = cfg.gibbs.seed;
    let data = scenario.generate(times, per_time, derive_seed(seed, 0xDA7A))?;
    let fit = fit_tv_density(&data, cfg)?;
    let mut rng = RandomStream::new(derive_seed(seed, 0xE7A1));
    let (points, weight) = DensityGrid::monte_carlo_points(&fit.domain, eval_count, &mut rng);
    let truth = DensityGrid::new(
        points.clone(),
        weight,
        (1..=times).map(|t| points.iter().map(|x| scenario.density(t, times, x)).collect()).collect(),
    );
    let estimate = fit.density_grid(&points, weight, 0.95);
    let mut kde_values = Vec::with_capacity(times);
    for xt in &data {
        let k = kde_baseline(xt, &BandwidthRule::Silverman)?;
        kde_values.push(points.iter().map(|x| k.density(x)).collect());
    }
    let kde = DensityGrid::new(points.clone(), weight, kde_values);
    let draws: Vec<Vec<Vec<f64>>> = (0..times).map(|t| fit.density_draws(t, &points, weight)).collect();
    let (coverage, interval_length) = interval_metrics(&draws, &truth, 0.95)?;
    Ok(TvReplication { abe_model: abe(&estimate, &truth)?, abe_kde: abe(&kde, &truth)?, coverage, interval_length })
}
