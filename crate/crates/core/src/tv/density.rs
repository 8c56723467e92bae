//! Density grids, the kernel baseline and accuracy metrics.

use crate::error::{Error, Result};
use crate::expfam::Domain;
use crate::rng::RandomStream;
use crate::stats::{equal_tailed_interval, variance};
use std::f64::consts::PI;
use std::io::Write;
use std::path::Path;

/// Density values at evaluation points, each point standing for `weight`
/// units of area.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityGrid {
    pub points: Vec<Vec<f64>>,
    pub weight: f64,
    /// Point estimate per time, one value per point.
    pub values: Vec<Vec<f64>>,
    /// Pointwise credible bounds, when available.
    pub lower: Option<Vec<Vec<f64>>>,
    pub upper: Option<Vec<Vec<f64>>>,
}

impl DensityGrid {
    /// `count` uniform points on a rectangle; each carries `|D| / count`.
    pub fn monte_carlo_points(domain: &Domain, count: usize, rng: &mut RandomStream) -> (Vec<Vec<f64>>, f64) {
        let pts = (0..count).map(|_| domain.sample_uniform(rng)).collect();
        (pts, domain.volume() / count as f64)
    }

    /// Cell centers of a `nx × ny` grid over a 2-D rectangle.
    pub fn regular_points(domain: &Domain, nx: usize, ny: usize) -> Result<(Vec<Vec<f64>>, f64)> {
        let Domain::Rectangle { lower, upper } = domain else {
            return Err(Error::InvalidParameter("regular grids need a rectangle".into()));
        };
        if lower.len() != 2 || nx == 0 || ny == 0 {
            return Err(Error::InvalidParameter("regular grids are two-dimensional and non-empty".into()));
        }
        let (dx, dy) = ((upper[0] - lower[0]) / nx as f64, (upper[1] - lower[1]) / ny as f64);
        let mut pts = Vec::with_capacity(nx * ny);
        for i in 0..nx {
            for j in 0..ny {
                pts.push(vec![lower[0] + (i as f64 + 0.5) * dx, lower[1] + (j as f64 + 0.5) * dy]);
            }
        }
        Ok((pts, dx * dy))
    }

    pub fn new(points: Vec<Vec<f64>>, weight: f64, values: Vec<Vec<f64>>) -> Self {
        Self { points, weight, values, lower: None, upper: None }
    }

    pub fn times(&self) -> usize {
        self.values.len()
    }

    /// Scales every time slice, and its bounds, so that `Σ value · weight = 1`.
    pub fn renormalize(&mut self) {
        for t in 0..self.values.len() {
            let mass: f64 = self.values[t].iter().sum::<f64>() * self.weight;
            if mass > 0.0 {
                self.values[t].iter_mut().for_each(|v| *v /= mass);
                for bounds in [&mut self.lower, &mut self.upper].into_iter().flatten() {
                    bounds[t].iter_mut().for_each(|v| *v /= mass);
                }
            }
        }
    }

    /// Discretized integral of each time slice.
    pub fn masses(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.iter().sum::<f64>() * self.weight).collect()
    }

    /// Writes rows `t,x,y,mean,lo,hi` (1-based `t`; bounds blank when absent).
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["t", "x", "y", "mean", "lo", "hi"])?;
        for t in 0..self.times() {
            for (i, p) in self.points.iter().enumerate() {
                let bound = |b: &Option<Vec<Vec<f64>>>| b.as_ref().map(|b| b[t][i].to_string()).unwrap_or_default();
                w.write_record([
                    (t + 1).to_string(),
                    p[0].to_string(),
                    p.get(1).copied().unwrap_or(0.0).to_string(),
                    self.values[t][i].to_string(),
                    bound(&self.lower),
                    bound(&self.upper),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)
    }
}

/// Product-Gaussian kernel estimate with fixed per-coordinate bandwidths.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelDensity {
    pub data: Vec<Vec<f64>>,
    pub bandwidths: Vec<f64>,
}

/// Bandwidth rules for [`kde_baseline`].
#[derive(Debug, Clone, PartialEq)]
pub enum BandwidthRule {
    /// `σ_k (4 / ((d + 2) n))^{1/(d+4)}` per coordinate; falls back to
    /// `σ_k = 1` for fewer than two points or a constant coordinate.
    Silverman,
    Fixed(Vec<f64>),
}

pub fn kde_baseline(data: &[Vec<f64>], rule: &BandwidthRule) -> Result<KernelDensity> {
    let first = data.first().ok_or_else(|| Error::Precondition("kernel estimate of an empty sample".into()))?;
    let d = first.len();
    let bandwidths = match rule {
        BandwidthRule::Fixed(h) if h.len() == d && h.iter().all(|v| *v > 0.0) => h.clone(),
        BandwidthRule::Fixed(_) => return Err(Error::InvalidParameter("one positive bandwidth per coordinate".into())),
        BandwidthRule::Silverman => {
            let n = data.len() as f64;
            let factor = (4.0 / ((d as f64 + 2.0) * n)).powf(1.0 / (d as f64 + 4.0));
            (0..d)
                .map(|k| {
                    let col: Vec<f64> = data.iter().map(|x| x[k]).collect();
                    let sd = if data.len() > 1 { variance(&col).sqrt() } else { 0.0 };
                    factor * if sd > 0.0 { sd } else { 1.0 }
                })
                .collect()
        }
    };
    Ok(KernelDensity { data: data.to_vec(), bandwidths })
}

impl KernelDensity {
    pub fn density(&self, x: &[f64]) -> f64 {
        let norm: f64 = self.bandwidths.iter().map(|h| h * (2.0 * PI).sqrt()).product();
        let total: f64 = self
            .data
            .iter()
            .map(|p| {
                let e: f64 = p.iter().zip(x).zip(&self.bandwidths).map(|((a, b), h)| ((a - b) / h).powi(2)).sum();
                (-0.5 * e).exp()
            })
            .sum();
        total / (norm * self.data.len() as f64)
    }
}

/// `T⁻¹ Σ_t Σ_i |f̂_t − f_t| · weight` after renormalizing both grids.
pub fn abe(estimate: &DensityGrid, truth: &DensityGrid) -> Result<f64> {
    check_shapes(estimate, truth)?;
    let (mut est, mut tru) = (estimate.clone(), truth.clone());
    est.renormalize();
    tru.renormalize();
    let total: f64 = (0..est.times())
        .map(|t| est.values[t].iter().zip(&tru.values[t]).map(|(a, b)| (a - b).abs()).sum::<f64>() * est.weight)
        .sum();
    Ok(total / est.times() as f64)
}

fn check_shapes(a: &DensityGrid, b: &DensityGrid) -> Result<()> {
    if a.times() != b.times() || a.points.len() != b.points.len() {
        return Err(Error::Precondition("density grids differ in shape".into()));
    }
    Ok(())
}

/// Coverage (percent) and average length of pointwise equal-tailed
/// intervals. `draws[t]` holds one renormalized density vector per draw;
/// `truth` is renormalized here.
pub fn interval_metrics(draws: &[Vec<Vec<f64>>], truth: &DensityGrid, level: f64) -> Result<(f64, f64)> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidParameter(format!("level must lie in (0, 1), got {level}")));
    }
    if draws.len() != truth.times() {
        return Err(Error::Precondition("draws and truth cover different times".into()));
    }
    let mut tru = truth.clone();
    tru.renormalize();
    let (mut covered, mut length, mut count) = (0usize, 0.0, 0usize);
    let mut column = Vec::new();
    for (t, per_draw) in draws.iter().enumerate() {
        if per_draw.is_empty() {
            return Err(Error::Precondition("no draws".into()));
        }
        for (i, &f) in tru.values[t].iter().enumerate() {
            column.clear();
            column.extend(per_draw.iter().map(|d| d[i]));
            let (lo, hi) = equal_tailed_interval(&column, level);
            covered += usize::from(lo <= f && f <= hi);
            length += hi - lo;
            count += 1;
        }
    }
    Ok((100.0 * covered as f64 / count as f64, length / count as f64))
}
