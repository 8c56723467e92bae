//! Radial basis expansion with k-means knots.

use crate::error::{Error, Result};
use crate::expfam::{Domain, ExpFamModel};
use crate::rng::RandomStream;
use crate::stats::median;
use rand::Rng;

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum()
}

/// Lloyd's algorithm from a k-means++ start. Errors when the data holds
/// fewer than `k` distinct points.
pub fn kmeans_knots(points: &[Vec<f64>], k: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    if k == 0 {
        return Err(Error::InvalidParameter("cluster count must be positive".into()));
    }
    let mut distinct: Vec<&Vec<f64>> = Vec::new();
    for p in points {
        if !distinct.iter().any(|q| *q == p) {
            distinct.push(p);
            if distinct.len() >= k {
                break;
            }
        }
    }
    if distinct.len() < k {
        return Err(Error::Precondition(format!("{} distinct points cannot support {k} clusters", distinct.len())));
    }
    let mut rng = RandomStream::new(seed);
    let mut centers = vec![points[rng.random_range(0..points.len())].clone()];
    let mut nearest: Vec<f64> = points.iter().map(|p| sq_dist(p, &centers[0])).collect();
    while centers.len() < k {
        let total: f64 = nearest.iter().sum();
        let mut u = rng.random::<f64>() * total;
        let mut pick = nearest.iter().rposition(|&d| d > 0.0).unwrap_or(0);
        for (i, &d) in nearest.iter().enumerate() {
            if d > 0.0 && u < d {
                pick = i;
                break;
            }
            u -= d;
        }
        centers.push(points[pick].clone());
        for (d, p) in nearest.iter_mut().zip(points) {
            *d = d.min(sq_dist(p, &centers[centers.len() - 1]));
        }
    }
    let dim = points[0].len();
    let mut assign = vec![usize::MAX; points.len()];
    for _ in 0..300 {
        let mut changed = false;
        for (i, p) in points.iter().enumerate() {
            let best = (0..k)
                .min_by(|&a, &b| sq_dist(p, &centers[a]).total_cmp(&sq_dist(p, &centers[b])))
                .unwrap_or(0);
            if assign[i] != best {
                assign[i] = best;
                changed = true;
            }
        }
        if !changed {
            break;
        }
        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (p, &a) in points.iter().zip(&assign) {
            counts[a] += 1;
            for (s, v) in sums[a].iter_mut().zip(p) {
                *s += v;
            }
        }
        for c in 0..k {
            // Empty clusters keep their previous center.
            if counts[c] > 0 {
                centers[c] = sums[c].iter().map(|s| s / counts[c] as f64).collect();
            }
        }
    }
    Ok(centers)
}

/// Median of all pairwise distances between knots; 1 for a single knot.
pub fn median_knot_distance(knots: &[Vec<f64>]) -> f64 {
    let mut d = Vec::new();
    for i in 0..knots.len() {
        for j in i + 1..knots.len() {
            d.push(sq_dist(&knots[i], &knots[j]).sqrt());
        }
    }
    if d.is_empty() { 1.0 } else { median(&d) }
}

/// Basis `x ↦ (exp(−‖x − κ_l‖ / h))_l` restricted to a rectangle.
#[derive(Debug, Clone, PartialEq)]
pub struct RbfBasis {
    pub knots: Vec<Vec<f64>>,
    pub bandwidth: f64,
    domain: Domain,
}

impl RbfBasis {
    pub fn new(knots: Vec<Vec<f64>>, bandwidth: f64, domain: Domain) -> Result<Self> {
        if knots.is_empty() {
            return Err(Error::InvalidParameter("at least one knot is required".into()));
        }
        if !(bandwidth > 0.0 && bandwidth.is_finite()) {
            return Err(Error::InvalidParameter(format!("bandwidth must be positive, got {bandwidth}")));
        }
        if knots.iter().any(|k| k.len() != domain.dim()) {
            return Err(Error::InvalidParameter("knot dimension differs from the domain".into()));
        }
        Ok(Self { knots, bandwidth, domain })
    }

    pub fn len(&self) -> usize {
        self.knots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.knots.is_empty()
    }

    pub fn rbf_design(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.len()];
        self.fill(x, &mut out);
        out
    }

    fn fill(&self, x: &[f64], out: &mut [f64]) {
        for (o, k) in out.iter_mut().zip(&self.knots) {
            *o = (-sq_dist(x, k).sqrt() / self.bandwidth).exp();
        }
    }
}

impl ExpFamModel for RbfBasis {
    fn dim(&self) -> usize {
        self.len()
    }

    fn domain(&self) -> &Domain {
        &self.domain
    }

    fn suff_stat_into(&self, x: &[f64], out: &mut [f64]) {
        self.fill(x, out);
    }
}
