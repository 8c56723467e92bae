//! Edge decisions from posterior draws and recovery metrics.

use super::model::{coefficient_count, edge_count, edge_list, edge_offset};
use crate::error::{Error, Result};
use crate::stats::{equal_tailed_interval, median};
use nalgebra::DMatrix;
use serde::Serialize;

/// How an edge is declared present.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "rule", content = "value", rename_all = "kebab-case")]
pub enum EdgeRule {
    /// Some `|median|` strictly exceeds the threshold.
    MedianThreshold(f64),
    /// Some equal-tailed credible interval at this level excludes zero.
    CredibleLevel(f64),
}

/// Per-edge outcome of a detection rule.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EdgeDecisionReport {
    pub rule: EdgeRule,
    /// Zero-based node pairs in flattening order.
    pub edges: Vec<(usize, usize)>,
    pub decisions: Vec<bool>,
    /// `Σ_l |median(φ_jk(l))|`.
    pub strengths: Vec<f64>,
}

impl EdgeDecisionReport {
    pub fn detected(&self) -> usize {
        self.decisions.iter().filter(|d| **d).count()
    }
}

fn check_draws(draws: &DMatrix<f64>, d: usize) -> Result<()> {
    if draws.nrows() == 0 {
        return Err(Error::Precondition("no posterior draws".into()));
    }
    if draws.ncols() < coefficient_count(d) {
        return Err(Error::Precondition(format!(
            "draws have {} columns, need at least {} for {d} nodes",
            draws.ncols(),
            coefficient_count(d)
        )));
    }
    Ok(())
}

fn column(draws: &DMatrix<f64>, k: usize) -> Vec<f64> {
    draws.column(k).iter().copied().collect()
}

fn edge_medians(draws: &DMatrix<f64>, d: usize) -> Vec<[f64; 4]> {
    (0..edge_count(d))
        .map(|e| {
            let o = edge_offset(d, e);
            std::array::from_fn(|l| median(&column(draws, o + l)))
        })
        .collect()
}

/// Median rule on draws whose first `2d²` columns are the coefficients.
pub fn detect_edges_median(draws: &DMatrix<f64>, d: usize, threshold: f64) -> Result<EdgeDecisionReport> {
    if !(threshold > 0.0) {
        return Err(Error::InvalidParameter(format!("threshold must be positive, got {threshold}")));
    }
    check_draws(draws, d)?;
    let medians = edge_medians(draws, d);
    Ok(EdgeDecisionReport {
        rule: EdgeRule::MedianThreshold(threshold),
        edges: edge_list(d),
        decisions: medians.iter().map(|m| m.iter().any(|v| v.abs() > threshold)).collect(),
        strengths: medians.iter().map(|m| m.iter().map(|v| v.abs()).sum()).collect(),
    })
}

/// Credible-interval rule at `level`.
pub fn detect_edges_ci(draws: &DMatrix<f64>, d: usize, level: f64) -> Result<EdgeDecisionReport> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidParameter(format!("level must lie in (0, 1), got {level}")));
    }
    check_draws(draws, d)?;
    let decisions = (0..edge_count(d))
        .map(|e| {
            let o = edge_offset(d, e);
            (0..4).any(|l| {
                let (lo, hi) = equal_tailed_interval(&column(draws, o + l), level);
                lo > 0.0 || hi < 0.0
            })
        })
        .collect();
    let strengths = edge_medians(draws, d).iter().map(|m| m.iter().map(|v| v.abs()).sum()).collect();
    Ok(EdgeDecisionReport { rule: EdgeRule::CredibleLevel(level), edges: edge_list(d), decisions, strengths })
}

/// Recovery metrics; a true edge is a positive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GraphMetrics {
    /// Missing when there are no true edges.
    pub recall: Option<f64>,
    /// Missing when nothing was detected.
    pub precision: Option<f64>,
    pub accuracy: f64,
    /// Percent of the `2d²` coefficients whose interval covers the truth.
    pub cp_phi: f64,
}

/// Confusion-matrix metrics plus coefficient coverage at `level`.
pub fn graph_metrics(
    report: &EdgeDecisionReport,
    true_edges: &[bool],
    draws: &DMatrix<f64>,
    true_phi: &[f64],
    level: f64,
) -> Result<GraphMetrics> {
    if true_edges.len() != report.decisions.len() {
        return Err(Error::Precondition("truth and decisions cover different edge sets".into()));
    }
    let p = true_phi.len();
    if draws.ncols() < p {
        return Err(Error::Precondition("draws have fewer columns than the true coefficients".into()));
    }
    let (mut tp, mut fp, mut tn, mut fneg) = (0usize, 0usize, 0usize, 0usize);
    for (&dec, &truth) in report.decisions.iter().zip(true_edges) {
        match (dec, truth) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, false) => tn += 1,
            (false, true) => fneg += 1,
        }
    }
    let ratio = |a: usize, b: usize| if b == 0 { None } else { Some(a as f64 / b as f64) };
    let covered = (0..p)
        .filter(|&k| {
            let (lo, hi) = equal_tailed_interval(&column(draws, k), level);
            lo <= true_phi[k] && true_phi[k] <= hi
        })
        .count();
    Ok(GraphMetrics {
        recall: ratio(tp, tp + fneg),
        precision: ratio(tp, tp + fp),
        accuracy: (tp + tn) as f64 / true_edges.len().max(1) as f64,
        cp_phi: 100.0 * covered as f64 / p.max(1) as f64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Draws with the given value repeated in every row.
    fn constant_draws(values: &[f64], rows: usize) -> DMatrix<f64> {
        DMatrix::from_fn(rows, values.len(), |_, k| values[k])
    }

    #[test]
    fn median_rule_examples() {
        let d = 3;
        let r = detect_edges_median(&constant_draws(&vec![0.0; 18], 5), d, 0.1).unwrap();
        assert_eq!(r.detected(), 0);
        let mut v = vec![0.0; 18];
        v[edge_offset(d, 1) + 2] = 0.101;
        v[edge_offset(d, 2)] = 0.1;
        let r = detect_edges_median(&constant_draws(&v, 5), d, 0.1).unwrap();
        assert_eq!(r.decisions, vec![false, true, false]);
        assert!((r.strengths[2] - 0.1).abs() < 1e-15);
    }

    #[test]
    fn medians_match_sorting_oracle() {
        let d = 2;
        let draws = DMatrix::from_fn(3, 8, |i, k| [0.5, -0.2, 0.9][i] * (k as f64 + 1.0));
        let r = detect_edges_median(&draws, d, 0.01).unwrap();
        let oracle: f64 = (4..8).map(|k| 0.5 * (k as f64 + 1.0)).sum();
        assert!((r.strengths[0] - oracle).abs() < 1e-12);
    }

    #[test]
    fn ci_rule_examples() {
        let d = 2;
        let sym = DMatrix::from_fn(100, 8, |i, _| (i as f64 - 49.5) / 10.0);
        assert_eq!(detect_edges_ci(&sym, d, 0.9).unwrap().detected(), 0);
        let mut pos = sym.clone();
        for i in 0..100 {
            pos[(i, 6)] = 0.2 + 0.1 * i as f64 / 99.0;
        }
        assert_eq!(detect_edges_ci(&pos, d, 0.9).unwrap().decisions, vec![true]);
        // Five draws: the 90% interval is interpolated between sorted values.
        let five = DMatrix::from_fn(5, 8, |i, _| [0.3, -0.1, 0.5, 0.2, 0.4][i]);
        let (lo, _) = equal_tailed_interval(&[0.3, -0.1, 0.5, 0.2, 0.4], 0.9);
        assert!((lo - (-0.1 + 0.2 * 0.3)).abs() < 1e-12);
        assert_eq!(detect_edges_ci(&five, d, 0.9).unwrap().detected(), 0);
        assert!(detect_edges_ci(&five, d, 1.0).is_err());
    }

    #[test]
    fn metric_counting_examples() {
        let d = 12;
        let p = coefficient_count(d);
        let draws = constant_draws(&vec![0.0; p], 4);
        let truth: Vec<bool> = edge_list(d).iter().map(|&(j, k)| k == j + 1).collect();
        assert_eq!(truth.iter().filter(|t| **t).count(), 11);
        let all = EdgeDecisionReport {
            rule: EdgeRule::MedianThreshold(0.1),
            edges: edge_list(d),
            decisions: vec![true; 66],
            strengths: vec![0.0; 66],
        };
        let m = graph_metrics(&all, &truth, &draws, &vec![0.0; p], 0.9).unwrap();
        assert_eq!(m.recall, Some(1.0));
        assert!((m.precision.unwrap() - 11.0 / 66.0).abs() < 1e-15);
        assert_eq!(m.cp_phi, 100.0);
        let none = EdgeDecisionReport { decisions: vec![false; 66], ..all.clone() };
        let m = graph_metrics(&none, &truth, &draws, &vec![0.0; p], 0.9).unwrap();
        assert_eq!(m.recall, Some(0.0));
        assert_eq!(m.precision, None);
        assert!((m.accuracy - 55.0 / 66.0).abs() < 1e-15);
        let perfect = EdgeDecisionReport { decisions: truth.clone(), ..all };
        let m = graph_metrics(&perfect, &truth, &draws, &vec![1.0; p], 0.9).unwrap();
        assert_eq!((m.recall, m.precision, m.accuracy), (Some(1.0), Some(1.0), 1.0));
        assert_eq!(m.cp_phi, 0.0);
    }
}
