//! Graph and interval exports.

use super::edges::EdgeDecisionReport;
use super::model::{edge_offset, edge_index};
use crate::error::Result;
use crate::stats::{equal_tailed_interval, median};
use nalgebra::DMatrix;
use std::io::Write;

fn label(labels: Option<&[String]>, j: usize) -> String {
    labels.and_then(|l| l.get(j).cloned()).unwrap_or_else(|| format!("x{}", j + 1))
}

/// Undirected DOT graph of the detected edges, with strengths as weights.
pub fn write_dot<W: Write>(report: &EdgeDecisionReport, d: usize, labels: Option<&[String]>, mut out: W) -> Result<()> {
    writeln!(out, "graph torus {{")?;
    for j in 0..d {
        writeln!(out, "  n{} [label=\"{}\"];", j + 1, label(labels, j).replace('"', "'"))?;
    }
    for ((j, k), (&dec, &w)) in report.edges.iter().zip(report.decisions.iter().zip(&report.strengths)) {
        if dec {
            writeln!(out, "  n{} -- n{} [weight={w:.6}];", j + 1, k + 1)?;
        }
    }
    writeln!(out, "}}")?;
    Ok(())
}

/// Edge list with columns `j,k,strength,decision` (one-based nodes).
pub fn write_edge_csv<W: Write>(report: &EdgeDecisionReport, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["j", "k", "strength", "decision"])?;
    for ((j, k), (&dec, &s)) in report.edges.iter().zip(report.decisions.iter().zip(&report.strengths)) {
        w.write_record([(j + 1).to_string(), (k + 1).to_string(), format!("{s:.6}"), u8::from(dec).to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// Posterior medians and 50% intervals of the four coefficients of each
/// listed edge: columns `j,k,component,median,lo,hi`.
pub fn write_interval_csv<W: Write>(draws: &DMatrix<f64>, d: usize, edges: &[(usize, usize)], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["j", "k", "component", "median", "lo", "hi"])?;
    for &(j, k) in edges {
        let o = edge_offset(d, edge_index(d, j, k));
        for l in 0..4 {
            let col: Vec<f64> = draws.column(o + l).iter().copied().collect();
            let (lo, hi) = equal_tailed_interval(&col, 0.5);
            w.write_record([
                (j.min(k) + 1).to_string(),
                (j.max(k) + 1).to_string(),
                (l + 1).to_string(),
                format!("{:.6}", median(&col)),
                format!("{lo:.6}"),
                format!("{hi:.6}"),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}
