//! The torus graph family and its parameter layout.
//!
//! Coefficients are flattened as the `d` node pairs `(cos x_j, sin x_j)`,
//! then the edges `(1,2), (1,3), …, (d−1,d)` with four terms each:
//! `cos(x_j − x_k), sin(x_j − x_k), cos(x_j + x_k), sin(x_j + x_k)`.

use crate::error::{Error, Result};
use crate::expfam::{wrap_angle, Domain, ExpFamModel};
use crate::special::bessel_i;
use std::f64::consts::TAU;

/// Number of edges on `d` nodes.
pub fn edge_count(d: usize) -> usize {
    d * d.saturating_sub(1) / 2
}

/// Number of coefficients `2d²` (without the log-normalizer).
pub fn coefficient_count(d: usize) -> usize {
    2 * d * d
}

/// Edges `(j, k)`, `j < k`, zero-based, in flattening order.
pub fn edge_list(d: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::with_capacity(edge_count(d));
    for j in 0..d {
        for k in j + 1..d {
            out.push((j, k));
        }
    }
    out
}

/// Position of edge `(j, k)` in [`edge_list`], in either orientation.
pub fn edge_index(d: usize, j: usize, k: usize) -> usize {
    let (a, b) = if j < k { (j, k) } else { (k, j) };
    a * (2 * d - a - 1) / 2 + (b - a - 1)
}

/// Offset of edge `e`'s four coefficients in the flat vector.
pub fn edge_offset(d: usize, e: usize) -> usize {
    2 * d + 4 * e
}

/// Torus graph on `d` angles with `h ≡ 1`.
#[derive(Debug, Clone)]
pub struct TorusGraph {
    d: usize,
    domain: Domain,
}

impl TorusGraph {
    pub fn new(d: usize) -> Result<Self> {
        if d == 0 {
            return Err(Error::InvalidParameter("torus graph needs at least one node".into()));
        }
        Ok(Self { d, domain: Domain::torus(d) })
    }

    pub fn nodes(&self) -> usize {
        self.d
    }
}

/// Fills the `2d²` statistics for angles with precomputed cosines and sines.
fn fill_stats(c: &[f64], s: &[f64], out: &mut [f64]) {
    let d = c.len();
    for j in 0..d {
        out[2 * j] = c[j];
        out[2 * j + 1] = s[j];
    }
    let mut o = 2 * d;
    for j in 0..d {
        for k in j + 1..d {
            let (cc, ss, sc, cs) = (c[j] * c[k], s[j] * s[k], s[j] * c[k], c[j] * s[k]);
            out[o] = cc + ss;
            out[o + 1] = sc - cs;
            out[o + 2] = cc - ss;
            out[o + 3] = sc + cs;
            o += 4;
        }
    }
}

impl ExpFamModel for TorusGraph {
    fn dim(&self) -> usize {
        coefficient_count(self.d)
    }

    fn domain(&self) -> &Domain {
        &self.domain
    }

    fn suff_stat_into(&self, x: &[f64], out: &mut [f64]) {
        let c: Vec<f64> = x.iter().map(|v| v.cos()).collect();
        let s: Vec<f64> = x.iter().map(|v| v.sin()).collect();
        fill_stats(&c, &s, out);
    }
}

/// Human-readable label of each of the `2d²` coefficients, one-based.
pub fn coefficient_labels(d: usize) -> Vec<String> {
    let mut names = Vec::with_capacity(coefficient_count(d));
    for j in 1..=d {
        names.push(format!("node{j}_cos"));
        names.push(format!("node{j}_sin"));
    }
    for (j, k) in edge_list(d) {
        for part in ["cos_diff", "sin_diff", "cos_sum", "sin_sum"] {
            names.push(format!("edge{}_{}_{part}", j + 1, k + 1));
        }
    }
    names
}

/// Design row `(t(x)ᵀ, 1)ᵀ` of length `2d² + 1`. Angles are reduced mod 2π
/// first, which leaves the trigonometric values unchanged.
pub fn torus_suff_stat(x: &[f64]) -> Vec<f64> {
    let d = x.len();
    let c: Vec<f64> = x.iter().map(|v| wrap_angle(*v).cos()).collect();
    let s: Vec<f64> = x.iter().map(|v| wrap_angle(*v).sin()).collect();
    let mut out = vec![0.0; coefficient_count(d) + 1];
    fill_stats(&c, &s, &mut out[..coefficient_count(d)]);
    out[coefficient_count(d)] = 1.0;
    out
}

/// Wraps every angle into `[0, 2π)`; returns how many were out of range.
pub fn wrap_rows(data: &mut [Vec<f64>]) -> usize {
    let mut wrapped = 0;
    for row in data.iter_mut() {
        for v in row.iter_mut() {
            if !(0.0..TAU).contains(v) {
                *v = wrap_angle(*v);
                wrapped += 1;
            }
        }
    }
    wrapped
}

/// Structured torus-graph parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct TorusGraphParams {
    pub phi_node: Vec<[f64; 2]>,
    pub phi_edge: Vec<[f64; 4]>,
    pub beta: f64,
}

impl TorusGraphParams {
    pub fn zeros(d: usize) -> Self {
        Self { phi_node: vec![[0.0; 2]; d], phi_edge: vec![[0.0; 4]; edge_count(d)], beta: 0.0 }
    }

    pub fn nodes(&self) -> usize {
        self.phi_node.len()
    }

    pub fn edge(&self, j: usize, k: usize) -> &[f64; 4] {
        &self.phi_edge[edge_index(self.nodes(), j, k)]
    }

    pub fn edge_mut(&mut self, j: usize, k: usize) -> &mut [f64; 4] {
        let d = self.nodes();
        &mut self.phi_edge[edge_index(d, j, k)]
    }

    /// Flat `(φ, β)` vector of length `2d² + 1`.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut out: Vec<f64> = self.phi_node.iter().flatten().copied().collect();
        out.extend(self.phi_edge.iter().flatten());
        out.push(self.beta);
        out
    }

    pub fn from_flat(d: usize, flat: &[f64]) -> Result<Self> {
        let p = coefficient_count(d);
        if flat.len() != p && flat.len() != p + 1 {
            return Err(Error::InvalidParameter(format!("expected {} or {} values for d = {d}, got {}", p, p + 1, flat.len())));
        }
        let phi_node = (0..d).map(|j| [flat[2 * j], flat[2 * j + 1]]).collect();
        let phi_edge = (0..edge_count(d))
            .map(|e| {
                let o = edge_offset(d, e);
                [flat[o], flat[o + 1], flat[o + 2], flat[o + 3]]
            })
            .collect();
        Ok(Self { phi_node, phi_edge, beta: flat.get(p).copied().unwrap_or(0.0) })
    }

    /// Unnormalized log density `φᵀt(x)`.
    pub fn energy(&self, x: &[f64]) -> f64 {
        let mut u = 0.0;
        for (j, p) in self.phi_node.iter().enumerate() {
            u += p[0] * x[j].cos() + p[1] * x[j].sin();
        }
        for (e, (j, k)) in edge_list(self.nodes()).into_iter().enumerate() {
            let p = &self.phi_edge[e];
            if p.iter().all(|v| *v == 0.0) {
                continue;
            }
            let (dm, sm) = (x[j] - x[k], x[j] + x[k]);
            u += p[0] * dm.cos() + p[1] * dm.sin() + p[2] * sm.cos() + p[3] * sm.sin();
        }
        u
    }

    /// Edges with any nonzero coefficient.
    pub fn true_edges(&self) -> Vec<bool> {
        self.phi_edge.iter().map(|p| p.iter().any(|v| *v != 0.0)).collect()
    }

    /// The `vM(μ, κ)` Markov chain `x_1 → x_2 → … → x_d`: node 1 gets
    /// `(κ cos μ, κ sin μ)`, edge `(j−1, j)` gets `(κ cos μ, −κ sin μ, 0, 0)`,
    /// and `β = −d log(2π I₀(κ))`.
    pub fn von_mises_chain(d: usize, mu: f64, kappa: f64) -> Self {
        let mut p = Self::zeros(d);
        p.phi_node[0] = [kappa * mu.cos(), kappa * mu.sin()];
        for j in 1..d {
            *p.edge_mut(j - 1, j) = [kappa * mu.cos(), -kappa * mu.sin(), 0.0, 0.0];
        }
        p.beta = -(d as f64) * (TAU * bessel_i(0, kappa)).ln();
        p
    }

    /// Five nodes with edges (1,3), (1,4), (2,4), (2,5), (3,5), each with all
    /// four coefficients equal to 0.3.
    pub fn five_node_cycle() -> Self {
        let mut p = Self::zeros(5);
        for (j, k) in [(0, 2), (0, 3), (1, 3), (1, 4), (2, 4)] {
            *p.edge_mut(j, k) = [0.3; 4];
        }
        p
    }
}
