//! Synthetic torus-graph data.

use super::model::{edge_list, TorusGraphParams};
use super::vonmises::{sample_natural, sample_von_mises};
use crate::error::{Error, Result};
use crate::expfam::wrap_angle;
use crate::rng::RandomStream;
use rand::Rng;
use std::f64::consts::TAU;

/// `x_1 ~ vM(μ, κ)` and `x_j | x_{j−1} ~ vM(x_{j−1} + μ, κ)`.
pub fn generate_vm_chain(d: usize, n: usize, mu: f64, kappa: f64, rng: &mut RandomStream) -> Result<Vec<Vec<f64>>> {
    if d < 2 {
        return Err(Error::InvalidParameter("the von Mises chain needs at least two nodes".into()));
    }
    Ok((0..n)
        .map(|_| {
            let mut x = Vec::with_capacity(d);
            x.push(sample_von_mises(mu, kappa, rng));
            for j in 1..d {
                x.push(sample_von_mises(wrap_angle(x[j - 1] + mu), kappa, rng));
            }
            x
        })
        .collect())
}

/// Rejection samples with the acceptance statistics.
#[derive(Debug, Clone)]
pub struct RejectionOutput {
    pub data: Vec<Vec<f64>>,
    pub proposals: u64,
}

impl RejectionOutput {
    pub fn acceptance_rate(&self) -> f64 {
        self.data.len() as f64 / self.proposals as f64
    }
}

/// Sum over edges of `‖φ_jk‖₁` plus node terms `‖φ_j‖₁`: an upper bound on
/// the energy.
pub fn energy_bound(params: &TorusGraphParams) -> f64 {
    let nodes: f64 = params.phi_node.iter().flatten().map(|v| v.abs()).sum();
    let edges: f64 = params.phi_edge.iter().flatten().map(|v| v.abs()).sum();
    nodes + edges
}

/// Uniform proposals on the torus accepted with probability
/// `exp(U(x) − u_max)`.
pub fn rejection_sample(params: &TorusGraphParams, n: usize, u_max: f64, rng: &mut RandomStream) -> Result<RejectionOutput> {
    let d = params.nodes();
    let mut data = Vec::with_capacity(n);
    let mut proposals = 0u64;
    while data.len() < n {
        let x: Vec<f64> = (0..d).map(|_| TAU * rng.random::<f64>()).collect();
        proposals += 1;
        let log_accept = params.energy(&x) - u_max;
        if log_accept > 1e-12 {
            return Err(Error::InvalidParameter(format!("energy exceeds the bound by {log_accept}")));
        }
        if rng.random::<f64>().ln() < log_accept {
            data.push(x);
        }
    }
    Ok(RejectionOutput { data, proposals })
}

/// Rejection samples from the five-node graph with bound `5 · 1.2 = 6`.
pub fn generate_cycle_rejection(n: usize, rng: &mut RandomStream) -> Result<RejectionOutput> {
    let params = TorusGraphParams::five_node_cycle();
    rejection_sample(&params, n, energy_bound(&params), rng)
}

struct Neighbor {
    other: usize,
    coef: [f64; 4],
    /// Whether the updated node is the first index of the stored edge.
    first: bool,
}

/// Single-site Gibbs sampler for a torus graph. Each node is drawn from its
/// von Mises full conditional; the state after every `thin`-th sweep past
/// `burn` is kept.
pub fn gibbs_sample(params: &TorusGraphParams, n: usize, burn: usize, thin: usize, rng: &mut RandomStream) -> Result<Vec<Vec<f64>>> {
    if thin == 0 {
        return Err(Error::InvalidParameter("thin must be positive".into()));
    }
    let d = params.nodes();
    let mut neighbors: Vec<Vec<Neighbor>> = (0..d).map(|_| Vec::new()).collect();
    for (e, (j, k)) in edge_list(d).into_iter().enumerate() {
        let coef = params.phi_edge[e];
        if coef.iter().all(|v| *v == 0.0) {
            continue;
        }
        neighbors[j].push(Neighbor { other: k, coef, first: true });
        neighbors[k].push(Neighbor { other: j, coef, first: false });
    }
    let mut x: Vec<f64> = (0..d).map(|_| TAU * rng.random::<f64>()).collect();
    let mut out = Vec::with_capacity(n);
    let mut sweep = 0usize;
    while out.len() < n {
        for k in 0..d {
            let [mut a, mut b] = params.phi_node[k];
            for nb in &neighbors[k] {
                let (c, s) = (x[nb.other].cos(), x[nb.other].sin());
                let [p1, p2, p3, p4] = nb.coef;
                // Collect the cos x_k and sin x_k coefficients of the edge terms.
                if nb.first {
                    a += p1 * c - p2 * s + p3 * c + p4 * s;
                    b += p1 * s + p2 * c - p3 * s + p4 * c;
                } else {
                    a += p1 * c + p2 * s + p3 * c + p4 * s;
                    b += p1 * s - p2 * c - p3 * s + p4 * c;
                }
            }
            x[k] = sample_natural(a, b, rng);
        }
        sweep += 1;
        if sweep > burn && (sweep - burn) % thin == 0 {
            out.push(x.clone());
        }
    }
    Ok(out)
}

/// Data from a random graph with its generating parameters.
#[derive(Debug, Clone)]
pub struct ErSample {
    pub data: Vec<Vec<f64>>,
    pub params: TorusGraphParams,
    pub edges: Vec<(usize, usize)>,
}

/// Erdős–Rényi graph with rotational couplings `(0.3, 0.3, 0, 0)` on each
/// edge. The graph depends only on `seed`.
pub fn er_graph(d: usize, edge_prob: f64, seed: u64) -> Result<ErSample> {
    if !(0.0..=1.0).contains(&edge_prob) {
        return Err(Error::InvalidParameter(format!("edge probability must lie in [0, 1], got {edge_prob}")));
    }
    let mut graph_rng = RandomStream::new(seed).substream(0);
    let mut params = TorusGraphParams::zeros(d);
    let mut edges = Vec::new();
    for (j, k) in edge_list(d) {
        if graph_rng.random::<f64>() < edge_prob {
            *params.edge_mut(j, k) = [0.3, 0.3, 0.0, 0.0];
            edges.push((j, k));
        }
    }
    Ok(ErSample { data: Vec::new(), params, edges })
}

/// [`er_graph`] followed by `burn + n` Gibbs sweeps keeping the last `n`
/// states.
pub fn generate_er_gibbs(d: usize, edge_prob: f64, n: usize, burn: usize, seed: u64) -> Result<ErSample> {
    let mut sample = er_graph(d, edge_prob, seed)?;
    sample.data = gibbs_sample(&sample.params, n, burn, 1, &mut RandomStream::new(seed).substream(1))?;
    Ok(sample)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::special::bessel_i;
    use crate::stats::{chi_square_homogeneity, ks_one_sample_pvalue};
    use std::f64::consts::PI;

    fn circular_corr(data: &[Vec<f64>], a: usize, b: usize) -> f64 {
        data.iter().map(|x| (x[a] - x[b]).cos()).sum::<f64>() / data.len() as f64
    }

    #[test]
    fn chain_marginal_and_decay() {
        let mut rng = RandomStream::new(1);
        let data = generate_vm_chain(3, 100_000, PI / 6.0, 2.0, &mut rng).unwrap();
        let (c, s) = data.iter().fold((0.0, 0.0), |(c, s), x| (c + x[0].cos(), s + x[0].sin()));
        assert!((s.atan2(c) - PI / 6.0).abs() < 0.02);
        let r = c.hypot(s) / data.len() as f64;
        assert!((r - bessel_i(1, 2.0) / bessel_i(0, 2.0)).abs() < 0.01);
        // Dependence on the chain decays with graph distance.
        let shift = |a: usize, b: usize, lag: f64| {
            data.iter().map(|x| (x[b] - x[a] - lag).cos()).sum::<f64>() / data.len() as f64
        };
        assert!(shift(0, 1, PI / 6.0) > shift(0, 2, PI / 3.0));
        assert!(generate_vm_chain(1, 5, 0.0, 1.0, &mut rng).is_err());
    }

    #[test]
    fn cycle_rejection_prefers_edges() {
        let mut rng = RandomStream::new(2);
        let out = generate_cycle_rejection(1000, &mut rng).unwrap();
        assert_eq!(out.data.len(), 1000);
        let rate = out.acceptance_rate();
        assert!(rate > 0.0 && rate <= 1.0);
        assert!((energy_bound(&TorusGraphParams::five_node_cycle()) - 6.0).abs() < 1e-12);
        let edge = circular_corr(&out.data, 0, 2);
        assert!(edge > 0.0 && edge > circular_corr(&out.data, 0, 1));
    }

    #[test]
    fn isolated_node_is_uniform() {
        let mut p = TorusGraphParams::zeros(3);
        *p.edge_mut(0, 1) = [0.8, 0.4, 0.0, 0.0];
        let data = gibbs_sample(&p, 1000, 100, 1, &mut RandomStream::new(3)).unwrap();
        let mut xs: Vec<f64> = data.iter().map(|x| x[2]).collect();
        assert!(ks_one_sample_pvalue(&mut xs, |x| x / TAU) > 0.01);
    }

    fn histogram(data: &[Vec<f64>], bins: usize) -> Vec<u64> {
        let mut h = vec![0u64; bins * bins];
        for x in data {
            let i = ((x[0] / TAU * bins as f64) as usize).min(bins - 1);
            let j = ((x[1] / TAU * bins as f64) as usize).min(bins - 1);
            h[i * bins + j] += 1;
        }
        h
    }

    #[test]
    fn gibbs_conditionals_match_rejection_oracle() {
        for coef in [[0.3, 0.3, 0.0, 0.0], [1.2, -0.7, 0.0, 0.0], [0.4, 0.2, 0.9, -0.6]] {
            let mut p = TorusGraphParams::zeros(2);
            *p.edge_mut(0, 1) = coef;
            p.phi_node[1] = [0.3, -0.5];
            let gibbs = gibbs_sample(&p, 20_000, 200, 3, &mut RandomStream::new(5)).unwrap();
            let oracle = rejection_sample(&p, 20_000, energy_bound(&p), &mut RandomStream::new(6)).unwrap();
            let (_, _, pval) = chi_square_homogeneity(&histogram(&gibbs, 8), &histogram(&oracle.data, 8));
            assert!(pval > 0.01, "coef {coef:?}: p = {pval}");
        }
    }

    #[test]
    fn er_graph_is_seeded() {
        let a = generate_er_gibbs(30, 0.1, 50, 20, 9).unwrap();
        let b = generate_er_gibbs(30, 0.1, 50, 20, 9).unwrap();
        assert_eq!(a.edges, b.edges);
        assert_eq!(a.data, b.data);
        assert_eq!(a.data.len(), 50);
        assert!(!a.edges.is_empty() && a.edges.len() < 100);
        assert!(generate_er_gibbs(5, 1.5, 5, 5, 1).is_err());
    }
}
