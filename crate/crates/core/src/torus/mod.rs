//! Torus graphs: a pairwise exponential family on `[0, 2π)^d`.

pub mod edges;
pub mod export;
pub mod fit;
pub mod generate;
pub mod model;
pub mod vonmises;

pub use edges::{detect_edges_ci, detect_edges_median, graph_metrics, EdgeDecisionReport, EdgeRule, GraphMetrics};
pub use fit::{fit_torus_ncbayes, TorusFit, TorusFitConfig};
pub use generate::{er_graph, generate_cycle_rejection, generate_er_gibbs, generate_vm_chain, gibbs_sample, rejection_sample};
pub use model::{torus_suff_stat, TorusGraph, TorusGraphParams};
pub use vonmises::sample_von_mises;
