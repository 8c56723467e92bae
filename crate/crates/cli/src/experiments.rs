//! Seeded replication studies and their table aggregates.
//!
//! Replication `r` of a study with master seed `s` runs entirely from
//! `derive_seed(s, r)`; inside a replication, data and each fitted method
//! get their own derived seeds. Replications run on a rayon pool and are
//! collected in index order, so results never depend on `--jobs`.

use crate::failure::{invalid, CliError, CliResult};
use nalgebra::DMatrix;
use ncbayes::expfam::NoiseMode;
use ncbayes::hscore::{run_hbayes, HBayesConfig};
use ncbayes::rng::derive_seed;
use ncbayes::shrinkage::PriorMode;
use ncbayes::stats::variance;
use ncbayes::torus::model::coefficient_count;
use ncbayes::torus::{
    detect_edges_ci, detect_edges_median, er_graph, fit_torus_ncbayes, generate_cycle_rejection, generate_vm_chain,
    gibbs_sample, graph_metrics, GraphMetrics, TorusFitConfig, TorusGraphParams,
};
use ncbayes::tv::{tv_replication, Scenario, TvFitConfig, TvNoise, TvReplication};
use ncbayes::{RandomStream, Result};
use rayon::prelude::*;
use serde::Serialize;
use std::f64::consts::PI;

pub const CHAIN_NODES: usize = 12;
pub const CHAIN_SIZE: usize = 200;
pub const CHAIN_MU: f64 = PI / 6.0;
pub const CHAIN_KAPPA: f64 = 2.0;
pub const CYCLE_SIZE: usize = 1000;
pub const ER_NODES: usize = 30;
pub const ER_EDGE_PROB: f64 = 0.1;
pub const ER_SIZE: usize = 1000;
pub const ER_BURN: usize = 2000;
/// The random graph is drawn once from this seed and shared by every
/// replication.
pub const ER_GRAPH_SEED: u64 = 2022;

const DATA_STREAM: u64 = 0xDA7A;
const FIT_STREAM: u64 = 0xF170;

pub fn replication_seeds(master: u64, reps: usize) -> Vec<u64> {
    (0..reps as u64).map(|r| derive_seed(master, r)).collect()
}

/// Runs `f` once per seed on a pool of `jobs` threads, keeping seed order.
pub fn run_replications<T: Send>(seeds: &[u64], jobs: usize, f: impl Fn(usize, u64) -> Result<T> + Sync) -> CliResult<Vec<Result<T>>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| invalid(format!("cannot start worker pool: {e}")))?;
    Ok(pool.install(|| seeds.par_iter().enumerate().map(|(i, &s)| f(i, s)).collect()))
}

/// Successful results plus `(replication, message)` for the failures. If
/// every replication failed, the first error is returned.
pub fn split_failures<T>(results: Vec<Result<T>>) -> CliResult<(Vec<T>, Vec<(usize, String)>)> {
    let mut ok = Vec::new();
    let mut failed = Vec::new();
    let mut first = None;
    for (i, r) in results.into_iter().enumerate() {
        match r {
            Ok(v) => ok.push(v),
            Err(e) => {
                failed.push((i, e.to_string()));
                first.get_or_insert(e);
            }
        }
    }
    match (ok.is_empty(), first) {
        (true, Some(e)) => Err(CliError::Core(e)),
        _ => Ok((ok, failed)),
    }
}

fn mean_of(xs: impl Iterator<Item = f64>) -> Option<f64> {
    let v: Vec<f64> = xs.collect();
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

// ---------------------------------------------------------------- torus

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum TorusScenario {
    Chain,
    Cycle5,
    Er30,
}

impl TorusScenario {
    pub fn parse(s: &str) -> CliResult<Self> {
        match s {
            "chain" => Ok(Self::Chain),
            "cycle5" => Ok(Self::Cycle5),
            "er30" => Ok(Self::Er30),
            other => Err(invalid(format!("unknown torus scenario `{other}` (chain, cycle5, er30)"))),
        }
    }

    pub fn truth(self) -> Result<TorusGraphParams> {
        Ok(match self {
            Self::Chain => TorusGraphParams::von_mises_chain(CHAIN_NODES, CHAIN_MU, CHAIN_KAPPA),
            Self::Cycle5 => TorusGraphParams::five_node_cycle(),
            Self::Er30 => er_graph(ER_NODES, ER_EDGE_PROB, ER_GRAPH_SEED)?.params,
        })
    }

    /// One dataset, with the rejection acceptance rate where applicable.
    pub fn generate(self, truth: &TorusGraphParams, seed: u64) -> Result<(Vec<Vec<f64>>, Option<f64>)> {
        let mut rng = RandomStream::new(seed);
        match self {
            Self::Chain => Ok((generate_vm_chain(CHAIN_NODES, CHAIN_SIZE, CHAIN_MU, CHAIN_KAPPA, &mut rng)?, None)),
            Self::Cycle5 => {
                let out = generate_cycle_rejection(CYCLE_SIZE, &mut rng)?;
                let rate = out.acceptance_rate();
                Ok((out.data, Some(rate)))
            }
            Self::Er30 => Ok((gibbs_sample(truth, ER_SIZE, ER_BURN, 1, &mut rng)?, None)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "method", rename_all = "kebab-case")]
pub enum TorusMethod {
    NcBayes { noise_update: bool },
    HBayes { w: f64 },
}

impl TorusMethod {
    /// The five rows of the torus tables.
    pub fn table_rows() -> Vec<Self> {
        vec![
            Self::NcBayes { noise_update: false },
            Self::NcBayes { noise_update: true },
            Self::HBayes { w: 0.2 },
            Self::HBayes { w: 1.0 },
            Self::HBayes { w: 5.0 },
        ]
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::NcBayes { .. } => "NC-Bayes",
            Self::HBayes { .. } => "H-Bayes",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum EdgeRuleKind {
    Median,
    Ci,
}

/// Settings shared by every replication of a torus study.
#[derive(Debug, Clone, Serialize)]
pub struct TorusStudy {
    pub scenario: TorusScenario,
    pub methods: Vec<TorusMethod>,
    pub prior: PriorMode,
    pub hbayes_prior: PriorMode,
    pub tau_fixed: bool,
    pub slab_c: f64,
    pub iterations: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub threshold: f64,
    pub level: f64,
    pub alpha: f64,
    pub noise_count: Option<usize>,
}

impl TorusStudy {
    pub fn new(scenario: TorusScenario) -> Self {
        Self {
            scenario,
            methods: TorusMethod::table_rows(),
            prior: PriorMode::RegularizedGrouped,
            hbayes_prior: PriorMode::Grouped,
            tau_fixed: false,
            slab_c: 1.0,
            iterations: 3000,
            burn_in: 1000,
            thin: 1,
            threshold: 0.1,
            level: 0.9,
            alpha: 0.2,
            noise_count: None,
        }
    }

    pub fn validate(&self) -> CliResult<()> {
        if self.methods.is_empty() {
            return Err(invalid("no methods selected"));
        }
        if !(self.threshold > 0.0) || !(self.level > 0.0 && self.level < 1.0) {
            return Err(invalid("threshold must be positive and level must lie in (0, 1)"));
        }
        Ok(())
    }

    fn torus_config(&self, noise_update: bool, seed: u64) -> TorusFitConfig {
        let mut cfg = TorusFitConfig {
            prior: self.prior,
            noise_count: self.noise_count,
            tau_fixed: self.tau_fixed,
            slab_c: self.slab_c,
            ..TorusFitConfig::default()
        };
        cfg.gibbs.iterations = self.iterations;
        cfg.gibbs.burn_in = self.burn_in;
        cfg.gibbs.thin = self.thin;
        cfg.gibbs.seed = seed;
        cfg.gibbs.noise_mode = if noise_update { NoiseMode::Adaptive } else { NoiseMode::Generator };
        cfg.gibbs.adaptive.alpha = self.alpha;
        cfg
    }

    fn hbayes_config(&self, w: f64, seed: u64) -> HBayesConfig {
        let mut cfg = HBayesConfig { w, prior: self.hbayes_prior, slab_c: self.slab_c, ..HBayesConfig::default() };
        cfg.gibbs.iterations = self.iterations;
        cfg.gibbs.burn_in = self.burn_in;
        cfg.gibbs.thin = self.thin;
        cfg.gibbs.seed = seed;
        cfg
    }

    /// Fits one method; returns coefficient draws (no log-normalizer
    /// column) and sampler counters.
    pub fn fit(&self, method: TorusMethod, data: &[Vec<f64>], seed: u64) -> Result<(DMatrix<f64>, SamplerCounters)> {
        let d = data.first().map(Vec::len).unwrap_or(0);
        let p = coefficient_count(d);
        let draws = match method {
            TorusMethod::NcBayes { noise_update } => fit_torus_ncbayes(data, &self.torus_config(noise_update, seed))?.draws,
            TorusMethod::HBayes { w } => run_hbayes(data, &self.hbayes_config(w, seed))?.draws,
        };
        let counters = SamplerCounters {
            jitter_retries: draws.jitter_events,
            ess_warnings: draws.ess_warnings,
            noise_refreshes: draws.noise_refreshes,
        };
        Ok((draws.draws.columns(0, p).into_owned(), counters))
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct SamplerCounters {
    pub jitter_retries: usize,
    pub ess_warnings: usize,
    pub noise_refreshes: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct MethodOutcome {
    pub median: GraphMetrics,
    pub ci: GraphMetrics,
    /// Sum of the marginal posterior variances of the coefficients.
    pub covariance_trace: f64,
    pub counters: SamplerCounters,
}

#[derive(Debug, Clone, Serialize)]
pub struct TorusReplicate {
    pub seed: u64,
    pub acceptance_rate: Option<f64>,
    pub outcomes: Vec<MethodOutcome>,
    /// Coefficient draws per method, kept only on request.
    #[serde(skip)]
    pub draws: Vec<DMatrix<f64>>,
}

pub fn covariance_trace(draws: &DMatrix<f64>) -> f64 {
    (0..draws.ncols()).map(|k| variance(draws.column(k).as_slice())).sum()
}

/// Generates one dataset and scores every method of the study on it.
pub fn torus_replicate(study: &TorusStudy, truth: &TorusGraphParams, seed: u64, keep_draws: bool) -> Result<TorusReplicate> {
    let (data, acceptance_rate) = study.scenario.generate(truth, derive_seed(seed, DATA_STREAM))?;
    let d = truth.nodes();
    let true_edges = truth.true_edges();
    let mut true_phi = truth.to_flat();
    true_phi.truncate(coefficient_count(d));
    let mut outcomes = Vec::with_capacity(study.methods.len());
    let mut kept = Vec::new();
    for (i, &method) in study.methods.iter().enumerate() {
        let (draws, counters) = study.fit(method, &data, derive_seed(seed, FIT_STREAM + i as u64))?;
        let med = detect_edges_median(&draws, d, study.threshold)?;
        let ci = detect_edges_ci(&draws, d, study.level)?;
        outcomes.push(MethodOutcome {
            median: graph_metrics(&med, &true_edges, &draws, &true_phi, study.level)?,
            ci: graph_metrics(&ci, &true_edges, &draws, &true_phi, study.level)?,
            covariance_trace: covariance_trace(&draws),
            counters,
        });
        if keep_draws {
            kept.push(draws);
        }
    }
    Ok(TorusReplicate { seed, acceptance_rate, outcomes, draws: kept })
}

/// One averaged table row.
#[derive(Debug, Clone, Serialize)]
pub struct TorusRow {
    pub method: String,
    pub w: Option<f64>,
    pub noise_update: Option<bool>,
    pub rule: EdgeRuleKind,
    /// Threshold, or credible level in percent.
    pub value: f64,
    /// Coverage of the coefficients in percent (interval rule only).
    pub cp: Option<f64>,
    pub recall: Option<f64>,
    pub precision: Option<f64>,
    pub accuracy: f64,
    /// Replications with recall and precision both equal to one.
    pub perfect: usize,
    pub replications: usize,
}

pub fn aggregate_torus(study: &TorusStudy, reps: &[TorusReplicate], rule: EdgeRuleKind) -> Vec<TorusRow> {
    study
        .methods
        .iter()
        .enumerate()
        .map(|(i, &method)| {
            let metrics: Vec<&GraphMetrics> = reps
                .iter()
                .map(|r| match rule {
                    EdgeRuleKind::Median => &r.outcomes[i].median,
                    EdgeRuleKind::Ci => &r.outcomes[i].ci,
                })
                .collect();
            let (w, noise_update) = match method {
                TorusMethod::NcBayes { noise_update } => (None, Some(noise_update)),
                TorusMethod::HBayes { w } => (Some(w), None),
            };
            TorusRow {
                method: method.name().into(),
                w,
                noise_update,
                rule,
                value: match rule {
                    EdgeRuleKind::Median => study.threshold,
                    EdgeRuleKind::Ci => study.level * 100.0,
                },
                cp: (rule == EdgeRuleKind::Ci).then(|| mean_of(metrics.iter().map(|m| m.cp_phi)).unwrap_or(f64::NAN)),
                recall: mean_of(metrics.iter().filter_map(|m| m.recall)),
                precision: mean_of(metrics.iter().filter_map(|m| m.precision)),
                accuracy: mean_of(metrics.iter().map(|m| m.accuracy)).unwrap_or(f64::NAN),
                perfect: metrics.iter().filter(|m| m.recall.unwrap_or(1.0) == 1.0 && m.precision.unwrap_or(1.0) == 1.0).count(),
                replications: metrics.len(),
            }
        })
        .collect()
}

fn opt(v: Option<f64>, digits: usize) -> String {
    v.map(|x| format!("{x:.digits$}")).unwrap_or_default()
}

pub fn torus_table_csv(rows: &[TorusRow]) -> String {
    let mut s = String::from("method,w,noise_update,value,cp,recall,precision,accuracy,perfect,replications\n");
    for r in rows {
        s.push_str(&format!(
            "{},{},{},{:.3},{},{},{},{:.3},{},{}\n",
            r.method,
            opt(r.w, 1),
            r.noise_update.map(|b| b.to_string()).unwrap_or_default(),
            r.value,
            opt(r.cp, 1),
            opt(r.recall, 3),
            opt(r.precision, 3),
            r.accuracy,
            r.perfect,
            r.replications
        ));
    }
    s
}

// ---------------------------------------------------------------- density

#[derive(Debug, Clone, Serialize)]
pub struct TvStudy {
    pub scenario: Scenario,
    pub noises: Vec<TvNoise>,
    pub fit: TvFitConfig,
    pub times: usize,
    pub per_time: usize,
    pub eval_points: usize,
}

impl TvStudy {
    pub fn new(scenario: Scenario) -> Self {
        Self {
            scenario,
            noises: vec![TvNoise::Common, TvNoise::PerTime, TvNoise::Adaptive],
            fit: TvFitConfig::default(),
            times: 10,
            per_time: 100,
            eval_points: 2000,
        }
    }

    pub fn validate(&self) -> CliResult<()> {
        if self.noises.is_empty() {
            return Err(invalid("no noise modes selected"));
        }
        if self.times < 2 || self.per_time < 2 || self.eval_points == 0 {
            return Err(invalid("need at least two times, two points per time and one evaluation point"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct TvReplicate {
    pub seed: u64,
    /// One entry per noise mode of the study.
    pub results: Vec<TvReplication>,
}

pub fn tv_replicate(study: &TvStudy, seed: u64) -> Result<TvReplicate> {
    let results = study
        .noises
        .iter()
        .map(|&noise| {
            let mut cfg = study.fit.clone();
            cfg.noise = noise;
            cfg.gibbs.seed = seed;
            tv_replication(study.scenario, study.times, study.per_time, study.eval_points, &cfg)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(TvReplicate { seed, results })
}

pub fn noise_label(noise: TvNoise) -> &'static str {
    match noise {
        TvNoise::Common => "N1",
        TvNoise::PerTime => "N2",
        TvNoise::Adaptive => "aN",
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct TvRow {
    pub scenario: u32,
    pub method: String,
    pub abe: f64,
    pub cp: Option<f64>,
    pub al: Option<f64>,
    /// Share of replications where the model beat the kernel estimate.
    pub beats_kde: Option<f64>,
    pub replications: usize,
}

pub fn scenario_index(s: Scenario) -> u32 {
    match s {
        Scenario::Mixture => 1,
        Scenario::Ring => 2,
    }
}

pub fn aggregate_tv(study: &TvStudy, reps: &[TvReplicate]) -> Vec<TvRow> {
    let n = reps.len();
    let sc = scenario_index(study.scenario);
    let mut rows: Vec<TvRow> = study
        .noises
        .iter()
        .enumerate()
        .map(|(i, &noise)| TvRow {
            scenario: sc,
            method: noise_label(noise).into(),
            abe: mean_of(reps.iter().map(|r| r.results[i].abe_model)).unwrap_or(f64::NAN),
            cp: mean_of(reps.iter().map(|r| r.results[i].coverage)),
            al: mean_of(reps.iter().map(|r| r.results[i].interval_length)),
            beats_kde: Some(reps.iter().filter(|r| r.results[i].abe_model < r.results[i].abe_kde).count() as f64 / n.max(1) as f64),
            replications: n,
        })
        .collect();
    rows.push(TvRow {
        scenario: sc,
        method: "KDE".into(),
        abe: mean_of(reps.iter().map(|r| r.results[0].abe_kde)).unwrap_or(f64::NAN),
        cp: None,
        al: None,
        beats_kde: None,
        replications: n,
    });
    rows
}

pub fn tv_table_csv(rows: &[TvRow]) -> String {
    let mut s = String::from("scenario,method,abe,cp,al,beats_kde,replications\n");
    for r in rows {
        s.push_str(&format!(
            "{},{},{:.3},{},{},{},{}\n",
            r.scenario,
            r.method,
            r.abe,
            opt(r.cp, 1),
            opt(r.al, 3),
            opt(r.beats_kde, 2),
            r.replications
        ));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn replication_seeds_are_distinct_and_stable() {
        let a = replication_seeds(42, 50);
        let mut b = a.clone();
        b.sort();
        b.dedup();
        assert_eq!(b.len(), 50);
        assert_eq!(a, replication_seeds(42, 50));
        assert_ne!(a, replication_seeds(43, 50));
    }

    #[test]
    fn pool_keeps_seed_order() {
        let seeds = replication_seeds(1, 16);
        let out = run_replications(&seeds, 4, |i, s| Ok((i, s))).unwrap();
        let got: Vec<(usize, u64)> = out.into_iter().map(|r| r.unwrap()).collect();
        assert_eq!(got, seeds.iter().copied().enumerate().collect::<Vec<_>>());
    }

    #[test]
    fn failures_are_counted_not_fatal() {
        let results: Vec<Result<u32>> = vec![Ok(1), Err(ncbayes::Error::Numerical("x".into())), Ok(3)];
        let (ok, failed) = split_failures(results).unwrap();
        assert_eq!(ok, vec![1, 3]);
        assert_eq!(failed.len(), 1);
        assert_eq!(failed[0].0, 1);
        let all_bad: Vec<Result<u32>> = vec![Err(ncbayes::Error::Numerical("x".into()))];
        assert_eq!(split_failures(all_bad).unwrap_err().exit_code(), 3);
    }

    #[test]
    fn er_graph_is_fixed_across_replications() {
        let a = TorusScenario::Er30.truth().unwrap();
        let b = TorusScenario::Er30.truth().unwrap();
        assert_eq!(a, b);
        let edges = a.true_edges().iter().filter(|e| **e).count();
        // Binomial(435, 0.1): mean 43.5, sd about 6.3.
        assert!((20..=70).contains(&edges), "{edges} edges");
    }
}
