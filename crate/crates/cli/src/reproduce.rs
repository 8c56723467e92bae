//! Table reproduction plans and their acceptance checks.

use crate::experiments::{
    aggregate_torus, aggregate_tv, replication_seeds, run_replications, split_failures, torus_replicate, tv_replicate,
    EdgeRuleKind, TorusMethod, TorusReplicate, TorusRow, TorusScenario, TorusStudy, TvReplicate, TvRow, TvStudy,
};
use crate::failure::{invalid, CliResult};
use ncbayes::tv::{Scenario, TvNoise};
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum TableId {
    #[serde(rename = "table-1")]
    Density,
    #[serde(rename = "table-2")]
    ChainMedian,
    #[serde(rename = "table-3")]
    ChainInterval,
    #[serde(rename = "table-s1")]
    CycleMedian,
    #[serde(rename = "table-s2")]
    CycleInterval,
    #[serde(rename = "table-s3")]
    RandomMedian,
    #[serde(rename = "table-s4")]
    RandomInterval,
}

impl TableId {
    pub fn parse(s: &str) -> CliResult<Self> {
        Ok(match s.to_ascii_lowercase().trim_start_matches("table-") {
            "1" => Self::Density,
            "2" => Self::ChainMedian,
            "3" => Self::ChainInterval,
            "s1" => Self::CycleMedian,
            "s2" => Self::CycleInterval,
            "s3" => Self::RandomMedian,
            "s4" => Self::RandomInterval,
            other => return Err(invalid(format!("unknown table `{other}` (1, 2, 3, s1, s2, s3, s4)"))),
        })
    }

    pub fn slug(self) -> &'static str {
        match self {
            Self::Density => "table-1",
            Self::ChainMedian => "table-2",
            Self::ChainInterval => "table-3",
            Self::CycleMedian => "table-s1",
            Self::CycleInterval => "table-s2",
            Self::RandomMedian => "table-s3",
            Self::RandomInterval => "table-s4",
        }
    }

    /// Graph scenario and edge rule for the torus tables.
    pub fn torus(self) -> Option<(TorusScenario, EdgeRuleKind)> {
        match self {
            Self::Density => None,
            Self::ChainMedian => Some((TorusScenario::Chain, EdgeRuleKind::Median)),
            Self::ChainInterval => Some((TorusScenario::Chain, EdgeRuleKind::Ci)),
            Self::CycleMedian => Some((TorusScenario::Cycle5, EdgeRuleKind::Median)),
            Self::CycleInterval => Some((TorusScenario::Cycle5, EdgeRuleKind::Ci)),
            Self::RandomMedian => Some((TorusScenario::Er30, EdgeRuleKind::Median)),
            Self::RandomInterval => Some((TorusScenario::Er30, EdgeRuleKind::Ci)),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ExperimentPlan {
    pub table: TableId,
    pub replications: usize,
    pub master_seed: u64,
    pub seeds: Vec<u64>,
    #[serde(skip)]
    pub jobs: usize,
}

impl ExperimentPlan {
    pub fn new(table: TableId, replications: usize, master_seed: u64, jobs: usize) -> CliResult<Self> {
        if replications == 0 {
            return Err(invalid("replication count must be positive"));
        }
        if jobs == 0 {
            return Err(invalid("--jobs must be positive"));
        }
        Ok(Self { table, replications, master_seed, seeds: replication_seeds(master_seed, replications), jobs })
    }
}

/// A pass/fail line against a declared target.
#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub target: String,
    pub pass: bool,
}

impl Check {
    pub fn new(name: &str, value: f64, target: &str, pass: bool) -> Self {
        Self { name: name.into(), value, target: target.into(), pass }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Failure {
    pub replication: usize,
    pub message: String,
}

fn failures(list: Vec<(usize, String)>) -> Vec<Failure> {
    list.into_iter().map(|(replication, message)| Failure { replication, message }).collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct TorusOutcome {
    pub study: TorusStudy,
    pub median_rows: Vec<TorusRow>,
    pub ci_rows: Vec<TorusRow>,
    pub replicates: Vec<TorusReplicate>,
    pub failures: Vec<Failure>,
}

impl TorusOutcome {
    pub fn rows(&self, rule: EdgeRuleKind) -> &[TorusRow] {
        match rule {
            EdgeRuleKind::Median => &self.median_rows,
            EdgeRuleKind::Ci => &self.ci_rows,
        }
    }

    pub fn row(&self, rule: EdgeRuleKind, method: TorusMethod) -> Option<&TorusRow> {
        let i = self.study.methods.iter().position(|m| *m == method)?;
        self.rows(rule).get(i)
    }

    /// Posterior covariance traces on the first replication, one per method.
    pub fn first_traces(&self) -> Vec<f64> {
        self.replicates.first().map(|r| r.outcomes.iter().map(|o| o.covariance_trace).collect()).unwrap_or_default()
    }
}

pub fn run_torus(plan: &ExperimentPlan, study: &TorusStudy) -> CliResult<TorusOutcome> {
    study.validate()?;
    let truth = study.scenario.truth()?;
    let results = run_replications(&plan.seeds, plan.jobs, |_, seed| torus_replicate(study, &truth, seed, false))?;
    let (replicates, failed) = split_failures(results)?;
    Ok(TorusOutcome {
        study: study.clone(),
        median_rows: aggregate_torus(study, &replicates, EdgeRuleKind::Median),
        ci_rows: aggregate_torus(study, &replicates, EdgeRuleKind::Ci),
        replicates,
        failures: failures(failed),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct DensityOutcome {
    pub studies: Vec<TvStudy>,
    pub rows: Vec<TvRow>,
    /// Per scenario, the successful replications.
    pub replicates: Vec<Vec<TvReplicate>>,
    pub failures: Vec<Failure>,
}

pub fn run_density(plan: &ExperimentPlan, studies: &[TvStudy]) -> CliResult<DensityOutcome> {
    let mut rows = Vec::new();
    let mut all = Vec::new();
    let mut failed = Vec::new();
    for study in studies {
        study.validate()?;
        let results = run_replications(&plan.seeds, plan.jobs, |_, seed| tv_replicate(study, seed))?;
        let (reps, f) = split_failures(results)?;
        rows.extend(aggregate_tv(study, &reps));
        all.push(reps);
        failed.extend(f);
    }
    Ok(DensityOutcome { studies: studies.to_vec(), rows, replicates: all, failures: failures(failed) })
}

pub fn density_studies() -> Vec<TvStudy> {
    vec![TvStudy::new(Scenario::Mixture), TvStudy::new(Scenario::Ring)]
}

/// Targets for the ring scenario with common noise.
pub fn density_checks(outcome: &DensityOutcome) -> Vec<Check> {
    let mut checks = Vec::new();
    let find = |m: &str| outcome.rows.iter().find(|r| r.scenario == 2 && r.method == m);
    let n1 = outcome
        .studies
        .iter()
        .any(|s| s.scenario == Scenario::Ring && s.noises.contains(&TvNoise::Common));
    if let (true, Some(model), Some(kde)) = (n1, find("N1"), find("KDE")) {
        let wins = model.beats_kde.unwrap_or(0.0);
        checks.push(Check::new("scenario 2 N1 beats KDE share", wins, ">= 0.80", wins >= 0.8));
        checks.push(Check::new("scenario 2 N1 mean ABE", model.abe, "0.350 +- 0.10", (model.abe - 0.350).abs() <= 0.10));
        checks.push(Check::new("scenario 2 KDE mean ABE", kde.abe, "0.581 +- 0.12", (kde.abe - 0.581).abs() <= 0.12));
        let cp = model.cp.unwrap_or(f64::NAN);
        checks.push(Check::new("scenario 2 N1 CP (%)", cp, "[88, 99]", (88.0..=99.0).contains(&cp)));
    }
    checks
}

pub fn torus_checks(table: TableId, outcome: &TorusOutcome) -> Vec<Check> {
    let mut checks = Vec::new();
    let nc_off = TorusMethod::NcBayes { noise_update: false };
    let get = |rule, m| outcome.row(rule, m);
    match table {
        TableId::ChainMedian | TableId::ChainInterval => {
            if let Some(r) = get(EdgeRuleKind::Median, nc_off) {
                let (rec, prec) = (r.recall.unwrap_or(0.0), r.precision.unwrap_or(0.0));
                checks.push(Check::new("NC-Bayes median recall", rec, ">= 0.95", rec >= 0.95));
                checks.push(Check::new("NC-Bayes median precision", prec, ">= 0.95", prec >= 0.95));
                checks.push(Check::new("NC-Bayes median accuracy", r.accuracy, ">= 0.98", r.accuracy >= 0.98));
            }
            if let (Some(ci), Some(med)) = (get(EdgeRuleKind::Ci, nc_off), get(EdgeRuleKind::Median, nc_off)) {
                let cp = ci.cp.unwrap_or(f64::NAN);
                let prec = ci.precision.unwrap_or(0.0);
                checks.push(Check::new("NC-Bayes interval CP (%)", cp, "[95, 100]", (95.0..=100.0).contains(&cp)));
                checks.push(Check::new("NC-Bayes interval precision", prec, ">= 0.99", prec >= 0.99));
                let (a, b) = (ci.recall.unwrap_or(0.0), med.recall.unwrap_or(0.0));
                checks.push(Check::new("NC-Bayes interval recall", a, "< median-rule recall", a < b));
            }
            if let Some(r) = get(EdgeRuleKind::Median, TorusMethod::HBayes { w: 0.2 }) {
                checks.push(Check::new("H-Bayes w=0.2 median accuracy", r.accuracy, ">= 0.85", r.accuracy >= 0.85));
            }
            if let Some(r) = get(EdgeRuleKind::Median, TorusMethod::HBayes { w: 5.0 }) {
                let prec = r.precision.unwrap_or(1.0);
                checks.push(Check::new("H-Bayes w=5 median precision", prec, "<= 0.5", prec <= 0.5));
            }
            let hb: Vec<(f64, f64)> = outcome
                .study
                .methods
                .iter()
                .zip(outcome.first_traces())
                .filter_map(|(m, t)| match m {
                    TorusMethod::HBayes { w } => Some((*w, t)),
                    _ => None,
                })
                .collect();
            if hb.len() >= 2 {
                let mut sorted = hb.clone();
                sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
                let ok = sorted.windows(2).all(|p| p[1].1 < p[0].1);
                checks.push(Check::new("H-Bayes covariance trace decreasing in w", sorted[0].1, "strictly decreasing", ok));
            }
        }
        TableId::CycleMedian | TableId::CycleInterval => {
            let n = outcome.replicates.len().max(1) as f64;
            for (rule, name) in [(EdgeRuleKind::Median, "median"), (EdgeRuleKind::Ci, "interval")] {
                if let Some(r) = get(rule, nc_off) {
                    let share = r.perfect as f64 / n;
                    checks.push(Check::new(&format!("NC-Bayes {name} perfect-recovery share"), share, ">= 0.95", share >= 0.95));
                }
            }
        }
        _ => {}
    }
    checks
}
