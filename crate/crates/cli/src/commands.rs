//! Subcommand implementations. Each returns the process exit code.

use crate::cli::{Cli, Command, EdgeArgs, HBayesArgs, PhaseInput, ReproduceArgs, RunLength, TorusCommand, TorusFitArgs, TorusSimulateArgs, TvCommand, TvFitArgs, TvModelArgs, TvSimulateArgs};
use crate::config::{resolve_seed, FileConfig};
use crate::experiments::{
    scenario_index, torus_table_csv, tv_table_csv, EdgeRuleKind, TorusMethod, TorusScenario, TorusStudy, TvStudy,
};
use crate::failure::{invalid, CliResult};
use crate::manifest::RunManifest;
use crate::reproduce::{density_checks, density_studies, run_density, run_torus, torus_checks, Check, DensityOutcome, ExperimentPlan, TableId, TorusOutcome};
use nalgebra::DMatrix;
use ncbayes::expfam::NoiseMode;
use ncbayes::gibbs::GibbsConfig;
use ncbayes::hscore::{run_hbayes, HBayesConfig};
use ncbayes::pg::{pg1_mean, pg1_variance, sample_pg1, PgTilt};
use ncbayes::rng::derive_seed;
use ncbayes::shrinkage::PriorMode;
use ncbayes::torus::export::{write_dot, write_edge_csv, write_interval_csv};
use ncbayes::torus::model::{coefficient_count, edge_list, wrap_rows};
use ncbayes::torus::{detect_edges_ci, detect_edges_median, fit_torus_ncbayes, EdgeDecisionReport, TorusFitConfig};
use ncbayes::tv::{fit_tv_density, kde_baseline, read_incidents, BandwidthRule, DensityGrid, GeoBounds, Scenario, TvFitConfig, TvNoise};
use ncbayes::RandomStream;
use serde::{Deserialize, Serialize};
use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::time::Instant;

/// Global settings after merging flags, config file and environment.
#[derive(Debug, Clone)]
pub struct Context {
    pub file: FileConfig,
    pub seed: u64,
    pub jobs: usize,
    pub out: PathBuf,
}

impl Context {
    pub fn from_cli(cli: &Cli) -> CliResult<Self> {
        let file = match &cli.config {
            Some(p) => FileConfig::load(p)?,
            None => FileConfig::default(),
        };
        let seed = resolve_seed(cli.seed, &file)?;
        let jobs = cli.jobs.or(file.jobs).unwrap_or(1);
        if jobs == 0 {
            return Err(invalid("--jobs must be positive"));
        }
        let out = cli.out.clone().or_else(|| file.out.clone()).unwrap_or_else(|| PathBuf::from("nc-bayes-out"));
        Ok(Self { file, seed, jobs, out })
    }

    fn manifest(&self) -> RunManifest {
        RunManifest::new(&self.out, self.seed)
    }

    fn gibbs(&self, run: &RunLength, base: &mut GibbsConfig) {
        let g = &self.file.gibbs;
        if let Some(v) = run.iterations.or(g.iterations) {
            base.iterations = v;
        }
        if let Some(v) = run.burn_in.or(g.burn_in) {
            base.burn_in = v;
        }
        if let Some(v) = run.thin.or(g.thin) {
            base.thin = v;
        }
    }

    fn reps(&self, flag: Option<usize>) -> usize {
        flag.or(self.file.reps).unwrap_or(20)
    }
}

pub fn run(cli: Cli) -> CliResult<i32> {
    let ctx = Context::from_cli(&cli)?;
    match cli.command {
        Command::PgSelftest(a) => pg_selftest_command(&ctx, a.draws),
        Command::Tv(TvCommand::Simulate(a)) => tv_simulate(&ctx, &a),
        Command::Tv(TvCommand::Fit(a)) => tv_fit(&ctx, &a),
        Command::Torus(TorusCommand::Simulate(a)) => torus_simulate(&ctx, &a),
        Command::Torus(TorusCommand::Fit(a)) => torus_fit(&ctx, &a),
        Command::Torus(TorusCommand::FitHbayes(a)) => torus_fit_hbayes(&ctx, &a),
        Command::Reproduce(a) => reproduce(&ctx, &a),
    }
}

fn on_off(flag: Option<&str>, file: Option<bool>, default: bool) -> bool {
    match flag {
        Some(s) => s == "on",
        None => file.unwrap_or(default),
    }
}

fn print_checks(checks: &[Check]) {
    for c in checks {
        println!("{} {}: {:.4} (target {})", if c.pass { "PASS" } else { "FAIL" }, c.name, c.value, c.target);
    }
}

// ------------------------------------------------------------ pg-selftest

#[derive(Debug, Clone, Serialize)]
pub struct PgMoment {
    pub c: f64,
    pub mean: f64,
    pub expected_mean: f64,
    pub standard_error: f64,
    pub z: f64,
    pub variance: f64,
    pub expected_variance: f64,
    pub within_4se: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct PgReport {
    pub seed: u64,
    pub draws: usize,
    pub moments: Vec<PgMoment>,
    pub seconds: f64,
    pub pass: bool,
}

pub const PG_TILTS: [f64; 4] = [0.0, 0.5, 2.0, 5.0];

/// Moment check of the PG(1, c) sampler at each tilt in [`PG_TILTS`].
pub fn pg_selftest(draws: usize, seed: u64) -> CliResult<PgReport> {
    if draws < 2 {
        return Err(invalid("--draws must be at least 2"));
    }
    let start = Instant::now();
    let mut moments = Vec::new();
    for (i, &c) in PG_TILTS.iter().enumerate() {
        let tilt = PgTilt::new(c)?;
        let mut rng = RandomStream::new(derive_seed(seed, i as u64));
        let xs: Vec<f64> = (0..draws).map(|_| sample_pg1(tilt, &mut rng)).collect();
        let mean = ncbayes::stats::mean(&xs);
        let var = ncbayes::stats::variance(&xs);
        let expected_variance = pg1_variance(tilt);
        let se = (expected_variance / draws as f64).sqrt();
        let z = (mean - pg1_mean(tilt)) / se;
        moments.push(PgMoment {
            c,
            mean,
            expected_mean: pg1_mean(tilt),
            standard_error: se,
            z,
            variance: var,
            expected_variance,
            within_4se: z.abs() < 4.0,
        });
    }
    let pass = moments.iter().all(|m| m.within_4se);
    Ok(PgReport { seed, draws, moments, seconds: start.elapsed().as_secs_f64(), pass })
}

fn pg_selftest_command(ctx: &Context, draws: usize) -> CliResult<i32> {
    let mut m = ctx.manifest();
    m.set_config(&serde_json::json!({ "draws": draws, "tilts": PG_TILTS }))?;
    let report = m.stage("sample", || pg_selftest(draws, ctx.seed))?;
    println!("{}", serde_json::to_string_pretty(&report)?);
    m.write_json("pg_selftest.json", &report)?;
    m.finish()?;
    Ok(if report.pass { 0 } else { 1 })
}

// ------------------------------------------------------------ density

fn apply_tv_model(ctx: &Context, a: &TvModelArgs, cfg: &mut TvFitConfig) -> CliResult<()> {
    let f = &ctx.file.tv;
    if let Some(s) = a.noise.as_deref().or(f.noise.as_deref()) {
        cfg.noise = TvNoise::parse(s)?;
    }
    if let Some(v) = a.basis_count.or(f.basis_count) {
        cfg.basis_count = v;
    }
    if let Some(v) = a.bandwidth.or(f.bandwidth) {
        cfg.bandwidth = Some(v);
    }
    if let Some(v) = a.refresh.or(f.refresh) {
        cfg.refresh = v;
    }
    if let Some(v) = f.noise_count {
        cfg.noise_count = Some(v);
    }
    ctx.gibbs(&a.run, &mut cfg.gibbs);
    cfg.gibbs.validate()?;
    Ok(())
}

fn write_density_outputs(m: &mut RunManifest, outcome: &DensityOutcome, checks: &[Check], plan: &ExperimentPlan) -> CliResult<()> {
    m.diagnostics.failed_replications = outcome.failures.len();
    m.write_json(
        "metrics.json",
        &serde_json::json!({
            "plan": plan,
            "rows": outcome.rows,
            "checks": checks,
            "failures": outcome.failures,
            "replications": outcome.replicates,
        }),
    )?;
    m.write_text("table.csv", &tv_table_csv(&outcome.rows))?;
    let mut s = String::from("scenario,replication,seed,method,abe_model,abe_kde,coverage,interval_length\n");
    for (study, reps) in outcome.studies.iter().zip(&outcome.replicates) {
        for (r, rep) in reps.iter().enumerate() {
            for (noise, res) in study.noises.iter().zip(&rep.results) {
                s.push_str(&format!(
                    "{},{},{},{},{:.6},{:.6},{:.3},{:.6}\n",
                    scenario_index(study.scenario),
                    r,
                    rep.seed,
                    crate::experiments::noise_label(*noise),
                    res.abe_model,
                    res.abe_kde,
                    res.coverage,
                    res.interval_length
                ));
            }
        }
    }
    m.write_text("replications.csv", &s)?;
    Ok(())
}

fn tv_simulate(ctx: &Context, a: &TvSimulateArgs) -> CliResult<i32> {
    let mut study = TvStudy::new(Scenario::from_index(a.scenario)?);
    apply_tv_model(ctx, &a.model, &mut study.fit)?;
    study.noises = vec![study.fit.noise];
    let f = &ctx.file.tv;
    study.times = a.times.or(f.times).unwrap_or(study.times);
    study.per_time = a.per_time.or(f.per_time).unwrap_or(study.per_time);
    study.eval_points = a.eval_points.or(f.eval_points).unwrap_or(study.eval_points);
    let plan = ExperimentPlan::new(TableId::Density, ctx.reps(a.reps), ctx.seed, ctx.jobs)?;
    let mut m = ctx.manifest();
    m.set_config(&serde_json::json!({ "study": study, "plan": plan }))?;
    let outcome = m.stage("replications", || run_density(&plan, std::slice::from_ref(&study)))?;
    print!("{}", tv_table_csv(&outcome.rows));
    write_density_outputs(&mut m, &outcome, &[], &plan)?;
    m.finish()?;
    Ok(0)
}

fn tv_fit(ctx: &Context, a: &TvFitArgs) -> CliResult<i32> {
    let f = &ctx.file.tv;
    let bounds = match (&a.bounds, f.lon_min, f.lon_max, f.lat_min, f.lat_max) {
        (Some(b), ..) if b.len() != 4 => return Err(invalid("--bounds takes LON_MIN,LON_MAX,LAT_MIN,LAT_MAX")),
        (Some(b), ..) => Some(GeoBounds { lon: (b[0], b[1]), lat: (b[2], b[3]) }),
        (None, Some(a0), Some(a1), Some(b0), Some(b1)) => Some(GeoBounds { lon: (a0, a1), lat: (b0, b1) }),
        (None, None, None, None, None) => None,
        _ => return Err(invalid("config bounds need all of lon_min, lon_max, lat_min, lat_max")),
    };
    if let Some(b) = &bounds {
        if !(b.lon.0 < b.lon.1 && b.lat.0 < b.lat.1) {
            return Err(invalid("bounds must be increasing: LON_MIN,LON_MAX,LAT_MIN,LAT_MAX"));
        }
    }
    let mut cfg = TvFitConfig { noise: TvNoise::Adaptive, ..TvFitConfig::default() };
    apply_tv_model(ctx, &a.model, &mut cfg)?;
    cfg.gibbs.seed = ctx.seed;
    let grid = a.grid.or(f.grid).unwrap_or(60);
    if grid < 2 {
        return Err(invalid("--grid must be at least 2"));
    }

    let mut m = ctx.manifest();
    m.set_config(&serde_json::json!({ "fit": cfg, "grid": grid, "bounds": bounds.map(|b| [b.lon.0, b.lon.1, b.lat.0, b.lat.1]) }))?;
    m.add_input(&a.input)?;
    let data = m.stage("read", || read_incidents(&a.input, bounds))?;
    m.note("rejected_rows", data.rejected);
    m.note("points_per_month", data.months.iter().map(Vec::len).collect::<Vec<_>>());
    let fit = m.stage("fit", || fit_tv_density(&data.months, &cfg))?;
    m.diagnostics.ess_warnings = fit.draws.ess_warnings;
    m.diagnostics.jitter_retries = fit.draws.jitter_events;
    m.diagnostics.noise_refreshes = fit.draws.noise_refreshes;

    let (points, weight) = DensityGrid::regular_points(&fit.domain, grid, grid)?;
    let estimate = m.stage("density grid", || fit.density_grid(&points, weight, 0.95));
    estimate.save_csv(&m.output("density_grid.csv")?)?;
    let mut kde_values = Vec::new();
    for month in &data.months {
        let k = kde_baseline(month, &BandwidthRule::Silverman)?;
        kde_values.push(points.iter().map(|x| k.density(x)).collect());
    }
    let mut kde = DensityGrid::new(points, weight, kde_values);
    kde.renormalize();
    kde.save_csv(&m.output("kde_grid.csv")?)?;
    m.finish()?;
    Ok(0)
}

// ------------------------------------------------------------ torus

fn parse_prior(flag: Option<&str>, file: Option<&str>, default: PriorMode) -> CliResult<PriorMode> {
    match flag.or(file) {
        Some(s) => Ok(PriorMode::parse(s)?),
        None => Ok(default),
    }
}

fn apply_edges(ctx: &Context, e: &EdgeArgs, threshold: &mut f64, level: &mut f64) -> CliResult<()> {
    let t = &ctx.file.torus;
    *threshold = e.threshold.or(t.threshold).unwrap_or(*threshold);
    *level = e.level.or(t.level).unwrap_or(*level);
    if !(*threshold > 0.0) {
        return Err(invalid("threshold must be positive"));
    }
    if !(*level > 0.0 && *level < 1.0) {
        return Err(invalid("level must lie in (0, 1)"));
    }
    Ok(())
}

fn apply_torus_study(ctx: &Context, study: &mut TorusStudy, run: &RunLength, edges: &EdgeArgs) -> CliResult<()> {
    let t = &ctx.file.torus;
    study.prior = parse_prior(None, t.prior.as_deref(), study.prior)?;
    study.hbayes_prior = parse_prior(None, ctx.file.hbayes.prior.as_deref(), study.hbayes_prior)?;
    study.tau_fixed = t.tau_fixed.unwrap_or(study.tau_fixed);
    study.slab_c = t.slab_c.unwrap_or(study.slab_c);
    study.alpha = t.alpha.unwrap_or(study.alpha);
    study.noise_count = t.noise_count.or(study.noise_count);
    let mut g = GibbsConfig { iterations: study.iterations, burn_in: study.burn_in, thin: study.thin, ..GibbsConfig::default() };
    ctx.gibbs(run, &mut g);
    g.validate()?;
    (study.iterations, study.burn_in, study.thin) = (g.iterations, g.burn_in, g.thin);
    apply_edges(ctx, edges, &mut study.threshold, &mut study.level)
}

fn write_torus_outputs(m: &mut RunManifest, outcome: &TorusOutcome, rule: EdgeRuleKind, checks: &[Check], plan: &ExperimentPlan) -> CliResult<()> {
    for r in &outcome.replicates {
        for o in &r.outcomes {
            m.diagnostics.ess_warnings += o.counters.ess_warnings;
            m.diagnostics.jitter_retries += o.counters.jitter_retries;
            m.diagnostics.noise_refreshes += o.counters.noise_refreshes;
        }
    }
    m.diagnostics.failed_replications = outcome.failures.len();
    let rates: Vec<f64> = outcome.replicates.iter().filter_map(|r| r.acceptance_rate).collect();
    if !rates.is_empty() {
        m.note("rejection_acceptance_rates", &rates);
    }
    if outcome.study.scenario == TorusScenario::Er30 {
        let truth = outcome.study.scenario.truth()?;
        m.note("random_graph_edges", truth.true_edges().iter().filter(|e| **e).count());
    }
    m.write_json(
        "metrics.json",
        &serde_json::json!({
            "plan": plan,
            "study": outcome.study,
            "rule": rule,
            "rows": outcome.rows(rule),
            "median_rows": outcome.median_rows,
            "ci_rows": outcome.ci_rows,
            "checks": checks,
            "failures": outcome.failures,
            "replications": outcome.replicates,
        }),
    )?;
    m.write_text("table.csv", &torus_table_csv(outcome.rows(rule)))?;
    let mut s = String::from("replication,seed,method,w,noise_update,rule,recall,precision,accuracy,cp\n");
    for (i, r) in outcome.replicates.iter().enumerate() {
        for (method, o) in outcome.study.methods.iter().zip(&r.outcomes) {
            let (w, nu) = match method {
                TorusMethod::NcBayes { noise_update } => (String::new(), noise_update.to_string()),
                TorusMethod::HBayes { w } => (w.to_string(), String::new()),
            };
            for (name, g) in [("median", &o.median), ("ci", &o.ci)] {
                let f = |v: Option<f64>| v.map(|x| format!("{x:.4}")).unwrap_or_default();
                s.push_str(&format!(
                    "{i},{},{},{w},{nu},{name},{},{},{:.4},{:.2}\n",
                    r.seed,
                    method.name(),
                    f(g.recall),
                    f(g.precision),
                    g.accuracy,
                    g.cp_phi
                ));
            }
        }
    }
    m.write_text("replications.csv", &s)?;
    Ok(())
}

/// Edge lists, DOT graph and interval table for one set of coefficient draws.
fn emit_graph(
    m: &mut RunManifest,
    draws: &DMatrix<f64>,
    d: usize,
    labels: Option<&[String]>,
    threshold: f64,
    level: f64,
    interval_edges: Option<&[(usize, usize)]>,
) -> CliResult<EdgeDecisionReport> {
    let med = detect_edges_median(draws, d, threshold)?;
    let ci = detect_edges_ci(draws, d, level)?;
    write_edge_csv(&med, BufWriter::new(File::create(m.output("edges_median.csv")?)?))?;
    write_edge_csv(&ci, BufWriter::new(File::create(m.output("edges_ci.csv")?)?))?;
    write_dot(&med, d, labels, BufWriter::new(File::create(m.output("graph.dot")?)?))?;
    let detected: Vec<(usize, usize)> = med.edges.iter().zip(&med.decisions).filter(|(_, d)| **d).map(|(e, _)| *e).collect();
    let listed = interval_edges.unwrap_or(&detected);
    write_interval_csv(draws, d, listed, BufWriter::new(File::create(m.output("intervals.csv")?)?))?;
    Ok(med)
}

fn torus_simulate(ctx: &Context, a: &TorusSimulateArgs) -> CliResult<i32> {
    let scenario = TorusScenario::parse(&a.scenario)?;
    let mut study = TorusStudy::new(scenario);
    apply_torus_study(ctx, &mut study, &a.run, &a.edges)?;
    study.prior = parse_prior(a.prior.as_deref(), ctx.file.torus.prior.as_deref(), study.prior)?;
    study.tau_fixed = a.tau_fixed.unwrap_or(study.tau_fixed);
    let noise_update = on_off(a.noise_update.as_deref(), ctx.file.torus.noise_update, false);
    study.methods = vec![TorusMethod::NcBayes { noise_update }];
    let plan = ExperimentPlan::new(TableId::ChainMedian, ctx.reps(a.reps), ctx.seed, ctx.jobs)?;
    let mut m = ctx.manifest();
    m.set_config(&serde_json::json!({ "study": study, "plan": plan }))?;
    let outcome = m.stage("replications", || run_torus(&plan, &study))?;
    print!("{}", torus_table_csv(&outcome.median_rows));
    print!("{}", torus_table_csv(&outcome.ci_rows).lines().skip(1).map(|l| format!("{l}\n")).collect::<String>());
    write_torus_outputs(&mut m, &outcome, EdgeRuleKind::Median, &[], &plan)?;

    // Graph artifacts for the first replication, fitted again from its seed.
    let truth = scenario.truth()?;
    let first = crate::experiments::torus_replicate(&study, &truth, plan.seeds[0], true)?;
    let true_edges: Vec<(usize, usize)> =
        edge_list(truth.nodes()).into_iter().zip(truth.true_edges()).filter(|(_, t)| *t).map(|(e, _)| e).collect();
    emit_graph(&mut m, &first.draws[0], truth.nodes(), None, study.threshold, study.level, Some(&true_edges))?;
    m.finish()?;
    Ok(0)
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum LabelFile {
    Names(Vec<String>),
    Channels { channels: Vec<String>, #[serde(default)] regions: Vec<String> },
}

/// Phase matrix plus optional channel labels (from a header row or the
/// JSON sidecar, which wins).
pub fn read_phases(input: &PhaseInput) -> CliResult<(Vec<Vec<f64>>, Option<Vec<String>>, Option<PathBuf>)> {
    let text = std::fs::read_to_string(&input.input)?;
    let mut rows = Vec::new();
    let mut header = None;
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split(',').map(str::trim).collect();
        let parsed: std::result::Result<Vec<f64>, _> = cells.iter().map(|c| c.parse::<f64>()).collect();
        match parsed {
            Ok(v) => rows.push(v),
            Err(_) if rows.is_empty() && header.is_none() => header = Some(cells.iter().map(|c| c.to_string()).collect()),
            Err(_) => return Err(invalid(format!("line {}: non-numeric angle", i + 1))),
        }
    }
    if rows.is_empty() {
        return Err(invalid("phase file has no data rows"));
    }
    let d = rows[0].len();
    if rows.iter().any(|r| r.len() != d) || header.as_ref().is_some_and(|h: &Vec<String>| h.len() != d) {
        return Err(invalid("every row must have the same number of columns"));
    }
    if rows.iter().flatten().any(|v| !v.is_finite()) {
        return Err(invalid("angles must be finite"));
    }
    let sidecar = input.labels.clone().or_else(|| {
        let p = input.input.with_extension("json");
        p.exists().then_some(p)
    });
    let labels = match &sidecar {
        Some(p) => Some(read_labels(p, d)?),
        None => header,
    };
    Ok((rows, labels, sidecar))
}

fn read_labels(path: &Path, d: usize) -> CliResult<Vec<String>> {
    let text = std::fs::read_to_string(path)?;
    let parsed: LabelFile = serde_json::from_str(&text).map_err(|e| invalid(format!("labels {}: {e}", path.display())))?;
    let labels = match parsed {
        LabelFile::Names(v) => v,
        LabelFile::Channels { channels, regions } => channels
            .into_iter()
            .enumerate()
            .map(|(i, c)| match regions.get(i) {
                Some(r) => format!("{c} ({r})"),
                None => c,
            })
            .collect(),
    };
    if labels.len() != d {
        return Err(invalid(format!("labels name {} channels but the data has {d}", labels.len())));
    }
    Ok(labels)
}

fn label_edges(report: &EdgeDecisionReport, labels: Option<&[String]>) -> Vec<serde_json::Value> {
    let name = |j: usize| labels.and_then(|l| l.get(j).cloned()).unwrap_or_else(|| format!("x{}", j + 1));
    report
        .edges
        .iter()
        .zip(&report.decisions)
        .zip(&report.strengths)
        .filter(|((_, d), _)| **d)
        .map(|(((j, k), _), s)| serde_json::json!({ "j": j + 1, "k": k + 1, "from": name(*j), "to": name(*k), "strength": s }))
        .collect()
}

fn torus_fit(ctx: &Context, a: &TorusFitArgs) -> CliResult<i32> {
    let t = &ctx.file.torus;
    let mut cfg = TorusFitConfig {
        prior: parse_prior(a.prior.as_deref(), t.prior.as_deref(), PriorMode::RegularizedGrouped)?,
        noise_count: a.noise_count.or(t.noise_count),
        tau_fixed: a.tau_fixed.or(t.tau_fixed).unwrap_or(false),
        slab_c: t.slab_c.unwrap_or(1.0),
        ..TorusFitConfig::default()
    };
    let noise_update = on_off(a.noise_update.as_deref(), t.noise_update, true);
    cfg.gibbs.noise_mode = if noise_update { NoiseMode::Adaptive } else { NoiseMode::Generator };
    cfg.gibbs.adaptive.alpha = t.alpha.unwrap_or(0.2);
    cfg.gibbs.adaptive.burn_in_only = !a.adapt_throughout;
    cfg.gibbs.seed = ctx.seed;
    ctx.gibbs(&a.run, &mut cfg.gibbs);
    cfg.gibbs.validate()?;
    let (mut threshold, mut level) = (0.02, 0.9);
    apply_edges(ctx, &a.edges, &mut threshold, &mut level)?;

    let mut m = ctx.manifest();
    m.set_config(&serde_json::json!({ "fit": cfg, "threshold": threshold, "level": level }))?;
    m.add_input(&a.data.input)?;
    let (mut data, labels, sidecar) = m.stage("read", || read_phases(&a.data))?;
    if let Some(p) = &sidecar {
        m.add_input(p)?;
    }
    m.note("wrapped_angles", wrap_rows(&mut data));
    let d = data[0].len();
    let fit = m.stage("fit", || fit_torus_ncbayes(&data, &cfg))?;
    m.diagnostics.ess_warnings = fit.draws.ess_warnings;
    m.diagnostics.jitter_retries = fit.draws.jitter_events;
    m.diagnostics.noise_refreshes = fit.draws.noise_refreshes;
    fit.draws.save_csv(&m.output("draws.csv")?)?;
    let coef = fit.draws.draws.columns(0, coefficient_count(d)).into_owned();
    let med = emit_graph(&mut m, &coef, d, labels.as_deref(), threshold, level, None)?;
    m.write_json(
        "summary.json",
        &serde_json::json!({
            "nodes": d,
            "observations": data.len(),
            "beta_mean": fit.beta_mean(),
            "detected": label_edges(&med, labels.as_deref()),
        }),
    )?;
    println!("{} of {} edges detected", med.detected(), med.edges.len());
    m.finish()?;
    Ok(0)
}

fn torus_fit_hbayes(ctx: &Context, a: &HBayesArgs) -> CliResult<i32> {
    let h = &ctx.file.hbayes;
    let mut cfg = HBayesConfig {
        w: a.w.or(h.w).unwrap_or(0.2),
        prior: parse_prior(a.prior.as_deref(), h.prior.as_deref(), PriorMode::Grouped)?,
        ..HBayesConfig::default()
    };
    cfg.gibbs.seed = ctx.seed;
    ctx.gibbs(&a.run, &mut cfg.gibbs);
    cfg.gibbs.validate()?;
    let (mut threshold, mut level) = (0.02, 0.9);
    apply_edges(ctx, &a.edges, &mut threshold, &mut level)?;

    let mut m = ctx.manifest();
    m.set_config(&serde_json::json!({ "fit": cfg, "threshold": threshold, "level": level }))?;
    m.add_input(&a.data.input)?;
    let (mut data, labels, sidecar) = m.stage("read", || read_phases(&a.data))?;
    if let Some(p) = &sidecar {
        m.add_input(p)?;
    }
    m.note("wrapped_angles", wrap_rows(&mut data));
    let d = data[0].len();
    let fit = m.stage("fit", || run_hbayes(&data, &cfg))?;
    m.diagnostics.jitter_retries = fit.draws.jitter_events;
    fit.draws.save_csv(&m.output("draws.csv")?)?;
    let med = emit_graph(&mut m, &fit.draws.draws, d, labels.as_deref(), threshold, level, None)?;
    m.write_json(
        "summary.json",
        &serde_json::json!({
            "nodes": d,
            "observations": data.len(),
            "w": cfg.w,
            "covariance_trace": crate::experiments::covariance_trace(&fit.draws.draws),
            "detected": label_edges(&med, labels.as_deref()),
        }),
    )?;
    println!("{} of {} edges detected", med.detected(), med.edges.len());
    m.finish()?;
    Ok(0)
}

// ------------------------------------------------------------ reproduce

fn reproduce(ctx: &Context, a: &ReproduceArgs) -> CliResult<i32> {
    let table = TableId::parse(&a.table)?;
    let plan = ExperimentPlan::new(table, ctx.reps(a.reps), ctx.seed, ctx.jobs)?;
    let mut m = RunManifest::new(&ctx.out.join(table.slug()), ctx.seed);
    match table.torus() {
        Some((scenario, rule)) => {
            let mut study = TorusStudy::new(scenario);
            apply_torus_study(ctx, &mut study, &a.run, &EdgeArgs::default())?;
            m.set_config(&serde_json::json!({ "study": study, "plan": plan }))?;
            let outcome = m.stage("replications", || run_torus(&plan, &study))?;
            let checks = torus_checks(table, &outcome);
            print!("{}", torus_table_csv(outcome.rows(rule)));
            print_checks(&checks);
            write_torus_outputs(&mut m, &outcome, rule, &checks, &plan)?;
        }
        None => {
            let mut studies = density_studies();
            for s in &mut studies {
                apply_tv_model(ctx, &TvModelArgs { run: a.run.clone(), ..TvModelArgs::default() }, &mut s.fit)?;
                let f = &ctx.file.tv;
                s.times = f.times.unwrap_or(s.times);
                s.per_time = f.per_time.unwrap_or(s.per_time);
                s.eval_points = f.eval_points.unwrap_or(s.eval_points);
            }
            m.set_config(&serde_json::json!({ "studies": studies, "plan": plan }))?;
            let outcome = m.stage("replications", || run_density(&plan, &studies))?;
            let checks = density_checks(&outcome);
            print!("{}", tv_table_csv(&outcome.rows));
            print_checks(&checks);
            write_density_outputs(&mut m, &outcome, &checks, &plan)?;
        }
    }
    m.finish()?;
    Ok(0)
}
