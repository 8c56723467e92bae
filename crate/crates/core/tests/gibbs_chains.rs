//! Stationary behaviour of the PG Gibbs samplers against quadrature.

mod common;

use common::*;
use nalgebra::{DMatrix, DVector};
use ncbayes::expfam::{build_labeled, ExpFamModel, NoiseDistribution, NoiseMode, UniformNoise};
use ncbayes::gibbs::*;
use ncbayes::stats::{effective_sample_size, ks_against_grid, mean, variance};
use ncbayes::{Error, RandomStream};

fn rows(model: &dyn ExpFamModel, data: &[Vec<f64>], noise: &[Vec<f64>], q: &dyn NoiseDistribution) -> Vec<(Vec<f64>, f64, bool)> {
    let set = build_labeled(data, noise, model, q).unwrap();
    (0..set.len()).map(|i| (set.z(i).to_vec(), set.offsets()[i], set.label(i))).collect()
}

fn mc_se(xs: &[f64]) -> f64 {
    (variance(xs) / effective_sample_size(xs)).sqrt()
}

/// Returns (mean, sd) of the normalizer under the exact classification
/// posterior with a N(0, 10) prior.
fn intercept_oracle(rows: &[(Vec<f64>, f64, bool)]) -> (f64, f64) {
    let grid = linspace(-6.0, 6.0, 20_001);
    let logd: Vec<f64> = grid.iter().map(|&b| loglik(rows, &[b]) - b * b / 20.0).collect();
    let (m, s, _) = grid_moments(&grid, &logd);
    (m, s)
}

#[test]
fn intercept_only_matches_quadrature() {
    let model = InterceptOnly { domain: unit_interval() };
    let q = UniformNoise::new(unit_interval());
    let mut rng = RandomStream::new(1);
    let data = q.sample(30, &mut rng);
    let noise = q.sample(20, &mut rng);
    let (m_true, sd_true) = intercept_oracle(&rows(&model, &data, &noise, &q));

    let prior = GaussianPrior::isotropic(1, 10.0).unwrap();
    let draws = run_fixed_noise(&model, &data, &noise, &q, &prior, &GibbsConfig::new(21_000, 1_000, 7)).unwrap();
    assert_eq!(draws.names, vec!["beta".to_string()]);
    let beta = draws.column(0);
    let se = mc_se(&beta);
    let sd = variance(&beta).sqrt();
    assert!((mean(&beta) - m_true).abs() < 3.0 * se, "mean {} vs {m_true} (se {se})", mean(&beta));
    let sd_se = sd / (2.0 * effective_sample_size(&beta)).sqrt();
    assert!((sd - sd_true).abs() < 3.0 * sd_se, "sd {sd} vs {sd_true}");
}

#[test]
fn degenerate_prior_pins_the_draws() {
    let model = Linear1D { domain: unit_interval() };
    let q = UniformNoise::new(unit_interval());
    let mut rng = RandomStream::new(2);
    let data = exp_tilted(40, 2.0, &mut rng);
    let noise = q.sample(40, &mut rng);
    let a0 = DVector::from_vec(vec![0.8, -0.3]);
    let prior = GaussianPrior::new(a0.clone(), DMatrix::identity(2, 2) * 1e-12).unwrap();
    let draws = run_fixed_noise(&model, &data, &noise, &q, &prior, &GibbsConfig::new(300, 100, 3)).unwrap();
    for row in draws.draws.row_iter() {
        assert!((row[0] - a0[0]).abs() < 1e-4 && (row[1] - a0[1]).abs() < 1e-4);
    }
}

struct Grid2 {
    theta: Vec<f64>,
    beta: Vec<f64>,
    /// Joint unnormalized weights, row-major over (theta, beta).
    w: Vec<f64>,
}

impl Grid2 {
    fn new(rows: &[(Vec<f64>, f64, bool)], prior_var: f64, centre: (f64, f64), half: (f64, f64), k: usize) -> Self {
        let theta = linspace(centre.0 - half.0, centre.0 + half.0, k);
        let beta = linspace(centre.1 - half.1, centre.1 + half.1, k);
        let mut logd = Vec::with_capacity(k * k);
        for &t in &theta {
            for &b in &beta {
                logd.push(loglik(rows, &[t, b]) - (t * t + b * b) / (2.0 * prior_var));
            }
        }
        let max = logd.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let w = logd.iter().map(|l| (l - max).exp()).collect();
        Self { theta, beta, w }
    }

    fn marginal(&self, axis: usize) -> (Vec<f64>, Vec<f64>) {
        let k = self.theta.len();
        let mut m = vec![0.0; k];
        for i in 0..k {
            for j in 0..k {
                m[if axis == 0 { i } else { j }] += self.w[i * k + j];
            }
        }
        (if axis == 0 { self.theta.clone() } else { self.beta.clone() }, m)
    }

    fn moments(&self, axis: usize) -> (f64, f64) {
        let (g, m) = self.marginal(axis);
        let logd: Vec<f64> = m.iter().map(|v| v.ln()).collect();
        let (mu, sd, _) = grid_moments(&g, &logd);
        (mu, sd)
    }
}

#[test]
fn two_parameter_chain_matches_grid_quadrature() {
    let model = Linear1D { domain: unit_interval() };
    let q = UniformNoise::new(unit_interval());
    let mut rng = RandomStream::new(3);
    let data = exp_tilted(40, 1.5, &mut rng);
    let noise = q.sample(40, &mut rng);
    let prior = GaussianPrior::isotropic(2, 10.0).unwrap();
    let draws = run_fixed_noise(&model, &data, &noise, &q, &prior, &GibbsConfig::new(21_000, 1_000, 11)).unwrap();
    let (t, b) = (draws.column(0), draws.column(1));
    let centre = (mean(&t), mean(&b));
    let half = (10.0 * variance(&t).sqrt(), 10.0 * variance(&b).sqrt());
    let grid = Grid2::new(&rows(&model, &data, &noise, &q), 10.0, centre, half, 601);
    for (axis, xs) in [(0, &t), (1, &b)] {
        let (mu, sd) = grid.moments(axis);
        assert!((mean(xs) - mu).abs() < 0.02, "axis {axis}: mean {} vs {mu}", mean(xs));
        assert!((variance(xs).sqrt() - sd).abs() < 0.02, "axis {axis}: sd vs {sd}");
    }
}

#[test]
fn small_problem_marginals_pass_ks() {
    let model = Linear1D { domain: unit_interval() };
    let q = UniformNoise::new(unit_interval());
    let mut rng = RandomStream::new(4);
    let data = exp_tilted(6, 1.0, &mut rng);
    let noise = q.sample(6, &mut rng);
    let prior = GaussianPrior::isotropic(2, 4.0).unwrap();
    let cfg = GibbsConfig::new(21_000, 1_000, 5);
    let draws = run_fixed_noise(&model, &data, &noise, &q, &prior, &cfg).unwrap();
    let grid = Grid2::new(&rows(&model, &data, &noise, &q), 4.0, (0.0, 0.0), (12.0, 12.0), 1201);
    for axis in 0..2 {
        let (g, m) = grid.marginal(axis);
        let mut xs = draws.column(axis);
        let d = ks_against_grid(&mut xs, &g, &m);
        assert!(d < 0.05, "axis {axis}: KS {d}");
    }
}

#[test]
fn runs_are_reproducible() {
    let model = Linear1D { domain: unit_interval() };
    let q = UniformNoise::new(unit_interval());
    let mut rng = RandomStream::new(5);
    let data = exp_tilted(20, 1.0, &mut rng);
    let prior = GaussianPrior::isotropic(2, 10.0).unwrap();
    let cfg = GibbsConfig::new(200, 50, 99);
    let a = run_refreshed_noise(&model, &data, &q, 20, &prior, &cfg).unwrap();
    let b = run_refreshed_noise(&model, &data, &q, 20, &prior, &cfg).unwrap();
    assert_eq!(a, b);
    let mut other = cfg.clone();
    other.seed = 100;
    assert_ne!(a.draws, run_refreshed_noise(&model, &data, &q, 20, &prior, &other).unwrap().draws);
}

/// Always returns the same points.
struct ConstantNoise {
    points: Vec<Vec<f64>>,
    inner: UniformNoise,
}

impl NoiseDistribution for ConstantNoise {
    fn log_density(&self, x: &[f64]) -> f64 {
        self.inner.log_density(x)
    }
    fn sample(&self, m: usize, _rng: &mut RandomStream) -> Vec<Vec<f64>> {
        self.points.iter().cycle().take(m).cloned().collect()
    }
}

#[test]
fn refresh_with_constant_generator_equals_fixed_noise() {
    let model = Linear1D { domain: unit_interval() };
    let q = UniformNoise::new(unit_interval());
    let mut rng = RandomStream::new(6);
    let data = exp_tilted(25, 1.0, &mut rng);
    let noise = q.sample(15, &mut rng);
    let constant = ConstantNoise { points: noise.clone(), inner: q.clone() };
    let prior = GaussianPrior::isotropic(2, 10.0).unwrap();
    let cfg = GibbsConfig::new(300, 100, 12);
    let fixed = run_fixed_noise(&model, &data, &noise, &q, &prior, &cfg).unwrap();
    let refreshed = run_refreshed_noise(&model, &data, &constant, 15, &prior, &cfg).unwrap();
    assert_eq!(fixed.draws, refreshed.draws);
    assert_eq!(refreshed.noise_refreshes, 300);
    assert_eq!(fixed.noise_refreshes, 0);
}

#[test]
fn refreshed_noise_matches_average_over_noise_sets() {
    let model = InterceptOnly { domain: unit_interval() };
    let q = UniformNoise::new(unit_interval());
    let mut rng = RandomStream::new(7);
    let data = q.sample(40, &mut rng);
    let prior = GaussianPrior::isotropic(1, 10.0).unwrap();
    let cfg = GibbsConfig::new(11_000, 1_000, 13);
    let refreshed = run_refreshed_noise(&model, &data, &q, 40, &prior, &cfg).unwrap().column(0);

    let mut fixed_means = Vec::new();
    let mut se2 = 0.0;
    for k in 0..20 {
        let noise = q.sample(40, &mut rng);
        let mut c = cfg.clone();
        c.seed = 1000 + k;
        c.iterations = 6_000;
        let beta = run_fixed_noise(&model, &data, &noise, &q, &prior, &c).unwrap().column(0);
        se2 += mc_se(&beta).powi(2);
        fixed_means.push(mean(&beta));
    }
    let avg = mean(&fixed_means);
    let se = (mc_se(&refreshed).powi(2) + se2 / 400.0).sqrt();
    assert!((mean(&refreshed) - avg).abs() < 3.0 * se, "{} vs {avg} (se {se})", mean(&refreshed));
}

#[test]
fn empty_noise_count_is_rejected() {
    let model = InterceptOnly { domain: unit_interval() };
    let q = UniformNoise::new(unit_interval());
    let prior = GaussianPrior::isotropic(1, 10.0).unwrap();
    let r = run_refreshed_noise(&model, &[vec![0.5]], &q, 0, &prior, &GibbsConfig::new(10, 0, 1));
    assert!(matches!(r, Err(Error::Precondition(_))));
    let mismatch = run_with_prior(
        &model,
        &[vec![0.5]],
        NoisePlan::Refresh { generator: &q, m: 3 },
        &mut prior.clone(),
        &GibbsConfig::new(10, 0, 1),
    );
    assert!(matches!(mismatch, Err(Error::Precondition(_))));
}

#[test]
fn adaptive_noise_runs_and_records_ess() {
    let model = Linear1D { domain: unit_interval() };
    let q = UniformNoise::new(unit_interval());
    let mut rng = RandomStream::new(8);
    let data = exp_tilted(60, 2.0, &mut rng);
    let prior = GaussianPrior::isotropic(2, 10.0).unwrap();
    let cfg = GibbsConfig::new(600, 200, 21).with_mode(NoiseMode::Adaptive);
    let draws = run_adaptive(&model, &data, &q, 60, &prior, &cfg).unwrap();
    assert_eq!(draws.noise_ess.len(), 400);
    assert!(draws.noise_ess.iter().all(|e| *e >= 1.0 && *e <= 3000.0));
    assert_eq!(draws.noise_refreshes, 1 + 599 / 50);
    // The fitted slope should still point the right way.
    assert!(mean(&draws.column(0)) > 0.5);
}

fn hierarchical_groups(seeds: &[(u64, usize)]) -> Vec<(Vec<Vec<f64>>, Vec<Vec<f64>>)> {
    let q = UniformNoise::new(unit_interval());
    seeds
        .iter()
        .map(|&(s, n)| {
            let mut rng = RandomStream::new(s);
            (exp_tilted(n, 1.5, &mut rng), q.sample(n, &mut rng))
        })
        .collect()
}

#[test]
fn frozen_single_group_reduces_to_flat_model() {
    let model = Linear1D { domain: unit_interval() };
    let q = UniformNoise::new(unit_interval());
    let groups = hierarchical_groups(&[(30, 40)]);
    let init = HierarchicalState {
        mu: DVector::from_vec(vec![0.5]),
        sigma: DMatrix::from_element(1, 1, 3.0),
        mu_beta: -0.2,
        sigma_beta2: 5.0,
    };
    let cfg = GibbsConfig::new(2_000, 500, 31);
    let inputs: Vec<GroupInput> = groups.iter().map(|(d, n)| GroupInput { data: d, noise: n, density: &q }).collect();
    let h = run_hierarchical(&model, &inputs, &HyperPriors::weak(1), Some(init), true, &cfg).unwrap();
    let prior = GaussianPrior::new(DVector::from_vec(vec![0.5, -0.2]), DMatrix::from_row_slice(2, 2, &[3.0, 0.0, 0.0, 5.0])).unwrap();
    let flat = run_fixed_noise(&model, &groups[0].0, &groups[0].1, &q, &prior, &cfg).unwrap();
    for k in 0..2 {
        let (a, b) = (h.groups[0].column(k), flat.column(k));
        let se = (mc_se(&a).powi(2) + mc_se(&b).powi(2)).sqrt();
        assert!((mean(&a) - mean(&b)).abs() <= 3.0 * se);
    }
    assert!(h.mu_beta.iter().all(|&v| v == -0.2));
}

#[test]
fn identical_groups_are_exchangeable() {
    let model = Linear1D { domain: unit_interval() };
    let q = UniformNoise::new(unit_interval());
    let groups = hierarchical_groups(&[(40, 50), (40, 50)]);
    let inputs: Vec<GroupInput> = groups.iter().map(|(d, n)| GroupInput { data: d, noise: n, density: &q }).collect();
    let h = run_hierarchical(&model, &inputs, &HyperPriors::weak(1), None, false, &GibbsConfig::new(6_000, 1_000, 41)).unwrap();
    let (a, b) = (h.groups[0].column(0), h.groups[1].column(0));
    let se = (mc_se(&a).powi(2) + mc_se(&b).powi(2)).sqrt();
    assert!((mean(&a) - mean(&b)).abs() < 3.0 * se, "{} vs {}", mean(&a), mean(&b));
    assert!(h.sigma.iter().all(|s| s[(0, 0)] > 0.0));
    assert!(h.sigma_beta2.iter().all(|&v| v > 0.0));
}

#[test]
fn small_group_is_shrunk_toward_population_mean() {
    let model = Linear1D { domain: unit_interval() };
    let q = UniformNoise::new(unit_interval());
    let mut rng = RandomStream::new(50);
    // Four well-sampled groups with slope 2 and one small group with slope -1.
    let mut groups: Vec<(Vec<Vec<f64>>, Vec<Vec<f64>>)> =
        (0..4).map(|_| (exp_tilted(150, 2.0, &mut rng), q.sample(150, &mut rng))).collect();
    groups.push((exp_tilted(15, -1.0, &mut rng), q.sample(15, &mut rng)));
    let inputs: Vec<GroupInput> = groups.iter().map(|(d, n)| GroupInput { data: d, noise: n, density: &q }).collect();
    let cfg = GibbsConfig::new(6_000, 1_000, 51);
    let h = run_hierarchical(&model, &inputs, &HyperPriors::weak(1), None, false, &cfg).unwrap();
    let small = mean(&h.groups[4].column(0));
    let mu: Vec<f64> = h.mu.column(0).iter().copied().collect();
    let mu_mean = mean(&mu);

    let prior = GaussianPrior::isotropic(2, 100.0).unwrap();
    let flat = run_fixed_noise(&model, &groups[4].0, &groups[4].1, &q, &prior, &cfg).unwrap();
    let own = mean(&flat.column(0));
    let (lo, hi) = if own < mu_mean { (own, mu_mean) } else { (mu_mean, own) };
    assert!(small > lo && small < hi, "own {own}, pooled {small}, population {mu_mean}");
}
