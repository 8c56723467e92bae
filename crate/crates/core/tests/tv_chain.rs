mod common;

use common::{linspace, loglik};
use nalgebra::DVector;
use ncbayes::expfam::{build_labeled, Domain, ExpFamModel, NoiseDistribution, UniformNoise};
use ncbayes::gibbs::GibbsConfig;
use ncbayes::noise::AdaptiveSettings;
use ncbayes::stats::{ks_against_grid, mean};
use ncbayes::tv::*;
use ncbayes::RandomStream;
use rand::Rng;

fn unit_square() -> Domain {
    Domain::rectangle(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap()
}

fn one_knot() -> RbfBasis {
    RbfBasis::new(vec![vec![0.5, 0.5]], 0.5, unit_square()).unwrap()
}

/// Draws from the density ∝ exp(θ Φ(x)) on the unit square.
fn tilted_sample(basis: &RbfBasis, theta: f64, n: usize, rng: &mut RandomStream) -> Vec<Vec<f64>> {
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let x = vec![rng.random::<f64>(), rng.random::<f64>()];
        let phi = basis.rbf_design(&x)[0];
        // Φ ≤ 1, so exp(θ(Φ − 1)) is a valid acceptance probability for θ ≥ 0.
        if rng.random::<f64>() < (theta * (phi - 1.0)).exp() {
            out.push(x);
        }
    }
    out
}

#[test]
fn single_time_single_basis_matches_quadrature() {
    let basis = one_knot();
    let noise_law = UniformNoise::new(unit_square());
    let mut rng = RandomStream::new(21);
    let data = tilted_sample(&basis, 2.0, 5, &mut rng);
    let noise = noise_law.sample(7, &mut rng);
    let set = build_labeled(&data, &noise, &basis, &noise_law).unwrap();
    let rows: Vec<(Vec<f64>, f64, bool)> = (0..set.len()).map(|i| (set.z(i).to_vec(), set.offsets()[i], set.label(i))).collect();
    let priors = TvPriors { beta_var: 10.0, ..TvPriors::default() };

    // Integrating λ ~ IG(1, 1) out of θ ~ N(0, λ) leaves a density ∝ (1 + θ²/2)^{-3/2}.
    let thetas = linspace(-30.0, 30.0, 1201);
    let betas = linspace(-20.0, 20.0, 801);
    let mut theta_mass = vec![0.0; thetas.len()];
    let mut beta_mass = vec![0.0; betas.len()];
    let mut logs = Vec::with_capacity(thetas.len() * betas.len());
    for &th in &thetas {
        for &b in &betas {
            logs.push(-1.5 * (1.0 + th * th / 2.0).ln() - b * b / (2.0 * priors.beta_var) + loglik(&rows, &[th, b]));
        }
    }
    let top = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    for (i, _) in thetas.iter().enumerate() {
        for (j, _) in betas.iter().enumerate() {
            let w = (logs[i * betas.len() + j] - top).exp();
            theta_mass[i] += w;
            beta_mass[j] += w;
        }
    }

    let mut cfg = GibbsConfig::new(102_000, 2000, 5);
    cfg.thin = 5;
    let mut sets = vec![set];
    let draws = run_tv_gibbs(&basis, &mut sets, &priors, TvNoiseUpdate::Fixed, &cfg).unwrap();
    assert_eq!(draws.kept(), 20_000);
    let mut th: Vec<f64> = draws.theta.column(0).iter().copied().collect();
    let mut be: Vec<f64> = draws.beta.column(0).iter().copied().collect();
    let ks_theta = ks_against_grid(&mut th, &thetas, &theta_mass);
    let ks_beta = ks_against_grid(&mut be, &betas, &beta_mass);
    assert!(ks_theta < 0.05 && ks_beta < 0.05, "KS θ {ks_theta:.4}, β {ks_beta:.4}");
}

#[test]
fn intervals_are_calibrated_on_a_well_specified_model() {
    // A narrow basis and a few hundred points, so the likelihood dominates
    // the random-walk prior.
    let basis = RbfBasis::new(vec![vec![0.5, 0.5]], 0.25, unit_square()).unwrap();
    let noise_law = UniformNoise::new(unit_square());
    let mut rng = RandomStream::new(33);
    let (points, weight) = DensityGrid::monte_carlo_points(&unit_square(), 100, &mut rng);
    let true_theta = 2.0;
    let truth_vals: Vec<f64> = points.iter().map(|x| (true_theta * basis.rbf_design(x)[0]).exp()).collect();
    let truth = DensityGrid::new(points.clone(), weight, vec![truth_vals]);
    let mut coverages = Vec::new();
    for rep in 0..50u64 {
        let data = tilted_sample(&basis, true_theta, 200, &mut rng);
        let noise = noise_law.sample(200, &mut rng);
        let mut sets = vec![build_labeled(&data, &noise, &basis, &noise_law).unwrap()];
        let cfg = GibbsConfig::new(1500, 500, 100 + rep);
        let draws = run_tv_gibbs(&basis, &mut sets, &TvPriors::default(), TvNoiseUpdate::Fixed, &cfg).unwrap();
        let fit = TvFit { basis: basis.clone(), domain: unit_square(), draws };
        let per_draw = vec![fit.density_draws(0, &points, weight)];
        coverages.push(interval_metrics(&per_draw, &truth, 0.95).unwrap().0);
    }
    let cp = mean(&coverages);
    assert!((90.0..=99.0).contains(&cp), "coverage {cp:.1}");
}

#[test]
fn stronger_smoothing_prior_reduces_roughness() {
    let data = scenario1_generate(4, 40, 5).unwrap();
    let roughness = |scale: f64| {
        let mut cfg = TvFitConfig { basis_count: 6, ..TvFitConfig::default() };
        cfg.priors.lambda_scale = scale;
        cfg.gibbs = GibbsConfig::new(2500, 500, 9);
        let fit = fit_tv_density(&data, &cfg).unwrap();
        mean(&fit.draws.roughness())
    };
    let loose = roughness(1.0);
    let tight = roughness(0.01);
    assert!(tight < loose, "{tight} vs {loose}");
}

#[test]
fn fits_are_reproducible_and_adaptive_mode_refreshes_noise() {
    let data = scenario2_generate(3, 40, 2).unwrap();
    let mut cfg = TvFitConfig { basis_count: 5, noise: TvNoise::Adaptive, ..TvFitConfig::default() };
    cfg.gibbs = GibbsConfig::new(400, 100, 4);
    cfg.gibbs.adaptive = AdaptiveSettings::default();
    let a = fit_tv_density(&data, &cfg).unwrap();
    let b = fit_tv_density(&data, &cfg).unwrap();
    assert_eq!(a.draws, b.draws);
    assert_eq!(a.draws.noise_refreshes, 3 * 400 / 50);
    assert!(a.draws.theta.iter().all(|v| v.is_finite()));

    cfg.gibbs.adaptive.burn_in_only = true;
    let c = fit_tv_density(&data, &cfg).unwrap();
    assert_eq!(c.draws.noise_refreshes, 3 * 100 / 50);
}

#[test]
fn per_time_noise_and_density_grid() {
    let data = scenario1_generate(3, 50, 7).unwrap();
    let mut cfg = TvFitConfig { basis_count: 8, noise: TvNoise::PerTime, ..TvFitConfig::default() };
    cfg.gibbs = GibbsConfig::new(600, 200, 1);
    let fit = fit_tv_density(&data, &cfg).unwrap();
    let (pts, w) = DensityGrid::regular_points(&fit.domain, 30, 30).unwrap();
    let grid = fit.density_grid(&pts, w, 0.95);
    assert!(grid.masses().iter().all(|m| (m - 1.0).abs() < 1e-8));
    let (lo, hi) = (grid.lower.as_ref().unwrap(), grid.upper.as_ref().unwrap());
    for t in 0..3 {
        assert!(lo[t].iter().zip(&hi[t]).all(|(a, b)| a <= b));
    }
    let mut buf = Vec::new();
    grid.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert!(text.starts_with("t,x,y,mean,lo,hi\n"));
    assert_eq!(text.lines().count(), 1 + 3 * 900);
}

#[test]
fn invalid_inputs_are_rejected() {
    let cfg = TvFitConfig::default();
    assert!(fit_tv_density(&vec![vec![vec![0.0, 0.0]], vec![]], &cfg).is_err());
    let basis = one_knot();
    let mut empty: Vec<ncbayes::expfam::LabeledSet> = Vec::new();
    assert!(run_tv_gibbs(&basis, &mut empty, &TvPriors::default(), TvNoiseUpdate::Fixed, &GibbsConfig::new(10, 0, 0)).is_err());
    let _ = DVector::<f64>::zeros(1);
    let _ = basis.dim();
}
