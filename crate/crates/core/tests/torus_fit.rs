use ncbayes::expfam::NoiseMode;
use ncbayes::gibbs::GibbsConfig;
use ncbayes::shrinkage::PriorMode;
use ncbayes::special::bessel_i;
use ncbayes::stats::median;
use ncbayes::torus::*;
use ncbayes::RandomStream;
use std::f64::consts::{PI, TAU};

fn quick(prior: PriorMode, mode: NoiseMode, iterations: usize, seed: u64) -> TorusFitConfig {
    TorusFitConfig { prior, gibbs: GibbsConfig::new(iterations, iterations / 3, seed).with_mode(mode), ..TorusFitConfig::default() }
}

#[test]
fn log_normalizer_of_a_von_mises_is_recovered() {
    // Midpoint quadrature of ∫ exp(2 cos x) dx against 2π I₀(2).
    let k = 20_000;
    let integral: f64 = (0..k).map(|i| (2.0 * (TAU * (i as f64 + 0.5) / k as f64).cos()).exp()).sum::<f64>() * TAU / k as f64;
    assert!((integral - TAU * bessel_i(0, 2.0)).abs() < 1e-10);
    let target = -integral.ln();
    assert!((target + 2.662).abs() < 1e-3);

    let mut rng = RandomStream::new(17);
    let data: Vec<Vec<f64>> = (0..500).map(|_| vec![sample_von_mises(0.0, 2.0, &mut rng)]).collect();
    let cfg = quick(PriorMode::Gaussian, NoiseMode::FixedSet, 4000, 3);
    let fit = fit_torus_ncbayes(&data, &cfg).unwrap();
    assert!((fit.beta_mean() - target).abs() < 0.1, "β mean {}", fit.beta_mean());
}

#[test]
fn independent_pair_is_shrunk_to_zero() {
    let mut quiet = 0;
    for seed in 0..20u64 {
        let mut rng = RandomStream::new(500 + seed);
        let data: Vec<Vec<f64>> = (0..200).map(|_| vec![TAU * rand::Rng::random::<f64>(&mut rng), TAU * rand::Rng::random::<f64>(&mut rng)]).collect();
        let fit = fit_torus_ncbayes(&data, &quick(PriorMode::Horseshoe, NoiseMode::Generator, 1500, seed)).unwrap();
        let all_small = (4..8).all(|c| median(&fit.draws.column(c)).abs() < 0.1);
        quiet += usize::from(all_small);
    }
    assert!(quiet >= 18, "{quiet} of 20 runs kept the null edge below 0.1");
}

#[test]
fn conditionally_independent_pair_is_rarely_detected() {
    // Six-node chain: nodes 1 and 3 are independent given node 2. A few
    // nodes are needed for the global scale to learn that the graph is sparse.
    let d = 6;
    let mut false_hits = 0;
    let mut chain_found = 0;
    for seed in 0..20u64 {
        let mut rng = RandomStream::new(900 + seed);
        let data = generate_vm_chain(d, 200, PI / 6.0, 2.0, &mut rng).unwrap();
        let fit = fit_torus_ncbayes(&data, &quick(PriorMode::RegularizedGrouped, NoiseMode::Generator, 1500, seed)).unwrap();
        let report = detect_edges_median(&fit.draws.draws, d, 0.1).unwrap();
        let decided = |j: usize, k: usize| report.edges.iter().zip(&report.decisions).any(|(e, dec)| *e == (j, k) && *dec);
        false_hits += usize::from(decided(0, 2));
        chain_found += usize::from((1..d).all(|k| decided(k - 1, k)));
    }
    assert!(false_hits * 100 < 15 * 20, "edge (1,3) detected in {false_hits} of 20 runs");
    assert!(chain_found >= 18, "chain recovered in {chain_found} of 20 runs");
}

#[test]
fn design_entries_are_bounded() {
    let mut rng = RandomStream::new(2);
    let data = generate_vm_chain(4, 50, 0.3, 1.0, &mut rng).unwrap();
    for x in &data {
        let z = torus_suff_stat(x);
        assert!(z.iter().all(|v| v.abs() <= 1.0));
        assert_eq!(*z.last().unwrap(), 1.0);
    }
}

#[test]
fn keeping_no_draws_is_an_error() {
    let data = vec![vec![0.1, 0.2]];
    let mut cfg = TorusFitConfig::default();
    cfg.gibbs.iterations = 10;
    cfg.gibbs.burn_in = 10;
    assert!(fit_torus_ncbayes(&data, &cfg).is_err());
}

#[test]
fn adaptive_noise_runs_on_the_torus() {
    let mut rng = RandomStream::new(8);
    let data = generate_vm_chain(3, 150, PI / 6.0, 2.0, &mut rng).unwrap();
    let fit = fit_torus_ncbayes(&data, &quick(PriorMode::Grouped, NoiseMode::Adaptive, 600, 1)).unwrap();
    assert_eq!(fit.draws.noise_refreshes, 600 / 50);
    assert_eq!(fit.draws.noise_ess.len(), fit.draws.kept());
    assert!(fit.tau2_trace.iter().all(|t| *t > 0.0));
}
