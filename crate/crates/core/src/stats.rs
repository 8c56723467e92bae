//! Summary statistics and goodness-of-fit tests.

use statrs::distribution::{ChiSquared, ContinuousCDF};

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance.
pub fn variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() as f64 - 1.0)
}

/// Quantile of already-sorted data with linear interpolation between order
/// statistics (the "type 7" definition).
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of empty sample");
    let h = (sorted.len() - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn sort_floats(xs: &mut [f64]) {
    xs.sort_by(|a, b| a.total_cmp(b));
}

pub fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    sort_floats(&mut v);
    quantile_sorted(&v, 0.5)
}

/// Equal-tailed interval `[q_{(1-level)/2}, q_{(1+level)/2}]`.
pub fn equal_tailed_interval(xs: &[f64], level: f64) -> (f64, f64) {
    let mut v = xs.to_vec();
    sort_floats(&mut v);
    let a = 0.5 * (1.0 - level);
    (quantile_sorted(&v, a), quantile_sorted(&v, 1.0 - a))
}

/// Asymptotic Kolmogorov distribution survival function `P(K > x)`.
pub fn kolmogorov_sf(x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    let mut s = 0.0;
    for k in 1..=200 {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * x * x).exp();
        s += if k % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * s).clamp(0.0, 1.0)
}

/// Two-sample Kolmogorov–Smirnov statistic. Sorts both inputs in place.
pub fn ks_two_sample(a: &mut [f64], b: &mut [f64]) -> f64 {
    sort_floats(a);
    sort_floats(b);
    let (n, m) = (a.len(), b.len());
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < n && j < m {
        let x = a[i].min(b[j]);
        while i < n && a[i] <= x {
            i += 1;
        }
        while j < m && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / n as f64 - j as f64 / m as f64).abs());
    }
    d
}

/// Asymptotic p-value of the two-sample KS test (with the usual
/// small-sample correction to the effective size).
pub fn ks_two_sample_pvalue(a: &mut [f64], b: &mut [f64]) -> f64 {
    let d = ks_two_sample(a, b);
    let ne = (a.len() * b.len()) as f64 / (a.len() + b.len()) as f64;
    let sq = ne.sqrt();
    kolmogorov_sf((sq + 0.12 + 0.11 / sq) * d)
}

/// One-sample KS distance between data and a continuous CDF. Sorts `xs`.
pub fn ks_one_sample<F: Fn(f64) -> f64>(xs: &mut [f64], cdf: F) -> f64 {
    sort_floats(xs);
    let n = xs.len() as f64;
    xs.iter().enumerate().fold(0.0f64, |d, (i, &x)| {
        let f = cdf(x);
        d.max((f - i as f64 / n).abs()).max(((i + 1) as f64 / n - f).abs())
    })
}

pub fn ks_one_sample_pvalue<F: Fn(f64) -> f64>(xs: &mut [f64], cdf: F) -> f64 {
    let n = xs.len() as f64;
    let d = ks_one_sample(xs, cdf);
    let sq = n.sqrt();
    kolmogorov_sf((sq + 0.12 + 0.11 / sq) * d)
}

/// KS distance between an empirical sample and a distribution given on a
/// grid as (point, mass) pairs; the reference CDF is piecewise linear.
pub fn ks_against_grid(xs: &mut [f64], grid: &[f64], masses: &[f64]) -> f64 {
    let total: f64 = masses.iter().sum();
    let mut cdf = Vec::with_capacity(grid.len());
    let mut acc = 0.0;
    for m in masses {
        acc += m / total;
        cdf.push(acc);
    }
    let eval = |x: f64| -> f64 {
        match grid.binary_search_by(|g| g.total_cmp(&x)) {
            Ok(i) => cdf[i],
            Err(0) => 0.0,
            Err(i) if i >= grid.len() => 1.0,
            Err(i) => {
                let w = (x - grid[i - 1]) / (grid[i] - grid[i - 1]);
                cdf[i - 1] + w * (cdf[i] - cdf[i - 1])
            }
        }
    };
    ks_one_sample(xs, eval)
}

/// Chi-square test of homogeneity for two samples of counts over the same
/// cells. Cells empty in both samples are dropped. Returns (statistic, dof,
/// p-value).
pub fn chi_square_homogeneity(a: &[u64], b: &[u64]) -> (f64, usize, f64) {
    assert_eq!(a.len(), b.len());
    let na: u64 = a.iter().sum();
    let nb: u64 = b.iter().sum();
    let n = (na + nb) as f64;
    let mut stat = 0.0;
    let mut cells = 0usize;
    for (&x, &y) in a.iter().zip(b) {
        let tot = (x + y) as f64;
        if tot == 0.0 {
            continue;
        }
        cells += 1;
        let ea = tot * na as f64 / n;
        let eb = tot * nb as f64 / n;
        stat += (x as f64 - ea).powi(2) / ea + (y as f64 - eb).powi(2) / eb;
    }
    let dof = cells.saturating_sub(1).max(1);
    let p = 1.0 - ChiSquared::new(dof as f64).expect("positive dof").cdf(stat);
    (stat, dof, p)
}

/// Lag-k autocorrelation of a series.
pub fn autocorrelation(xs: &[f64], lag: usize) -> f64 {
    let m = mean(xs);
    let denom: f64 = xs.iter().map(|x| (x - m).powi(2)).sum();
    let num: f64 = xs.windows(lag + 1).map(|w| (w[0] - m) * (w[lag] - m)).sum();
    num / denom
}

/// Effective sample size of an MCMC trace from the initial positive
/// sequence of autocorrelations.
pub fn effective_sample_size(xs: &[f64]) -> f64 {
    let n = xs.len();
    let mut tau = 1.0;
    for lag in 1..n / 2 {
        let r = autocorrelation(xs, lag);
        if r <= 0.0 {
            break;
        }
        tau += 2.0 * r;
    }
    n as f64 / tau
}
