//! Synthetic time-varying scenarios and incident-location ingestion.

use crate::error::{Error, Result};
use crate::rng::RandomStream;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use std::f64::consts::{PI, TAU};
use std::path::Path;

/// Per-time samples: `data[t][i]` is a 2-D point.
pub type TimeSeriesData = Vec<Vec<Vec<f64>>>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Scenario {
    /// Two Gaussian components drifting to the upper right.
    Mixture,
    /// A ring that widens in radius and thins over time.
    Ring,
}

impl Scenario {
    pub fn from_index(i: u32) -> Result<Self> {
        match i {
            1 => Ok(Scenario::Mixture),
            2 => Ok(Scenario::Ring),
            _ => Err(Error::InvalidParameter(format!("unknown scenario {i}"))),
        }
    }

    pub fn generate(self, times: usize, per_time: usize, seed: u64) -> Result<TimeSeriesData> {
        match self {
            Scenario::Mixture => scenario1_generate(times, per_time, seed),
            Scenario::Ring => scenario2_generate(times, per_time, seed),
        }
    }

    /// True density at time `t` (1-based).
    pub fn density(self, t: usize, times: usize, x: &[f64]) -> f64 {
        match self {
            Scenario::Mixture => {
                let (m1, m2) = mixture_means(t, times);
                0.4 * normal2(x, m1, [0.7, 0.2]) + 0.6 * normal2(x, m2, [0.5, 0.5])
            }
            Scenario::Ring => {
                let (mu, sd) = ring_params(t, times);
                let rho = x[0].hypot(x[1]);
                if rho == 0.0 {
                    return 0.0;
                }
                let g = |r: f64| (-0.5 * ((r - mu) / sd).powi(2)).exp() / (sd * TAU.sqrt());
                // Negative radii fold onto the opposite direction.
                (g(rho) + g(-rho)) / (TAU * rho)
            }
        }
    }
}

fn normal2(x: &[f64], mean: [f64; 2], var: [f64; 2]) -> f64 {
    let q = (x[0] - mean[0]).powi(2) / var[0] + (x[1] - mean[1]).powi(2) / var[1];
    (-0.5 * q).exp() / (2.0 * PI * (var[0] * var[1]).sqrt())
}

/// Component means at time `t` of `times` (1-based).
pub fn mixture_means(t: usize, times: usize) -> ([f64; 2], [f64; 2]) {
    let s = 4.0 * t as f64 / times as f64;
    ([-2.0 + s, 0.0], [-2.0 + s, -2.0 + s])
}

/// Ring radius mean and standard deviation at time `t` (1-based).
pub fn ring_params(t: usize, times: usize) -> (f64, f64) {
    let u = (t - 1) as f64 / (times - 1) as f64;
    (1.0 + 2.0 * u, 0.5 - 0.2 * u)
}

fn check(times: usize, per_time: usize) -> Result<()> {
    if times == 0 || per_time == 0 {
        return Err(Error::InvalidParameter("time and sample counts must be positive".into()));
    }
    Ok(())
}

pub fn scenario1_generate(times: usize, per_time: usize, seed: u64) -> Result<TimeSeriesData> {
    check(times, per_time)?;
    let mut rng = RandomStream::new(seed);
    let z = Normal::new(0.0, 1.0).expect("unit normal");
    Ok((1..=times)
        .map(|t| {
            let (m1, m2) = mixture_means(t, times);
            (0..per_time)
                .map(|_| {
                    let (m, sd) = if rng.random::<f64>() < 0.4 {
                        (m1, [0.7f64.sqrt(), 0.2f64.sqrt()])
                    } else {
                        (m2, [0.5f64.sqrt(); 2])
                    };
                    vec![m[0] + sd[0] * z.sample(&mut rng), m[1] + sd[1] * z.sample(&mut rng)]
                })
                .collect()
        })
        .collect())
}

pub fn scenario2_generate(times: usize, per_time: usize, seed: u64) -> Result<TimeSeriesData> {
    check(times, per_time)?;
    if times < 2 {
        return Err(Error::InvalidParameter("the ring scenario needs at least two time points".into()));
    }
    let mut rng = RandomStream::new(seed);
    Ok((1..=times)
        .map(|t| {
            let (mu, sd) = ring_params(t, times);
            let radius = Normal::new(mu, sd).expect("positive sd");
            (0..per_time)
                .map(|_| {
                    let r = radius.sample(&mut rng);
                    let a = TAU * rng.random::<f64>();
                    vec![r * a.cos(), r * a.sin()]
                })
                .collect()
        })
        .collect())
}

/// Rectangle bounds on (longitude, latitude).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoBounds {
    pub lon: (f64, f64),
    pub lat: (f64, f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct IncidentData {
    /// Twelve monthly point sets.
    pub months: TimeSeriesData,
    pub rejected: usize,
}

#[derive(Debug, Deserialize)]
struct IncidentRow {
    month: i64,
    longitude: f64,
    latitude: f64,
}

/// Reads `month,longitude,latitude` rows. Rows with a month outside 1..=12,
/// non-finite coordinates, or coordinates outside `bounds` are counted as
/// rejected.
pub fn read_incidents(path: &Path, bounds: Option<GeoBounds>) -> Result<IncidentData> {
    let mut reader = csv::Reader::from_path(path)?;
    let mut months = vec![Vec::new(); 12];
    let mut rejected = 0;
    for row in reader.deserialize::<IncidentRow>() {
        let row = row?;
        let inside = bounds.is_none_or(|b| {
            (b.lon.0..=b.lon.1).contains(&row.longitude) && (b.lat.0..=b.lat.1).contains(&row.latitude)
        });
        if !(1..=12).contains(&row.month) || !row.longitude.is_finite() || !row.latitude.is_finite() || !inside {
            rejected += 1;
            continue;
        }
        months[(row.month - 1) as usize].push(vec![row.longitude, row.latitude]);
    }
    if months.iter().any(Vec::is_empty) {
        return Err(Error::Precondition("every month needs at least one incident".into()));
    }
    Ok(IncidentData { months, rejected })
}
