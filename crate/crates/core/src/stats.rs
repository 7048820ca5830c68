//! Two-sample and one-sample Kolmogorov–Smirnov distances, bootstrap
//! confidence intervals and binned conditional means.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::rng::{stream, tag};

fn sorted(v: &[f64]) -> Vec<f64> {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    s
}

/// Sup-distance between the empirical CDFs of `a` and `b`.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(domain("ks_two_sample", "non-empty samples", 0.0));
    }
    let (a, b) = (sorted(a), sorted(b));
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    Ok(d)
}

/// Sup-distance between the empirical CDF of `a` and `cdf`.
pub fn ks_vs_cdf<F: Fn(f64) -> f64>(a: &[f64], cdf: F) -> Result<f64> {
    if a.is_empty() {
        return Err(domain("ks_vs_cdf", "non-empty sample", 0.0));
    }
    let a = sorted(a);
    let n = a.len() as f64;
    let mut d: f64 = 0.0;
    for (k, &x) in a.iter().enumerate() {
        let f = cdf(x);
        d = d.max((k as f64 + 1.0) / n - f).max(f - k as f64 / n);
    }
    Ok(d)
}

/// Asymptotic 95% critical value of the two-sample statistic.
pub fn ks_band_two_sample(na: usize, nb: usize) -> f64 {
    1.358 * ((na + nb) as f64 / (na as f64 * nb as f64)).sqrt()
}

/// Asymptotic 95% critical value of the one-sample statistic.
pub fn ks_band_one_sample(n: usize) -> f64 {
    1.358 / (n as f64).sqrt()
}

pub fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

pub fn variance(v: &[f64]) -> f64 {
    let m = mean(v);
    v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() as f64 - 1.0)
}

/// Empirical quantile by linear interpolation between order statistics.
pub fn quantile(v: &[f64], p: f64) -> f64 {
    let s = sorted(v);
    quantile_sorted(&s, p)
}

pub fn quantile_sorted(s: &[f64], p: f64) -> f64 {
    if s.is_empty() {
        return f64::NAN;
    }
    let pos = p.clamp(0.0, 1.0) * (s.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    s[lo] + (s[hi] - s[lo]) * (pos - lo as f64)
}

pub fn median(v: &[f64]) -> f64 {
    quantile(v, 0.5)
}

/// Percentile bootstrap interval for a statistic, resamples run in parallel
/// with one stream per resample index.
pub fn bootstrap_ci<S>(values: &[f64], statistic: S, resamples: usize, level: f64, seed: u64) -> (f64, f64)
where
    S: Fn(&[f64]) -> f64 + Sync,
{
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len();
    let mut stats: Vec<f64> = (0..resamples)
        .into_par_iter()
        .map(|r| {
            let mut rng = stream(seed, tag::BOOTSTRAP, r as u64);
            let sample: Vec<f64> = (0..n).map(|_| values[rng.random_range(0..n)]).collect();
            statistic(&sample)
        })
        .collect();
    stats.sort_by(f64::total_cmp);
    let alpha = 0.5 * (1.0 - level);
    (quantile_sorted(&stats, alpha), quantile_sorted(&stats, 1.0 - alpha))
}

pub fn bootstrap_mean_ci(values: &[f64], resamples: usize, seed: u64) -> (f64, f64) {
    bootstrap_ci(values, mean, resamples, 0.95, seed)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinStat {
    pub lo: (f64, f64),
    pub hi: (f64, f64),
    pub count: usize,
    pub mean: f64,
    pub ci: (f64, f64),
    /// Bins with fewer than `MIN_BIN_COUNT` members are flagged and excluded
    /// from pass/fail decisions.
    pub flagged: bool,
}

pub const MIN_BIN_COUNT: usize = 30;

/// Mean of `values` within rectangular bins of the 2-D `keys`, with 95%
/// bootstrap intervals (1000 resamples, seeded).
pub fn binned_conditional_mean(
    keys: &[(f64, f64)],
    values: &[f64],
    edges_x: &[f64],
    edges_y: &[f64],
    seed: u64,
) -> Vec<BinStat> {
    assert_eq!(keys.len(), values.len());
    let mut out = Vec::new();
    for (bx, wx) in edges_x.windows(2).enumerate() {
        for (by, wy) in edges_y.windows(2).enumerate() {
            let members: Vec<f64> = keys
                .iter()
                .zip(values)
                .filter(|((kx, ky), _)| *kx >= wx[0] && *kx < wx[1] && *ky >= wy[0] && *ky < wy[1])
                .map(|(_, &v)| v)
                .collect();
            let count = members.len();
            let (m, ci) = if count == 0 {
                (f64::NAN, (f64::NAN, f64::NAN))
            } else {
                let bin_seed = crate::rng::mix(&[seed, bx as u64, by as u64]);
                (mean(&members), bootstrap_mean_ci(&members, 1000, bin_seed))
            };
            out.push(BinStat {
                lo: (wx[0], wy[0]),
                hi: (wx[1], wy[1]),
                count,
                mean: m,
                ci,
                flagged: count < MIN_BIN_COUNT,
            });
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantileRow {
    pub p: f64,
    #[serde(rename = "qA")]
    pub q_a: f64,
    #[serde(rename = "qB")]
    pub q_b: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CiEntry {
    pub name: String,
    pub lo: f64,
    pub hi: f64,
    pub target: f64,
    pub hit: bool,
}

impl CiEntry {
    pub fn new(name: impl Into<String>, lo: f64, hi: f64, target: f64) -> Self {
        Self {
            name: name.into(),
            lo,
            hi,
            target,
            hit: lo <= target && target <= hi,
        }
    }
}

/// Output of one acceptance experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub id: String,
    #[serde(rename = "n_A")]
    pub n_a: usize,
    #[serde(rename = "n_B")]
    pub n_b: usize,
    pub ks: f64,
    pub ks_threshold: f64,
    pub quantiles: Vec<QuantileRow>,
    pub cis: Vec<CiEntry>,
    pub pass: bool,
    pub master_seed: u64,
}

impl ComparisonReport {
    /// Builds a report from two samples; `pass` follows from the KS
    /// threshold and the CI entries.
    pub fn from_samples(
        id: impl Into<String>,
        a: &[f64],
        b: &[f64],
        ks_threshold: f64,
        cis: Vec<CiEntry>,
        master_seed: u64,
    ) -> Result<Self> {
        let ks = ks_two_sample(a, b)?;
        let (sa, sb) = (sorted(a), sorted(b));
        let quantiles = [0.05, 0.25, 0.5, 0.75, 0.95]
            .iter()
            .map(|&p| QuantileRow {
                p,
                q_a: quantile_sorted(&sa, p),
                q_b: quantile_sorted(&sb, p),
            })
            .collect();
        let mut r = Self {
            id: id.into(),
            n_a: a.len(),
            n_b: b.len(),
            ks,
            ks_threshold,
            quantiles,
            cis,
            pass: false,
            master_seed,
        };
        r.refresh_pass();
        Ok(r)
    }

    pub fn refresh_pass(&mut self) {
        self.pass = self.ks <= self.ks_threshold && self.cis.iter().all(|c| c.hit);
    }
}
