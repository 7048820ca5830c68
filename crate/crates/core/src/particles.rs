//! Branching Brownian particles approximating super-Brownian motion started
//! from `αδ₀`, with occupation-density (local time) estimators.
//!
//! Each of `N` initial particles carries mass `m = α/N`. Per step of length
//! `dt` a particle moves by `√dt·N(0,1)` and, with probability `ρ dt`, either
//! dies or splits in two with equal odds. The mass process then has
//! per-step variance `m² ρ dt` per particle, so `ρ m = 4` reproduces the
//! martingale-measure variance `4∫X_s(φ²) ds` exactly in discrete time.

use rand::{Rng, SeedableRng};
use rand_distr::{Binomial, Distribution, StandardNormal};
use rand_xoshiro::Xoshiro256PlusPlus;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::drift;
use crate::error::{domain, Error, Result};
use crate::rng::{self, Stream};
use crate::sde::{self, GaussianNoise, MainConfig};
use crate::stats::{self, ComparisonReport, CiEntry};

/// Variance calibration `ρ·m`.
pub const BRANCH_CALIBRATION: f64 = 4.0;
/// Minimum number of replicates with `L̂^{a0} > 0.1` for a transition comparison.
pub const MIN_SURVIVORS: usize = 200;

/// A population snapshot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParticleCloud {
    pub positions: Vec<f64>,
    pub particle_mass: f64,
    pub branch_rate: f64,
    pub time: f64,
    pub alive: usize,
}

impl ParticleCloud {
    pub fn total_mass(&self) -> f64 {
        self.alive as f64 * self.particle_mass
    }

    /// Mass in `[lo, hi)`.
    pub fn mass_in(&self, lo: f64, hi: f64) -> f64 {
        self.positions.iter().filter(|&&x| x >= lo && x < hi).count() as f64 * self.particle_mass
    }
}

/// Parameters of one particle run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParticleConfig {
    pub alpha: f64,
    pub n: usize,
    pub dt: f64,
    /// Band centres run from `window.0` to `window.1`.
    pub window: (f64, f64),
    pub bandwidth: f64,
    pub horizon: f64,
    /// Population size above which a run is abandoned.
    pub budget: usize,
    /// Times at which the population is recorded.
    pub snapshot_times: Vec<f64>,
}

impl ParticleConfig {
    pub fn new(alpha: f64, n: usize, dt: f64, window: (f64, f64), bandwidth: f64) -> Self {
        Self {
            alpha,
            n,
            dt,
            window,
            bandwidth,
            horizon: 25.0,
            budget: 1 << 20,
            snapshot_times: Vec::new(),
        }
    }

    pub fn particle_mass(&self) -> f64 {
        self.alpha / self.n as f64
    }

    /// `ρ = 4N/α`.
    pub fn branch_rate(&self) -> f64 {
        BRANCH_CALIBRATION / self.particle_mass()
    }

    fn bands(&self) -> usize {
        ((self.window.1 - self.window.0) / self.bandwidth).round() as usize + 1
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0) {
            return Err(domain("simulate_particles", "alpha > 0", self.alpha));
        }
        if self.n == 0 {
            return Err(domain("simulate_particles", "N ≥ 1", 0.0));
        }
        if !(self.dt > 0.0 && self.dt <= 1e-3) {
            return Err(domain("simulate_particles", "dt in (0, 1e-3]", self.dt));
        }
        if !(self.branch_rate() * self.dt <= 1.0) {
            return Err(domain("simulate_particles", "branching probability ρ·dt ≤ 1", self.branch_rate() * self.dt));
        }
        if !(self.bandwidth >= 2.0 * self.dt.sqrt()) {
            return Err(domain("simulate_particles", "bandwidth ≥ 2√dt", self.bandwidth));
        }
        if !(self.window.1 > self.window.0) {
            return Err(domain("simulate_particles", "window lo < hi", self.window.0));
        }
        if !(self.horizon > 0.0) {
            return Err(domain("simulate_particles", "horizon > 0", self.horizon));
        }
        Ok(())
    }
}

/// Occupation mass·time per band of one replicate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OccupationRecord {
    pub band_centers: Vec<f64>,
    pub bandwidth: f64,
    pub occupation: Vec<f64>,
    pub horizon: f64,
    /// Extinction time; `None` if the population survived the horizon.
    pub extinction_time: Option<f64>,
    pub snapshots: Vec<ParticleCloud>,
}

impl OccupationRecord {
    fn band_index(&self, a: f64) -> Result<usize> {
        let lo = self.band_centers[0];
        let j = ((a - lo) / self.bandwidth).round();
        let last = self.band_centers.len() as f64 - 1.0;
        if !(j >= 2.0 && j <= last - 2.0) {
            return Err(domain("local_time_samples", "a inside the window with two bands of margin", a));
        }
        Ok(j as usize)
    }

    /// `L̂` at the band centred nearest to `a`.
    pub fn band_density(&self, j: usize) -> f64 {
        self.occupation[j] / self.bandwidth
    }
}

/// Runs one replicate to extinction or the horizon.
pub fn simulate_particles(cfg: &ParticleConfig, stream: &mut Stream) -> Result<OccupationRecord> {
    cfg.validate()?;
    // the inner loop runs on a fast generator seeded from the replicate stream
    let rng = &mut Xoshiro256PlusPlus::from_rng(stream);
    let m = cfg.particle_mass();
    let rho = cfg.branch_rate();
    // event iff the low 32 bits fall below the threshold; bit 32 picks split or death
    let threshold = (rho * cfg.dt * 4_294_967_296.0).round().min(u32::MAX as f64) as u32;
    let sd = cfg.dt.sqrt();
    let nb = cfg.bands();
    let lo_edge = cfg.window.0 - 0.5 * cfg.bandwidth;
    let inv_w = 1.0 / cfg.bandwidth;
    let mut counts = vec![0u64; nb];
    let mut pos = vec![0.0f64; cfg.n];
    let steps = (cfg.horizon / cfg.dt).round() as usize;
    let snap_steps: Vec<usize> = cfg.snapshot_times.iter().map(|t| (t / cfg.dt).round() as usize).collect();
    let mut snapshots = Vec::with_capacity(snap_steps.len());
    let mut extinction_time = None;
    for k in 1..=steps {
        let mut i = pos.len();
        while i > 0 {
            i -= 1;
            let n: f64 = rng.sample(StandardNormal);
            let x = pos[i] + sd * n;
            pos[i] = x;
            let s = (x - lo_edge) * inv_w;
            if s >= 0.0 && s < nb as f64 {
                counts[s as usize] += 1;
            }
            let r: u64 = rng.random();
            if (r as u32) < threshold {
                if r >> 32 & 1 == 1 {
                    pos.push(x);
                } else {
                    pos.swap_remove(i);
                }
            }
        }
        if pos.len() > cfg.budget {
            return Err(Error::Resource {
                population: pos.len(),
                budget: cfg.budget,
            });
        }
        if snap_steps.contains(&k) {
            snapshots.push(ParticleCloud {
                positions: pos.clone(),
                particle_mass: m,
                branch_rate: rho,
                time: k as f64 * cfg.dt,
                alive: pos.len(),
            });
        }
        if pos.is_empty() {
            extinction_time = Some(k as f64 * cfg.dt);
            break;
        }
    }
    for (j, &t) in snap_steps.iter().enumerate() {
        if snapshots.len() <= j && t > 0 {
            // extinct before this snapshot
            snapshots.push(ParticleCloud {
                positions: Vec::new(),
                particle_mass: m,
                branch_rate: rho,
                time: t as f64 * cfg.dt,
                alive: 0,
            });
        }
    }
    let band_centers = (0..nb).map(|j| cfg.window.0 + j as f64 * cfg.bandwidth).collect();
    let mut occupation: Vec<f64> = counts.iter().map(|&c| c as f64 * m * cfg.dt).collect();
    // trapezoid rule in time: the initial mass at the origin carries half a step
    let s0 = (0.0 - lo_edge) * inv_w;
    if s0 >= 0.0 && s0 < nb as f64 {
        occupation[s0 as usize] += 0.5 * cfg.alpha * cfg.dt;
    }
    Ok(OccupationRecord {
        band_centers,
        bandwidth: cfg.bandwidth,
        occupation,
        horizon: cfg.horizon,
        extinction_time,
        snapshots,
    })
}

/// Total mass at time `t` of the branching system without spatial motion;
/// the mass process does not depend on positions.
pub fn simulate_total_mass<R: Rng + ?Sized>(alpha: f64, n: usize, dt: f64, t: f64, rng: &mut R) -> Result<f64> {
    let m = alpha / n as f64;
    let p = BRANCH_CALIBRATION / m * dt;
    if !(p > 0.0 && p <= 1.0) {
        return Err(domain("simulate_total_mass", "branching probability in (0, 1]", p));
    }
    let steps = (t / dt).round() as usize;
    let mut z = n as u64;
    for _ in 0..steps {
        if z == 0 {
            break;
        }
        let events = Binomial::new(z, p).map_err(|e| Error::Invalid(e.to_string()))?.sample(rng);
        let splits = Binomial::new(events, 0.5).map_err(|e| Error::Invalid(e.to_string()))?.sample(rng);
        z = z - events + 2 * splits;
    }
    Ok(z as f64 * m)
}

/// `(L̂^a, L̇̂^a)`: band density at `a` and the central difference of band
/// densities at `a ± w`.
pub fn local_time_samples(record: &OccupationRecord, a: f64) -> Result<(f64, f64)> {
    let j = record.band_index(a)?;
    let w = record.bandwidth;
    let l = record.band_density(j);
    let ld = (record.band_density(j + 1) - record.band_density(j - 1)) / (2.0 * w);
    Ok((l, ld))
}

/// Estimate of the jump `L̇^{a+} − L̇^{a−}` from the second difference of the
/// bands at `a − w, a, a + w`. For `L` linear on each side of `a` the band
/// averages give `(3/4)·jump·w`, hence the normalisation.
pub fn derivative_jump(record: &OccupationRecord, a: f64) -> Result<f64> {
    let j = record.band_index(a)?;
    let w = record.bandwidth;
    let d2 = record.band_density(j + 1) - 2.0 * record.band_density(j) + record.band_density(j - 1);
    Ok(d2 / (0.75 * w))
}

/// Applies the band estimator to a continuous path: `L` averaged over
/// `[a − w/2, a + w/2]`, derivative by central difference at `a ± w`.
pub fn banded_path_samples(path: &sde::LocalTimePath, a: f64, w: f64) -> (f64, f64) {
    let band = |c: f64| band_average(path, c - 0.5 * w, c + 0.5 * w);
    (band(a), (band(a + w) - band(a - w)) / (2.0 * w))
}

fn band_average(path: &sde::LocalTimePath, lo: f64, hi: f64) -> f64 {
    let k = 64;
    let h = (hi - lo) / k as f64;
    let mut s = 0.5 * (path.l_at(lo) + path.l_at(hi));
    for i in 1..k {
        s += path.l_at(lo + i as f64 * h);
    }
    s * h / (hi - lo)
}

/// Settings for the particle-versus-SDE transition comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionConfig {
    pub particles: ParticleConfig,
    pub sde_dx: f64,
    pub ks_threshold: f64,
    /// Spatial step of the conditional-drift check.
    pub drift_h: f64,
    pub resamples: usize,
}

impl TransitionConfig {
    pub fn new(alpha: f64) -> Self {
        Self {
            particles: ParticleConfig::new(alpha, 100, 6.25e-4, (-1.0, 1.5), 0.05),
            sde_dx: 1e-4,
            ks_threshold: 0.06,
            drift_h: 0.05,
            resamples: 1000,
        }
    }
}

/// Runs `n` particle replicates in parallel; replicate `i` uses its own stream.
pub fn run_replicates(cfg: &ParticleConfig, n: usize, master_seed: u64) -> Result<Vec<OccupationRecord>> {
    (0..n as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = rng::stream(master_seed, rng::tag::PARTICLES, i);
            simulate_particles(cfg, &mut rng)
        })
        .collect()
}

/// Output of `transition_comparison`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionReport {
    pub l: ComparisonReport,
    pub ldot: ComparisonReport,
    pub drift_bins: Vec<stats::BinStat>,
    /// Densest-bin mean of `(L̇̂^{a0+h} − L̇̂^{a0})/h` against the bin average
    /// of `g(L̂, L̇̂/2)`.
    pub drift_check: Option<CiEntry>,
    /// Same bin statistic from SDE paths started at `a0 − 3w`: the CI is for
    /// the particle-minus-SDE difference, target 0. Informational.
    pub drift_check_sde: Option<CiEntry>,
    pub compared: usize,
    pub pass: bool,
}

/// Particle replicates versus the local-time SDE started from the particle
/// values at `a0`, compared at `a0 + delta`. Both sides pass through the
/// same band estimator. Replicates whose band at `a0` is empty are
/// excluded, since both routes are identically zero beyond a zero.
pub fn transition_comparison(
    a0: f64,
    delta: f64,
    records: &[OccupationRecord],
    cfg: &TransitionConfig,
    master_seed: u64,
) -> Result<TransitionReport> {
    if !(a0 > 0.0) {
        return Err(domain("transition_comparison", "a0 > 0", a0));
    }
    if !(delta >= 0.0) {
        return Err(domain("transition_comparison", "delta ≥ 0", delta));
    }
    let w = cfg.particles.bandwidth;
    let start: Vec<(f64, f64)> = records.iter().map(|r| local_time_samples(r, a0)).collect::<Result<_>>()?;
    let end: Vec<(f64, f64)> = records
        .iter()
        .map(|r| local_time_samples(r, a0 + delta))
        .collect::<Result<_>>()?;
    let survivors = start.iter().filter(|s| s.0 > 0.1).count();
    if survivors < MIN_SURVIVORS {
        return Err(Error::Underpowered {
            survivors,
            required: MIN_SURVIVORS,
        });
    }
    let used: Vec<usize> = (0..records.len()).filter(|&i| start[i].0 > 0.0).collect();
    let sde_end: Vec<(f64, f64)> = used
        .par_iter()
        .map(|&i| {
            let (l0, d0) = start[i];
            if delta == 0.0 {
                return Ok(end[i]);
            }
            let seed = rng::mix(&[master_seed, i as u64]);
            let mc = MainConfig::new(l0, d0, delta + 2.0 * w, cfg.sde_dx);
            let mut noise = GaussianNoise::new(rng::stream(seed, rng::tag::MAIN_SDE, 0));
            let path = sde::simulate_main_with(&mc, &mut noise, seed)?;
            Ok(banded_path_samples(&path, delta, w))
        })
        .collect::<Result<_>>()?;
    let pl: Vec<f64> = used.iter().map(|&i| end[i].0).collect();
    let pd: Vec<f64> = used.iter().map(|&i| end[i].1).collect();
    let sl: Vec<f64> = sde_end.iter().map(|e| e.0).collect();
    let sd: Vec<f64> = sde_end.iter().map(|e| e.1).collect();
    let l = ComparisonReport::from_samples("transition_L", &pl, &sl, cfg.ks_threshold, Vec::new(), master_seed)?;
    let mut ldot = ComparisonReport::from_samples("transition_Ldot", &pd, &sd, cfg.ks_threshold, Vec::new(), master_seed)?;

    // conditional drift of L̇̂ over [a0, a0 + h] against g(L, L̇/2)
    let h = cfg.drift_h;
    let after: Vec<(f64, f64)> = records
        .iter()
        .map(|r| local_time_samples(r, a0 + h))
        .collect::<Result<_>>()?;
    let keys: Vec<(f64, f64)> = used.iter().map(|&i| start[i]).collect();
    let incr: Vec<f64> = used.iter().map(|&i| (after[i].1 - start[i].1) / h).collect();
    let (ex, ey) = drift_bin_edges(&keys);
    let bins = stats::binned_conditional_mean(&keys, &incr, &ex, &ey, rng::mix(&[master_seed, 17]));
    let densest = bins
        .iter()
        .filter(|b| !b.flagged)
        .max_by_key(|b| b.count)
        .cloned();
    let drift_check = densest.as_ref().map(|b| {
        let members: Vec<f64> = keys
            .iter()
            .filter(|k| in_bin(**k, b))
            .map(|k| drift::g_positive(k.0, 0.5 * k.1))
            .collect();
        CiEntry::new("conditional_drift", b.ci.0, b.ci.1, stats::mean(&members))
    });
    let drift_check_sde = match (&densest, delta > 0.0) {
        (Some(b), true) => Some(sde_implied_drift(a0, records, &keys, &incr, b, cfg, master_seed)?),
        _ => None,
    };
    if let Some(c) = &drift_check {
        ldot.cis.push(c.clone());
        ldot.refresh_pass();
    }
    let pass = l.pass && ldot.pass && drift_check.as_ref().is_some_and(|c| c.hit);
    Ok(TransitionReport {
        l,
        ldot,
        drift_bins: bins,
        drift_check,
        drift_check_sde,
        compared: used.len(),
        pass,
    })
}

fn in_bin(k: (f64, f64), b: &stats::BinStat) -> bool {
    k.0 >= b.lo.0 && k.0 < b.hi.0 && k.1 >= b.lo.1 && k.1 < b.hi.1
}

fn mean_and_se(v: &[f64]) -> (f64, f64) {
    (stats::mean(v), (stats::variance(v) / v.len() as f64).sqrt())
}

/// Runs the SDE from the particle band values at `a0 − 3w` (four paths per
/// replicate), applies the band estimator at `a0` and `a0 + h`, and returns
/// a 95% normal CI for the particle-minus-SDE difference of the bin mean.
fn sde_implied_drift(
    a0: f64,
    records: &[OccupationRecord],
    keys: &[(f64, f64)],
    incr: &[f64],
    bin: &stats::BinStat,
    cfg: &TransitionConfig,
    master_seed: u64,
) -> Result<CiEntry> {
    const PATHS: u64 = 4;
    let w = cfg.particles.bandwidth;
    let h = cfg.drift_h;
    let lead = 3.0 * w;
    let starts: Vec<(f64, f64)> = records
        .iter()
        .map(|r| local_time_samples(r, a0 - lead))
        .collect::<Result<_>>()?;
    let sde_incr: Vec<f64> = (0..starts.len() as u64 * PATHS)
        .into_par_iter()
        .map(|j| {
            let (l0, d0) = starts[(j / PATHS) as usize];
            if !(l0 > 0.0) {
                return Ok(None);
            }
            let seed = rng::mix(&[master_seed, 29, j]);
            let mc = MainConfig::new(l0, d0, lead + h + 2.0 * w, cfg.sde_dx);
            let mut noise = GaussianNoise::new(rng::stream(seed, rng::tag::MAIN_SDE, 0));
            let path = sde::simulate_main_with(&mc, &mut noise, seed)?;
            let k = banded_path_samples(&path, lead, w);
            if !(k.0 > 0.0) || !in_bin(k, bin) {
                return Ok(None);
            }
            let after = banded_path_samples(&path, lead + h, w);
            Ok(Some((after.1 - k.1) / h))
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();
    let particle: Vec<f64> = keys
        .iter()
        .zip(incr)
        .filter(|(k, _)| in_bin(**k, bin))
        .map(|(_, &v)| v)
        .collect();
    if sde_incr.len() < stats::MIN_BIN_COUNT || particle.len() < stats::MIN_BIN_COUNT {
        return Err(Error::Underpowered {
            survivors: sde_incr.len().min(particle.len()),
            required: stats::MIN_BIN_COUNT,
        });
    }
    let (mp, sp) = mean_and_se(&particle);
    let (ms, ss) = mean_and_se(&sde_incr);
    let half = 1.96 * (sp * sp + ss * ss).sqrt();
    Ok(CiEntry::new("conditional_drift_particle_minus_sde", mp - ms - half, mp - ms + half, 0.0))
}

fn drift_bin_edges(keys: &[(f64, f64)]) -> (Vec<f64>, Vec<f64>) {
    let xs: Vec<f64> = keys.iter().map(|k| k.0).collect();
    let ys: Vec<f64> = keys.iter().map(|k| k.1).collect();
    let qx: Vec<f64> = [0.0, 0.25, 0.5, 0.75, 1.0].iter().map(|&p| stats::quantile(&xs, p)).collect();
    let qy: Vec<f64> = [0.0, 0.25, 0.5, 0.75, 1.0].iter().map(|&p| stats::quantile(&ys, p)).collect();
    let bump = |mut v: Vec<f64>| {
        let n = v.len();
        v[n - 1] = f64::from_bits(v[n - 1].to_bits() + 1);
        v
    };
    (bump(qx), bump(qy))
}

/// Summary of the calibration checks of the particle system.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationReport {
    pub extinction: Vec<CiEntry>,
    pub mass_variance: Vec<CiEntry>,
    pub mean_mass: CiEntry,
    pub first_moment: CiEntry,
    pub derivative_jump: CiEntry,
    pub pass: bool,
}

/// `P(ξ > t) = 1 − exp(−α/(2t))`.
pub fn survival_probability(alpha: f64, t: f64) -> f64 {
    -(-alpha / (2.0 * t)).exp_m1()
}

/// Mean ± 3 standard errors as a CI entry.
pub fn three_sigma(name: &str, v: &[f64], target: f64) -> CiEntry {
    let m = stats::mean(v);
    let se = (stats::variance(v) / v.len() as f64).sqrt();
    CiEntry::new(name, m - 3.0 * se, m + 3.0 * se, target)
}

/// Calibration checks: extinction law, total-mass variance (count-only
/// runs at two population sizes), criticality and the first moment at the
/// snapshot time 1, and the jump of `L̇` at the origin.
pub fn calibration(
    alpha: f64,
    records: &[OccupationRecord],
    variance_runs: usize,
    variance_sizes: &[usize],
    dt: f64,
    master_seed: u64,
) -> Result<CalibrationReport> {
    let mut extinction = Vec::new();
    for t in [0.5, 1.0, 2.0] {
        let alive: Vec<f64> = records
            .iter()
            .map(|r| f64::from(r.extinction_time.is_none_or(|x| x > t)))
            .collect();
        extinction.push(three_sigma(&format!("survival_t{t}"), &alive, survival_probability(alpha, t)));
    }
    let mut mass_variance = Vec::new();
    for (k, &n) in variance_sizes.iter().enumerate() {
        let masses: Vec<f64> = (0..variance_runs as u64)
            .into_par_iter()
            .map(|i| {
                let mut rng = rng::stream(master_seed, rng::tag::PARTICLES, (1 << 40) + ((k as u64) << 32) + i);
                simulate_total_mass(alpha, n, dt, 1.0, &mut rng)
            })
            .collect::<Result<_>>()?;
        let v = stats::variance(&masses);
        let target = 4.0 * alpha;
        mass_variance.push(CiEntry::new(format!("mass_variance_N{n}"), 0.9 * target, 1.1 * target, v));
    }
    let snap = |r: &OccupationRecord| {
        r.snapshots
            .iter()
            .find(|s| (s.time - 1.0).abs() < 1e-9)
            .cloned()
            .ok_or_else(|| Error::Invalid("records need a snapshot at t = 1".into()))
    };
    let clouds: Vec<ParticleCloud> = records.iter().map(snap).collect::<Result<_>>()?;
    let total: Vec<f64> = clouds.iter().map(|c| c.total_mass()).collect();
    let mean_mass = three_sigma("mean_mass_t1", &total, alpha);
    let interval: Vec<f64> = clouds.iter().map(|c| c.mass_in(0.0, 1.0)).collect();
    let first_moment = three_sigma("first_moment_t1_0_1", &interval, alpha * 0.5 * crate::specfun::erf(std::f64::consts::FRAC_1_SQRT_2));
    let jumps: Vec<f64> = records.iter().map(|r| derivative_jump(r, 0.0)).collect::<Result<_>>()?;
    let (lo, hi) = stats::bootstrap_mean_ci(&jumps, 1000, rng::mix(&[master_seed, 23]));
    let derivative_jump = CiEntry::new("ldot_jump_at_0", lo, hi, -2.0 * alpha);
    let pass = extinction.iter().chain(&mass_variance).all(|c| c.hit) && mean_mass.hit && first_moment.hit && derivative_jump.hit;
    Ok(CalibrationReport {
        extinction,
        mass_variance,
        mean_mass,
        first_moment,
        derivative_jump,
        pass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> ParticleConfig {
        let mut c = ParticleConfig::new(1.0, 50, 1e-3, (-0.5, 0.5), 0.1);
        c.horizon = 2.0;
        c.snapshot_times = vec![1.0];
        c
    }

    #[test]
    fn occupation_is_nonnegative_and_deterministic() {
        let a = simulate_particles(&small(), &mut rng::stream(1, rng::tag::PARTICLES, 0)).unwrap();
        let b = simulate_particles(&small(), &mut rng::stream(1, rng::tag::PARTICLES, 0)).unwrap();
        assert_eq!(a, b);
        assert!(a.occupation.iter().all(|&v| v >= 0.0));
        assert_eq!(a.band_centers.len(), 11);
        assert_eq!(a.snapshots.len(), 1);
    }

    #[test]
    fn calibration_constant() {
        let c = small();
        assert!((c.branch_rate() * c.particle_mass() - 4.0).abs() < 1e-12);
    }

    #[test]
    fn window_margin_enforced() {
        let r = simulate_particles(&small(), &mut rng::stream(2, rng::tag::PARTICLES, 0)).unwrap();
        assert!(local_time_samples(&r, 0.0).is_ok());
        assert!(local_time_samples(&r, 0.45).is_err());
        assert!(local_time_samples(&r, 3.0).is_err());
    }

    #[test]
    fn bad_configs_rejected() {
        let mut c = small();
        c.dt = 1e-2;
        assert!(c.validate().is_err());
        let mut c = small();
        c.bandwidth = 0.01;
        assert!(c.validate().is_err());
    }

    #[test]
    fn zero_delta_comparison_is_degenerate() {
        let mut cfg = TransitionConfig::new(1.0);
        cfg.particles.horizon = 3.0;
        let recs = run_replicates(&cfg.particles, 300, 5).unwrap();
        match transition_comparison(0.3, 0.0, &recs, &cfg, 5) {
            Ok(rep) => {
                assert_eq!(rep.l.ks, 0.0);
                assert_eq!(rep.ldot.ks, 0.0);
            }
            Err(Error::Underpowered { .. }) => {}
            Err(e) => panic!("{e}"),
        }
    }
}
