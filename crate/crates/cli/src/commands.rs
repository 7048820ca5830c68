//! One function per subcommand. Each returns whether every pass flag held.

use anyhow::anyhow;
use rayon::prelude::*;
use serde::Serialize;

use sbmlab::particles::{self, ParticleConfig, TransitionConfig};
use sbmlab::sde::{self, LocalTimePath};
use sbmlab::selfcheck::{self, IdentityRow};
use sbmlab::stabledist::{self, BridgeConfig, Functional};
use sbmlab::{drift, rng, stats};

use crate::output::{num, OutputDir};
use crate::{
    BridgeArgs, CompareArgs, DensityArgs, Experiment, FunctionalKind, ParticlesArgs, RunError, SdeArgs, SdeMode,
    SelfcheckArgs,
};

fn usage(msg: String) -> RunError {
    RunError::Usage(anyhow!(msg))
}

/// Parses `start:stop:step` into the grid points, both ends included.
pub fn parse_grid(s: &str) -> Result<Vec<f64>, RunError> {
    let parts: Vec<f64> = s
        .split(':')
        .map(|p| p.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| usage(format!("grid {s:?}: expected start:stop:step")))?;
    let [a, b, step] = parts[..] else {
        return Err(usage(format!("grid {s:?}: expected start:stop:step")));
    };
    if !(step > 0.0 && b >= a && a.is_finite() && b.is_finite()) {
        return Err(usage(format!("grid {s:?}: need step > 0 and start <= stop")));
    }
    let steps = (b - a) / step;
    let n = steps.round();
    if (steps - n).abs() > 1e-9 * n.max(1.0) {
        return Err(usage(format!("grid {s:?}: step does not divide the range")));
    }
    Ok((0..=n as usize).map(|i| a + i as f64 * step).collect())
}

/// Parses `lo:hi`.
pub fn parse_window(s: &str) -> Result<(f64, f64), RunError> {
    let parts: Vec<f64> = s
        .split(':')
        .map(|p| p.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| usage(format!("window {s:?}: expected lo:hi")))?;
    match parts[..] {
        [lo, hi] if lo < hi => Ok((lo, hi)),
        _ => Err(usage(format!("window {s:?}: expected lo:hi with lo < hi"))),
    }
}

fn file_name(s: &str) -> Result<&str, RunError> {
    if s.is_empty() || s.contains('/') || s.contains('\\') || s.starts_with('.') {
        return Err(usage(format!("output name {s:?} must be a plain file name")));
    }
    Ok(s)
}

pub fn selfcheck(a: &SelfcheckArgs, out: &mut OutputDir) -> Result<bool, RunError> {
    let name = file_name(&a.out)?;
    let rows = selfcheck::run()?;
    out.write_csv(name, IdentityRow::CSV_HEADER, rows.iter().map(IdentityRow::to_csv))?;
    let misses: Vec<&str> = rows.iter().filter(|r| !r.hit).map(|r| r.identity.as_str()).collect();
    for m in &misses {
        eprintln!("miss: {m}");
    }
    println!("{} identities, {} missed", rows.len(), misses.len());
    Ok(misses.is_empty())
}

fn or_nan(r: sbmlab::Result<f64>) -> f64 {
    r.unwrap_or(f64::NAN)
}

pub fn density(a: &DensityArgs, out: &mut OutputDir) -> Result<bool, RunError> {
    let name = file_name(&a.out)?;
    let grid = parse_grid(&a.grid)?;
    let law = drift::invariant_law();
    let rows: Vec<String> = grid
        .iter()
        .map(|&y| {
            [
                y,
                stabledist::p1(y),
                stabledist::p1_prime(y),
                stabledist::ratio_r(y),
                or_nan(drift::g(1.0, y)),
                drift::b(y),
                law.density(y),
            ]
            .map(num)
            .join(",")
        })
        .collect();
    out.write_csv(name, "y,p1,p1_prime,ratio,g_t1,b,nu", rows)?;
    let drift_rows: Vec<String> = grid
        .iter()
        .map(|&z| [z, drift::b(z), law.density(z), or_nan(drift::scale_function(z))].map(num).join(","))
        .collect();
    out.write_csv("drift.csv", "z,b,nu,s", drift_rows)?;
    if let Some(tol) = a.fourier_tol {
        if !(tol > 0.0 && tol < 1.0) {
            return Err(usage(format!("fourier_tol {tol} must lie in (0, 1)")));
        }
        let rows: Vec<String> = grid
            .par_iter()
            .map(|&y| {
                let p = stabledist::p1(y);
                let f = stabledist::p1_fourier(y, tol)?;
                Ok([y, p, f, (p - f).abs()].map(num).join(","))
            })
            .collect::<sbmlab::Result<_>>()?;
        out.write_csv("fourier.csv", "y,p1,p1_fourier,abs_diff", rows)?;
    }
    println!("{} grid points", grid.len());
    Ok(true)
}

#[derive(Debug, Serialize)]
struct QuantilePoint {
    p: f64,
    q: f64,
}

#[derive(Debug, Serialize)]
struct QvCheck {
    /// Mean of `QV/(16∫L) − 1` up to the first level 0.2 crossing.
    mean_rel_error: f64,
    threshold: f64,
    paths: usize,
    pass: bool,
}

#[derive(Debug, Serialize)]
struct SdeSummary {
    #[serde(rename = "R_hat_quantiles")]
    r_hat_quantiles: Option<Vec<QuantilePoint>>,
    qv_check: Option<QvCheck>,
    extinction_exponent_median: Option<f64>,
    absorbed: usize,
    paths: usize,
}

const QV_LEVEL: f64 = 0.2;
const QV_THRESHOLD: f64 = 0.05;

fn thin<T>(n: usize, stride: usize, mut f: impl FnMut(usize) -> T) -> Vec<T> {
    let mut v: Vec<T> = (0..n).step_by(stride).map(&mut f).collect();
    if n > 0 && (n - 1) % stride != 0 {
        v.push(f(n - 1));
    }
    v
}

fn summarize(paths: &[LocalTimePath]) -> SdeSummary {
    let r: Vec<f64> = paths.iter().filter_map(|p| p.r_hat).collect();
    let r_hat_quantiles = (!r.is_empty()).then(|| {
        [0.05, 0.25, 0.5, 0.75, 0.95]
            .iter()
            .map(|&p| QuantilePoint {
                p,
                q: stats::quantile(&r, p),
            })
            .collect()
    });
    let rel: Vec<f64> = paths
        .iter()
        .filter_map(|p| {
            let xb = p.first_below(QV_LEVEL).unwrap_or(p.x_grid[p.len() - 1]);
            let target = sde::qv_target(p, xb);
            (target > 0.0).then(|| sde::realized_qv(p, xb, 1) / target - 1.0)
        })
        .collect();
    let qv_check = (!rel.is_empty()).then(|| {
        let m = stats::mean(&rel);
        QvCheck {
            mean_rel_error: m,
            threshold: QV_THRESHOLD,
            paths: rel.len(),
            pass: m.abs() <= QV_THRESHOLD,
        }
    });
    let slopes: Vec<f64> = paths.iter().filter_map(|p| sde::extinction_exponent(p).ok()).collect();
    SdeSummary {
        r_hat_quantiles,
        qv_check,
        extinction_exponent_median: (!slopes.is_empty()).then(|| stats::median(&slopes)),
        absorbed: r.len(),
        paths: paths.len(),
    }
}

fn path_rows(paths: &[LocalTimePath], stride: usize) -> Vec<String> {
    paths
        .iter()
        .enumerate()
        .flat_map(|(i, p)| thin(p.len(), stride, |k| format!("{i},{},{},{}", num(p.x_grid[k]), num(p.l[k]), num(p.ldot[k]))))
        .collect()
}

pub fn sde(a: &SdeArgs, out: &mut OutputDir) -> Result<bool, RunError> {
    let name = file_name(&a.out)?;
    if a.paths == 0 || a.stride == 0 {
        return Err(usage("paths and stride must be positive".into()));
    }
    let seeds: Vec<u64> = (0..a.paths as u64).map(|i| rng::mix(&[a.seed, i])).collect();
    let summary = match a.mode {
        SdeMode::Main => {
            let paths: Vec<LocalTimePath> = seeds
                .par_iter()
                .map(|&s| sde::simulate_main_sde(a.t0, a.ydot0, a.xmax, a.dx, s))
                .collect::<sbmlab::Result<_>>()?;
            out.write_csv(name, "replicate,x,L,Ldot", path_rows(&paths, a.stride))?;
            summarize(&paths)
        }
        SdeMode::Z => {
            let paths: Vec<sde::ZDiffusionPath> = seeds
                .par_iter()
                .map(|&s| sde::simulate_z(a.z0, a.lambda0, a.tmax, a.dt, s))
                .collect::<sbmlab::Result<_>>()?;
            let rows = paths.iter().enumerate().flat_map(|(i, p)| {
                thin(p.t_grid.len(), a.stride, |k| {
                    format!("{i},{},{},{}", num(p.t_grid[k]), num(p.z[k]), num(p.lambda[k]))
                })
            });
            out.write_csv(name, "replicate,t,Z,Lambda", rows)?;
            SdeSummary {
                r_hat_quantiles: None,
                qv_check: None,
                extinction_exponent_median: None,
                absorbed: 0,
                paths: paths.len(),
            }
        }
        SdeMode::Reconstruct => {
            let paths: Vec<LocalTimePath> = seeds
                .par_iter()
                .map(|&s| sde::reconstruct_local_time(&sde::simulate_z(a.z0, a.lambda0, a.tmax, a.dt, s)?))
                .collect::<sbmlab::Result<_>>()?;
            out.write_csv(name, "replicate,x,L,Ldot", path_rows(&paths, a.stride))?;
            summarize(&paths)
        }
    };
    out.write_json("summary.json", &summary)?;
    println!("{}", serde_json::to_string(&summary).unwrap_or_default());
    Ok(summary.qv_check.as_ref().is_none_or(|q| q.pass))
}

fn particle_config(alpha: f64, n: usize, dt: f64, window: &str, bandwidth: f64) -> Result<ParticleConfig, RunError> {
    let cfg = ParticleConfig::new(alpha, n, dt, parse_window(window)?, bandwidth);
    cfg.validate()?;
    Ok(cfg)
}

pub fn particles(a: &ParticlesArgs, out: &mut OutputDir) -> Result<bool, RunError> {
    let name = file_name(&a.out)?;
    let mut cfg = particle_config(a.alpha, a.n, a.dt, &a.window, a.bandwidth)?;
    cfg.horizon = a.horizon;
    if a.calibrate {
        cfg.snapshot_times = vec![1.0];
    }
    cfg.validate()?;
    if a.replicates == 0 {
        return Err(usage("replicates must be positive".into()));
    }
    let records = particles::run_replicates(&cfg, a.replicates, a.seed)?;
    let mut rows = Vec::new();
    for (i, r) in records.iter().enumerate() {
        let centers = &r.band_centers;
        for &c in &centers[2..centers.len() - 2] {
            let (l, ld) = particles::local_time_samples(r, c)?;
            rows.push(format!("{i},{},{},{}", num(c), num(l), num(ld)));
        }
    }
    out.write_csv(name, "replicate,a,L_hat,Ldot_hat", rows)?;
    let ext = records.iter().enumerate().map(|(i, r)| match r.extinction_time {
        Some(t) => format!("{i},{}", num(t)),
        None => format!("{i},inf"),
    });
    out.write_csv("extinction.csv", "replicate,extinction_time", ext)?;
    if !a.calibrate {
        return Ok(true);
    }
    let report = particles::calibration(a.alpha, &records, a.variance_runs, &[a.n, 2 * a.n], a.dt, a.seed)?;
    out.write_json("calibration.json", &report)?;
    println!("calibration pass: {}", report.pass);
    Ok(report.pass)
}

pub fn compare(a: &CompareArgs, out: &mut OutputDir) -> Result<bool, RunError> {
    let name = file_name(&a.out)?;
    match a.experiment {
        Experiment::Transition => {
            let mut tc = TransitionConfig::new(a.alpha);
            tc.particles = particle_config(a.alpha, a.n, a.dt, &a.window, a.bandwidth)?;
            tc.sde_dx = a.sde_dx;
            tc.ks_threshold = a.ks_threshold;
            if a.replicates == 0 {
                return Err(usage("replicates must be positive".into()));
            }
            let records = particles::run_replicates(&tc.particles, a.replicates, a.seed)?;
            let report = particles::transition_comparison(a.a0, a.delta, &records, &tc, a.seed)?;
            out.write_json(name, &report)?;
            println!(
                "ks L {:.4} ks Ldot {:.4} (threshold {}) pass {}",
                report.l.ks, report.ldot.ks, tc.ks_threshold, report.pass
            );
            Ok(report.pass)
        }
    }
}

#[derive(Debug, Serialize)]
struct BridgeReport {
    config: BridgeConfig,
    estimate: stabledist::BridgeEstimate,
    /// Closed-form conditional expectation the estimate is checked against.
    target: f64,
    pass: bool,
}

pub fn bridge(a: &BridgeArgs, out: &mut OutputDir) -> Result<bool, RunError> {
    let name = file_name(&a.out)?;
    let (functional, target) = match a.functional {
        FunctionalKind::TruncSum => (
            Functional::TruncSum { eps: a.eps },
            stabledist::truncated_jump_sum_conditional(a.t, a.y, a.eps)?,
        ),
        FunctionalKind::GammaSum => (Functional::GammaSum { h: a.h }, 2.0 * a.y + drift::g_h(a.t, a.y, a.h)?),
    };
    let cfg = BridgeConfig::new(a.t, a.y, a.h_bin, functional, a.n);
    let estimate = stabledist::bridge_check(&cfg, a.seed)?;
    let report = BridgeReport {
        config: cfg,
        estimate,
        target,
        pass: estimate.covers(target),
    };
    out.write_json(name, &report)?;
    println!(
        "mean {:.6} CI [{:.6}, {:.6}] target {:.6} pass {}",
        estimate.mean, estimate.ci_lo, estimate.ci_hi, target, report.pass
    );
    Ok(report.pass)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_counts_both_ends() {
        let g = parse_grid("-8:8:0.1").unwrap();
        assert_eq!(g.len(), 161);
        assert_eq!(g[0], -8.0);
        assert!((g[160] - 8.0).abs() < 1e-12);
        assert!(parse_grid("0:1:0.3").is_err());
        assert!(parse_grid("1:0:0.1").is_err());
        assert!(parse_grid("0:1").is_err());
    }

    #[test]
    fn window_and_names() {
        assert_eq!(parse_window("-1:1.5").ok(), Some((-1.0, 1.5)));
        assert!(parse_window("1:1").is_err());
        assert!(file_name("../x.csv").is_err());
        assert!(file_name("x.csv").is_ok());
    }

    #[test]
    fn thinning_keeps_the_last_point() {
        assert_eq!(thin(10, 4, |k| k), vec![0, 4, 8, 9]);
        assert_eq!(thin(9, 4, |k| k), vec![0, 4, 8]);
    }
}
