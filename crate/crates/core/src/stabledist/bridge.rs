//! Conditional jump functionals of the Lévy bridge: the closed form for
//! truncated jump sums and a kernel-conditioned Monte-Carlo estimator.

use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::density::{p_t, p_t_prime};
use super::sampler::sample_jumps_above;
use super::C1;
use crate::error::{domain, Error, Result};
use crate::quad::{integrate, integrate_to_infinity, Tolerance};
use crate::rng::{stream, tag};
use crate::specfun::gamma_unchecked;
use crate::stats::bootstrap_mean_ci;

// Three-point Gauss–Legendre on [−1, 1].
const GL3_X: f64 = 0.774_596_669_241_483_4;
const GL3_W: [f64; 2] = [5.0 / 9.0, 8.0 / 9.0];

/// `p_t(y) − p_t(y − z)`, via Gauss quadrature of `p_t'` for small `z` to
/// avoid cancellation.
fn density_drop(t: f64, y: f64, z: f64, scale: f64) -> f64 {
    if z < 0.05 * scale {
        let mid = y - 0.5 * z;
        let half = 0.5 * z;
        half * (GL3_W[0] * (p_t_prime(t, mid - half * GL3_X) + p_t_prime(t, mid + half * GL3_X))
            + GL3_W[1] * p_t_prime(t, mid))
    } else {
        p_t(t, y) - p_t(t, y - z)
    }
}

/// `∫_0^upper (p_t(y) − p_t(y−z)) w(z) z^{-3/2} dz`; `upper` may be `+∞`.
///
/// The `z^{-1/2}` singularity is removed by `z = v²` on `[0, t^{2/3}]`, the
/// remainder is integrated in `ln z`.
pub fn increment_integral<W: Fn(f64) -> f64>(t: f64, y: f64, w: W, upper: f64, tol: Tolerance) -> Result<f64> {
    if !(t > 0.0) {
        return Err(domain("increment_integral", "t > 0", t));
    }
    let scale = t.powf(2.0 / 3.0);
    let z0 = upper.min(scale);
    let near = integrate(
        |v| {
            if v == 0.0 {
                return 0.0;
            }
            let z = v * v;
            2.0 * density_drop(t, y, z, scale) * w(z) / z
        },
        0.0,
        z0.sqrt(),
        tol,
    )?
    .value;
    if upper <= z0 {
        return Ok(near);
    }
    let far_integrand = |s: f64| {
        let z = z0 * s.exp();
        if !z.is_finite() {
            return 0.0;
        }
        density_drop(t, y, z, scale) * w(z) / z.sqrt()
    };
    let far = if upper.is_finite() {
        integrate(far_integrand, 0.0, (upper / z0).ln(), tol)?.value
    } else {
        integrate_to_infinity(far_integrand, 0.0, tol)?.value
    };
    Ok(near + far)
}

/// `E[Σ_j Y_j 1{Y_j > ε} | U_t = y] = y + 2c₁tε^{-1/2} + c₁t/p_t(y) ∫_0^ε (p_t(y) − p_t(y−z)) z^{-3/2} dz`.
pub fn truncated_jump_sum_conditional(t: f64, y: f64, eps: f64) -> Result<f64> {
    if !(t > 0.0) {
        return Err(domain("truncated_jump_sum_conditional", "t > 0", t));
    }
    if !(eps > 0.0) {
        return Err(domain("truncated_jump_sum_conditional", "eps > 0", eps));
    }
    let integral = increment_integral(t, y, |_| 1.0, eps, Tolerance::new(1e-12, 1e-10))?;
    Ok(y + 2.0 * C1 * t / eps.sqrt() + C1 * t / p_t(t, y) * integral)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Functional {
    /// `Σ_j Y_j 1{Y_j > eps}`.
    TruncSum { eps: f64 },
    /// `Σ_j Y_j γ(3Y_j/(2h²))`.
    GammaSum { h: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BridgeConfig {
    pub t: f64,
    pub y: f64,
    pub h_bin: f64,
    pub functional: Functional,
    pub n: usize,
    /// Jumps below this size are replaced by a Gaussian of matching variance.
    pub small_jump_cutoff: f64,
    pub resamples: usize,
}

impl BridgeConfig {
    pub fn new(t: f64, y: f64, h_bin: f64, functional: Functional, n: usize) -> Self {
        Self {
            t,
            y,
            h_bin,
            functional,
            n,
            small_jump_cutoff: 0.01,
            resamples: 1000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BridgeEstimate {
    pub mean: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub accepted: usize,
    pub ess: f64,
    /// Deterministic contribution of the jumps below the cutoff (already
    /// included in `mean` and the interval).
    pub small_jump_correction: f64,
}

impl BridgeEstimate {
    pub fn covers(&self, x: f64) -> bool {
        self.ci_lo <= x && x <= self.ci_hi
    }
}

const MIN_ESS: usize = 100;
const BLOCK: usize = 4096;

/// Monte-Carlo estimate of `E[functional | U_t = y]` by box-kernel
/// conditioning of unconditioned paths.
pub fn bridge_check(cfg: &BridgeConfig, master_seed: u64) -> Result<BridgeEstimate> {
    let BridgeConfig {
        t,
        y,
        h_bin,
        functional,
        n,
        small_jump_cutoff: delta,
        resamples,
    } = *cfg;
    if !(t > 0.0 && h_bin > 0.0 && delta > 0.0) {
        return Err(Error::Invalid("bridge_check needs t, h_bin, cutoff > 0".into()));
    }
    if let Functional::TruncSum { eps } = functional {
        if eps < delta {
            return Err(Error::Invalid("trunc_sum eps must not be below the jump cutoff".into()));
        }
    }
    let compensator = 2.0 * C1 * t / delta.sqrt();
    let small_sd = (2.0 * C1 * t * delta.sqrt()).sqrt();
    let blocks = n.div_ceil(BLOCK);
    let values: Vec<f64> = (0..blocks)
        .into_par_iter()
        .flat_map_iter(|b| {
            let mut rng = stream(master_seed, tag::BRIDGE, b as u64);
            let count = BLOCK.min(n - b * BLOCK);
            let mut out = Vec::new();
            for _ in 0..count {
                let jumps = sample_jumps_above(t, delta, &mut rng);
                let g: f64 = StandardNormal.sample(&mut rng);
                let u_t = jumps.sizes.iter().sum::<f64>() - compensator + small_sd * g;
                if (u_t - y).abs() <= h_bin {
                    out.push(match functional {
                        Functional::TruncSum { eps } => jumps.sizes.iter().filter(|&&z| z > eps).sum(),
                        Functional::GammaSum { h } => jumps
                            .sizes
                            .iter()
                            .map(|&z| z * gamma_unchecked(1.5 * z / (h * h)))
                            .sum(),
                    });
                }
            }
            out
        })
        .collect();
    let accepted = values.len();
    if accepted < MIN_ESS {
        return Err(Error::InsufficientConditioning {
            ess: accepted as f64,
            required: MIN_ESS,
        });
    }
    let correction = match functional {
        Functional::TruncSum { .. } => 0.0,
        Functional::GammaSum { h } => {
            // t·c₁ ∫_0^δ z^{-3/2} γ(3z/(2h²)) dz, substituted z = v².
            let est = integrate(
                |v| {
                    if v == 0.0 {
                        0.0
                    } else {
                        2.0 * gamma_unchecked(1.5 * v * v / (h * h)) / (v * v)
                    }
                },
                0.0,
                delta.sqrt(),
                Tolerance::new(1e-14, 1e-10),
            )?;
            t * C1 * est.value
        }
    };
    let mean = values.iter().sum::<f64>() / accepted as f64 + correction;
    let (lo, hi) = bootstrap_mean_ci(&values, resamples, master_seed ^ 0xB007);
    Ok(BridgeEstimate {
        mean,
        ci_lo: lo + correction,
        ci_hi: hi + correction,
        accepted,
        ess: accepted as f64,
        small_jump_correction: correction,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eps_to_infinity_identity() {
        // c₁t ∫_0^∞ (p_t(y) − p_t(y−z)) z^{-3/2} dz = −y p_t(y)
        for (t, y) in [(1.0, 0.7), (2.0, -0.5), (0.5, 1.3)] {
            let i = increment_integral(t, y, |_| 1.0, f64::INFINITY, Tolerance::new(1e-12, 1e-10)).unwrap();
            let lhs = C1 * t * i;
            assert!((lhs + y * p_t(t, y)).abs() < 1e-8, "({t},{y}): {lhs} vs {}", -y * p_t(t, y));
        }
    }

    #[test]
    fn truncated_sum_is_monotone_in_eps() {
        let mut prev = f64::INFINITY;
        for eps in [0.05, 0.1, 0.2, 0.5, 1.0, 2.0, 5.0, 20.0] {
            let v = truncated_jump_sum_conditional(1.0, 0.0, eps).unwrap();
            assert!(v <= prev, "eps={eps}: {v} > {prev}");
            prev = v;
        }
    }

    #[test]
    fn bridge_rejects_bad_configs() {
        let cfg = BridgeConfig::new(1.0, 0.0, 0.05, Functional::TruncSum { eps: 0.001 }, 1000);
        assert!(bridge_check(&cfg, 1).is_err());
        let cfg = BridgeConfig::new(1.0, 40.0, 0.01, Functional::TruncSum { eps: 1.0 }, 2000);
        assert!(matches!(bridge_check(&cfg, 1), Err(Error::InsufficientConditioning { .. })));
    }
}
