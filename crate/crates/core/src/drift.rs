//! Coefficient fields of the local-time SDE: `g(t,y)`, its pre-limit
//! `g_h(t,y)`, the reduced drift `b(z)`, the invariant law `ν` of the reduced
//! diffusion and its scale function.

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::quad::{gk21, integrate_breaks, Tolerance};
use crate::specfun::gamma_complement;
use crate::stabledist::{increment_integral, ln_p1, p_t, ratio_r, C1};

/// `g(t, y) = 8 t p_t'(y)/p_t(y) = 8 t^{1/3} r(y t^{-2/3})`, with `g(0, y) = 0`.
pub fn g(t: f64, y: f64) -> Result<f64> {
    if !(t >= 0.0) {
        return Err(domain("g", "t ≥ 0", t));
    }
    if t == 0.0 {
        return Ok(0.0);
    }
    Ok(g_positive(t, y))
}

/// `g` for `t > 0` without argument checks.
#[inline]
pub fn g_positive(t: f64, y: f64) -> f64 {
    let c = t.cbrt();
    8.0 * c * ratio_r(y / (c * c))
}

/// `g_h(t,y) = (1/h)(c₁t/p_t(y)) ∫_0^∞ (p_t(y) − p_t(y − h²z))(2 − γ(3z/2)) z^{-3/2} dz`,
/// evaluated in the equivalent form with `z' = h²z`.
pub fn g_h(t: f64, y: f64, h: f64) -> Result<f64> {
    if !(t >= 0.0) {
        return Err(domain("g_h", "t ≥ 0", t));
    }
    if !(h > 0.0) {
        return Err(domain("g_h", "h > 0", h));
    }
    if t == 0.0 {
        return Ok(0.0);
    }
    let k = 1.5 / (h * h);
    let integral = increment_integral(
        t,
        y,
        |z| gamma_complement(k * z).unwrap_or(f64::NAN),
        f64::INFINITY,
        Tolerance::new(1e-13, 1e-10),
    )?;
    Ok(C1 * t / p_t(t, y) * integral)
}

/// `b(z) = 8 r(z/2) − (2/3) z²`.
pub fn b(z: f64) -> f64 {
    8.0 * ratio_r(0.5 * z) - 2.0 / 3.0 * z * z
}

/// Location of the mode of `p_1` (the unique zero of `r`).
pub fn p1_mode() -> f64 {
    // r is decreasing through its zero; bracket [-2, 2].
    let (mut lo, mut hi) = (-2.0, 2.0);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if ratio_r(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Numerically certified `sup_{w ≥ y₀} |r(w)|` with `y₀` the mode of `p_1`;
/// this is the constant in the negative-part bound `|g| ≤ 8Ĉ t^{1/3}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatioBound {
    pub y0: f64,
    pub c_hat: f64,
    pub argmax: f64,
}

pub fn ratio_bound() -> RatioBound {
    static CACHE: OnceLock<RatioBound> = OnceLock::new();
    *CACHE.get_or_init(|| {
        let y0 = p1_mode();
        let step = 1e-3;
        let (mut best, mut arg) = (0.0, y0);
        let mut w = y0;
        while w < 60.0 {
            let v = ratio_r(w).abs();
            if v > best {
                best = v;
                arg = w;
            }
            w += step;
        }
        // Golden-section polish around the grid maximum.
        let (mut a, mut c) = (arg - step, arg + step);
        let phi = 0.618_033_988_749_894_8;
        for _ in 0..80 {
            let x1 = c - phi * (c - a);
            let x2 = a + phi * (c - a);
            if ratio_r(x1).abs() > ratio_r(x2).abs() {
                c = x2;
            } else {
                a = x1;
            }
        }
        let polished = ratio_r(0.5 * (a + c)).abs().max(best);
        // Beyond 60 the tail satisfies |r| ≈ 5/(2w) < 0.05, far below the maximum.
        RatioBound {
            y0,
            c_hat: polished * (1.0 + 1e-9),
            argmax: 0.5 * (a + c),
        }
    })
}

// ---------------------------------------------------------------------------
// Invariant law ν(dz) = C p₁(z/2)² exp(−z³/36) dz

const NU_LEFT: f64 = -40.0;
const NU_RIGHT: f64 = 25.0;
const NU_POINTS: usize = 4001;

fn ln_nu_unnormalised(z: f64) -> f64 {
    2.0 * ln_p1(0.5 * z) - z * z * z / 36.0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InvariantLaw {
    pub normalizer: f64,
    zs: Vec<f64>,
    fs: Vec<f64>,
    ds: Vec<f64>,
}

impl InvariantLaw {
    pub fn build() -> Result<Self> {
        let f = |z: f64| ln_nu_unnormalised(z).exp();
        let breaks: Vec<f64> = (0..=65).map(|i| NU_LEFT + i as f64).collect();
        let mass = integrate_breaks(f, &breaks, Tolerance::new(1e-14, 1e-12))?.value;
        let normalizer = 1.0 / mass;
        let h = (NU_RIGHT - NU_LEFT) / (NU_POINTS - 1) as f64;
        let zs: Vec<f64> = (0..NU_POINTS).map(|i| NU_LEFT + i as f64 * h).collect();
        let ds: Vec<f64> = zs.iter().map(|&z| normalizer * f(z)).collect();
        let mut fs = Vec::with_capacity(NU_POINTS);
        let mut acc = 0.0;
        fs.push(0.0);
        for w in zs.windows(2) {
            acc += normalizer * gk21(&f, w[0], w[1]).0;
            fs.push(acc);
        }
        Ok(Self {
            normalizer,
            zs,
            fs,
            ds,
        })
    }

    pub fn ln_density(&self, z: f64) -> f64 {
        self.normalizer.ln() + ln_nu_unnormalised(z)
    }

    pub fn density(&self, z: f64) -> f64 {
        self.ln_density(z).exp()
    }

    /// Cubic Hermite interpolation of the tabulated CDF with exact slopes.
    pub fn cdf(&self, z: f64) -> f64 {
        if z <= self.zs[0] {
            return 0.0;
        }
        if z >= *self.zs.last().unwrap() {
            return 1.0;
        }
        let i = self.zs.partition_point(|&v| v <= z) - 1;
        let (x0, x1) = (self.zs[i], self.zs[i + 1]);
        let h = x1 - x0;
        let s = (z - x0) / h;
        let (s2, s3) = (s * s, s * s * s);
        let v = (2.0 * s3 - 3.0 * s2 + 1.0) * self.fs[i]
            + (s3 - 2.0 * s2 + s) * h * self.ds[i]
            + (-2.0 * s3 + 3.0 * s2) * self.fs[i + 1]
            + (s3 - s2) * h * self.ds[i + 1];
        v.clamp(0.0, 1.0)
    }

    pub fn quantile(&self, p: f64) -> Result<f64> {
        if !(p > 0.0 && p < 1.0) {
            return Err(domain("invariant_quantile", "p in (0, 1)", p));
        }
        let i = self.fs.partition_point(|&f| f < p).clamp(1, self.zs.len() - 1);
        let (mut lo, mut hi) = (self.zs[i - 1], self.zs[i]);
        for _ in 0..80 {
            let mid = 0.5 * (lo + hi);
            if self.cdf(mid) < p {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(0.5 * (lo + hi))
    }

    /// Mass of the tabulated grid (should be 1 up to quadrature error).
    pub fn table_mass(&self) -> f64 {
        *self.fs.last().unwrap()
    }
}

/// Process-wide cached invariant law.
pub fn invariant_law() -> &'static InvariantLaw {
    static LAW: OnceLock<InvariantLaw> = OnceLock::new();
    LAW.get_or_init(|| InvariantLaw::build().expect("invariant law quadrature converges"))
}

pub fn invariant_density(z: f64) -> f64 {
    invariant_law().density(z)
}

pub fn invariant_cdf(z: f64) -> f64 {
    invariant_law().cdf(z)
}

pub fn invariant_quantile(p: f64) -> Result<f64> {
    invariant_law().quantile(p)
}

// ---------------------------------------------------------------------------
// Scale function

/// Largest `|x|` for which the scale function is representable.
pub const SCALE_LIMIT: f64 = 27.0;

/// `s'(y) = exp(−∫_0^y b/8) = p₁(0)² p₁(y/2)^{-2} exp(y³/36)`.
pub fn scale_derivative(y: f64) -> f64 {
    (2.0 * ln_p1(0.0) - 2.0 * ln_p1(0.5 * y) + y * y * y / 36.0).exp()
}

/// `s(x) = ∫_0^x s'(y) dy`.
pub fn scale_function(x: f64) -> Result<f64> {
    if !x.is_finite() {
        return Err(domain("scale_function", "finite x", x));
    }
    if x.abs() > SCALE_LIMIT {
        let edge = SCALE_LIMIT.copysign(x);
        let last = scale_function(edge)?;
        return Err(Error::OutOfRange {
            function: "scale_function",
            x,
            last,
        });
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    let n = (x.abs().ceil() as usize).max(1) * 2;
    let breaks: Vec<f64> = (0..=n).map(|i| x * i as f64 / n as f64).collect();
    Ok(integrate_breaks(scale_derivative, &breaks, Tolerance::new(0.0, 1e-13))?.value)
}

/// `c₁∫_0^∞ (2 − γ(3z/2)) z^{-1/2} dz`, which equals 8.
pub fn gh_normalisation() -> Result<f64> {
    let est = crate::quad::integrate_half_line_log(
        |z| gamma_complement(1.5 * z).unwrap_or(f64::NAN) / z.sqrt(),
        1.0,
        Tolerance::new(1e-11, 1e-11),
    )?;
    Ok(C1 * est.value)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn g_basics() {
        assert_eq!(g(0.0, 3.7).unwrap(), 0.0);
        assert!((g(1.0, 0.0).unwrap() + 6.039_097_986_603_089).abs() < 1e-11);
        assert!(g(-1.0, 0.0).is_err());
        for t in [0.5f64, 2.0] {
            let y = 40.0 * t.powf(2.0 / 3.0);
            let v = y * g(t, y).unwrap() / t;
            assert!((v + 20.0).abs() < 0.4, "t={t}: {v}");
        }
    }

    #[test]
    fn g_scaling() {
        for (t, y) in [(0.7, -0.3), (2.5, 1.9), (0.01, 0.02)] {
            for lam in [0.5f64, 2.0] {
                let lhs = g(lam.powi(3) * t, lam * lam * y).unwrap();
                let rhs = lam * g(t, y).unwrap();
                assert!((lhs - rhs).abs() <= 1e-10 * rhs.abs(), "{lhs} vs {rhs}");
            }
        }
    }

    #[test]
    fn b_values_and_tails() {
        assert!((b(0.0) + 6.039_097_986_603_089).abs() < 1e-11);
        assert!((b(60.0) + 2400.0).abs() <= 1.0);
        assert!((b(-60.0) - 2400.0).abs() <= 1.0);
    }

    #[test]
    fn invariant_law_normalised_and_consistent() {
        let law = invariant_law();
        assert!((law.table_mass() - 1.0).abs() < 1e-9);
        let consts: Vec<f64> = [-3.0, 0.0, 3.0]
            .iter()
            .map(|&z| law.ln_density(z) + z * z * z / 36.0 - 2.0 * ln_p1(0.5 * z))
            .collect();
        assert!(consts.iter().all(|c| (c - consts[0]).abs() < 1e-12));
        for k in 1..1000 {
            let p = k as f64 / 1000.0;
            let z = law.quantile(p).unwrap();
            assert!((law.cdf(z) - p).abs() < 1e-9);
        }
        assert!(law.quantile(0.0).is_err() && law.quantile(1.0).is_err());
    }

    #[test]
    fn scale_function_properties() {
        assert_eq!(scale_function(0.0).unwrap(), 0.0);
        let mut prev = f64::NEG_INFINITY;
        for i in 0..=100 {
            let v = scale_function(-5.0 + 0.1 * i as f64).unwrap();
            assert!(v > prev);
            prev = v;
        }
        assert!(matches!(scale_function(40.0), Err(Error::OutOfRange { .. })));
        let prods: Vec<f64> = [-2.0, 0.0, 2.0]
            .iter()
            .map(|&x| scale_derivative(x) * invariant_density(x))
            .collect();
        assert!(prods.iter().all(|p| ((p - prods[1]) / prods[1]).abs() < 1e-10));
    }

    #[test]
    fn ratio_bound_dominates_negative_drift() {
        let rb = ratio_bound();
        assert!(rb.c_hat > 0.0 && rb.y0 < 0.0);
        for w in [rb.y0, 0.0, 1.0, 5.0, 50.0] {
            assert!(ratio_r(w).abs() <= rb.c_hat);
        }
    }
}
