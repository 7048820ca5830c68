//! Independent density route: inversion of the characteristic function
//! `exp(−c₀|u|^{3/2}(1 + i sgn u))` by adaptive quadrature.
//!
//! For `y < 0` the inversion contour is shifted to `Re λ = (2/3)y²`, the
//! saddle point of `λy + ψ(λ)`, which keeps the super-exponentially small
//! left tail accessible in logarithmic form.

use super::C0;
use crate::error::{domain, Result};
use crate::quad::{integrate_breaks, Tolerance};

const PSI_COEFF: f64 = 0.816_496_580_927_726; // √(2/3)

/// `φ(σ + is) − φ(σ)` with `φ(λ) = λy + √(2/3) λ^{3/2}` (principal branch).
fn phase(sigma: f64, s: f64, y: f64) -> (f64, f64) {
    let modulus = sigma.hypot(s);
    let theta = s.atan2(sigma);
    let m = PSI_COEFF * modulus.powf(1.5);
    let re = m * (1.5 * theta).cos() - PSI_COEFF * sigma.powf(1.5);
    let im = s * y + m * (1.5 * theta).sin();
    (re, im)
}

/// `(ln p_1(y), achieved absolute error of the normalised integral)`.
fn ln_p1_inversion(y: f64, rel_tol: f64) -> Result<(f64, f64)> {
    if !(rel_tol > 1e-12 && rel_tol < 1e-3) {
        return Err(domain("p1_fourier", "rel_tol in (1e-12, 1e-3)", rel_tol));
    }
    if !y.is_finite() {
        return Err(domain("p1_fourier", "finite y", y));
    }
    let sigma = if y < 0.0 { 2.0 / 3.0 * y * y } else { 0.0 };
    let log_scale = sigma * y + PSI_COEFF * sigma.powf(1.5);

    // Truncate where the envelope falls below rel_tol·1e-2; on the
    // unshifted line the envelope is exactly e^{−c₀u^{3/2}}.
    let cutoff_level = (rel_tol * 1e-2).ln();
    let upper = if sigma == 0.0 {
        (-cutoff_level / C0).powf(2.0 / 3.0)
    } else {
        let mut s = 1.0;
        while phase(sigma, s, y).0 > cutoff_level {
            s *= 1.25;
        }
        s
    };
    // Oscillation wavelength is ~2π/|y| on the unshifted line.
    let width = if sigma == 0.0 {
        (std::f64::consts::PI / y.abs().max(1.0)).min(1.0)
    } else {
        (upper / 16.0).max(0.25)
    };
    let panels = ((upper / width).ceil() as usize).max(1);
    let breaks: Vec<f64> = (0..=panels).map(|i| upper * i as f64 / panels as f64).collect();
    let tol = Tolerance::new(rel_tol * 1e-2, rel_tol).with_max_intervals(20_000);
    let est = integrate_breaks(
        |s| {
            let (re, im) = phase(sigma, s, y);
            re.exp() * im.cos()
        },
        &breaks,
        tol,
    )?;
    let value = est.value / std::f64::consts::PI;
    if value <= 0.0 {
        return Err(crate::error::Error::Convergence {
            what: "p1_fourier",
            requested: rel_tol,
            achieved: est.error / std::f64::consts::PI,
        });
    }
    Ok((value.ln() + log_scale, est.error / std::f64::consts::PI))
}

/// `p_1(y)` by Fourier inversion with relative tolerance `rel_tol`.
/// Underflows to 0 where `ln p_1(y) < −745`.
pub fn p1_fourier(y: f64, rel_tol: f64) -> Result<f64> {
    ln_p1_inversion(y, rel_tol).map(|(l, _)| l.exp())
}

/// `ln p_1(y)` by Fourier inversion; finite for every finite `y`.
pub fn ln_p1_fourier(y: f64, rel_tol: f64) -> Result<f64> {
    ln_p1_inversion(y, rel_tol).map(|(l, _)| l)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stabledist::density::{ln_p1, p1};

    #[test]
    fn agrees_with_airy_route() {
        for y in [-6.0, -2.5, -0.4, 0.0, 0.7, 3.0, 12.0] {
            let f = p1_fourier(y, 1e-10).unwrap();
            assert!((f - p1(y)).abs() < 1e-10 * p1(y).max(1e-3), "y={y}: {f} vs {}", p1(y));
        }
    }

    #[test]
    fn far_tails_in_log_form() {
        let left = ln_p1_fourier(-50.0, 1e-8).unwrap();
        assert!((left - ln_p1(-50.0)).abs() < 1e-6 * left.abs());
        let right = ln_p1_fourier(50.0, 1e-8).unwrap();
        assert!(right > left + 1e4);
        assert!((right - ln_p1(50.0)).abs() < 1e-5);
    }

    #[test]
    fn rejects_bad_tolerance() {
        assert!(p1_fourier(0.0, 1e-2).is_err());
        assert!(p1_fourier(0.0, 1e-13).is_err());
    }
}
