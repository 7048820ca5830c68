//! Deterministic identity suite over the special functions, the stable
//! density and the drift fields.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::drift;
use crate::error::Result;
use crate::quad::{integrate_half_line_log, integrate_to_infinity, Tolerance};
use crate::specfun::{self, airy_ai, airy_aip, chi, chi_prime, erfc, gamma_fn, gamma_prime};
use crate::stabledist::{self, increment_integral, p1, p1_fourier, p_t, ratio_r, StableConstants, C0, C1};

/// One checked identity. `tolerance` is absolute unless the name says `rel`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentityRow {
    pub identity: String,
    pub computed: f64,
    pub expected: f64,
    pub abs_err: f64,
    pub tolerance: f64,
    pub hit: bool,
}

impl IdentityRow {
    fn abs(name: &str, computed: f64, expected: f64, tolerance: f64) -> Self {
        let abs_err = (computed - expected).abs();
        Self {
            identity: name.into(),
            computed,
            expected,
            abs_err,
            tolerance,
            hit: abs_err <= tolerance,
        }
    }

    fn rel(name: &str, computed: f64, expected: f64, rel_tol: f64) -> Self {
        let mut r = Self::abs(name, computed, expected, rel_tol * expected.abs());
        r.identity = format!("{name} (rel {rel_tol:e})");
        r
    }

    /// A recorded quantity without a reference value; passes when finite.
    fn record(name: &str, computed: f64) -> Self {
        Self {
            identity: name.into(),
            computed,
            expected: f64::NAN,
            abs_err: f64::NAN,
            tolerance: f64::NAN,
            hit: computed.is_finite(),
        }
    }

    pub const CSV_HEADER: &'static str = "identity,computed,expected,abs_err,tolerance,hit";

    pub fn to_csv(&self) -> String {
        format!(
            "{},{:.16e},{:.16e},{:.16e},{:.16e},{}",
            self.identity.replace(',', ";"),
            self.computed,
            self.expected,
            self.abs_err,
            self.tolerance,
            self.hit
        )
    }
}

fn tight() -> Tolerance {
    Tolerance::new(1e-12, 1e-12)
}

/// `∫_0^∞ χ(z) e^{-λz} dz`.
pub fn chi_laplace(lambda: f64) -> Result<f64> {
    Ok(integrate_half_line_log(|z| chi(z).unwrap_or(f64::NAN) * (-lambda * z).exp(), 1.0, tight())?.value)
}

/// `∫_0^∞ γ'(u) du`.
pub fn gamma_prime_integral() -> Result<f64> {
    Ok(integrate_half_line_log(|u| gamma_prime(u).unwrap_or(f64::NAN), 1.0, Tolerance::new(1e-9, 1e-10))?.value)
}

/// `∫_0^∞ γ'(u) u^{-1/2} du`.
pub fn gamma_prime_weighted_integral() -> Result<f64> {
    Ok(integrate_half_line_log(
        |u| gamma_prime(u).unwrap_or(f64::NAN) / u.sqrt(),
        1.0,
        Tolerance::new(1e-9, 1e-10),
    )?
    .value)
}

/// `(∫ p₁, ∫ y p₁)`: the light left tail on the direct map, the power-law
/// right tail in the logarithmic variable.
pub fn p1_moments() -> Result<(f64, f64)> {
    let tol = Tolerance::new(1e-12, 1e-10);
    let left = |f: &dyn Fn(f64) -> f64| integrate_to_infinity(|u| f(-u), 0.0, tol).map(|e| e.value);
    let right = |f: &dyn Fn(f64) -> f64| integrate_half_line_log(f, 1.0, tol).map(|e| e.value);
    let mass = left(&p1)? + right(&p1)?;
    let first = |y: f64| y * p1(y);
    let mean = left(&first)? + right(&first)?;
    Ok((mass, mean))
}

/// Runs the full suite.
pub fn run() -> Result<Vec<IdentityRow>> {
    let mut rows = Vec::new();

    // special functions
    rows.push(IdentityRow::abs("airy_ai(0)", airy_ai(0.0)?, 0.355_028_053_887_817_2, 1e-12));
    rows.push(IdentityRow::abs("airy_aip(0)", airy_aip(0.0)?, -0.258_819_403_792_806_8, 1e-12));
    for x in [-4.0, 1.0, 3.0, 6.0] {
        let h = 1e-4;
        let fd = (airy_aip(x + h)? - airy_aip(x - h)?) / (2.0 * h);
        let scale = airy_ai(x)?.abs().max(1e-12);
        rows.push(IdentityRow::abs(
            &format!("airy ODE residual (Ai''-xAi)/|Ai| at x={x}"),
            (fd - x * airy_ai(x)?) / scale,
            0.0,
            1e-6,
        ));
    }
    rows.push(IdentityRow::abs("erfc(0)", erfc(0.0), 1.0, 1e-15));
    rows.push(IdentityRow::abs("erfc(1)", erfc(1.0), 0.157_299_207_050_285_13, 1e-15));
    for x in [0.5, 2.0, 7.0] {
        rows.push(IdentityRow::abs(&format!("erfc(-x)+erfc(x) at x={x}"), erfc(-x) + erfc(x), 2.0, 1e-15));
    }
    for lam in [0.5f64, 1.0, 2.0] {
        rows.push(IdentityRow::abs(
            &format!("chi Laplace transform at lambda={lam}"),
            chi_laplace(lam)?,
            (1.0 + lam.sqrt()).powi(-3),
            1e-6,
        ));
    }
    let x = 1e4f64;
    rows.push(IdentityRow::rel("x^1.5 chi(x) at x=1e4", x.powf(1.5) * chi(x)?, 1.5 / PI.sqrt(), 2e-3));
    for x in [0.5, 1.0, 5.0] {
        let h = 1e-5;
        let fd = (chi(x + h)? - chi(x - h)?) / (2.0 * h);
        rows.push(IdentityRow::abs(&format!("chi' vs central difference at x={x}"), chi_prime(x)?, fd, 1e-6));
    }
    rows.push(IdentityRow::abs("int_0^inf gamma'", gamma_prime_integral()?, 2.0, 1e-4));
    rows.push(IdentityRow::abs("int_0^inf gamma'(u)/sqrt(u)", gamma_prime_weighted_integral()?, 0.0, 1e-4));
    rows.push(IdentityRow::abs("c1 int (2-gamma(3z/2)) z^-1/2", drift::gh_normalisation()?, 8.0, 1e-4));
    // leading asymptotic constants, read off far enough out for the next order to be negligible
    let u = 1e-8;
    rows.push(IdentityRow::rel("gamma(u)/u^2 -> -8 at u=1e-8", gamma_fn(u)? / (u * u), -8.0, 1e-2));
    let u = 1e6;
    rows.push(IdentityRow::rel("(gamma(u)-2)u -> -30 at u=1e6", (gamma_fn(u)? - 2.0) * u, -30.0, 1e-2));
    rows.push(IdentityRow::record("gamma bound constant C (sup |gamma(u)|/min(1;u)^2)", specfun::gamma_bound_constant()));

    // stable law
    let k = StableConstants::default();
    rows.push(IdentityRow::abs("c1 = sqrt(3/(8 pi))", C1, (3.0 / (8.0 * PI)).sqrt(), 1e-15));
    rows.push(IdentityRow::abs("c0 = 1/sqrt(3)", C0, 1.0 / 3f64.sqrt(), 1e-15));
    rows.push(IdentityRow::abs("psi coefficient = sqrt(2) c0", k.psi_coeff, 2f64.sqrt() * C0, 1e-15));
    rows.push(IdentityRow::abs("c1 Gamma(-3/2) = psi coefficient", C1 * 4.0 * PI.sqrt() / 3.0, k.psi_coeff, 1e-15));
    rows.push(IdentityRow::abs("p1(0) Airy vs Fourier", p1(0.0), p1_fourier(0.0, 1e-10)?, 1e-10));
    let (mass, mean) = p1_moments()?;
    rows.push(IdentityRow::abs("int p1", mass, 1.0, 1e-6));
    rows.push(IdentityRow::abs("int y p1", mean, 0.0, 1e-5));
    let airy_r0 = stabledist::SIXTH_ROOT * airy_ai(0.0)? / airy_aip(0.0)?;
    rows.push(IdentityRow::abs("r(0) = 6^-1/3 Ai(0)/Ai'(0)", ratio_r(0.0), airy_r0, 1e-12));
    rows.push(IdentityRow::rel("y r(y) -> -5/2 at y=30", 30.0 * ratio_r(30.0), -2.5, 1e-2));
    rows.push(IdentityRow::rel(
        "r(y)-(2/3)y^2 -> 1/(2y) at y=-30",
        ratio_r(-30.0) - 600.0,
        -1.0 / 60.0,
        0.1,
    ));
    let (t, y) = (1.0, 0.7);
    let lhs = C1 * t * increment_integral(t, y, |_| 1.0, f64::INFINITY, Tolerance::new(1e-12, 1e-10))?;
    rows.push(IdentityRow::abs("c1 t int (p_t(y)-p_t(y-z)) z^-3/2 = -y p_t(y)", lhs, -y * p_t(t, y), 1e-4));

    // drift fields
    rows.push(IdentityRow::abs("g(0, 3.7)", drift::g(0.0, 3.7)?, 0.0, 0.0));
    rows.push(IdentityRow::abs("g(1, 0) = 8 r(0)", drift::g(1.0, 0.0)?, 8.0 * airy_r0, 1e-11));
    for t in [0.5f64, 2.0] {
        let y = 40.0 * t.powf(2.0 / 3.0);
        rows.push(IdentityRow::rel(&format!("y g(t,y)/t -> -20 at t={t}"), y * drift::g(t, y)? / t, -20.0, 2e-2));
    }
    rows.push(IdentityRow::abs("b(0) = 8 r(0)", drift::b(0.0), 8.0 * airy_r0, 1e-11));
    rows.push(IdentityRow::abs("b(60) + (2/3) 60^2", drift::b(60.0) + 2400.0, 0.0, 1.0));
    rows.push(IdentityRow::abs("b(-60) - (2/3) 60^2", drift::b(-60.0) - 2400.0, 0.0, 1.0));
    let law = drift::invariant_law();
    rows.push(IdentityRow::abs("int nu", law.table_mass(), 1.0, 1e-6));
    let consts: Vec<f64> = [-3.0, 0.0, 3.0]
        .iter()
        .map(|&z| law.ln_density(z) + z * z * z / 36.0 - 2.0 * stabledist::ln_p1(0.5 * z))
        .collect();
    let spread = consts.iter().cloned().fold(f64::MIN, f64::max) - consts.iter().cloned().fold(f64::MAX, f64::min);
    rows.push(IdentityRow::abs("ln nu + z^3/36 - 2 ln p1(z/2) spread over z=-3,0,3", spread, 0.0, 1e-8));
    let sv: Vec<f64> = [-2.0, 0.0, 2.0]
        .iter()
        .map(|&x| drift::scale_derivative(x) * law.density(x))
        .collect();
    let spread = sv.iter().cloned().fold(f64::MIN, f64::max) - sv.iter().cloned().fold(f64::MAX, f64::min);
    rows.push(IdentityRow::abs("s'(x) nu(x) spread over x=-2,0,2 (rel)", spread / sv[1], 0.0, 1e-6));
    rows.push(IdentityRow::abs("s(0)", drift::scale_function(0.0)?, 0.0, 0.0));
    let mut worst = 0.0f64;
    for i in 0..=998 {
        let p = 0.001 + 0.001 * i as f64;
        worst = worst.max((law.cdf(law.quantile(p)?) - p).abs());
    }
    rows.push(IdentityRow::abs("max |F(Q(p)) - p| on [0.001, 0.999]", worst, 0.0, 1e-6));
    let rb = drift::ratio_bound();
    rows.push(IdentityRow::record("sup_{w >= mode} |r(w)| (negative-part drift bound)", rb.c_hat));
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_identity_holds() {
        let rows = run().unwrap();
        for r in &rows {
            assert!(r.hit, "{}", r.to_csv());
        }
        assert!(rows.len() > 40);
    }
}
