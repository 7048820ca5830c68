//! Scalar special functions: Airy `Ai`, `Ai'`, the complementary error
//! function and its scaled form, and the erfc-based family `χ, χ', χ'', γ, γ'`
//! that gives excursion moments of the local time.
//!
//! Every evaluator is pure. The `*_eval` variants also report which branch
//! produced the value.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::dd::{two_prod, Dd};
use crate::error::{domain, Error, Result};

const SQRT_PI: f64 = 1.772_453_850_905_516;
const FRAC_2_SQRT_PI: f64 = std::f64::consts::FRAC_2_SQRT_PI;

/// `Ai(0)` and `Ai'(0)`.
pub const AI0: f64 = 0.355_028_053_887_817_239;
pub const AIP0: f64 = -0.258_819_403_792_806_798;

/// Arguments `z ≤ AIRY_SERIES_SWITCH` use the Maclaurin series, larger ones
/// the Bessel-K continued fraction.
pub const AIRY_SERIES_SWITCH: f64 = 2.5;
/// Most negative argument accepted by the Airy evaluators.
pub const AIRY_NEGATIVE_LIMIT: f64 = -6.0;

/// Above this argument the `χ`/`γ` family uses its asymptotic expansion.
pub const CHI_ASYMPTOTIC_SWITCH: f64 = 60.0;
/// Between this argument and [`CHI_ASYMPTOTIC_SWITCH`] the closed forms are
/// evaluated in double-double arithmetic.
pub const CHI_EXTENDED_SWITCH: f64 = 4.0;
/// `erfcx` switches from its power series to the continued fraction here.
pub const ERFCX_SERIES_SWITCH: f64 = 1.0;

/// How a value was produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BranchKind {
    Series,
    ContinuedFraction,
    ClosedForm,
    Asymptotic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalBranch {
    pub kind: BranchKind,
    pub switch_point: f64,
    pub terms_used: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluated {
    pub value: f64,
    pub branch: EvalBranch,
}

/// Every branch switch in this module, for continuity checks.
pub const SWITCH_POINTS: [(&str, f64); 3] = [
    ("airy", AIRY_SERIES_SWITCH),
    ("erfcx", ERFCX_SERIES_SWITCH),
    ("chi_gamma", CHI_ASYMPTOTIC_SWITCH),
];

// ---------------------------------------------------------------------------
// Airy

fn airy_maclaurin(x: f64) -> (f64, f64, usize) {
    let x3 = x * x * x;
    let (mut tf, mut tg, mut tfp, mut tgp) = (1.0, x, 0.5 * x * x, 1.0);
    let (mut f, mut g, mut fp, mut gp) = (tf, tg, tfp, tgp);
    let mut k = 1usize;
    loop {
        let kf = 3.0 * k as f64;
        tf *= x3 / ((kf - 1.0) * kf);
        tg *= x3 / (kf * (kf + 1.0));
        tgp *= x3 / (kf * (kf - 2.0));
        f += tf;
        g += tg;
        gp += tgp;
        if k >= 2 {
            tfp *= x3 / ((kf - 3.0) * (kf - 1.0));
            fp += tfp;
        }
        let small = |t: f64, s: f64| t.abs() <= 1e-17 * s.abs();
        if k >= 2 && small(tf, f) && small(tg, g) && small(tfp, fp) && small(tgp, gp) {
            break;
        }
        if x == 0.0 {
            break;
        }
        k += 1;
    }
    (AI0 * f + AIP0 * g, AI0 * fp + AIP0 * gp, k + 1)
}

/// Exponentially scaled `e^x K_μ(x)` and `e^x K_{μ+1}(x)` for `x ≳ 2`, by
/// Steed's continued fraction (Temme's CF2 normalisation).
pub(crate) fn scaled_bessel_k_cf2(mu: f64, x: f64) -> (f64, f64, usize) {
    const EPS: f64 = 1e-17;
    const MAXIT: usize = 20_000;
    let a1 = 0.25 - mu * mu;
    let mut b = 2.0 * (1.0 + x);
    let mut d = 1.0 / b;
    let mut h = d;
    let mut delh = d;
    let mut q1 = 0.0;
    let mut q2 = 1.0;
    let mut q = a1;
    let mut c = a1;
    let mut a = -a1;
    let mut s = 1.0 + q * delh;
    let mut used = 1;
    for i in 2..MAXIT {
        let fi = i as f64;
        a -= 2.0 * (fi - 1.0);
        c = -a * c / fi;
        let qnew = (q1 - b * q2) / a;
        q1 = q2;
        q2 = qnew;
        q += c * qnew;
        b += 2.0;
        d = 1.0 / (b + a * d);
        delh = (b * d - 1.0) * delh;
        h += delh;
        let dels = q * delh;
        s += dels;
        used = i;
        if (dels / s).abs() < EPS {
            break;
        }
    }
    let h = a1 * h;
    let kmu = (PI / (2.0 * x)).sqrt() / s;
    let kmu1 = kmu * (mu + x + 0.5 - h) / x;
    (kmu, kmu1, used)
}

/// `e^ζ K_{1/3}(ζ)` and `e^ζ K_{2/3}(ζ)`.
pub(crate) fn scaled_k_thirds(zeta: f64) -> (f64, f64, usize) {
    scaled_bessel_k_cf2(-1.0 / 3.0, zeta)
}

/// Coefficients `a_k(ν)` of `e^ζ K_ν(ζ) ~ √(π/2ζ) Σ a_k ζ^{-k}`, up to `n`.
pub(crate) fn bessel_k_asymptotic_coeffs(nu: f64, n: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(n + 1);
    let mut a = 1.0;
    out.push(a);
    for k in 1..=n {
        let j = (2 * k - 1) as f64;
        a *= (4.0 * nu * nu - j * j) / (8.0 * k as f64);
        out.push(a);
    }
    out
}

fn airy_validate(x: f64) -> Result<()> {
    if !x.is_finite() {
        return Err(domain("airy", "finite argument", x));
    }
    if x < AIRY_NEGATIVE_LIMIT {
        return Err(Error::OutOfRange {
            function: "airy",
            x,
            last: AIRY_NEGATIVE_LIMIT,
        });
    }
    Ok(())
}

/// `(Ai(x), Ai'(x))` with the branch that produced them.
pub fn airy_eval(x: f64) -> Result<(f64, f64, EvalBranch)> {
    airy_validate(x)?;
    if x <= AIRY_SERIES_SWITCH {
        let (ai, aip, n) = airy_maclaurin(x);
        return Ok((
            ai,
            aip,
            EvalBranch {
                kind: BranchKind::Series,
                switch_point: AIRY_SERIES_SWITCH,
                terms_used: n,
            },
        ));
    }
    let zeta = 2.0 / 3.0 * x * x.sqrt();
    let (k1, k2, n) = scaled_k_thirds(zeta);
    let e = (-zeta).exp();
    let ai = (x / 3.0).sqrt() / PI * k1 * e;
    let aip = -x / (PI * 3f64.sqrt()) * k2 * e;
    Ok((
        ai,
        aip,
        EvalBranch {
            kind: BranchKind::ContinuedFraction,
            switch_point: AIRY_SERIES_SWITCH,
            terms_used: n,
        },
    ))
}

/// Airy function `Ai(x)` for `x ≥ -6`.
pub fn airy_ai(x: f64) -> Result<f64> {
    airy_eval(x).map(|(ai, _, _)| ai)
}

/// Derivative `Ai'(x)` for `x ≥ -6`.
pub fn airy_aip(x: f64) -> Result<f64> {
    airy_eval(x).map(|(_, aip, _)| aip)
}

// ---------------------------------------------------------------------------
// Error functions

/// Backward evaluation of `√π e^{t²} erfc(t) = 1/(t + (1/2)/(t + 1/(t + …)))`.
fn erfcx_cf_depth(t: f64, scale: f64) -> usize {
    (scale / (t * t)).ceil() as usize + 16
}

fn erfcx_cf(t: f64) -> (f64, usize) {
    let n = erfcx_cf_depth(t, 240.0);
    let mut tail = 0.0;
    for k in (1..=n).rev() {
        tail = 0.5 * k as f64 / (t + tail);
    }
    (1.0 / (t + tail), n)
}

/// `Σ_n (2x²)^n / (2n+1)!!`, so that `erf(x) = 2x/√π · e^{-x²} · S`.
fn erf_kernel_series(x: f64) -> (f64, usize) {
    let w = 2.0 * x * x;
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut n = 0;
    while term > 1e-17 * sum {
        n += 1;
        term *= w / (2 * n + 1) as f64;
        sum += term;
    }
    (sum, n + 1)
}

/// `e^{-x²}` with the square formed exactly.
fn exp_neg_square(x: f64) -> f64 {
    let (hi, lo) = two_prod(x, x);
    (-hi).exp() * (-lo).exp()
}

/// Scaled complementary error function `e^{x²} erfc(x)`, with its branch.
pub fn erfcx_eval(x: f64) -> Evaluated {
    if x < 0.0 {
        let inner = erfcx_eval(-x);
        let (hi, lo) = two_prod(x, x);
        return Evaluated {
            value: 2.0 * hi.exp() * lo.exp() - inner.value,
            branch: inner.branch,
        };
    }
    if x < ERFCX_SERIES_SWITCH {
        let (s, n) = erf_kernel_series(x);
        let (hi, lo) = two_prod(x, x);
        Evaluated {
            value: hi.exp() * lo.exp() - FRAC_2_SQRT_PI * x * s,
            branch: EvalBranch {
                kind: BranchKind::Series,
                switch_point: ERFCX_SERIES_SWITCH,
                terms_used: n,
            },
        }
    } else {
        let (r, n) = erfcx_cf(x);
        Evaluated {
            value: r / SQRT_PI,
            branch: EvalBranch {
                kind: BranchKind::ContinuedFraction,
                switch_point: ERFCX_SERIES_SWITCH,
                terms_used: n,
            },
        }
    }
}

/// `e^{x²} erfc(x)` evaluated as one primitive (no overflow for large `x`).
pub fn erfcx(x: f64) -> f64 {
    erfcx_eval(x).value
}

/// Complementary error function. Underflows to 0 for `x ≳ 26.6`.
pub fn erfc(x: f64) -> f64 {
    if x.is_nan() {
        return x;
    }
    if x < 0.0 {
        return 2.0 - erfc(-x);
    }
    if x < 0.5 {
        let (s, _) = erf_kernel_series(x);
        return 1.0 - FRAC_2_SQRT_PI * x * exp_neg_square(x) * s;
    }
    if x > 27.3 {
        return 0.0;
    }
    exp_neg_square(x) * erfcx(x)
}

/// Error function.
pub fn erf(x: f64) -> f64 {
    if x.abs() < 0.5 {
        let (s, _) = erf_kernel_series(x);
        return FRAC_2_SQRT_PI * x * exp_neg_square(x) * s;
    }
    1.0 - erfc(x)
}

// ---------------------------------------------------------------------------
// χ and γ

/// `√π e^u erfc(√u)` in double-double, `u ≥ 4`.
fn scaled_erfc_dd(u: f64) -> (Dd, usize) {
    let t = Dd::sqrt_of(u);
    let n = erfcx_cf_depth(t.hi, 900.0) + 14;
    let mut tail = Dd::from_f64(0.0);
    for k in (1..=n).rev() {
        tail = Dd::recip_mul(0.5 * k as f64, t + tail);
    }
    (Dd::recip_mul(1.0, t + tail), n)
}

#[derive(Clone, Copy)]
enum Member {
    Chi,
    ChiPrime,
    ChiSecond,
    Gamma,
    GammaPrime,
}

impl Member {
    fn name(self) -> &'static str {
        match self {
            Member::Chi => "chi",
            Member::ChiPrime => "chi_prime",
            Member::ChiSecond => "chi_second",
            Member::Gamma => "gamma_fn",
            Member::GammaPrime => "gamma_prime",
        }
    }
}

/// Closed forms written as `P(u) − Q(u)·R` with `R = √π e^u erfc(√u)`.
/// `χ`-members are returned multiplied by `√π`, `γ`-members divided by `−8/3`.
fn closed_form_f64(m: Member, u: f64, r: f64) -> f64 {
    let s = u.sqrt();
    match m {
        Member::Chi => 2.0 * (u * s + s) - 2.0 * u * (u + 1.5) * r,
        Member::ChiPrime => 2.0 * (u * s + 3.0 * s + 0.5 / s) - (2.0 * u * u + 7.0 * u + 3.0) * r,
        Member::ChiSecond => {
            2.0 * (u * s + 5.0 * s + 3.0 / s - 0.25 / (u * s)) - (2.0 * u * u + 11.0 * u + 10.0) * r
        }
        Member::Gamma => {
            let u2 = u * u;
            u2 * (3.0 + u * (8.0 + 2.0 * u)) - u2 * s * (6.0 + u * (9.0 + 2.0 * u)) * r
        }
        Member::GammaPrime => {
            u * (6.0 + u * (30.0 + u * (17.0 + 2.0 * u)))
                - u * s * (15.0 + u * (37.5 + u * (18.0 + 2.0 * u))) * r
        }
    }
}

fn horner_dd(coeffs: &[f64], u: f64) -> Dd {
    // coeffs from highest degree down
    let mut acc = Dd::from_f64(coeffs[0]);
    for &c in &coeffs[1..] {
        acc = acc * u + c;
    }
    acc
}

fn closed_form_dd(m: Member, u: f64, r: Dd) -> f64 {
    let s = Dd::sqrt_of(u);
    let us = s * u;
    let out = match m {
        Member::Chi => (us + s) * 2.0 - r * horner_dd(&[2.0, 3.0, 0.0], u),
        Member::ChiPrime => {
            let inv = Dd::recip_mul(0.5, s);
            (us + s * 3.0 + inv) * 2.0 - r * horner_dd(&[2.0, 7.0, 3.0], u)
        }
        Member::ChiSecond => {
            let inv = Dd::recip_mul(3.0, s);
            let inv3 = Dd::recip_mul(-0.25, us);
            (us + s * 5.0 + inv + inv3) * 2.0 - r * horner_dd(&[2.0, 11.0, 10.0], u)
        }
        Member::Gamma => {
            horner_dd(&[2.0, 8.0, 3.0, 0.0, 0.0], u)
                - r * us * u * horner_dd(&[2.0, 9.0, 6.0], u)
        }
        Member::GammaPrime => {
            horner_dd(&[2.0, 17.0, 30.0, 6.0, 0.0], u)
                - r * us * horner_dd(&[2.0, 18.0, 37.5, 15.0], u)
        }
    };
    out.to_f64()
}

/// Large-argument expansion. `√π χ(x) ~ Σ_{k≥3} c_k x^{3/2−k}` with
/// `c_k = −2a_k − 3a_{k−1}`, `a_n = (−1)^n (2n−1)!!/2^n`.
fn asymptotic(m: Member, u: f64) -> (f64, usize) {
    asymptotic_from(m, u, 3)
}

/// The expansion starting at index `first`; `first = 4` for `γ` gives `γ − 2`.
fn asymptotic_from(m: Member, u: f64, first: usize) -> (f64, usize) {
    let mut a_prev = 1.0; // a_0
    let mut sum = 0.0;
    let mut last = f64::INFINITY;
    let mut used = 0;
    for k in 1..200usize {
        let kf = k as f64;
        let a_k = -a_prev * (2.0 * kf - 1.0) / 2.0;
        let c = -2.0 * a_k - 3.0 * a_prev;
        a_prev = a_k;
        if k < first {
            continue;
        }
        let term = match m {
            Member::Chi => c * u.powf(1.5 - kf),
            Member::ChiPrime => c * (1.5 - kf) * u.powf(0.5 - kf),
            Member::ChiSecond => c * (1.5 - kf) * (0.5 - kf) * u.powf(-0.5 - kf),
            Member::Gamma => c * (2.5 - kf) * u.powf(3.0 - kf),
            Member::GammaPrime => c * (2.5 - kf) * (3.0 - kf) * u.powf(2.0 - kf),
        };
        if !term.is_finite() || (term == 0.0 && k > first) {
            break;
        }
        if term == 0.0 {
            continue;
        }
        if term.abs() >= last {
            break;
        }
        sum += term;
        used += 1;
        last = term.abs();
        if last <= 1e-17 * sum.abs() {
            break;
        }
    }
    (sum, used)
}

fn finish(m: Member, raw: f64) -> f64 {
    match m {
        Member::Chi | Member::ChiPrime | Member::ChiSecond => raw / SQRT_PI,
        Member::Gamma | Member::GammaPrime => -8.0 / 3.0 * raw,
    }
}

fn family_eval(m: Member, u: f64) -> Result<Evaluated> {
    let chi_like = matches!(m, Member::Chi | Member::ChiPrime | Member::ChiSecond);
    if !u.is_finite() || (chi_like && u <= 0.0) || (!chi_like && u < 0.0) {
        let req = if chi_like { "x > 0" } else { "u ≥ 0" };
        return Err(domain(m.name(), req, u));
    }
    if u == 0.0 {
        return Ok(Evaluated {
            value: 0.0,
            branch: EvalBranch {
                kind: BranchKind::ClosedForm,
                switch_point: CHI_ASYMPTOTIC_SWITCH,
                terms_used: 1,
            },
        });
    }
    let (raw, kind, terms) = if u > CHI_ASYMPTOTIC_SWITCH {
        let (v, n) = asymptotic(m, u);
        (v, BranchKind::Asymptotic, n)
    } else if u >= CHI_EXTENDED_SWITCH {
        let (r, n) = scaled_erfc_dd(u);
        (closed_form_dd(m, u, r), BranchKind::ClosedForm, n)
    } else {
        let e = erfcx_eval(u.sqrt());
        (
            closed_form_f64(m, u, SQRT_PI * e.value),
            BranchKind::ClosedForm,
            e.branch.terms_used,
        )
    };
    Ok(Evaluated {
        value: finish(m, raw),
        branch: EvalBranch {
            kind,
            switch_point: CHI_ASYMPTOTIC_SWITCH,
            terms_used: terms.max(1),
        },
    })
}

/// `χ(x) = 2/√π (x^{3/2} + x^{1/2}) − 2x(x + 3/2) e^x erfc(√x)`, `x > 0`.
pub fn chi(x: f64) -> Result<f64> {
    family_eval(Member::Chi, x).map(|e| e.value)
}

pub fn chi_prime(x: f64) -> Result<f64> {
    family_eval(Member::ChiPrime, x).map(|e| e.value)
}

pub fn chi_second(x: f64) -> Result<f64> {
    family_eval(Member::ChiSecond, x).map(|e| e.value)
}

/// `γ(u) = −(8/3) √π u^{3/2} (χ(u) + u χ'(u))`, with `γ(0) = 0`.
pub fn gamma_fn(u: f64) -> Result<f64> {
    family_eval(Member::Gamma, u).map(|e| e.value)
}

/// `γ'(u)`, with the convention `γ'(0) = 0`.
pub fn gamma_prime(u: f64) -> Result<f64> {
    family_eval(Member::GammaPrime, u).map(|e| e.value)
}

pub fn chi_eval(x: f64) -> Result<Evaluated> {
    family_eval(Member::Chi, x)
}

pub fn gamma_eval(u: f64) -> Result<Evaluated> {
    family_eval(Member::Gamma, u)
}

/// `2 − γ(u)`, accurate also where `γ(u)` is within rounding of 2.
pub fn gamma_complement(u: f64) -> Result<f64> {
    if u > CHI_ASYMPTOTIC_SWITCH && u.is_finite() {
        let (v, _) = asymptotic_from(Member::Gamma, u, 4);
        return Ok(8.0 / 3.0 * v);
    }
    gamma_fn(u).map(|g| 2.0 - g)
}

/// `γ` on a non-negative argument known to be valid; used in hot loops.
pub(crate) fn gamma_unchecked(u: f64) -> f64 {
    gamma_fn(u).unwrap_or(f64::NAN)
}

/// Empirical `sup_u |γ(u)| / (1 ∧ u²)` over a logarithmic grid on
/// `[1e-6, 1e6]`.
pub fn gamma_bound_constant() -> f64 {
    (0..=1200)
        .map(|i| 10f64.powf(-6.0 + i as f64 * 0.01))
        .map(|u| gamma_unchecked(u).abs() / u.min(1.0).powi(2))
        .fold(0.0, f64::max)
}
