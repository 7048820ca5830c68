//! Density `p_1` of the spectrally positive 3/2-stable law through the Airy
//! map, with logarithmic evaluation for the super-exponential left tail.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::C1;
use crate::specfun::{
    airy_eval, bessel_k_asymptotic_coeffs, scaled_k_thirds, BranchKind, EvalBranch,
    AIRY_SERIES_SWITCH,
};

/// `6^{-1/3}`.
pub const SIXTH_ROOT: f64 = 0.550_321_208_149_104_45;
const LN_SIX_THIRD: f64 = 0.597_253_156_409_351_67; // ln(6)/3
const SQRT3: f64 = 1.732_050_807_568_877_2;
const HUGE: f64 = 1e60;

/// Density evaluator configuration: where the ratio and density switch to
/// their large-|y| expansions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StableDensityModel {
    pub left_tail: f64,
    pub right_tail: f64,
}

impl Default for StableDensityModel {
    fn default() -> Self {
        Self {
            left_tail: -15.0,
            right_tail: 15.0,
        }
    }
}

/// `ln 𝒜(x)` and `𝒜'(x)/𝒜(x)` at one point of the Airy map.
#[derive(Debug, Clone, Copy)]
struct MapValue {
    ln_a: f64,
    ratio: f64,
    branch: EvalBranch,
}

/// `e^ζ K_{1/3}(ζ)`, `e^ζ K_{2/3}(ζ)` and their difference, by the large-ζ
/// series. All three are returned without the common `√(π/2ζ)` factor.
fn k_thirds_series(zeta: f64) -> (f64, f64, f64, f64, usize) {
    const N: usize = 40;
    let a1 = bessel_k_asymptotic_coeffs(1.0 / 3.0, N);
    let a2 = bessel_k_asymptotic_coeffs(2.0 / 3.0, N);
    let (mut s1, mut s2) = (1.0, 1.0);
    // diff = Σ_{j≥0} D_{j+1} ζ^{-j},  num = Σ_{j≥0} N_{j+1} ζ^{-j}
    // with D_k = a_k(2/3) − a_k(1/3) and N_m = 6 D_{m+1} − a_m(1/3).
    let (mut diff, mut num) = (0.0, 0.0);
    let mut p = 1.0;
    let mut used = 0;
    for j in 0..N - 1 {
        let d = a2[j + 1] - a1[j + 1];
        let n = 6.0 * (a2[j + 2] - a1[j + 2]) - a1[j + 1];
        let td = d * p;
        let tn = n * p;
        diff += td;
        num += tn;
        if j > 0 {
            s1 += a1[j] * p;
            s2 += a2[j] * p;
        }
        used = j + 1;
        if j > 2 && td.abs() < 1e-17 * diff.abs() && tn.abs() < 1e-17 * num.abs() {
            break;
        }
        p /= zeta;
    }
    (s1, s2, diff, num, used)
}

fn airy_map(model: &StableDensityModel, x: f64) -> MapValue {
    let z = x * x;
    if z <= AIRY_SERIES_SWITCH {
        let (ai, aip, branch) = airy_eval(z).expect("argument is non-negative");
        let s = x * ai + aip;
        return MapValue {
            ln_a: (-2.0 * s).ln() + 2.0 / 3.0 * x * z,
            ratio: 4.0 * z + ai / s,
            branch,
        };
    }
    let zeta = 2.0 / 3.0 * x.abs() * z;
    let prefactor = (2.0 * z / (PI * SQRT3)).ln();
    let y = x / SIXTH_ROOT;
    let beyond = y >= model.right_tail || y <= model.left_tail;
    if x > 0.0 {
        if beyond {
            let (_, _, diff, num, n) = k_thirds_series(zeta);
            let root = (PI / (2.0 * zeta)).sqrt();
            MapValue {
                ln_a: prefactor + (root * diff / zeta).ln(),
                ratio: num / (diff * x),
                branch: EvalBranch {
                    kind: BranchKind::Asymptotic,
                    switch_point: model.right_tail,
                    terms_used: n,
                },
            }
        } else {
            let (k1, k2, n) = scaled_k_thirds(zeta);
            let d = k2 - k1;
            MapValue {
                ln_a: prefactor + d.ln(),
                ratio: 4.0 * z - k1 / (x * d),
                branch: EvalBranch {
                    kind: BranchKind::ContinuedFraction,
                    switch_point: model.right_tail,
                    terms_used: n,
                },
            }
        }
    } else {
        let (k1, k2, kind, n) = if beyond {
            let (s1, s2, _, _, n) = k_thirds_series(zeta);
            (s1, s2, BranchKind::Asymptotic, n)
        } else {
            let (k1, k2, n) = scaled_k_thirds(zeta);
            (k1, k2, BranchKind::ContinuedFraction, n)
        };
        let root = if beyond { (PI / (2.0 * zeta)).sqrt() } else { 1.0 };
        MapValue {
            ln_a: prefactor + (root * (k1 + k2)).ln() - 2.0 * zeta,
            ratio: 4.0 * z - k1 / (-x * (k1 + k2)),
            branch: EvalBranch {
                kind,
                switch_point: model.left_tail,
                terms_used: n,
            },
        }
    }
}

impl StableDensityModel {
    /// `ln p_1(y)`; finite for every finite `y` even where `p_1` underflows.
    pub fn ln_p1(&self, y: f64) -> f64 {
        if y.abs() > HUGE {
            // Beyond the range where the series terms stay finite.
            return if y > 0.0 { C1.ln() - 2.5 * y.ln() } else { f64::NEG_INFINITY };
        }
        airy_map(self, SIXTH_ROOT * y).ln_a - LN_SIX_THIRD
    }

    pub fn p1(&self, y: f64) -> f64 {
        self.ln_p1(y).exp()
    }

    /// `r(y) = p_1'(y)/p_1(y)`.
    pub fn ratio(&self, y: f64) -> f64 {
        if y.abs() > HUGE {
            return if y > 0.0 { -2.5 / y } else { 2.0 / 3.0 * y * y };
        }
        SIXTH_ROOT * airy_map(self, SIXTH_ROOT * y).ratio
    }

    pub fn ratio_branch(&self, y: f64) -> EvalBranch {
        airy_map(self, SIXTH_ROOT * y).branch
    }

    pub fn p1_prime(&self, y: f64) -> f64 {
        if y.abs() > HUGE {
            return self.p1(y) * self.ratio(y);
        }
        let m = airy_map(self, SIXTH_ROOT * y);
        (m.ln_a - LN_SIX_THIRD).exp() * SIXTH_ROOT * m.ratio
    }

    /// `p_t(x) = t^{-2/3} p_1(x t^{-2/3})`.
    pub fn p(&self, t: f64, x: f64) -> f64 {
        let s = t.powf(-2.0 / 3.0);
        s * self.p1(x * s)
    }

    pub fn p_prime(&self, t: f64, x: f64) -> f64 {
        let s = t.powf(-2.0 / 3.0);
        s * s * self.p1_prime(x * s)
    }
}

const DEFAULT: StableDensityModel = StableDensityModel {
    left_tail: -15.0,
    right_tail: 15.0,
};

/// `p_1(y)` with the default tail thresholds.
pub fn p1(y: f64) -> f64 {
    DEFAULT.p1(y)
}

pub fn ln_p1(y: f64) -> f64 {
    DEFAULT.ln_p1(y)
}

pub fn p1_prime(y: f64) -> f64 {
    DEFAULT.p1_prime(y)
}

/// `r(w) = p_1'(w)/p_1(w)`.
pub fn ratio_r(w: f64) -> f64 {
    DEFAULT.ratio(w)
}

pub fn p_t(t: f64, x: f64) -> f64 {
    DEFAULT.p(t, x)
}

pub fn p_t_prime(t: f64, x: f64) -> f64 {
    DEFAULT.p_prime(t, x)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn reference_values() {
        let cases = [
            (0.0, 0.284867613975376686),
            (1.0, 0.112984946981691528),
            (-1.0, 0.391945340451782912),
            (3.0, 0.0193919913156084545),
            (-3.0, 0.00198629499689967983),
            (10.0, 0.00108781068671918315),
        ];
        for (y, want) in cases {
            assert!(rel(p1(y), want) < 1e-12, "p1({y}) = {}", p1(y));
        }
        let ratios = [
            (0.0, -0.754887248325386172),
            (1.0, -0.999464788052719404),
            (-1.0, 0.282079791505106599),
            (15.0, -0.166408438508550721),
            (-15.0, 149.966674064223400),
        ];
        for (y, want) in ratios {
            assert!(rel(ratio_r(y), want) < 1e-11, "r({y}) = {}", ratio_r(y));
        }
    }

    #[test]
    fn tail_switches_agree() {
        let m = DEFAULT;
        for y in [m.left_tail, m.right_tail] {
            let x = SIXTH_ROOT * y;
            let z = x * x;
            let zeta = 2.0 / 3.0 * x.abs() * z;
            let (k1, k2, _) = scaled_k_thirds(zeta);
            let (s1, s2, diff, num, _) = k_thirds_series(zeta);
            let root = (PI / (2.0 * zeta)).sqrt();
            if x > 0.0 {
                assert!(rel(k2 - k1, root * diff / zeta) < 1e-9);
                let cf = 4.0 * z - k1 / (x * (k2 - k1));
                assert!(rel(cf, num / (diff * x)) < 1e-8);
            } else {
                assert!(rel(k1 + k2, root * (s1 + s2)) < 1e-12);
            }
        }
    }

    #[test]
    fn scaling_is_exact() {
        for t in [0.1f64, 1.0, 10.0] {
            for x in [-2.0, 0.3, 5.0] {
                let s = t.powf(-2.0 / 3.0);
                assert_eq!(p_t(t, x), s * p1(x * s));
            }
        }
    }
}
