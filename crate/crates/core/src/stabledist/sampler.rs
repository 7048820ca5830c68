use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, Exp1, Poisson};
use serde::{Deserialize, Serialize};

use super::{C0, C1};

const CMS_B: f64 = -PI / 6.0; // arctan(β tan(πα/2))/α with α = 3/2, β = 1
const CMS_S: f64 = 1.259_921_049_894_873_2; // (1 + tan²(πα/2))^{1/(2α)} = 2^{1/3}

/// One draw of `U_dt` by the Chambers–Mallows–Stuck construction for the
/// totally skewed index-3/2 law, scaled so that `E e^{iuU_dt} =
/// exp(−dt·c₀|u|^{3/2}(1 + i sgn u))`.
pub fn sample_increment<R: Rng + ?Sized>(dt: f64, rng: &mut R) -> f64 {
    debug_assert!(dt > 0.0);
    let (v, cv) = loop {
        let v = PI * (rng.random::<f64>() - 0.5);
        let cv = v.cos();
        if cv > 0.0 {
            break (v, cv);
        }
    };
    let w: f64 = Exp1.sample(rng);
    let arg = 1.5 * (v + CMS_B);
    let x = CMS_S * arg.sin() / cv.powf(2.0 / 3.0) * ((v - arg).cos() / w).powf(-1.0 / 3.0);
    (C0 * dt).powf(2.0 / 3.0) * x
}

/// Jumps of `U` on `[0, horizon]` larger than `cutoff`, sorted by size,
/// largest first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JumpSet {
    pub sizes: Vec<f64>,
    pub times: Vec<f64>,
    pub cutoff: f64,
    pub horizon: f64,
}

impl JumpSet {
    pub fn len(&self) -> usize {
        self.sizes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sizes.is_empty()
    }

    /// Expected number of jumps: `t·c₁·(2/3)·ε^{-3/2}`.
    pub fn expected_count(horizon: f64, cutoff: f64) -> f64 {
        horizon * C1 * (2.0 / 3.0) * cutoff.powf(-1.5)
    }

    /// (time, size) pairs in time order.
    pub fn by_time(&self) -> Vec<(f64, f64)> {
        let mut v: Vec<(f64, f64)> = self.times.iter().copied().zip(self.sizes.iter().copied()).collect();
        v.sort_by(|a, b| a.0.total_cmp(&b.0));
        v
    }
}

/// Poisson point process of jumps above `eps` with intensity `c₁z^{-5/2}dz ds`.
pub fn sample_jumps_above<R: Rng + ?Sized>(t: f64, eps: f64, rng: &mut R) -> JumpSet {
    debug_assert!(t > 0.0 && eps > 0.0);
    let mean = JumpSet::expected_count(t, eps);
    let n = Poisson::new(mean).map(|d| d.sample(rng) as usize).unwrap_or(0);
    let mut pairs: Vec<(f64, f64)> = (0..n)
        .map(|_| {
            let v = 1.0 - rng.random::<f64>();
            (eps * v.powf(-2.0 / 3.0), t * rng.random::<f64>())
        })
        .collect();
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0));
    let (sizes, times) = pairs.into_iter().unzip();
    JumpSet {
        sizes,
        times,
        cutoff: eps,
        horizon: t,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, tag};

    #[test]
    fn jump_sizes_exceed_cutoff_and_are_sorted() {
        let mut rng = stream(1, tag::JUMPS, 0);
        for _ in 0..200 {
            let j = sample_jumps_above(1.0, 0.05, &mut rng);
            assert!(j.sizes.iter().all(|&z| z > 0.05));
            assert!(j.sizes.windows(2).all(|w| w[0] >= w[1]));
            assert!(j.times.iter().all(|&s| (0.0..=1.0).contains(&s)));
        }
    }

    #[test]
    fn expected_count_formula() {
        assert!((JumpSet::expected_count(1.0, 1.0) - 0.230_329_433).abs() < 1e-8);
        let ratio = JumpSet::expected_count(1.0, 4.0) / JumpSet::expected_count(1.0, 1.0);
        assert!((ratio - 0.125).abs() < 1e-15);
    }

    #[test]
    fn increments_are_finite() {
        let mut rng = stream(2, tag::INCREMENTS, 0);
        for _ in 0..10_000 {
            assert!(sample_increment(0.3, &mut rng).is_finite());
        }
    }
}
