use std::sync::OnceLock;

use super::density::p1;
use super::C1;
use crate::quad::gk21;

/// Tabulated distribution function of `U_1`, interpolated by cubic Hermite
/// splines that use the exact density as slope.
#[derive(Debug, Clone)]
pub struct StableCdf {
    ys: Vec<f64>,
    fs: Vec<f64>,
    ps: Vec<f64>,
}

const LEFT: f64 = -10.0;
const CORE_END: f64 = 10.0;
const CORE_STEP: f64 = 0.02;
const RIGHT: f64 = 1.0e4;
const GROWTH: f64 = 1.02;

impl StableCdf {
    pub fn build() -> Self {
        let mut ys = Vec::new();
        let n_core = ((CORE_END - LEFT) / CORE_STEP).round() as usize;
        for i in 0..=n_core {
            ys.push(LEFT + i as f64 * CORE_STEP);
        }
        let mut y = CORE_END;
        while y < RIGHT {
            y = (y * GROWTH).min(RIGHT);
            ys.push(y);
        }
        let ps: Vec<f64> = ys.iter().map(|&y| p1(y)).collect();
        // Mass left of −10 is below e^{-200}.
        let mut fs = Vec::with_capacity(ys.len());
        let mut acc = 0.0;
        fs.push(0.0);
        for w in ys.windows(2) {
            acc += gk21(&p1, w[0], w[1]).0;
            fs.push(acc);
        }
        Self { ys, fs, ps }
    }

    /// `1 − F(y)` beyond the table, from the `c₁y^{-5/2}` tail.
    fn right_tail(&self, y: f64) -> f64 {
        let last = *self.ys.last().unwrap();
        let tail_last = 2.0 / 3.0 * C1 * last.powf(-1.5);
        tail_last * (last / y).powf(1.5)
    }

    /// Total tabulated mass plus the analytic right tail; should be 1.
    pub fn total_mass(&self) -> f64 {
        self.fs.last().unwrap() + self.right_tail(*self.ys.last().unwrap())
    }

    pub fn cdf(&self, y: f64) -> f64 {
        if y.is_nan() {
            return f64::NAN;
        }
        if y <= self.ys[0] {
            return 0.0;
        }
        let last = *self.ys.last().unwrap();
        if y >= last {
            return 1.0 - self.right_tail(y);
        }
        let i = self.ys.partition_point(|&v| v <= y) - 1;
        let (x0, x1) = (self.ys[i], self.ys[i + 1]);
        let h = x1 - x0;
        let s = (y - x0) / h;
        let (s2, s3) = (s * s, s * s * s);
        let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
        let h10 = s3 - 2.0 * s2 + s;
        let h01 = -2.0 * s3 + 3.0 * s2;
        let h11 = s3 - s2;
        let v = h00 * self.fs[i] + h10 * h * self.ps[i] + h01 * self.fs[i + 1] + h11 * h * self.ps[i + 1];
        v.clamp(0.0, 1.0)
    }
}

/// Process-wide cached table.
pub fn stable_cdf() -> &'static StableCdf {
    static TABLE: OnceLock<StableCdf> = OnceLock::new();
    TABLE.get_or_init(StableCdf::build)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_is_normalised_and_monotone() {
        let t = stable_cdf();
        assert!((t.total_mass() - 1.0).abs() < 1e-7, "mass {}", t.total_mass());
        let mut prev = 0.0;
        for i in 0..2000 {
            let y = -12.0 + i as f64 * 0.05;
            let f = t.cdf(y);
            assert!(f >= prev);
            prev = f;
        }
    }
}
