//! Time stepping for the local-time SDE
//!
//! ```text
//! dL̇ = g(L, L̇/2) dx + 4 √L dB,   dL = L̇ dx,
//! ```
//!
//! and for its reduced form `dZ = 4 dW + b(Z) dt`, `Λ = Λ₀ exp(∫Z)`, together
//! with the time change that maps one onto the other and two path
//! diagnostics (realized quadratic variation, extinction exponent).

use std::sync::OnceLock;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::drift;
use crate::error::{domain, Error, Result};
use crate::rng::{self, Stream};
use crate::stabledist::ratio_r;

/// Absorption threshold for `L`.
pub const EPS_STOP: f64 = 1e-6;
/// Relative Λ^{1/3}-tail mass below which a reduced path counts as converged.
pub const TAIL_TOLERANCE: f64 = 1e-6;
/// Window of `L` values used by the extinction-exponent fit.
pub const EXPONENT_WINDOW: (f64, f64) = (1e-5, 1e-2);
/// Minimum number of points in the extinction-exponent window.
pub const EXPONENT_MIN_POINTS: usize = 10;

const TABLE_HALF_WIDTH: f64 = 40.0;
const TABLE_STEPS_PER_UNIT: f64 = 256.0;

/// `b` on a uniform grid with four-point Lagrange interpolation; exact
/// evaluation outside the table.
struct DriftTable {
    values: Vec<f64>,
}

impl DriftTable {
    fn build() -> Self {
        let n = (2.0 * TABLE_HALF_WIDTH * TABLE_STEPS_PER_UNIT) as usize;
        let values = (0..=n)
            .map(|i| drift::b(-TABLE_HALF_WIDTH + i as f64 / TABLE_STEPS_PER_UNIT))
            .collect();
        Self { values }
    }

    #[inline]
    fn eval(&self, z: f64) -> f64 {
        let s = (z + TABLE_HALF_WIDTH) * TABLE_STEPS_PER_UNIT;
        let last = self.values.len() - 1;
        if !(s >= 1.0 && s < (last - 2) as f64) {
            return drift::b(z);
        }
        let i = s.floor() as usize;
        let u = s - i as f64;
        let v = &self.values[i - 1..i + 3];
        let (um, u1, u2) = (u + 1.0, u - 1.0, u - 2.0);
        -v[0] * u * u1 * u2 / 6.0 + v[1] * um * u1 * u2 / 2.0 - v[2] * um * u * u2 / 2.0 + v[3] * um * u * u1 / 6.0
    }
}

fn drift_table() -> &'static DriftTable {
    static TABLE: OnceLock<DriftTable> = OnceLock::new();
    TABLE.get_or_init(DriftTable::build)
}

/// Fast `b(z)`: tabulated on `[-40, 40]`, exact beyond.
#[inline]
pub fn b_fast(z: f64) -> f64 {
    drift_table().eval(z)
}

/// `8 r(z/2) = b(z) + (2/3) z²`, the drift of `L̇` divided by `L^{1/3}`.
#[inline]
fn eight_r_half(z: f64) -> f64 {
    if z.abs() < TABLE_HALF_WIDTH - 1.0 {
        b_fast(z) + 2.0 / 3.0 * z * z
    } else {
        8.0 * ratio_r(0.5 * z)
    }
}

#[inline]
fn tamed(drift: f64, dt: f64) -> f64 {
    drift * dt / (1.0 + dt * drift.abs())
}

/// A source of Brownian increments indexed by elapsed time on the reduced
/// (`Z`) clock.
pub trait NoiseSource {
    /// Brownian increment over the next `dt` units of the reduced clock.
    fn increment(&mut self, dt: f64) -> f64;
}

/// Independent Gaussian increments.
pub struct GaussianNoise {
    rng: Stream,
}

impl GaussianNoise {
    pub fn new(rng: Stream) -> Self {
        Self { rng }
    }
}

impl NoiseSource for GaussianNoise {
    #[inline]
    fn increment(&mut self, dt: f64) -> f64 {
        let n: f64 = self.rng.sample(StandardNormal);
        dt.sqrt() * n
    }
}

/// One Brownian path `W`, fixed on a uniform grid by one stream and filled
/// in between grid points by Brownian-bridge draws from a second stream.
/// Queries must move forward in time. Two instances built from the same seed
/// agree on every grid value, so a route that queries only grid times and a
/// route that queries arbitrary times see the same path.
pub struct SharedBrownian {
    spacing: f64,
    grid: Vec<f64>,
    grid_rng: Stream,
    fill_rng: Stream,
    now: f64,
    value: f64,
}

impl SharedBrownian {
    pub fn new(seed: u64, spacing: f64) -> Self {
        Self {
            spacing,
            grid: vec![0.0],
            grid_rng: rng::stream(seed, rng::tag::BROWNIAN_CELLS, 0),
            fill_rng: rng::stream(seed, rng::tag::BROWNIAN_CELLS, 1),
            now: 0.0,
            value: 0.0,
        }
    }

    fn grid_value(&mut self, k: usize) -> f64 {
        let sd = self.spacing.sqrt();
        while self.grid.len() <= k {
            let n: f64 = self.grid_rng.sample(StandardNormal);
            let last = *self.grid.last().expect("grid starts at 0");
            self.grid.push(last + sd * n);
        }
        self.grid[k]
    }

    /// `W` at time `t ≥` the previous query time.
    pub fn value_at(&mut self, t: f64) -> f64 {
        debug_assert!(t >= self.now);
        let s = t / self.spacing;
        let k = s.round();
        let w = if (s - k).abs() < 1e-9 {
            self.grid_value(k as usize)
        } else {
            let j = s.floor() as usize;
            let left_t = j as f64 * self.spacing;
            let (lt, lw) = if left_t >= self.now {
                (left_t, self.grid_value(j))
            } else {
                (self.now, self.value)
            };
            let rt = (j + 1) as f64 * self.spacing;
            let rw = self.grid_value(j + 1);
            let span = rt - lt;
            let mean = lw + (t - lt) / span * (rw - lw);
            let var = ((t - lt) * (rt - t) / span).max(0.0);
            let n: f64 = self.fill_rng.sample(StandardNormal);
            mean + var.sqrt() * n
        };
        self.now = t;
        self.value = w;
        w
    }
}

impl NoiseSource for SharedBrownian {
    fn increment(&mut self, dt: f64) -> f64 {
        let before = self.value;
        let t = self.now + dt;
        self.value_at(t) - before
    }
}

/// Stopping rule for the reduced diffusion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ZStop {
    /// Run to `t_max`.
    Horizon,
    /// Stop once the Λ^{1/3} integral over the last 10% of steps is below
    /// `TAIL_TOLERANCE` of the total, or at `t_max`.
    Converged,
}

/// Parameters of a reduced-diffusion run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZConfig {
    pub z0: f64,
    pub lambda0: f64,
    pub t_max: f64,
    pub dt: f64,
    /// Diffusion coefficient; 4 for the reduced SDE, 0 for the noiseless variant.
    pub noise: f64,
    pub stop: ZStop,
}

impl ZConfig {
    pub fn new(z0: f64, lambda0: f64, t_max: f64, dt: f64) -> Self {
        Self {
            z0,
            lambda0,
            t_max,
            dt,
            noise: 4.0,
            stop: ZStop::Converged,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt <= 0.1) {
            return Err(domain("simulate_z", "dt in (0, 0.1]", self.dt));
        }
        if !(self.t_max >= self.dt) {
            return Err(domain("simulate_z", "t_max ≥ dt", self.t_max));
        }
        if !(self.lambda0 > 0.0) {
            return Err(domain("simulate_z", "lambda0 > 0", self.lambda0));
        }
        if !self.z0.is_finite() {
            return Err(domain("simulate_z", "finite z0", self.z0));
        }
        Ok(())
    }
}

/// A path of the reduced diffusion and its companion `Λ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZDiffusionPath {
    pub t_grid: Vec<f64>,
    pub z: Vec<f64>,
    pub lambda: Vec<f64>,
    /// `ln Λ_k − ln Λ_0`, the running trapezoid of `Z`.
    pub log_growth: Vec<f64>,
    pub seed: u64,
    pub dt: f64,
}

impl ZDiffusionPath {
    pub fn len(&self) -> usize {
        self.z.len()
    }

    pub fn is_empty(&self) -> bool {
        self.z.is_empty()
    }
}

/// Tamed Euler step of the reduced diffusion.
#[inline]
pub fn z_step(z: f64, dt: f64, noise: f64, dw: f64) -> f64 {
    z + tamed(b_fast(z), dt) + noise * dw
}

/// Simulates `dZ = 4 dW + b(Z) dt` with a tamed Euler scheme and the
/// companion `Λ_t = Λ₀ exp(∫Z)`.
pub fn simulate_z(z0: f64, lambda0: f64, t_max: f64, dt: f64, seed: u64) -> Result<ZDiffusionPath> {
    let cfg = ZConfig::new(z0, lambda0, t_max, dt);
    let mut noise = GaussianNoise::new(rng::stream(seed, rng::tag::Z_DIFFUSION, 0));
    simulate_z_with(&cfg, &mut noise, seed)
}

/// `simulate_z` with explicit configuration and noise source.
pub fn simulate_z_with<N: NoiseSource>(cfg: &ZConfig, noise: &mut N, seed: u64) -> Result<ZDiffusionPath> {
    cfg.validate()?;
    let dt = cfg.dt;
    let max_steps = (cfg.t_max / dt).round().max(1.0) as usize;
    let cap = match cfg.stop {
        ZStop::Horizon => max_steps + 1,
        ZStop::Converged => max_steps.min(1 << 16) + 1,
    };
    let mut t_grid = Vec::with_capacity(cap);
    let mut z = Vec::with_capacity(cap);
    let mut log_growth = Vec::with_capacity(cap);
    // cumulative trapezoid of Λ^{1/3}/Λ₀^{1/3}
    let mut cum = Vec::with_capacity(cap);
    t_grid.push(0.0);
    z.push(cfg.z0);
    log_growth.push(0.0);
    cum.push(0.0);
    let check_every = 1000usize;
    let (mut zk, mut lg) = (cfg.z0, 0.0f64);
    for k in 0..max_steps {
        let dw = noise.increment(dt);
        let next = z_step(zk, dt, cfg.noise, dw);
        if !next.is_finite() {
            return Err(Error::NumericalBlowup { step: k + 1 });
        }
        let lg_next = lg + 0.5 * dt * (zk + next);
        let c = *cum.last().expect("nonempty") + 0.5 * dt * ((lg / 3.0).exp() + (lg_next / 3.0).exp());
        zk = next;
        lg = lg_next;
        t_grid.push((k + 1) as f64 * dt);
        z.push(zk);
        log_growth.push(lg);
        cum.push(c);
        if cfg.stop == ZStop::Converged && (k + 1) % check_every == 0 && tail_fraction(&cum) < TAIL_TOLERANCE {
            break;
        }
    }
    let lambda = log_growth.iter().map(|g| cfg.lambda0 * g.exp()).collect();
    Ok(ZDiffusionPath {
        t_grid,
        z,
        lambda,
        log_growth,
        seed,
        dt,
    })
}

fn tail_fraction(cum: &[f64]) -> f64 {
    let n = cum.len() - 1;
    let total = cum[n];
    if n < 10 || !(total > 0.0) {
        return 1.0;
    }
    (total - cum[n - n / 10]) / total
}

/// Long-run samples of the reduced diffusion: one chain, `burn_in` time
/// units discarded, then one sample every `spacing` time units.
pub fn sample_stationary_chain<N: NoiseSource>(
    z0: f64,
    dt: f64,
    burn_in: f64,
    spacing: f64,
    count: usize,
    noise: &mut N,
) -> Result<Vec<f64>> {
    if !(dt > 0.0 && dt <= 0.1) {
        return Err(domain("sample_stationary_chain", "dt in (0, 0.1]", dt));
    }
    let burn = (burn_in / dt).round() as usize;
    let thin = ((spacing / dt).round() as usize).max(1);
    let mut z = z0;
    let mut step = 0usize;
    let mut advance = |n: usize, z: &mut f64| -> Result<()> {
        for _ in 0..n {
            *z = z_step(*z, dt, 4.0, noise.increment(dt));
            step += 1;
            if !z.is_finite() {
                return Err(Error::NumericalBlowup { step });
            }
        }
        Ok(())
    };
    advance(burn, &mut z)?;
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        advance(thin, &mut z)?;
        out.push(z);
    }
    Ok(out)
}

/// Scheme metadata carried by a local-time path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemeMeta {
    pub scheme: String,
    pub step: f64,
    pub seed: u64,
    pub eps_stop: f64,
    /// Steps whose pre-clamp `L` was negative.
    pub clamped_steps: usize,
    /// Steps taken before absorption or the horizon.
    pub steps: usize,
    /// `max |L(x_{i+1}) − L(x_i) − L̇(x_i)Δx|` before absorption.
    pub max_truncation: f64,
}

/// A path of `(L, L̇)` on an increasing grid starting at 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalTimePath {
    pub x_grid: Vec<f64>,
    pub l: Vec<f64>,
    pub ldot: Vec<f64>,
    /// Extinction point; `None` if the path was not absorbed in range.
    pub r_hat: Option<f64>,
    pub scheme_meta: SchemeMeta,
}

impl LocalTimePath {
    pub fn len(&self) -> usize {
        self.x_grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x_grid.is_empty()
    }

    /// Linear interpolation of `L` at `x`; 0 beyond the grid once absorbed.
    pub fn l_at(&self, x: f64) -> f64 {
        interpolate(&self.x_grid, &self.l, x, self.r_hat.is_some())
    }

    /// Linear interpolation of `L̇` at `x`.
    pub fn ldot_at(&self, x: f64) -> f64 {
        interpolate(&self.x_grid, &self.ldot, x, self.r_hat.is_some())
    }

    /// First grid point at which `L ≤ level`, interpolated linearly.
    pub fn first_below(&self, level: f64) -> Option<f64> {
        let i = self.l.iter().position(|&v| v <= level)?;
        if i == 0 {
            return Some(self.x_grid[0]);
        }
        let (x0, x1, l0, l1) = (self.x_grid[i - 1], self.x_grid[i], self.l[i - 1], self.l[i]);
        Some(x0 + (l0 - level) / (l0 - l1) * (x1 - x0))
    }
}

fn interpolate(xs: &[f64], ys: &[f64], x: f64, absorbed: bool) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    if x <= xs[0] {
        return ys[0];
    }
    let n = xs.len();
    if x >= xs[n - 1] {
        return if absorbed { 0.0 } else { ys[n - 1] };
    }
    let i = xs.partition_point(|&v| v <= x);
    let (x0, x1) = (xs[i - 1], xs[i]);
    ys[i - 1] + (x - x0) / (x1 - x0) * (ys[i] - ys[i - 1])
}

/// Maps a reduced path to local-time coordinates through
/// `x(t) = ∫_0^t Λ_s^{1/3} ds`, `L = Λ`, `L̇ = Z Λ^{2/3}`. The extinction
/// point is the total integral, at which `(L, L̇)` is set to `(0, 0)`.
pub fn reconstruct_local_time(zpath: &ZDiffusionPath) -> Result<LocalTimePath> {
    let path = time_change(zpath);
    let n = path.x_grid.len() - 2;
    let total = path.x_grid[n];
    let tail = total - path.x_grid[n - n / 10];
    if !(total > 0.0) || tail > TAIL_TOLERANCE * total {
        return Err(Error::HorizonTooShort {
            tail_mass: tail / total,
        });
    }
    Ok(path)
}

/// The time change without the convergence check; the last grid point is
/// the truncated total integral.
pub fn time_change(zpath: &ZDiffusionPath) -> LocalTimePath {
    let n = zpath.len();
    let mut x_grid = Vec::with_capacity(n + 1);
    let mut l: Vec<f64> = Vec::with_capacity(n + 1);
    let mut ldot: Vec<f64> = Vec::with_capacity(n + 1);
    let mut x = 0.0;
    let mut max_trunc = 0.0f64;
    for k in 0..n {
        let lam = zpath.lambda[k];
        if k > 0 {
            let h = zpath.t_grid[k] - zpath.t_grid[k - 1];
            let dx = 0.5 * h * (zpath.lambda[k - 1].cbrt() + lam.cbrt());
            x += dx;
            max_trunc = max_trunc.max((lam - l[k - 1] - ldot[k - 1] * dx).abs());
        }
        x_grid.push(x);
        l.push(lam);
        ldot.push(zpath.z[k] * lam.cbrt().powi(2));
    }
    x_grid.push(x);
    l.push(0.0);
    ldot.push(0.0);
    LocalTimePath {
        x_grid,
        l,
        ldot,
        r_hat: Some(x),
        scheme_meta: SchemeMeta {
            scheme: "reduced-tamed-euler+time-change".into(),
            step: zpath.dt,
            seed: zpath.seed,
            eps_stop: 0.0,
            clamped_steps: 0,
            steps: n - 1,
            max_truncation: max_trunc,
        },
    }
}

/// Inverse transform: `Z = L̇ L^{-2/3}` on the reduced clock
/// `t(x) = ∫_0^x L^{-1/3}`, for the unabsorbed part of a path.
pub fn transform_to_z(path: &LocalTimePath) -> ZDiffusionPath {
    let mut t_grid = Vec::new();
    let mut z = Vec::new();
    let mut lambda = Vec::new();
    let mut log_growth = Vec::new();
    let mut t = 0.0;
    let lambda0 = path.l[0];
    for i in 0..path.len() {
        let li = path.l[i];
        if !(li > 0.0) {
            break;
        }
        if i > 0 {
            let h = path.x_grid[i] - path.x_grid[i - 1];
            t += 0.5 * h * (1.0 / path.l[i - 1].cbrt() + 1.0 / li.cbrt());
        }
        t_grid.push(t);
        z.push(path.ldot[i] / li.cbrt().powi(2));
        lambda.push(li);
        log_growth.push((li / lambda0).ln());
    }
    ZDiffusionPath {
        t_grid,
        z,
        lambda,
        log_growth,
        seed: path.scheme_meta.seed,
        dt: path.scheme_meta.step,
    }
}

/// Parameters of a run of the two-dimensional local-time SDE.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MainConfig {
    pub t0: f64,
    pub ydot0: f64,
    pub x_max: f64,
    pub dx: f64,
    pub eps_stop: f64,
}

impl MainConfig {
    pub fn new(t0: f64, ydot0: f64, x_max: f64, dx: f64) -> Self {
        Self {
            t0,
            ydot0,
            x_max,
            dx,
            eps_stop: EPS_STOP,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.t0 > 0.0) {
            return Err(domain("simulate_main_sde", "t0 > 0", self.t0));
        }
        if !(self.dx > 0.0 && self.dx <= 1e-2) {
            return Err(domain("simulate_main_sde", "dx in (0, 1e-2]", self.dx));
        }
        if !(self.x_max >= self.dx) {
            return Err(domain("simulate_main_sde", "x_max ≥ dx", self.x_max));
        }
        if !self.ydot0.is_finite() {
            return Err(domain("simulate_main_sde", "finite ydot0", self.ydot0));
        }
        if !(self.eps_stop > 0.0) {
            return Err(domain("simulate_main_sde", "eps_stop > 0", self.eps_stop));
        }
        Ok(())
    }
}

/// Euler–Maruyama for `dL̇ = g(L, L̇/2) dx + 4√L dB`, `dL = L̇ dx`, with a
/// tamed drift, trapezoidal `L` update and absorption at `EPS_STOP`.
pub fn simulate_main_sde(t0: f64, ydot0: f64, x_max: f64, dx: f64, seed: u64) -> Result<LocalTimePath> {
    let cfg = MainConfig::new(t0, ydot0, x_max, dx);
    let mut noise = GaussianNoise::new(rng::stream(seed, rng::tag::MAIN_SDE, 0));
    simulate_main_with(&cfg, &mut noise, seed)
}

/// `simulate_main_sde` driven by a noise source on the reduced clock: over a
/// step `dx` the source advances by `L^{-1/3} dx` and `dB = L^{1/6} dW`.
/// With independent Gaussian noise this is ordinary Euler–Maruyama.
pub fn simulate_main_with<N: NoiseSource>(cfg: &MainConfig, noise: &mut N, seed: u64) -> Result<LocalTimePath> {
    cfg.validate()?;
    let dx = cfg.dx;
    let max_steps = (cfg.x_max / dx).round().max(1.0) as usize;
    let mut x_grid = vec![0.0];
    let mut l = vec![cfg.t0];
    let mut ldot = vec![cfg.ydot0];
    let (mut lk, mut dk) = (cfg.t0, cfg.ydot0);
    let mut r_hat = None;
    let mut clamped = 0usize;
    let mut max_trunc = 0.0f64;
    let mut steps = 0usize;
    if lk <= cfg.eps_stop {
        r_hat = Some(0.0);
    }
    while r_hat.is_none() && steps < max_steps {
        let c = lk.cbrt();
        let z = dk / (c * c);
        let drift = c * eight_r_half(z);
        let dw = noise.increment(dx / c);
        // 4 √L dB with dB = L^{1/6} dW
        let d_next = dk + tamed(drift, dx) + 4.0 * c * c * dw;
        let l_next = lk + 0.5 * dx * (dk + d_next);
        steps += 1;
        if !(d_next.is_finite() && l_next.is_finite()) {
            return Err(Error::NumericalBlowup { step: steps });
        }
        let x = steps as f64 * dx;
        max_trunc = max_trunc.max((l_next - lk - dk * dx).abs());
        if l_next < 0.0 {
            clamped += 1;
        }
        if l_next <= cfg.eps_stop {
            r_hat = Some(x);
            x_grid.push(x);
            l.push(0.0);
            ldot.push(0.0);
            break;
        }
        lk = l_next;
        dk = d_next;
        x_grid.push(x);
        l.push(lk);
        ldot.push(dk);
    }
    Ok(LocalTimePath {
        x_grid,
        l,
        ldot,
        r_hat,
        scheme_meta: SchemeMeta {
            scheme: "tamed-euler-maruyama".into(),
            step: dx,
            seed,
            eps_stop: cfg.eps_stop,
            clamped_steps: clamped,
            steps,
            max_truncation: max_trunc,
        },
    })
}

/// `Σ (L̇(x_{i+k}) − L̇(x_i))²` over grid points in `[0, x_bar]`, `k = refine`.
pub fn realized_qv(path: &LocalTimePath, x_bar: f64, refine: usize) -> f64 {
    let k = refine.max(1);
    let end = path.x_grid.partition_point(|&x| x <= x_bar);
    let mut qv = 0.0;
    let mut i = 0;
    while i + k < end {
        let d = path.ldot[i + k] - path.ldot[i];
        qv += d * d;
        i += k;
    }
    qv
}

/// `16 ∫_0^{x_bar} L dx` by the trapezoid rule on the path grid.
pub fn qv_target(path: &LocalTimePath, x_bar: f64) -> f64 {
    let end = path.x_grid.partition_point(|&x| x <= x_bar);
    let mut s = 0.0;
    for i in 1..end {
        s += 0.5 * (path.x_grid[i] - path.x_grid[i - 1]) * (path.l[i] + path.l[i - 1]);
    }
    16.0 * s
}

/// Least-squares slope of `ln L` against `ln(R − x)` over `L ∈ [1e-5, 1e-2]`.
pub fn extinction_exponent(path: &LocalTimePath) -> Result<f64> {
    extinction_exponent_in(path, EXPONENT_WINDOW.0, EXPONENT_WINDOW.1)
}

/// `extinction_exponent` over the window `L ∈ [lo, hi]`.
pub fn extinction_exponent_in(path: &LocalTimePath, lo: f64, hi: f64) -> Result<f64> {
    let r = path
        .r_hat
        .ok_or_else(|| Error::Invalid("extinction_exponent needs an absorbed path".into()))?;
    let (mut n, mut sx, mut sy, mut sxx, mut sxy) = (0usize, 0.0, 0.0, 0.0, 0.0);
    for (&x, &v) in path.x_grid.iter().zip(&path.l) {
        let gap = r - x;
        if v >= lo && v <= hi && gap > 0.0 {
            let (a, b) = (gap.ln(), v.ln());
            n += 1;
            sx += a;
            sy += b;
            sxx += a * a;
            sxy += a * b;
        }
    }
    if n < EXPONENT_MIN_POINTS {
        return Err(Error::InsufficientResolution {
            points: n,
            required: EXPONENT_MIN_POINTS,
        });
    }
    let nf = n as f64;
    Ok((nf * sxy - sx * sy) / (nf * sxx - sx * sx))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_matches_exact_drift() {
        for i in 0..400 {
            let z = -39.0 + 0.1953 * i as f64;
            let (a, e) = (b_fast(z), drift::b(z));
            assert!((a - e).abs() <= 1e-8 * (1.0 + e.abs()), "z={z}: {a} vs {e}");
        }
    }

    #[test]
    fn exponent_identity_holds_by_construction() {
        let p = simulate_z(0.5, 2.0, 5.0, 1e-3, 11).unwrap();
        let mut acc = 0.0;
        for k in 1..p.len() {
            acc += 0.5 * p.dt * (p.z[k - 1] + p.z[k]);
            let lhs = (p.lambda[k] / p.lambda[0]).ln();
            assert!((lhs - acc).abs() <= 1e-12 * k as f64 + 1e-12);
        }
    }

    #[test]
    fn deterministic_given_seed() {
        let a = simulate_main_sde(1.0, 0.0, 2.0, 1e-3, 5).unwrap();
        let b = simulate_main_sde(1.0, 0.0, 2.0, 1e-3, 5).unwrap();
        assert_eq!(a, b);
        let c = simulate_z(0.0, 1.0, 2.0, 1e-3, 5).unwrap();
        let d = simulate_z(0.0, 1.0, 2.0, 1e-3, 5).unwrap();
        assert_eq!(c, d);
    }

    #[test]
    fn noiseless_path_decreases_above_the_drift_zero() {
        let cfg = ZConfig {
            noise: 0.0,
            stop: ZStop::Horizon,
            ..ZConfig::new(10.0, 1.0, 3.0, 1e-3)
        };
        let mut noise = GaussianNoise::new(rng::stream(1, rng::tag::Z_DIFFUSION, 0));
        let p = simulate_z_with(&cfg, &mut noise, 1).unwrap();
        // b has a single zero z*; above it b < 0
        let z_star = {
            let (mut lo, mut hi) = (-5.0, 10.0);
            for _ in 0..80 {
                let m = 0.5 * (lo + hi);
                if drift::b(m) > 0.0 {
                    lo = m
                } else {
                    hi = m
                }
            }
            lo
        };
        for w in p.z.windows(2) {
            if w[0] > z_star {
                assert!(w[1] < w[0]);
            }
        }
        assert!(p.z.last().unwrap() > &(z_star - 1e-6));
    }

    #[test]
    fn reconstruction_starts_at_the_initial_condition() {
        let p = simulate_z(1.5, 0.7, 200.0, 1e-3, 3).unwrap();
        let lt = reconstruct_local_time(&p).unwrap();
        assert_eq!(lt.x_grid[0], 0.0);
        assert!((lt.ldot[0] - 1.5 * 0.7f64.powf(2.0 / 3.0)).abs() < 1e-14);
        let r = lt.r_hat.unwrap();
        assert!(r.is_finite() && r > 0.0);
        assert_eq!(*lt.l.last().unwrap(), 0.0);
        assert_eq!(lt.l_at(r + 1.0), 0.0);
    }

    #[test]
    fn short_horizon_is_reported() {
        let p = simulate_z(0.0, 1.0, 0.5, 1e-3, 3).unwrap();
        assert!(matches!(reconstruct_local_time(&p), Err(Error::HorizonTooShort { .. })));
    }

    #[test]
    fn absorbed_tail_is_exactly_zero() {
        let p = simulate_main_sde(0.05, -0.5, 5.0, 1e-4, 9).unwrap();
        let r = p.r_hat.expect("absorbed");
        for (x, (l, d)) in p.x_grid.iter().zip(p.l.iter().zip(&p.ldot)) {
            assert!(*l >= 0.0);
            if *x >= r {
                assert_eq!((*l, *d), (0.0, 0.0));
            }
        }
    }

    #[test]
    fn zero_path_has_zero_qv() {
        let mut p = simulate_main_sde(1.0, 0.0, 0.01, 1e-3, 1).unwrap();
        p.ldot.iter_mut().for_each(|v| *v = 0.0);
        assert_eq!(realized_qv(&p, 1.0, 1), 0.0);
    }

    #[test]
    fn exponent_slope_is_shift_invariant() {
        let p = reconstruct_local_time(&simulate_z(0.0, 1.0, 500.0, 1e-3, 21).unwrap()).unwrap();
        let mut q = p.clone();
        q.l.iter_mut().for_each(|v| *v *= 10.0);
        let a = extinction_exponent_in(&p, 1e-6, 1e-2).unwrap();
        let b = extinction_exponent_in(&q, 1e-5, 1e-1).unwrap();
        assert!((a - b).abs() < 1e-9, "{a} vs {b}");
    }

    #[test]
    fn shared_brownian_grid_values_agree() {
        let mut a = SharedBrownian::new(4, 1e-3);
        let mut b = SharedBrownian::new(4, 1e-3);
        for k in 1..2000 {
            let target = k as f64 * 1e-3;
            if k % 3 == 0 {
                b.value_at(target - 4e-4);
                b.value_at(target - 1e-4);
            }
            assert_eq!(a.value_at(target), b.value_at(target));
        }
    }

    #[test]
    fn bad_parameters_are_rejected() {
        assert!(simulate_z(0.0, 1.0, 1.0, 0.5, 0).is_err());
        assert!(simulate_z(0.0, -1.0, 1.0, 0.01, 0).is_err());
        assert!(simulate_main_sde(0.0, 0.0, 1.0, 1e-3, 0).is_err());
        assert!(simulate_main_sde(1.0, 0.0, 1.0, 0.1, 0).is_err());
    }
}
