//! Seeded samplers for stable and inverse stable subordinators, killed
//! diffusion paths and the Monte Carlo solvers built on them.
//!
//! Every path draws from its own ChaCha8 stream keyed by
//! `(base_seed, stream_id)` with the path index as stream number, and path
//! results are reduced in fixed-size chunks, so estimates do not depend on
//! the thread count.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, Open01, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::{self, Execution};
use crate::specfun::{self, FracOrder};
use crate::spectral::{OperatorSpec, Point};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RngSpec {
    pub base_seed: u64,
    pub stream_id: u64,
}

impl RngSpec {
    pub fn new(base_seed: u64, stream_id: u64) -> Self {
        RngSpec { base_seed, stream_id }
    }

    /// Independent generator for work item `index`.
    pub fn path_rng(&self, index: u64) -> ChaCha8Rng {
        let mut seed = [0u8; 32];
        seed[..8].copy_from_slice(&self.base_seed.to_le_bytes());
        seed[8..16].copy_from_slice(&self.stream_id.to_le_bytes());
        let mut rng = ChaCha8Rng::from_seed(seed);
        rng.set_stream(index);
        rng
    }

    /// Same seed, different stream, for a separate leg of a computation.
    pub fn substream(&self, leg: u64) -> RngSpec {
        RngSpec {
            base_seed: self.base_seed,
            stream_id: self
                .stream_id
                .wrapping_mul(0x9E37_79B9_7F4A_7C15)
                .wrapping_add(leg.wrapping_add(1)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathConfig {
    pub dt: f64,
    pub n_paths: usize,
    pub bridge_correction: bool,
    #[serde(default)]
    pub execution: Execution,
}

impl Default for PathConfig {
    fn default() -> Self {
        PathConfig {
            dt: 1e-4,
            n_paths: 100_000,
            bridge_correction: true,
            execution: Execution::Parallel,
        }
    }
}

impl PathConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::domain("dt", self.dt, "time step must be positive and finite"));
        }
        if self.n_paths == 0 {
            return Err(Error::Invalid("n_paths must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub n_paths: usize,
    pub alive_fraction: f64,
    pub seed: u64,
    pub stream_id: u64,
}

impl McEstimate {
    /// |a - b| in units of the combined standard error.
    pub fn z_score(&self, other: &McEstimate) -> f64 {
        let s = (self.std_error.powi(2) + other.std_error.powi(2)).sqrt();
        let d = (self.mean - other.mean).abs();
        if s == 0.0 {
            if d == 0.0 {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            d / s
        }
    }
}

/// Streaming mean/variance with an exact chunk merge.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Moments {
    pub n: u64,
    pub mean: f64,
    pub m2: f64,
    pub alive: u64,
}

impl Moments {
    pub fn push(&mut self, v: f64, alive: bool) {
        self.n += 1;
        let d = v - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (v - self.mean);
        self.alive += alive as u64;
    }

    pub fn merge(self, other: Moments) -> Moments {
        if self.n == 0 {
            return other;
        }
        if other.n == 0 {
            return self;
        }
        let n = self.n + other.n;
        let d = other.mean - self.mean;
        let mean = self.mean + d * other.n as f64 / n as f64;
        let m2 = self.m2 + other.m2 + d * d * (self.n as f64 * other.n as f64) / n as f64;
        Moments {
            n,
            mean,
            m2,
            alive: self.alive + other.alive,
        }
    }

    pub fn estimate(&self, rng: RngSpec) -> McEstimate {
        let var = if self.n > 1 { self.m2 / (self.n - 1) as f64 } else { 0.0 };
        McEstimate {
            mean: self.mean,
            std_error: (var / self.n as f64).sqrt(),
            n_paths: self.n as usize,
            alive_fraction: self.alive as f64 / self.n as f64,
            seed: rng.base_seed,
            stream_id: rng.stream_id,
        }
    }
}

// ---------------------------------------------------------------------------
// Subordinators

/// One draw of D_1, the stable subordinator at time 1 with Laplace
/// transform exp(-s^beta), by Kanter's construction.
pub fn sample_stable<R: Rng + ?Sized>(beta: FracOrder, rng: &mut R) -> f64 {
    let b = beta.get();
    let u: f64 = Open01.sample(rng);
    let e: f64 = Exp1.sample(rng);
    ((specfun::zolotarev_ln_a(b, u) - e.ln()) * (1.0 - b) / b).exp()
}

/// One draw of E_t = (t / D_1)^beta.
pub fn sample_inverse_subordinator<R: Rng + ?Sized>(beta: FracOrder, t: f64, rng: &mut R) -> f64 {
    inverse_from_stable(beta, t, sample_stable(beta, rng))
}

#[inline]
fn inverse_from_stable(beta: FracOrder, t: f64, d: f64) -> f64 {
    (t / d).powf(beta.get())
}

/// `n` draws, item `i` taken from stream `i` of `rng`.
pub fn sample_many<F>(rng: RngSpec, n: usize, exec: Execution, draw: F) -> Vec<f64>
where
    F: Fn(&mut ChaCha8Rng) -> f64 + Sync + Send,
{
    let chunks: Vec<usize> = (0..n.div_ceil(exec::CHUNK)).collect();
    let parts = exec::map_vec(&chunks, exec, |&c| -> Result<Vec<f64>> {
        let hi = ((c + 1) * exec::CHUNK).min(n);
        Ok((c * exec::CHUNK..hi)
            .map(|i| draw(&mut rng.path_rng(i as u64)))
            .collect())
    })
    .expect("sampling is infallible");
    parts.concat()
}

// ---------------------------------------------------------------------------
// Killed paths

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathOutcome {
    pub position: Point,
    pub alive: bool,
    /// Grid time of the step at which the exit was detected.
    pub exit_time: Option<f64>,
}

/// Probability that a bridge with variance rate `var_rate` between two
/// interior points at distances `d1`, `d2` from a wall touches it.
#[inline]
fn bridge_hit(d1: f64, d2: f64, var_rate: f64) -> f64 {
    let e = 2.0 * d1 * d2 / var_rate;
    if e > 40.0 {
        0.0
    } else {
        (-e).exp()
    }
}

fn check_clock(clock: f64) -> Result<()> {
    if !(clock >= 0.0) || !clock.is_finite() {
        return Err(Error::domain("clock", clock, "must be finite and non-negative"));
    }
    Ok(())
}

/// Euler–Maruyama path of the diffusion generated by the operator, started
/// at `x0`, run to time `clock` and killed on leaving the domain.
///
/// The diffusion is dX = a'(X) dt + sqrt(2 a(X)) dW, which reduces to
/// sqrt(2) dW for Laplacians.
pub fn simulate_killed_path<R: Rng + ?Sized>(
    op: &OperatorSpec,
    x0: Point,
    clock: f64,
    cfg: &PathConfig,
    rng: &mut R,
) -> Result<PathOutcome> {
    op.check_point(x0)?;
    check_clock(clock)?;
    cfg.validate()?;
    Ok(run_path(op, x0, clock, cfg, rng))
}

fn run_path<R: Rng + ?Sized>(op: &OperatorSpec, x0: Point, clock: f64, cfg: &PathConfig, rng: &mut R) -> PathOutcome {
    if clock == 0.0 {
        return PathOutcome {
            position: x0,
            alive: true,
            exit_time: None,
        };
    }
    let steps = (clock / cfg.dt).ceil().max(1.0) as u64;
    match (op, x0) {
        (OperatorSpec::RectangleLaplacian { lx, ly }, Point::Two(x, y)) => {
            run_rectangle(*lx, *ly, x, y, clock, steps, cfg, rng)
        }
        (OperatorSpec::IntervalLaplacian { length }, Point::One(x)) => {
            run_line(*length, x, clock, steps, cfg, rng, |_| (1.0, 0.0))
        }
        (OperatorSpec::DivergenceForm1D(d), Point::One(x)) => run_line(d.length, x, clock, steps, cfg, rng, |x| {
            (d.a.value(x), d.a.derivative(x))
        }),
        _ => unreachable!("point dimension checked by the caller"),
    }
}

#[inline]
fn step_size(k: u64, steps: u64, dt: f64, clock: f64) -> (f64, f64) {
    if k == steps {
        (clock - (steps - 1) as f64 * dt, clock)
    } else {
        (dt, k as f64 * dt)
    }
}

fn run_line<R, C>(m: f64, x0: f64, clock: f64, steps: u64, cfg: &PathConfig, rng: &mut R, coef: C) -> PathOutcome
where
    R: Rng + ?Sized,
    C: Fn(f64) -> (f64, f64),
{
    let mut x = x0;
    for k in 1..=steps {
        let (h, t_k) = step_size(k, steps, cfg.dt, clock);
        let (a, da) = coef(x);
        let z: f64 = StandardNormal.sample(rng);
        let var = 2.0 * a * h;
        let xn = x + da * h + var.sqrt() * z;
        let killed = if xn <= 0.0 || xn >= m {
            true
        } else if cfg.bridge_correction {
            let p0 = bridge_hit(x, xn, var);
            let p1 = bridge_hit(m - x, m - xn, var);
            if p0 > 0.0 || p1 > 0.0 {
                let survive = (1.0 - p0) * (1.0 - p1);
                rng.random::<f64>() >= survive
            } else {
                false
            }
        } else {
            false
        };
        if killed {
            return PathOutcome {
                position: Point::One(xn.clamp(0.0, m)),
                alive: false,
                exit_time: Some(t_k),
            };
        }
        x = xn;
    }
    PathOutcome {
        position: Point::One(x),
        alive: true,
        exit_time: None,
    }
}

#[allow(clippy::too_many_arguments)]
fn run_rectangle<R: Rng + ?Sized>(
    lx: f64,
    ly: f64,
    x0: f64,
    y0: f64,
    clock: f64,
    steps: u64,
    cfg: &PathConfig,
    rng: &mut R,
) -> PathOutcome {
    let (mut x, mut y) = (x0, y0);
    for k in 1..=steps {
        let (h, t_k) = step_size(k, steps, cfg.dt, clock);
        let var = 2.0 * h;
        let s = var.sqrt();
        let zx: f64 = StandardNormal.sample(rng);
        let zy: f64 = StandardNormal.sample(rng);
        let xn = x + s * zx;
        let yn = y + s * zy;
        let killed = if xn <= 0.0 || xn >= lx || yn <= 0.0 || yn >= ly {
            true
        } else if cfg.bridge_correction {
            let ps = [
                bridge_hit(x, xn, var),
                bridge_hit(lx - x, lx - xn, var),
                bridge_hit(y, yn, var),
                bridge_hit(ly - y, ly - yn, var),
            ];
            if ps.iter().any(|&p| p > 0.0) {
                let survive: f64 = ps.iter().map(|p| 1.0 - p).product();
                rng.random::<f64>() >= survive
            } else {
                false
            }
        } else {
            false
        };
        if killed {
            return PathOutcome {
                position: Point::Two(xn.clamp(0.0, lx), yn.clamp(0.0, ly)),
                alive: false,
                exit_time: Some(t_k),
            };
        }
        x = xn;
        y = yn;
    }
    PathOutcome {
        position: Point::Two(x, y),
        alive: true,
        exit_time: None,
    }
}

// ---------------------------------------------------------------------------
// Monte Carlo solvers

/// Which form of the killing event is evaluated by [`solve_mc`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IndicatorMode {
    /// The outer path survives past the clock E_t.
    #[default]
    KillThenSubordinate,
    /// The time-changed path X(E_s) survives past real time t.
    SubordinateThenKill,
}

fn check_common(op: &OperatorSpec, t: f64, x0: Point, cfg: &PathConfig) -> Result<()> {
    op.check_point(x0)?;
    cfg.validate()?;
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::domain("t", t, "must be positive and finite"));
    }
    Ok(())
}

/// Run `n_paths` independent samples and reduce them deterministically.
fn estimate<S>(cfg: &PathConfig, rng: RngSpec, sample: S) -> Result<McEstimate>
where
    S: Fn(u64) -> (f64, bool) + Sync + Send,
{
    let m = exec::map_reduce(
        cfg.n_paths,
        cfg.execution,
        |r| -> Result<Moments> {
            let mut acc = Moments::default();
            for i in r {
                let (v, alive) = sample(i as u64);
                acc.push(v, alive);
            }
            Ok(acc)
        },
        Moments::merge,
    )?;
    Ok(m.estimate(rng))
}

/// Per-path survival flag of [`solve_mc`] under the given indicator mode.
#[allow(clippy::too_many_arguments)]
fn mc_path(
    op: &OperatorSpec,
    beta: FracOrder,
    t: f64,
    x0: Point,
    cfg: &PathConfig,
    rng: &RngSpec,
    i: u64,
    mode: IndicatorMode,
) -> PathOutcome {
    let mut r = rng.path_rng(i << 2);
    let d = sample_stable(beta, &mut r);
    let clock = inverse_from_stable(beta, t, d);
    let mut out = run_path(op, x0, clock, cfg, &mut r);
    if mode == IndicatorMode::SubordinateThenKill {
        // Real time at which the operational exit time tau is reached is
        // D_1 tau^(1/beta); the horizon is the image of the clock itself.
        let inv = 1.0 / beta.get();
        let horizon = d * clock.powf(inv);
        out.alive = match out.exit_time {
            None => true,
            Some(tau) => d * tau.powf(inv) > horizon,
        };
    }
    out
}

/// Estimate E_x0[f(X(E_t)) I(alive)] for the killed diffusion of `op`.
#[allow(clippy::too_many_arguments)]
pub fn solve_mc<F>(
    op: &OperatorSpec,
    f: F,
    beta: FracOrder,
    t: f64,
    x0: Point,
    cfg: &PathConfig,
    rng: RngSpec,
    mode: IndicatorMode,
) -> Result<McEstimate>
where
    F: Fn(Point) -> f64 + Sync + Send,
{
    check_common(op, t, x0, cfg)?;
    estimate(cfg, rng, |i| {
        let out = mc_path(op, beta, t, x0, cfg, &rng, i, mode);
        if out.alive {
            (f(out.position), true)
        } else {
            (0.0, false)
        }
    })
}

/// Per-path survival indicators of [`solve_mc`], in path order.
pub fn mc_indicators(
    op: &OperatorSpec,
    beta: FracOrder,
    t: f64,
    x0: Point,
    cfg: &PathConfig,
    rng: RngSpec,
    mode: IndicatorMode,
) -> Result<Vec<bool>> {
    check_common(op, t, x0, cfg)?;
    let idx: Vec<u64> = (0..cfg.n_paths as u64).collect();
    exec::map_vec(&idx, cfg.execution, |&i| -> Result<bool> {
        Ok(mc_path(op, beta, t, x0, cfg, &rng, i, mode).alive)
    })
}

/// Iterated Brownian motion estimate E_x0[f(X(|Y_t|)) I(tau > |Y_t|)], with
/// |Y_t| = sqrt(2t)|Z|.
pub fn solve_ibm<F>(op: &OperatorSpec, f: F, t: f64, x0: Point, cfg: &PathConfig, rng: RngSpec) -> Result<McEstimate>
where
    F: Fn(Point) -> f64 + Sync + Send,
{
    check_common(op, t, x0, cfg)?;
    let scale = (2.0 * t).sqrt();
    estimate(cfg, rng, |i| {
        let mut r = rng.path_rng(i << 2);
        let z: f64 = StandardNormal.sample(&mut r);
        let out = run_path(op, x0, scale * z.abs(), cfg, &mut r);
        if out.alive {
            (f(out.position), true)
        } else {
            (0.0, false)
        }
    })
}

/// Two-sided variant: Y_t = sqrt(2t) Z is signed, and the outer process is
/// X+ on the positive half-line and X- on the negative one. With `swap` the
/// two outer streams exchange roles and Y_t is reflected.
#[allow(clippy::too_many_arguments)]
pub fn solve_ibm_twosided<F>(
    op: &OperatorSpec,
    f: F,
    t: f64,
    x0: Point,
    cfg: &PathConfig,
    rng: RngSpec,
    swap: bool,
) -> Result<McEstimate>
where
    F: Fn(Point) -> f64 + Sync + Send,
{
    check_common(op, t, x0, cfg)?;
    if !op.is_laplacian() {
        return Err(Error::Operator(
            "the two-sided estimator supports Laplacians only".into(),
        ));
    }
    let scale = (2.0 * t).sqrt();
    let (plus_tag, minus_tag) = if swap { (2, 1) } else { (1, 2) };
    estimate(cfg, rng, |i| {
        let mut r = rng.path_rng(i << 2);
        let z: f64 = StandardNormal.sample(&mut r);
        let y = if swap { -scale * z } else { scale * z };
        // Only the branch on the side of Y_t can kill or move the sample:
        // -tau(X-) < Y_t always holds when Y_t >= 0, and symmetrically.
        let out = if y >= 0.0 {
            run_path(op, x0, y, cfg, &mut rng.path_rng((i << 2) | plus_tag))
        } else {
            run_path(op, x0, -y, cfg, &mut rng.path_rng((i << 2) | minus_tag))
        };
        if out.alive {
            (f(out.position), true)
        } else {
            (0.0, false)
        }
    })
}

// ---------------------------------------------------------------------------
// Continuous-time random walk

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CtrwConfig {
    pub beta: FracOrder,
    pub scale_c: f64,
    pub horizon_t: f64,
    pub n_walkers: usize,
}

impl CtrwConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.scale_c > 1.0) || !self.scale_c.is_finite() {
            return Err(Error::domain("scale_c", self.scale_c, "must exceed 1"));
        }
        if !(self.horizon_t > 0.0) || !self.horizon_t.is_finite() {
            return Err(Error::domain("horizon_t", self.horizon_t, "must be positive"));
        }
        if self.n_walkers == 0 {
            return Err(Error::Invalid("n_walkers must be at least 1".into()));
        }
        Ok(())
    }
}

/// Scaled renewal counts Gamma(1-beta) c^{-beta} N_{ct} for Pareto waiting
/// times with P(J > s) = s^{-beta}, s >= 1.
///
/// With this tail the summed waiting times converge to a stable law with
/// Laplace transform exp(-Gamma(1-beta) s^beta); the Gamma factor rescales the
/// counts onto E_t.
pub fn ctrw_scaled_counts(cfg: &CtrwConfig, rng: RngSpec, exec_mode: Execution) -> Result<Vec<f64>> {
    cfg.validate()?;
    let b = cfg.beta.get();
    let horizon = cfg.scale_c * cfg.horizon_t;
    let norm = specfun::gamma(1.0 - b) * cfg.scale_c.powf(-b);
    let inv = -1.0 / b;
    Ok(sample_many(rng, cfg.n_walkers, exec_mode, |r| {
        let mut total = 0.0;
        let mut n = 0u64;
        loop {
            let u: f64 = Open01.sample(r);
            total += u.powf(inv);
            if total > horizon {
                break;
            }
            n += 1;
        }
        norm * n as f64
    }))
}

// ---------------------------------------------------------------------------
// Goodness of fit

pub mod ks {
    /// Kolmogorov–Smirnov distance between a sample and a continuous CDF.
    pub fn one_sample<F: Fn(f64) -> f64>(sample: &[f64], cdf: F) -> f64 {
        let mut s = sample.to_vec();
        s.sort_by(f64::total_cmp);
        let n = s.len() as f64;
        let mut d = 0.0f64;
        let mut i = 0;
        while i < s.len() {
            // Ties are treated as a single jump of the empirical CDF.
            let mut j = i;
            while j + 1 < s.len() && s[j + 1] == s[i] {
                j += 1;
            }
            let f = cdf(s[i]);
            d = d.max(f - i as f64 / n).max((j + 1) as f64 / n - f);
            i = j + 1;
        }
        d
    }

    /// Two-sample Kolmogorov–Smirnov statistic.
    pub fn two_sample(a: &[f64], b: &[f64]) -> f64 {
        let mut a = a.to_vec();
        let mut b = b.to_vec();
        a.sort_by(f64::total_cmp);
        b.sort_by(f64::total_cmp);
        let (na, nb) = (a.len() as f64, b.len() as f64);
        let (mut i, mut j) = (0, 0);
        let mut d = 0.0f64;
        while i < a.len() && j < b.len() {
            let x = a[i].min(b[j]);
            while i < a.len() && a[i] <= x {
                i += 1;
            }
            while j < b.len() && b[j] <= x {
                j += 1;
            }
            d = d.max((i as f64 / na - j as f64 / nb).abs());
        }
        d
    }

    /// Asymptotic critical value at level `alpha` for sample sizes n, m
    /// (`m = None` for the one-sample test).
    pub fn critical(alpha: f64, n: usize, m: Option<usize>) -> f64 {
        let c = (-0.5 * (alpha / 2.0).ln()).sqrt();
        match m {
            None => c / (n as f64).sqrt(),
            Some(m) => c * ((n + m) as f64 / (n as f64 * m as f64)).sqrt(),
        }
    }
}
