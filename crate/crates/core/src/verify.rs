//! Executable checks: discrete Caputo residuals, the fourth-order PDE
//! residual, the subordination integral and the cross-solver equivalence
//! harness.

use std::f64::consts::PI;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::exec::{self, Execution};
use crate::quad::{self, Tolerance};
use crate::specfun::{self, FracOrder};
use crate::spectral::{self, InitialDatum, Point, SpectralCoefficients, SpectralModel};
use crate::stochastic::{self, IndicatorMode, McEstimate, PathConfig, RngSpec};

// ---------------------------------------------------------------------------
// Discrete Caputo derivative

fn check_uniform(times: &[f64]) -> Result<f64> {
    if times.len() < 3 {
        return Err(Error::Invalid(format!(
            "the L1 scheme needs at least 3 samples, got {}",
            times.len()
        )));
    }
    let dt = times[1] - times[0];
    if !(dt > 0.0) {
        return Err(Error::NonUniformGrid {
            first: dt,
            offending: dt,
        });
    }
    for w in times.windows(2) {
        let h = w[1] - w[0];
        if (h - dt).abs() > 1e-9 * dt {
            return Err(Error::NonUniformGrid {
                first: dt,
                offending: h,
            });
        }
    }
    Ok(dt)
}

fn l1_weights(n: usize, beta: f64) -> Vec<f64> {
    let p = 1.0 - beta;
    (0..n).map(|j| ((j + 1) as f64).powf(p) - (j as f64).powf(p)).collect()
}

/// L1 approximation of the Caputo derivative at every sample; entry 0 is 0.
pub fn caputo_l1(times: &[f64], values: &[f64], beta: FracOrder) -> Result<Vec<f64>> {
    caputo_l1_corrected(times, values, beta, &[])
}

/// L1 scheme with starting weights that make it exact on t^s for each `s`
/// in `exponents`, compensating the singular behaviour of the solution at
/// t = 0. An empty list gives the plain scheme.
///
/// Samples with index not larger than `exponents.len()` use the plain scheme.
#[allow(clippy::needless_range_loop)]
pub fn caputo_l1_corrected(times: &[f64], values: &[f64], beta: FracOrder, exponents: &[f64]) -> Result<Vec<f64>> {
    if times.len() != values.len() {
        return Err(Error::Misaligned {
            what: "times vs values",
            left: times.len(),
            right: values.len(),
        });
    }
    let dt = check_uniform(times)?;
    if times[0] != 0.0 {
        return Err(Error::domain(
            "times[0]",
            times[0],
            "the Caputo history must start at t = 0",
        ));
    }
    let b = beta.get();
    let n = times.len() - 1;
    let w = l1_weights(n, b);
    let scale = dt.powf(-b) / specfun::gamma(2.0 - b);
    let plain = |u: &dyn Fn(usize) -> f64, m: usize| -> f64 {
        let mut acc = 0.0;
        for j in 0..m {
            acc += w[j] * (u(m - j) - u(m - j - 1));
        }
        scale * acc
    };
    let k = exponents.len();
    let mut out = vec![0.0; n + 1];
    for m in 1..=n {
        let base = plain(&|i| values[i], m);
        if k == 0 || m <= k {
            out[m] = base;
            continue;
        }
        // Solve sum_k c_k (k dt)^s = D t^s - L1[t^s] at t_m for each s.
        let mut a = vec![vec![0.0; k]; k];
        let mut rhs = vec![0.0; k];
        for (r, &s) in exponents.iter().enumerate() {
            for (c, entry) in a[r].iter_mut().enumerate() {
                *entry = ((c + 1) as f64 * dt).powf(s);
            }
            let exact = specfun::gamma(1.0 + s) / specfun::gamma(1.0 + s - b) * (m as f64 * dt).powf(s - b);
            rhs[r] = exact - plain(&|i| (i as f64 * dt).powf(s), m);
        }
        let c = solve_dense(a, rhs)?;
        out[m] = base
            + c.iter()
                .enumerate()
                .map(|(j, c)| c * (values[j + 1] - values[0]))
                .sum::<f64>();
    }
    Ok(out)
}

/// Correction exponents used by default: the singular powers k*beta < 1 for
/// beta < 1/2, none otherwise.
pub fn default_corrections(beta: FracOrder) -> Vec<f64> {
    let b = beta.get();
    if b >= 0.5 {
        return Vec::new();
    }
    (1..).map(|k| k as f64 * b).take_while(|&s| s < 1.0 - 1e-12).collect()
}

#[allow(clippy::needless_range_loop)]
fn solve_dense(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Result<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap_or(col);
        if a[piv][col] == 0.0 {
            return Err(Error::Invalid("singular starting-weight system".into()));
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for r in col + 1..n {
            let f = a[r][col] / a[col][col];
            for c in col..n {
                a[r][c] -= f * a[col][c];
            }
            b[r] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|c| a[r][c] * x[c]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    Ok(x)
}

// ---------------------------------------------------------------------------
// Residual reports

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResidualLevel {
    pub dt: f64,
    pub max_abs_residual: f64,
    /// Residual at the final time of the grid.
    pub end_residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResidualReport {
    pub max_abs_residual: f64,
    pub grid_spec: String,
    /// Least-squares slope of log |end residual| against log dt; present
    /// only with at least three refinement levels.
    pub convergence_order: Option<f64>,
    pub levels: Vec<ResidualLevel>,
    /// Estimate of the sup-norm contribution of the omitted modes.
    pub tail_bound: f64,
    /// Largest |u| or |Lu| seen at boundary sample points.
    pub boundary_max: Option<f64>,
}

fn fitted_order(levels: &[ResidualLevel]) -> Option<f64> {
    if levels.len() < 3 {
        return None;
    }
    let pts: Vec<(f64, f64)> = levels
        .iter()
        .map(|l| (l.dt.ln(), l.end_residual.abs().max(f64::MIN_POSITIVE).ln()))
        .collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    Some(sxy / sxx)
}

fn uniform_times(dt: f64, t_end: f64) -> Result<Vec<f64>> {
    if !(dt > 0.0) || !(t_end > dt) {
        return Err(Error::Invalid(format!("invalid time grid dt = {dt}, t_end = {t_end}")));
    }
    let n = (t_end / dt).round() as usize;
    if ((n as f64 * dt) - t_end).abs() > 1e-9 * t_end {
        return Err(Error::Invalid(format!(
            "t_end = {t_end} is not a multiple of dt = {dt}"
        )));
    }
    Ok((0..=n).map(|i| i as f64 * dt).collect())
}

/// Residual of u(t) = E_beta(-lambda t^beta) under the discrete operator
/// D^beta + lambda, swept over the step sizes `dts`.
pub fn eigen_relation_sweep(
    beta: FracOrder,
    lambda: f64,
    dts: &[f64],
    t_end: f64,
    t_min: f64,
) -> Result<ResidualReport> {
    let b = beta.get();
    let corr = default_corrections(beta);
    let mut levels = Vec::with_capacity(dts.len());
    for &dt in dts {
        let times = uniform_times(dt, t_end)?;
        let u = times
            .iter()
            .map(|&t| Ok(specfun::mittag_leffler(b, -lambda * t.powf(b))?.value))
            .collect::<Result<Vec<f64>>>()?;
        let d = caputo_l1_corrected(&times, &u, beta, &corr)?;
        let mut max = 0.0f64;
        for i in 1..times.len() {
            if times[i] >= t_min && i > corr.len() {
                max = max.max((d[i] + lambda * u[i]).abs());
            }
        }
        let last = times.len() - 1;
        levels.push(ResidualLevel {
            dt,
            max_abs_residual: max,
            end_residual: (d[last] + lambda * u[last]).abs(),
        });
    }
    Ok(ResidualReport {
        max_abs_residual: levels.iter().map(|l| l.max_abs_residual).fold(0.0, f64::max),
        grid_spec: format!("beta={b} lambda={lambda} t in [{t_min}, {t_end}] dt={dts:?} corrections={corr:?}"),
        convergence_order: fitted_order(&levels),
        levels,
        tail_bound: 0.0,
        boundary_max: None,
    })
}

/// Power-law extrapolation of the sup-norm of the omitted part of the
/// series, sup|phi| * sum_{n>N} |f(n)|, from the decay fit of the
/// coefficients.
pub fn tail_estimate(model: &SpectralModel, coeffs: &SpectralCoefficients) -> Result<f64> {
    let report = spectral::smoothness_diagnostic(coeffs, model)?;
    let k = match report.decay_exponent {
        None => return Ok(0.0),
        Some(k) => k,
    };
    let d = model.dim() as f64;
    let p = 2.0 * k / d;
    if p <= 1.0 {
        return Ok(f64::INFINITY);
    }
    let c = model
        .modes
        .iter()
        .zip(&coeffs.values)
        .map(|(m, v)| v.abs() * m.eigenvalue.powf(k))
        .fold(0.0f64, f64::max);
    let n = model.len() as f64;
    let lambda_n = model.modes[model.len() - 1].eigenvalue;
    let sup_phi = sup_eigenfunction(model);
    Ok(sup_phi * c * lambda_n.powf(-k) * n / (p - 1.0))
}

fn sup_eigenfunction(model: &SpectralModel) -> f64 {
    let (lx, ly) = model.op.extent();
    match ly {
        Some(ly) => 2.0 / (lx * ly).sqrt(),
        None => match &model.op {
            spectral::OperatorSpec::IntervalLaplacian { length } => (2.0 / length).sqrt(),
            _ => model
                .modes
                .iter()
                .filter_map(|m| match &m.eigenfunction {
                    spectral::Eigenfunction::Grid { values, .. } => {
                        Some(values.iter().fold(0.0f64, |a, v| a.max(v.abs())))
                    }
                    _ => None,
                })
                .fold(0.0, f64::max),
        },
    }
}

/// Sup over the grid of |D^beta u - L u| for the series solution at each
/// step size in `dts`, with L u evaluated spectrally.
#[allow(clippy::too_many_arguments)]
pub fn residual_fractional(
    model: &SpectralModel,
    coeffs: &SpectralCoefficients,
    beta: FracOrder,
    dts: &[f64],
    t_end: f64,
    t_min: f64,
    points: &[Point],
    tail_tolerance: f64,
) -> Result<ResidualReport> {
    let tail = tail_estimate(model, coeffs)?;
    if !(tail <= tail_tolerance) {
        return Err(Error::Uncertified(format!(
            "truncation tail estimate {tail:e} exceeds the tolerance {tail_tolerance:e}"
        )));
    }
    let b = beta.get();
    let corr = default_corrections(beta);
    let phi = model.eval_matrix(points);
    let mut levels = Vec::with_capacity(dts.len());
    for &dt in dts {
        let times = uniform_times(dt, t_end)?;
        // Mode factors E_beta(-lambda_n t^beta) on the grid.
        let factors = exec::map_vec(&model.modes, Execution::Parallel, |m| -> Result<Vec<f64>> {
            times
                .iter()
                .map(|&t| {
                    if t == 0.0 {
                        Ok(1.0)
                    } else {
                        Ok(specfun::mittag_leffler(b, -m.eigenvalue * t.powf(b))?.value)
                    }
                })
                .collect()
        })?;
        let mut max = 0.0f64;
        let mut end = 0.0f64;
        let last = times.len() - 1;
        for row in &phi {
            let u: Vec<f64> = (0..times.len())
                .map(|i| {
                    (0..model.len())
                        .map(|n| coeffs.values[n] * row[n] * factors[n][i])
                        .sum()
                })
                .collect();
            let lu: Vec<f64> = (0..times.len())
                .map(|i| {
                    (0..model.len())
                        .map(|n| -model.modes[n].eigenvalue * coeffs.values[n] * row[n] * factors[n][i])
                        .sum()
                })
                .collect();
            let d = caputo_l1_corrected(&times, &u, beta, &corr)?;
            for i in 1..times.len() {
                if times[i] >= t_min && i > corr.len() {
                    max = max.max((d[i] - lu[i]).abs());
                }
            }
            end = end.max((d[last] - lu[last]).abs());
        }
        levels.push(ResidualLevel {
            dt,
            max_abs_residual: max,
            end_residual: end,
        });
    }
    Ok(ResidualReport {
        max_abs_residual: levels.iter().map(|l| l.max_abs_residual).fold(0.0, f64::max),
        grid_spec: format!(
            "beta={b} N={} t in [{t_min}, {t_end}] dt={dts:?} points={}",
            model.len(),
            points.len()
        ),
        convergence_order: fitted_order(&levels),
        levels,
        tail_bound: tail,
        boundary_max: None,
    })
}

/// Sup over (t, x) of |u_t - L f/sqrt(pi t) - L^2 u| for the fourth-order
/// series, with u_t from the Mittag-Leffler time derivative and u from the
/// erfcx form of the fourth-order solver.
pub fn residual_fourth_order(
    model: &SpectralModel,
    coeffs: &SpectralCoefficients,
    times: &[f64],
    points: &[Point],
) -> Result<ResidualReport> {
    for &t in times {
        if !(t > 0.0) {
            return Err(Error::domain("t", t, "residual times must be positive"));
        }
    }
    let tail = tail_estimate(model, coeffs)?;
    let phi = model.eval_matrix(points);
    let mut max = 0.0f64;
    for &t in times {
        let mut dt_coef = Vec::with_capacity(model.len());
        let mut lf_coef = Vec::with_capacity(model.len());
        let mut l2u_coef = Vec::with_capacity(model.len());
        for (m, c) in model.modes.iter().zip(&coeffs.values) {
            let l = m.eigenvalue;
            dt_coef.push(c * specfun::ml_time_derivative(0.5, l, t)?);
            lf_coef.push(-l * c);
            l2u_coef.push(l * l * c * specfun::erfcx(l * t.sqrt()));
        }
        let inv = 1.0 / (PI * t).sqrt();
        for row in &phi {
            let mut r = 0.0;
            for n in 0..model.len() {
                r += row[n] * (dt_coef[n] - lf_coef[n] * inv - l2u_coef[n]);
            }
            max = max.max(r.abs());
        }
    }
    // Boundary values of u and L u.
    let bd = model.op.boundary_samples();
    let bgrid = spectral::solve_fourth_order(model, coeffs, times, &bd)?;
    let lcoeffs = SpectralCoefficients::from_values(
        model
            .modes
            .iter()
            .zip(&coeffs.values)
            .map(|(m, c)| -m.eigenvalue * c)
            .collect(),
        0.0,
    );
    let lgrid = spectral::solve_fourth_order(model, &lcoeffs, times, &bd)?;
    let boundary_max = bgrid
        .values
        .iter()
        .chain(&lgrid.values)
        .flatten()
        .fold(0.0f64, |a, v| a.max(v.abs()));
    Ok(ResidualReport {
        max_abs_residual: max,
        grid_spec: format!("N={} times={} points={}", model.len(), times.len(), points.len()),
        convergence_order: None,
        levels: Vec::new(),
        tail_bound: tail,
        boundary_max: Some(boundary_max),
    })
}

// ---------------------------------------------------------------------------
// Subordination identity

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SubordinationCheck {
    pub lhs: f64,
    pub rhs: f64,
    /// Quadrature error estimate plus the neglected upper tail.
    pub lhs_error: f64,
}

/// lhs = int_0^inf exp(-lambda (t/l)^beta) g_beta(l) dl, rhs = E_beta(-lambda t^beta).
pub fn subordination_identity(beta: FracOrder, lambda: f64, t: f64) -> Result<SubordinationCheck> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::domain("lambda", lambda, "must be positive"));
    }
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::domain("t", t, "must be positive"));
    }
    let b = beta.get();
    let gexp = b / (1.0 - b);
    // In y = ln l: below y_lo the density is below exp(-800 A); above y_hi
    // its survival function is below 1e-11.
    let y_lo = -(800f64.ln()) / gexp;
    let y_hi = -(1e-11 * specfun::gamma(1.0 - b)).ln() / b;
    let lt = lambda * t.powf(b);
    let integrand = |y: f64| -> f64 {
        let l = y.exp();
        match specfun::stable_density(beta, l) {
            Ok(g) => (-lt * (-b * y).exp()).exp() * g * l,
            Err(_) => f64::NAN,
        }
    };
    let steps = ((y_hi - y_lo) / 2.0).ceil() as usize;
    let breaks: Vec<f64> = (0..=steps)
        .map(|i| y_lo + (y_hi - y_lo) * i as f64 / steps as f64)
        .collect();
    let r = quad::integrate_with_breaks(integrand, &breaks, Tolerance::new(1e-12, 1e-12))?;
    let tail = specfun::stable_survival(beta, y_hi.exp())?;
    let rhs = specfun::mittag_leffler(b, -lt)?.value;
    Ok(SubordinationCheck {
        lhs: r.value,
        rhs,
        lhs_error: r.abs_error + tail,
    })
}

// ---------------------------------------------------------------------------
// Equivalence harness

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Leg {
    Fractional,
    FourthOrder,
    McKillThenSubordinate,
    McSubordinateThenKill,
    Ibm,
    IbmTwoSided,
}

impl Leg {
    pub const ALL: [Leg; 6] = [
        Leg::Fractional,
        Leg::FourthOrder,
        Leg::McKillThenSubordinate,
        Leg::McSubordinateThenKill,
        Leg::Ibm,
        Leg::IbmTwoSided,
    ];

    pub fn is_spectral(self) -> bool {
        matches!(self, Leg::Fractional | Leg::FourthOrder)
    }

    pub fn name(self) -> &'static str {
        match self {
            Leg::Fractional => "fractional",
            Leg::FourthOrder => "fourth_order",
            Leg::McKillThenSubordinate => "mc_kill_then_subordinate",
            Leg::McSubordinateThenKill => "mc_subordinate_then_kill",
            Leg::Ibm => "ibm",
            Leg::IbmTwoSided => "ibm_two_sided",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LegValue {
    pub leg: Leg,
    pub value: f64,
    pub std_error: f64,
    pub estimate: Option<McEstimate>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub bound: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EquivalenceCase {
    pub t: f64,
    pub x: Point,
    pub legs: Vec<LegValue>,
    pub checks: Vec<Check>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EquivalenceReport {
    pub cases: Vec<EquivalenceCase>,
    pub pass: bool,
}

/// Tolerance for pairs of spectral legs.
pub const SPECTRAL_PAIR_TOL: f64 = 1e-12;
/// Statistical pairs must agree within this many combined standard errors.
pub const MC_PAIR_SIGMAS: f64 = 3.0;

/// Evaluate all six legs at each (t, x) and every pairwise discrepancy.
pub fn equivalence_suite(
    model: &SpectralModel,
    datum: &InitialDatum,
    times: &[f64],
    points: &[Point],
    cfg: &PathConfig,
    rng: RngSpec,
) -> Result<EquivalenceReport> {
    let f = datum.evaluator(model)?;
    let coeffs = spectral::transform(model, &f)?;
    let frac = spectral::solve_fractional(model, &coeffs, FracOrder::HALF, times, points)?;
    let fourth = spectral::solve_fourth_order(model, &coeffs, times, points)?;
    let mut cases = Vec::new();
    for (i, &t) in times.iter().enumerate() {
        for (j, &x) in points.iter().enumerate() {
            let case_id = (i * points.len() + j) as u64;
            let mc_legs = [
                Leg::McKillThenSubordinate,
                Leg::McSubordinateThenKill,
                Leg::Ibm,
                Leg::IbmTwoSided,
            ];
            let estimates = exec::map_vec(&mc_legs, Execution::Parallel, |&leg| -> Result<McEstimate> {
                // Both indicator modes share one seed so they see the same paths.
                let seed_leg = match leg {
                    Leg::McKillThenSubordinate | Leg::McSubordinateThenKill => 0,
                    Leg::Ibm => 1,
                    _ => 2,
                };
                let r = rng.substream(case_id * 8 + seed_leg);
                match leg {
                    Leg::McKillThenSubordinate => stochastic::solve_mc(
                        &model.op,
                        &f,
                        FracOrder::HALF,
                        t,
                        x,
                        cfg,
                        r,
                        IndicatorMode::KillThenSubordinate,
                    ),
                    Leg::McSubordinateThenKill => stochastic::solve_mc(
                        &model.op,
                        &f,
                        FracOrder::HALF,
                        t,
                        x,
                        cfg,
                        r,
                        IndicatorMode::SubordinateThenKill,
                    ),
                    Leg::Ibm => stochastic::solve_ibm(&model.op, &f, t, x, cfg, r),
                    _ => stochastic::solve_ibm_twosided(&model.op, &f, t, x, cfg, r, false),
                }
            })?;
            let mut legs = vec![
                LegValue {
                    leg: Leg::Fractional,
                    value: frac.values[i][j],
                    std_error: 0.0,
                    estimate: None,
                },
                LegValue {
                    leg: Leg::FourthOrder,
                    value: fourth.values[i][j],
                    std_error: 0.0,
                    estimate: None,
                },
            ];
            for (leg, e) in mc_legs.iter().zip(estimates) {
                legs.push(LegValue {
                    leg: *leg,
                    value: e.mean,
                    std_error: e.std_error,
                    estimate: Some(e),
                });
            }
            let mut checks = Vec::new();
            for a in 0..legs.len() {
                for b in a + 1..legs.len() {
                    let (la, lb) = (&legs[a], &legs[b]);
                    let diff = (la.value - lb.value).abs();
                    let shared_paths = matches!(
                        (la.leg, lb.leg),
                        (Leg::McKillThenSubordinate, Leg::McSubordinateThenKill)
                    );
                    let bound = if la.leg.is_spectral() && lb.leg.is_spectral() {
                        SPECTRAL_PAIR_TOL
                    } else if shared_paths {
                        0.0
                    } else {
                        MC_PAIR_SIGMAS * (la.std_error.powi(2) + lb.std_error.powi(2)).sqrt()
                    };
                    checks.push(Check {
                        name: format!("{} vs {}", la.leg.name(), lb.leg.name()),
                        value: diff,
                        bound,
                        pass: diff <= bound,
                    });
                }
            }
            cases.push(EquivalenceCase { t, x, legs, checks });
        }
    }
    let pass = cases.iter().all(|c| c.checks.iter().all(|k| k.pass));
    Ok(EquivalenceReport { cases, pass })
}

// ---------------------------------------------------------------------------
// Uniqueness proxy

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UniquenessReport {
    /// max |u| for the zero datum.
    pub zero_datum_max: f64,
    /// For each mode n, max |u| when only coefficient n is perturbed.
    pub perturbed_max: Vec<f64>,
    pub injective: bool,
}

/// The zero datum yields the zero solution, and perturbing any single
/// coefficient yields a nonzero one.
pub fn uniqueness_proxy(
    model: &SpectralModel,
    beta: FracOrder,
    times: &[f64],
    points: &[Point],
    perturbation: f64,
) -> Result<UniquenessReport> {
    let n = model.len();
    let zero = SpectralCoefficients::from_values(vec![0.0; n], 0.0);
    let grid = spectral::solve_fractional(model, &zero, beta, times, points)?;
    let zero_datum_max = grid.values.iter().flatten().fold(0.0f64, |a, v| a.max(v.abs()));
    let mut perturbed_max = Vec::with_capacity(n);
    for k in 0..n {
        let mut v = vec![0.0; n];
        v[k] = perturbation;
        let c = SpectralCoefficients::from_values(v, 0.0);
        let g = spectral::solve_fractional(model, &c, beta, times, points)?;
        perturbed_max.push(g.values.iter().flatten().fold(0.0f64, |a, v| a.max(v.abs())));
    }
    let injective = zero_datum_max == 0.0 && perturbed_max.iter().all(|&m| m > 0.0);
    Ok(UniquenessReport {
        zero_datum_max,
        perturbed_max,
        injective,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn l1_is_exact_on_constants_and_linear() {
        let times: Vec<f64> = (0..=64).map(|i| i as f64 / 64.0).collect();
        let ones = vec![1.0; times.len()];
        let d = caputo_l1(&times, &ones, FracOrder::HALF).unwrap();
        assert!(d.iter().all(|&v| v == 0.0));
        let d = caputo_l1(&times, &times, FracOrder::HALF).unwrap();
        let exact = 1.0 / specfun::gamma(1.5);
        assert!((d[64] - exact).abs() < 1e-12, "{}", d[64]);
    }

    #[test]
    fn non_uniform_grid_rejected() {
        let times = [0.0, 0.1, 0.25, 0.3];
        let err = caputo_l1(&times, &[0.0; 4], FracOrder::HALF).unwrap_err();
        assert!(matches!(err, Error::NonUniformGrid { .. }));
        assert!(caputo_l1(&[0.0, 1.0], &[0.0, 1.0], FracOrder::HALF).is_err());
    }

    #[test]
    fn corrected_scheme_is_exact_on_its_exponents() {
        let beta = FracOrder::new(0.3).unwrap();
        let times: Vec<f64> = (0..=32).map(|i| i as f64 / 32.0).collect();
        let s = 0.6;
        let u: Vec<f64> = times.iter().map(|t| 2.0 + t.powf(s)).collect();
        let d = caputo_l1_corrected(&times, &u, beta, &[0.3, 0.6, 0.9]).unwrap();
        let exact = specfun::gamma(1.0 + s) / specfun::gamma(1.0 + s - 0.3);
        assert!((d[32] - exact).abs() < 1e-10, "{} vs {exact}", d[32]);
    }

    #[test]
    fn default_corrections_only_below_half() {
        assert_eq!(default_corrections(FracOrder::HALF), Vec::<f64>::new());
        let c = default_corrections(FracOrder::new(0.3).unwrap());
        assert_eq!(c.len(), 3);
    }

    #[test]
    fn fitted_order_of_exact_power_law() {
        let levels: Vec<ResidualLevel> = [0.1, 0.05, 0.025]
            .iter()
            .map(|&dt: &f64| ResidualLevel {
                dt,
                max_abs_residual: 0.0,
                end_residual: 3.0 * dt.powf(1.5),
            })
            .collect();
        assert!((fitted_order(&levels).unwrap() - 1.5).abs() < 1e-12);
        assert!(fitted_order(&levels[..2]).is_none());
    }
}
