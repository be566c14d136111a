//! Scalar kernels: Mittag-Leffler functions on the negative real axis,
//! one-sided stable densities and the densities of the inverse stable
//! subordinator.
//!
//! Everything here is a pure function of its arguments.
//!
//! The Mittag-Leffler function `E_β(-x)` is evaluated from its Taylor series
//! for `x <= 1` and, beyond that, by inverting the Laplace transform
//! `s^{β-1}/(s^β + x)`. For `0 < β < 1` the transform has no poles on the
//! principal sheet, so the Bromwich contour can be collapsed onto the
//! negative real axis; the resulting integrand is positive and free of
//! cancellation.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quad::{self, Tolerance};

/// Fractional order `β`, strictly inside `(0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct FracOrder(f64);

impl FracOrder {
    pub const HALF: FracOrder = FracOrder(0.5);

    pub fn new(beta: f64) -> Result<Self> {
        if beta.is_finite() && beta > 0.0 && beta < 1.0 {
            Ok(FracOrder(beta))
        } else {
            Err(Error::InvalidOrder(beta))
        }
    }

    #[inline]
    pub fn get(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for FracOrder {
    type Error = Error;

    fn try_from(value: f64) -> Result<Self> {
        FracOrder::new(value)
    }
}

impl From<FracOrder> for f64 {
    fn from(b: FracOrder) -> f64 {
        b.0
    }
}

/// A Mittag-Leffler value together with a bound on its truncation and
/// quadrature error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MlValue {
    pub value: f64,
    pub abs_error_bound: f64,
}

/// `Γ(x)`.
#[inline]
pub fn gamma(x: f64) -> f64 {
    libm::tgamma(x)
}

fn check_ml_order(beta: f64) -> Result<()> {
    if beta.is_finite() && beta > 0.0 && beta <= 1.0 {
        Ok(())
    } else {
        Err(Error::domain("beta", beta, "Mittag-Leffler order must lie in (0,1]"))
    }
}

/// Neumaier-compensated accumulator.
#[derive(Default, Clone, Copy)]
struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.carry += (self.sum - t) + v;
        } else {
            self.carry += (v - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

/// Taylor series `Σ (-x)^k / Γ(shift + βk)` for `0 <= x <= 1`.
///
/// `Γ` is log-convex, so the ratio of consecutive term magnitudes is
/// non-increasing once it drops below one; the geometric tail bound that
/// follows from this is returned with the sum.
fn ml_taylor(beta: f64, shift: f64, x: f64) -> MlValue {
    let mut acc = CompensatedSum::default();
    let mut abs_sum = 0.0;
    let mut power = 1.0;
    let mut k = 0usize;
    loop {
        let g = gamma(shift + beta * k as f64);
        let term = power / g;
        let signed = if k.is_multiple_of(2) { term } else { -term };
        acc.add(signed);
        abs_sum += term;
        let next_g = gamma(shift + beta * (k + 1) as f64);
        let ratio = x * g / next_g;
        if term < 1e-18 && ratio < 0.5 {
            let tail = term * ratio / (1.0 - ratio);
            return MlValue {
                value: acc.value(),
                abs_error_bound: tail + 4.0 * f64::EPSILON * abs_sum,
            };
        }
        if !next_g.is_finite() {
            // Terms are below underflow long before Γ overflows for x <= 1.
            return MlValue {
                value: acc.value(),
                abs_error_bound: 4.0 * f64::EPSILON * abs_sum,
            };
        }
        power *= x;
        k += 1;
    }
}

/// Cut-off radius after which `exp(-ρ^{1/β})` is below `1e-40`.
fn hankel_radius(beta: f64) -> f64 {
    92.1f64.powf(beta)
}

/// Collapsed Bromwich integral in the variable `ρ = r^β`:
///
/// `(sin πβ / πβ) ∫_0^∞ e^{-ρ^{1/β}} ρ^{p/β} h(ρ) / (ρ² + 2xρ cos πβ + x²) dρ`
///
/// with `numer(ρ)` supplying `ρ^{p/β}`-type factors.
fn hankel_integral<F: Fn(f64) -> f64>(beta: f64, x: f64, numer: F) -> Result<MlValue> {
    let c = (PI * beta).cos();
    let s = (PI * beta).sin();
    let radius = hankel_radius(beta);
    let inv_beta = 1.0 / beta;
    let integrand = |rho: f64| {
        let denom = rho * rho + 2.0 * x * rho * c + x * x;
        (-(rho.powf(inv_beta))).exp() * numer(rho) / denom
    };
    let mut breaks = vec![0.0];
    if radius > 1.0 {
        breaks.push(1.0);
    }
    let peak = -x * c;
    if peak > 0.0 && peak < radius && (peak - 1.0).abs() > 1e-3 {
        breaks.push(peak);
    }
    breaks.push(radius);
    breaks.sort_by(f64::total_cmp);
    let tol = Tolerance {
        abs: 1e-300,
        rel: 1e-14,
        max_panels: 4000,
    };
    let r = quad::integrate_with_breaks(integrand, &breaks, tol)?;
    let scale = s / (PI * beta);
    // Tail beyond the radius: the denominator is at least x² sin²(πβ) and
    // ∫_R^∞ e^{-ρ^{1/β}} ρ^q dρ is far below 1e-30 for the ratios used here.
    let denom_min = if c < 0.0 { x * x * s * s } else { x * x };
    let tail = 1e-38 * numer(radius).max(1.0) / denom_min;
    Ok(MlValue {
        value: scale * r.value,
        abs_error_bound: scale * (r.abs_error + tail),
    })
}

/// `E_β(x)` for `x <= 0` and `β ∈ (0, 1]`.
///
/// `β = 1` is accepted as the classical limit and returns `e^x`.
pub fn mittag_leffler(beta: f64, x: f64) -> Result<MlValue> {
    check_ml_order(beta)?;
    if !x.is_finite() {
        return Err(Error::NonFinite("mittag_leffler argument"));
    }
    if x > 0.0 {
        return Err(Error::domain(
            "x",
            x,
            "only the completely monotone branch x <= 0 is supported",
        ));
    }
    if x == 0.0 {
        return Ok(MlValue {
            value: 1.0,
            abs_error_bound: 0.0,
        });
    }
    if beta == 1.0 {
        let v = x.exp();
        return Ok(MlValue {
            value: v,
            abs_error_bound: 2.0 * f64::EPSILON * v,
        });
    }
    let z = -x;
    if z <= 1.0 {
        Ok(ml_taylor(beta, 1.0, z))
    } else {
        hankel_integral(beta, z, |_| z)
    }
}

/// `E_{β,β}(-x)` for `x >= 0`.
fn ml_beta_beta(beta: f64, x: f64) -> Result<MlValue> {
    if x <= 1.0 {
        Ok(ml_taylor(beta, beta, x))
    } else {
        let inv_beta = 1.0 / beta;
        hankel_integral(beta, x, |rho| rho.powf(inv_beta))
    }
}

/// `d/dt E_β(-λ t^β)` for `λ > 0`, `t > 0`.
///
/// Uses `d/dt E_β(-λt^β) = -λ t^{β-1} E_{β,β}(-λ t^β)`.
pub fn ml_time_derivative(beta: f64, lambda: f64, t: f64) -> Result<f64> {
    check_ml_order(beta)?;
    if !(lambda.is_finite() && lambda > 0.0) {
        return Err(Error::domain("lambda", lambda, "must be positive and finite"));
    }
    if !t.is_finite() {
        return Err(Error::NonFinite("ml_time_derivative time"));
    }
    if t <= 0.0 {
        return Err(Error::domain("t", t, "derivative is singular like t^(beta-1) at t = 0"));
    }
    if beta == 1.0 {
        return Ok(-lambda * (-lambda * t).exp());
    }
    let x = lambda * t.powf(beta);
    let e = ml_beta_beta(beta, x)?;
    Ok(-lambda * t.powf(beta - 1.0) * e.value)
}

/// `sin(π u)` evaluated from whichever of `u`, `1 - u` is closer to zero.
#[inline]
fn sin_pi(u: f64) -> f64 {
    if u > 0.5 {
        (PI * (1.0 - u)).sin()
    } else {
        (PI * u).sin()
    }
}

/// `ln A(u)` for Zolotarev's function
/// `A(u) = [sin(βπu)/sin(πu)]^{1/(1-β)} · sin((1-β)πu)/sin(βπu)`.
#[inline]
pub(crate) fn zolotarev_ln_a(beta: f64, u: f64) -> f64 {
    let sb = sin_pi(beta * u).ln();
    let s1 = sin_pi(u).ln();
    let sc = sin_pi((1.0 - beta) * u).ln();
    (sb - s1) / (1.0 - beta) + sc - sb
}

/// Point where `A(u) x^{-γ} = 1`, if it lies inside `(0, 1)`.
fn zolotarev_peak(beta: f64, gamma_exp: f64, ln_x: f64) -> Option<f64> {
    let target = gamma_exp * ln_x;
    let f = |u: f64| zolotarev_ln_a(beta, u) - target;
    let (mut lo, mut hi) = (1e-12, 1.0 - 1e-12);
    if f(lo) >= 0.0 || f(hi) <= 0.0 {
        return None;
    }
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some(0.5 * (lo + hi))
}

fn zolotarev_breaks(beta: f64, gamma_exp: f64, ln_x: f64) -> Vec<f64> {
    let mut breaks = vec![0.0];
    if let Some(p) = zolotarev_peak(beta, gamma_exp, ln_x) {
        if p > 1e-9 && p < 1.0 - 1e-9 {
            breaks.push(p);
        }
    }
    breaks.push(1.0);
    breaks
}

/// Series threshold: for `x^{-β}` below this the convergent large-argument
/// series is used.
const STABLE_SERIES_Q: f64 = 0.05;

fn stable_series(beta: f64, x: f64) -> f64 {
    // g(x) = (1/π) Σ_{k>=1} (-1)^{k+1} Γ(βk+1)/k! sin(πβk) x^{-βk-1}
    let ln_q = -beta * x.ln();
    let mut acc = CompensatedSum::default();
    for k in 1..80 {
        let kf = k as f64;
        let ln_mag = libm::lgamma(beta * kf + 1.0) - libm::lgamma(kf + 1.0) + kf * ln_q;
        let mag = ln_mag.exp();
        let s = (PI * beta * kf).sin();
        let term = if k % 2 == 1 { mag * s } else { -mag * s };
        acc.add(term);
        if mag < 1e-18 * acc.value().abs() {
            break;
        }
    }
    acc.value() / (PI * x)
}

fn check_positive(name: &'static str, v: f64) -> Result<()> {
    if !v.is_finite() {
        return Err(Error::NonFinite(name));
    }
    if v <= 0.0 {
        return Err(Error::domain(name, v, "must be positive"));
    }
    Ok(())
}

fn stable_survival_series(beta: f64, x: f64) -> f64 {
    // P(D > x) = (1/π) Σ_{k>=1} (-1)^{k+1} Γ(βk)/k! sin(πβk) x^{-βk}
    let ln_q = -beta * x.ln();
    let mut acc = CompensatedSum::default();
    for k in 1..80 {
        let kf = k as f64;
        let ln_mag = libm::lgamma(beta * kf) - libm::lgamma(kf + 1.0) + kf * ln_q;
        let mag = ln_mag.exp();
        let s = (PI * beta * kf).sin();
        let term = if k % 2 == 1 { mag * s } else { -mag * s };
        acc.add(term);
        if mag < 1e-18 * acc.value().abs() {
            break;
        }
    }
    acc.value() / PI
}

const STABLE_TOL: Tolerance = Tolerance {
    abs: 1e-300,
    rel: 1e-13,
    max_panels: 2000,
};

/// Density `g_β(x)` of the one-sided stable law with Laplace transform
/// `e^{-s^β}`.
///
/// Moderate arguments use Zolotarev's single-integral representation
/// `g_β(x) = (γ/x) ∫_0^1 w e^{-w} du`, `w = A(u) x^{-γ}`, `γ = β/(1-β)`;
/// large arguments use the convergent series in `x^{-β}`.
pub fn stable_density(beta: FracOrder, x: f64) -> Result<f64> {
    check_positive("x", x)?;
    let b = beta.get();
    if x.powf(-b) <= STABLE_SERIES_Q {
        return Ok(stable_series(b, x));
    }
    let gamma_exp = b / (1.0 - b);
    let ln_x = x.ln();
    let w = |u: f64| (zolotarev_ln_a(b, u) - gamma_exp * ln_x).exp();
    let r = quad::integrate_with_breaks(
        |u| {
            let wu = w(u);
            if wu.is_finite() {
                wu * (-wu).exp()
            } else {
                0.0
            }
        },
        &zolotarev_breaks(b, gamma_exp, ln_x),
        STABLE_TOL,
    )?;
    Ok(gamma_exp / x * r.value)
}

/// `P(D_1 > x)` for the stable law of [`stable_density`].
pub fn stable_survival(beta: FracOrder, x: f64) -> Result<f64> {
    check_positive("x", x)?;
    let b = beta.get();
    if x.powf(-b) <= STABLE_SERIES_Q {
        return Ok(stable_survival_series(b, x));
    }
    let gamma_exp = b / (1.0 - b);
    let ln_x = x.ln();
    let r = quad::integrate_with_breaks(
        |u| {
            let wu = (zolotarev_ln_a(b, u) - gamma_exp * ln_x).exp();
            if wu.is_finite() {
                -(-wu).exp_m1()
            } else {
                1.0
            }
        },
        &zolotarev_breaks(b, gamma_exp, ln_x),
        STABLE_TOL,
    )?;
    Ok(r.value)
}

/// Density of the inverse stable subordinator `E_t` at `x`:
/// `f_t(x) = t β^{-1} x^{-1-1/β} g_β(t x^{-1/β})`.
pub fn inverse_subordinator_density(beta: FracOrder, t: f64, x: f64) -> Result<f64> {
    check_positive("t", t)?;
    check_positive("x", x)?;
    let b = beta.get();
    let y = t * x.powf(-1.0 / b);
    if !y.is_finite() {
        // x below the representable range: the density tends to t^{-β}/Γ(1-β).
        return Ok(t.powf(-b) / gamma(1.0 - b));
    }
    // t x^{-1-1/β} = y / x
    Ok(y / (b * x) * stable_density(beta, y)?)
}

/// Density of `|Y_t|` for a Brownian motion with `Var Y_t = 2t`:
/// `p(t, l) = 2/√(4πt) · exp(-l²/(4t))`.
pub fn half_bm_density(t: f64, l: f64) -> Result<f64> {
    check_positive("t", t)?;
    if !l.is_finite() {
        return Err(Error::NonFinite("half_bm_density level"));
    }
    if l < 0.0 {
        return Err(Error::domain("l", l, "must be non-negative"));
    }
    Ok((-l * l / (4.0 * t)).exp() / (PI * t).sqrt())
}

/// Scaled complementary error function `e^{y²} erfc(y)` for `y >= 0`.
///
/// `E_{1/2}(-y) = erfcx(y)`.
pub fn erfcx(y: f64) -> f64 {
    if y < 2.0 {
        // e^{y²} with y² split exactly into hi + lo.
        let hi = y * y;
        let lo = y.mul_add(y, -hi);
        libm::exp(hi) * (1.0 + lo) * libm::erfc(y)
    } else {
        // Continued fraction e^{y²}erfc(y) = (1/√π) / (y + (1/2)/(y + 1/(y + (3/2)/(y + ...))))
        let mut frac = y;
        for n in (1..60).rev() {
            frac = y + 0.5 * n as f64 / frac;
        }
        1.0 / (PI.sqrt() * frac)
    }
}
