//! Dirichlet eigenpairs, eigenfunction transforms and series solutions on
//! intervals and rectangles.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::{self, Execution};
use crate::quad;
use crate::specfun::{self, FracOrder};

/// Default lower bound on the time argument of [`heat_kernel`].
pub const DEFAULT_T_FLOOR: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Point {
    One(f64),
    Two(f64, f64),
}

impl Point {
    pub fn dim(&self) -> usize {
        match self {
            Point::One(_) => 1,
            Point::Two(..) => 2,
        }
    }

    pub fn coords(&self) -> Vec<f64> {
        match *self {
            Point::One(x) => vec![x],
            Point::Two(x, y) => vec![x, y],
        }
    }

    pub fn x(&self) -> f64 {
        match *self {
            Point::One(x) | Point::Two(x, _) => x,
        }
    }
}

/// Diffusion coefficient a(x) of a one-dimensional divergence-form operator.
#[derive(Clone)]
pub enum Coefficient {
    Constant(f64),
    /// a(x) = a0 + a1 x
    Affine {
        a0: f64,
        a1: f64,
    },
    Custom(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl fmt::Debug for Coefficient {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Coefficient::Constant(c) => write!(f, "Constant({c})"),
            Coefficient::Affine { a0, a1 } => write!(f, "Affine {{ a0: {a0}, a1: {a1} }}"),
            Coefficient::Custom(_) => f.write_str("Custom(..)"),
        }
    }
}

impl Coefficient {
    pub fn value(&self, x: f64) -> f64 {
        match self {
            Coefficient::Constant(c) => *c,
            Coefficient::Affine { a0, a1 } => a0 + a1 * x,
            Coefficient::Custom(f) => f(x),
        }
    }

    /// a'(x); central differences for custom coefficients.
    pub fn derivative(&self, x: f64) -> f64 {
        match self {
            Coefficient::Constant(_) => 0.0,
            Coefficient::Affine { a1, .. } => *a1,
            Coefficient::Custom(f) => {
                let h = 1e-6 * (1.0 + x.abs());
                (f(x + h) - f(x - h)) / (2.0 * h)
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct DivergenceForm1D {
    pub length: f64,
    pub a: Coefficient,
    /// Ellipticity constant: lambda_ell <= a(x) <= 1/lambda_ell.
    pub lambda_ell: f64,
    /// Upper bound on |a(x)|.
    pub lambda_cap: f64,
    /// Number of grid intervals of the finite-difference discretization.
    pub grid_points: usize,
}

#[derive(Debug, Clone)]
pub enum OperatorSpec {
    IntervalLaplacian { length: f64 },
    RectangleLaplacian { lx: f64, ly: f64 },
    DivergenceForm1D(DivergenceForm1D),
}

fn check_length(name: &'static str, v: f64) -> Result<()> {
    if !v.is_finite() || v <= 0.0 {
        return Err(Error::domain(name, v, "must be a positive finite length"));
    }
    Ok(())
}

impl OperatorSpec {
    pub fn interval(length: f64) -> Result<Self> {
        check_length("length", length)?;
        Ok(OperatorSpec::IntervalLaplacian { length })
    }

    pub fn rectangle(lx: f64, ly: f64) -> Result<Self> {
        check_length("lx", lx)?;
        check_length("ly", ly)?;
        Ok(OperatorSpec::RectangleLaplacian { lx, ly })
    }

    pub fn divergence_form(
        length: f64,
        a: Coefficient,
        lambda_ell: f64,
        lambda_cap: f64,
        grid_points: usize,
    ) -> Result<Self> {
        let op = OperatorSpec::DivergenceForm1D(DivergenceForm1D {
            length,
            a,
            lambda_ell,
            lambda_cap,
            grid_points,
        });
        op.validate()?;
        Ok(op)
    }

    /// Re-check the invariants of a spec built by hand.
    pub fn validate(&self) -> Result<()> {
        match self {
            OperatorSpec::IntervalLaplacian { length } => check_length("length", *length),
            OperatorSpec::RectangleLaplacian { lx, ly } => {
                check_length("lx", *lx)?;
                check_length("ly", *ly)
            }
            OperatorSpec::DivergenceForm1D(d) => {
                check_length("length", d.length)?;
                if d.grid_points < 16 {
                    return Err(Error::Operator(format!(
                        "grid_points must be at least 16, got {}",
                        d.grid_points
                    )));
                }
                if !(d.lambda_ell > 0.0 && d.lambda_ell <= 1.0) {
                    return Err(Error::domain("lambda_ell", d.lambda_ell, "must lie in (0, 1]"));
                }
                if !(d.lambda_cap > 0.0) {
                    return Err(Error::domain("lambda_cap", d.lambda_cap, "must be positive"));
                }
                let h = d.length / d.grid_points as f64;
                for i in 0..=2 * d.grid_points {
                    let x = 0.5 * h * i as f64;
                    let a = d.a.value(x);
                    if !a.is_finite() || a < d.lambda_ell || a > 1.0 / d.lambda_ell {
                        return Err(Error::Operator(format!(
                            "coefficient a({x}) = {a} violates ellipticity bounds [{}, {}]",
                            d.lambda_ell,
                            1.0 / d.lambda_ell
                        )));
                    }
                    if a.abs() > d.lambda_cap {
                        return Err(Error::Operator(format!(
                            "coefficient a({x}) = {a} exceeds the bound {}",
                            d.lambda_cap
                        )));
                    }
                }
                Ok(())
            }
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            OperatorSpec::RectangleLaplacian { .. } => 2,
            _ => 1,
        }
    }

    /// Side lengths of the domain.
    pub fn extent(&self) -> (f64, Option<f64>) {
        match self {
            OperatorSpec::IntervalLaplacian { length } => (*length, None),
            OperatorSpec::RectangleLaplacian { lx, ly } => (*lx, Some(*ly)),
            OperatorSpec::DivergenceForm1D(d) => (d.length, None),
        }
    }

    pub fn is_laplacian(&self) -> bool {
        !matches!(self, OperatorSpec::DivergenceForm1D(_))
    }

    pub fn check_point(&self, p: Point) -> Result<()> {
        if p.dim() != self.dim() {
            return Err(Error::Dimension {
                expected: self.dim(),
                got: p.dim(),
            });
        }
        if !self.contains(p) {
            return Err(Error::OutsideDomain(p.coords()));
        }
        Ok(())
    }

    /// True when `p` lies strictly inside the domain.
    pub fn contains(&self, p: Point) -> bool {
        match (self.extent(), p) {
            ((m, None), Point::One(x)) => x > 0.0 && x < m,
            ((lx, Some(ly)), Point::Two(x, y)) => x > 0.0 && x < lx && y > 0.0 && y < ly,
            _ => false,
        }
    }

    /// A sample of points on the boundary.
    pub fn boundary_samples(&self) -> Vec<Point> {
        match self.extent() {
            (m, None) => vec![Point::One(0.0), Point::One(m)],
            (lx, Some(ly)) => {
                let k = 9;
                let mut out = Vec::with_capacity(4 * (k + 1));
                for i in 0..=k {
                    let s = i as f64 / k as f64;
                    out.push(Point::Two(s * lx, 0.0));
                    out.push(Point::Two(s * lx, ly));
                    out.push(Point::Two(0.0, s * ly));
                    out.push(Point::Two(lx, s * ly));
                }
                out
            }
        }
    }
}

#[derive(Debug, Clone)]
pub enum Eigenfunction {
    /// sqrt(2/M) sin(n pi x / M)
    Sine { n: usize, length: f64 },
    /// Product of two sine modes on a rectangle.
    Product { m: usize, n: usize, lx: f64, ly: f64 },
    /// Grid vector on nodes `0..=J` (boundary zeros included), linearly
    /// interpolated between nodes.
    Grid { h: f64, values: Arc<Vec<f64>> },
}

fn sine(n: usize, length: f64, x: f64) -> f64 {
    (2.0 / length).sqrt() * (n as f64 * PI * x / length).sin()
}

impl Eigenfunction {
    pub fn eval(&self, p: Point) -> f64 {
        match *self {
            Eigenfunction::Sine { n, length } => sine(n, length, p.x()),
            Eigenfunction::Product { m, n, lx, ly } => match p {
                Point::Two(x, y) => sine(m, lx, x) * sine(n, ly, y),
                Point::One(_) => f64::NAN,
            },
            Eigenfunction::Grid { h, ref values } => {
                let x = p.x();
                let last = values.len() - 1;
                let s = x / h;
                if !(s > 0.0) {
                    return 0.0;
                }
                if s >= last as f64 {
                    return 0.0;
                }
                let i = (s.floor() as usize).min(last - 1);
                let w = s - i as f64;
                (1.0 - w) * values[i] + w * values[i + 1]
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct Eigenmode {
    /// 1-based position in the eigenvalue ordering.
    pub index: usize,
    /// Tensor index for rectangle modes.
    pub pair: Option<(usize, usize)>,
    pub eigenvalue: f64,
    pub eigenfunction: Eigenfunction,
    /// L2 norm of the eigenfunction under the module quadrature.
    pub norm_check: f64,
}

#[derive(Debug, Clone)]
pub struct SpectralModel {
    pub op: OperatorSpec,
    pub modes: Vec<Eigenmode>,
    pub t_floor: f64,
}

impl SpectralModel {
    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.op.dim()
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        self.modes.iter().map(|m| m.eigenvalue).collect()
    }

    /// Restrict to the first `n` modes.
    pub fn truncated(&self, n: usize) -> SpectralModel {
        SpectralModel {
            op: self.op.clone(),
            modes: self.modes[..n.min(self.modes.len())].to_vec(),
            t_floor: self.t_floor,
        }
    }

    /// Matrix `phi[j][n]` of eigenfunction values at `points`.
    pub fn eval_matrix(&self, points: &[Point]) -> Vec<Vec<f64>> {
        points
            .iter()
            .map(|&p| self.modes.iter().map(|m| m.eigenfunction.eval(p)).collect())
            .collect()
    }

    /// Gram matrix of the eigenfunctions under the quadrature of [`transform`].
    pub fn gram(&self) -> Vec<Vec<f64>> {
        let (nodes, weights) = quadrature_nodes(self);
        let vals: Vec<Vec<f64>> = self
            .modes
            .iter()
            .map(|m| nodes.iter().map(|&p| m.eigenfunction.eval(p)).collect())
            .collect();
        vals.iter()
            .map(|a| {
                vals.iter()
                    .map(|b| a.iter().zip(b).zip(&weights).map(|((x, y), w)| x * y * w).sum())
                    .collect()
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralCoefficients {
    pub values: Vec<f64>,
    pub l2_norm_sq: f64,
    /// Squared L2 norm of the datum under the same quadrature.
    pub datum_norm_sq: f64,
}

impl SpectralCoefficients {
    pub fn from_values(values: Vec<f64>, datum_norm_sq: f64) -> Self {
        let l2_norm_sq = values.iter().map(|v| v * v).sum();
        SpectralCoefficients {
            values,
            l2_norm_sq,
            datum_norm_sq,
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn truncated(&self, n: usize) -> SpectralCoefficients {
        SpectralCoefficients::from_values(self.values[..n.min(self.values.len())].to_vec(), self.datum_norm_sq)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolutionGrid {
    pub times: Vec<f64>,
    pub points: Vec<Point>,
    /// `values[i][j]` = u(times[i], points[j]).
    pub values: Vec<Vec<f64>>,
}

impl SolutionGrid {
    /// Discrete L2 norm of the row at time index `i`, using trapezoid weights
    /// over the (sorted, one-dimensional) points.
    pub fn l2_norm_at(&self, i: usize) -> f64 {
        let xs: Vec<f64> = self.points.iter().map(|p| p.x()).collect();
        let row = &self.values[i];
        let mut s = 0.0;
        for k in 1..xs.len() {
            s += 0.5 * (xs[k] - xs[k - 1]) * (row[k] * row[k] + row[k - 1] * row[k - 1]);
        }
        s.sqrt()
    }
}

/// Named initial data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitialDatum {
    /// The n-th eigenfunction of the model (1-based).
    Mode {
        n: usize,
    },
    /// x(M - x) on intervals, x(Lx - x) y(Ly - y) on rectangles.
    Parabola,
    /// exp(1 - 1/(1 - r^2)) on the disc of radius `width` around `center`.
    Bump {
        center: Vec<f64>,
        width: f64,
    },
    /// Linearly interpolated samples (x, f) on an interval.
    Sampled {
        x: Vec<f64>,
        f: Vec<f64>,
    },
    Zero,
}

pub type Evaluator = Box<dyn Fn(Point) -> f64 + Send + Sync>;

impl InitialDatum {
    pub fn evaluator(&self, model: &SpectralModel) -> Result<Evaluator> {
        let (lx, ly) = model.op.extent();
        match self {
            InitialDatum::Mode { n } => {
                if *n == 0 || *n > model.len() {
                    return Err(Error::Invalid(format!("mode index {n} outside 1..={}", model.len())));
                }
                let ef = model.modes[n - 1].eigenfunction.clone();
                Ok(Box::new(move |p| ef.eval(p)))
            }
            InitialDatum::Parabola => Ok(match ly {
                None => Box::new(move |p| {
                    let x = p.x();
                    x * (lx - x)
                }),
                Some(ly) => Box::new(move |p| match p {
                    Point::Two(x, y) => x * (lx - x) * y * (ly - y),
                    Point::One(_) => f64::NAN,
                }),
            }),
            InitialDatum::Bump { center, width } => {
                if center.len() != model.dim() {
                    return Err(Error::Dimension {
                        expected: model.dim(),
                        got: center.len(),
                    });
                }
                if !(*width > 0.0) {
                    return Err(Error::domain("width", *width, "must be positive"));
                }
                let c = center.clone();
                let w = *width;
                Ok(Box::new(move |p| {
                    let r2: f64 = p.coords().iter().zip(&c).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / (w * w);
                    if r2 < 1.0 {
                        (1.0 - 1.0 / (1.0 - r2)).exp()
                    } else {
                        0.0
                    }
                }))
            }
            InitialDatum::Sampled { x, f } => {
                if model.dim() != 1 {
                    return Err(Error::Dimension {
                        expected: 1,
                        got: model.dim(),
                    });
                }
                if x.len() != f.len() {
                    return Err(Error::Misaligned {
                        what: "sampled datum",
                        left: x.len(),
                        right: f.len(),
                    });
                }
                if x.len() < 2 || x.windows(2).any(|w| !(w[1] > w[0])) {
                    return Err(Error::Invalid(
                        "sampled datum needs at least two strictly increasing x values".into(),
                    ));
                }
                let (xs, fs) = (x.clone(), f.clone());
                Ok(Box::new(move |p| interpolate(&xs, &fs, p.x())))
            }
            InitialDatum::Zero => Ok(Box::new(|_| 0.0)),
        }
    }
}

/// Piecewise-linear interpolation, zero outside the sampled range.
pub fn interpolate(xs: &[f64], fs: &[f64], x: f64) -> f64 {
    if x < xs[0] || x > xs[xs.len() - 1] {
        return 0.0;
    }
    let k = xs.partition_point(|&v| v <= x);
    if k == 0 {
        return fs[0];
    }
    if k >= xs.len() {
        return fs[xs.len() - 1];
    }
    let w = (x - xs[k - 1]) / (xs[k] - xs[k - 1]);
    (1.0 - w) * fs[k - 1] + w * fs[k]
}

// ---------------------------------------------------------------------------
// Eigenpairs

#[derive(PartialEq)]
struct Candidate {
    lambda: f64,
    m: usize,
    n: usize,
}

impl Eq for Candidate {}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        // Reversed for a min-heap; ties broken by (m, n).
        other
            .lambda
            .total_cmp(&self.lambda)
            .then_with(|| (other.m, other.n).cmp(&(self.m, self.n)))
    }
}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

fn rectangle_lambda(m: usize, n: usize, lx: f64, ly: f64) -> f64 {
    let a = m as f64 * PI / lx;
    let b = n as f64 * PI / ly;
    a * a + b * b
}

pub fn eigenpairs(op: &OperatorSpec, n: usize) -> Result<SpectralModel> {
    op.validate()?;
    if n == 0 {
        return Err(Error::Invalid("at least one mode is required".into()));
    }
    let modes = match op {
        OperatorSpec::IntervalLaplacian { length } => (1..=n)
            .map(|k| {
                let w = k as f64 * PI / length;
                Eigenmode {
                    index: k,
                    pair: None,
                    eigenvalue: w * w,
                    eigenfunction: Eigenfunction::Sine { n: k, length: *length },
                    norm_check: 1.0,
                }
            })
            .collect(),
        OperatorSpec::RectangleLaplacian { lx, ly } => {
            let mut heap = BinaryHeap::new();
            heap.push(Candidate {
                lambda: rectangle_lambda(1, 1, *lx, *ly),
                m: 1,
                n: 1,
            });
            let mut modes = Vec::with_capacity(n);
            while modes.len() < n {
                let c = heap.pop().expect("candidate heap never empties");
                heap.push(Candidate {
                    lambda: rectangle_lambda(c.m, c.n + 1, *lx, *ly),
                    m: c.m,
                    n: c.n + 1,
                });
                if c.n == 1 {
                    heap.push(Candidate {
                        lambda: rectangle_lambda(c.m + 1, 1, *lx, *ly),
                        m: c.m + 1,
                        n: 1,
                    });
                }
                modes.push(Eigenmode {
                    index: modes.len() + 1,
                    pair: Some((c.m, c.n)),
                    eigenvalue: c.lambda,
                    eigenfunction: Eigenfunction::Product {
                        m: c.m,
                        n: c.n,
                        lx: *lx,
                        ly: *ly,
                    },
                    norm_check: 1.0,
                });
            }
            modes
        }
        OperatorSpec::DivergenceForm1D(d) => fd_modes(d, n)?,
    };
    let mut model = SpectralModel {
        op: op.clone(),
        modes,
        t_floor: DEFAULT_T_FLOOR,
    };
    let gram = model.gram();
    for (i, m) in model.modes.iter_mut().enumerate() {
        m.norm_check = gram[i][i].sqrt();
    }
    Ok(model)
}

/// Symmetric tridiagonal matrix of the conservative scheme on interior nodes.
fn fd_matrix(d: &DivergenceForm1D) -> (Vec<f64>, Vec<f64>) {
    let j = d.grid_points;
    let h = d.length / j as f64;
    let h2 = h * h;
    let a_half: Vec<f64> = (0..j).map(|i| d.a.value((i as f64 + 0.5) * h)).collect();
    let diag = (1..j).map(|i| (a_half[i - 1] + a_half[i]) / h2).collect();
    let off = (1..j - 1).map(|i| -a_half[i] / h2).collect();
    (diag, off)
}

fn fd_modes(d: &DivergenceForm1D, n: usize) -> Result<Vec<Eigenmode>> {
    let j = d.grid_points;
    if n >= j {
        return Err(Error::Invalid(format!(
            "{n} modes requested but the grid resolves at most {}",
            j - 1
        )));
    }
    let h = d.length / j as f64;
    let (diag, off) = fd_matrix(d);
    let mut modes = Vec::with_capacity(n);
    for k in 1..=n {
        let lambda = tridiag_eigenvalue(&diag, &off, k);
        let v = inverse_iteration(&diag, &off, lambda);
        let mut values = Vec::with_capacity(j + 1);
        values.push(0.0);
        let norm = (h * v.iter().map(|x| x * x).sum::<f64>()).sqrt();
        let sign = if v[0] < 0.0 { -1.0 } else { 1.0 };
        values.extend(v.iter().map(|x| sign * x / norm));
        values.push(0.0);
        modes.push(Eigenmode {
            index: k,
            pair: None,
            eigenvalue: lambda,
            eigenfunction: Eigenfunction::Grid {
                h,
                values: Arc::new(values),
            },
            norm_check: 1.0,
        });
    }
    Ok(modes)
}

/// Number of eigenvalues strictly below `x` (Sturm sequence count).
fn sturm_count(diag: &[f64], off: &[f64], x: f64) -> usize {
    let mut count = 0;
    let mut q = 1.0;
    for i in 0..diag.len() {
        let e2 = if i == 0 { 0.0 } else { off[i - 1] * off[i - 1] };
        q = diag[i] - x - if i == 0 { 0.0 } else { e2 / q };
        if q == 0.0 {
            q = -f64::EPSILON * (diag[i].abs() + x.abs()).max(f64::MIN_POSITIVE);
        }
        if q < 0.0 {
            count += 1;
        }
    }
    count
}

/// k-th smallest eigenvalue (1-based) by bisection.
fn tridiag_eigenvalue(diag: &[f64], off: &[f64], k: usize) -> f64 {
    // Gershgorin interval
    let n = diag.len();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..n {
        let r = if i > 0 { off[i - 1].abs() } else { 0.0 } + if i + 1 < n { off[i].abs() } else { 0.0 };
        lo = lo.min(diag[i] - r);
        hi = hi.max(diag[i] + r);
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if sturm_count(diag, off, mid) >= k {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Eigenvector for eigenvalue `lambda` by shifted inverse iteration.
fn inverse_iteration(diag: &[f64], off: &[f64], lambda: f64) -> Vec<f64> {
    let n = diag.len();
    let scale = diag.iter().fold(0.0f64, |m, d| m.max(d.abs()));
    let shift = lambda + 4.0 * f64::EPSILON * scale;
    let mut v: Vec<f64> = (0..n).map(|i| 1.0 + 0.1 * ((i * 7919) % 13) as f64 / 13.0).collect();
    for _ in 0..3 {
        v = tridiag_solve_pivoting(diag, off, shift, &v);
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        v.iter_mut().for_each(|x| *x /= norm);
    }
    v
}

/// Solve (T - shift I) x = b with partial pivoting.
fn tridiag_solve_pivoting(diag: &[f64], off: &[f64], shift: f64, b: &[f64]) -> Vec<f64> {
    let n = diag.len();
    // Rows hold (a: diag, c: first super, e: second super) after elimination.
    let mut d: Vec<f64> = diag.iter().map(|x| x - shift).collect();
    let mut sup: Vec<f64> = (0..n).map(|i| if i + 1 < n { off[i] } else { 0.0 }).collect();
    let mut sup2 = vec![0.0; n];
    let mut sub: Vec<f64> = (0..n).map(|i| if i + 1 < n { off[i] } else { 0.0 }).collect();
    let mut rhs = b.to_vec();
    let tiny = f64::EPSILON * diag.iter().fold(0.0f64, |m, x| m.max(x.abs())).max(1.0);
    for i in 0..n.saturating_sub(1) {
        // Candidates: row i (d[i], sup[i], sup2[i]) and row i+1 (sub[i], d[i+1], sup[i+1]).
        if sub[i].abs() > d[i].abs() {
            let (r0, r1, r2, rb) = (sub[i], d[i + 1], sup[i + 1], rhs[i + 1]);
            let (o0, o1, o2, ob) = (d[i], sup[i], sup2[i], rhs[i]);
            d[i] = r0;
            sup[i] = r1;
            sup2[i] = r2;
            rhs[i] = rb;
            let m = o0 / r0;
            d[i + 1] = o1 - m * r1;
            sup[i + 1] = o2 - m * r2;
            rhs[i + 1] = ob - m * rb;
        } else {
            let p = if d[i] == 0.0 { tiny } else { d[i] };
            d[i] = p;
            let m = sub[i] / p;
            d[i + 1] -= m * sup[i];
            sup[i + 1] -= m * sup2[i];
            rhs[i + 1] -= m * rhs[i];
        }
        sub[i] = 0.0;
    }
    if d[n - 1] == 0.0 {
        d[n - 1] = tiny;
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let mut s = rhs[i];
        if i + 1 < n {
            s -= sup[i] * x[i + 1];
        }
        if i + 2 < n {
            s -= sup2[i] * x[i + 2];
        }
        x[i] = s / d[i];
    }
    x
}

// ---------------------------------------------------------------------------
// Transform

/// Quadrature nodes and weights used for transforms and Gram matrices.
fn quadrature_nodes(model: &SpectralModel) -> (Vec<Point>, Vec<f64>) {
    let max_pair = model
        .modes
        .iter()
        .map(|m| m.pair.map_or(m.index, |(a, b)| a.max(b)))
        .max()
        .unwrap_or(1);
    match &model.op {
        OperatorSpec::IntervalLaplacian { length } => {
            let (x, w) = quad::composite_gauss_legendre(0.0, *length, 64.max(4 * model.len()), 8);
            (x.into_iter().map(Point::One).collect(), w)
        }
        OperatorSpec::RectangleLaplacian { lx, ly } => {
            let panels = 32.max(4 * max_pair);
            let (xs, wx) = quad::composite_gauss_legendre(0.0, *lx, panels, 8);
            let (ys, wy) = quad::composite_gauss_legendre(0.0, *ly, panels, 8);
            let mut nodes = Vec::with_capacity(xs.len() * ys.len());
            let mut weights = Vec::with_capacity(xs.len() * ys.len());
            for (x, a) in xs.iter().zip(&wx) {
                for (y, b) in ys.iter().zip(&wy) {
                    nodes.push(Point::Two(*x, *y));
                    weights.push(a * b);
                }
            }
            (nodes, weights)
        }
        OperatorSpec::DivergenceForm1D(d) => {
            let h = d.length / d.grid_points as f64;
            let nodes = (1..d.grid_points).map(|i| Point::One(i as f64 * h)).collect();
            (nodes, vec![h; d.grid_points - 1])
        }
    }
}

/// Coefficients f(n) = <f, eigenfunction_n> under composite quadrature.
pub fn transform<F>(model: &SpectralModel, f: F) -> Result<SpectralCoefficients>
where
    F: Fn(Point) -> f64 + Sync,
{
    for p in model.op.boundary_samples() {
        let v = f(p);
        if v.abs() > 1e-8 {
            log::warn!("initial datum is {v} at boundary point {:?}", p.coords());
        }
    }
    let (nodes, weights) = quadrature_nodes(model);
    let fw: Vec<f64> = nodes.iter().zip(&weights).map(|(&p, w)| f(p) * w).collect();
    if fw.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("initial datum"));
    }
    let datum_norm_sq = nodes.iter().zip(&fw).map(|(&p, fw)| fw * f(p)).sum::<f64>();
    let values = exec::map_vec(&model.modes, Execution::Parallel, |m| -> Result<f64> {
        Ok(nodes.iter().zip(&fw).map(|(&p, fw)| fw * m.eigenfunction.eval(p)).sum())
    })?;
    Ok(SpectralCoefficients::from_values(values, datum_norm_sq))
}

// ---------------------------------------------------------------------------
// Series solutions

fn check_aligned(model: &SpectralModel, coeffs: &SpectralCoefficients) -> Result<()> {
    if model.len() != coeffs.len() {
        return Err(Error::Misaligned {
            what: "modes vs coefficients",
            left: model.len(),
            right: coeffs.len(),
        });
    }
    Ok(())
}

fn check_times(times: &[f64]) -> Result<()> {
    for &t in times {
        if !t.is_finite() || t < 0.0 {
            return Err(Error::domain("t", t, "times must be finite and non-negative"));
        }
    }
    Ok(())
}

fn check_points(model: &SpectralModel, points: &[Point]) -> Result<()> {
    for p in points {
        if p.dim() != model.dim() {
            return Err(Error::Dimension {
                expected: model.dim(),
                got: p.dim(),
            });
        }
    }
    Ok(())
}

/// Evaluate sum_n c_n(t) f(n) phi_n(x) over a grid, with `factor(lambda, t)`
/// supplying the time dependence.
fn series_grid<G>(
    model: &SpectralModel,
    coeffs: &SpectralCoefficients,
    times: &[f64],
    points: &[Point],
    factor: G,
) -> Result<SolutionGrid>
where
    G: Fn(f64, f64) -> Result<f64> + Sync,
{
    check_aligned(model, coeffs)?;
    check_times(times)?;
    check_points(model, points)?;
    let phi = model.eval_matrix(points);
    let values = exec::map_vec(times, Execution::Parallel, |&t| -> Result<Vec<f64>> {
        let weights = model
            .modes
            .iter()
            .zip(&coeffs.values)
            .map(|(m, c)| Ok(c * factor(m.eigenvalue, t)?))
            .collect::<Result<Vec<f64>>>()?;
        Ok(phi
            .iter()
            .map(|row| row.iter().zip(&weights).map(|(p, w)| p * w).sum())
            .collect())
    })?;
    Ok(SolutionGrid {
        times: times.to_vec(),
        points: points.to_vec(),
        values,
    })
}

/// u(t, x) = sum_n f(n) phi_n(x) E_beta(-lambda_n t^beta).
pub fn solve_fractional(
    model: &SpectralModel,
    coeffs: &SpectralCoefficients,
    beta: FracOrder,
    times: &[f64],
    points: &[Point],
) -> Result<SolutionGrid> {
    let b = beta.get();
    series_grid(model, coeffs, times, points, |lambda, t| {
        if t == 0.0 {
            return Ok(1.0);
        }
        Ok(specfun::mittag_leffler(b, -lambda * t.powf(b))?.value)
    })
}

/// Classical heat-equation series, sum_n f(n) phi_n(x) exp(-lambda_n t).
pub fn solve_heat(
    model: &SpectralModel,
    coeffs: &SpectralCoefficients,
    times: &[f64],
    points: &[Point],
) -> Result<SolutionGrid> {
    series_grid(model, coeffs, times, points, |lambda, t| Ok((-lambda * t).exp()))
}

/// Solution of the fourth-order problem u_t = L f / sqrt(pi t) + L^2 u with
/// u(0) = f. Each mode solves c' = -lambda/sqrt(pi t) + lambda^2 c, c(0) = 1,
/// whose bounded solution is erfcx(lambda sqrt(t)).
pub fn solve_fourth_order(
    model: &SpectralModel,
    coeffs: &SpectralCoefficients,
    times: &[f64],
    points: &[Point],
) -> Result<SolutionGrid> {
    check_aligned(model, coeffs)?;
    check_times(times)?;
    check_points(model, points)?;
    let mut values = Vec::with_capacity(times.len());
    for &t in times {
        let rt = t.sqrt();
        let mut row = vec![0.0; points.len()];
        for (m, c) in model.modes.iter().zip(&coeffs.values) {
            let w = c * specfun::erfcx(m.eigenvalue * rt);
            for (u, &p) in row.iter_mut().zip(points) {
                *u += w * m.eigenfunction.eval(p);
            }
        }
        values.push(row);
    }
    Ok(SolutionGrid {
        times: times.to_vec(),
        points: points.to_vec(),
        values,
    })
}

/// Truncated killed heat kernel sum_n exp(-lambda_n t) phi_n(x) phi_n(y).
pub fn heat_kernel(model: &SpectralModel, t: f64, x: Point, y: Point) -> Result<f64> {
    if !(t >= model.t_floor) || !t.is_finite() {
        return Err(Error::Domain {
            name: "t",
            value: t,
            reason: "heat kernel requires t at or above the model's time floor",
        });
    }
    check_points(model, &[x, y])?;
    Ok(model
        .modes
        .iter()
        .map(|m| (-m.eigenvalue * t).exp() * (m.eigenfunction.eval(x) * m.eigenfunction.eval(y)))
        .sum())
}

/// Upper bound on the modes omitted from [`heat_kernel`] at time `t`.
pub fn heat_kernel_tail_bound(model: &SpectralModel, t: f64) -> f64 {
    let last = model.modes.last().map_or(0.0, |m| m.eigenvalue);
    match &model.op {
        OperatorSpec::IntervalLaplacian { length } => {
            // Modes beyond N: sum_{n>N} exp(-lambda_n t) (2/M), geometric in the gaps.
            let n = model.len() as f64;
            let c = (PI / length).powi(2);
            let first = (-c * (n + 1.0) * (n + 1.0) * t).exp();
            let q = (-c * (2.0 * n + 3.0) * t).exp();
            2.0 / length * first / (1.0 - q)
        }
        OperatorSpec::RectangleLaplacian { lx, ly } => {
            // exp(-lambda t) <= exp(-Lambda t/2) exp(-lambda t/2) for lambda >= Lambda
            let s = |l: f64| {
                let c = (PI / l).powi(2) * 0.5 * t;
                let mut acc = 0.0;
                for m in 1..100_000 {
                    let term = (-c * (m * m) as f64).exp();
                    acc += term;
                    if term < 1e-18 * acc {
                        break;
                    }
                }
                acc
            };
            4.0 / (lx * ly) * (-0.5 * last * t).exp() * s(*lx) * s(*ly)
        }
        OperatorSpec::DivergenceForm1D(d) => {
            let h = d.length / d.grid_points as f64;
            let remaining = (d.grid_points - 1).saturating_sub(model.len()) as f64;
            let sup = model
                .modes
                .iter()
                .filter_map(|m| match &m.eigenfunction {
                    Eigenfunction::Grid { values, .. } => Some(values.iter().fold(0.0f64, |a, v| a.max(v.abs()))),
                    _ => None,
                })
                .fold(0.0f64, f64::max)
                .max(1.0 / h.sqrt());
            remaining * sup * sup * (-last * t).exp()
        }
    }
}

/// Transform of T(l) f: coefficient-wise multiplication by exp(-lambda_n l).
pub fn semigroup_apply(model: &SpectralModel, coeffs: &SpectralCoefficients, l: f64) -> Result<SpectralCoefficients> {
    check_aligned(model, coeffs)?;
    if !l.is_finite() || l < 0.0 {
        return Err(Error::domain("l", l, "must be finite and non-negative"));
    }
    let values = model
        .modes
        .iter()
        .zip(&coeffs.values)
        .map(|(m, c)| c * (-m.eigenvalue * l).exp())
        .collect();
    Ok(SpectralCoefficients::from_values(values, coeffs.datum_norm_sq))
}

/// Squared tails: `tails[k] = sum_{n > k} f(n)^2` for k = 0..=len.
pub fn tail_sums(coeffs: &SpectralCoefficients) -> Vec<f64> {
    let n = coeffs.len();
    let mut tails = vec![0.0; n + 1];
    for k in (0..n).rev() {
        tails[k] = tails[k + 1] + coeffs.values[k] * coeffs.values[k];
    }
    tails
}

/// Smallest N >= 1 whose squared coefficient tail is below eps^2.
///
/// The list must extend at least a third beyond N so the remaining
/// coefficients give evidence of the tail size.
pub fn truncation_select(coeffs: &SpectralCoefficients, eps: f64) -> Result<usize> {
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(Error::domain("eps", eps, "must be positive"));
    }
    if coeffs.is_empty() {
        return Err(Error::Uncertified("empty coefficient list".into()));
    }
    let tails = tail_sums(coeffs);
    let eps2 = eps * eps;
    let n = (1..=coeffs.len()).find(|&k| tails[k] < eps2).unwrap_or(coeffs.len());
    if tails[n] >= eps2 || 4 * n > 3 * coeffs.len() && tails[n] > 0.0 {
        return Err(Error::Uncertified(format!(
            "truncation at {n} of {} coefficients leaves too few modes to certify a tail below {eps:e}",
            coeffs.len()
        )));
    }
    Ok(n)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SmoothnessReport {
    /// Fitted decay exponent k in |f(n)| ~ lambda_n^{-k}; `None` for a finite
    /// expansion.
    pub decay_exponent: Option<f64>,
    pub nonzero: usize,
    /// 1 + 3d/4
    pub threshold: f64,
    pub above_threshold: bool,
}

pub fn smoothness_diagnostic(coeffs: &SpectralCoefficients, model: &SpectralModel) -> Result<SmoothnessReport> {
    check_aligned(model, coeffs)?;
    let max = coeffs.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if max == 0.0 {
        return Err(Error::Invalid("all coefficients are zero".into()));
    }
    let threshold = 1.0 + 0.75 * model.dim() as f64;
    let pts: Vec<(f64, f64)> = model
        .modes
        .iter()
        .zip(&coeffs.values)
        .filter(|(_, c)| c.abs() > 1e-12 * max)
        .map(|(m, c)| (m.eigenvalue.ln(), c.abs().ln()))
        .collect();
    if pts.len() < 8 {
        return Ok(SmoothnessReport {
            decay_exponent: None,
            nonzero: pts.len(),
            threshold,
            above_threshold: true,
        });
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let k = -sxy / sxx;
    Ok(SmoothnessReport {
        decay_exponent: Some(k),
        nonzero: pts.len(),
        threshold,
        above_threshold: k > threshold,
    })
}
