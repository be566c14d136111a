use std::f64::consts::PI;

use fracdiff::specfun::{mittag_leffler, FracOrder};
use fracdiff::spectral::{
    self, heat_kernel, semigroup_apply, smoothness_diagnostic, solve_fourth_order, solve_fractional, transform,
    truncation_select, Coefficient, InitialDatum, SpectralModel,
};
use fracdiff::{OperatorSpec, Point};
use proptest::prelude::*;

fn interval(n: usize) -> SpectralModel {
    spectral::eigenpairs(&OperatorSpec::interval(PI).unwrap(), n).unwrap()
}

fn fd_unit(grid: usize, n: usize) -> SpectralModel {
    let op = OperatorSpec::divergence_form(PI, Coefficient::Constant(1.0), 0.5, 2.0, grid).unwrap();
    spectral::eigenpairs(&op, n).unwrap()
}

fn parabola(p: Point) -> f64 {
    p.x() * (PI - p.x())
}

fn max_identity_gap(g: &[Vec<f64>]) -> f64 {
    let mut m = 0.0f64;
    for (i, row) in g.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            let target = if i == j { 1.0 } else { 0.0 };
            m = m.max((v - target).abs());
        }
    }
    m
}

#[test]
fn interval_and_rectangle_eigenvalues() {
    assert_eq!(interval(3).eigenvalues(), vec![1.0, 4.0, 9.0]);
    let rect = spectral::eigenpairs(&OperatorSpec::rectangle(PI, PI).unwrap(), 1).unwrap();
    assert!((rect.modes[0].eigenvalue - 2.0).abs() < 1e-14);
}

#[test]
fn unit_fd_eigenvalues_within_second_order_error() {
    let m = fd_unit(2048, 5);
    let h = PI / 2048.0;
    for (k, l) in m.eigenvalues().iter().enumerate() {
        let n = (k + 1) as f64;
        let bound = 1.1 * n.powi(4) * h * h / 12.0;
        assert!((l - n * n).abs() <= bound, "n={n}: {l}");
    }
}

#[test]
fn gram_matrices_are_identity() {
    assert!(max_identity_gap(&interval(40).gram()) <= 1e-8);
    let rect = spectral::eigenpairs(&OperatorSpec::rectangle(PI, 2.0).unwrap(), 15).unwrap();
    assert!(max_identity_gap(&rect.gram()) <= 1e-8);
    assert!(max_identity_gap(&fd_unit(512, 20).gram()) <= 1e-6);
}

#[test]
fn eigenvalue_growth() {
    let m = interval(100);
    for (k, l) in m.eigenvalues().iter().enumerate() {
        let n = (k + 1) as f64;
        assert!((l / (n * n) - 1.0).abs() < 1e-14);
    }
    let fd = fd_unit(1024, 128);
    for (k, l) in fd.eigenvalues().iter().take(16).enumerate() {
        let n = (k + 1) as f64;
        assert!((l / (n * n) - 1.0).abs() < 0.02, "n={n}: {l}");
    }
}

#[test]
fn transform_of_eigenfunctions_is_a_unit_vector() {
    let m = interval(30);
    let phi1 = InitialDatum::Mode { n: 1 }.evaluator(&m).unwrap();
    let c = transform(&m, &phi1).unwrap();
    assert!((c.values[0] - 1.0).abs() < 1e-10);
    assert!(c.values[1..].iter().all(|v| v.abs() < 1e-10));

    let rect = spectral::eigenpairs(&OperatorSpec::rectangle(PI, PI).unwrap(), 10).unwrap();
    let first = InitialDatum::Mode { n: 1 }.evaluator(&rect).unwrap();
    let c = transform(&rect, &first).unwrap();
    assert!((c.values[0] - 1.0).abs() < 1e-10);
    assert!(c.values[1..].iter().all(|v| v.abs() < 1e-10));
}

#[test]
fn parabola_coefficients_match_closed_form() {
    let m = interval(60);
    let c = transform(&m, parabola).unwrap();
    for (k, v) in c.values.iter().enumerate() {
        let n = (k + 1) as f64;
        let exact = (2.0 / PI).sqrt() * 2.0 * (1.0 - (-1f64).powi(k as i32 + 1)) / n.powi(3);
        assert!((v - exact).abs() < 1e-12, "n={n}: {v} vs {exact}");
    }
    assert!(c.l2_norm_sq <= c.datum_norm_sq + 1e-12);
}

#[test]
fn single_mode_and_parabola_golden_values() {
    let m = interval(200);
    let beta = FracOrder::HALF;
    let x = [Point::One(PI / 2.0)];
    let phi1 = InitialDatum::Mode { n: 1 }.evaluator(&m).unwrap();
    let c1 = transform(&m, &phi1).unwrap();
    let u = solve_fractional(&m, &c1, beta, &[1.0], &x).unwrap();
    assert!((u.values[0][0] - 0.341_162_333_867_594_6).abs() < 1e-10);

    let cp = transform(&m, parabola).unwrap();
    let u = solve_fractional(&m, &cp, beta, &[1.0], &x).unwrap();
    assert!(
        (u.values[0][0] - 1.083_348_088_204_670_4).abs() < 1e-10,
        "{}",
        u.values[0][0]
    );
    let v = solve_fourth_order(&m, &cp, &[1.0], &x).unwrap();
    assert!((u.values[0][0] - v.values[0][0]).abs() < 1e-12);
}

#[test]
fn fourth_order_initial_row_is_the_datum() {
    let m = interval(200);
    let c = transform(&m, parabola).unwrap();
    let pts: Vec<Point> = (1..20).map(|j| Point::One(PI * j as f64 / 20.0)).collect();
    let g = solve_fourth_order(&m, &c, &[0.0], &pts).unwrap();
    for (p, u) in pts.iter().zip(&g.values[0]) {
        assert!((u - parabola(*p)).abs() < 1e-4, "{p:?}");
    }
}

#[test]
fn solutions_vanish_on_the_boundary() {
    let m = interval(100);
    let c = transform(&m, parabola).unwrap();
    let bd = m.op.boundary_samples();
    let g = solve_fractional(&m, &c, FracOrder::new(0.3).unwrap(), &[0.0, 0.5, 2.0], &bd).unwrap();
    assert!(g.values.iter().flatten().all(|v| v.abs() < 1e-12));
}

#[test]
fn truncation_error_is_monotone_in_n() {
    let m = interval(128);
    let c = transform(&m, parabola).unwrap();
    let pts: Vec<Point> = (0..=64).map(|j| Point::One(PI * j as f64 / 64.0)).collect();
    let times = [0.0, 0.1, 1.0];
    let beta = FracOrder::HALF;
    let reference = solve_fractional(&m, &c, beta, &times, &pts).unwrap();
    let dist = |n: usize| {
        let g = solve_fractional(&m.truncated(n), &c.truncated(n), beta, &times, &pts).unwrap();
        (0..times.len())
            .map(|i| {
                let diff = spectral::SolutionGrid {
                    times: times.to_vec(),
                    points: pts.clone(),
                    values: vec![g.values[i]
                        .iter()
                        .zip(&reference.values[i])
                        .map(|(a, b)| a - b)
                        .collect()],
                };
                diff.l2_norm_at(0)
            })
            .fold(0.0f64, f64::max)
    };
    let mut prev = f64::INFINITY;
    for n in [1, 2, 4, 8, 16, 32, 64, 128] {
        let d = dist(n);
        assert!(d <= prev + 1e-15, "n={n}: {d} > {prev}");
        prev = d;
    }
}

#[test]
fn heat_kernel_value_and_symmetry() {
    let m = interval(50);
    let mid = Point::One(PI / 2.0);
    let v = heat_kernel(&m, 5.0, mid, mid).unwrap();
    assert!((v - 0.004_289_510_284_782_618).abs() < 1e-15, "{v}");
    let (a, b) = (Point::One(0.3), Point::One(2.2));
    assert_eq!(heat_kernel(&m, 0.7, a, b).unwrap(), heat_kernel(&m, 0.7, b, a).unwrap());
    assert!(heat_kernel(&m, 1e-4, a, b).is_err());
}

#[test]
fn killed_kernel_is_sub_markov() {
    let m = interval(50);
    let mid = Point::One(PI / 2.0);
    let (nodes, weights) = fracdiff::quad::composite_gauss_legendre(0.0, PI, 64, 8);
    let mass: f64 = nodes
        .iter()
        .zip(&weights)
        .map(|(&y, w)| w * heat_kernel(&m, 1.0, mid, Point::One(y)).unwrap())
        .sum();
    assert!((mass - 0.468_346_275_450_499_4).abs() < 1e-12, "{mass}");
    assert!(mass <= 1.0);
}

#[test]
fn semigroup_examples() {
    let m = interval(20);
    let c = transform(&m, parabola).unwrap();
    assert_eq!(semigroup_apply(&m, &c, 0.0).unwrap().values, c.values);
    let phi1 = InitialDatum::Mode { n: 1 }.evaluator(&m).unwrap();
    let c1 = transform(&m, &phi1).unwrap();
    let s = semigroup_apply(&m, &c1, 1.0).unwrap();
    assert!((s.values[0] - (-1f64).exp()).abs() < 1e-12);
    assert!(semigroup_apply(&m, &c, -1.0).is_err());
}

#[test]
fn truncation_select_examples() {
    let m = interval(400);
    let phi1 = InitialDatum::Mode { n: 1 }.evaluator(&m).unwrap();
    let c1 = transform(&m, &phi1).unwrap();
    // Quadrature leaves ~1e-16 coefficients; the tail is far below eps.
    assert_eq!(truncation_select(&c1, 1e-6).unwrap(), 1);

    let cp = transform(&m, parabola).unwrap();
    let eps: f64 = 1e-4;
    let tail = |n: usize| -> f64 {
        (n + 1..200_000)
            .filter(|k| k % 2 == 1)
            .map(|k| 32.0 / PI / (k as f64).powi(6))
            .sum()
    };
    let expected = (1..).find(|&n| tail(n) < eps * eps).unwrap();
    assert_eq!(truncation_select(&cp, eps).unwrap(), expected);
    assert_eq!(truncation_select(&cp, 100.0).unwrap(), 1);
    assert!(truncation_select(&cp.truncated(12), 1e-6).is_err());
}

#[test]
fn smoothness_examples() {
    let m = interval(200);
    let cp = transform(&m, parabola).unwrap();
    let r = smoothness_diagnostic(&cp, &m).unwrap();
    let k = r.decay_exponent.unwrap();
    assert!((k - 1.5).abs() < 0.01, "{k}");
    assert_eq!(r.threshold, 1.75);
    assert!(!r.above_threshold);

    let phi1 = InitialDatum::Mode { n: 1 }.evaluator(&m).unwrap();
    let c1 = transform(&m, &phi1).unwrap();
    assert_eq!(smoothness_diagnostic(&c1, &m).unwrap().decay_exponent, None);
    let zero = transform(&m, |_| 0.0).unwrap();
    assert!(smoothness_diagnostic(&zero, &m).is_err());
}

#[test]
fn sampled_datum_reproduces_parabola_coefficients() {
    let m = interval(10);
    let xs: Vec<f64> = (0..=4000).map(|i| PI * i as f64 / 4000.0).collect();
    let fs: Vec<f64> = xs.iter().map(|&x| x * (PI - x)).collect();
    let f = InitialDatum::Sampled { x: xs, f: fs }.evaluator(&m).unwrap();
    let c = transform(&m, &f).unwrap();
    assert!((c.values[0] - 4.0 * (2.0 / PI).sqrt()).abs() < 1e-6);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn decay_estimate_holds(beta in 0.05f64..0.95, t in 0.01f64..10.0) {
        let m = interval(100);
        let c = transform(&m, parabola).unwrap();
        let pts: Vec<Point> = (0..=400).map(|j| Point::One(PI * j as f64 / 400.0)).collect();
        let g = solve_fractional(&m, &c, FracOrder::new(beta).unwrap(), &[t], &pts).unwrap();
        let bound = mittag_leffler(beta, -t.powf(beta)).unwrap().value * c.datum_norm_sq.sqrt();
        prop_assert!(g.l2_norm_at(0) <= bound * (1.0 + 1e-6));
    }

    #[test]
    fn semigroup_property(l1 in 0.0f64..3.0, l2 in 0.0f64..3.0) {
        let m = interval(30);
        let c = transform(&m, parabola).unwrap();
        let a = semigroup_apply(&m, &c, l1 + l2).unwrap();
        let b = semigroup_apply(&m, &semigroup_apply(&m, &c, l1).unwrap(), l2).unwrap();
        for ((x, y), l) in a.values.iter().zip(&b.values).zip(m.eigenvalues()) {
            // Rounding in exp grows with the exponent.
            let rel = 4.0 * f64::EPSILON * (1.0 + l * (l1 + l2));
            prop_assert!((x - y).abs() <= rel * x.abs(), "{} vs {}", x, y);
        }
    }

    #[test]
    fn heat_kernel_symmetric(x in 0.01f64..3.1, y in 0.01f64..3.1, t in 0.001f64..5.0) {
        let m = interval(60);
        let (a, b) = (Point::One(x), Point::One(y));
        prop_assert_eq!(heat_kernel(&m, t, a, b).unwrap(), heat_kernel(&m, t, b, a).unwrap());
    }
}
