use std::f64::consts::PI;

use fracdiff::specfun::{gamma, FracOrder};
use fracdiff::spectral::{self, InitialDatum, SpectralModel};
use fracdiff::stochastic::{PathConfig, RngSpec};
use fracdiff::verify::{self, caputo_l1, Leg};
use fracdiff::{Error, Execution, OperatorSpec, Point};
use proptest::prelude::*;

const DTS: [f64; 3] = [1.0 / 64.0, 1.0 / 128.0, 1.0 / 256.0];

fn interval(n: usize) -> SpectralModel {
    spectral::eigenpairs(&OperatorSpec::interval(PI).unwrap(), n).unwrap()
}

fn interior(n: usize) -> Vec<Point> {
    (1..n).map(|j| Point::One(PI * j as f64 / n as f64)).collect()
}

#[test]
fn l1_derivative_of_linear_function() {
    let times: Vec<f64> = (0..=128).map(|i| i as f64 / 128.0).collect();
    let d = caputo_l1(&times, &times, FracOrder::HALF).unwrap();
    assert!((d[128] - 1.0 / gamma(1.5)).abs() < 1e-12);
    assert!((d[128] - std::f64::consts::FRAC_2_SQRT_PI).abs() < 1e-12);
}

#[test]
fn fractional_residual_converges_for_first_mode() {
    let m = interval(20);
    let phi1 = InitialDatum::Mode { n: 1 }.evaluator(&m).unwrap();
    let c = spectral::transform(&m, &phi1).unwrap();
    let r = verify::residual_fractional(&m, &c, FracOrder::HALF, &DTS, 1.0, 0.01, &interior(16), 1e-6).unwrap();
    let order = r.convergence_order.unwrap();
    assert!((order - 1.5).abs() <= 0.15, "{order}");
    assert_eq!(r.levels.len(), 3);
    assert_eq!(r.tail_bound, 0.0);
}

#[test]
fn fractional_residual_reports_tail_separately() {
    let m = interval(200);
    let c = spectral::transform(&m, |p: Point| p.x() * (PI - p.x())).unwrap();
    let r = verify::residual_fractional(&m, &c, FracOrder::HALF, &DTS, 1.0, 0.01, &interior(16), 1e-3).unwrap();
    assert!(r.tail_bound > 0.0 && r.tail_bound < 1e-3);
    let end: Vec<f64> = r.levels.iter().map(|l| l.end_residual.abs()).collect();
    assert!(end[0] > end[1] && end[1] > end[2], "{end:?}");
    let short = m.truncated(30);
    let err = verify::residual_fractional(
        &short,
        &c.truncated(30),
        FracOrder::HALF,
        &DTS,
        1.0,
        0.01,
        &interior(16),
        1e-6,
    )
    .unwrap_err();
    assert!(matches!(err, Error::Uncertified(_)));
}

#[test]
fn fourth_order_identity_for_first_mode() {
    let m = interval(50);
    let phi1 = InitialDatum::Mode { n: 1 }.evaluator(&m).unwrap();
    let c = spectral::transform(&m, &phi1).unwrap();
    let times: Vec<f64> = (0..30).map(|i| 0.01 * 1000f64.powf(i as f64 / 29.0)).collect();
    let r = verify::residual_fourth_order(&m, &c, &times, &interior(40)).unwrap();
    assert!(r.max_abs_residual <= 1e-9, "{}", r.max_abs_residual);
    assert!(r.boundary_max.unwrap() <= 1e-12);
    assert!(verify::residual_fourth_order(&m, &c, &[0.0], &interior(4)).is_err());
}

#[test]
fn subordination_examples() {
    let s = verify::subordination_identity(FracOrder::HALF, 1.0, 1.0).unwrap();
    assert!((s.lhs - 0.427_583_58).abs() < 1e-6 && (s.rhs - 0.427_583_58).abs() < 1e-6);
    let s = verify::subordination_identity(FracOrder::HALF, 1e-12, 1.0).unwrap();
    assert!((s.lhs - 1.0).abs() < 1e-6 && (s.rhs - 1.0).abs() < 1e-6);
    let s = verify::subordination_identity(FracOrder::new(0.9).unwrap(), 5.0, 2.0).unwrap();
    assert!((s.lhs - s.rhs).abs() <= 1e-6);
    assert!(verify::subordination_identity(FracOrder::HALF, 0.0, 1.0).is_err());
}

#[test]
fn uniqueness_proxy_is_injective() {
    let m = interval(12);
    let r = verify::uniqueness_proxy(&m, FracOrder::new(0.3).unwrap(), &[0.5, 2.0], &interior(9), 1e-3).unwrap();
    assert_eq!(r.zero_datum_max, 0.0);
    assert_eq!(r.perturbed_max.len(), 12);
    assert!(r.injective);
}

#[test]
fn small_equivalence_suite_passes() {
    let m = interval(40);
    let cfg = PathConfig {
        dt: 1e-3,
        n_paths: 4000,
        bridge_correction: true,
        execution: Execution::Parallel,
    };
    let report = verify::equivalence_suite(
        &m,
        &InitialDatum::Mode { n: 1 },
        &[1.0],
        &[Point::One(PI / 2.0)],
        &cfg,
        RngSpec::new(99, 0),
    )
    .unwrap();
    assert!(report.pass);
    let case = &report.cases[0];
    assert_eq!(case.legs.len(), Leg::ALL.len());
    assert_eq!(case.checks.len(), 15);
    let modes = case
        .checks
        .iter()
        .find(|c| c.name == "mc_kill_then_subordinate vs mc_subordinate_then_kill")
        .unwrap();
    assert_eq!(modes.value, 0.0);
    let spectral_pair = case
        .checks
        .iter()
        .find(|c| c.name == "fractional vs fourth_order")
        .unwrap();
    assert!(spectral_pair.value <= verify::SPECTRAL_PAIR_TOL);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn l1_annihilates_constants(beta in 0.01f64..0.99, c in -10.0f64..10.0, n in 3usize..200) {
        let times: Vec<f64> = (0..n).map(|i| i as f64 * 0.01).collect();
        let d = caputo_l1(&times, &vec![c; n], FracOrder::new(beta).unwrap()).unwrap();
        prop_assert!(d.iter().all(|&v| v == 0.0));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn subordination_holds_on_random_parameters(beta in 0.2f64..0.9, lambda in 0.5f64..30.0, t in 0.1f64..10.0) {
        let s = verify::subordination_identity(FracOrder::new(beta).unwrap(), lambda, t).unwrap();
        prop_assert!((s.lhs - s.rhs).abs() <= 1e-6, "{:?}", s);
    }
}
