//! Acceptance suite: one line per criterion, non-zero exit if any fails.

use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use fracdiff::specfun::{gamma, mittag_leffler, FracOrder};
use fracdiff::spectral::{self, Coefficient, InitialDatum, OperatorSpec, Point};
use fracdiff::stochastic::{self, ks, CtrwConfig, IndicatorMode, PathConfig, RngSpec};
use fracdiff::verify;
use fracdiff::Execution;

// Tolerances and budgets per criterion.
const ML_ABS_TOL: f64 = 1e-12;
const ML_BUDGET: Duration = Duration::from_secs(10);
const CAPUTO_ORDER_BAND: f64 = 0.15;
const CAPUTO_BUDGET: Duration = Duration::from_secs(5);
const SUBORDINATION_TOL: f64 = 1e-6;
const SUBORDINATION_BUDGET: Duration = Duration::from_secs(30);
/// E_{1/2}(-1) sqrt(2/pi), from the extended-precision oracle.
const SINGLE_MODE_TRUTH: f64 = 0.341_162_333_867_594_6;
const SINGLE_MODE_TOL: f64 = 1e-10;
const SINGLE_MODE_BUDGET: Duration = Duration::from_secs(1);
const DECAY_SLACK: f64 = 1e-6;
const DECAY_BUDGET: Duration = Duration::from_secs(10);
const MC_SIGMAS: f64 = 3.0;
const MC_MAX_STDERR: f64 = 5e-3;
const MC_BUDGET: Duration = Duration::from_secs(300);
const EQUIVALENCE_BUDGET: Duration = Duration::from_secs(900);
const FOURTH_ORDER_MODE_TOL: f64 = 1e-9;
const FOURTH_ORDER_PARABOLA_TOL: f64 = 1e-6;
const FOURTH_ORDER_BUDGET: Duration = Duration::from_secs(30);
const KS_ALPHA: f64 = 0.01;
const SAMPLER_DRAWS: usize = 1_000_000;
const SAMPLER_BUDGET: Duration = Duration::from_secs(60);
const CTRW_KS_MAX: f64 = 0.02;
const CTRW_BUDGET: Duration = Duration::from_secs(120);
const GENERAL_OP_ORDER: (f64, f64) = (1.8, 2.2);
const GENERAL_OP_BUDGET: Duration = Duration::from_secs(600);

struct Outcome {
    pass: bool,
    detail: String,
}

fn mc_config() -> PathConfig {
    PathConfig {
        dt: 1e-4,
        n_paths: 100_000,
        bridge_correction: true,
        execution: Execution::Parallel,
    }
}

fn phi1(p: Point) -> f64 {
    (2.0 / PI).sqrt() * p.x().sin()
}

fn c1_mittag_leffler() -> Outcome {
    let text = include_str!("data/ml_oracle.csv");
    let mut worst = 0.0f64;
    let mut worst_bound = 0.0f64;
    let mut envelope_ok = true;
    let mut rows = 0;
    for line in text.lines().skip(1) {
        let mut it = line.split(',').map(|s| s.parse::<f64>().unwrap());
        let (beta, x, exact) = (it.next().unwrap(), it.next().unwrap(), it.next().unwrap());
        let v = mittag_leffler(beta, -x).unwrap();
        worst = worst.max((v.value - exact).abs());
        worst_bound = worst_bound.max(v.abs_error_bound);
        let lower = 1.0 / (1.0 + gamma(1.0 - beta) * x);
        let upper = 1.0 / (1.0 + x / gamma(1.0 + beta));
        envelope_ok &= lower <= v.value && v.value <= upper;
        rows += 1;
    }
    Outcome {
        pass: rows == 4500 && worst <= ML_ABS_TOL && worst_bound <= ML_ABS_TOL && envelope_ok,
        detail: format!(
            "{rows} points, max error {worst:.2e}, max bound {worst_bound:.2e}, gamma envelope {envelope_ok}"
        ),
    }
}

fn c2_caputo() -> Outcome {
    let dts = [1.0 / 64.0, 1.0 / 128.0, 1.0 / 256.0];
    let mut pass = true;
    let mut parts = vec![];
    for beta in [0.3, 0.5, 0.7] {
        let r = verify::eigen_relation_sweep(FracOrder::new(beta).unwrap(), 1.0, &dts, 1.0, 0.01).unwrap();
        let order = r.convergence_order.unwrap();
        pass &= (order - (2.0 - beta)).abs() <= CAPUTO_ORDER_BAND;
        parts.push(format!("beta={beta} order {order:.3}"));
    }
    Outcome {
        pass,
        detail: parts.join(", "),
    }
}

fn c3_subordination() -> Outcome {
    let mut worst = 0.0f64;
    for beta in [0.3, 0.5, 0.7] {
        for lambda in [1.0, 5.0, 25.0] {
            for t in [0.1, 1.0, 10.0] {
                let c = verify::subordination_identity(FracOrder::new(beta).unwrap(), lambda, t).unwrap();
                worst = worst.max((c.lhs - c.rhs).abs());
            }
        }
    }
    Outcome {
        pass: worst <= SUBORDINATION_TOL,
        detail: format!("27 points, max |lhs - rhs| {worst:.2e}"),
    }
}

fn c4_single_mode() -> Outcome {
    let model = spectral::eigenpairs(&OperatorSpec::interval(PI).unwrap(), 100).unwrap();
    let coeffs = spectral::transform(&model, phi1).unwrap();
    let u = spectral::solve_fractional(&model, &coeffs, FracOrder::HALF, &[1.0], &[Point::One(PI / 2.0)]).unwrap();
    let v = u.values[0][0];
    Outcome {
        pass: (v - SINGLE_MODE_TRUTH).abs() <= SINGLE_MODE_TOL,
        detail: format!("u = {v:.15}, error {:.2e}", (v - SINGLE_MODE_TRUTH).abs()),
    }
}

fn c5_decay() -> Outcome {
    let model = spectral::eigenpairs(&OperatorSpec::interval(PI).unwrap(), 100).unwrap();
    let coeffs = spectral::transform(&model, |p| p.x() * (PI - p.x())).unwrap();
    let f_norm = coeffs.datum_norm_sq.sqrt();
    let times: Vec<f64> = (0..50).map(|i| 0.01 + (10.0 - 0.01) * i as f64 / 49.0).collect();
    let points: Vec<Point> = (0..=1000).map(|j| Point::One(PI * j as f64 / 1000.0)).collect();
    let mut worst = 0.0f64;
    for beta in [0.3, 0.5, 0.7] {
        let grid = spectral::solve_fractional(&model, &coeffs, FracOrder::new(beta).unwrap(), &times, &points).unwrap();
        for (i, &t) in times.iter().enumerate() {
            let bound = mittag_leffler(beta, -t.powf(beta)).unwrap().value * f_norm;
            worst = worst.max(grid.l2_norm_at(i) / bound);
        }
    }
    Outcome {
        pass: worst <= 1.0 + DECAY_SLACK,
        detail: format!("max ||u(t)|| / (E(-t^beta) ||f||) = {worst:.9}"),
    }
}

fn c6_stochastic() -> Outcome {
    let op = OperatorSpec::interval(PI).unwrap();
    let e = stochastic::solve_mc(
        &op,
        phi1,
        FracOrder::HALF,
        1.0,
        Point::One(PI / 2.0),
        &mc_config(),
        RngSpec::new(20_240_601, 6),
        IndicatorMode::KillThenSubordinate,
    )
    .unwrap();
    let z = (e.mean - SINGLE_MODE_TRUTH).abs() / e.std_error;
    Outcome {
        pass: z <= MC_SIGMAS && e.std_error <= MC_MAX_STDERR,
        detail: format!(
            "mean {:.5} +- {:.2e} vs {SINGLE_MODE_TRUTH:.5}, {z:.2} stderr",
            e.mean, e.std_error
        ),
    }
}

fn c7_equivalence() -> Outcome {
    let model = spectral::eigenpairs(&OperatorSpec::interval(PI).unwrap(), 100).unwrap();
    let mut pass = true;
    let mut worst_z = 0.0f64;
    let mut worst_spectral = 0.0f64;
    let mut checks = 0;
    let mut indicators_identical = true;
    for (k, datum) in [InitialDatum::Mode { n: 1 }, InitialDatum::Parabola].iter().enumerate() {
        let r = verify::equivalence_suite(
            &model,
            datum,
            &[0.1, 1.0, 5.0],
            &[Point::One(PI / 2.0)],
            &mc_config(),
            RngSpec::new(77, k as u64),
        )
        .unwrap();
        pass &= r.pass;
        for case in &r.cases {
            for c in &case.checks {
                checks += 1;
                if c.bound == verify::SPECTRAL_PAIR_TOL {
                    worst_spectral = worst_spectral.max(c.value);
                } else if c.bound > 0.0 {
                    worst_z = worst_z.max(c.value / c.bound * MC_SIGMAS);
                }
            }
        }
    }
    // Path-by-path agreement of the two indicator forms under a shared seed.
    let op = OperatorSpec::interval(PI).unwrap();
    let cfg = PathConfig {
        n_paths: 20_000,
        ..mc_config()
    };
    for t in [0.1, 1.0, 5.0] {
        let rng = RngSpec::new(78, 0);
        let a = stochastic::mc_indicators(
            &op,
            FracOrder::HALF,
            t,
            Point::One(PI / 2.0),
            &cfg,
            rng,
            IndicatorMode::KillThenSubordinate,
        )
        .unwrap();
        let b = stochastic::mc_indicators(
            &op,
            FracOrder::HALF,
            t,
            Point::One(PI / 2.0),
            &cfg,
            rng,
            IndicatorMode::SubordinateThenKill,
        )
        .unwrap();
        indicators_identical &= a == b;
    }
    Outcome {
        pass: pass && indicators_identical,
        detail: format!(
            "{checks} pair checks, max spectral gap {worst_spectral:.2e}, max MC gap {worst_z:.2} stderr, indicator sequences identical {indicators_identical}"
        ),
    }
}

fn c8_fourth_order() -> Outcome {
    let model = spectral::eigenpairs(&OperatorSpec::interval(PI).unwrap(), 200).unwrap();
    let times: Vec<f64> = (0..40).map(|i| 0.01 * 1000f64.powf(i as f64 / 39.0)).collect();
    let points: Vec<Point> = (1..100).map(|j| Point::One(PI * j as f64 / 100.0)).collect();
    let c_mode = spectral::transform(&model, phi1).unwrap();
    let r_mode = verify::residual_fourth_order(&model, &c_mode, &times, &points).unwrap();
    let c_par = spectral::transform(&model, |p| p.x() * (PI - p.x())).unwrap();
    let r_par = verify::residual_fourth_order(&model, &c_par, &times, &points).unwrap();
    Outcome {
        pass: r_mode.max_abs_residual <= FOURTH_ORDER_MODE_TOL
            && r_par.max_abs_residual <= FOURTH_ORDER_PARABOLA_TOL + r_par.tail_bound,
        detail: format!(
            "mode residual {:.2e}, parabola residual {:.2e} (tail bound {:.2e}), boundary max {:.2e}",
            r_mode.max_abs_residual,
            r_par.max_abs_residual,
            r_par.tail_bound,
            r_par.boundary_max.unwrap_or(0.0)
        ),
    }
}

fn c9_samplers() -> Outcome {
    let half = FracOrder::HALF;
    let exec = Execution::Parallel;
    let stable = stochastic::sample_many(RngSpec::new(9, 1), SAMPLER_DRAWS, exec, |r| {
        stochastic::sample_stable(half, r)
    });
    let reference = stochastic::sample_many(RngSpec::new(9, 2), SAMPLER_DRAWS, exec, |r| {
        let z: f64 = rand_distr::Distribution::sample(&rand_distr::StandardNormal, r);
        1.0 / (2.0 * z * z)
    });
    let d_stable = ks::two_sample(&stable, &reference);
    let crit2 = ks::critical(KS_ALPHA, SAMPLER_DRAWS, Some(SAMPLER_DRAWS));
    let inverse = stochastic::sample_many(RngSpec::new(9, 3), SAMPLER_DRAWS, exec, |r| {
        stochastic::sample_inverse_subordinator(half, 1.0, r)
    });
    let d_inverse = ks::one_sample(&inverse, |x| libm::erf(x / 2.0));
    let crit1 = ks::critical(KS_ALPHA, SAMPLER_DRAWS, None);
    let mut worst_z = 0.0f64;
    for (k, beta) in [0.3, 0.7].into_iter().enumerate() {
        let b = FracOrder::new(beta).unwrap();
        let d = stochastic::sample_many(RngSpec::new(9, 10 + k as u64), SAMPLER_DRAWS, exec, |r| {
            stochastic::sample_stable(b, r)
        });
        for s in [0.5, 1.0, 2.0] {
            let n = d.len() as f64;
            let vals: Vec<f64> = d.iter().map(|x| (-s * x).exp()).collect();
            let mean = vals.iter().sum::<f64>() / n;
            let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
            let z = (mean - (-f64::powf(s, beta)).exp()).abs() / (var / n).sqrt();
            worst_z = worst_z.max(z);
        }
    }
    Outcome {
        pass: d_stable < crit2 && d_inverse < crit1 && worst_z <= MC_SIGMAS,
        detail: format!(
            "stable KS {d_stable:.5} (crit {crit2:.5}), inverse KS {d_inverse:.5} (crit {crit1:.5}), Laplace max {worst_z:.2} stderr"
        ),
    }
}

fn c10_ctrw() -> Outcome {
    let cfg = |c: f64| CtrwConfig {
        beta: FracOrder::HALF,
        scale_c: c,
        horizon_t: 1.0,
        n_walkers: 100_000,
    };
    let dist = |c: f64, seed: u64| {
        let v = stochastic::ctrw_scaled_counts(&cfg(c), RngSpec::new(seed, 10), Execution::Parallel).unwrap();
        ks::one_sample(&v, |x| libm::erf(x / 2.0))
    };
    let d0 = dist(1e4, 0);
    let base: f64 = (0..5).map(|s| dist(1e4, 100 + s)).sum::<f64>() / 5.0;
    let doubled: f64 = (0..5).map(|s| dist(2e4, 100 + s)).sum::<f64>() / 5.0;
    Outcome {
        pass: d0 <= CTRW_KS_MAX && doubled <= base,
        detail: format!("KS {d0:.4} at c=1e4; mean over 5 seeds {base:.4} -> {doubled:.4} when c doubles"),
    }
}

fn c11_general_operator() -> Outcome {
    let a = Coefficient::Affine {
        a0: 1.0,
        a1: 1.0 / (2.0 * PI),
    };
    let spec = |grid: usize| OperatorSpec::divergence_form(PI, a.clone(), 0.5, 2.0, grid).unwrap();
    let grids = [128, 256, 512, 1024];
    let eig: Vec<Vec<f64>> = grids
        .iter()
        .map(|&g| spectral::eigenpairs(&spec(g), 5).unwrap().eigenvalues())
        .collect();
    let mut order_ok = true;
    let mut orders = vec![];
    for n in 0..5 {
        for w in eig.windows(3) {
            let p = ((w[0][n] - w[1][n]) / (w[1][n] - w[2][n])).log2();
            order_ok &= p >= GENERAL_OP_ORDER.0 && p <= GENERAL_OP_ORDER.1;
            orders.push(p);
        }
    }
    let (omin, omax) = orders
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(a, b), &p| (a.min(p), b.max(p)));

    let op = spec(1024);
    let model = spectral::eigenpairs(&op, 20).unwrap();
    let psi1 = model.modes[0].eigenfunction.clone();
    let coeffs = spectral::transform(&model, |p| psi1.eval(p)).unwrap();
    let x0 = Point::One(PI / 2.0);
    let truth = spectral::solve_fractional(&model, &coeffs, FracOrder::HALF, &[1.0], &[x0])
        .unwrap()
        .values[0][0];
    let e = stochastic::solve_mc(
        &op,
        |p| psi1.eval(p),
        FracOrder::HALF,
        1.0,
        x0,
        &mc_config(),
        RngSpec::new(11, 0),
        IndicatorMode::KillThenSubordinate,
    )
    .unwrap();
    let z = (e.mean - truth).abs() / e.std_error;
    Outcome {
        pass: order_ok && z <= MC_SIGMAS,
        detail: format!(
            "FD eigenvalue orders in [{omin:.3}, {omax:.3}]; MC {:.5} +- {:.2e} vs spectral {truth:.5} ({z:.2} stderr)",
            e.mean, e.std_error
        ),
    }
}

type Criterion = (&'static str, Duration, fn() -> Outcome);

fn main() -> ExitCode {
    let criteria: [Criterion; 11] = [
        ("1 mittag-leffler oracle", ML_BUDGET, c1_mittag_leffler),
        ("2 caputo eigen-relation", CAPUTO_BUDGET, c2_caputo),
        ("3 subordination identity", SUBORDINATION_BUDGET, c3_subordination),
        ("4 single-mode exactness", SINGLE_MODE_BUDGET, c4_single_mode),
        ("5 decay estimate", DECAY_BUDGET, c5_decay),
        ("6 stochastic representation", MC_BUDGET, c6_stochastic),
        ("7 ibm equivalence", EQUIVALENCE_BUDGET, c7_equivalence),
        ("8 fourth-order residual", FOURTH_ORDER_BUDGET, c8_fourth_order),
        ("9 distributional samplers", SAMPLER_BUDGET, c9_samplers),
        ("10 ctrw scaling limit", CTRW_BUDGET, c10_ctrw),
        ("11 general operator", GENERAL_OP_BUDGET, c11_general_operator),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (name, budget, run) in criteria {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        let start = Instant::now();
        let out = run();
        let elapsed = start.elapsed();
        let in_time = elapsed <= budget;
        let pass = out.pass && in_time;
        if !pass {
            failed += 1;
        }
        println!(
            "[{}] criterion {name}: {} ({:.2}s of {}s)",
            if pass { "PASS" } else { "FAIL" },
            out.detail,
            elapsed.as_secs_f64(),
            budget.as_secs()
        );
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
