use std::cell::RefCell;

use fracdiff::spectral::{self, InitialDatum, Point, SolutionGrid, SpectralModel};
use fracdiff::stochastic::{self, ks, CtrwConfig, IndicatorMode, McEstimate, PathConfig, RngSpec};
use fracdiff::{specfun, verify, OperatorSpec, SpectralCoefficients};
use serde_json::{json, Value};

use crate::artifacts::{fmt_num, Artifacts};
use crate::config::{Command, RunConfig};
use crate::error::CliError;

const SWEEP_DTS: [f64; 3] = [1.0 / 64.0, 1.0 / 128.0, 1.0 / 256.0];
const SWEEP_T_END: f64 = 1.0;
const SWEEP_T_MIN: f64 = 0.01;
const CAPUTO_ORDER_BAND: f64 = 0.15;
const FRACTIONAL_TAIL_TOL: f64 = 1e-3;
const FOURTH_ORDER_TOL: f64 = 1e-6;
const SUBORDINATION_TOL: f64 = 1e-6;
const UNIQUENESS_PERTURBATION: f64 = 1e-6;
const KS_ALPHA: f64 = 0.01;

/// Result of a successful run: artifacts plus a line or two for stdout.
pub struct Outcome {
    pub artifacts: Artifacts,
    pub summary: Vec<String>,
}

pub fn run(cfg: &RunConfig) -> Result<Outcome, CliError> {
    match cfg.command {
        Command::Ml => ml(cfg),
        Command::Density => density(cfg),
        Command::Eigs => eigs(cfg),
        Command::SolveSpectral | Command::Solve4th => solve_series(cfg),
        Command::SolveMc | Command::SolveIbm => solve_stochastic(cfg),
        Command::Ctrw => ctrw(cfg),
        Command::Verify => verify_cmd(cfg),
        Command::Equivalence => equivalence(cfg),
    }
}

fn operator(cfg: &RunConfig) -> &OperatorSpec {
    cfg.operator.as_ref().expect("operator validated")
}

fn datum(cfg: &RunConfig) -> &InitialDatum {
    cfg.datum.as_ref().expect("datum validated")
}

fn model(cfg: &RunConfig, modes: usize) -> Result<SpectralModel, CliError> {
    let mut m = spectral::eigenpairs(operator(cfg), modes)?;
    m.t_floor = cfg.t_floor;
    Ok(m)
}

fn point_header(p: &Point) -> Vec<&'static str> {
    match p {
        Point::One(_) => vec!["x"],
        Point::Two(..) => vec!["x", "y"],
    }
}

fn point_cells(p: &Point) -> Vec<String> {
    p.coords().into_iter().map(fmt_num).collect()
}

fn path_config(cfg: &RunConfig) -> PathConfig {
    PathConfig {
        dt: cfg.mc.dt,
        n_paths: cfg.mc.n_paths,
        bridge_correction: cfg.mc.bridge_correction,
        execution: cfg.mc.execution,
    }
}

fn rng(cfg: &RunConfig) -> RngSpec {
    RngSpec::new(cfg.mc.seed, cfg.mc.stream_id)
}

fn ml(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let beta = cfg.beta.expect("beta validated");
    let mut rows = Vec::new();
    let mut summary = Vec::new();
    for &x in &cfg.x {
        let v = specfun::mittag_leffler(beta, x)?;
        rows.push(vec![
            fmt_num(beta),
            fmt_num(x),
            fmt_num(v.value),
            fmt_num(v.abs_error_bound),
        ]);
        summary.push(format!("{}", v.value));
    }
    let mut a = Artifacts::default();
    a.csv("values.csv", &["beta", "x", "value", "abs_error_bound"], rows)?;
    Ok(Outcome { artifacts: a, summary })
}

fn density(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let beta = cfg.frac_order();
    let mut rows = Vec::new();
    for &x in &cfg.x {
        rows.push(vec![
            fmt_num(x),
            fmt_num(specfun::stable_density(beta, x)?),
            fmt_num(specfun::stable_survival(beta, x)?),
        ]);
    }
    let mut a = Artifacts::default();
    a.csv("density.csv", &["x", "density", "survival"], rows)?;
    if !cfg.times.is_empty() {
        let mut rows = Vec::new();
        for &t in &cfg.times {
            for &x in &cfg.x {
                rows.push(vec![
                    fmt_num(t),
                    fmt_num(x),
                    fmt_num(specfun::inverse_subordinator_density(beta, t, x)?),
                ]);
            }
        }
        a.csv("inverse_density.csv", &["t", "x", "density"], rows)?;
    }
    Ok(Outcome {
        artifacts: a,
        summary: vec![format!("{} density values", cfg.x.len())],
    })
}

fn eigs(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let m = model(cfg, cfg.modes)?;
    let rows = m.modes.iter().map(|e| vec![e.index.to_string(), fmt_num(e.eigenvalue)]);
    let mut a = Artifacts::default();
    a.csv("eigenvalues.csv", &["n", "eigenvalue"], rows)?;
    Ok(Outcome {
        artifacts: a,
        summary: vec![format!("{} eigenvalues, first {}", m.len(), m.modes[0].eigenvalue)],
    })
}

fn solution_csv(a: &mut Artifacts, grid: &SolutionGrid) -> Result<(), CliError> {
    let mut header = vec!["t"];
    header.extend(point_header(&grid.points[0]));
    header.push("u");
    let mut rows = Vec::new();
    for (i, &t) in grid.times.iter().enumerate() {
        for (j, p) in grid.points.iter().enumerate() {
            let mut r = vec![fmt_num(t)];
            r.extend(point_cells(p));
            r.push(fmt_num(grid.values[i][j]));
            rows.push(r);
        }
    }
    a.csv("solution.csv", &header, rows)
}

fn coefficients_csv(a: &mut Artifacts, m: &SpectralModel, c: &SpectralCoefficients) -> Result<(), CliError> {
    let rows = m
        .modes
        .iter()
        .zip(&c.values)
        .map(|(e, v)| vec![e.index.to_string(), fmt_num(e.eigenvalue), fmt_num(*v)]);
    a.csv("coefficients.csv", &["n", "eigenvalue", "coefficient"], rows)
}

fn coefficient_report(m: &SpectralModel, c: &SpectralCoefficients, eps: Option<f64>) -> Value {
    let smoothness = match spectral::smoothness_diagnostic(c, m) {
        Ok(s) => json!(s),
        Err(e) => json!({ "error": e.to_string() }),
    };
    let tail = match verify::tail_estimate(m, c) {
        Ok(t) => json!(t),
        Err(e) => json!({ "error": e.to_string() }),
    };
    let truncation = eps.map(|eps| match spectral::truncation_select(c, eps) {
        Ok(n) => json!({ "eps": eps, "modes": n }),
        Err(e) => json!({ "eps": eps, "error": e.to_string() }),
    });
    json!({
        "modes": m.len(),
        "coefficient_l2_norm_sq": c.l2_norm_sq,
        "datum_l2_norm_sq": c.datum_norm_sq,
        "tail_estimate": tail,
        "smoothness": smoothness,
        "truncation": truncation,
    })
}

fn solve_series(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let m = model(cfg, cfg.modes)?;
    let f = datum(cfg).evaluator(&m)?;
    let c = spectral::transform(&m, &f)?;
    let (grid, equation) = match cfg.command {
        Command::SolveSpectral => (
            spectral::solve_fractional(&m, &c, cfg.frac_order(), &cfg.times, &cfg.points)?,
            "fractional",
        ),
        _ => (
            spectral::solve_fourth_order(&m, &c, &cfg.times, &cfg.points)?,
            "fourth_order",
        ),
    };
    let mut a = Artifacts::default();
    solution_csv(&mut a, &grid)?;
    coefficients_csv(&mut a, &m, &c)?;
    let mut report = coefficient_report(&m, &c, cfg.eps);
    report["equation"] = json!(equation);
    report["beta"] = json!(cfg.beta);
    a.json("report.json", &report)?;
    Ok(Outcome {
        artifacts: a,
        summary: vec![format!("{} solution values", cfg.times.len() * cfg.points.len())],
    })
}

fn solve_stochastic(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let op = operator(cfg);
    let needed = match datum(cfg) {
        InitialDatum::Mode { n } => *n,
        _ => 1,
    };
    let m = model(cfg, needed)?;
    let f = datum(cfg).evaluator(&m)?;
    let pc = path_config(cfg);
    let base = rng(cfg);
    let mut estimates: Vec<(f64, Point, McEstimate)> = Vec::new();
    for (i, &t) in cfg.times.iter().enumerate() {
        for (j, &x) in cfg.points.iter().enumerate() {
            let r = base.substream((i * cfg.points.len() + j) as u64);
            let e = match cfg.command {
                Command::SolveMc => stochastic::solve_mc(
                    op,
                    &f,
                    cfg.frac_order(),
                    t,
                    x,
                    &pc,
                    r,
                    IndicatorMode::KillThenSubordinate,
                )?,
                _ if cfg.mc.two_sided => stochastic::solve_ibm_twosided(op, &f, t, x, &pc, r, false)?,
                _ => stochastic::solve_ibm(op, &f, t, x, &pc, r)?,
            };
            estimates.push((t, x, e));
        }
    }
    let mut header = vec!["t"];
    header.extend(point_header(&cfg.points[0]));
    header.extend(["u", "stderr"]);
    let rows = estimates.iter().map(|(t, x, e)| {
        let mut r = vec![fmt_num(*t)];
        r.extend(point_cells(x));
        r.push(fmt_num(e.mean));
        r.push(fmt_num(e.std_error));
        r
    });
    let mut a = Artifacts::default();
    a.csv("solution.csv", &header, rows)?;
    let report = json!({
        "estimator": match (cfg.command, cfg.mc.two_sided) {
            (Command::SolveMc, _) => "killed_diffusion_inverse_stable_clock",
            (_, true) => "iterated_brownian_motion_two_sided",
            _ => "iterated_brownian_motion",
        },
        "beta": cfg.beta,
        "estimates": estimates.iter().map(|(t, x, e)| json!({"t": t, "x": x, "estimate": e})).collect::<Vec<_>>(),
    });
    a.json("report.json", &report)?;
    Ok(Outcome {
        artifacts: a,
        summary: vec![format!("{} estimates", estimates.len())],
    })
}

fn ctrw(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let s = cfg.ctrw.as_ref().expect("ctrw validated");
    let beta = cfg.frac_order();
    let cc = CtrwConfig {
        beta,
        scale_c: s.scale_c,
        horizon_t: s.horizon_t,
        n_walkers: s.n_walkers,
    };
    let samples = stochastic::ctrw_scaled_counts(&cc, rng(cfg), cfg.mc.execution)?;
    let b = beta.get();
    let t = s.horizon_t;
    let cdf_err = RefCell::new(None);
    let ks_stat = ks::one_sample(&samples, |x| {
        if x <= 0.0 {
            return 0.0;
        }
        specfun::stable_survival(beta, t * x.powf(-1.0 / b)).unwrap_or_else(|e| {
            cdf_err.borrow_mut().get_or_insert(e);
            f64::NAN
        })
    });
    if let Some(e) = cdf_err.into_inner() {
        return Err(e.into());
    }
    let critical = ks::critical(KS_ALPHA, samples.len(), None);
    let mean = samples.iter().sum::<f64>() / samples.len() as f64;
    let mut a = Artifacts::default();
    a.csv(
        "samples.csv",
        &["scaled_count"],
        samples.iter().map(|v| vec![fmt_num(*v)]),
    )?;
    a.json(
        "report.json",
        &json!({
            "beta": b,
            "scale_c": s.scale_c,
            "horizon_t": t,
            "n_walkers": s.n_walkers,
            "mean": mean,
            "exact_mean": t.powf(b) / specfun::gamma(1.0 + b),
            "ks_statistic": ks_stat,
            "ks_alpha": KS_ALPHA,
            "ks_critical": critical,
        }),
    )?;
    Ok(Outcome {
        artifacts: a,
        summary: vec![format!("KS distance {ks_stat:.5} (critical {critical:.5})")],
    })
}

fn residual_rows(rows: &mut Vec<Vec<String>>, name: &str, r: &verify::ResidualReport) {
    for l in &r.levels {
        rows.push(vec![
            name.to_string(),
            fmt_num(l.dt),
            fmt_num(l.max_abs_residual),
            fmt_num(l.end_residual),
        ]);
    }
}

fn check(name: &str, value: f64, bound: f64) -> verify::Check {
    verify::Check {
        name: name.to_string(),
        value,
        bound,
        pass: value <= bound,
    }
}

fn verify_cmd(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let beta = cfg.frac_order();
    let b = beta.get();
    let m = model(cfg, cfg.modes)?;
    let f = datum(cfg).evaluator(&m)?;
    let c = spectral::transform(&m, &f)?;
    let lambda1 = m.modes[0].eigenvalue;
    let mut checks = Vec::new();
    let mut rows = Vec::new();

    let sweep = verify::eigen_relation_sweep(beta, lambda1, &SWEEP_DTS, SWEEP_T_END, SWEEP_T_MIN)?;
    residual_rows(&mut rows, "eigen_relation", &sweep);
    let order = sweep.convergence_order.unwrap_or(f64::NAN);
    checks.push(check(
        "caputo_order_deviation",
        (order - (2.0 - b)).abs(),
        CAPUTO_ORDER_BAND,
    ));

    let fractional = match verify::residual_fractional(
        &m,
        &c,
        beta,
        &SWEEP_DTS,
        SWEEP_T_END,
        SWEEP_T_MIN,
        &cfg.points,
        FRACTIONAL_TAIL_TOL,
    ) {
        Ok(r) => {
            residual_rows(&mut rows, "fractional", &r);
            json!(r)
        }
        Err(fracdiff::Error::Uncertified(msg)) => json!({ "uncertified": msg }),
        Err(e) => return Err(e.into()),
    };

    let fourth = verify::residual_fourth_order(&m, &c, &cfg.times, &cfg.points)?;
    rows.push(vec![
        "fourth_order".into(),
        String::new(),
        fmt_num(fourth.max_abs_residual),
        String::new(),
    ]);
    checks.push(check(
        "fourth_order_residual",
        fourth.max_abs_residual,
        FOURTH_ORDER_TOL + fourth.tail_bound,
    ));

    let mut subordination = Vec::new();
    for &t in &cfg.times {
        let s = verify::subordination_identity(beta, lambda1, t)?;
        checks.push(check(
            &format!("subordination t={t}"),
            (s.lhs - s.rhs).abs(),
            SUBORDINATION_TOL,
        ));
        subordination.push(json!({ "t": t, "check": s }));
    }

    let uniq = verify::uniqueness_proxy(&m, beta, &cfg.times, &cfg.points, UNIQUENESS_PERTURBATION)?;
    checks.push(verify::Check {
        name: "uniqueness".into(),
        value: uniq.zero_datum_max,
        bound: 0.0,
        pass: uniq.injective,
    });

    let pass = checks.iter().all(|k| k.pass);
    let report = json!({
        "pass": pass,
        "beta": b,
        "lambda_1": lambda1,
        "checks": checks,
        "eigen_relation": sweep,
        "fractional_residual": fractional,
        "fourth_order_residual": fourth,
        "subordination": subordination,
        "uniqueness": {
            "zero_datum_max": uniq.zero_datum_max,
            "min_perturbed_max": uniq.perturbed_max.iter().cloned().fold(f64::INFINITY, f64::min),
            "injective": uniq.injective,
        },
        "coefficients": coefficient_report(&m, &c, cfg.eps),
    });
    if !pass {
        return Err(CliError::CheckFailed {
            what: "verification".into(),
            report,
        });
    }
    let mut a = Artifacts::default();
    a.csv(
        "residuals.csv",
        &["check", "dt", "max_abs_residual", "end_residual"],
        rows,
    )?;
    a.json("report.json", &report)?;
    Ok(Outcome {
        artifacts: a,
        summary: vec![format!("{} checks passed", checks.len())],
    })
}

fn equivalence(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let m = model(cfg, cfg.modes)?;
    let report = verify::equivalence_suite(&m, datum(cfg), &cfg.times, &cfg.points, &path_config(cfg), rng(cfg))?;
    let n_checks: usize = report.cases.iter().map(|c| c.checks.len()).sum();
    if !report.pass {
        return Err(CliError::CheckFailed {
            what: "equivalence suite".into(),
            report: json!(report),
        });
    }
    let mut a = Artifacts::default();
    a.json("report.json", &report)?;
    Ok(Outcome {
        artifacts: a,
        summary: vec![format!(
            "{} cases, {n_checks} pairwise checks passed",
            report.cases.len()
        )],
    })
}
