//! JSON run configuration: parsing, validation with json-path diagnostics,
//! and the normalized echo written to the manifest.

use std::fmt;
use std::path::PathBuf;

use fracdiff::spectral::{Coefficient, InitialDatum, OperatorSpec, Point};
use fracdiff::{Execution, FracOrder};
use serde::Serialize;
use serde_json::{json, Map, Value};

pub const DEFAULT_MODES: usize = 100;
pub const DEFAULT_DT: f64 = 1e-4;
pub const DEFAULT_PATHS: usize = 100_000;
pub const DEFAULT_BRIDGE: bool = true;
pub const DEFAULT_T_FLOOR: f64 = 1e-3;
pub const DEFAULT_SEED: u64 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Command {
    Ml,
    Density,
    Eigs,
    SolveSpectral,
    Solve4th,
    SolveMc,
    SolveIbm,
    Ctrw,
    Verify,
    Equivalence,
}

impl Command {
    const NAMES: [(&'static str, Command); 10] = [
        ("ml", Command::Ml),
        ("density", Command::Density),
        ("eigs", Command::Eigs),
        ("solve-spectral", Command::SolveSpectral),
        ("solve-4th", Command::Solve4th),
        ("solve-mc", Command::SolveMc),
        ("solve-ibm", Command::SolveIbm),
        ("ctrw", Command::Ctrw),
        ("verify", Command::Verify),
        ("equivalence", Command::Equivalence),
    ];

    pub fn name(self) -> &'static str {
        Self::NAMES
            .iter()
            .find(|(_, c)| *c == self)
            .map(|(n, _)| *n)
            .unwrap_or("?")
    }

    fn parse(s: &str) -> Option<Command> {
        Self::NAMES.iter().find(|(n, _)| *n == s).map(|(_, c)| *c)
    }

    fn needs_operator(self) -> bool {
        !matches!(self, Command::Ml | Command::Density | Command::Ctrw)
    }

    fn needs_datum(self) -> bool {
        matches!(
            self,
            Command::SolveSpectral
                | Command::Solve4th
                | Command::SolveMc
                | Command::SolveIbm
                | Command::Verify
                | Command::Equivalence
        )
    }

    fn needs_beta(self) -> bool {
        matches!(
            self,
            Command::Ml
                | Command::Density
                | Command::SolveSpectral
                | Command::SolveMc
                | Command::Ctrw
                | Command::Verify
        )
    }

    fn needs_grid(self) -> bool {
        matches!(
            self,
            Command::SolveSpectral
                | Command::Solve4th
                | Command::SolveMc
                | Command::SolveIbm
                | Command::Verify
                | Command::Equivalence
        )
    }

    fn uses_mc(self) -> bool {
        matches!(self, Command::SolveMc | Command::SolveIbm | Command::Equivalence)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Diagnostic {
    pub path: String,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

#[derive(Debug, Clone)]
pub struct McSettings {
    pub dt: f64,
    pub n_paths: usize,
    pub bridge_correction: bool,
    pub seed: u64,
    pub stream_id: u64,
    pub two_sided: bool,
    pub execution: Execution,
}

#[derive(Debug, Clone)]
pub struct CtrwSettings {
    pub scale_c: f64,
    pub horizon_t: f64,
    pub n_walkers: usize,
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub command: Command,
    pub operator: Option<OperatorSpec>,
    /// Kept as a plain number so that `ml` can accept beta = 1.
    pub beta: Option<f64>,
    pub modes: usize,
    pub t_floor: f64,
    pub datum: Option<InitialDatum>,
    pub times: Vec<f64>,
    pub points: Vec<Point>,
    pub x: Vec<f64>,
    pub eps: Option<f64>,
    pub mc: McSettings,
    pub ctrw: Option<CtrwSettings>,
    pub output_dir: Option<PathBuf>,
    /// Normalized configuration with every default written out.
    pub echo: Value,
    pub defaults_applied: Vec<String>,
}

impl RunConfig {
    pub fn frac_order(&self) -> FracOrder {
        FracOrder::new(self.beta.expect("beta validated")).expect("beta validated")
    }
}

struct Ctx {
    diags: Vec<Diagnostic>,
    defaults: Vec<String>,
}

impl Ctx {
    fn err(&mut self, path: &str, message: impl Into<String>) {
        self.diags.push(Diagnostic {
            path: path.to_string(),
            message: message.into(),
        });
    }

    fn object<'a>(&mut self, v: &'a Value, path: &str, allowed: &[&str]) -> Option<&'a Map<String, Value>> {
        match v.as_object() {
            None => {
                self.err(path, "expected an object");
                None
            }
            Some(m) => {
                for k in m.keys() {
                    if !allowed.contains(&k.as_str()) {
                        self.err(&join(path, k), "unknown key");
                    }
                }
                Some(m)
            }
        }
    }

    fn number(&mut self, m: &Map<String, Value>, path: &str, key: &str) -> Option<f64> {
        let p = join(path, key);
        match m.get(key) {
            None => None,
            Some(v) => match v.as_f64() {
                Some(x) if x.is_finite() => Some(x),
                _ => {
                    self.err(&p, "expected a finite number");
                    None
                }
            },
        }
    }

    fn required_number(&mut self, m: &Map<String, Value>, path: &str, key: &str) -> Option<f64> {
        if !m.contains_key(key) {
            self.err(&join(path, key), "required");
        }
        self.number(m, path, key)
    }

    fn positive(&mut self, m: &Map<String, Value>, path: &str, key: &str) -> Option<f64> {
        let v = self.required_number(m, path, key)?;
        if v <= 0.0 {
            self.err(&join(path, key), format!("must be positive, got {v}"));
            return None;
        }
        Some(v)
    }

    fn count(&mut self, m: &Map<String, Value>, path: &str, key: &str) -> Option<u64> {
        let p = join(path, key);
        match m.get(key) {
            None => None,
            Some(v) => match v.as_u64() {
                Some(x) => Some(x),
                None => {
                    self.err(&p, "expected a non-negative integer");
                    None
                }
            },
        }
    }

    fn boolean(&mut self, m: &Map<String, Value>, path: &str, key: &str) -> Option<bool> {
        match m.get(key) {
            None => None,
            Some(Value::Bool(b)) => Some(*b),
            Some(_) => {
                self.err(&join(path, key), "expected a boolean");
                None
            }
        }
    }

    fn numbers(&mut self, m: &Map<String, Value>, path: &str, key: &str) -> Option<Vec<f64>> {
        let p = join(path, key);
        let v = m.get(key)?;
        let arr = match v.as_array() {
            Some(a) => a,
            None => {
                self.err(&p, "expected an array of numbers");
                return None;
            }
        };
        let mut out = Vec::with_capacity(arr.len());
        for (i, x) in arr.iter().enumerate() {
            match x.as_f64() {
                Some(x) if x.is_finite() => out.push(x),
                _ => self.err(&format!("{p}[{i}]"), "expected a finite number"),
            }
        }
        Some(out)
    }

    fn default_used(&mut self, key: &str) {
        self.defaults.push(key.to_string());
    }
}

fn join(path: &str, key: &str) -> String {
    if path.is_empty() {
        key.to_string()
    } else {
        format!("{path}.{key}")
    }
}

const TOP_KEYS: &[&str] = &[
    "command",
    "operator",
    "beta",
    "modes",
    "t_floor",
    "f",
    "times",
    "points",
    "x",
    "eps",
    "mc",
    "ctrw",
    "output_dir",
];

/// Parse and validate a configuration document.
pub fn validate(text: &str) -> Result<RunConfig, Vec<Diagnostic>> {
    let root: Value = serde_json::from_str(text).map_err(|e| {
        vec![Diagnostic {
            path: "$".into(),
            message: format!("malformed JSON: {e}"),
        }]
    })?;
    let mut cx = Ctx {
        diags: Vec::new(),
        defaults: Vec::new(),
    };
    let top = match cx.object(&root, "", TOP_KEYS) {
        Some(m) => m.clone(),
        None => return Err(cx.diags),
    };

    let command = match top.get("command").map(|v| v.as_str()) {
        Some(Some(s)) => match Command::parse(s) {
            Some(c) => Some(c),
            None => {
                let names: Vec<_> = Command::NAMES.iter().map(|(n, _)| *n).collect();
                cx.err(
                    "command",
                    format!("unknown command {s:?}; expected one of {}", names.join(", ")),
                );
                None
            }
        },
        Some(None) => {
            cx.err("command", "expected a string");
            None
        }
        None => {
            cx.err("command", "required");
            None
        }
    };
    let Some(command) = command else {
        return Err(cx.diags);
    };

    // beta
    let beta = cx.number(&top, "", "beta");
    if command.needs_beta() && beta.is_none() && !top.contains_key("beta") {
        cx.err("beta", "required");
    }
    if let Some(b) = beta {
        let ok = if command == Command::Ml {
            b > 0.0 && b <= 1.0
        } else {
            b > 0.0 && b < 1.0
        };
        if !ok {
            let msg = match command {
                Command::Ml => format!("beta must lie in (0,1], got {b}"),
                _ => format!("beta must lie in the open interval (0,1), got {b}"),
            };
            cx.err("beta", msg);
        }
    }

    // operator
    let operator = match top.get("operator") {
        Some(v) => parse_operator(&mut cx, v),
        None => {
            if command.needs_operator() {
                cx.err("operator", "required");
            }
            None
        }
    };

    let modes = match cx.count(&top, "", "modes") {
        Some(0) => {
            cx.err("modes", "must be at least 1");
            DEFAULT_MODES
        }
        Some(n) => n as usize,
        None => {
            if command.needs_operator() {
                cx.default_used("modes");
            }
            DEFAULT_MODES
        }
    };

    let t_floor = match cx.number(&top, "", "t_floor") {
        Some(v) if v > 0.0 => v,
        Some(v) => {
            cx.err("t_floor", format!("must be positive, got {v}"));
            DEFAULT_T_FLOOR
        }
        None => DEFAULT_T_FLOOR,
    };

    let datum = match top.get("f") {
        Some(v) => parse_datum(&mut cx, v),
        None => {
            if command.needs_datum() {
                cx.err("f", "required");
            }
            None
        }
    };

    let times = cx.numbers(&top, "", "times").unwrap_or_default();
    let points = parse_points(&mut cx, &top);
    if command.needs_grid() {
        if times.is_empty() {
            cx.err("times", "at least one time is required");
        }
        if points.is_empty() {
            cx.err("points", "at least one point is required");
        }
    }
    for (i, &t) in times.iter().enumerate() {
        let strict = matches!(
            command,
            Command::SolveMc | Command::SolveIbm | Command::Verify | Command::Equivalence
        );
        if t < 0.0 || (strict && t == 0.0) {
            cx.err(
                &format!("times[{i}]"),
                if strict {
                    "times must be positive"
                } else {
                    "times must be non-negative"
                },
            );
        }
    }
    if let Some(op) = &operator {
        for (i, p) in points.iter().enumerate() {
            if p.dim() != op.dim() {
                cx.err(
                    &format!("points[{i}]"),
                    format!("expected a {}-dimensional point", op.dim()),
                );
            } else if !in_closure(op, *p) {
                cx.err(&format!("points[{i}]"), "point lies outside the domain");
            } else if command.uses_mc() && !op.contains(*p) {
                cx.err(
                    &format!("points[{i}]"),
                    "Monte Carlo start points must lie strictly inside the domain",
                );
            }
        }
    }

    let x = cx.numbers(&top, "", "x").unwrap_or_default();
    match command {
        Command::Ml => {
            if x.is_empty() {
                cx.err("x", "at least one argument is required");
            }
            for (i, &v) in x.iter().enumerate() {
                if v > 0.0 {
                    cx.err(&format!("x[{i}]"), "only non-positive arguments are supported");
                }
            }
        }
        Command::Density => {
            if x.is_empty() {
                cx.err("x", "at least one argument is required");
            }
            for (i, &v) in x.iter().enumerate() {
                if v <= 0.0 {
                    cx.err(&format!("x[{i}]"), "density arguments must be positive");
                }
            }
            for (i, &t) in times.iter().enumerate() {
                if t <= 0.0 {
                    cx.err(&format!("times[{i}]"), "density times must be positive");
                }
            }
        }
        _ => {}
    }

    let eps = cx.number(&top, "", "eps");
    if let Some(e) = eps {
        if e <= 0.0 {
            cx.err("eps", "must be positive");
        }
    }

    let mc = parse_mc(&mut cx, top.get("mc"), command.uses_mc());
    if let (Some(op), true) = (&operator, mc.two_sided) {
        if !op.is_laplacian() {
            cx.err(
                "mc.two_sided",
                "the two-sided estimator supports Laplacian operators only",
            );
        }
    }
    if command == Command::Equivalence {
        if let Some(op) = &operator {
            if !op.is_laplacian() {
                cx.err("operator", "the equivalence suite needs a Laplacian operator");
            }
        }
    }

    let ctrw = match top.get("ctrw") {
        Some(v) => parse_ctrw(&mut cx, v),
        None => {
            if command == Command::Ctrw {
                cx.err("ctrw", "required");
            }
            None
        }
    };

    let output_dir = match top.get("output_dir") {
        None => None,
        Some(Value::String(s)) => Some(PathBuf::from(s)),
        Some(_) => {
            cx.err("output_dir", "expected a string");
            None
        }
    };

    if let (Some(op), Some(InitialDatum::Mode { n })) = (&operator, &datum) {
        if *n > modes {
            cx.err("f.n", format!("mode {n} exceeds the number of modes {modes}"));
        }
        if let OperatorSpec::DivergenceForm1D(d) = op {
            if modes >= d.grid_points {
                cx.err(
                    "modes",
                    format!("must be below operator.grid_points = {}", d.grid_points),
                );
            }
        }
    }

    if !cx.diags.is_empty() {
        return Err(cx.diags);
    }

    let mut echo = root.clone();
    let o = echo.as_object_mut().expect("validated object");
    if command.needs_operator() {
        o.entry("modes").or_insert(json!(modes));
    }
    o.entry("t_floor").or_insert(json!(t_floor));
    if command.uses_mc() {
        o.insert(
            "mc".into(),
            json!({
                "dt": mc.dt,
                "n_paths": mc.n_paths,
                "bridge_correction": mc.bridge_correction,
                "seed": mc.seed,
                "stream_id": mc.stream_id,
                "two_sided": mc.two_sided,
                "execution": mc.execution,
            }),
        );
    }
    if top.get("t_floor").is_none() {
        cx.default_used("t_floor");
    }

    Ok(RunConfig {
        command,
        operator,
        beta,
        modes,
        t_floor,
        datum,
        times,
        points,
        x,
        eps,
        mc,
        ctrw,
        output_dir,
        echo,
        defaults_applied: cx.defaults,
    })
}

fn in_closure(op: &OperatorSpec, p: Point) -> bool {
    let c = p.coords();
    let (lx, ly) = op.extent();
    let ok_x = (0.0..=lx).contains(&c[0]);
    match ly {
        None => ok_x,
        Some(ly) => ok_x && (0.0..=ly).contains(&c[1]),
    }
}

fn parse_operator(cx: &mut Ctx, v: &Value) -> Option<OperatorSpec> {
    let kind = v.get("kind").and_then(|k| k.as_str()).unwrap_or("");
    let allowed: &[&str] = match kind {
        "interval" => &["kind", "length"],
        "rectangle" => &["kind", "lx", "ly"],
        "divergence_form" => &["kind", "length", "a", "lambda_ell", "lambda_cap", "grid_points"],
        _ => {
            cx.err("operator.kind", "expected one of interval, rectangle, divergence_form");
            return None;
        }
    };
    let m = cx.object(v, "operator", allowed)?;
    match kind {
        "interval" => {
            let l = cx.positive(m, "operator", "length")?;
            OperatorSpec::interval(l).ok()
        }
        "rectangle" => {
            let lx = cx.positive(m, "operator", "lx");
            let ly = cx.positive(m, "operator", "ly");
            OperatorSpec::rectangle(lx?, ly?).ok()
        }
        _ => {
            let length = cx.positive(m, "operator", "length");
            let lambda_ell = cx.positive(m, "operator", "lambda_ell");
            let lambda_cap = cx.positive(m, "operator", "lambda_cap");
            let grid = cx.count(m, "operator", "grid_points");
            if grid.is_none() && !m.contains_key("grid_points") {
                cx.err("operator.grid_points", "required");
            }
            let a = match m.get("a") {
                None => {
                    cx.err("operator.a", "required");
                    None
                }
                Some(av) => parse_coefficient(cx, av),
            };
            let (length, lambda_ell, lambda_cap, grid, a) = (length?, lambda_ell?, lambda_cap?, grid?, a?);
            match OperatorSpec::divergence_form(length, a, lambda_ell, lambda_cap, grid as usize) {
                Ok(op) => Some(op),
                Err(e) => {
                    cx.err("operator", e.to_string());
                    None
                }
            }
        }
    }
}

fn parse_coefficient(cx: &mut Ctx, v: &Value) -> Option<Coefficient> {
    match v.get("kind").and_then(|k| k.as_str()) {
        Some("constant") => {
            let m = cx.object(v, "operator.a", &["kind", "value"])?;
            Some(Coefficient::Constant(cx.required_number(m, "operator.a", "value")?))
        }
        Some("affine") => {
            let m = cx.object(v, "operator.a", &["kind", "a0", "a1"])?;
            let a0 = cx.required_number(m, "operator.a", "a0");
            let a1 = cx.required_number(m, "operator.a", "a1");
            Some(Coefficient::Affine { a0: a0?, a1: a1? })
        }
        _ => {
            cx.err("operator.a.kind", "expected constant or affine");
            None
        }
    }
}

fn parse_datum(cx: &mut Ctx, v: &Value) -> Option<InitialDatum> {
    match v.get("kind").and_then(|k| k.as_str()) {
        Some("mode") => {
            let m = cx.object(v, "f", &["kind", "n"])?;
            match cx.count(m, "f", "n") {
                Some(n) if n >= 1 => Some(InitialDatum::Mode { n: n as usize }),
                _ => {
                    cx.err("f.n", "expected a mode index >= 1");
                    None
                }
            }
        }
        Some("parabola") => {
            cx.object(v, "f", &["kind"])?;
            Some(InitialDatum::Parabola)
        }
        Some("zero") => {
            cx.object(v, "f", &["kind"])?;
            Some(InitialDatum::Zero)
        }
        Some("bump") => {
            let m = cx.object(v, "f", &["kind", "center", "width"])?;
            let center = cx.numbers(m, "f", "center");
            if center.is_none() {
                cx.err("f.center", "required");
            }
            let width = cx.positive(m, "f", "width");
            Some(InitialDatum::Bump {
                center: center?,
                width: width?,
            })
        }
        Some("csv") => {
            let m = cx.object(v, "f", &["kind", "path"])?;
            let path = match m.get("path").and_then(|p| p.as_str()) {
                Some(p) => p.to_string(),
                None => {
                    cx.err("f.path", "required string");
                    return None;
                }
            };
            match read_samples(&path) {
                Ok((x, f)) => Some(InitialDatum::Sampled { x, f }),
                Err(e) => {
                    cx.err("f.path", e);
                    None
                }
            }
        }
        _ => {
            cx.err("f.kind", "expected one of mode, parabola, bump, csv, zero");
            None
        }
    }
}

/// Read a two-column CSV with header `x,f`.
pub fn read_samples(path: &str) -> Result<(Vec<f64>, Vec<f64>), String> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| format!("cannot read {path}: {e}"))?;
    let headers = rdr.headers().map_err(|e| e.to_string())?.clone();
    let ix = headers.iter().position(|h| h.trim() == "x");
    let iff = headers.iter().position(|h| h.trim() == "f");
    let (ix, iff) = match (ix, iff) {
        (Some(a), Some(b)) => (a, b),
        _ => return Err(format!("{path}: expected columns named x and f")),
    };
    let mut xs = Vec::new();
    let mut fs = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| e.to_string())?;
        let parse = |i: usize| -> Result<f64, String> {
            rec.get(i)
                .and_then(|s| s.trim().parse::<f64>().ok())
                .filter(|v| v.is_finite())
                .ok_or_else(|| format!("{path}: row {} has an invalid number", line + 2))
        };
        xs.push(parse(ix)?);
        fs.push(parse(iff)?);
    }
    if xs.len() < 2 || xs.windows(2).any(|w| w[1] <= w[0]) {
        return Err(format!("{path}: need at least two rows with strictly increasing x"));
    }
    Ok((xs, fs))
}

fn parse_points(cx: &mut Ctx, top: &Map<String, Value>) -> Vec<Point> {
    let Some(v) = top.get("points") else {
        return Vec::new();
    };
    let Some(arr) = v.as_array() else {
        cx.err("points", "expected an array");
        return Vec::new();
    };
    let mut out = Vec::with_capacity(arr.len());
    for (i, p) in arr.iter().enumerate() {
        let path = format!("points[{i}]");
        let coords: Option<Vec<f64>> = match p {
            Value::Number(n) => n.as_f64().map(|x| vec![x]),
            Value::Array(a) => a.iter().map(|c| c.as_f64()).collect(),
            _ => None,
        };
        match coords.as_deref() {
            Some([x]) if x.is_finite() => out.push(Point::One(*x)),
            Some([x, y]) if x.is_finite() && y.is_finite() => out.push(Point::Two(*x, *y)),
            _ => cx.err(&path, "expected a number or an array of one or two numbers"),
        }
    }
    out
}

fn parse_mc(cx: &mut Ctx, v: Option<&Value>, used: bool) -> McSettings {
    let mut s = McSettings {
        dt: DEFAULT_DT,
        n_paths: DEFAULT_PATHS,
        bridge_correction: DEFAULT_BRIDGE,
        seed: DEFAULT_SEED,
        stream_id: 0,
        two_sided: false,
        execution: Execution::Parallel,
    };
    let Some(v) = v else {
        if used {
            cx.default_used("mc");
        }
        return s;
    };
    let Some(m) = cx.object(
        v,
        "mc",
        &[
            "dt",
            "n_paths",
            "bridge_correction",
            "seed",
            "stream_id",
            "two_sided",
            "execution",
        ],
    ) else {
        return s;
    };
    match cx.number(m, "mc", "dt") {
        Some(dt) if dt > 0.0 => s.dt = dt,
        Some(dt) => cx.err("mc.dt", format!("time step must be positive, got {dt}")),
        None if !m.contains_key("dt") => cx.default_used("mc.dt"),
        None => {}
    }
    match cx.count(m, "mc", "n_paths") {
        Some(0) => cx.err("mc.n_paths", "must be at least 1"),
        Some(n) => s.n_paths = n as usize,
        None if !m.contains_key("n_paths") => cx.default_used("mc.n_paths"),
        None => {}
    }
    match cx.boolean(m, "mc", "bridge_correction") {
        Some(b) => s.bridge_correction = b,
        None if !m.contains_key("bridge_correction") => cx.default_used("mc.bridge_correction"),
        None => {}
    }
    match cx.count(m, "mc", "seed") {
        Some(x) => s.seed = x,
        None if !m.contains_key("seed") => cx.default_used("mc.seed"),
        None => {}
    }
    if let Some(x) = cx.count(m, "mc", "stream_id") {
        s.stream_id = x;
    }
    if let Some(b) = cx.boolean(m, "mc", "two_sided") {
        s.two_sided = b;
    }
    match m.get("execution").map(|e| e.as_str()) {
        None => {}
        Some(Some("parallel")) => s.execution = Execution::Parallel,
        Some(Some("sequential")) => s.execution = Execution::Sequential,
        Some(_) => cx.err("mc.execution", "expected \"parallel\" or \"sequential\""),
    }
    s
}

fn parse_ctrw(cx: &mut Ctx, v: &Value) -> Option<CtrwSettings> {
    let m = cx.object(v, "ctrw", &["scale_c", "horizon_t", "n_walkers"])?;
    let scale_c = match cx.number(m, "ctrw", "scale_c") {
        Some(c) if c > 1.0 => Some(c),
        Some(c) => {
            cx.err("ctrw.scale_c", format!("must exceed 1, got {c}"));
            None
        }
        None if !m.contains_key("scale_c") => {
            cx.default_used("ctrw.scale_c");
            Some(1e4)
        }
        None => None,
    };
    let horizon_t = match cx.number(m, "ctrw", "horizon_t") {
        Some(t) if t > 0.0 => Some(t),
        Some(t) => {
            cx.err("ctrw.horizon_t", format!("must be positive, got {t}"));
            None
        }
        None if !m.contains_key("horizon_t") => {
            cx.default_used("ctrw.horizon_t");
            Some(1.0)
        }
        None => None,
    };
    let n_walkers = match cx.count(m, "ctrw", "n_walkers") {
        Some(0) => {
            cx.err("ctrw.n_walkers", "must be at least 1");
            None
        }
        Some(n) => Some(n as usize),
        None if !m.contains_key("n_walkers") => {
            cx.default_used("ctrw.n_walkers");
            Some(DEFAULT_PATHS)
        }
        None => None,
    };
    Some(CtrwSettings {
        scale_c: scale_c?,
        horizon_t: horizon_t?,
        n_walkers: n_walkers?,
    })
}
