//! Config-driven front end: `solve`, `bench` and `verify`.
//!
//! Run configs are TOML:
//!
//! ```toml
//! x0 = "zero"              # or "random:<seed>", or [x0, x1, ...]
//!
//! [problem]
//! kind = "trs"             # trs | feasibility | example-4-3 | counterexample-1d
//! n = 2
//! a = [2.0, 0.0, 0.0, -1.0]  # row-major; or a_file = "a.txt"
//! b = [1.0, 0.0]
//! r = 1.0
//!
//! [solver]                 # every key optional
//! t = 3.5
//! epsilon = 1e-8
//!
//! [output]
//! trace = "trace.csv"
//! report = "summary.json"
//! record_points = true
//! ```
//!
//! Relative paths are resolved against the directory of the file that
//! names them.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::diagnostics::{
    classify_rate, default_descent_tolerance, descent_report_from_records, DescentReport, RateReport,
};
use crate::error::GppaError;
use crate::gallery::{counterexample_1d, example_4_3_fixture, FeasibilityInstance, TrustRegionInstance};
use crate::model::{Point, Problem};
use crate::prox::{Ball, BoxSet, HalfSpace, ParabolaRegion, SetOracle, Singleton, Union};
use crate::solver::{descent_factor, run_gppa, IterationRecord, SolverConfig, Status, Trace};

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_MAX_ITERS: i32 = 2;
pub const EXIT_DESCENT_VIOLATION: i32 = 3;

/// Column header of trace files, before the optional `x_i` columns.
pub const TRACE_HEADER: [&str; 5] = ["k", "f_value", "step_norm", "descent_gap", "criticality_residual"];

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("invalid config: {0}")]
    Config(String),
    #[error(transparent)]
    Solver(#[from] GppaError),
    #[error("trace schema: {0}")]
    Schema(String),
}

pub type CliResult<T> = std::result::Result<T, CliError>;

/// One solver run as written in a config file.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default)]
    pub x0: Option<StartSpec>,
    pub problem: ProblemSpec,
    #[serde(default)]
    pub solver: SolverSpec,
    #[serde(default)]
    pub output: OutputSpec,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum StartSpec {
    Point(Vec<f64>),
    /// `"zero"` or `"random:<seed>"`.
    Preset(String),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", deny_unknown_fields)]
pub enum ProblemSpec {
    #[serde(rename = "trs")]
    TrustRegion {
        n: usize,
        #[serde(default)]
        a: Option<Vec<f64>>,
        #[serde(default)]
        a_file: Option<PathBuf>,
        b: Vec<f64>,
        r: f64,
        #[serde(default)]
        rho: Option<f64>,
    },
    #[serde(rename = "feasibility")]
    Feasibility { n: usize, set_a: SetSpec, set_b: SetSpec },
    #[serde(rename = "example-4-3")]
    Example43 { alpha: f64 },
    #[serde(rename = "counterexample-1d")]
    Counterexample1d {},
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum SetSpec {
    Ball {
        #[serde(default)]
        center: Option<Vec<f64>>,
        radius: f64,
    },
    Halfspace {
        normal: Vec<f64>,
        offset: f64,
    },
    Box {
        lo: Vec<f64>,
        hi: Vec<f64>,
    },
    Parabola {
        alpha: f64,
    },
    Point {
        at: Vec<f64>,
    },
    Union {
        pieces: Vec<SetSpec>,
    },
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSpec {
    pub t: Option<f64>,
    pub epsilon: Option<f64>,
    pub max_iters: Option<usize>,
    pub g1_convex_stepsize: Option<bool>,
    pub descent_tolerance: Option<f64>,
    pub relative_stop: Option<bool>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    pub trace: Option<PathBuf>,
    pub report: Option<PathBuf>,
    #[serde(default)]
    pub record_points: bool,
}

/// A config with every reference resolved, ready to run.
#[derive(Debug, Clone)]
pub struct ResolvedRun {
    pub name: String,
    pub problem: Problem,
    pub x0: Point,
    pub config: SolverConfig,
    pub trace_path: Option<PathBuf>,
    pub report_path: Option<PathBuf>,
}

fn read_to_string(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn write_file(path: &Path, contents: &str) -> CliResult<()> {
    fs::write(path, contents).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn base_dir(path: &Path) -> PathBuf {
    path.parent().map(Path::to_path_buf).unwrap_or_default()
}

pub fn load_run_config(path: &Path) -> CliResult<RunConfig> {
    parse_toml(path, &read_to_string(path)?)
}

/// Deserializes TOML, flattening the error to one line with its position.
fn parse_toml<T: serde::de::DeserializeOwned>(path: &Path, text: &str) -> CliResult<T> {
    toml::from_str(text).map_err(|e| {
        let message = match e.span() {
            Some(span) => {
                let line = text[..span.start.min(text.len())].matches('\n').count() + 1;
                format!("line {line}: {}", e.message().trim())
            }
            None => e.message().trim().to_string(),
        };
        CliError::Parse {
            path: path.to_path_buf(),
            message: message.replace('\n', " "),
        }
    })
}

fn point(values: &[f64], n: usize, what: &str) -> CliResult<Point> {
    if values.len() != n {
        return Err(CliError::Config(format!("{what} has {} entries, expected {n}", values.len())));
    }
    Ok(Point::from_row_slice(values))
}

fn read_matrix_file(path: &Path) -> CliResult<Vec<f64>> {
    let text = read_to_string(path)?;
    text.split(|c: char| c.is_whitespace() || c == ',')
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<f64>().map_err(|e| CliError::Parse {
                path: path.to_path_buf(),
                message: format!("bad number {s:?}: {e}"),
            })
        })
        .collect()
}

fn build_set(spec: &SetSpec, n: usize) -> CliResult<Arc<dyn SetOracle>> {
    Ok(match spec {
        SetSpec::Ball { center, radius } => {
            let c = match center {
                Some(c) => point(c, n, "ball center")?,
                None => Point::zeros(n),
            };
            Arc::new(Ball::new(c, *radius)?)
        }
        SetSpec::Halfspace { normal, offset } => Arc::new(HalfSpace::new(point(normal, n, "halfspace normal")?, *offset)?),
        SetSpec::Box { lo, hi } => Arc::new(BoxSet::new(point(lo, n, "box lo")?, point(hi, n, "box hi")?)?),
        SetSpec::Parabola { alpha } => {
            if n != 2 {
                return Err(CliError::Config("parabola region needs n = 2".into()));
            }
            Arc::new(ParabolaRegion::new(*alpha)?)
        }
        SetSpec::Point { at } => Arc::new(Singleton::new(point(at, n, "point")?)),
        SetSpec::Union { pieces } => {
            let built = pieces.iter().map(|p| build_set(p, n)).collect::<CliResult<Vec<_>>>()?;
            Arc::new(Union::new(built)?)
        }
    })
}

/// Builds the problem and its natural starting point.
fn build_problem(spec: &ProblemSpec, base: &Path) -> CliResult<(Problem, Point)> {
    match spec {
        ProblemSpec::TrustRegion { n, a, a_file, b, r, rho } => {
            let entries = match (a, a_file) {
                (Some(a), None) => a.clone(),
                (None, Some(file)) => read_matrix_file(&base.join(file))?,
                _ => return Err(CliError::Config("trs needs exactly one of `a` or `a_file`".into())),
            };
            if entries.len() != n * n {
                return Err(CliError::Config(format!(
                    "matrix has {} entries, expected n*n = {}",
                    entries.len(),
                    n * n
                )));
            }
            let a = DMatrix::from_row_slice(*n, *n, &entries);
            let inst = TrustRegionInstance::new(a, point(b, *n, "b")?, *r, *rho)?;
            Ok((inst.problem(), Point::zeros(*n)))
        }
        ProblemSpec::Feasibility { n, set_a, set_b } => {
            let inst = FeasibilityInstance::new(build_set(set_a, *n)?, build_set(set_b, *n)?, *n)?;
            let start = inst.set_a().project(&Point::zeros(*n))?;
            Ok((inst.problem(), start))
        }
        ProblemSpec::Example43 { alpha } => {
            let (inst, x_bar) = example_4_3_fixture(*alpha)?;
            Ok((inst.problem(), x_bar))
        }
        ProblemSpec::Counterexample1d {} => Ok((counterexample_1d(), Point::zeros(1))),
    }
}

fn resolve_start(spec: Option<&StartSpec>, problem: &Problem, natural: Point) -> CliResult<Point> {
    let n = problem.dim();
    match spec {
        None => Ok(natural),
        Some(StartSpec::Point(v)) => point(v, n, "x0"),
        Some(StartSpec::Preset(name)) if name == "zero" => Ok(Point::zeros(n)),
        Some(StartSpec::Preset(name)) => {
            let seed = name
                .strip_prefix("random:")
                .and_then(|s| s.parse::<u64>().ok())
                .ok_or_else(|| CliError::Config(format!("unknown x0 preset {name:?}")))?;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let raw = Point::from_fn(n, |_, _| rng.gen_range(-1.0..1.0));
            // prox with t = 1 lands in dom g1
            Ok(problem.g1().prox(&raw, 1.0)?)
        }
    }
}

fn resolve_solver(spec: &SolverSpec, problem: &Problem, record_points: bool) -> SolverConfig {
    let convex = spec.g1_convex_stepsize.unwrap_or(false);
    let mut cfg = if convex {
        SolverConfig::convex_for_problem(problem)
    } else {
        SolverConfig::for_problem(problem)
    };
    if let Some(t) = spec.t {
        cfg.t = t;
    }
    if let Some(eps) = spec.epsilon {
        cfg.epsilon = eps;
    }
    if let Some(m) = spec.max_iters {
        cfg.max_iters = m;
    }
    cfg.descent_tolerance = spec.descent_tolerance;
    cfg.relative_stop = spec.relative_stop.unwrap_or(false);
    cfg.record_full_points = record_points;
    cfg
}

/// Resolves a parsed config; `base` anchors relative paths.
pub fn resolve_run(cfg: &RunConfig, base: &Path, default_name: &str) -> CliResult<ResolvedRun> {
    let (problem, natural) = build_problem(&cfg.problem, base)?;
    let x0 = resolve_start(cfg.x0.as_ref(), &problem, natural)?;
    let config = resolve_solver(&cfg.solver, &problem, cfg.output.record_points);
    config.validate(&problem)?;
    if !problem.in_domain(&x0) {
        return Err(GppaError::NotInDomain.into());
    }
    Ok(ResolvedRun {
        name: cfg.name.clone().unwrap_or_else(|| default_name.to_string()),
        problem,
        x0,
        config,
        trace_path: cfg.output.trace.as_ref().map(|p| base.join(p)),
        report_path: cfg.output.report.as_ref().map(|p| base.join(p)),
    })
}

/// Shortest round-trip decimal.
fn fmt_float(v: f64) -> String {
    if v.is_nan() {
        "NaN".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{v:?}")
    }
}

/// Renders a trace as CSV.
pub fn trace_to_csv(trace: &Trace) -> String {
    let dim = trace
        .records
        .first()
        .and_then(|r| r.x.as_ref())
        .map(|x| x.len());
    let mut out = TRACE_HEADER.join(",");
    if let Some(n) = dim {
        for i in 0..n {
            let _ = write!(out, ",x_{i}");
        }
    }
    out.push('\n');
    for r in &trace.records {
        let _ = write!(
            out,
            "{},{},{},{},{}",
            r.k,
            fmt_float(r.f_value),
            fmt_float(r.step_norm),
            fmt_float(r.descent_gap),
            fmt_float(r.criticality_residual)
        );
        if let Some(x) = &r.x {
            for v in x.iter() {
                out.push(',');
                out.push_str(&fmt_float(*v));
            }
        }
        out.push('\n');
    }
    out
}

/// Parses a trace CSV back into records.
pub fn parse_trace_csv(text: &str) -> CliResult<Vec<IterationRecord>> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header: Vec<&str> = lines
        .next()
        .ok_or_else(|| CliError::Schema("empty file".into()))?
        .split(',')
        .map(str::trim)
        .collect();
    if header.len() < TRACE_HEADER.len() || header[..TRACE_HEADER.len()] != TRACE_HEADER {
        return Err(CliError::Schema(format!(
            "header must start with {}",
            TRACE_HEADER.join(",")
        )));
    }
    let dim = header.len() - TRACE_HEADER.len();
    for (i, name) in header[TRACE_HEADER.len()..].iter().enumerate() {
        if *name != format!("x_{i}") {
            return Err(CliError::Schema(format!("unexpected column {name:?}")));
        }
    }
    let num = |s: &str, line: usize| -> CliResult<f64> {
        s.trim()
            .parse::<f64>()
            .map_err(|_| CliError::Schema(format!("line {line}: bad number {s:?}")))
    };
    let mut records = Vec::new();
    for (i, line) in lines.enumerate() {
        let line_no = i + 2;
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != header.len() {
            return Err(CliError::Schema(format!(
                "line {line_no}: {} fields, expected {}",
                fields.len(),
                header.len()
            )));
        }
        let k = fields[0]
            .trim()
            .parse::<usize>()
            .map_err(|_| CliError::Schema(format!("line {line_no}: bad index {:?}", fields[0])))?;
        let x = if dim > 0 {
            let v = fields[TRACE_HEADER.len()..]
                .iter()
                .map(|s| num(s, line_no))
                .collect::<CliResult<Vec<_>>>()?;
            Some(Point::from_vec(v))
        } else {
            None
        };
        records.push(IterationRecord {
            k,
            f_value: num(fields[1], line_no)?,
            step_norm: num(fields[2], line_no)?,
            descent_gap: num(fields[3], line_no)?,
            criticality_residual: num(fields[4], line_no)?,
            x,
        });
    }
    Ok(records)
}

/// JSON summary written next to the trace.
#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub name: String,
    pub problem: String,
    pub status: Status,
    pub iterations: usize,
    pub final_f: f64,
    pub final_residual: Option<f64>,
    pub final_x: Vec<f64>,
    pub lipschitz: f64,
    pub relaxed_stepsize: bool,
    pub config: SolverConfig,
    pub descent: DescentSummary,
    pub rate: RateReport,
    pub message: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct DescentSummary {
    pub factor: f64,
    pub tolerance: f64,
    pub violations: usize,
    pub min_gap: Option<f64>,
}

impl From<&DescentReport> for DescentSummary {
    fn from(r: &DescentReport) -> Self {
        Self {
            factor: r.factor,
            tolerance: r.tolerance,
            violations: r.violations,
            min_gap: r.min_gap,
        }
    }
}

pub fn summarize(name: &str, trace: &Trace) -> Summary {
    let descent = crate::diagnostics::verify_descent_report(
        trace,
        trace.config_echo.t,
        trace.lipschitz,
        trace.relaxed_stepsize,
    );
    Summary {
        name: name.to_string(),
        problem: trace.problem_name.clone(),
        status: trace.status,
        iterations: trace.iterations(),
        final_f: trace.final_f,
        final_residual: trace.final_residual(),
        final_x: trace.final_x.iter().copied().collect(),
        lipschitz: trace.lipschitz,
        relaxed_stepsize: trace.relaxed_stepsize,
        config: trace.config_echo,
        descent: (&descent).into(),
        rate: classify_rate(trace),
        message: trace.message.clone(),
    }
}

pub fn status_exit_code(status: Status) -> i32 {
    match status {
        Status::Converged => EXIT_OK,
        Status::MaxIters => EXIT_MAX_ITERS,
        Status::DescentViolation => EXIT_DESCENT_VIOLATION,
        Status::OracleError => EXIT_ERROR,
    }
}

/// Result of `solve` on one config.
#[derive(Debug, Clone)]
pub struct SolveOutcome {
    pub trace: Trace,
    pub summary: Summary,
    pub trace_path: PathBuf,
    pub report_path: PathBuf,
}

fn default_output(config_path: &Path, suffix: &str) -> PathBuf {
    let stem = config_path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "run".into());
    base_dir(config_path).join(format!("{stem}{suffix}"))
}

/// Runs one config and writes its trace and summary.
pub fn solve(config_path: &Path) -> CliResult<SolveOutcome> {
    let cfg = load_run_config(config_path)?;
    let stem = config_path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "run".into());
    let run = resolve_run(&cfg, &base_dir(config_path), &stem)?;
    let trace = run_gppa(&run.problem, &run.x0, &run.config)?;
    let summary = summarize(&run.name, &trace);
    let trace_path = run.trace_path.unwrap_or_else(|| default_output(config_path, ".trace.csv"));
    let report_path = run.report_path.unwrap_or_else(|| default_output(config_path, ".summary.json"));
    write_file(&trace_path, &trace_to_csv(&trace))?;
    let json = serde_json::to_string_pretty(&summary).map_err(|e| CliError::Config(e.to_string()))?;
    write_file(&report_path, &(json + "\n"))?;
    Ok(SolveOutcome {
        trace,
        summary,
        trace_path,
        report_path,
    })
}

/// `solve <config>`: 0 converged, 2 max_iters, 3 descent violation, 1 on
/// config or oracle errors.
pub fn cmd_solve(config_path: &Path) -> i32 {
    match solve(config_path) {
        Ok(out) => {
            println!(
                "{}: {} after {} iterations, f = {}",
                out.summary.name,
                out.summary.status.as_str(),
                out.summary.iterations,
                fmt_float(out.summary.final_f)
            );
            if let Some(msg) = &out.summary.message {
                eprintln!("{msg}");
            }
            status_exit_code(out.trace.status)
        }
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_ERROR
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum SuiteEntry {
    Path(PathBuf),
    Inline(Box<RunConfig>),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuiteConfig {
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub threads: Option<usize>,
    pub runs: Vec<SuiteEntry>,
}

/// One row of the bench table.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub index: usize,
    pub name: String,
    pub problem: String,
    pub status: String,
    pub iterations: Option<usize>,
    pub final_f: Option<f64>,
    pub residual: Option<f64>,
    pub regime: Option<String>,
    pub q: Option<f64>,
    pub exponent: Option<f64>,
    pub error: Option<String>,
}

impl BenchRow {
    pub fn succeeded(&self) -> bool {
        self.status == Status::Converged.as_str()
    }
}

pub const BENCH_HEADER: &str = "index,name,problem,status,iterations,final_f,residual,regime,q,exponent,error";

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub fn bench_table(rows: &[BenchRow]) -> String {
    let opt = |v: Option<f64>| v.map(fmt_float).unwrap_or_default();
    let mut out = String::from(BENCH_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{}",
            r.index,
            csv_field(&r.name),
            csv_field(&r.problem),
            r.status,
            r.iterations.map(|v| v.to_string()).unwrap_or_default(),
            opt(r.final_f),
            opt(r.residual),
            r.regime.as_deref().unwrap_or(""),
            opt(r.q),
            opt(r.exponent),
            csv_field(r.error.as_deref().unwrap_or(""))
        );
    }
    out
}

fn bench_one(index: usize, entry: &SuiteEntry, suite_dir: &Path) -> BenchRow {
    let failed = |name: String, e: CliError| BenchRow {
        index,
        name,
        problem: String::new(),
        status: "failed".into(),
        iterations: None,
        final_f: None,
        residual: None,
        regime: None,
        q: None,
        exponent: None,
        error: Some(e.to_string()),
    };
    let (cfg, base, default_name) = match entry {
        SuiteEntry::Path(p) => {
            let path = suite_dir.join(p);
            let name = path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| format!("run{index}"));
            match load_run_config(&path) {
                Ok(cfg) => (cfg, base_dir(&path), name),
                Err(e) => return failed(name, e),
            }
        }
        SuiteEntry::Inline(cfg) => ((**cfg).clone(), suite_dir.to_path_buf(), format!("run{index}")),
    };
    let label = cfg.name.clone().unwrap_or_else(|| default_name.clone());
    let run = match resolve_run(&cfg, &base, &default_name) {
        Ok(r) => r,
        Err(e) => return failed(label, e),
    };
    let trace = match run_gppa(&run.problem, &run.x0, &run.config) {
        Ok(t) => t,
        Err(e) => return failed(label, e.into()),
    };
    let summary = summarize(&run.name, &trace);
    if let Some(path) = &run.trace_path {
        if let Err(e) = write_file(path, &trace_to_csv(&trace)) {
            return failed(label, e);
        }
    }
    if let Some(path) = &run.report_path {
        let json = serde_json::to_string_pretty(&summary).unwrap_or_default() + "\n";
        if let Err(e) = write_file(path, &json) {
            return failed(label, e);
        }
    }
    BenchRow {
        index,
        name: run.name,
        problem: trace.problem_name.clone(),
        status: trace.status.as_str().into(),
        iterations: Some(trace.iterations()),
        final_f: Some(trace.final_f),
        residual: trace.final_residual(),
        regime: Some(summary.rate.regime.as_str().into()),
        q: summary.rate.q,
        exponent: summary.rate.exponent,
        error: summary.message,
    }
}

/// Runs every entry of a suite, in parallel when `threads > 1`. Rows come
/// back in input order.
pub fn bench(suite_path: &Path) -> CliResult<Vec<BenchRow>> {
    let text = read_to_string(suite_path)?;
    let suite: SuiteConfig = parse_toml(suite_path, &text)?;
    let dir = base_dir(suite_path);
    let threads = suite
        .threads
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
        .max(1);

    let mut rows: Vec<Option<BenchRow>> = vec![None; suite.runs.len()];
    let chunk = suite.runs.len().div_ceil(threads).max(1);
    std::thread::scope(|scope| {
        for (c, slots) in rows.chunks_mut(chunk).enumerate() {
            let entries = &suite.runs[c * chunk..];
            let dir = &dir;
            scope.spawn(move || {
                for (i, slot) in slots.iter_mut().enumerate() {
                    *slot = Some(bench_one(c * chunk + i, &entries[i], dir));
                }
            });
        }
    });
    let rows: Vec<BenchRow> = rows.into_iter().map(|r| r.expect("every slot filled")).collect();

    let table = bench_table(&rows);
    if let Some(out) = &suite.output {
        write_file(&dir.join(out), &table)?;
    }
    Ok(rows)
}

/// `bench <suite>`: prints the table; 0 iff every run converged.
pub fn cmd_bench(suite_path: &Path) -> i32 {
    match bench(suite_path) {
        Ok(rows) => {
            print!("{}", bench_table(&rows));
            for r in rows.iter().filter(|r| !r.succeeded()) {
                eprintln!("run {} ({}) {}: {}", r.index, r.name, r.status, r.error.as_deref().unwrap_or(""));
            }
            if rows.iter().all(BenchRow::succeeded) {
                EXIT_OK
            } else {
                EXIT_ERROR
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_ERROR
        }
    }
}

/// Re-checks the descent inequality on a stored trace.
///
/// Gaps between rows are recomputed from the `f_value` column with the
/// given `t` and `L`; the step out of the last row is checked through its
/// stored `descent_gap`.
pub fn verify_trace_file(
    trace_path: &Path,
    t: f64,
    lipschitz: f64,
    convex_g1: bool,
    tolerance: Option<f64>,
) -> CliResult<DescentReport> {
    let records = parse_trace_csv(&read_to_string(trace_path)?)?;
    let first = records
        .first()
        .ok_or_else(|| CliError::Schema("trace has no records".into()))?;
    if !(t > 0.0) || !(lipschitz >= 0.0) {
        return Err(CliError::Config(format!("need t > 0 and L >= 0, got t = {t}, L = {lipschitz}")));
    }
    let tol = tolerance.unwrap_or_else(|| default_descent_tolerance(first.f_value));
    let factor = descent_factor(t, lipschitz, convex_g1);
    let final_gap = records.last().map(|r| r.descent_gap);
    Ok(descent_report_from_records(&records, final_gap, factor, tol))
}

/// `verify <trace> --t <v> --L <v>`: 0 iff no violations, 3 on violations,
/// 1 on unreadable traces.
pub fn cmd_verify(trace_path: &Path, t: f64, lipschitz: f64, convex_g1: bool, tolerance: Option<f64>) -> i32 {
    match verify_trace_file(trace_path, t, lipschitz, convex_g1, tolerance) {
        Ok(report) => {
            println!(
                "steps checked: {}, factor: {}, tolerance: {}, min gap: {}, violations: {}",
                report.gaps.len() + usize::from(report.final_gap.is_some()),
                fmt_float(report.factor),
                fmt_float(report.tolerance),
                report.min_gap.map(fmt_float).unwrap_or_else(|| "-".into()),
                report.violations
            );
            if report.passed() {
                EXIT_OK
            } else {
                eprintln!("descent violated at steps {:?}", report.violating_steps);
                EXIT_DESCENT_VIOLATION
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_ERROR
        }
    }
}
