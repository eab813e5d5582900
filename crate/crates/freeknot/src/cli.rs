//! Command-line interface for the one-knot fitting toolkit.
//!
//! Four subcommands cover the workflow end to end:
//!
//! * `solve` — fit one data set (built-in benchmark or CSV) and write a
//!   JSON report, optionally with figure data.
//! * `bench` — run the five built-in benchmarks with their conventional
//!   big-M constants, write a summary table plus per-function figure CSVs,
//!   and optionally cross-check each optimum against the exhaustive
//!   enumeration oracle.
//! * `train` — train a one-hidden-layer ReLU network on the same data with
//!   ADAM and ADAMAX and report both next to the exact optimum.
//! * `check` — load a fitted spline from JSON and test the sufficient
//!   optimality conditions against a data set.
//!
//! Every option can also come from a flat `key=value` config file
//! (`--config`); explicit flags take precedence over config entries, which
//! take precedence over defaults. Exit codes are the success contract:
//!
//! | code | meaning |
//! |------|---------|
//! | 0    | success (for `check`: sufficient conditions met) |
//! | 1    | runtime error (I/O, solver failure, bad data file) |
//! | 2    | `solve` stopped at a node/time limit, or a `bench` row failed |
//! | 3    | a training run diverged |
//! | 4    | `check` ran but the sufficient conditions are not met |
//! | 64   | usage error (bad flags, bad config values) |
//! | 65   | unreadable or malformed spline file |

use std::collections::HashMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::bnb::{oracle_enumerate, solve_one_knot, BnbOptions, SolveReport};
use crate::cheb::{check_sufficient, DEFAULT_ALT_TOL};
use crate::funcs::{make_grid, sample, BenchmarkId, FuncsError, SampledFunction};
use crate::milp::MilpStatus;
use crate::neural::{
    extract_knots, init_net, train, NeuralError, Optimizer, ReluNet1, TrainConfig,
};
use crate::spline::{
    one_knot_from_json, one_knot_to_json, write_fit_csv, OneKnotSpline, SplineKind,
};

/// Success.
pub const EXIT_OK: i32 = 0;
/// Runtime failure (I/O, solver error, malformed data file).
pub const EXIT_ERROR: i32 = 1;
/// A solve terminated at a node/time limit, or a bench row failed.
pub const EXIT_LIMIT: i32 = 2;
/// A training run diverged.
pub const EXIT_DIVERGED: i32 = 3;
/// `check` completed but the sufficient conditions are not met.
pub const EXIT_NOT_CERTIFIED: i32 = 4;
/// Usage error: bad flags or bad config-file values.
pub const EXIT_USAGE: i32 = 64;
/// Unreadable or malformed spline file.
pub const EXIT_BAD_SPLINE: i32 = 65;

/// Solver and oracle objectives must agree this tightly in `bench --oracle`.
const ORACLE_AGREE_TOL: f64 = 1e-6;

/// Prints a line to stdout, ignoring write failures (e.g. a closed pipe)
/// so that downstream tools like `head` cannot crash a run.
macro_rules! outln {
    ($($arg:tt)*) => {{
        use std::io::Write;
        let _ = writeln!(std::io::stdout(), $($arg)*);
    }};
}

/// Prints to stdout without a trailing newline, ignoring write failures.
macro_rules! outp {
    ($($arg:tt)*) => {{
        use std::io::Write;
        let _ = write!(std::io::stdout(), $($arg)*);
    }};
}

/// Prints a line to stderr, ignoring write failures.
macro_rules! errln {
    ($($arg:tt)*) => {{
        use std::io::Write;
        let _ = writeln!(std::io::stderr(), $($arg)*);
    }};
}

/// Errors that abort a subcommand, each mapped to one exit code.
#[derive(Debug)]
enum CliError {
    /// Bad flags, bad flag combinations, or bad config-file values.
    Usage(String),
    /// The spline file could not be read or parsed.
    BadSplineFile(String),
    /// Any other failure after argument validation.
    Runtime(String),
}

impl CliError {
    fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::BadSplineFile(_) => EXIT_BAD_SPLINE,
            CliError::Runtime(_) => EXIT_ERROR,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(msg) => write!(f, "{msg}"),
            CliError::BadSplineFile(msg) => write!(f, "{msg}"),
            CliError::Runtime(msg) => write!(f, "{msg}"),
        }
    }
}

impl From<crate::bnb::BnbError> for CliError {
    fn from(e: crate::bnb::BnbError) -> CliError {
        CliError::Runtime(format!("solver error: {e}"))
    }
}

impl From<crate::spline::SplineError> for CliError {
    fn from(e: crate::spline::SplineError) -> CliError {
        CliError::Runtime(e.to_string())
    }
}

// ---------------------------------------------------------------------------
// Argument grammar
// ---------------------------------------------------------------------------

#[derive(Debug, Parser)]
#[command(
    name = "freeknot",
    version,
    about = "Exact best uniform (Chebyshev) fit of sampled data by a continuous \
             piecewise-linear function with one free internal knot, with a \
             ReLU-network training baseline."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fit one data set and write report.json (optionally figure data).
    Solve(SolveArgs),
    /// Run the five built-in benchmarks; write table.txt, report.json and
    /// per-function figure CSVs.
    Bench(BenchArgs),
    /// Train a one-hidden-layer ReLU network with ADAM and ADAMAX and
    /// compare against the exact optimum.
    Train(TrainArgs),
    /// Test the sufficient optimality conditions of a stored spline.
    Check(CheckArgs),
}

/// Where the sample data comes from. Exactly one of `--fn`/`--csv`.
#[derive(Debug, Clone, Default, Args)]
struct InputArgs {
    /// Built-in benchmark id: f1..f5 (mutually exclusive with --csv).
    #[arg(long = "fn", value_name = "ID")]
    function: Option<String>,
    /// CSV file with header `t,f` (mutually exclusive with --fn).
    #[arg(long, value_name = "PATH")]
    csv: Option<PathBuf>,
    /// Left endpoint of the sampling interval (--fn only; default -1).
    #[arg(long, value_name = "C")]
    c: Option<f64>,
    /// Right endpoint of the sampling interval (--fn only; default 1).
    #[arg(long, value_name = "D")]
    d: Option<f64>,
    /// Grid step (--fn only; default 1e-3).
    #[arg(long, value_name = "H")]
    h: Option<f64>,
}

/// Knobs of the exact solver.
#[derive(Debug, Clone, Default, Args)]
struct SolverArgs {
    /// Big-M constant. Defaults to the benchmark's conventional value for
    /// --fn input and to an automatic data-scaled value for CSV input.
    #[arg(long = "M", value_name = "VALUE")]
    big_m: Option<f64>,
    /// Absolute optimality gap at which branch-and-bound stops.
    #[arg(long, value_name = "GAP")]
    abs_gap: Option<f64>,
    /// Maximum number of branch-and-bound nodes per model.
    #[arg(long, value_name = "N")]
    node_limit: Option<u64>,
    /// Wall-clock limit in seconds per model.
    #[arg(long, value_name = "SECONDS")]
    time_limit: Option<f64>,
    /// Branching rule: crossover | most-fractional.
    #[arg(long, value_name = "RULE")]
    branching: Option<String>,
    /// Relative tolerance for counting near-extreme residuals (in [0, 0.5)).
    #[arg(long, value_name = "TAU")]
    alt_tol: Option<f64>,
}

/// Options shared by every subcommand.
#[derive(Debug, Clone, Default, Args)]
struct CommonArgs {
    /// Output directory (created if missing; default ".").
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Flat key=value config file; flags override its entries.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
}

#[derive(Debug, Parser)]
struct SolveArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    solver: SolverArgs,
    #[command(flatten)]
    common: CommonArgs,
    /// Also write fig_<name>.csv with columns t,f,s,residual.
    #[arg(long)]
    fig: bool,
}

#[derive(Debug, Parser)]
struct BenchArgs {
    /// Grid step on [-1, 1] (default 1e-3).
    #[arg(long, value_name = "H")]
    h: Option<f64>,
    /// Cross-check every optimum against the exhaustive enumeration oracle.
    #[arg(long)]
    oracle: bool,
    #[command(flatten)]
    solver: SolverArgs,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Debug, Parser)]
struct TrainArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    solver: SolverArgs,
    #[command(flatten)]
    common: CommonArgs,
    /// Optimizer steps. Defaults per benchmark: f1..f3 50, f4 100, f5 300;
    /// CSV input defaults to 50.
    #[arg(long, value_name = "N")]
    epochs: Option<usize>,
    /// RNG seed for weight initialization (default 0).
    #[arg(long, value_name = "SEED")]
    seed: Option<u64>,
    /// Learning rate (default 0.05).
    #[arg(long, value_name = "LR")]
    lr: Option<f64>,
    /// Hidden-layer width (default 1, matching the one-knot model).
    #[arg(long, value_name = "N")]
    hidden: Option<usize>,
}

#[derive(Debug, Parser)]
struct CheckArgs {
    /// Spline JSON file as written in report.json / by the library.
    #[arg(long, value_name = "PATH")]
    spline: Option<PathBuf>,
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    common: CommonArgs,
    /// Relative tolerance for counting near-extreme residuals (in [0, 0.5)).
    #[arg(long, value_name = "TAU")]
    alt_tol: Option<f64>,
}

// ---------------------------------------------------------------------------
// Config file: flat key=value with flag override precedence
// ---------------------------------------------------------------------------

/// Parsed config file. Keys are normalized: trimmed, `-` replaced by `_`,
/// lowercased except the big-M key which canonicalizes to `M`. Lines that
/// are empty or start with `#` are ignored; later duplicates win. Unknown
/// keys are ignored so one file can serve several subcommands.
#[derive(Debug, Default)]
struct FileConfig {
    map: HashMap<String, String>,
}

fn normalize_key(raw: &str) -> String {
    let k = raw.trim().replace('-', "_");
    if k.eq_ignore_ascii_case("m") {
        "M".to_string()
    } else {
        k.to_ascii_lowercase()
    }
}

impl FileConfig {
    fn parse(text: &str, origin: &str) -> Result<FileConfig, CliError> {
        let mut map = HashMap::new();
        for (ln, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(CliError::Usage(format!(
                    "{origin}:{}: expected `key=value`, found {line:?}",
                    ln + 1
                )));
            };
            let key = normalize_key(key);
            if key.is_empty() {
                return Err(CliError::Usage(format!(
                    "{origin}:{}: empty key before `=`",
                    ln + 1
                )));
            }
            map.insert(key, value.trim().to_string());
        }
        Ok(FileConfig { map })
    }

    fn load(path: Option<&Path>) -> Result<FileConfig, CliError> {
        match path {
            None => Ok(FileConfig::default()),
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| {
                    CliError::Usage(format!("cannot read config file {}: {e}", p.display()))
                })?;
                FileConfig::parse(&text, &p.display().to_string())
            }
        }
    }

    /// Flag value if present, else the parsed config entry, else `None`.
    fn merge<T>(&self, flag: Option<T>, key: &str) -> Result<Option<T>, CliError>
    where
        T: FromStr,
        T::Err: fmt::Display,
    {
        if flag.is_some() {
            return Ok(flag);
        }
        match self.map.get(key) {
            None => Ok(None),
            Some(raw) => raw.parse::<T>().map(Some).map_err(|e| {
                CliError::Usage(format!("config key `{key}`: bad value {raw:?}: {e}"))
            }),
        }
    }

    /// Boolean switch: an explicit flag turns it on; otherwise the config
    /// entry decides; otherwise off.
    fn merge_bool(&self, flag: bool, key: &str) -> Result<bool, CliError> {
        if flag {
            return Ok(true);
        }
        match self.map.get(key) {
            None => Ok(false),
            Some(raw) => parse_bool(raw).ok_or_else(|| {
                CliError::Usage(format!(
                    "config key `{key}`: bad boolean {raw:?} (expected true/false/1/0/yes/no/on/off)"
                ))
            }),
        }
    }
}

fn parse_bool(raw: &str) -> Option<bool> {
    match raw.trim().to_ascii_lowercase().as_str() {
        "1" | "true" | "yes" | "on" => Some(true),
        "0" | "false" | "no" | "off" => Some(false),
        _ => None,
    }
}

// ---------------------------------------------------------------------------
// Shared plumbing
// ---------------------------------------------------------------------------

/// A loaded data set plus naming metadata.
struct LoadedInput {
    data: SampledFunction,
    /// Set when the data came from a built-in benchmark.
    fid: Option<BenchmarkId>,
    /// Filesystem-safe stem used in output file names.
    stem: String,
}

fn sanitize_stem(raw: &str) -> String {
    let stem: String = raw
        .chars()
        .map(|ch| {
            if ch.is_ascii_alphanumeric() || ch == '-' || ch == '_' {
                ch
            } else {
                '_'
            }
        })
        .collect();
    if stem.is_empty() {
        "data".to_string()
    } else {
        stem
    }
}

fn load_input(input: &InputArgs, cfg: &FileConfig) -> Result<LoadedInput, CliError> {
    let function: Option<String> = cfg.merge(input.function.clone(), "fn")?;
    let csv: Option<PathBuf> = cfg.merge(input.csv.clone(), "csv")?;
    match (function, csv) {
        (Some(_), Some(_)) => Err(CliError::Usage(
            "--fn and --csv are mutually exclusive; provide exactly one input source".into(),
        )),
        (None, None) => Err(CliError::Usage(
            "no input source: provide --fn <f1..f5> or --csv <path>".into(),
        )),
        (Some(name), None) => {
            let fid: BenchmarkId = name
                .parse()
                .map_err(|e: FuncsError| CliError::Usage(e.to_string()))?;
            let c = cfg.merge(input.c, "c")?.unwrap_or(-1.0);
            let d = cfg.merge(input.d, "d")?.unwrap_or(1.0);
            let h = cfg.merge(input.h, "h")?.unwrap_or(1e-3);
            let grid = make_grid(c, d, h).map_err(|e| CliError::Usage(e.to_string()))?;
            Ok(LoadedInput {
                data: sample(fid, &grid),
                fid: Some(fid),
                stem: fid.label().to_string(),
            })
        }
        (None, Some(path)) => {
            if input.c.is_some() || input.d.is_some() || input.h.is_some() {
                return Err(CliError::Usage(
                    "--c/--d/--h describe the sampling grid for --fn input; with --csv the grid comes from the file".into(),
                ));
            }
            let data = SampledFunction::read_csv(&path)
                .map_err(|e| CliError::Runtime(e.to_string()))?;
            let stem = path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default();
            Ok(LoadedInput {
                data,
                fid: None,
                stem: sanitize_stem(&stem),
            })
        }
    }
}

/// Assembles solver options from flags, config entries, and defaults.
/// `default_m` is used when neither a flag nor a config entry sets `M`.
fn solver_options(
    sa: &SolverArgs,
    cfg: &FileConfig,
    default_m: Option<f64>,
) -> Result<BnbOptions, CliError> {
    let mut opts = BnbOptions {
        m_override: cfg.merge(sa.big_m, "M")?.or(default_m),
        ..BnbOptions::default()
    };
    if let Some(m) = opts.m_override {
        if !m.is_finite() || m <= 0.0 {
            return Err(CliError::Usage(format!("--M must be finite and positive, got {m}")));
        }
    }
    if let Some(g) = cfg.merge(sa.abs_gap, "abs_gap")? {
        if !g.is_finite() || g < 0.0 {
            return Err(CliError::Usage(format!("--abs-gap must be >= 0, got {g}")));
        }
        opts.abs_gap = g;
    }
    if let Some(n) = cfg.merge(sa.node_limit, "node_limit")? {
        if n == 0 {
            return Err(CliError::Usage("--node-limit must be >= 1".into()));
        }
        opts.node_limit = n;
    }
    if let Some(t) = cfg.merge(sa.time_limit, "time_limit")? {
        if !t.is_finite() || t <= 0.0 {
            return Err(CliError::Usage(format!("--time-limit must be positive, got {t}")));
        }
        opts.time_limit = Some(t);
    }
    if let Some(raw) = cfg.merge(sa.branching.clone(), "branching")? {
        opts.branching = raw.parse().map_err(CliError::Usage)?;
    }
    if let Some(tau) = cfg.merge(sa.alt_tol, "alt_tol")? {
        opts.alt_tol = validate_alt_tol(tau)?;
    }
    Ok(opts)
}

fn validate_alt_tol(tau: f64) -> Result<f64, CliError> {
    if tau.is_finite() && (0.0..0.5).contains(&tau) {
        Ok(tau)
    } else {
        Err(CliError::Usage(format!(
            "--alt-tol must lie in [0, 0.5), got {tau}"
        )))
    }
}

/// Resolves and creates the output directory before any solving starts.
fn prepare_out_dir(flag: Option<PathBuf>, cfg: &FileConfig) -> Result<PathBuf, CliError> {
    let dir = cfg
        .merge(flag, "out")?
        .unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&dir).map_err(|e| {
        CliError::Runtime(format!("cannot create output directory {}: {e}", dir.display()))
    })?;
    Ok(dir)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::Runtime(format!("serializing {}: {e}", path.display())))?;
    text.push('\n');
    std::fs::write(path, text)
        .map_err(|e| CliError::Runtime(format!("writing {}: {e}", path.display())))
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text)
        .map_err(|e| CliError::Runtime(format!("writing {}: {e}", path.display())))
}

/// Table label for the shape of a spline: `max`, `min`, or `one piece`.
fn kind_label(kind: SplineKind) -> &'static str {
    match kind {
        SplineKind::Single => "one piece",
        SplineKind::MaxOfTwo => "max",
        SplineKind::MinOfTwo => "min",
    }
}

fn fmt_knot(knot: Option<f64>) -> String {
    match knot {
        Some(theta) => format!("{theta:.6}"),
        None => "-".to_string(),
    }
}

fn status_exit_code(status: MilpStatus) -> i32 {
    match status {
        MilpStatus::Optimal => EXIT_OK,
        MilpStatus::NodeLimit | MilpStatus::TimeLimit => EXIT_LIMIT,
        MilpStatus::Infeasible => EXIT_ERROR,
    }
}

/// Number of bench workers: `jobs` capped by FREEKNOT_THREADS (when set to a
/// positive integer) or by the detected hardware parallelism.
fn cap_workers(jobs: usize, env_value: Option<&str>, hardware: usize) -> usize {
    let cap = env_value
        .and_then(|s| s.trim().parse::<usize>().ok())
        .filter(|&n| n >= 1)
        .unwrap_or_else(|| hardware.max(1));
    jobs.min(cap).max(1)
}

/// Runs `jobs` closures on `workers` threads; results keep job order.
fn run_jobs<T, F>(jobs: usize, workers: usize, job: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync,
{
    let workers = workers.clamp(1, jobs.max(1));
    let next = AtomicUsize::new(0);
    let slots: Vec<Mutex<Option<T>>> = (0..jobs).map(|_| Mutex::new(None)).collect();
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= jobs {
                    break;
                }
                let result = job(i);
                *slots[i].lock().expect("result slot poisoned") = Some(result);
            });
        }
    });
    slots
        .into_iter()
        .map(|slot| {
            slot.into_inner()
                .expect("result slot poisoned")
                .expect("every job index was claimed exactly once")
        })
        .collect()
}

// ---------------------------------------------------------------------------
// solve
// ---------------------------------------------------------------------------

fn cmd_solve(args: SolveArgs) -> Result<i32, CliError> {
    let cfg = FileConfig::load(args.common.config.as_deref())?;
    let input = load_input(&args.input, &cfg)?;
    let default_m = input.fid.map(BenchmarkId::benchmark_big_m);
    let opts = solver_options(&args.solver, &cfg, default_m)?;
    let fig = cfg.merge_bool(args.fig, "fig")?;
    let out_dir = prepare_out_dir(args.common.out.clone(), &cfg)?;

    let report = solve_one_knot(&input.data, &opts)?;

    let report_path = out_dir.join("report.json");
    write_json(&report_path, &report)?;
    let spline_path = out_dir.join("spline.json");
    write_text(
        &spline_path,
        &one_knot_to_json(&report.best_spline, report.interval.0, report.interval.1),
    )?;
    let mut fig_note = String::new();
    if fig {
        let fig_path = out_dir.join(format!("fig_{}.csv", input.stem));
        write_fit_csv(&fig_path, &input.data, &report.best_spline)?;
        fig_note = format!("wrote {}\n", fig_path.display());
    }

    outln!(
        "{}: deviation {}, kind {}, knot {}, winner {}, status {:?}",
        report.label,
        report.objective,
        kind_label(report.best_spline.kind),
        fmt_knot(report.best_spline.knot),
        report.winner,
        report.status,
    );
    outln!(
        "certificate: {} (sufficient conditions {})",
        report.certificate.branch,
        if report.certificate.sufficient_met {
            "met"
        } else {
            "not met"
        }
    );
    outln!(
        "big-M audit: {} (M = {}, margin = {:.3e})",
        if report.big_m_audit.passed { "passed" } else { "FAILED" },
        report.big_m_audit.big_m,
        report.big_m_audit.margin,
    );
    for w in &report.warnings {
        outln!("warning: {w}");
    }
    outln!("wrote {}", report_path.display());
    outln!("wrote {}", spline_path.display());
    outp!("{fig_note}");

    Ok(status_exit_code(report.status))
}

// ---------------------------------------------------------------------------
// bench
// ---------------------------------------------------------------------------

/// One row of the benchmark run, as serialized into report.json.
#[derive(Debug, Serialize)]
struct BenchRow {
    function: String,
    formula: String,
    big_m: f64,
    /// Full solver report; absent when the solve itself errored.
    report: Option<SolveReport>,
    /// Oracle objective, when `--oracle` was given and the oracle ran.
    oracle_objective: Option<f64>,
    /// `|solver − oracle|`, when both objectives exist.
    oracle_gap: Option<f64>,
    passed: bool,
    /// Why the row failed, when it did.
    failure: Option<String>,
}

#[derive(Debug, Serialize)]
struct BenchReport {
    h: f64,
    oracle: bool,
    rows: Vec<BenchRow>,
    wall_time: f64,
}

fn bench_row(
    fid: BenchmarkId,
    data: &SampledFunction,
    opts: &BnbOptions,
    oracle: bool,
) -> BenchRow {
    let big_m = opts
        .m_override
        .expect("bench always fixes the big-M constant");
    let mut row = BenchRow {
        function: fid.label().to_string(),
        formula: fid.formula().to_string(),
        big_m,
        report: None,
        oracle_objective: None,
        oracle_gap: None,
        passed: false,
        failure: None,
    };
    let report = match solve_one_knot(data, opts) {
        Ok(r) => r,
        Err(e) => {
            row.failure = Some(format!("solver error: {e}"));
            return row;
        }
    };
    if report.status != MilpStatus::Optimal {
        row.failure = Some(format!("terminated with status {:?}", report.status));
    }
    if oracle {
        match oracle_enumerate(data, opts) {
            Ok(oracle_report) => {
                let gap = (oracle_report.objective - report.objective).abs();
                row.oracle_objective = Some(oracle_report.objective);
                row.oracle_gap = Some(gap);
                if gap > ORACLE_AGREE_TOL && row.failure.is_none() {
                    row.failure = Some(format!(
                        "oracle objective {} differs from solver objective {} by {gap:.3e}",
                        oracle_report.objective, report.objective
                    ));
                }
            }
            Err(e) => {
                if row.failure.is_none() {
                    row.failure = Some(format!("oracle error: {e}"));
                }
            }
        }
    }
    row.passed = row.failure.is_none();
    row.report = Some(report);
    row
}

fn bench_table(rows: &[BenchRow], oracle: bool) -> String {
    let mut out = String::new();
    let mut header = format!(
        "{:<9} {:<19} {:<9} {:<17} {:<12} {:<10} {:<16} {:<9} {:<8}",
        "function", "formula", "M", "deviation", "knot", "kind", "certificate", "status", "nodes",
    );
    if oracle {
        header.push_str(&format!(" {:<17} {:<6}", "oracle_dev", "agree"));
    }
    header.push_str(&format!(" {:>8}", "time_s"));
    out.push_str(&header);
    out.push('\n');
    out.push_str(&"-".repeat(header.len()));
    out.push('\n');
    for row in rows {
        let mut line = match &row.report {
            Some(r) => format!(
                "{:<9} {:<19} {:<9} {:<17} {:<12} {:<10} {:<16} {:<9} {:<8}",
                row.function,
                row.formula,
                row.big_m,
                format!("{:.9}", r.objective),
                fmt_knot(r.best_spline.knot),
                kind_label(r.best_spline.kind),
                r.certificate.branch.to_string(),
                format!("{:?}", r.status),
                r.nodes,
            ),
            None => format!(
                "{:<9} {:<19} {:<9} {:<17} {:<12} {:<10} {:<16} {:<9} {:<8}",
                row.function, row.formula, row.big_m, "FAILED", "-", "-", "-", "-", "-",
            ),
        };
        if oracle {
            let (dev, agree) = match (row.oracle_objective, row.oracle_gap) {
                (Some(obj), Some(gap)) => (
                    format!("{obj:.9}"),
                    if gap <= ORACLE_AGREE_TOL { "yes" } else { "NO" }.to_string(),
                ),
                _ => ("-".to_string(), "-".to_string()),
            };
            line.push_str(&format!(" {dev:<17} {agree:<6}"));
        }
        let time = match &row.report {
            Some(r) => format!("{:.2}", r.wall_time),
            None => "-".to_string(),
        };
        line.push_str(&format!(" {time:>8}"));
        if let Some(reason) = &row.failure {
            line.push_str(&format!("  !! {reason}"));
        }
        out.push_str(line.trim_end());
        out.push('\n');
    }
    let passed = rows.iter().filter(|r| r.passed).count();
    out.push_str(&format!("rows passed: {passed}/{}\n", rows.len()));
    out
}

fn cmd_bench(args: BenchArgs) -> Result<i32, CliError> {
    let cfg = FileConfig::load(args.common.config.as_deref())?;
    let h = cfg.merge(args.h, "h")?.unwrap_or(1e-3);
    let oracle = cfg.merge_bool(args.oracle, "oracle")?;
    let out_dir = prepare_out_dir(args.common.out.clone(), &cfg)?;
    let grid = make_grid(-1.0, 1.0, h).map_err(|e| CliError::Usage(e.to_string()))?;

    let mut jobs = Vec::with_capacity(BenchmarkId::ALL.len());
    for fid in BenchmarkId::ALL {
        let opts = solver_options(&args.solver, &cfg, Some(fid.benchmark_big_m()))?;
        jobs.push((fid, sample(fid, &grid), opts));
    }

    let workers = cap_workers(
        jobs.len(),
        std::env::var("FREEKNOT_THREADS").ok().as_deref(),
        std::thread::available_parallelism()
            .map(|n| n.get())
            .unwrap_or(1),
    );
    let start = Instant::now();
    let rows = run_jobs(jobs.len(), workers, |i| {
        let (fid, data, opts) = &jobs[i];
        bench_row(*fid, data, opts, oracle)
    });

    for (row, (_, data, _)) in rows.iter().zip(&jobs) {
        if let Some(report) = &row.report {
            let fig_path = out_dir.join(format!("fig_{}.csv", row.function));
            write_fit_csv(&fig_path, data, &report.best_spline)?;
        }
    }

    let table = bench_table(&rows, oracle);
    write_text(&out_dir.join("table.txt"), &table)?;
    let bench_report = BenchReport {
        h,
        oracle,
        rows,
        wall_time: start.elapsed().as_secs_f64(),
    };
    write_json(&out_dir.join("report.json"), &bench_report)?;

    outp!("{table}");
    outln!("wrote {}", out_dir.join("table.txt").display());
    outln!("wrote {}", out_dir.join("report.json").display());

    if bench_report.rows.iter().all(|r| r.passed) {
        Ok(EXIT_OK)
    } else {
        Ok(EXIT_LIMIT)
    }
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

/// Exact-solver row of the training comparison.
#[derive(Debug, Serialize)]
struct ExactRow {
    objective: f64,
    kind: String,
    knot: Option<f64>,
    status: MilpStatus,
    wall_time: f64,
}

/// One trained-network row of the comparison.
#[derive(Debug, Serialize)]
struct TrainRun {
    optimizer: String,
    /// Final uniform loss; absent when the run diverged.
    final_loss: Option<f64>,
    /// Interior knots of the trained network.
    knots: Vec<f64>,
    wall_time: f64,
    /// Epoch at which training diverged, when it did.
    diverged_at: Option<usize>,
    /// Trained weights; absent when the run diverged.
    net: Option<ReluNet1>,
}

#[derive(Debug, Serialize)]
struct TrainReport {
    label: String,
    interval: (f64, f64),
    hidden: usize,
    seed: u64,
    epochs: usize,
    learning_rate: f64,
    exact: ExactRow,
    runs: Vec<TrainRun>,
}

fn train_table(report: &TrainReport) -> String {
    let mut out = format!(
        "{:<9} {:<18} {:<24} {:>8}\n",
        "method", "deviation", "knot(s)", "time_s"
    );
    out.push_str(&"-".repeat(62));
    out.push('\n');
    out.push_str(&format!(
        "{:<9} {:<18} {:<24} {:>8.2}\n",
        "exact",
        format!("{:.9}", report.exact.objective),
        report
            .exact
            .knot
            .map(|k| format!("{k:.6}"))
            .unwrap_or_else(|| "-".to_string()),
        report.exact.wall_time,
    ));
    for run in &report.runs {
        let dev = match (run.final_loss, run.diverged_at) {
            (Some(loss), _) => format!("{loss:.9}"),
            (None, Some(epoch)) => format!("DIVERGED(epoch {epoch})"),
            (None, None) => "-".to_string(),
        };
        let knots = if run.knots.is_empty() {
            "-".to_string()
        } else {
            run.knots
                .iter()
                .map(|k| format!("{k:.6}"))
                .collect::<Vec<_>>()
                .join(",")
        };
        out.push_str(&format!(
            "{:<9} {:<18} {:<24} {:>8.2}\n",
            run.optimizer, dev, knots, run.wall_time,
        ));
    }
    out
}

fn cmd_train(args: TrainArgs) -> Result<i32, CliError> {
    let cfg = FileConfig::load(args.common.config.as_deref())?;
    let input = load_input(&args.input, &cfg)?;
    let default_m = input.fid.map(BenchmarkId::benchmark_big_m);
    let opts = solver_options(&args.solver, &cfg, default_m)?;
    let out_dir = prepare_out_dir(args.common.out.clone(), &cfg)?;

    let default_epochs = match input.fid {
        Some(BenchmarkId::F4) => 100,
        Some(BenchmarkId::F5) => 300,
        _ => 50,
    };
    let epochs = cfg.merge(args.epochs, "epochs")?.unwrap_or(default_epochs);
    let seed = cfg.merge(args.seed, "seed")?.unwrap_or(0);
    let lr = cfg.merge(args.lr, "lr")?.unwrap_or(0.05);
    let hidden = cfg.merge(args.hidden, "hidden")?.unwrap_or(1);
    if hidden == 0 {
        return Err(CliError::Usage("--hidden must be >= 1".into()));
    }
    if !lr.is_finite() || lr <= 0.0 {
        return Err(CliError::Usage(format!("--lr must be positive, got {lr}")));
    }

    let exact_report = solve_one_knot(&input.data, &opts)?;
    let exact = ExactRow {
        objective: exact_report.objective,
        kind: kind_label(exact_report.best_spline.kind).to_string(),
        knot: exact_report.best_spline.knot,
        status: exact_report.status,
        wall_time: exact_report.wall_time,
    };

    let net0 = init_net(hidden, seed).map_err(|e| CliError::Runtime(e.to_string()))?;
    let (c, d) = (input.data.grid().c(), input.data.grid().d());
    let mut runs = Vec::new();
    let mut diverged = false;
    for optimizer in [Optimizer::Adam, Optimizer::Adamax] {
        let train_cfg = TrainConfig {
            epochs,
            learning_rate: lr,
            seed,
            optimizer,
            ..TrainConfig::default()
        };
        let started = Instant::now();
        match train(&net0, &input.data, &train_cfg) {
            Ok((net, history)) => {
                let history_path = out_dir.join(format!("history_{optimizer}.csv"));
                history
                    .write_csv(&history_path)
                    .map_err(|e| CliError::Runtime(e.to_string()))?;
                runs.push(TrainRun {
                    optimizer: optimizer.to_string(),
                    final_loss: Some(history.final_loss),
                    knots: extract_knots(&net, c, d),
                    wall_time: history.wall_time,
                    diverged_at: None,
                    net: Some(net),
                });
            }
            Err(NeuralError::Divergence { epoch }) => {
                diverged = true;
                runs.push(TrainRun {
                    optimizer: optimizer.to_string(),
                    final_loss: None,
                    knots: Vec::new(),
                    wall_time: started.elapsed().as_secs_f64(),
                    diverged_at: Some(epoch),
                    net: None,
                });
            }
            Err(e) => return Err(CliError::Runtime(e.to_string())),
        }
    }

    let report = TrainReport {
        label: input.data.label().to_string(),
        interval: (c, d),
        hidden,
        seed,
        epochs,
        learning_rate: lr,
        exact,
        runs,
    };
    let table = train_table(&report);
    write_json(&out_dir.join("report.json"), &report)?;
    write_text(&out_dir.join("table.txt"), &table)?;
    outp!("{table}");
    for run in &report.runs {
        if let Some(epoch) = run.diverged_at {
            outln!("training with {} diverged at epoch {epoch}", run.optimizer);
        }
    }
    outln!("wrote {}", out_dir.join("report.json").display());

    Ok(if diverged { EXIT_DIVERGED } else { EXIT_OK })
}

// ---------------------------------------------------------------------------
// check
// ---------------------------------------------------------------------------

fn load_spline_file(path: &Path) -> Result<(OneKnotSpline, (f64, f64)), CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        CliError::BadSplineFile(format!("cannot read spline file {}: {e}", path.display()))
    })?;
    one_knot_from_json(&text).map_err(|e| {
        CliError::BadSplineFile(format!("malformed spline file {}: {e}", path.display()))
    })
}

fn cmd_check(args: CheckArgs) -> Result<i32, CliError> {
    let cfg = FileConfig::load(args.common.config.as_deref())?;
    let spline_path: PathBuf = cfg
        .merge(args.spline.clone(), "spline")?
        .ok_or_else(|| CliError::Usage("missing required --spline <path>".into()))?;
    let tau = match cfg.merge(args.alt_tol, "alt_tol")? {
        Some(t) => validate_alt_tol(t)?,
        None => DEFAULT_ALT_TOL,
    };
    let input = load_input(&args.input, &cfg)?;
    let (spline, _interval) = load_spline_file(&spline_path)?;

    let verdict = check_sufficient(&input.data, &spline, tau);
    let mut text = serde_json::to_string_pretty(&verdict)
        .map_err(|e| CliError::Runtime(format!("serializing verdict: {e}")))?;
    text.push('\n');
    outp!("{text}");
    outln!(
        "sufficient conditions {}: {}",
        if verdict.sufficient_met { "met" } else { "not met" },
        verdict.branch,
    );
    if let Some(out) = args.common.out.clone() {
        let out_dir = prepare_out_dir(Some(out), &cfg)?;
        write_json(&out_dir.join("report.json"), &verdict)?;
    }

    Ok(if verdict.sufficient_met {
        EXIT_OK
    } else {
        EXIT_NOT_CERTIFIED
    })
}

// ---------------------------------------------------------------------------
// entry point
// ---------------------------------------------------------------------------

/// Parses `argv` and runs the selected subcommand, returning the process
/// exit code. The first element of `argv` is the program name.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USAGE,
            };
            let _ = e.print();
            return code;
        }
    };
    let result = match cli.command {
        Command::Solve(args) => cmd_solve(args),
        Command::Bench(args) => cmd_bench(args),
        Command::Train(args) => cmd_train(args),
        Command::Check(args) => cmd_check(args),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            errln!("error: {e}");
            e.exit_code()
        }
    }
}
