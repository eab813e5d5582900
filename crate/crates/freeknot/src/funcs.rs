//! Uniform sampling grids and the built-in benchmark functions.
//!
//! A [`Grid`] is a uniform discretization of a closed interval `[c, d]` with
//! step `h`; the final point is always snapped to `d` exactly, so the last
//! step may differ from `h` when `(d - c) / h` is not an integer. A
//! [`SampledFunction`] pairs a grid with one function value per grid point.
//! Data can come from the built-in benchmarks ([`BenchmarkId`]), from an
//! arbitrary evaluator, or from CSV with header `t,f`.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

/// Relative tolerance for the uniform-step invariant on interior steps.
const STEP_TOL: f64 = 1e-12;

/// Errors produced while building grids or sampling functions.
#[derive(Debug, Clone, PartialEq)]
pub enum FuncsError {
    /// Interval bounds are not finite or not ordered `c < d`.
    BadInterval { c: f64, d: f64 },
    /// Step is not finite, not positive, or larger than the interval.
    BadStep { h: f64, span: f64 },
    /// An evaluator returned a non-finite value at a grid point.
    NonFiniteValue { t: f64 },
    /// Unknown benchmark identifier.
    UnknownBenchmark(String),
    /// CSV text could not be parsed.
    Csv(String),
    /// File I/O failure, with context.
    Io(String),
}

impl fmt::Display for FuncsError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FuncsError::BadInterval { c, d } => {
                write!(f, "invalid interval: need finite c < d, got [{c}, {d}]")
            }
            FuncsError::BadStep { h, span } => {
                write!(f, "invalid step {h}: need 0 < h <= interval span {span}")
            }
            FuncsError::NonFiniteValue { t } => {
                write!(f, "function value at t = {t} is not finite")
            }
            FuncsError::UnknownBenchmark(s) => {
                write!(f, "unknown benchmark id {s:?} (expected f1..f5)")
            }
            FuncsError::Csv(msg) => write!(f, "CSV parse error: {msg}"),
            FuncsError::Io(msg) => write!(f, "I/O error: {msg}"),
        }
    }
}

impl std::error::Error for FuncsError {}

/// A uniform grid `t_0 = c < t_1 < … < t_{N-1} = d` with nominal step `h`.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    c: f64,
    d: f64,
    h: f64,
    points: Vec<f64>,
}

impl Grid {
    /// Left endpoint `c`.
    pub fn c(&self) -> f64 {
        self.c
    }

    /// Right endpoint `d`.
    pub fn d(&self) -> f64 {
        self.d
    }

    /// Nominal step `h`.
    pub fn h(&self) -> f64 {
        self.h
    }

    /// Number of grid points.
    pub fn n(&self) -> usize {
        self.points.len()
    }

    /// All grid points, ascending.
    pub fn points(&self) -> &[f64] {
        &self.points
    }

    /// The `j`-th grid point.
    pub fn t(&self, j: usize) -> f64 {
        self.points[j]
    }
}

/// Builds a uniform grid over `[c, d]` with step `h`.
///
/// Points are `t_j = c + j·h` computed independently per index; the last
/// point is snapped to `d` exactly even when `(d - c) / h` is inexact, so
/// the final step may differ from `h`. The point count is
/// `round((d - c) / h) + 1`.
pub fn make_grid(c: f64, d: f64, h: f64) -> Result<Grid, FuncsError> {
    if !c.is_finite() || !d.is_finite() || c >= d {
        return Err(FuncsError::BadInterval { c, d });
    }
    let span = d - c;
    if !h.is_finite() || h <= 0.0 || h > span {
        return Err(FuncsError::BadStep { h, span });
    }
    let steps = ((d - c) / h).round() as usize;
    let steps = steps.max(1);
    let mut points = Vec::with_capacity(steps + 1);
    for j in 0..steps {
        points.push(c + (j as f64) * h);
    }
    points.push(d);
    // Snapping can only move the last point; all interior steps are exact by
    // construction, which the debug check below confirms.
    debug_assert!(points.windows(2).all(|w| w[1] > w[0]));
    debug_assert!(points
        .windows(2)
        .take(steps.saturating_sub(1))
        .all(|w| (w[1] - w[0] - h).abs() <= STEP_TOL * h.abs().max(1.0)));
    Ok(Grid { c, d, h, points })
}

/// Identifiers for the five built-in benchmark functions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BenchmarkId {
    /// `√|t|` — a symmetric cusp at the origin.
    F1,
    /// `√|t − 0.75|` — the same cusp shifted to 0.75.
    F2,
    /// `sin(2πt)` — one full oscillation per unit.
    F3,
    /// `t³ − 3t² + 2` — a smooth cubic.
    F4,
    /// `1/(t²⁵ + 0.5)` — a sharp near-pole spike around t ≈ −0.973.
    F5,
}

impl BenchmarkId {
    /// All benchmark ids in canonical order.
    pub const ALL: [BenchmarkId; 5] = [
        BenchmarkId::F1,
        BenchmarkId::F2,
        BenchmarkId::F3,
        BenchmarkId::F4,
        BenchmarkId::F5,
    ];

    /// Short text label, e.g. `"f1"`.
    pub fn label(self) -> &'static str {
        match self {
            BenchmarkId::F1 => "f1",
            BenchmarkId::F2 => "f2",
            BenchmarkId::F3 => "f3",
            BenchmarkId::F4 => "f4",
            BenchmarkId::F5 => "f5",
        }
    }

    /// Human-readable formula.
    pub fn formula(self) -> &'static str {
        match self {
            BenchmarkId::F1 => "sqrt(|t|)",
            BenchmarkId::F2 => "sqrt(|t - 0.75|)",
            BenchmarkId::F3 => "sin(2*pi*t)",
            BenchmarkId::F4 => "t^3 - 3*t^2 + 2",
            BenchmarkId::F5 => "1/(t^25 + 0.5)",
        }
    }

    /// Evaluates the benchmark at `t`.
    pub fn eval(self, t: f64) -> f64 {
        match self {
            BenchmarkId::F1 => t.abs().sqrt(),
            BenchmarkId::F2 => (t - 0.75).abs().sqrt(),
            BenchmarkId::F3 => (2.0 * std::f64::consts::PI * t).sin(),
            BenchmarkId::F4 => t.powi(3) - 3.0 * t.powi(2) + 2.0,
            BenchmarkId::F5 => 1.0 / (t.powi(25) + 0.5),
        }
    }

    /// The large constant conventionally used when benchmarking this
    /// function with the mixed-integer models.
    pub fn benchmark_big_m(self) -> f64 {
        match self {
            BenchmarkId::F1 => 300.0,
            BenchmarkId::F2 => 300.0,
            BenchmarkId::F3 => 1e4,
            BenchmarkId::F4 => 1e4,
            BenchmarkId::F5 => 1e5,
        }
    }
}

impl FromStr for BenchmarkId {
    type Err = FuncsError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "f1" => Ok(BenchmarkId::F1),
            "f2" => Ok(BenchmarkId::F2),
            "f3" => Ok(BenchmarkId::F3),
            "f4" => Ok(BenchmarkId::F4),
            "f5" => Ok(BenchmarkId::F5),
            other => Err(FuncsError::UnknownBenchmark(other.to_string())),
        }
    }
}

/// A function sampled on a grid: one finite value per grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledFunction {
    grid: Grid,
    values: Vec<f64>,
    label: String,
}

impl SampledFunction {
    /// The underlying grid.
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// Sampled values, aligned with `grid().points()`.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Text label describing the data source.
    pub fn label(&self) -> &str {
        &self.label
    }

    /// Number of sample points.
    pub fn n(&self) -> usize {
        self.values.len()
    }

    /// The `j`-th sample abscissa.
    pub fn t(&self, j: usize) -> f64 {
        self.grid.t(j)
    }

    /// The `j`-th sample value.
    pub fn f(&self, j: usize) -> f64 {
        self.values[j]
    }

    /// `max f − min f` over the sample.
    pub fn value_range(&self) -> f64 {
        let (lo, hi) = self.value_bounds();
        hi - lo
    }

    /// `(min f, max f)` over the sample.
    pub fn value_bounds(&self) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for &v in &self.values {
            lo = lo.min(v);
            hi = hi.max(v);
        }
        (lo, hi)
    }

    /// Largest absolute sample value.
    pub fn max_abs_value(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Largest absolute abscissa.
    pub fn max_abs_t(&self) -> f64 {
        self.grid
            .points()
            .iter()
            .fold(0.0, |m, t| m.max(t.abs()))
    }

    /// Serializes to CSV with header `t,f` at full float precision.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::with_capacity(self.n() * 48 + 4);
        out.push_str("t,f\n");
        for j in 0..self.n() {
            out.push_str(&format!("{:.16e},{:.16e}\n", self.t(j), self.f(j)));
        }
        out
    }

    /// Writes the CSV form to a file.
    pub fn write_csv(&self, path: &Path) -> Result<(), FuncsError> {
        std::fs::write(path, self.to_csv_string())
            .map_err(|e| FuncsError::Io(format!("writing {}: {e}", path.display())))
    }

    /// Parses CSV with header `t,f`; abscissas must be strictly increasing
    /// and uniformly spaced except possibly the final step.
    pub fn from_csv_str(text: &str, label: &str) -> Result<SampledFunction, FuncsError> {
        let mut lines = text.lines().enumerate();
        let header = loop {
            match lines.next() {
                Some((_, l)) if l.trim().is_empty() => continue,
                Some((_, l)) => break l,
                None => return Err(FuncsError::Csv("empty input".into())),
            }
        };
        let norm: String = header.chars().filter(|c| !c.is_whitespace()).collect();
        if !norm.eq_ignore_ascii_case("t,f") {
            return Err(FuncsError::Csv(format!(
                "expected header \"t,f\", found {header:?}"
            )));
        }
        let mut ts = Vec::new();
        let mut fs = Vec::new();
        for (ln, line) in lines {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let mut cols = line.split(',');
            let (ct, cf) = match (cols.next(), cols.next(), cols.next()) {
                (Some(a), Some(b), None) => (a, b),
                _ => {
                    return Err(FuncsError::Csv(format!(
                        "line {}: expected exactly two comma-separated columns",
                        ln + 1
                    )))
                }
            };
            let t: f64 = ct.trim().parse().map_err(|e| {
                FuncsError::Csv(format!("line {}: bad t value {ct:?}: {e}", ln + 1))
            })?;
            let f: f64 = cf.trim().parse().map_err(|e| {
                FuncsError::Csv(format!("line {}: bad f value {cf:?}: {e}", ln + 1))
            })?;
            if !t.is_finite() {
                return Err(FuncsError::Csv(format!("line {}: non-finite t", ln + 1)));
            }
            if !f.is_finite() {
                return Err(FuncsError::NonFiniteValue { t });
            }
            ts.push(t);
            fs.push(f);
        }
        if ts.len() < 2 {
            return Err(FuncsError::Csv("need at least two data rows".into()));
        }
        if !ts.windows(2).all(|w| w[1] > w[0]) {
            return Err(FuncsError::Csv("t column must be strictly increasing".into()));
        }
        let n = ts.len();
        let c = ts[0];
        let d = ts[n - 1];
        let h = (d - c) / ((n - 1) as f64);
        // All steps except possibly the last must match the average step.
        for w in ts.windows(2).take(n.saturating_sub(2)) {
            if (w[1] - w[0] - h).abs() > 1e-9 * h.abs().max(1.0) {
                return Err(FuncsError::Csv(
                    "t column must be uniformly spaced (except possibly the last step)".into(),
                ));
            }
        }
        Ok(SampledFunction {
            grid: Grid {
                c,
                d,
                h,
                points: ts,
            },
            values: fs,
            label: label.to_string(),
        })
    }

    /// Reads the CSV form from a file.
    pub fn read_csv(path: &Path) -> Result<SampledFunction, FuncsError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| FuncsError::Io(format!("reading {}: {e}", path.display())))?;
        SampledFunction::from_csv_str(&text, &path.display().to_string())
    }
}

/// Samples a built-in benchmark on a grid.
pub fn sample(fid: BenchmarkId, grid: &Grid) -> SampledFunction {
    // Benchmarks are finite on any finite grid, so this cannot fail.
    sample_with(|t| fid.eval(t), grid, fid.label())
        .expect("benchmark functions are finite on finite grids")
}

/// Samples an arbitrary evaluator on a grid, rejecting non-finite values.
pub fn sample_with<F: Fn(f64) -> f64>(
    f: F,
    grid: &Grid,
    label: &str,
) -> Result<SampledFunction, FuncsError> {
    let mut values = Vec::with_capacity(grid.n());
    for &t in grid.points() {
        let v = f(t);
        if !v.is_finite() {
            return Err(FuncsError::NonFiniteValue { t });
        }
        values.push(v);
    }
    Ok(SampledFunction {
        grid: grid.clone(),
        values,
        label: label.to_string(),
    })
}
