//! Mixed-integer models for best uniform approximation by the max or min
//! of two lines.
//!
//! Both models minimize a scalar deviation bound `z` over line coefficients
//! `(a1, b1, a2, b2)`, one auxiliary value per sample point, and one binary
//! indicator per sample point. For each point `t_i` with value `f_i` the
//! max model (combined value `c_i = max` of the two lines) uses the rows
//!
//! ```text
//! f_i − c_i ≤ z            (dev+)
//! c_i − f_i ≤ z            (dev−)
//! a1·t_i + b1 ≤ c_i        (def1)
//! a2·t_i + b2 ≤ c_i        (def2)
//! c_i − (a1·t_i + b1) ≤ M·z_i        (bigM1)
//! c_i − (a2·t_i + b2) ≤ M·(1 − z_i)  (bigM2)
//! ```
//!
//! so that `z_i = 0` pins `c_i` to line 1 and `z_i = 1` pins it to line 2;
//! the binaries select which definition row binds. The min model mirrors
//! the definition rows (`≥`) and pairs its binaries the opposite way
//! (`y_i = 1` pins the point to line 1). Exactly six rows per point, in the
//! fixed order above, so constraint matrices are bit-reproducible.
//!
//! Variable boxes keep every LP relaxation bounded: slopes are capped at
//! `40·range(f)/(d−c)`, intercepts at `10·(max|f| + slope_cap·max|t|)`,
//! point values at the largest magnitude any in-box line can reach, and
//! the deviation bound is non-negative. A solution whose lines approach
//! these caps is not meaningful; the solver audits the caps at its optima.

use std::fmt;

use crate::funcs::SampledFunction;
use crate::lp::{LpProblem, Relation};
use crate::spline::{AffinePiece, OneKnotSpline, SplineKind};

/// Which of the two model shapes a [`MilpModel`] encodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    /// Fit by the pointwise maximum of two lines.
    MaxProblem,
    /// Fit by the pointwise minimum of two lines.
    MinProblem,
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModelKind::MaxProblem => write!(f, "max"),
            ModelKind::MinProblem => write!(f, "min"),
        }
    }
}

/// Roles of the model's columns, for stable index lookup.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarRole {
    Slope1,
    Intercept1,
    Slope2,
    Intercept2,
    /// The scalar deviation bound being minimized.
    Deviation,
    /// The per-point combined value (max or min of the lines).
    PointValue(usize),
    /// The per-point binary indicator.
    Indicator(usize),
}

/// Errors produced while building models or mapping solutions.
#[derive(Debug, Clone, PartialEq)]
pub enum MilpError {
    /// The big-M constant must be positive and finite.
    InvalidBigM(f64),
    /// Models need at least one sample point.
    EmptyData,
    /// Solution mapping requires an optimal solution.
    NotOptimal(MilpStatus),
    /// Solution vector length disagrees with the model.
    ShapeMismatch { expected: usize, got: usize },
}

impl fmt::Display for MilpError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MilpError::InvalidBigM(m) => write!(f, "big-M constant must be positive, got {m}"),
            MilpError::EmptyData => write!(f, "cannot build a model from empty data"),
            MilpError::NotOptimal(s) => {
                write!(f, "operation requires an optimal solution, status is {s:?}")
            }
            MilpError::ShapeMismatch { expected, got } => {
                write!(f, "solution has {got} values, model expects {expected}")
            }
        }
    }
}

impl std::error::Error for MilpError {}

/// Termination status of a mixed-integer solve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum MilpStatus {
    Optimal,
    Infeasible,
    NodeLimit,
    TimeLimit,
}

/// Result of a mixed-integer solve over a [`MilpModel`].
#[derive(Debug, Clone, PartialEq)]
pub struct MilpSolution {
    pub status: MilpStatus,
    /// Objective of the best feasible point found.
    pub objective_value: f64,
    /// Values of the continuous columns, in model column order.
    pub continuous_values: Vec<f64>,
    /// Values of the binary columns, 0 or 1, in point order.
    pub binary_values: Vec<u8>,
    /// Proven optimality gap (objective − best lower bound, clamped at 0).
    pub gap: f64,
}

/// One sparse constraint row: coefficient list, relation, right-hand side.
pub type MilpRow = (Vec<(usize, f64)>, Relation, f64);

/// A fully materialized mixed-integer model for one of the two shapes.
#[derive(Debug, Clone)]
pub struct MilpModel {
    pub kind: ModelKind,
    pub num_continuous: usize,
    pub num_binary: usize,
    /// Sparse minimize objective.
    pub objective: Vec<(usize, f64)>,
    pub constraints: Vec<MilpRow>,
    pub var_names: Vec<String>,
    /// Per-column (lower, upper) bounds; binary columns carry [0, 1].
    pub bounds: Vec<(f64, f64)>,
    pub big_m: f64,
    ts: Vec<f64>,
    fs: Vec<f64>,
}

impl MilpModel {
    /// Column index of a role.
    pub fn column(&self, role: VarRole) -> usize {
        let n = self.num_binary;
        match role {
            VarRole::Slope1 => 0,
            VarRole::Intercept1 => 1,
            VarRole::Slope2 => 2,
            VarRole::Intercept2 => 3,
            VarRole::Deviation => 4,
            VarRole::PointValue(i) => {
                assert!(i < n, "point index {i} out of range {n}");
                5 + i
            }
            VarRole::Indicator(i) => {
                assert!(i < n, "point index {i} out of range {n}");
                5 + n + i
            }
        }
    }

    /// Total column count (continuous then binary).
    pub fn num_columns(&self) -> usize {
        self.num_continuous + self.num_binary
    }

    /// Sample abscissas the model was built from.
    pub fn points(&self) -> &[f64] {
        &self.ts
    }

    /// Sample values the model was built from.
    pub fn values(&self) -> &[f64] {
        &self.fs
    }

    /// The LP relaxation: same columns, rows, bounds and objective, with
    /// binaries relaxed to their [0, 1] boxes.
    pub fn lp_relaxation(&self) -> LpProblem {
        let mut p = LpProblem::new(self.num_columns());
        for (j, &(lo, hi)) in self.bounds.iter().enumerate() {
            p.set_bounds(j, lo, hi);
        }
        p.set_objective(&self.objective);
        for (coeffs, rel, rhs) in &self.constraints {
            p.add_row(coeffs.clone(), *rel, *rhs);
        }
        p
    }

    /// Renders the model in the standard text LP interchange format, with
    /// all numbers at 17 significant digits so they round-trip exactly.
    pub fn to_lp_format(&self) -> String {
        fn num(x: f64) -> String {
            format!("{x:.16e}")
        }
        fn term(coef: f64, name: &str) -> String {
            if coef < 0.0 {
                format!("- {} {}", num(-coef), name)
            } else {
                format!("+ {} {}", num(coef), name)
            }
        }
        let mut out = String::new();
        out.push_str(&format!("\\ {} problem, {} points, M = {}\n", self.kind, self.num_binary, num(self.big_m)));
        out.push_str("Minimize\n obj:");
        for &(j, coef) in &self.objective {
            out.push(' ');
            out.push_str(&term(coef, &self.var_names[j]));
        }
        out.push_str("\nSubject To\n");
        for (i, (coeffs, rel, rhs)) in self.constraints.iter().enumerate() {
            out.push_str(&format!(" r{i}:"));
            for &(j, coef) in coeffs {
                out.push(' ');
                out.push_str(&term(coef, &self.var_names[j]));
            }
            let op = match rel {
                Relation::Le => "<=",
                Relation::Eq => "=",
                Relation::Ge => ">=",
            };
            out.push_str(&format!(" {op} {}\n", num(*rhs)));
        }
        out.push_str("Bounds\n");
        for j in 0..self.num_continuous {
            let (lo, hi) = self.bounds[j];
            let name = &self.var_names[j];
            match (lo.is_finite(), hi.is_finite()) {
                (true, true) => out.push_str(&format!(" {} <= {name} <= {}\n", num(lo), num(hi))),
                (true, false) => out.push_str(&format!(" {name} >= {}\n", num(lo))),
                (false, true) => out.push_str(&format!(" {name} <= {}\n", num(hi))),
                (false, false) => out.push_str(&format!(" {name} free\n")),
            }
        }
        out.push_str("Binaries\n");
        for i in 0..self.num_binary {
            out.push_str(&format!(" {}", self.var_names[self.num_continuous + i]));
        }
        out.push_str("\nEnd\n");
        out
    }
}

/// Slope cap used in the variable boxes: `40·range(f)/(d−c)`.
pub fn slope_cap(data: &SampledFunction) -> f64 {
    let span = data.grid().d() - data.grid().c();
    40.0 * data.value_range() / span
}

/// Intercept cap used in the variable boxes:
/// `10·(max|f| + slope_cap·max|t|)`.
pub fn intercept_cap(data: &SampledFunction) -> f64 {
    10.0 * (data.max_abs_value() + slope_cap(data) * data.max_abs_t())
}

/// A default big-M: `10·(range(f) + slope_cap_unscaled·(d−c))` with the
/// unscaled slope cap `4·range(f)/(d−c)`, floored at 1.
pub fn default_big_m(data: &SampledFunction) -> f64 {
    let range = data.value_range();
    let m = 10.0 * (range + 4.0 * range);
    m.max(1.0)
}

fn build_model(data: &SampledFunction, m: f64, kind: ModelKind) -> Result<MilpModel, MilpError> {
    if data.n() == 0 {
        return Err(MilpError::EmptyData);
    }
    if !m.is_finite() || m <= 0.0 {
        return Err(MilpError::InvalidBigM(m));
    }
    let n = data.n();
    let sc = slope_cap(data);
    let ic = intercept_cap(data);
    let vc = ic + sc * data.max_abs_t();

    let (dev_name, val_prefix, bin_prefix) = match kind {
        ModelKind::MaxProblem => ("z", "c", "z"),
        ModelKind::MinProblem => ("y", "d", "y"),
    };
    let mut var_names = vec![
        "a1".to_string(),
        "b1".to_string(),
        "a2".to_string(),
        "b2".to_string(),
        dev_name.to_string(),
    ];
    for i in 0..n {
        var_names.push(format!("{val_prefix}{}", i + 1));
    }
    for i in 0..n {
        var_names.push(format!("{bin_prefix}{}", i + 1));
    }

    let mut bounds = vec![
        (-sc, sc),
        (-ic, ic),
        (-sc, sc),
        (-ic, ic),
        (0.0, f64::INFINITY),
    ];
    bounds.extend(std::iter::repeat_n((-vc, vc), n));
    bounds.extend(std::iter::repeat_n((0.0, 1.0), n));

    let dev = 4usize;
    let mut constraints = Vec::with_capacity(6 * n);
    for i in 0..n {
        let t = data.t(i);
        let f = data.f(i);
        let val = 5 + i;
        let bin = 5 + n + i;
        // dev+: f − value ≤ z  and  dev−: value − f ≤ z.
        constraints.push((vec![(val, -1.0), (dev, -1.0)], Relation::Le, -f));
        constraints.push((vec![(val, 1.0), (dev, -1.0)], Relation::Le, f));
        match kind {
            ModelKind::MaxProblem => {
                // Lines lie below their max; the binary picks which
                // definition row binds.
                constraints.push((vec![(0, t), (1, 1.0), (val, -1.0)], Relation::Le, 0.0));
                constraints.push((vec![(2, t), (3, 1.0), (val, -1.0)], Relation::Le, 0.0));
                constraints.push((
                    vec![(val, 1.0), (0, -t), (1, -1.0), (bin, -m)],
                    Relation::Le,
                    0.0,
                ));
                constraints.push((
                    vec![(val, 1.0), (2, -t), (3, -1.0), (bin, m)],
                    Relation::Le,
                    m,
                ));
            }
            ModelKind::MinProblem => {
                // Lines lie above their min; y_i = 1 pins line 1.
                constraints.push((vec![(0, t), (1, 1.0), (val, -1.0)], Relation::Ge, 0.0));
                constraints.push((vec![(2, t), (3, 1.0), (val, -1.0)], Relation::Ge, 0.0));
                constraints.push((
                    vec![(0, t), (1, 1.0), (val, -1.0), (bin, m)],
                    Relation::Le,
                    m,
                ));
                constraints.push((
                    vec![(2, t), (3, 1.0), (val, -1.0), (bin, -m)],
                    Relation::Le,
                    0.0,
                ));
            }
        }
    }

    Ok(MilpModel {
        kind,
        num_continuous: n + 5,
        num_binary: n,
        objective: vec![(dev, 1.0)],
        constraints,
        var_names,
        bounds,
        big_m: m,
        ts: data.grid().points().to_vec(),
        fs: data.values().to_vec(),
    })
}

/// Builds the max-of-two-lines model.
pub fn build_max_model(data: &SampledFunction, m: f64) -> Result<MilpModel, MilpError> {
    build_model(data, m, ModelKind::MaxProblem)
}

/// Builds the min-of-two-lines model.
pub fn build_min_model(data: &SampledFunction, m: f64) -> Result<MilpModel, MilpError> {
    build_model(data, m, ModelKind::MinProblem)
}

/// Recovers the fitted spline from an optimal solution: pieces from the
/// four line coefficients, the combination from the model kind, and the
/// knot from the pieces' crossing (absent when it falls outside the data
/// interval or the pieces coincide).
pub fn solution_to_spline(
    model: &MilpModel,
    sol: &MilpSolution,
) -> Result<OneKnotSpline, MilpError> {
    if sol.status != MilpStatus::Optimal {
        return Err(MilpError::NotOptimal(sol.status));
    }
    if sol.continuous_values.len() != model.num_continuous {
        return Err(MilpError::ShapeMismatch {
            expected: model.num_continuous,
            got: sol.continuous_values.len(),
        });
    }
    let p1 = AffinePiece::new(sol.continuous_values[0], sol.continuous_values[1]);
    let p2 = AffinePiece::new(sol.continuous_values[2], sol.continuous_values[3]);
    let combine = match model.kind {
        ModelKind::MaxProblem => SplineKind::MaxOfTwo,
        ModelKind::MinProblem => SplineKind::MinOfTwo,
    };
    let c = model.ts[0];
    let d = model.ts[model.ts.len() - 1];
    Ok(OneKnotSpline::from_lines(p1, p2, combine, c, d))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::funcs::{make_grid, sample_with};

    fn abs_data() -> SampledFunction {
        let g = make_grid(-1.0, 1.0, 1.0).unwrap();
        sample_with(|t| t.abs(), &g, "abs").unwrap()
    }

    #[test]
    fn model_shape_counts() {
        let data = abs_data();
        for build in [build_max_model, build_min_model] {
            let m = build(&data, 10.0).unwrap();
            assert_eq!(m.num_continuous, 8);
            assert_eq!(m.num_binary, 3);
            assert_eq!(m.constraints.len(), 18);
            assert_eq!(m.var_names.len(), 11);
            assert_eq!(m.bounds.len(), 11);
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        let data = abs_data();
        assert!(matches!(
            build_max_model(&data, 0.0),
            Err(MilpError::InvalidBigM(_))
        ));
        assert!(matches!(
            build_min_model(&data, -5.0),
            Err(MilpError::InvalidBigM(_))
        ));
        assert!(matches!(
            build_max_model(&data, f64::INFINITY),
            Err(MilpError::InvalidBigM(_))
        ));
    }

    /// Checks every row of the max model at a known feasible assignment:
    /// f = |t| on {−1, 0, 1} fitted exactly by max(−t, t) with z = 0 and
    /// the binary pattern selecting line 1 on the left of the kink.
    #[test]
    fn max_model_rows_hold_at_exact_fit() {
        let data = abs_data();
        let model = build_max_model(&data, 10.0).unwrap();
        let p = model.lp_relaxation();
        // Columns: a1, b1, a2, b2, z, c1..c3, z1..z3.
        let x = vec![-1.0, 0.0, 1.0, 0.0, 0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 1.0];
        for i in 0..p.num_rows() {
            assert!(
                p.row_violation(i, &x) <= 1e-12,
                "row {i} violated at the exact fit"
            );
        }
    }

    /// Same for the min model: f = −|t| is min(t, −t), and y_i = 1 pins
    /// line 1, so the pattern is 1 on the left block.
    #[test]
    fn min_model_rows_hold_at_exact_fit() {
        let g = make_grid(-1.0, 1.0, 1.0).unwrap();
        let data = sample_with(|t| -t.abs(), &g, "negabs").unwrap();
        let model = build_min_model(&data, 10.0).unwrap();
        let p = model.lp_relaxation();
        let x = vec![1.0, 0.0, -1.0, 0.0, 0.0, -1.0, 0.0, -1.0, 1.0, 1.0, 0.0];
        for i in 0..p.num_rows() {
            assert!(
                p.row_violation(i, &x) <= 1e-12,
                "row {i} violated at the exact fit"
            );
        }
    }

    #[test]
    fn relaxation_bound_is_below_any_feasible_deviation() {
        let g = make_grid(-1.0, 1.0, 0.5).unwrap();
        let data = sample_with(|t| t * t, &g, "sq").unwrap();
        let model = build_max_model(&data, default_big_m(&data)).unwrap();
        let sol = crate::lp::lp_solve(&model.lp_relaxation(), None).unwrap();
        assert_eq!(sol.status, crate::lp::LpStatus::Optimal);
        // max(t, -t) = |t| deviates at most 0.25 from t² on [-1, 1].
        assert!(sol.objective_value <= 0.25 + 1e-9);
        assert!(sol.objective_value >= -1e-9);
    }

    #[test]
    fn default_big_m_examples() {
        let g = make_grid(-1.0, 1.0, 0.5).unwrap();
        let zero = sample_with(|_| 0.0, &g, "zero").unwrap();
        assert_eq!(default_big_m(&zero), 1.0);
        let ident = sample_with(|t| t, &g, "id").unwrap();
        assert_eq!(default_big_m(&ident), 100.0);
    }

    #[test]
    fn lp_format_round_trips_numbers() {
        let data = abs_data();
        let model = build_max_model(&data, 300.0).unwrap();
        let text = model.to_lp_format();
        assert!(text.starts_with("\\ max problem"));
        assert!(text.contains("Minimize"));
        assert!(text.contains("Subject To"));
        assert!(text.contains("Bounds"));
        assert!(text.ends_with("Binaries\n z1 z2 z3\nEnd\n"));
        // Every numeric token must parse back to exactly the f64 written.
        for tok in text
            .split(|ch: char| ch.is_whitespace())
            .filter(|tok| tok.contains('e') && tok.contains('.'))
        {
            let parsed: f64 = tok.parse().expect("numeric token parses");
            assert_eq!(format!("{parsed:.16e}"), *tok);
        }
        // Spot-check that a row mentions the big-M value.
        assert!(text.contains(&format!("{:.16e}", 300.0)));
    }

    #[test]
    fn solution_to_spline_examples() {
        let data = abs_data();
        let model = build_max_model(&data, 10.0).unwrap();
        let sol = MilpSolution {
            status: MilpStatus::Optimal,
            objective_value: 0.125,
            continuous_values: vec![-1.0, 0.125, 1.0, 0.125, 0.125, 1.125, 0.125, 1.125],
            binary_values: vec![0, 1, 1],
            gap: 0.0,
        };
        let s = solution_to_spline(&model, &sol).unwrap();
        assert_eq!(s.kind, SplineKind::MaxOfTwo);
        assert_eq!(s.knot, Some(0.0));

        let ident = MilpSolution {
            status: MilpStatus::Optimal,
            objective_value: 0.0,
            continuous_values: vec![1.0, 0.0, 1.0, 0.0, 0.0, -1.0, 0.0, 1.0],
            binary_values: vec![0, 0, 0],
            gap: 0.0,
        };
        let s = solution_to_spline(&model, &ident).unwrap();
        assert_eq!(s.kind, SplineKind::Single);
        assert_eq!(s.knot, None);

        let bad = MilpSolution {
            status: MilpStatus::NodeLimit,
            ..sol.clone()
        };
        assert!(matches!(
            solution_to_spline(&model, &bad),
            Err(MilpError::NotOptimal(MilpStatus::NodeLimit))
        ));
    }

    #[test]
    fn column_lookup_matches_names() {
        let data = abs_data();
        let model = build_min_model(&data, 10.0).unwrap();
        assert_eq!(model.var_names[model.column(VarRole::Slope1)], "a1");
        assert_eq!(model.var_names[model.column(VarRole::Deviation)], "y");
        assert_eq!(model.var_names[model.column(VarRole::PointValue(2))], "d3");
        assert_eq!(model.var_names[model.column(VarRole::Indicator(0))], "y1");
    }
}
