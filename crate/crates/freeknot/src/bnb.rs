//! Exact branch-and-bound solver for the two one-knot models, plus the
//! end-to-end driver that picks the better shape, canonicalizes the
//! reported fit, audits the big-M constant, and certifies optimality.
//!
//! # Node relaxations
//!
//! Instead of relaxing the full mixed-integer model (with one value and one
//! binary column per sample point), every node works on the five structural
//! variables `(a1, b1, a2, b2, z)` only. Per-point columns are eliminated
//! exactly: for a point fixed to line 1 the projection keeps
//! `z ≥ |f − L1|` and the pattern row `L2 ≤ L1` at that abscissa; a point
//! fixed to line 2 mirrors this; a still-free point keeps `z ≥ L1 − f`,
//! `z ≥ L2 − f` and `z ≥ f − (L1 + L2 + M)/2`, which together with the
//! global rows `|L1 − L2| ≤ M` (affine in `t`, so enforced at the two
//! interval endpoints only) is the exact shadow of relaxing that point's
//! binary to `[0, 1]`. Pattern rows are affine in `t` as well, so each
//! contiguous block of same-status points needs them only at its two end
//! abscissas. Node LPs therefore have five columns and are solved by row
//! generation over the point rows.
//!
//! # Search
//!
//! The default branching works on the crossover index `k`: the candidate
//! fits whose binaries are monotone along the grid, with points `< k` on
//! line 1. Binary patterns that are not monotone force the two lines to
//! agree on a point sandwich and are dominated by the all-one-line leaves,
//! so sweeping `k ∈ {0..N}` is a complete search; a node is an inclusive
//! `k`-range that branches by bisection. The alternative branching fixes
//! one point's binary at a time (most-fractional first) and makes no
//! monotonicity assumption. Node selection is best-bound with
//! deeper-then-newer tie-breaking; every node updates the incumbent by
//! evaluating the true deviation of its LP's lines, which is always
//! feasible. After the search, tie-face leaves are re-enumerated to make
//! the optimum exact and to pick the canonical leaf deterministically.
//!
//! The min-of-two-lines model is solved in a mirrored frame (negated
//! values) with the same max-shape machinery and mapped back at the end.

use serde::Serialize;
use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::fmt;
use std::time::Instant;

use crate::cheb::{best_line_counted, check_sufficient, ChebError, OptimalityVerdict, DEFAULT_ALT_TOL};
use crate::funcs::SampledFunction;
use crate::lp::{solve_row_generation, LpError, LpProblem, LpSolution, LpStatus, Relation};
use crate::milp::{default_big_m, intercept_cap, slope_cap, MilpError, MilpModel, MilpSolution, MilpStatus, ModelKind};
use crate::spline::{AffinePiece, OneKnotSpline, SplineKind};

/// Margin below which the big-M audit flags the constant as too tight.
pub const BIG_M_AUDIT_MARGIN: f64 = 1e-3;

/// Errors of the branch-and-bound layer.
#[derive(Debug)]
pub enum BnbError {
    /// Fits need at least two sample points.
    TooFewPoints(usize),
    /// Node or time limits were so tight that no feasible fit was found.
    NoIncumbent,
    Model(MilpError),
    Lp(LpError),
    Fit(ChebError),
}

impl fmt::Display for BnbError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BnbError::TooFewPoints(n) => write!(f, "need at least 2 points to fit, got {n}"),
            BnbError::NoIncumbent => {
                write!(f, "search limits exhausted before any feasible fit was found")
            }
            BnbError::Model(e) => write!(f, "model error: {e}"),
            BnbError::Lp(e) => write!(f, "linear programming error: {e}"),
            BnbError::Fit(e) => write!(f, "fitting error: {e}"),
        }
    }
}

impl std::error::Error for BnbError {}

impl From<MilpError> for BnbError {
    fn from(e: MilpError) -> BnbError {
        BnbError::Model(e)
    }
}

impl From<LpError> for BnbError {
    fn from(e: LpError) -> BnbError {
        BnbError::Lp(e)
    }
}

impl From<ChebError> for BnbError {
    fn from(e: ChebError) -> BnbError {
        BnbError::Fit(e)
    }
}

/// Branching rule used by the search.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Branching {
    /// Bisect the crossover index range (default; complete because only
    /// monotone binary patterns can be strictly better than one line).
    CrossoverDichotomy,
    /// Fix one binary at a time, most fractional first, ties to the lowest
    /// point index. Makes no structural assumption.
    MostFractional,
}

impl std::str::FromStr for Branching {
    type Err = String;
    fn from_str(s: &str) -> Result<Branching, String> {
        match s.to_ascii_lowercase().as_str() {
            "crossover" | "crossover-dichotomy" | "dichotomy" => Ok(Branching::CrossoverDichotomy),
            "most-fractional" | "mostfractional" | "fractional" => Ok(Branching::MostFractional),
            other => Err(format!(
                "unknown branching rule `{other}` (expected `crossover` or `most-fractional`)"
            )),
        }
    }
}

/// Knobs of the exact search.
#[derive(Debug, Clone)]
pub struct BnbOptions {
    /// Prune nodes whose bound is within this of the incumbent.
    pub abs_gap: f64,
    /// Maximum number of node LPs across a solve.
    pub node_limit: u64,
    /// Wall-clock limit in seconds across a solve.
    pub time_limit: Option<f64>,
    pub branching: Branching,
    /// Big-M constant to use instead of the data-derived default.
    pub m_override: Option<f64>,
    /// Relative tolerance for extreme residuals in the certificate.
    pub alt_tol: f64,
}

impl Default for BnbOptions {
    fn default() -> BnbOptions {
        BnbOptions {
            abs_gap: 1e-7,
            node_limit: 1_000_000,
            time_limit: None,
            branching: Branching::CrossoverDichotomy,
            m_override: None,
            alt_tol: DEFAULT_ALT_TOL,
        }
    }
}

/// Which model won the head-to-head comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Winner {
    #[serde(rename = "max")]
    MaxProblem,
    #[serde(rename = "min")]
    MinProblem,
    #[serde(rename = "tie")]
    Tie,
}

impl fmt::Display for Winner {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Winner::MaxProblem => write!(f, "max"),
            Winner::MinProblem => write!(f, "min"),
            Winner::Tie => write!(f, "tie"),
        }
    }
}

/// Result of checking the big-M constant against a fitted pair of lines:
/// the constant must exceed the largest inter-line gap over the grid by a
/// clear margin, otherwise the indicator constraints may have clipped the
/// solution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BigMAudit {
    /// The constant that was used.
    pub big_m: f64,
    /// Largest `|L1 − L2|` over the sample abscissas.
    pub max_line_gap: f64,
    /// `big_m − max_line_gap`.
    pub margin: f64,
    /// True when the margin clears [`BIG_M_AUDIT_MARGIN`].
    pub passed: bool,
}

/// Full outcome of a one-knot solve.
#[derive(Debug, Clone, Serialize)]
pub struct SolveReport {
    /// Label of the fitted data.
    pub label: String,
    /// Exact best deviation, recomputed from the reported fit.
    pub objective: f64,
    /// Which model attained it (or a tie).
    pub winner: Winner,
    pub best_spline: OneKnotSpline,
    /// Data interval the fit was computed on.
    pub interval: (f64, f64),
    pub certificate: OptimalityVerdict,
    #[serde(rename = "bigM_audit")]
    pub big_m_audit: BigMAudit,
    pub status: MilpStatus,
    /// Residual optimality gap (0 for exact solves).
    pub gap: f64,
    /// Node LPs solved across both models, exactification, and polish.
    pub nodes: u64,
    /// Simplex pivots across every LP touched.
    pub lp_pivots: u64,
    /// Seconds of wall time.
    pub wall_time: f64,
    pub warnings: Vec<String>,
}

fn tie_tolerance(d: f64) -> f64 {
    1e-8 * (1.0 + d.abs())
}

// ---------------------------------------------------------------------------
// Point system: the projected five-variable view of one model.
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum PointStatus {
    OnL1,
    OnL2,
    Free,
}

/// One model's data in the frame where it is a max-shape problem: the
/// min model negates its values and maps back at the end.
struct PointSystem {
    kind: ModelKind,
    ts: Vec<f64>,
    /// Values in the working (max-shape) frame.
    fs: Vec<f64>,
    m: f64,
    slope_cap: f64,
    intercept_cap: f64,
}

/// A search node: either an inclusive crossover-index range or an explicit
/// per-point status assignment.
#[derive(Debug, Clone)]
enum NodeShape {
    Range { klo: usize, khi: usize },
    Statuses(Vec<PointStatus>),
}

impl NodeShape {
    fn status(&self, i: usize) -> PointStatus {
        match self {
            NodeShape::Range { klo, khi } => {
                if i < *klo {
                    PointStatus::OnL1
                } else if i >= *khi {
                    PointStatus::OnL2
                } else {
                    PointStatus::Free
                }
            }
            NodeShape::Statuses(v) => v[i],
        }
    }

    fn is_leaf(&self) -> bool {
        match self {
            NodeShape::Range { klo, khi } => klo == khi,
            NodeShape::Statuses(v) => v.iter().all(|s| *s != PointStatus::Free),
        }
    }
}

/// Counters threaded through every solve.
#[derive(Debug, Clone, Copy, Default)]
struct RunStats {
    nodes: u64,
    pivots: u64,
}

impl PointSystem {
    fn from_data(data: &SampledFunction, kind: ModelKind, m: f64) -> PointSystem {
        let flip = match kind {
            ModelKind::MaxProblem => 1.0,
            ModelKind::MinProblem => -1.0,
        };
        PointSystem {
            kind,
            ts: data.grid().points().to_vec(),
            fs: data.values().iter().map(|f| flip * f).collect(),
            m,
            slope_cap: slope_cap(data),
            intercept_cap: intercept_cap(data),
        }
    }

    fn from_model(model: &MilpModel) -> PointSystem {
        let flip = match model.kind {
            ModelKind::MaxProblem => 1.0,
            ModelKind::MinProblem => -1.0,
        };
        PointSystem {
            kind: model.kind,
            ts: model.points().to_vec(),
            fs: model.values().iter().map(|f| flip * f).collect(),
            m: model.big_m,
            slope_cap: model.bounds[0].1,
            intercept_cap: model.bounds[1].1,
        }
    }

    fn len(&self) -> usize {
        self.ts.len()
    }

    /// The node LP of a shape, plus seed row indices for row generation.
    /// Rows: 4 global gap rows, pattern rows at fixed-block endpoints, then
    /// the per-point deviation rows in point order.
    fn node_problem(&self, shape: &NodeShape) -> (LpProblem, Vec<usize>) {
        let n = self.len();
        let mut p = LpProblem::new(5);
        p.set_bounds(0, -self.slope_cap, self.slope_cap);
        p.set_bounds(1, -self.intercept_cap, self.intercept_cap);
        p.set_bounds(2, -self.slope_cap, self.slope_cap);
        p.set_bounds(3, -self.intercept_cap, self.intercept_cap);
        p.set_bounds(4, 0.0, f64::INFINITY);
        p.set_objective(&[(4, 1.0)]);

        let mut seeds = Vec::new();
        for &t in [self.ts[0], self.ts[n - 1]].iter() {
            seeds.push(p.add_row(
                vec![(0, t), (1, 1.0), (2, -t), (3, -1.0)],
                Relation::Le,
                self.m,
            ));
            seeds.push(p.add_row(
                vec![(2, t), (3, 1.0), (0, -t), (1, -1.0)],
                Relation::Le,
                self.m,
            ));
        }

        // Pattern rows at the end abscissas of each fixed-status block.
        let mut i = 0usize;
        while i < n {
            let s = shape.status(i);
            if s == PointStatus::Free {
                i += 1;
                continue;
            }
            let mut j = i;
            while j + 1 < n && shape.status(j + 1) == s {
                j += 1;
            }
            for &idx in [i, j].iter() {
                if idx != i && idx != j {
                    continue;
                }
                let t = self.ts[idx];
                let row = match s {
                    // Points on line 1 need L2 ≤ L1 there, and vice versa.
                    PointStatus::OnL1 => {
                        p.add_row(vec![(2, t), (3, 1.0), (0, -t), (1, -1.0)], Relation::Le, 0.0)
                    }
                    PointStatus::OnL2 => {
                        p.add_row(vec![(0, t), (1, 1.0), (2, -t), (3, -1.0)], Relation::Le, 0.0)
                    }
                    PointStatus::Free => unreachable!(),
                };
                seeds.push(row);
                if i == j {
                    break;
                }
            }
            i = j + 1;
        }

        for idx in 0..n {
            let t = self.ts[idx];
            let f = self.fs[idx];
            let first = match shape.status(idx) {
                PointStatus::OnL1 => {
                    let r = p.add_row(vec![(0, -t), (1, -1.0), (4, -1.0)], Relation::Le, -f);
                    p.add_row(vec![(0, t), (1, 1.0), (4, -1.0)], Relation::Le, f);
                    r
                }
                PointStatus::OnL2 => {
                    let r = p.add_row(vec![(2, -t), (3, -1.0), (4, -1.0)], Relation::Le, -f);
                    p.add_row(vec![(2, t), (3, 1.0), (4, -1.0)], Relation::Le, f);
                    r
                }
                PointStatus::Free => {
                    let r = p.add_row(vec![(0, t), (1, 1.0), (4, -1.0)], Relation::Le, f);
                    p.add_row(vec![(2, t), (3, 1.0), (4, -1.0)], Relation::Le, f);
                    p.add_row(
                        vec![(0, -0.5 * t), (1, -0.5), (2, -0.5 * t), (3, -0.5), (4, -1.0)],
                        Relation::Le,
                        0.5 * self.m - f,
                    );
                    r
                }
            };
            if idx == 0 || idx == n - 1 {
                seeds.push(first);
                seeds.push(first + 1);
            }
        }
        (p, seeds)
    }

    fn solve_shape(&self, shape: &NodeShape, stats: &mut RunStats) -> Result<LpSolution, BnbError> {
        let (p, seeds) = self.node_problem(shape);
        let sol = solve_row_generation(&p, &seeds)?;
        stats.pivots += sol.pivots;
        Ok(sol)
    }

    /// True deviation of a candidate line pair in the working frame; any
    /// in-box pair obeying the global gap rows is a feasible fit, so this
    /// always yields a valid incumbent.
    fn true_deviation(&self, lines: &[f64; 4]) -> f64 {
        let mut sup: f64 = 0.0;
        for (t, f) in self.ts.iter().zip(&self.fs) {
            let v = (lines[0] * t + lines[1]).max(lines[2] * t + lines[3]);
            sup = sup.max((f - v).abs());
        }
        sup
    }

    /// Largest inter-line gap over the grid; affine in `t`, so the two
    /// end abscissas suffice.
    fn max_line_gap(&self, lines: &[f64; 4]) -> f64 {
        let gap_at = |t: f64| ((lines[0] - lines[2]) * t + (lines[1] - lines[3])).abs();
        gap_at(self.ts[0]).max(gap_at(self.ts[self.len() - 1]))
    }

    fn audit(&self, lines: &[f64; 4]) -> BigMAudit {
        let max_line_gap = self.max_line_gap(lines);
        let margin = self.m - max_line_gap;
        BigMAudit {
            big_m: self.m,
            max_line_gap,
            margin,
            passed: margin > BIG_M_AUDIT_MARGIN,
        }
    }

    /// Feasible interval of one free point's relaxed binary at an LP point.
    fn indicator_interval(&self, i: usize, x: &[f64]) -> (f64, f64) {
        let t = self.ts[i];
        let f = self.fs[i];
        let l1 = x[0] * t + x[1];
        let l2 = x[2] * t + x[3];
        let z = x[4];
        let lo = (0.0_f64).max((f - z - l1) / self.m).max((l2 - l1) / self.m);
        let hi = (1.0_f64).min(1.0 - (f - z - l2) / self.m).min(1.0 - (l1 - l2) / self.m);
        (lo, hi)
    }
}

// ---------------------------------------------------------------------------
// Best-bound branch and bound.
// ---------------------------------------------------------------------------

struct NodeEntry {
    bound: f64,
    depth: u32,
    seq: u64,
    shape: NodeShape,
}

impl PartialEq for NodeEntry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for NodeEntry {}
impl PartialOrd for NodeEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for NodeEntry {
    /// Heap pops its greatest element: prefer the smallest bound, then the
    /// deepest node, then the most recently created.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .bound
            .total_cmp(&self.bound)
            .then(self.depth.cmp(&other.depth))
            .then(self.seq.cmp(&other.seq))
    }
}

struct BnbOutcome {
    /// Incumbent objective (a true deviation) in the working frame.
    value: f64,
    /// Incumbent lines in the working frame.
    lines: [f64; 4],
    status: MilpStatus,
    gap: f64,
}

fn deadline_passed(deadline: Option<Instant>) -> bool {
    deadline.map(|d| Instant::now() >= d).unwrap_or(false)
}

fn branch_and_bound(
    sys: &PointSystem,
    opts: &BnbOptions,
    deadline: Option<Instant>,
    stats: &mut RunStats,
    warnings: &mut Vec<String>,
) -> Result<BnbOutcome, BnbError> {
    let n = sys.len();
    let root = match opts.branching {
        Branching::CrossoverDichotomy => NodeShape::Range { klo: 0, khi: n },
        Branching::MostFractional => NodeShape::Statuses(vec![PointStatus::Free; n]),
    };
    let mut heap: BinaryHeap<NodeEntry> = BinaryHeap::new();
    let mut seq = 0u64;
    heap.push(NodeEntry {
        bound: 0.0,
        depth: 0,
        seq,
        shape: root,
    });

    let mut inc_value = f64::INFINITY;
    let mut inc_lines = [0.0; 4];
    let mut status = MilpStatus::Optimal;
    // Smallest bound at which any subtree was cut off; the global lower
    // bound at termination is the minimum of this and the incumbent.
    let mut frontier_min = f64::INFINITY;
    let mut numeric_warned = false;

    while let Some(entry) = heap.pop() {
        if entry.bound >= inc_value - opts.abs_gap {
            // Best-bound order: every remaining node is at least as bad.
            frontier_min = frontier_min.min(entry.bound);
            break;
        }
        let limit_hit = if stats.nodes >= opts.node_limit {
            Some(MilpStatus::NodeLimit)
        } else if deadline_passed(deadline) {
            Some(MilpStatus::TimeLimit)
        } else {
            None
        };
        if let Some(s) = limit_hit {
            if inc_value.is_finite() {
                status = s;
                frontier_min = frontier_min.min(entry.bound);
                break;
            }
            // No feasible fit harvested yet: evaluate this one node so the
            // limit still yields an incumbent, then stop.
        }
        stats.nodes += 1;

        let sol = sys.solve_shape(&entry.shape, stats)?;
        match sol.status {
            LpStatus::Optimal => {}
            LpStatus::Infeasible => {
                // Mathematically impossible here; treat as numerics.
                if !numeric_warned {
                    warnings.push(format!(
                        "{} model: a node relaxation reported infeasible; its subtree was dropped",
                        sys.kind
                    ));
                    numeric_warned = true;
                }
                continue;
            }
            LpStatus::Unbounded => {
                return Err(BnbError::Lp(LpError::Numeric(
                    "node relaxation reported unbounded, but the deviation is bounded below".into(),
                )));
            }
        }
        let obj = sol.objective_value;
        let lines = [sol.x[0], sol.x[1], sol.x[2], sol.x[3]];
        let sup = sys.true_deviation(&lines);
        if sup < inc_value {
            inc_value = sup;
            inc_lines = lines;
        }
        if let Some(s) = limit_hit {
            status = s;
            frontier_min = frontier_min.min(obj);
            break;
        }
        if obj >= inc_value - opts.abs_gap {
            frontier_min = frontier_min.min(obj);
            continue;
        }
        if entry.shape.is_leaf() {
            // Exact leaf value; the incumbent update above already saw it.
            continue;
        }
        match &entry.shape {
            NodeShape::Range { klo, khi } => {
                let mid = (klo + khi) / 2;
                for (lo, hi) in [(*klo, mid), (mid + 1, *khi)] {
                    seq += 1;
                    heap.push(NodeEntry {
                        bound: obj,
                        depth: entry.depth + 1,
                        seq,
                        shape: NodeShape::Range { klo: lo, khi: hi },
                    });
                }
            }
            NodeShape::Statuses(statuses) => {
                let mut pick = None;
                let mut best_frac = -1.0;
                for (i, status) in statuses.iter().enumerate() {
                    if *status != PointStatus::Free {
                        continue;
                    }
                    let (lo, hi) = sys.indicator_interval(i, &sol.x);
                    let zhat = (0.5 * (lo + hi)).clamp(0.0, 1.0);
                    let frac = 0.5 - (zhat - 0.5).abs();
                    if frac > best_frac {
                        best_frac = frac;
                        pick = Some(i);
                    }
                }
                let i = pick.expect("non-leaf status node has a free point");
                for fixed in [PointStatus::OnL1, PointStatus::OnL2] {
                    let mut child = statuses.clone();
                    child[i] = fixed;
                    seq += 1;
                    heap.push(NodeEntry {
                        bound: obj,
                        depth: entry.depth + 1,
                        seq,
                        shape: NodeShape::Statuses(child),
                    });
                }
            }
        }
    }

    if !inc_value.is_finite() {
        return Err(BnbError::NoIncumbent);
    }
    for rest in heap.iter() {
        frontier_min = frontier_min.min(rest.bound);
    }
    let bound = frontier_min.min(inc_value);
    Ok(BnbOutcome {
        value: inc_value,
        lines: inc_lines,
        status,
        gap: (inc_value - bound).max(0.0),
    })
}

// ---------------------------------------------------------------------------
// Exactification and canonical leaf selection over the tie face.
// ---------------------------------------------------------------------------

struct LeafFit {
    k: usize,
    objective: f64,
    lines: [f64; 4],
}

/// Exact minimum over all crossover leaves whose value can be at most
/// `threshold`, by depth-first descent with bound pruning. Complete as long
/// as `threshold` is at least the true optimum. `None` when the node budget
/// ran out.
fn exact_min_descent(
    sys: &PointSystem,
    threshold: f64,
    budget: u64,
    stats: &mut RunStats,
) -> Result<Option<LeafFit>, BnbError> {
    let n = sys.len();
    let mut stack = vec![NodeShape::Range { klo: 0, khi: n }];
    let mut best: Option<LeafFit> = None;
    let mut used = 0u64;
    while let Some(shape) = stack.pop() {
        if used >= budget {
            return Ok(None);
        }
        used += 1;
        stats.nodes += 1;
        let sol = sys.solve_shape(&shape, stats)?;
        if sol.status != LpStatus::Optimal {
            continue;
        }
        if sol.objective_value > threshold {
            continue;
        }
        let NodeShape::Range { klo, khi } = shape else {
            unreachable!()
        };
        if klo == khi {
            let better = best
                .as_ref()
                .map(|b| sol.objective_value < b.objective)
                .unwrap_or(true);
            if better {
                best = Some(LeafFit {
                    k: klo,
                    objective: sol.objective_value,
                    lines: [sol.x[0], sol.x[1], sol.x[2], sol.x[3]],
                });
            }
            continue;
        }
        let mid = (klo + khi) / 2;
        // Left range last so it pops first: leaves are visited in
        // ascending k order, making tie-breaks deterministic.
        stack.push(NodeShape::Range { klo: mid + 1, khi });
        stack.push(NodeShape::Range { klo, khi: mid });
    }
    Ok(best)
}

/// First leaf (in ascending or descending `k` order) whose exact value is
/// at most `threshold`. `None` when the budget ran out.
fn extreme_face_leaf(
    sys: &PointSystem,
    threshold: f64,
    prefer_small_k: bool,
    budget: u64,
    stats: &mut RunStats,
) -> Result<Option<LeafFit>, BnbError> {
    let n = sys.len();
    let mut stack = vec![NodeShape::Range { klo: 0, khi: n }];
    let mut used = 0u64;
    while let Some(shape) = stack.pop() {
        if used >= budget {
            return Ok(None);
        }
        used += 1;
        stats.nodes += 1;
        let sol = sys.solve_shape(&shape, stats)?;
        if sol.status != LpStatus::Optimal || sol.objective_value > threshold {
            continue;
        }
        let NodeShape::Range { klo, khi } = shape else {
            unreachable!()
        };
        if klo == khi {
            return Ok(Some(LeafFit {
                k: klo,
                objective: sol.objective_value,
                lines: [sol.x[0], sol.x[1], sol.x[2], sol.x[3]],
            }));
        }
        let mid = (klo + khi) / 2;
        let left = NodeShape::Range { klo, khi: mid };
        let right = NodeShape::Range { klo: mid + 1, khi };
        if prefer_small_k {
            stack.push(right);
            stack.push(left);
        } else {
            stack.push(left);
            stack.push(right);
        }
    }
    Ok(None)
}

/// Exact value of one crossover leaf.
fn leaf_fit(sys: &PointSystem, k: usize, stats: &mut RunStats) -> Result<LeafFit, BnbError> {
    stats.nodes += 1;
    let sol = sys.solve_shape(&NodeShape::Range { klo: k, khi: k }, stats)?;
    if sol.status != LpStatus::Optimal {
        return Err(BnbError::Lp(LpError::Numeric(format!(
            "leaf {k} relaxation unexpectedly reported {:?}",
            sol.status
        ))));
    }
    Ok(LeafFit {
        k,
        objective: sol.objective_value,
        lines: [sol.x[0], sol.x[1], sol.x[2], sol.x[3]],
    })
}

/// Re-solves a leaf with its deviation capped at its optimum and the line
/// heights at the two crossover-adjacent abscissas maximized. Within the
/// leaf's optimal face this pins the fit that touches the data from above
/// at the boundary pair, which fixes the reported knot deterministically.
fn polish_leaf(
    sys: &PointSystem,
    k: usize,
    d_k: f64,
    primary: &LeafFit,
    stats: &mut RunStats,
    warnings: &mut Vec<String>,
) -> Result<[f64; 4], BnbError> {
    let n = sys.len();
    assert!(k >= 1 && k < n, "polish needs an interior crossover");
    let shape = NodeShape::Range { klo: k, khi: k };
    let (mut p, mut seeds) = sys.node_problem(&shape);
    let cap = p.add_row(vec![(4, 1.0)], Relation::Le, d_k + 1e-11 * (1.0 + d_k.abs()));
    seeds.push(cap);
    let (tl, tr) = (sys.ts[k - 1], sys.ts[k]);
    p.set_objective(&[(0, -tl), (1, -1.0), (2, -tr), (3, -1.0)]);
    stats.nodes += 1;
    let sol = solve_row_generation(&p, &seeds)?;
    stats.pivots += sol.pivots;
    if sol.status == LpStatus::Optimal {
        let lines = [sol.x[0], sol.x[1], sol.x[2], sol.x[3]];
        let sup = sys.true_deviation(&lines);
        if sup <= d_k + 1e-6 * (1.0 + d_k.abs()) {
            return Ok(lines);
        }
    }
    warnings.push(format!(
        "{} model: polish of leaf {k} was rejected; reporting the un-polished fit",
        sys.kind
    ));
    Ok(primary.lines)
}

/// Maps working-frame lines back to the model's own frame.
fn lines_to_pieces(kind: ModelKind, lines: &[f64; 4]) -> (AffinePiece, AffinePiece) {
    match kind {
        ModelKind::MaxProblem => (
            AffinePiece::new(lines[0], lines[1]),
            AffinePiece::new(lines[2], lines[3]),
        ),
        ModelKind::MinProblem => (
            AffinePiece::new(-lines[0], -lines[1]),
            AffinePiece::new(-lines[2], -lines[3]),
        ),
    }
}

fn combine_kind(kind: ModelKind) -> SplineKind {
    match kind {
        ModelKind::MaxProblem => SplineKind::MaxOfTwo,
        ModelKind::MinProblem => SplineKind::MinOfTwo,
    }
}

/// Deviation of a spline over sampled data.
fn spline_deviation(data: &SampledFunction, s: &OneKnotSpline) -> f64 {
    (0..data.n()).fold(0.0_f64, |sup, j| {
        sup.max((data.f(j) - s.eval(data.t(j))).abs())
    })
}

// ---------------------------------------------------------------------------
// Public solves.
// ---------------------------------------------------------------------------

/// Exact solve of one mixed-integer model.
///
/// Runs branch and bound in the model's working frame, then makes the
/// optimum exact by enumerating the leaves of the residual tie face. The
/// returned solution is feasible for the full model: point values are the
/// fitted combination at each abscissa and binaries are read off the line
/// ordering.
pub fn solve_milp(model: &MilpModel, opts: &BnbOptions) -> Result<MilpSolution, BnbError> {
    let sys = PointSystem::from_model(model);
    if sys.len() < 2 {
        return Err(BnbError::TooFewPoints(sys.len()));
    }
    let deadline = opts.time_limit.map(|s| Instant::now() + std::time::Duration::from_secs_f64(s));
    let mut stats = RunStats::default();
    let mut warnings = Vec::new();
    let bb = branch_and_bound(&sys, opts, deadline, &mut stats, &mut warnings)?;
    let mut value = bb.value;
    let mut lines = bb.lines;
    let mut gap = bb.gap;
    if bb.status == MilpStatus::Optimal {
        let budget = opts.node_limit.saturating_sub(stats.nodes).max(1);
        if let Some(best) = exact_min_descent(
            &sys,
            value + tie_tolerance(value),
            budget,
            &mut stats,
        )? {
            value = best.objective.min(value);
            lines = best.lines;
            gap = 0.0;
        }
    }

    let (p1, p2) = lines_to_pieces(model.kind, &lines);
    let n = sys.len();
    let mut continuous = Vec::with_capacity(model.num_continuous);
    continuous.extend_from_slice(&[p1.slope, p1.intercept, p2.slope, p2.intercept]);
    let mut sup: f64 = 0.0;
    let mut combined = Vec::with_capacity(n);
    let mut binaries = Vec::with_capacity(n);
    for (i, &t) in model.points().iter().enumerate() {
        let v1 = p1.eval(t);
        let v2 = p2.eval(t);
        let (v, bin) = match model.kind {
            // In the max model the binary is 1 when line 2 is the active
            // (upper) line; in the min model it is 1 when line 1 is the
            // active (lower) line.
            ModelKind::MaxProblem => (v1.max(v2), u8::from(v2 > v1)),
            ModelKind::MinProblem => (v1.min(v2), u8::from(v1 <= v2)),
        };
        combined.push(v);
        binaries.push(bin);
        sup = sup.max((model.values()[i] - v).abs());
    }
    continuous.push(sup);
    continuous.extend_from_slice(&combined);
    debug_assert!((sup - value).abs() <= 1e-6 * (1.0 + value.abs()));
    Ok(MilpSolution {
        status: bb.status,
        objective_value: sup,
        continuous_values: continuous,
        binary_values: binaries,
        gap,
    })
}

/// One fully resolved model: exact optimum, audited big-M, final lines.
struct ModelResolution {
    kind: ModelKind,
    m: f64,
    value: f64,
    lines: [f64; 4],
    status: MilpStatus,
    gap: f64,
}

fn resolve_model(
    data: &SampledFunction,
    kind: ModelKind,
    m0: f64,
    opts: &BnbOptions,
    deadline: Option<Instant>,
    stats: &mut RunStats,
    warnings: &mut Vec<String>,
) -> Result<ModelResolution, BnbError> {
    let mut m = m0;
    for attempt in 0.. {
        let sys = PointSystem::from_data(data, kind, m);
        let bb = branch_and_bound(&sys, opts, deadline, stats, warnings)?;
        let mut value = bb.value;
        let mut lines = bb.lines;
        let mut gap = bb.gap;
        if bb.status == MilpStatus::Optimal {
            let budget = opts.node_limit.saturating_sub(stats.nodes).max(1);
            if let Some(best) =
                exact_min_descent(&sys, value + tie_tolerance(value), budget, stats)?
            {
                value = best.objective.min(value);
                lines = best.lines;
                gap = 0.0;
            }
        }
        let audit = sys.audit(&lines);
        if audit.passed || attempt >= 1 {
            if !audit.passed {
                warnings.push(format!(
                    "{kind} model: big-M audit still failing after doubling (margin {:.3e} with M = {:.6e})",
                    audit.margin, m
                ));
            }
            return Ok(ModelResolution {
                kind,
                m,
                value,
                lines,
                status: bb.status,
                gap,
            });
        }
        warnings.push(format!(
            "{kind} model: big-M audit failed (largest inter-line gap {:.6e} leaves margin {:.3e} ≤ {BIG_M_AUDIT_MARGIN:e} under M = {:.6e}); re-solving once with M doubled",
            audit.max_line_gap, audit.margin, m
        ));
        m *= 2.0;
    }
    unreachable!()
}

/// Picks the canonical crossover index for a model solved to `d_exact`,
/// preferring the smallest or largest tied index per the flag.
type CanonicalKFn =
    dyn FnMut(&PointSystem, f64, bool, &mut RunStats) -> Result<Option<LeafFit>, BnbError>;

/// Shared tail of [`solve_one_knot`] and [`oracle_enumerate`]: winner
/// selection, canonical fit, certificate, and report assembly.
#[allow(clippy::too_many_arguments)]
fn assemble_report(
    data: &SampledFunction,
    resolutions: [ModelResolution; 2],
    canonical_k: &mut CanonicalKFn,
    opts: &BnbOptions,
    start: Instant,
    mut stats: RunStats,
    mut warnings: Vec<String>,
) -> Result<SolveReport, BnbError> {
    let [max_res, min_res] = resolutions;
    let d_star = max_res.value.min(min_res.value);
    let tt = tie_tolerance(d_star);
    let winner = if (max_res.value - min_res.value).abs() <= tt {
        Winner::Tie
    } else if max_res.value < min_res.value {
        Winner::MaxProblem
    } else {
        Winner::MinProblem
    };
    let chosen = match winner {
        Winner::MinProblem => &min_res,
        _ => &max_res,
    };

    let n = data.n();
    let (c, d) = (data.grid().c(), data.grid().d());
    let (single_line, single_dev, piv) = best_line_counted(data, 0..n)?;
    stats.pivots += piv;

    let spline = if single_dev <= d_star + tt {
        // The optimum is (tie-)achieved by one line: canonical answer.
        OneKnotSpline::single(single_line)
    } else {
        let sys = PointSystem::from_data(data, chosen.kind, chosen.m);
        let prefer_small_k = chosen.kind == ModelKind::MaxProblem;
        match canonical_k(&sys, chosen.value, prefer_small_k, &mut stats)? {
            Some(leaf) if leaf.k >= 1 && leaf.k < n => {
                let lines = polish_leaf(
                    &sys,
                    leaf.k,
                    leaf.objective,
                    &leaf,
                    &mut stats,
                    &mut warnings,
                )?;
                let (p1, p2) = lines_to_pieces(chosen.kind, &lines);
                OneKnotSpline::from_lines(p1, p2, combine_kind(chosen.kind), c, d)
            }
            Some(_) => {
                // A boundary leaf is a one-line fit; only reachable when
                // the one-line check above was blocked by numerics.
                OneKnotSpline::single(single_line)
            }
            None => {
                warnings.push(
                    "canonical tie-face search ran out of node budget; reporting the incumbent fit"
                        .to_string(),
                );
                let (p1, p2) = lines_to_pieces(chosen.kind, &chosen.lines);
                OneKnotSpline::from_lines(p1, p2, combine_kind(chosen.kind), c, d)
            }
        }
    };

    let objective = spline_deviation(data, &spline);
    let certificate = check_sufficient(data, &spline, opts.alt_tol);
    let final_sys = PointSystem::from_data(data, chosen.kind, chosen.m);
    let big_m_audit = final_sys.audit(&[
        spline.piece1.slope,
        spline.piece1.intercept,
        spline.piece2.slope,
        spline.piece2.intercept,
    ]);
    if !big_m_audit.passed {
        warnings.push(format!(
            "reported fit fails the big-M audit (margin {:.3e} with M = {:.6e})",
            big_m_audit.margin, big_m_audit.big_m
        ));
    }
    let status = match (max_res.status, min_res.status) {
        (MilpStatus::Optimal, MilpStatus::Optimal) => MilpStatus::Optimal,
        (s, MilpStatus::Optimal) => s,
        (_, s) => s,
    };
    if status != MilpStatus::Optimal {
        warnings.push(format!(
            "search stopped at a limit ({status:?}); the reported fit may be sub-optimal"
        ));
    }
    Ok(SolveReport {
        label: data.label().to_string(),
        objective,
        winner,
        best_spline: spline,
        interval: (c, d),
        certificate,
        big_m_audit,
        status,
        gap: max_res.gap.max(min_res.gap),
        nodes: stats.nodes,
        lp_pivots: stats.pivots,
        wall_time: start.elapsed().as_secs_f64(),
        warnings,
    })
}

/// Finds the exact best one-knot fit of sampled data.
///
/// Solves the max and min models exactly, takes the better (reporting ties),
/// canonicalizes the reported fit over the optimal tie face (one line if a
/// line already attains the optimum, else the face's extreme crossover leaf
/// polished to touch the data at the crossover pair), audits the big-M
/// constant at each model's optimum (re-solving once with a doubled
/// constant on failure), and attaches the alternation certificate.
pub fn solve_one_knot(data: &SampledFunction, opts: &BnbOptions) -> Result<SolveReport, BnbError> {
    if data.n() < 2 {
        return Err(BnbError::TooFewPoints(data.n()));
    }
    let start = Instant::now();
    let deadline = opts.time_limit.map(|s| start + std::time::Duration::from_secs_f64(s));
    let m0 = opts.m_override.unwrap_or_else(|| default_big_m(data));
    let mut stats = RunStats::default();
    let mut warnings = Vec::new();
    let max_res = resolve_model(
        data,
        ModelKind::MaxProblem,
        m0,
        opts,
        deadline,
        &mut stats,
        &mut warnings,
    )?;
    let min_res = resolve_model(
        data,
        ModelKind::MinProblem,
        m0,
        opts,
        deadline,
        &mut stats,
        &mut warnings,
    )?;
    let node_limit = opts.node_limit;
    let mut canonical = move |sys: &PointSystem,
                              d_exact: f64,
                              prefer_small_k: bool,
                              stats: &mut RunStats|
          -> Result<Option<LeafFit>, BnbError> {
        let budget = node_limit.saturating_sub(stats.nodes).max(1);
        extreme_face_leaf(
            sys,
            d_exact + tie_tolerance(d_exact),
            prefer_small_k,
            budget,
            stats,
        )
    };
    assemble_report(
        data,
        [max_res, min_res],
        &mut canonical,
        opts,
        start,
        stats,
        warnings,
    )
}

/// Reference solver: exhaustively sweeps every crossover leaf of both
/// models (complete for the same reason the default branching is), then
/// canonicalizes and certifies identically to [`solve_one_knot`]. Slower
/// but with no search heuristics; used to cross-check the solver.
pub fn oracle_enumerate(data: &SampledFunction, opts: &BnbOptions) -> Result<SolveReport, BnbError> {
    if data.n() < 2 {
        return Err(BnbError::TooFewPoints(data.n()));
    }
    let start = Instant::now();
    let m0 = opts.m_override.unwrap_or_else(|| default_big_m(data));
    let mut stats = RunStats::default();
    let mut warnings = Vec::new();
    let n = data.n();

    let sweep = |kind: ModelKind,
                     stats: &mut RunStats,
                     warnings: &mut Vec<String>|
     -> Result<(ModelResolution, Vec<f64>), BnbError> {
        let mut m = m0;
        for attempt in 0.. {
            let sys = PointSystem::from_data(data, kind, m);
            let mut objs = Vec::with_capacity(n + 1);
            let mut best: Option<LeafFit> = None;
            for k in 0..=n {
                let leaf = leaf_fit(&sys, k, stats)?;
                objs.push(leaf.objective);
                let better = best
                    .as_ref()
                    .map(|b| leaf.objective < b.objective)
                    .unwrap_or(true);
                if better {
                    best = Some(leaf);
                }
            }
            let best = best.expect("at least one leaf");
            let audit = sys.audit(&best.lines);
            if audit.passed || attempt >= 1 {
                if !audit.passed {
                    warnings.push(format!(
                        "{kind} model: big-M audit still failing after doubling (margin {:.3e} with M = {:.6e})",
                        audit.margin, m
                    ));
                }
                return Ok((
                    ModelResolution {
                        kind,
                        m,
                        value: best.objective,
                        lines: best.lines,
                        status: MilpStatus::Optimal,
                        gap: 0.0,
                    },
                    objs,
                ));
            }
            warnings.push(format!(
                "{kind} model: big-M audit failed (largest inter-line gap {:.6e} leaves margin {:.3e} ≤ {BIG_M_AUDIT_MARGIN:e} under M = {:.6e}); re-sweeping once with M doubled",
                audit.max_line_gap, audit.margin, m
            ));
            m *= 2.0;
        }
        unreachable!()
    };

    let (max_res, max_objs) = sweep(ModelKind::MaxProblem, &mut stats, &mut warnings)?;
    let (min_res, min_objs) = sweep(ModelKind::MinProblem, &mut stats, &mut warnings)?;

    let mut canonical = move |sys: &PointSystem,
                              d_exact: f64,
                              prefer_small_k: bool,
                              stats: &mut RunStats|
          -> Result<Option<LeafFit>, BnbError> {
        let objs = match sys.kind {
            ModelKind::MaxProblem => &max_objs,
            ModelKind::MinProblem => &min_objs,
        };
        let threshold = d_exact + tie_tolerance(d_exact);
        let mut face = objs
            .iter()
            .enumerate()
            .filter(|(_, o)| **o <= threshold)
            .map(|(k, _)| k);
        let k = if prefer_small_k {
            face.next()
        } else {
            face.next_back()
        };
        match k {
            Some(k) => leaf_fit(sys, k, stats).map(Some),
            None => Ok(None),
        }
    };
    assemble_report(
        data,
        [max_res, min_res],
        &mut canonical,
        opts,
        start,
        stats,
        warnings,
    )
}
