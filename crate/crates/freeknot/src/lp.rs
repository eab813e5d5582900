//! Self-contained linear-programming core: a two-phase primal simplex for
//! problems with general row relations and per-variable bounds.
//!
//! Problem form:
//!
//! ```text
//! minimize    c' x
//! subject to  a_i' x  (<= | = | >=)  b_i     for every row i
//!             l_j <= x_j <= u_j               for every variable j
//! ```
//!
//! Rows become equalities with one bounded slack each, and the revised
//! simplex runs on the resulting system: Dantzig pricing with a Bland
//! fallback that engages after a long run of degenerate pivots, a dense LU
//! factorization of the basis maintained through product-form updates and
//! refreshed on a fixed cadence.  Problem sizes in this crate stay small
//! enough (a few hundred working rows) that sparse factorizations would buy
//! nothing.
//!
//! Feasibility is restored without artificial variables or big-M costs:
//! phase one starts from any basis and minimizes the total bound violation of
//! the basic variables directly.
//!
//! For problems with a handful of variables but a very large number of rows
//! (uniform-fit problems generate two rows per sample point),
//! [`solve_row_generation`] solves a growing working subset of rows and adds
//! violated ones until the optimum of the working problem is feasible for the
//! full system, which yields the exact optimum at a fraction of the cost.

use std::fmt;

/// Maximum primal constraint violation an `Optimal` solution may carry.
pub const PRIMAL_FEAS_TOL: f64 = 1e-7;
/// Pricing threshold: a nonbasic column enters only if its reduced cost is
/// favourable by more than this amount.
const COST_TOL: f64 = 1e-9;
/// Bound-violation tolerance used when classifying basic variables.
const BOUND_TOL: f64 = 1e-9;
/// Smallest pivot magnitude accepted during a basis change.
const PIVOT_TOL: f64 = 1e-11;
/// Number of product-form updates between full refactorizations.
const REFACTOR_EVERY: usize = 100;
/// A step shorter than this counts as a degenerate pivot.
const DEGEN_STEP: f64 = 1e-12;
/// Default violation threshold for row generation.
const ROW_VIOLATION_TOL: f64 = 1e-8;
/// Rows added per round of row generation.
const ROW_BATCH: usize = 16;

/// Relation between a row's left-hand side and its right-hand side.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Relation {
    Le,
    Eq,
    Ge,
}

/// One sparse constraint row.
#[derive(Clone, Debug)]
pub struct LpRow {
    pub coeffs: Vec<(usize, f64)>,
    pub rel: Relation,
    pub rhs: f64,
}

/// A linear program in the form described in the module documentation.
#[derive(Clone, Debug, Default)]
pub struct LpProblem {
    num_vars: usize,
    objective: Vec<(usize, f64)>,
    rows: Vec<LpRow>,
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl LpProblem {
    /// Creates a problem with `num_vars` free variables and no rows.
    pub fn new(num_vars: usize) -> Self {
        LpProblem {
            num_vars,
            objective: Vec::new(),
            rows: Vec::new(),
            lower: vec![f64::NEG_INFINITY; num_vars],
            upper: vec![f64::INFINITY; num_vars],
        }
    }

    /// Appends a fresh variable with the given bounds and returns its index.
    pub fn add_var(&mut self, lower: f64, upper: f64) -> usize {
        self.lower.push(lower);
        self.upper.push(upper);
        self.num_vars += 1;
        self.num_vars - 1
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn set_bounds(&mut self, var: usize, lower: f64, upper: f64) {
        self.lower[var] = lower;
        self.upper[var] = upper;
    }

    pub fn bounds(&self, var: usize) -> (f64, f64) {
        (self.lower[var], self.upper[var])
    }

    /// Replaces the objective with the given sparse minimization row.
    pub fn set_objective(&mut self, coeffs: &[(usize, f64)]) {
        self.objective = coeffs.to_vec();
    }

    pub fn objective(&self) -> &[(usize, f64)] {
        &self.objective
    }

    /// Appends a row and returns its index.
    pub fn add_row(&mut self, coeffs: Vec<(usize, f64)>, rel: Relation, rhs: f64) -> usize {
        self.rows.push(LpRow { coeffs, rel, rhs });
        self.rows.len() - 1
    }

    pub fn rows(&self) -> &[LpRow] {
        &self.rows
    }

    /// Left-hand side of row `i` at the point `x`.
    pub fn row_activity(&self, i: usize, x: &[f64]) -> f64 {
        self.rows[i]
            .coeffs
            .iter()
            .map(|&(j, a)| a * x[j])
            .sum()
    }

    /// Violation of row `i` at `x` (zero when satisfied).
    pub fn row_violation(&self, i: usize, x: &[f64]) -> f64 {
        let lhs = self.row_activity(i, x);
        let row = &self.rows[i];
        match row.rel {
            Relation::Le => (lhs - row.rhs).max(0.0),
            Relation::Ge => (row.rhs - lhs).max(0.0),
            Relation::Eq => (lhs - row.rhs).abs(),
        }
    }

    /// Objective value at `x`.
    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective.iter().map(|&(j, c)| c * x[j]).sum()
    }

    fn validate(&self) -> Result<(), LpError> {
        for j in 0..self.num_vars {
            let (l, u) = (self.lower[j], self.upper[j]);
            if l.is_nan() || u.is_nan() || l == f64::INFINITY || u == f64::NEG_INFINITY {
                return Err(LpError::Invalid(format!("variable {j} has bad bounds")));
            }
            if l > u {
                return Err(LpError::Invalid(format!(
                    "variable {j} has empty bound interval [{l}, {u}]"
                )));
            }
        }
        for &(j, c) in &self.objective {
            if j >= self.num_vars || !c.is_finite() {
                return Err(LpError::Invalid("bad objective entry".into()));
            }
        }
        for (i, row) in self.rows.iter().enumerate() {
            if !row.rhs.is_finite() {
                return Err(LpError::Invalid(format!("row {i} has non-finite rhs")));
            }
            for &(j, a) in &row.coeffs {
                if j >= self.num_vars || !a.is_finite() {
                    return Err(LpError::Invalid(format!("row {i} has a bad coefficient")));
                }
            }
        }
        Ok(())
    }
}

/// Terminal state of a solve.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

/// Result of [`lp_solve`].
///
/// `objective_value` is meaningful only when `status` is `Optimal`; it is NaN
/// for infeasible and negative infinity for unbounded problems.  `basis`
/// holds basic column indices in the combined column space (structural
/// variables first, then one slack per row), suitable for warm-starting a
/// subsequent solve of a problem with identical shape.
#[derive(Clone, Debug)]
pub struct LpSolution {
    pub status: LpStatus,
    pub objective_value: f64,
    pub x: Vec<f64>,
    pub basis: Vec<usize>,
    pub dual_values: Vec<f64>,
    pub pivots: u64,
}

/// Failure of the solve procedure itself (as opposed to an infeasible or
/// unbounded model, which is a regular outcome).
#[derive(Clone, Debug)]
pub enum LpError {
    /// Malformed input: NaN data, bad indices, empty bound intervals.
    Invalid(String),
    /// Numerical breakdown that persisted through refactorization.
    Numeric(String),
}

impl fmt::Display for LpError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LpError::Invalid(msg) => write!(f, "invalid linear program: {msg}"),
            LpError::Numeric(msg) => write!(f, "numerical failure in simplex: {msg}"),
        }
    }
}

impl std::error::Error for LpError {}

// ---------------------------------------------------------------------------
// Dense LU factorization with partial pivoting.
// ---------------------------------------------------------------------------

struct DenseLu {
    n: usize,
    /// Row-major packed L (unit diagonal, below) and U (on and above).
    a: Vec<f64>,
    /// Row swap applied at each elimination step.
    swaps: Vec<usize>,
}

impl DenseLu {
    /// Factors the matrix whose entry (i, j) is produced by `fill`.
    /// Returns `None` when the matrix is numerically singular.
    fn factor(n: usize, fill: impl FnOnce(&mut [f64])) -> Option<DenseLu> {
        let mut a = vec![0.0; n * n];
        fill(&mut a);
        let mut swaps = vec![0; n];
        for k in 0..n {
            let mut p = k;
            let mut best = a[k * n + k].abs();
            for i in k + 1..n {
                let v = a[i * n + k].abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if best < 1e-300 {
                return None;
            }
            swaps[k] = p;
            if p != k {
                for j in 0..n {
                    a.swap(k * n + j, p * n + j);
                }
            }
            let pivot = a[k * n + k];
            for i in k + 1..n {
                let factor = a[i * n + k] / pivot;
                a[i * n + k] = factor;
                if factor != 0.0 {
                    for j in k + 1..n {
                        a[i * n + j] -= factor * a[k * n + j];
                    }
                }
            }
        }
        Some(DenseLu { n, a, swaps })
    }

    /// Solves `B x = v` in place.
    fn solve(&self, v: &mut [f64]) {
        let n = self.n;
        for k in 0..n {
            v.swap(k, self.swaps[k]);
        }
        // L y = Pv : forward substitution on unit L (row i, columns 0..i).
        for i in 1..n {
            let row = &self.a[i * n..i * n + i];
            let s: f64 = row.iter().zip(&*v).map(|(&a, &y)| a * y).sum();
            v[i] -= s;
        }
        // U x = y : backward substitution (row i, columns i+1..n).
        for i in (0..n).rev() {
            let row = &self.a[i * n + i + 1..(i + 1) * n];
            let s: f64 = row.iter().zip(&v[i + 1..]).map(|(&a, &x)| a * x).sum();
            v[i] = (v[i] - s) / self.a[i * n + i];
        }
    }

    /// Solves `B' x = v` in place.
    fn solve_transposed(&self, v: &mut [f64]) {
        let n = self.n;
        // U' y = v : forward substitution on the transpose of U
        // (column i of U read with stride n, rows 0..i).
        for i in 0..n {
            let col = self.a[i..].iter().step_by(n).take(i);
            let s: f64 = col.zip(&*v).map(|(&a, &y)| a * y).sum();
            v[i] = (v[i] - s) / self.a[i * n + i];
        }
        // L' w = y : backward substitution on the transpose of unit L
        // (column i of L read with stride n from the diagonal, rows i+1..n).
        for i in (0..n).rev() {
            let col = self.a[i * n + i..].iter().step_by(n).skip(1);
            let s: f64 = col.zip(&v[i + 1..]).map(|(&a, &w)| a * w).sum();
            v[i] -= s;
        }
        for k in (0..n).rev() {
            v.swap(k, self.swaps[k]);
        }
    }
}

/// One product-form update: the basis column at `row` was replaced by a
/// column whose basis-solved image is `w`.
struct Eta {
    row: usize,
    w: Vec<f64>,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum VarState {
    Basic(usize),
    AtLower,
    AtUpper,
    /// Nonbasic with both bounds infinite; rests at zero.
    Free,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Phase {
    One,
    Two,
}

enum RatioOutcome {
    /// The entering variable travels to its opposite bound; no basis change.
    Flip(f64),
    /// Basic at position `row` leaves towards `to` after a step of `step`.
    Pivot { row: usize, step: f64, to: VarState },
    Unbounded,
}

struct Simplex {
    m: usize,
    /// Total columns: structural variables then one slack per row.
    n: usize,
    n_struct: usize,
    cols: Vec<Vec<(usize, f64)>>,
    cost: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    rhs: Vec<f64>,
    basis: Vec<usize>,
    state: Vec<VarState>,
    xb: Vec<f64>,
    lu: DenseLu,
    etas: Vec<Eta>,
    pivots: u64,
    degen_run: usize,
    bland: bool,
}

impl Simplex {
    fn new(p: &LpProblem, warm_basis: Option<&[usize]>) -> Result<Simplex, LpError> {
        let m = p.rows.len();
        let n_struct = p.num_vars;
        let n = n_struct + m;

        let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for (i, row) in p.rows.iter().enumerate() {
            for &(j, a) in &row.coeffs {
                if a != 0.0 {
                    cols[j].push((i, a));
                }
            }
            cols[n_struct + i].push((i, 1.0));
        }
        // Merge duplicate indices within a column so updates stay consistent.
        for col in cols.iter_mut() {
            col.sort_by_key(|&(i, _)| i);
            col.dedup_by(|b, a| {
                if a.0 == b.0 {
                    a.1 += b.1;
                    true
                } else {
                    false
                }
            });
        }

        let mut cost = vec![0.0; n];
        for &(j, c) in &p.objective {
            cost[j] += c;
        }

        let mut lower = vec![0.0; n];
        let mut upper = vec![0.0; n];
        lower[..n_struct].copy_from_slice(&p.lower);
        upper[..n_struct].copy_from_slice(&p.upper);
        for (i, row) in p.rows.iter().enumerate() {
            let (l, u) = match row.rel {
                Relation::Le => (0.0, f64::INFINITY),
                Relation::Ge => (f64::NEG_INFINITY, 0.0),
                Relation::Eq => (0.0, 0.0),
            };
            lower[n_struct + i] = l;
            upper[n_struct + i] = u;
        }

        let rhs: Vec<f64> = p.rows.iter().map(|r| r.rhs).collect();

        let mut s = Simplex {
            m,
            n,
            n_struct,
            cols,
            cost,
            lower,
            upper,
            rhs,
            basis: Vec::new(),
            state: Vec::new(),
            xb: vec![0.0; m],
            lu: DenseLu {
                n: 0,
                a: Vec::new(),
                swaps: Vec::new(),
            },
            etas: Vec::new(),
            pivots: 0,
            degen_run: 0,
            bland: false,
        };

        let mut installed = false;
        if let Some(warm) = warm_basis {
            if warm.len() == m && warm.iter().all(|&j| j < n) {
                let mut seen = vec![false; n];
                let distinct = warm.iter().all(|&j| !std::mem::replace(&mut seen[j], true));
                if distinct && s.install_basis(warm) {
                    installed = true;
                }
            }
        }
        if !installed {
            let slack: Vec<usize> = (n_struct..n).collect();
            if !s.install_basis(&slack) {
                return Err(LpError::Numeric("slack basis failed to factor".into()));
            }
        }
        Ok(s)
    }

    /// Sets the basis, factors it and computes basic values.
    /// Returns false when the candidate basis is singular.
    fn install_basis(&mut self, basis: &[usize]) -> bool {
        let (m, n) = (self.m, self.n);
        let cols = &self.cols;
        let lu = DenseLu::factor(m, |a| {
            for (k, &j) in basis.iter().enumerate() {
                for &(i, v) in &cols[j] {
                    a[i * m + k] = v;
                }
            }
        });
        let Some(lu) = lu else { return false };
        self.lu = lu;
        self.etas.clear();
        self.basis = basis.to_vec();
        self.state = vec![VarState::AtLower; n];
        for j in 0..n {
            self.state[j] = if self.lower[j].is_finite() {
                VarState::AtLower
            } else if self.upper[j].is_finite() {
                VarState::AtUpper
            } else {
                VarState::Free
            };
        }
        for (i, &j) in basis.iter().enumerate() {
            self.state[j] = VarState::Basic(i);
        }
        self.recompute_xb();
        true
    }

    fn nonbasic_value(&self, j: usize) -> f64 {
        match self.state[j] {
            VarState::AtLower => self.lower[j],
            VarState::AtUpper => self.upper[j],
            VarState::Free => 0.0,
            VarState::Basic(_) => unreachable!("basic variable has no resting value"),
        }
    }

    /// Recomputes basic values from scratch: `x_B = B^-1 (b - N x_N)`.
    /// Valid only right after (re)factorization, when no updates are pending.
    fn recompute_xb(&mut self) {
        debug_assert!(self.etas.is_empty());
        let mut r = self.rhs.clone();
        for j in 0..self.n {
            if let VarState::Basic(_) = self.state[j] {
                continue;
            }
            let v = self.nonbasic_value(j);
            if v != 0.0 {
                for &(i, a) in &self.cols[j] {
                    r[i] -= a * v;
                }
            }
        }
        if self.m > 0 {
            self.lu.solve(&mut r);
        }
        self.xb = r;
    }

    fn refactor(&mut self) -> Result<(), LpError> {
        let (m, _) = (self.m, self.n);
        let cols = &self.cols;
        let basis = &self.basis;
        let lu = DenseLu::factor(m, |a| {
            for (k, &j) in basis.iter().enumerate() {
                for &(i, v) in &cols[j] {
                    a[i * m + k] = v;
                }
            }
        })
        .ok_or_else(|| LpError::Numeric("basis became singular".into()))?;
        self.lu = lu;
        self.etas.clear();
        self.recompute_xb();
        Ok(())
    }

    /// `B^-1 * column(j)`.
    fn ftran_col(&self, j: usize) -> Vec<f64> {
        let mut w = vec![0.0; self.m];
        for &(i, a) in &self.cols[j] {
            w[i] = a;
        }
        if self.m == 0 {
            return w;
        }
        self.lu.solve(&mut w);
        for eta in &self.etas {
            let t = w[eta.row] / eta.w[eta.row];
            if t != 0.0 {
                for (i, &wi) in eta.w.iter().enumerate() {
                    w[i] -= wi * t;
                }
            }
            w[eta.row] = t;
        }
        w
    }

    /// `B^-T * v`.
    fn btran(&self, v: &[f64]) -> Vec<f64> {
        let mut y = v.to_vec();
        if self.m == 0 {
            return y;
        }
        for eta in self.etas.iter().rev() {
            let mut t = y[eta.row];
            for (i, &wi) in eta.w.iter().enumerate() {
                if i != eta.row {
                    t -= wi * y[i];
                }
            }
            y[eta.row] = t / eta.w[eta.row];
        }
        self.lu.solve_transposed(&mut y);
        y
    }

    fn bound_tol(b: f64) -> f64 {
        BOUND_TOL * (1.0 + b.abs())
    }

    /// Violation direction of basic position `i`: -1 below lower, +1 above
    /// upper, 0 feasible.
    fn infeasibility_sign(&self, i: usize) -> i8 {
        let j = self.basis[i];
        let v = self.xb[i];
        if v < self.lower[j] - Self::bound_tol(self.lower[j]) {
            -1
        } else if v > self.upper[j] + Self::bound_tol(self.upper[j]) {
            1
        } else {
            0
        }
    }

    fn total_infeasibility(&self) -> f64 {
        let mut f = 0.0;
        for i in 0..self.m {
            let j = self.basis[i];
            let v = self.xb[i];
            if v < self.lower[j] {
                f += self.lower[j] - v;
            } else if v > self.upper[j] {
                f += v - self.upper[j];
            }
        }
        f
    }

    fn is_primal_feasible(&self) -> bool {
        (0..self.m).all(|i| self.infeasibility_sign(i) == 0)
    }

    /// Reduced-cost pricing shared by both phases.  Returns the entering
    /// column, its movement direction and the score used for selection.
    fn price(&self, phase: Phase) -> Option<(usize, i8)> {
        let pi = match phase {
            Phase::One => {
                let g: Vec<f64> = (0..self.m)
                    .map(|i| f64::from(self.infeasibility_sign(i)))
                    .collect();
                self.btran(&g)
            }
            Phase::Two => self.duals(),
        };

        let mut best: Option<(usize, i8, f64)> = None;
        for j in 0..self.n {
            if matches!(self.state[j], VarState::Basic(_)) {
                continue;
            }
            if self.lower[j] == self.upper[j] {
                continue; // fixed variable can never move
            }
            let base_cost = match phase {
                Phase::One => 0.0,
                Phase::Two => self.cost[j],
            };
            let mut d = base_cost;
            for &(i, a) in &self.cols[j] {
                d -= pi[i] * a;
            }
            let dir: i8 = match self.state[j] {
                VarState::AtLower if d < -COST_TOL => 1,
                VarState::AtUpper if d > COST_TOL => -1,
                VarState::Free if d.abs() > COST_TOL => {
                    if d > 0.0 {
                        -1
                    } else {
                        1
                    }
                }
                _ => continue,
            };
            if self.bland {
                return Some((j, dir)); // first eligible index
            }
            let score = d.abs();
            match best {
                Some((_, _, s)) if s >= score => {}
                _ => best = Some((j, dir, score)),
            }
        }
        best.map(|(j, dir, _)| (j, dir))
    }

    /// Bounded-variable ratio test.  `sigma` is the movement direction of the
    /// entering variable `e` whose basis-solved column is `w`.
    fn ratio_test(&self, e: usize, sigma: i8, w: &[f64], phase: Phase) -> RatioOutcome {
        let sg = f64::from(sigma);
        let mut step = f64::INFINITY;
        let mut leave: Option<(usize, VarState, f64)> = None; // (row, target, |w|)

        for (i, &wi) in w.iter().enumerate() {
            if wi.abs() <= 1e-12 {
                continue;
            }
            let j = self.basis[i];
            let v = self.xb[i];
            let (l, u) = (self.lower[j], self.upper[j]);
            let decreasing = sg * wi > 0.0;
            let rate = (sg * wi).abs();

            let candidate: Option<(f64, VarState)> = match phase {
                Phase::Two => {
                    if decreasing {
                        l.is_finite().then(|| ((v - l) / rate, VarState::AtLower))
                    } else {
                        u.is_finite().then(|| ((u - v) / rate, VarState::AtUpper))
                    }
                }
                Phase::One => {
                    let below = v < l - Self::bound_tol(l);
                    let above = v > u + Self::bound_tol(u);
                    if decreasing {
                        if above {
                            // travels down to its violated upper bound
                            Some(((v - u) / rate, VarState::AtUpper))
                        } else if below {
                            None // worsens; accounted for by pricing
                        } else {
                            l.is_finite().then(|| ((v - l) / rate, VarState::AtLower))
                        }
                    } else if below {
                        Some(((l - v) / rate, VarState::AtLower))
                    } else if above {
                        None
                    } else {
                        u.is_finite().then(|| ((u - v) / rate, VarState::AtUpper))
                    }
                }
            };

            if let Some((ratio, target)) = candidate {
                let ratio = ratio.max(0.0);
                let better = match leave {
                    None => ratio < step,
                    Some((row, _, wbest)) => {
                        if ratio < step - 1e-12 {
                            true
                        } else if ratio > step + 1e-12 {
                            false
                        } else if self.bland {
                            // lowest leaving variable index on ties
                            self.basis[i] < self.basis[row]
                        } else {
                            // largest pivot magnitude on ties, for stability
                            wi.abs() > wbest
                        }
                    }
                };
                if better {
                    step = step.min(ratio);
                    leave = Some((i, target, wi.abs()));
                } else {
                    step = step.min(ratio);
                }
            }
        }

        let flip = if self.lower[e].is_finite() && self.upper[e].is_finite() {
            self.upper[e] - self.lower[e]
        } else {
            f64::INFINITY
        };

        if flip <= step {
            if flip.is_infinite() {
                RatioOutcome::Unbounded
            } else {
                RatioOutcome::Flip(flip)
            }
        } else {
            match leave {
                Some((row, to, _)) => RatioOutcome::Pivot { row, step, to },
                None => RatioOutcome::Unbounded,
            }
        }
    }

    fn apply_step(&mut self, e: usize, sigma: i8, w: &[f64], outcome: RatioOutcome) {
        let sg = f64::from(sigma);
        match outcome {
            RatioOutcome::Flip(step) => {
                for (xb, &wi) in self.xb.iter_mut().zip(w) {
                    *xb -= sg * step * wi;
                }
                self.state[e] = match self.state[e] {
                    VarState::AtLower => VarState::AtUpper,
                    VarState::AtUpper => VarState::AtLower,
                    other => other,
                };
                self.note_step(step);
            }
            RatioOutcome::Pivot { row, step, to } => {
                let entering_value = match self.state[e] {
                    VarState::Free => sg * step,
                    _ => self.nonbasic_value(e) + sg * step,
                };
                for (xb, &wi) in self.xb.iter_mut().zip(w) {
                    *xb -= sg * step * wi;
                }
                let leaving = self.basis[row];
                self.state[leaving] = if self.lower[leaving] == self.upper[leaving] {
                    VarState::AtLower
                } else {
                    to
                };
                self.basis[row] = e;
                self.state[e] = VarState::Basic(row);
                self.xb[row] = entering_value;
                self.etas.push(Eta {
                    row,
                    w: w.to_vec(),
                });
                self.note_step(step);
            }
            RatioOutcome::Unbounded => unreachable!("apply_step on unbounded outcome"),
        }
    }

    fn note_step(&mut self, step: f64) {
        self.pivots += 1;
        if step.abs() < DEGEN_STEP {
            self.degen_run += 1;
            if self.degen_run > 50 * (self.m + self.n) {
                self.bland = true;
            }
        } else {
            self.degen_run = 0;
            self.bland = false;
        }
    }

    /// Runs one phase to completion.
    fn run_phase(&mut self, phase: Phase) -> Result<LpStatus, LpError> {
        let iter_cap = 10_000 + 200 * (self.m + self.n);
        let mut retried_after_refactor = false;

        for _ in 0..iter_cap {
            if phase == Phase::One && self.is_primal_feasible() {
                return Ok(LpStatus::Optimal);
            }
            let Some((e, sigma)) = self.price(phase) else {
                return match phase {
                    Phase::One => {
                        if self.total_infeasibility() <= PRIMAL_FEAS_TOL {
                            Ok(LpStatus::Optimal)
                        } else {
                            Ok(LpStatus::Infeasible)
                        }
                    }
                    Phase::Two => Ok(LpStatus::Optimal),
                };
            };
            let w = self.ftran_col(e);
            let outcome = self.ratio_test(e, sigma, &w, phase);

            match outcome {
                RatioOutcome::Unbounded => {
                    return match phase {
                        Phase::One => Err(LpError::Numeric(
                            "phase-one objective unbounded; inconsistent state".into(),
                        )),
                        Phase::Two => Ok(LpStatus::Unbounded),
                    };
                }
                RatioOutcome::Pivot { row, .. } if w[row].abs() < PIVOT_TOL => {
                    // Reject the tiny pivot; refresh the factorization once and
                    // retry, otherwise report numerical breakdown.
                    if !self.etas.is_empty() {
                        self.refactor()?;
                        continue;
                    }
                    if retried_after_refactor {
                        return Err(LpError::Numeric(format!(
                            "pivot magnitude {:.3e} below tolerance",
                            w[row].abs()
                        )));
                    }
                    retried_after_refactor = true;
                    continue;
                }
                outcome => {
                    self.apply_step(e, sigma, &w, outcome);
                    retried_after_refactor = false;
                    if self.etas.len() >= REFACTOR_EVERY {
                        self.refactor()?;
                    }
                }
            }
        }
        Err(LpError::Numeric("simplex iteration limit exceeded".into()))
    }

    fn assemble_x(&self) -> Vec<f64> {
        let mut x = vec![0.0; self.n_struct];
        for (j, xj) in x.iter_mut().enumerate() {
            *xj = match self.state[j] {
                VarState::Basic(i) => self.xb[i],
                _ => self.nonbasic_value(j),
            };
        }
        x
    }

    fn duals(&self) -> Vec<f64> {
        let cb: Vec<f64> = self.basis.iter().map(|&j| self.cost[j]).collect();
        self.btran(&cb)
    }
}

/// Solves the linear program.  `warm_basis` may carry the `basis` of a prior
/// solution of a structurally identical problem; an unusable warm basis is
/// silently replaced by the all-slack basis.
pub fn lp_solve(p: &LpProblem, warm_basis: Option<&[usize]>) -> Result<LpSolution, LpError> {
    p.validate()?;
    let mut s = Simplex::new(p, warm_basis)?;

    if !s.is_primal_feasible() {
        match s.run_phase(Phase::One)? {
            LpStatus::Optimal => {}
            LpStatus::Infeasible => {
                return Ok(LpSolution {
                    status: LpStatus::Infeasible,
                    objective_value: f64::NAN,
                    x: s.assemble_x(),
                    basis: s.basis.clone(),
                    dual_values: s.duals(),
                    pivots: s.pivots,
                });
            }
            LpStatus::Unbounded => unreachable!("phase one never reports unbounded"),
        }
    }

    let status = s.run_phase(Phase::Two)?;

    if status == LpStatus::Optimal {
        // The optimum must satisfy the advertised feasibility guarantee; a
        // stale factorization is the usual culprit, so refresh once.
        let x = s.assemble_x();
        let worst = (0..p.num_rows())
            .map(|i| p.row_violation(i, &x))
            .fold(0.0, f64::max);
        if worst > PRIMAL_FEAS_TOL {
            s.refactor()?;
            s.run_phase(Phase::One)?;
            s.run_phase(Phase::Two)?;
            let x = s.assemble_x();
            let worst = (0..p.num_rows())
                .map(|i| p.row_violation(i, &x))
                .fold(0.0, f64::max);
            if worst > PRIMAL_FEAS_TOL {
                return Err(LpError::Numeric(format!(
                    "optimal point violates a row by {worst:.3e}"
                )));
            }
        }
    }

    let x = s.assemble_x();
    let objective_value = match status {
        LpStatus::Optimal => p.objective_value(&x),
        LpStatus::Infeasible => f64::NAN,
        LpStatus::Unbounded => f64::NEG_INFINITY,
    };
    Ok(LpSolution {
        status,
        objective_value,
        x,
        basis: s.basis.clone(),
        dual_values: s.duals(),
        pivots: s.pivots,
    })
}

/// Solves a many-row problem by row generation: a working subset of rows
/// (all equality rows plus `seed_rows`) grows by the most violated rows until
/// the working optimum satisfies every row of `p`.
///
/// The returned solution refers to the full problem: `dual_values` has one
/// entry per original row (zero for rows that never entered the working set)
/// and `basis` uses the full column space.  The objective must be bounded
/// below over the variable bounds alone for this scheme to terminate.
pub fn solve_row_generation(p: &LpProblem, seed_rows: &[usize]) -> Result<LpSolution, LpError> {
    p.validate()?;
    let total = p.rows.len();
    let mut in_working = vec![false; total];
    for (i, row) in p.rows.iter().enumerate() {
        if row.rel == Relation::Eq {
            in_working[i] = true;
        }
    }
    for &i in seed_rows {
        if i >= total {
            return Err(LpError::Invalid(format!("seed row {i} out of range")));
        }
        in_working[i] = true;
    }

    let mut working: Vec<usize> = (0..total).filter(|&i| in_working[i]).collect();
    let mut warm: Option<Vec<usize>> = None;
    let mut pivots = 0u64;
    let max_rounds = 60 + total / ROW_BATCH;

    for _ in 0..max_rounds {
        let mut sub = LpProblem::new(p.num_vars);
        sub.lower = p.lower.clone();
        sub.upper = p.upper.clone();
        sub.objective = p.objective.clone();
        for &i in &working {
            let row = &p.rows[i];
            sub.add_row(row.coeffs.clone(), row.rel, row.rhs);
        }

        let sol = lp_solve(&sub, warm.as_deref())?;
        pivots += sol.pivots;

        match sol.status {
            LpStatus::Infeasible => {
                // A relaxation (fewer rows) is already infeasible, so the
                // full problem is as well.
                return Ok(LpSolution {
                    status: LpStatus::Infeasible,
                    objective_value: f64::NAN,
                    x: sol.x,
                    basis: Vec::new(),
                    dual_values: vec![0.0; total],
                    pivots,
                });
            }
            LpStatus::Unbounded => {
                // The working relaxation is unbounded; absent rows may cut
                // the ray, so pull in the next batch deterministically.
                let mut added = 0;
                for (i, used) in in_working.iter_mut().enumerate() {
                    if !*used {
                        *used = true;
                        working.push(i);
                        added += 1;
                        if added == ROW_BATCH {
                            break;
                        }
                    }
                }
                if added == 0 {
                    return Ok(LpSolution {
                        status: LpStatus::Unbounded,
                        objective_value: f64::NEG_INFINITY,
                        x: sol.x,
                        basis: Vec::new(),
                        dual_values: vec![0.0; total],
                        pivots,
                    });
                }
                working.sort_unstable();
                warm = None;
                continue;
            }
            LpStatus::Optimal => {}
        }

        // Most violated absent rows.
        let mut violated: Vec<(usize, f64)> = Vec::new();
        for (i, &used) in in_working.iter().enumerate() {
            if used {
                continue;
            }
            let v = p.row_violation(i, &sol.x);
            if v > ROW_VIOLATION_TOL {
                violated.push((i, v));
            }
        }
        if violated.is_empty() {
            let mut duals = vec![0.0; total];
            for (k, &i) in working.iter().enumerate() {
                duals[i] = sol.dual_values[k];
            }
            let mut basis = Vec::with_capacity(sol.basis.len());
            for &col in &sol.basis {
                if col < p.num_vars {
                    basis.push(col);
                } else {
                    basis.push(p.num_vars + working[col - p.num_vars]);
                }
            }
            return Ok(LpSolution {
                status: LpStatus::Optimal,
                objective_value: sol.objective_value,
                x: sol.x,
                basis,
                dual_values: duals,
                pivots,
            });
        }
        violated.sort_by(|a, b| {
            b.1.partial_cmp(&a.1)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(a.0.cmp(&b.0))
        });

        // Warm basis for the grown problem: previous basic columns plus the
        // new rows' slacks.  That matrix is block-triangular (identity block
        // for the fresh slacks), hence nonsingular whenever the old basis was.
        let old_working = working.clone();
        let newly_added: Vec<usize> = violated.iter().take(ROW_BATCH).map(|&(i, _)| i).collect();
        for &i in &newly_added {
            in_working[i] = true;
            working.push(i);
        }
        working.sort_unstable();

        let row_pos: std::collections::HashMap<usize, usize> =
            working.iter().enumerate().map(|(k, &i)| (i, k)).collect();
        let mut mapped: Vec<usize> = Vec::with_capacity(working.len());
        for &col in &sol.basis {
            if col < p.num_vars {
                mapped.push(col);
            } else {
                let global = old_working[col - p.num_vars];
                mapped.push(p.num_vars + row_pos[&global]);
            }
        }
        for &i in &newly_added {
            mapped.push(p.num_vars + row_pos[&i]);
        }
        warm = Some(mapped);
    }
    Err(LpError::Numeric(
        "row generation failed to converge".into(),
    ))
}
