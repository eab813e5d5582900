//! Exact best uniform (Chebyshev) approximation of sampled univariate data by
//! continuous piecewise-linear functions with one free internal knot.
//!
//! The optimal spline over the class expressible as the pointwise maximum or
//! minimum of two affine pieces is computed exactly: each form is encoded as a
//! small mixed-integer linear program with one indicator per sample point, and
//! the two programs are solved by branch and bound over the indicator
//! structure, with relaxations handled by a built-in bounded-variable primal
//! simplex.  The winning solution is certified a posteriori through
//! alternating-extreme-point conditions, and a one-hidden-layer ReLU network
//! trained under the same uniform loss is provided as a baseline for
//! comparison.
//!
//! Module map:
//!
//! * [`funcs`]   — sampling grids, benchmark functions, CSV interchange
//! * [`spline`]  — piecewise-linear representations and conversions
//! * [`lp`]      — bounded-variable two-phase primal simplex
//! * [`milp`]    — construction of the max-form and min-form integer programs
//! * [`bnb`]     — branch and bound, the two-model driver, enumeration oracle
//! * [`cheb`]    — best-line fits, alternation analysis, optimality verdicts
//! * [`neural`]  — small ReLU networks trained under the uniform loss
//! * [`cli`]     — command-line entry points

pub mod bnb;
pub mod cheb;
pub mod cli;
pub mod funcs;
pub mod lp;
pub mod milp;
pub mod neural;
pub mod spline;
