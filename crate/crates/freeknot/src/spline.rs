//! Piecewise-linear spline representations and evaluation.
//!
//! Two forms are provided:
//!
//! * [`OneKnotSpline`] — a continuous function that is either a single
//!   affine piece or the pointwise max/min of two affine pieces, with the
//!   internal knot (if any) at the crossing of the two pieces.
//! * [`LinearSpline`] — the general truncated-power form
//!   `s(t) = a_0 + Σ_i a_i · max(0, t − θ_{i-1})` over an ordered knot
//!   vector `θ_0 ≤ … ≤ θ_n` whose first and last entries are the domain
//!   endpoints.
//!
//! The module also converts a one-hidden-layer ReLU network into an exactly
//! equivalent [`LinearSpline`] ([`relu_to_spline`]), and measures residual
//! profiles of any spline against sampled data ([`deviation`]).

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::funcs::SampledFunction;
use crate::neural::ReluNet1;

/// Two pieces are considered identical when both coefficients agree within
/// this tolerance (scaled by magnitude).
const IDENTICAL_TOL: f64 = 1e-12;

/// Errors produced by spline evaluation and parsing.
#[derive(Debug, Clone, PartialEq)]
pub enum SplineError {
    /// Evaluation point lies outside the spline's knot span.
    OutOfDomain { t: f64, lo: f64, hi: f64 },
    /// Malformed serialized spline.
    Parse(String),
    /// Construction from inconsistent parts.
    Invalid(String),
    /// File I/O failure, with context.
    Io(String),
}

impl fmt::Display for SplineError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SplineError::OutOfDomain { t, lo, hi } => {
                write!(f, "t = {t} outside the spline domain [{lo}, {hi}]")
            }
            SplineError::Parse(msg) => write!(f, "spline parse error: {msg}"),
            SplineError::Invalid(msg) => write!(f, "invalid spline: {msg}"),
            SplineError::Io(msg) => write!(f, "I/O error: {msg}"),
        }
    }
}

impl std::error::Error for SplineError {}

/// One affine piece `t ↦ slope·t + intercept`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AffinePiece {
    pub slope: f64,
    pub intercept: f64,
}

impl AffinePiece {
    pub fn new(slope: f64, intercept: f64) -> AffinePiece {
        // Normalize negative zeros so serialized fits are sign-stable.
        AffinePiece {
            slope: slope + 0.0,
            intercept: intercept + 0.0,
        }
    }

    /// Evaluates the line at `t`.
    pub fn eval(&self, t: f64) -> f64 {
        self.slope * t + self.intercept
    }

    /// Whether both coefficients agree with `other` within a small
    /// magnitude-scaled tolerance.
    pub fn nearly_equal(&self, other: &AffinePiece) -> bool {
        let scale_a = 1.0_f64.max(self.slope.abs()).max(other.slope.abs());
        let scale_b = 1.0_f64
            .max(self.intercept.abs())
            .max(other.intercept.abs());
        (self.slope - other.slope).abs() <= IDENTICAL_TOL * scale_a
            && (self.intercept - other.intercept).abs() <= IDENTICAL_TOL * scale_b
    }
}

/// How the two pieces of a [`OneKnotSpline`] combine.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SplineKind {
    /// `s(t) = max(piece1(t), piece2(t))` — convex, kink points up.
    MaxOfTwo,
    /// `s(t) = min(piece1(t), piece2(t))` — concave, kink points down.
    MinOfTwo,
    /// A single affine piece (`piece1`); no internal knot.
    Single,
}

impl fmt::Display for SplineKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SplineKind::MaxOfTwo => write!(f, "max"),
            SplineKind::MinOfTwo => write!(f, "min"),
            SplineKind::Single => write!(f, "one piece"),
        }
    }
}

/// A continuous piecewise-linear function with at most one internal knot.
///
/// Invariants maintained by the constructors:
/// * `kind == Single` exactly when the pieces are identical (within a small
///   tolerance) or their crossing lies outside the domain the spline was
///   classified on; then `knot` is `None` and `piece1` is the active line.
/// * Otherwise `knot = (b₂ − b₁)/(a₁ − a₂)`, the unique crossing of the two
///   pieces, and it lies inside the classification domain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OneKnotSpline {
    pub piece1: AffinePiece,
    pub piece2: AffinePiece,
    pub kind: SplineKind,
    pub knot: Option<f64>,
}

impl OneKnotSpline {
    /// A single affine piece with no internal knot.
    pub fn single(piece: AffinePiece) -> OneKnotSpline {
        OneKnotSpline {
            piece1: piece,
            piece2: piece,
            kind: SplineKind::Single,
            knot: None,
        }
    }

    /// Classifies the max/min of two lines over `[c, d]`.
    ///
    /// `combine` must be `MaxOfTwo` or `MinOfTwo` and states how the lines
    /// combine; the result degrades to `Single` when the pieces are
    /// (nearly) identical or their crossing lies outside `[c, d]`, in which
    /// case the piece that realizes the max/min across all of `[c, d]`
    /// becomes the single active line.
    pub fn from_lines(
        piece1: AffinePiece,
        piece2: AffinePiece,
        combine: SplineKind,
        c: f64,
        d: f64,
    ) -> OneKnotSpline {
        assert!(
            combine != SplineKind::Single,
            "combine must state max or min; use OneKnotSpline::single for one piece"
        );
        if piece1.nearly_equal(&piece2) {
            return OneKnotSpline::single(piece1);
        }
        let denom = piece1.slope - piece2.slope;
        if denom != 0.0 {
            let theta = (piece2.intercept - piece1.intercept) / denom + 0.0;
            if theta >= c && theta <= d {
                return OneKnotSpline {
                    piece1,
                    piece2,
                    kind: combine,
                    knot: Some(theta),
                };
            }
        }
        // Parallel distinct lines, or a crossing outside the domain: one
        // line realizes the combination on all of [c, d].
        let mid = 0.5 * (c + d);
        let take_first = match combine {
            SplineKind::MaxOfTwo => piece1.eval(mid) >= piece2.eval(mid),
            SplineKind::MinOfTwo => piece1.eval(mid) <= piece2.eval(mid),
            SplineKind::Single => unreachable!(),
        };
        OneKnotSpline::single(if take_first { piece1 } else { piece2 })
    }

    /// Evaluates the spline at `t`.
    pub fn eval(&self, t: f64) -> f64 {
        let v1 = self.piece1.eval(t);
        let v2 = self.piece2.eval(t);
        match self.kind {
            SplineKind::MaxOfTwo => v1.max(v2),
            SplineKind::MinOfTwo => v1.min(v2),
            SplineKind::Single => v1,
        }
    }

    /// The piece active on the left (right) of the knot, for two-piece
    /// kinds. For a max the left piece is the one with the smaller slope;
    /// for a min, the one with the larger slope.
    fn left_right_pieces(&self) -> (AffinePiece, AffinePiece) {
        match self.kind {
            SplineKind::Single => (self.piece1, self.piece1),
            SplineKind::MaxOfTwo => {
                if self.piece1.slope <= self.piece2.slope {
                    (self.piece1, self.piece2)
                } else {
                    (self.piece2, self.piece1)
                }
            }
            SplineKind::MinOfTwo => {
                if self.piece1.slope >= self.piece2.slope {
                    (self.piece1, self.piece2)
                } else {
                    (self.piece2, self.piece1)
                }
            }
        }
    }
}

/// A piecewise-linear function in truncated-power form.
///
/// `eval(t) = a[0] + Σ_{i=1..} a[i] · max(0, t − knots[i−1])` for
/// `t ∈ [knots[0], knots[last]]`. `knots` is non-decreasing; its first and
/// last entries are the domain endpoints and carry no hinge of their own
/// (the hinge of coefficient `a[i]` sits at `knots[i−1]`, so the final knot
/// is never a hinge location).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearSpline {
    pub a: Vec<f64>,
    pub knots: Vec<f64>,
}

impl LinearSpline {
    /// Builds and validates a truncated-power spline.
    pub fn new(a: Vec<f64>, knots: Vec<f64>) -> Result<LinearSpline, SplineError> {
        if knots.len() < 2 {
            return Err(SplineError::Invalid(
                "need at least the two domain endpoints as knots".into(),
            ));
        }
        if a.len() != knots.len() {
            return Err(SplineError::Invalid(format!(
                "coefficient count {} must equal knot count {}",
                a.len(),
                knots.len()
            )));
        }
        if !knots.windows(2).all(|w| w[1] >= w[0]) {
            return Err(SplineError::Invalid("knots must be non-decreasing".into()));
        }
        if !a.iter().chain(knots.iter()).all(|v| v.is_finite()) {
            return Err(SplineError::Invalid("non-finite coefficient or knot".into()));
        }
        Ok(LinearSpline { a, knots })
    }

    /// Domain endpoints `(c, d)`.
    pub fn domain(&self) -> (f64, f64) {
        (self.knots[0], self.knots[self.knots.len() - 1])
    }

    /// Knots strictly inside the domain.
    pub fn internal_knots(&self) -> &[f64] {
        &self.knots[1..self.knots.len() - 1]
    }

    /// Evaluates the truncated-power form at `t ∈ [c, d]`.
    pub fn eval(&self, t: f64) -> Result<f64, SplineError> {
        let (lo, hi) = self.domain();
        let slack = 1e-12 * (1.0 + (hi - lo).abs());
        if t < lo - slack || t > hi + slack {
            return Err(SplineError::OutOfDomain { t, lo, hi });
        }
        let mut v = self.a[0];
        for i in 1..self.a.len() {
            let hinge = t - self.knots[i - 1];
            if hinge > 0.0 {
                v += self.a[i] * hinge;
            }
        }
        Ok(v)
    }
}

/// Converts a one-knot spline on `[c, d]` to truncated-power form.
///
/// The result agrees with [`OneKnotSpline::eval`] on all of `[c, d]`;
/// single pieces map to one hinge-free segment (`a` of length 2).
pub fn to_truncated_power(s: &OneKnotSpline, c: f64, d: f64) -> LinearSpline {
    match (s.kind, s.knot) {
        (SplineKind::Single, _) | (_, None) => LinearSpline {
            a: vec![s.piece1.eval(c), s.piece1.slope],
            knots: vec![c, d],
        },
        (_, Some(theta)) => {
            let (left, right) = s.left_right_pieces();
            let theta = theta.clamp(c, d);
            LinearSpline {
                a: vec![left.eval(c), left.slope, right.slope - left.slope],
                knots: vec![c, theta, d],
            }
        }
    }
}

/// Converts a one-hidden-layer ReLU network restricted to `[c, d]` into an
/// exactly equivalent truncated-power spline.
///
/// Each hidden node `j` computes `w2_j · max(0, w1_j·t + b1_j)`. Nodes with
/// `|w1_j| ≤ 1e−12` or with hinge location outside the open interval
/// `(c, d)` are affine over the domain and are absorbed into the base line;
/// the remaining nodes contribute one hinge each at `θ_j = −b1_j / w1_j`
/// with slope jump `w2_j·|w1_j|`. Hinges closer than `1e−9·(d−c)` merge.
pub fn relu_to_spline(net: &ReluNet1, c: f64, d: f64) -> LinearSpline {
    let span = d - c;
    let merge_tol = 1e-9 * span;
    let mid = 0.5 * (c + d);
    let mut base_slope = 0.0;
    let mut base_icpt = net.b2;
    let mut hinges: Vec<(f64, f64)> = Vec::new();
    for j in 0..net.hidden() {
        let (w1, b1, w2) = (net.w1[j], net.b1[j], net.w2[j]);
        if w1.abs() <= 1e-12 {
            // Constant node: max(0, b1) regardless of t.
            if b1 > 0.0 {
                base_icpt += w2 * b1;
            }
            continue;
        }
        let theta = -b1 / w1;
        if theta > c && theta < d {
            if w1 > 0.0 {
                // Inactive left of the hinge, active right of it.
                hinges.push((theta, w2 * w1));
            } else {
                // Active left of the hinge; fold the active part into the
                // base line and cancel it past the hinge.
                base_slope += w2 * w1;
                base_icpt += w2 * b1;
                hinges.push((theta, -w2 * w1));
            }
        } else {
            // One-signed over [c, d]: either fully active or fully dead.
            if w1 * mid + b1 > 0.0 {
                base_slope += w2 * w1;
                base_icpt += w2 * b1;
            }
        }
    }
    hinges.sort_by(|x, y| x.0.total_cmp(&y.0));
    let mut merged: Vec<(f64, f64)> = Vec::with_capacity(hinges.len());
    for (theta, jump) in hinges {
        match merged.last_mut() {
            Some((prev, acc)) if (theta - *prev).abs() <= merge_tol => *acc += jump,
            _ => merged.push((theta, jump)),
        }
    }
    let mut a = Vec::with_capacity(merged.len() + 2);
    let mut knots = Vec::with_capacity(merged.len() + 2);
    a.push(base_icpt + base_slope * c);
    a.push(base_slope);
    knots.push(c);
    for (theta, jump) in merged {
        knots.push(theta);
        a.push(jump);
    }
    knots.push(d);
    LinearSpline { a, knots }
}

/// Residuals of a spline against sampled data.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeviationProfile {
    /// `f(t_j) − s(t_j)` per sample point.
    pub residuals: Vec<f64>,
    /// Largest absolute residual.
    pub sup: f64,
    /// Indices whose absolute residual is within `tau·sup` of the sup
    /// (all indices when the fit is exact).
    pub argmax_indices: Vec<usize>,
}

/// Residual profile of a one-knot spline against `data`.
pub fn deviation(s: &OneKnotSpline, data: &SampledFunction, tau: f64) -> DeviationProfile {
    deviation_with(|t| s.eval(t), data, tau)
}

/// Residual profile of a truncated-power spline against `data`.
///
/// Fails only if some sample point lies outside the spline domain.
pub fn deviation_linear(
    s: &LinearSpline,
    data: &SampledFunction,
    tau: f64,
) -> Result<DeviationProfile, SplineError> {
    let mut vals = Vec::with_capacity(data.n());
    for j in 0..data.n() {
        vals.push(s.eval(data.t(j))?);
    }
    Ok(profile_from_residuals(
        (0..data.n()).map(|j| data.f(j) - vals[j]).collect(),
        tau,
    ))
}

/// Residual profile of an arbitrary evaluator against `data`.
pub fn deviation_with<F: Fn(f64) -> f64>(
    s: F,
    data: &SampledFunction,
    tau: f64,
) -> DeviationProfile {
    profile_from_residuals(
        (0..data.n()).map(|j| data.f(j) - s(data.t(j))).collect(),
        tau,
    )
}

fn profile_from_residuals(residuals: Vec<f64>, tau: f64) -> DeviationProfile {
    let sup = residuals.iter().fold(0.0_f64, |m, r| m.max(r.abs()));
    let threshold = (1.0 - tau) * sup;
    let argmax_indices = residuals
        .iter()
        .enumerate()
        .filter(|(_, r)| r.abs() >= threshold)
        .map(|(j, _)| j)
        .collect();
    DeviationProfile {
        residuals,
        sup,
        argmax_indices,
    }
}

/// Serialized form of a one-knot spline together with its domain.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct OneKnotSplineFile {
    kind: SplineKind,
    pieces: Vec<AffinePiece>,
    knot: Option<f64>,
    interval: [f64; 2],
}

/// Serializes a one-knot spline (with its domain) to pretty JSON.
pub fn one_knot_to_json(s: &OneKnotSpline, c: f64, d: f64) -> String {
    let pieces = match s.kind {
        SplineKind::Single => vec![s.piece1],
        _ => vec![s.piece1, s.piece2],
    };
    let file = OneKnotSplineFile {
        kind: s.kind,
        pieces,
        knot: s.knot,
        interval: [c, d],
    };
    serde_json::to_string_pretty(&file).expect("spline JSON serialization cannot fail")
}

/// Parses the JSON form produced by [`one_knot_to_json`]; returns the
/// spline and its domain `(c, d)`.
pub fn one_knot_from_json(text: &str) -> Result<(OneKnotSpline, (f64, f64)), SplineError> {
    let file: OneKnotSplineFile =
        serde_json::from_str(text).map_err(|e| SplineError::Parse(e.to_string()))?;
    let [c, d] = file.interval;
    if !c.is_finite() || !d.is_finite() || c >= d {
        return Err(SplineError::Parse(format!("bad interval [{c}, {d}]")));
    }
    let spline = match (file.kind, file.pieces.as_slice()) {
        (SplineKind::Single, [p]) | (SplineKind::Single, [p, _]) => OneKnotSpline::single(*p),
        (kind, [p1, p2]) => {
            let s = OneKnotSpline::from_lines(*p1, *p2, kind, c, d);
            match (s.knot, file.knot) {
                (Some(k1), Some(k2)) if (k1 - k2).abs() <= 1e-9 * (1.0 + k2.abs()) => s,
                (None, None) => s,
                _ => {
                    return Err(SplineError::Parse(format!(
                        "stored knot {:?} disagrees with the pieces' crossing {:?}",
                        file.knot, s.knot
                    )))
                }
            }
        }
        (kind, pieces) => {
            return Err(SplineError::Parse(format!(
                "kind {kind:?} with {} pieces is not a valid combination",
                pieces.len()
            )))
        }
    };
    Ok((spline, (c, d)))
}

/// Writes a figure-data CSV with header `t,f,s,residual`, one row per
/// sample point, at full float precision.
pub fn write_fit_csv(
    path: &Path,
    data: &SampledFunction,
    s: &OneKnotSpline,
) -> Result<(), SplineError> {
    let mut out = String::with_capacity(data.n() * 96 + 16);
    out.push_str("t,f,s,residual\n");
    for j in 0..data.n() {
        let t = data.t(j);
        let f = data.f(j);
        let v = s.eval(t);
        out.push_str(&format!(
            "{:.16e},{:.16e},{:.16e},{:.16e}\n",
            t,
            f,
            v,
            f - v
        ));
    }
    std::fs::write(path, out).map_err(|e| SplineError::Io(format!("writing {}: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::funcs::{make_grid, sample, sample_with, BenchmarkId};

    fn vee() -> OneKnotSpline {
        // max(-t + 0.125, t + 0.125): the symmetric vee with apex 0.125.
        OneKnotSpline::from_lines(
            AffinePiece::new(-1.0, 0.125),
            AffinePiece::new(1.0, 0.125),
            SplineKind::MaxOfTwo,
            -1.0,
            1.0,
        )
    }

    #[test]
    fn eval_examples() {
        assert_eq!(vee().eval(0.0), 0.125);
        assert_eq!(OneKnotSpline::single(AffinePiece::new(0.0, 0.0)).eval(3.7), 0.0);
        let m = OneKnotSpline::from_lines(
            AffinePiece::new(1.0, 0.0),
            AffinePiece::new(-1.0, 0.0),
            SplineKind::MinOfTwo,
            -1.0,
            1.0,
        );
        assert_eq!(m.eval(0.3), -0.3);
    }

    #[test]
    fn classification_identical_and_outside_crossings() {
        let s = OneKnotSpline::from_lines(
            AffinePiece::new(1.0, 0.0),
            AffinePiece::new(1.0, 0.0),
            SplineKind::MinOfTwo,
            0.0,
            1.0,
        );
        assert_eq!(s.kind, SplineKind::Single);
        assert_eq!(s.knot, None);

        // Crossing at t = 2, outside [0, 1]: the max is realized by the
        // line that is higher on the interval.
        let s = OneKnotSpline::from_lines(
            AffinePiece::new(0.0, 1.0),
            AffinePiece::new(1.0, -1.0),
            SplineKind::MaxOfTwo,
            0.0,
            1.0,
        );
        assert_eq!(s.kind, SplineKind::Single);
        assert_eq!(s.piece1, AffinePiece::new(0.0, 1.0));

        // Parallel distinct lines: min picks the lower one.
        let s = OneKnotSpline::from_lines(
            AffinePiece::new(2.0, 5.0),
            AffinePiece::new(2.0, 3.0),
            SplineKind::MinOfTwo,
            0.0,
            1.0,
        );
        assert_eq!(s.kind, SplineKind::Single);
        assert_eq!(s.piece1, AffinePiece::new(2.0, 3.0));
    }

    #[test]
    fn knot_is_the_crossing() {
        let s = vee();
        assert_eq!(s.kind, SplineKind::MaxOfTwo);
        assert_eq!(s.knot, Some(0.0));
        // Continuity at the knot: both pieces agree there.
        assert_eq!(s.piece1.eval(0.0), s.piece2.eval(0.0));
    }

    #[test]
    fn truncated_power_eval_examples() {
        let s = LinearSpline::new(vec![1.0, 2.0], vec![0.0, 1.0]).unwrap();
        assert_eq!(s.eval(0.5).unwrap(), 2.0);
        let s = LinearSpline::new(vec![0.0, 1.0, -2.0], vec![-1.0, 0.0, 1.0]).unwrap();
        assert_eq!(s.eval(0.5).unwrap(), 0.5);
        assert_eq!(s.eval(-0.5).unwrap(), 0.5);
        assert!(matches!(
            s.eval(1.5),
            Err(SplineError::OutOfDomain { .. })
        ));
    }

    #[test]
    fn to_truncated_power_examples() {
        let lin = to_truncated_power(&vee(), -1.0, 1.0);
        assert_eq!(lin.a, vec![1.125, -1.0, 2.0]);
        assert_eq!(lin.knots, vec![-1.0, 0.0, 1.0]);

        let single = OneKnotSpline::single(AffinePiece::new(2.0, 3.0));
        let lin = to_truncated_power(&single, 0.0, 1.0);
        assert_eq!(lin.a, vec![3.0, 2.0]);
        assert_eq!(lin.knots, vec![0.0, 1.0]);

        let ident = OneKnotSpline::from_lines(
            AffinePiece::new(1.0, 0.0),
            AffinePiece::new(1.0, 0.0),
            SplineKind::MinOfTwo,
            0.0,
            1.0,
        );
        let lin = to_truncated_power(&ident, 0.0, 1.0);
        assert_eq!(lin.a.len(), 2);
    }

    #[test]
    fn truncated_power_matches_one_knot_on_probe_grid() {
        let cases = [
            vee(),
            OneKnotSpline::from_lines(
                AffinePiece::new(2.5, 0.3),
                AffinePiece::new(-0.7, 1.1),
                SplineKind::MinOfTwo,
                -1.0,
                1.0,
            ),
            OneKnotSpline::single(AffinePiece::new(-0.4, 0.9)),
        ];
        for s in &cases {
            let lin = to_truncated_power(s, -1.0, 1.0);
            for k in 0..=1000 {
                let t = -1.0 + 2.0 * (k as f64) / 1000.0;
                let direct = s.eval(t);
                let via = lin.eval(t).unwrap();
                assert!(
                    (direct - via).abs() <= 1e-12 * (1.0 + direct.abs()),
                    "mismatch at t={t}: {direct} vs {via}"
                );
            }
        }
    }

    #[test]
    fn relu_conversion_examples() {
        // The ReLU itself: one node, identity weights.
        let net = ReluNet1::new(vec![1.0], vec![0.0], vec![1.0], 0.0).unwrap();
        let s = relu_to_spline(&net, -1.0, 1.0);
        assert_eq!(s.internal_knots(), &[0.0]);
        assert_eq!(s.eval(-0.5).unwrap(), 0.0);
        assert_eq!(s.eval(0.5).unwrap(), 0.5);

        // Dead direction: w1 = 0 makes the node a constant.
        let net = ReluNet1::new(vec![0.0], vec![5.0], vec![2.0], 1.0).unwrap();
        let s = relu_to_spline(&net, -1.0, 1.0);
        assert!(s.internal_knots().is_empty());
        assert_eq!(s.eval(0.3).unwrap(), 11.0);

        // Coincident hinge locations merge into a single knot.
        let net = ReluNet1::new(
            vec![1.0, 2.0],
            vec![-0.3, -0.6],
            vec![1.0, 1.0],
            0.0,
        )
        .unwrap();
        let s = relu_to_spline(&net, -1.0, 1.0);
        assert_eq!(s.internal_knots().len(), 1);
        assert!((s.internal_knots()[0] - 0.3).abs() < 1e-12);
    }

    #[test]
    fn relu_conversion_matches_forward_on_probes() {
        // A mixed net: positive, negative, and out-of-domain hinges.
        let net = ReluNet1::new(
            vec![1.5, -2.0, 0.5, 3.0],
            vec![0.3, -0.4, 2.0, -0.9],
            vec![0.7, -1.3, 2.0, 0.25],
            -0.6,
        )
        .unwrap();
        let s = relu_to_spline(&net, -1.0, 1.0);
        assert!(s.internal_knots().len() <= net.hidden());
        for k in 0..=1000 {
            let t = -1.0 + 2.0 * (k as f64) / 1000.0;
            let y = crate::neural::forward(&net, t);
            let v = s.eval(t).unwrap();
            assert!((y - v).abs() <= 1e-9, "mismatch at t={t}: {y} vs {v}");
        }
    }

    #[test]
    fn deviation_examples() {
        let g = make_grid(-1.0, 1.0, 1e-3).unwrap();
        let f1 = sample(BenchmarkId::F1, &g);
        let p = deviation(&vee(), &f1, 1e-6);
        assert!((p.sup - 0.125).abs() <= 1e-3);

        // Interpolating spline: zero residuals, every index attains the sup.
        let line = OneKnotSpline::single(AffinePiece::new(2.0, -0.5));
        let data = sample_with(|t| 2.0 * t - 0.5, &g, "line").unwrap();
        let p = deviation(&line, &data, 1e-6);
        assert_eq!(p.sup, 0.0);
        assert_eq!(p.argmax_indices.len(), data.n());

        // The horizontal line through zero against one full sine period.
        let f3 = sample(BenchmarkId::F3, &g);
        let p = deviation(
            &OneKnotSpline::single(AffinePiece::new(0.0, 0.0)),
            &f3,
            1e-6,
        );
        assert!((p.sup - 0.999).abs() <= 5e-3);
    }

    #[test]
    fn json_round_trip() {
        let s = vee();
        let text = one_knot_to_json(&s, -1.0, 1.0);
        let (back, (c, d)) = one_knot_from_json(&text).unwrap();
        assert_eq!(back, s);
        assert_eq!((c, d), (-1.0, 1.0));

        let single = OneKnotSpline::single(AffinePiece::new(0.25, -1.0));
        let text = one_knot_to_json(&single, 0.0, 2.0);
        let (back, _) = one_knot_from_json(&text).unwrap();
        assert_eq!(back, single);

        assert!(one_knot_from_json("{}").is_err());
        assert!(one_knot_from_json("not json").is_err());
    }

    #[test]
    fn fit_csv_has_expected_shape() {
        let g = make_grid(0.0, 1.0, 0.5).unwrap();
        let data = sample(BenchmarkId::F1, &g);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("fig.csv");
        write_fit_csv(&path, &data, &vee()).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("t,f,s,residual"));
        assert_eq!(lines.count(), 3);
    }
}
