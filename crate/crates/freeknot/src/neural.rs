//! One-hidden-layer ReLU networks trained under the uniform (Chebyshev)
//! loss, for comparison against the exact spline solver.
//!
//! The network computes `y(x) = Σ_j w2_j · max(0, w1_j·x + b1_j) + b2`,
//! which is exactly a piecewise-linear function with at most one knot per
//! hidden node. Training minimizes `max_j |y(t_j) − f(t_j)|` with ADAM or
//! ADAMAX steps on a subgradient taken at a single maximizing sample point
//! per step (lowest index on ties); an "epoch" is one such full-batch step.

use std::fmt;
use std::path::Path;
use std::time::Instant;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::funcs::SampledFunction;

/// Hidden weights below this magnitude are treated as exactly zero when
/// locating knots.
const DEAD_WEIGHT_TOL: f64 = 1e-12;

/// Errors produced by network construction and training.
#[derive(Debug, Clone, PartialEq)]
pub enum NeuralError {
    /// Weight vectors disagree in length, are empty, or contain non-finite
    /// entries.
    InvalidNet(String),
    /// Training produced a non-finite loss or parameter.
    Divergence { epoch: usize },
    /// Malformed serialized network.
    Parse(String),
    /// File I/O failure, with context.
    Io(String),
}

impl fmt::Display for NeuralError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NeuralError::InvalidNet(msg) => write!(f, "invalid network: {msg}"),
            NeuralError::Divergence { epoch } => {
                write!(f, "training diverged to a non-finite value at epoch {epoch}")
            }
            NeuralError::Parse(msg) => write!(f, "network parse error: {msg}"),
            NeuralError::Io(msg) => write!(f, "I/O error: {msg}"),
        }
    }
}

impl std::error::Error for NeuralError {}

/// A one-hidden-layer ReLU network `x ↦ Σ_j w2_j·max(0, w1_j·x + b1_j) + b2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReluNet1 {
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: f64,
}

impl ReluNet1 {
    /// Builds a network, validating equal non-zero widths and finiteness.
    pub fn new(
        w1: Vec<f64>,
        b1: Vec<f64>,
        w2: Vec<f64>,
        b2: f64,
    ) -> Result<ReluNet1, NeuralError> {
        if w1.is_empty() {
            return Err(NeuralError::InvalidNet("need at least one hidden node".into()));
        }
        if w1.len() != b1.len() || w1.len() != w2.len() {
            return Err(NeuralError::InvalidNet(format!(
                "layer sizes disagree: w1={}, b1={}, w2={}",
                w1.len(),
                b1.len(),
                w2.len()
            )));
        }
        if !w1
            .iter()
            .chain(b1.iter())
            .chain(w2.iter())
            .chain(std::iter::once(&b2))
            .all(|v| v.is_finite())
        {
            return Err(NeuralError::InvalidNet("non-finite weight".into()));
        }
        Ok(ReluNet1 { w1, b1, w2, b2 })
    }

    /// Hidden-layer width.
    pub fn hidden(&self) -> usize {
        self.w1.len()
    }

    /// Serializes to pretty JSON `{w1, b1, w2, b2}`.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("network JSON serialization cannot fail")
    }

    /// Parses the JSON form and validates it.
    pub fn from_json(text: &str) -> Result<ReluNet1, NeuralError> {
        let raw: ReluNet1 =
            serde_json::from_str(text).map_err(|e| NeuralError::Parse(e.to_string()))?;
        ReluNet1::new(raw.w1, raw.b1, raw.w2, raw.b2)
    }
}

/// Seeded random initialization: `w1, w2 ~ U(−1, 1)` (w1 first, then w2),
/// biases zero.
pub fn init_net(hidden: usize, seed: u64) -> Result<ReluNet1, NeuralError> {
    if hidden == 0 {
        return Err(NeuralError::InvalidNet("need at least one hidden node".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w1: Vec<f64> = (0..hidden).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let w2: Vec<f64> = (0..hidden).map(|_| rng.gen_range(-1.0..1.0)).collect();
    ReluNet1::new(w1, vec![0.0; hidden], w2, 0.0)
}

/// Evaluates the network at `x`.
pub fn forward(net: &ReluNet1, x: f64) -> f64 {
    let mut y = net.b2;
    for j in 0..net.hidden() {
        let z = net.w1[j] * x + net.b1[j];
        if z > 0.0 {
            y += net.w2[j] * z;
        }
    }
    y
}

/// Uniform loss: `max_j |forward(net, t_j) − f(t_j)|`.
pub fn chebyshev_loss(net: &ReluNet1, data: &SampledFunction) -> f64 {
    let mut worst = 0.0_f64;
    for j in 0..data.n() {
        worst = worst.max((forward(net, data.t(j)) - data.f(j)).abs());
    }
    worst
}

/// First-order optimizers available for training.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Optimizer {
    /// Bias-corrected first/second moments.
    Adam,
    /// First moment with an exponentially-weighted infinity-norm scale.
    Adamax,
}

impl fmt::Display for Optimizer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Optimizer::Adam => write!(f, "adam"),
            Optimizer::Adamax => write!(f, "adamax"),
        }
    }
}

/// Training hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub seed: u64,
    pub optimizer: Optimizer,
}

impl Default for TrainConfig {
    fn default() -> TrainConfig {
        TrainConfig {
            epochs: 50,
            learning_rate: 0.05,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            seed: 0,
            optimizer: Optimizer::Adam,
        }
    }
}

impl TrainConfig {
    fn validate(&self) -> Result<(), NeuralError> {
        let ok = self.learning_rate > 0.0
            && self.learning_rate.is_finite()
            && self.beta1 > 0.0
            && self.beta1 < 1.0
            && self.beta2 > 0.0
            && self.beta2 < 1.0
            && self.epsilon > 0.0;
        if ok {
            Ok(())
        } else {
            Err(NeuralError::InvalidNet(format!(
                "invalid training config: lr={}, beta1={}, beta2={}, eps={}",
                self.learning_rate, self.beta1, self.beta2, self.epsilon
            )))
        }
    }
}

/// Loss trajectory of one training run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrainHistory {
    /// Loss after each optimizer step.
    pub loss_per_epoch: Vec<f64>,
    /// Loss of the returned network (equals the last entry when any steps
    /// were taken).
    pub final_loss: f64,
    /// Wall-clock training time in seconds.
    pub wall_time: f64,
}

impl TrainHistory {
    /// Serializes to CSV with header `epoch,loss`.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("epoch,loss\n");
        for (e, loss) in self.loss_per_epoch.iter().enumerate() {
            out.push_str(&format!("{},{:.16e}\n", e + 1, loss));
        }
        out
    }

    /// Writes the CSV form to a file.
    pub fn write_csv(&self, path: &Path) -> Result<(), NeuralError> {
        std::fs::write(path, self.to_csv_string())
            .map_err(|e| NeuralError::Io(format!("writing {}: {e}", path.display())))
    }
}

/// Flattened parameter order used by the optimizers: w1, b1, w2, b2.
struct Params {
    theta: Vec<f64>,
    hidden: usize,
}

impl Params {
    fn from_net(net: &ReluNet1) -> Params {
        let mut theta = Vec::with_capacity(3 * net.hidden() + 1);
        theta.extend_from_slice(&net.w1);
        theta.extend_from_slice(&net.b1);
        theta.extend_from_slice(&net.w2);
        theta.push(net.b2);
        Params {
            theta,
            hidden: net.hidden(),
        }
    }

    fn to_net(&self) -> ReluNet1 {
        let n = self.hidden;
        ReluNet1 {
            w1: self.theta[0..n].to_vec(),
            b1: self.theta[n..2 * n].to_vec(),
            w2: self.theta[2 * n..3 * n].to_vec(),
            b2: self.theta[3 * n],
        }
    }
}

/// Subgradient of the uniform loss at the current parameters.
///
/// The loss is `max_j |y(t_j) − f_j|`; the subgradient is taken at the
/// single maximizing point (lowest index on ties) and propagated through
/// the ReLUs with the convention that a unit exactly at its kink
/// contributes zero. Returns `None` at an exact fit (zero loss).
fn loss_subgradient(net: &ReluNet1, data: &SampledFunction) -> Option<(Vec<f64>, f64, usize)> {
    let mut best_j = 0usize;
    let mut best_abs = -1.0_f64;
    let mut best_err = 0.0_f64;
    for j in 0..data.n() {
        let e = forward(net, data.t(j)) - data.f(j);
        if e.abs() > best_abs {
            best_abs = e.abs();
            best_err = e;
            best_j = j;
        }
    }
    if best_abs == 0.0 {
        return None;
    }
    let sigma = if best_err > 0.0 { 1.0 } else { -1.0 };
    let x = data.t(best_j);
    let n = net.hidden();
    let mut g = vec![0.0; 3 * n + 1];
    for j in 0..n {
        let z = net.w1[j] * x + net.b1[j];
        if z > 0.0 {
            g[j] = sigma * net.w2[j] * x; // d/d w1_j
            g[n + j] = sigma * net.w2[j]; // d/d b1_j
            g[2 * n + j] = sigma * z; // d/d w2_j
        }
    }
    g[3 * n] = sigma; // d/d b2
    Some((g, best_abs, best_j))
}

/// Exposes the subgradient used by one training step, for verification
/// against finite differences. Returns the flattened gradient in the order
/// w1, b1, w2, b2 along with the loss and the maximizing sample index.
pub fn training_subgradient(
    net: &ReluNet1,
    data: &SampledFunction,
) -> Option<(Vec<f64>, f64, usize)> {
    loss_subgradient(net, data)
}

/// Runs `cfg.epochs` optimizer steps on the uniform loss.
///
/// Deterministic for fixed inputs and config; the RNG seed only matters to
/// callers that initialize via [`init_net`]. Fails with
/// [`NeuralError::Divergence`] if the loss or any parameter becomes
/// non-finite.
pub fn train(
    net0: &ReluNet1,
    data: &SampledFunction,
    cfg: &TrainConfig,
) -> Result<(ReluNet1, TrainHistory), NeuralError> {
    cfg.validate()?;
    let start = Instant::now();
    let mut params = Params::from_net(net0);
    let dim = params.theta.len();
    let mut m = vec![0.0; dim];
    let mut v = vec![0.0; dim]; // second moment (ADAM) or infinity norm (ADAMAX)
    let mut history = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        let net = params.to_net();
        if let Some((g, _, _)) = loss_subgradient(&net, data) {
            let t = (epoch + 1) as f64;
            match cfg.optimizer {
                Optimizer::Adam => {
                    let bc1 = 1.0 - cfg.beta1.powf(t);
                    let bc2 = 1.0 - cfg.beta2.powf(t);
                    for i in 0..dim {
                        m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
                        v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
                        let m_hat = m[i] / bc1;
                        let v_hat = v[i] / bc2;
                        params.theta[i] -= cfg.learning_rate * m_hat / (v_hat.sqrt() + cfg.epsilon);
                    }
                }
                Optimizer::Adamax => {
                    let bc1 = 1.0 - cfg.beta1.powf(t);
                    for i in 0..dim {
                        m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
                        v[i] = (cfg.beta2 * v[i]).max(g[i].abs());
                        params.theta[i] -=
                            cfg.learning_rate * m[i] / (bc1 * (v[i] + cfg.epsilon));
                    }
                }
            }
        }
        if !params.theta.iter().all(|p| p.is_finite()) {
            return Err(NeuralError::Divergence { epoch });
        }
        let loss = chebyshev_loss(&params.to_net(), data);
        if !loss.is_finite() {
            return Err(NeuralError::Divergence { epoch });
        }
        history.push(loss);
    }
    let trained = params.to_net();
    let final_loss = chebyshev_loss(&trained, data);
    Ok((
        trained,
        TrainHistory {
            loss_per_epoch: history,
            final_loss,
            wall_time: start.elapsed().as_secs_f64(),
        },
    ))
}

/// Knot locations of the network inside the open interval `(c, d)`:
/// `{ −b1_j / w1_j : |w1_j| > 1e−12 }`, sorted, near-duplicates merged
/// (within `1e−9·(d−c)`).
pub fn extract_knots(net: &ReluNet1, c: f64, d: f64) -> Vec<f64> {
    let merge_tol = 1e-9 * (d - c);
    let mut knots: Vec<f64> = (0..net.hidden())
        .filter(|&j| net.w1[j].abs() > DEAD_WEIGHT_TOL)
        .map(|j| -net.b1[j] / net.w1[j] + 0.0) // + 0.0 normalizes -0.0
        .filter(|theta| *theta > c && *theta < d)
        .collect();
    knots.sort_by(|x, y| x.total_cmp(y));
    knots.dedup_by(|next, kept| (*next - *kept).abs() <= merge_tol);
    knots
}
