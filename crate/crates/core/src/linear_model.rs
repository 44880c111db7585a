//! Class-weighted L2-regularized logistic regression.
//!
//! The binary trainer minimizes
//!
//! ```text
//! P(w, b) = ½ (‖w‖² + b²) + Σᵢ costᵢ · ln(1 + exp(−yᵢ (w·xᵢ + b)))
//! ```
//!
//! where the intercept `b` is handled as one extra feature fixed at 1 and is
//! regularized along with `w` (drop it with `bias: false`). The solver is
//! dual coordinate descent: each pass visits the instances in a shuffled
//! order and solves the one-variable dual subproblem with a safeguarded
//! Newton iteration, maintaining `w = Σ αᵢ yᵢ xᵢ`. Training stops when the
//! Euclidean norm of the primal gradient falls below `tolerance`.
//!
//! Multiclass problems are decomposed one-vs-rest. Every instance's cost is
//! `C × class_weights[its own label]`, in every subproblem.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::weighting::SparseVector;

const SHUFFLE_SEED: u64 = 0x5eed;
const MAX_INNER_NEWTON: usize = 100;
/// Dual passes before handing over to the primal Newton phase.
const DUAL_PASS_LIMIT: usize = 100;
const MAX_CG_STEPS: usize = 250;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    /// Cost of a unit of logistic loss relative to the regularizer.
    pub c: f64,
    /// Per-class multiplier of `c`; classes not listed use 1.0.
    #[serde(default)]
    pub class_weights: BTreeMap<String, f64>,
    #[serde(default = "default_true")]
    pub bias: bool,
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    #[serde(default = "default_max_iterations")]
    pub max_iterations: usize,
}

fn default_true() -> bool {
    true
}

fn default_tolerance() -> f64 {
    1e-6
}

fn default_max_iterations() -> usize {
    10_000
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            c: 1.0,
            class_weights: BTreeMap::new(),
            bias: true,
            tolerance: default_tolerance(),
            max_iterations: default_max_iterations(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(Error::Config(format!("C must be positive, got {}", self.c)));
        }
        if let Some((class, w)) = self.class_weights.iter().find(|(_, &w)| !(w > 0.0 && w.is_finite())) {
            return Err(Error::Config(format!(
                "weight of class {class:?} must be positive, got {w}"
            )));
        }
        if !(self.tolerance > 0.0 && self.tolerance.is_finite()) {
            return Err(Error::Config("tolerance must be positive".into()));
        }
        if self.max_iterations == 0 {
            return Err(Error::Config("max_iterations must be at least 1".into()));
        }
        Ok(())
    }

    pub fn class_weight(&self, class: &str) -> f64 {
        self.class_weights.get(class).copied().unwrap_or(1.0)
    }

    /// Per-instance cost for an instance whose gold label is `class`.
    pub fn cost_for(&self, class: &str) -> f64 {
        self.c * self.class_weight(class)
    }
}

/// Result of one binary training run.
#[derive(Debug, Clone, PartialEq)]
pub struct BinaryFit {
    pub weights: Vec<f64>,
    pub bias: f64,
    /// Outer passes over the data.
    pub iterations: usize,
    pub converged: bool,
    pub gradient_norm: f64,
}

/// `ln(1 + exp(-m))` without overflow.
fn log1p_exp_neg(m: f64) -> f64 {
    if m >= 0.0 {
        (-m).exp().ln_1p()
    } else {
        -m + m.exp().ln_1p()
    }
}

/// `1 / (1 + exp(m))`
fn sigmoid_neg(m: f64) -> f64 {
    if m >= 0.0 {
        let e = (-m).exp();
        e / (1.0 + e)
    } else {
        1.0 / (1.0 + m.exp())
    }
}

fn margin(x: &SparseVector, w: &[f64], bias: f64) -> f64 {
    x.dot_dense(w) + bias
}

/// Primal objective. With `use_bias` false the intercept is ignored.
pub fn objective(x: &[SparseVector], y: &[f64], costs: &[f64], w: &[f64], bias: f64, use_bias: bool) -> f64 {
    let bias = if use_bias { bias } else { 0.0 };
    let reg = 0.5 * (w.iter().map(|v| v * v).sum::<f64>() + bias * bias);
    let loss: f64 = x
        .iter()
        .zip(y)
        .zip(costs)
        .map(|((xi, &yi), &ci)| ci * log1p_exp_neg(yi * margin(xi, w, bias)))
        .sum();
    reg + loss
}

/// Gradient of [`objective`] with respect to `(w, bias)`. The bias
/// component is 0 when `use_bias` is false.
pub fn gradient(x: &[SparseVector], y: &[f64], costs: &[f64], w: &[f64], bias: f64, use_bias: bool) -> (Vec<f64>, f64) {
    let bias = if use_bias { bias } else { 0.0 };
    let mut grad = w.to_vec();
    let mut grad_bias = bias;
    for ((xi, &yi), &ci) in x.iter().zip(y).zip(costs) {
        let coef = -ci * yi * sigmoid_neg(yi * margin(xi, w, bias));
        for &(j, v) in &xi.entries {
            grad[j] += coef * v;
        }
        grad_bias += coef;
    }
    if !use_bias {
        grad_bias = 0.0;
    }
    (grad, grad_bias)
}

fn gradient_norm(x: &[SparseVector], y: &[f64], costs: &[f64], w: &[f64], bias: f64, use_bias: bool) -> f64 {
    let (g, gb) = gradient(x, y, costs, w, bias, use_bias);
    (g.iter().map(|v| v * v).sum::<f64>() + gb * gb).sqrt()
}

/// Trains one binary model; `y` holds ±1 labels.
///
/// Returns the last iterate with `converged == false` (and logs a warning)
/// when `max_iterations` passes are not enough.
pub fn train_binary(
    x: &[SparseVector],
    y: &[f64],
    costs: &[f64],
    n_features: usize,
    cfg: &TrainConfig,
) -> Result<BinaryFit> {
    cfg.validate()?;
    let l = x.len();
    if y.len() != l || costs.len() != l {
        return Err(Error::LengthMismatch(format!(
            "{} instances, {} labels, {} costs",
            l,
            y.len(),
            costs.len()
        )));
    }
    if l < 2 || !y.contains(&1.0) || !y.contains(&-1.0) {
        return Err(Error::SingleClass);
    }
    if let Some(bad) = y.iter().find(|&&v| v != 1.0 && v != -1.0) {
        return Err(Error::Config(format!("binary labels must be ±1, got {bad}")));
    }
    if let Some(bad) = costs.iter().find(|&&c| !(c > 0.0 && c.is_finite())) {
        return Err(Error::Config(format!("instance costs must be positive, got {bad}")));
    }
    if let Some(&(j, _)) = x.iter().flat_map(|xi| xi.entries.last()).find(|e| e.0 >= n_features) {
        return Err(Error::Config(format!("feature index {j} outside 0..{n_features}")));
    }

    let bias_value = if cfg.bias { 1.0 } else { 0.0 };
    let mut w = vec![0.0; n_features];
    let mut bias = 0.0;

    // alpha[2i] = αᵢ, alpha[2i+1] = Cᵢ − αᵢ; both are stored so the smaller
    // one never has to be recovered by cancellation.
    let mut alpha = vec![0.0; 2 * l];
    let sq_norms: Vec<f64> = x
        .iter()
        .map(|xi| xi.entries.iter().map(|e| e.1 * e.1).sum::<f64>() + bias_value * bias_value)
        .collect();
    for i in 0..l {
        alpha[2 * i] = (1e-3 * costs[i]).min(1e-8);
        alpha[2 * i + 1] = costs[i] - alpha[2 * i];
        let coef = y[i] * alpha[2 * i];
        for &(j, v) in &x[i].entries {
            w[j] += coef * v;
        }
        bias += coef * bias_value;
    }

    let mut order: Vec<usize> = (0..l).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(SHUFFLE_SEED);
    let inner_eps_min = (cfg.tolerance * 1e-4).min(1e-10);
    let mut inner_eps = 1e-2;
    let mut grad_norm = f64::INFINITY;
    let mut iterations = 0;

    let dual_limit = cfg.max_iterations.min(DUAL_PASS_LIMIT);
    while iterations < dual_limit {
        order.shuffle(&mut rng);
        let mut newton_steps = 0;

        for &i in &order {
            let yi = y[i];
            let c = costs[i];
            let a = sq_norms[i];
            let b = yi * (x[i].dot_dense(&w) + bias * bias_value);

            let (lo, hi, sign) = if 0.5 * a * (alpha[2 * i + 1] - alpha[2 * i]) + b < 0.0 {
                (2 * i + 1, 2 * i, -1.0)
            } else {
                (2 * i, 2 * i + 1, 1.0)
            };

            let old = alpha[lo];
            let mut z = old;
            if c - z < 0.5 * c {
                z *= 0.1;
            }
            let mut gp = a * (z - old) + sign * b + (z / (c - z)).ln();
            let mut inner = 0;
            while inner < MAX_INNER_NEWTON && gp.abs() >= inner_eps {
                let gpp = a + c / (c - z) / z;
                let step = z - gp / gpp;
                z = if step <= 0.0 { z * 0.1 } else { step };
                gp = a * (z - old) + sign * b + (z / (c - z)).ln();
                inner += 1;
            }
            newton_steps += inner;

            if inner > 0 {
                alpha[lo] = z;
                alpha[hi] = c - z;
                let delta = sign * (z - old) * yi;
                for &(j, v) in &x[i].entries {
                    w[j] += delta * v;
                }
                bias += delta * bias_value;
            }
        }
        iterations += 1;

        grad_norm = gradient_norm(x, y, costs, &w, bias, cfg.bias);
        if grad_norm <= cfg.tolerance {
            break;
        }
        if newton_steps <= l / 10 || inner_eps > grad_norm {
            inner_eps = (0.1 * inner_eps).max(inner_eps_min);
        }
    }

    // Dual coordinate descent slows down badly on ill-conditioned duals
    // (large per-instance costs); finish those in the primal.
    while grad_norm > cfg.tolerance && iterations < cfg.max_iterations {
        let (g, gb) = gradient(x, y, costs, &w, bias, cfg.bias);
        newton_cg_step(x, y, costs, cfg.bias, &mut w, &mut bias, &g, gb, grad_norm);
        iterations += 1;
        grad_norm = gradient_norm(x, y, costs, &w, bias, cfg.bias);
    }

    let converged = grad_norm <= cfg.tolerance;
    if !converged {
        log::warn!(
            "logistic regression stopped after {iterations} passes with gradient norm {grad_norm:.3e} > {:.1e}",
            cfg.tolerance
        );
    }
    Ok(BinaryFit {
        weights: w,
        bias: if cfg.bias { bias } else { 0.0 },
        iterations,
        converged,
        gradient_norm: grad_norm,
    })
}

/// One damped Newton step on the primal objective. The Newton system is
/// solved inexactly by conjugate gradients using Hessian-vector products
/// `Hv = v + Σ costᵢ σᵢ(1 − σᵢ)(x̃ᵢ·v) x̃ᵢ`, then an Armijo backtracking
/// line search picks the step length.
#[allow(clippy::too_many_arguments)]
fn newton_cg_step(
    x: &[SparseVector],
    y: &[f64],
    costs: &[f64],
    use_bias: bool,
    w: &mut [f64],
    bias: &mut f64,
    grad: &[f64],
    grad_bias: f64,
    grad_norm: f64,
) {
    let n = w.len();
    let curvature: Vec<f64> = x
        .iter()
        .zip(y)
        .zip(costs)
        .map(|((xi, &yi), &ci)| {
            let p = sigmoid_neg(yi * margin(xi, w, *bias));
            ci * p * (1.0 - p)
        })
        .collect();
    let hess_vec = |v: &[f64], vb: f64| -> (Vec<f64>, f64) {
        let mut out = v.to_vec();
        let mut out_b = if use_bias { vb } else { 0.0 };
        for (xi, &d) in x.iter().zip(&curvature) {
            let mut s = xi.dot_dense(v);
            if use_bias {
                s += vb;
            }
            let s = s * d;
            for &(j, val) in &xi.entries {
                out[j] += s * val;
            }
            if use_bias {
                out_b += s;
            }
        }
        (out, out_b)
    };

    // CG on H d = -g.
    let mut d = vec![0.0; n];
    let mut db = 0.0;
    let mut r: Vec<f64> = grad.iter().map(|g| -g).collect();
    let mut rb = -grad_bias;
    let mut p = r.clone();
    let mut pb = rb;
    let mut rr = r.iter().map(|v| v * v).sum::<f64>() + rb * rb;
    let cg_tol = (0.5f64.min(grad_norm.sqrt()) * grad_norm).powi(2);
    for _ in 0..MAX_CG_STEPS {
        if rr <= cg_tol {
            break;
        }
        let (hp, hpb) = hess_vec(&p, pb);
        let php = p.iter().zip(&hp).map(|(a, b)| a * b).sum::<f64>() + pb * hpb;
        let step = rr / php;
        for j in 0..n {
            d[j] += step * p[j];
            r[j] -= step * hp[j];
        }
        db += step * pb;
        rb -= step * hpb;
        let rr_new = r.iter().map(|v| v * v).sum::<f64>() + rb * rb;
        let beta = rr_new / rr;
        for j in 0..n {
            p[j] = r[j] + beta * p[j];
        }
        pb = rb + beta * pb;
        rr = rr_new;
    }

    let f0 = objective(x, y, costs, w, *bias, use_bias);
    let slope = grad.iter().zip(&d).map(|(a, b)| a * b).sum::<f64>() + grad_bias * db;
    let mut t = 1.0;
    let mut trial = vec![0.0; n];
    for _ in 0..50 {
        for j in 0..n {
            trial[j] = w[j] + t * d[j];
        }
        let trial_bias = *bias + t * db;
        if objective(x, y, costs, &trial, trial_bias, use_bias) <= f0 + 1e-4 * t * slope {
            w.copy_from_slice(&trial);
            *bias = trial_bias;
            return;
        }
        t *= 0.5;
    }
}

/// Weights and intercept scoring one class against the rest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinaryModel {
    pub positive_class: String,
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl BinaryModel {
    pub fn decision_value(&self, x: &SparseVector) -> f64 {
        x.dot_dense(&self.weights) + self.bias
    }
}

/// One binary model for two classes, one per class otherwise.
#[derive(Debug, Clone, PartialEq)]
pub struct OneVsRest {
    classes: Vec<String>,
    models: Vec<BinaryModel>,
}

impl OneVsRest {
    pub fn from_parts(classes: Vec<String>, models: Vec<BinaryModel>) -> Result<Self> {
        if classes.len() < 2 {
            return Err(Error::TooFewClasses {
                problem: "model".into(),
                found: classes.len(),
            });
        }
        let expected = if classes.len() == 2 { 1 } else { classes.len() };
        if models.len() != expected {
            return Err(Error::Config(format!(
                "{} classes need {expected} binary models, found {}",
                classes.len(),
                models.len()
            )));
        }
        if classes.len() > 2 {
            for (c, m) in classes.iter().zip(&models) {
                if c != &m.positive_class {
                    return Err(Error::Config(format!(
                        "model for {:?} stored in the slot of {c:?}",
                        m.positive_class
                    )));
                }
            }
        } else if !classes.contains(&models[0].positive_class) {
            return Err(Error::UnknownClass {
                problem: "model".into(),
                class: models[0].positive_class.clone(),
            });
        }
        Ok(OneVsRest { classes, models })
    }

    pub fn classes(&self) -> &[String] {
        &self.classes
    }

    pub fn models(&self) -> &[BinaryModel] {
        &self.models
    }

    /// Decision value of every class, in class order. In the binary case the
    /// two values are exact negations of each other.
    pub fn decision_values(&self, x: &SparseVector) -> Vec<f64> {
        if self.classes.len() == 2 {
            let m = &self.models[0];
            let s = m.decision_value(x);
            return self
                .classes
                .iter()
                .map(|c| if *c == m.positive_class { s } else { -s })
                .collect();
        }
        self.models.iter().map(|m| m.decision_value(x)).collect()
    }

    /// Index of the predicted class.
    pub fn predict_index(&self, x: &SparseVector) -> usize {
        argmax_first(&self.decision_values(x))
    }

    pub fn predict(&self, x: &SparseVector) -> &str {
        &self.classes[self.predict_index(x)]
    }
}

/// Position of the largest value; the earliest wins ties.
pub fn argmax_first(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Trains a one-vs-rest model.
///
/// `labels[i]` is the class index of instance `i` in `classes`. For two
/// classes a single model is trained with `positive` (default: the first
/// class) as the +1 side.
pub fn train_ovr(
    x: &[SparseVector],
    labels: &[usize],
    classes: &[String],
    positive: Option<&str>,
    n_features: usize,
    cfg: &TrainConfig,
) -> Result<OneVsRest> {
    cfg.validate()?;
    if labels.len() != x.len() {
        return Err(Error::LengthMismatch(format!(
            "{} instances, {} labels",
            x.len(),
            labels.len()
        )));
    }
    if classes.len() < 2 {
        return Err(Error::TooFewClasses {
            problem: "training".into(),
            found: classes.len(),
        });
    }
    if let Some(&bad) = labels.iter().find(|&&l| l >= classes.len()) {
        return Err(Error::Config(format!("label index {bad} outside the class list")));
    }
    for class in cfg.class_weights.keys() {
        if !classes.contains(class) {
            return Err(Error::UnknownClass {
                problem: "training".into(),
                class: class.clone(),
            });
        }
    }
    let costs: Vec<f64> = labels.iter().map(|&l| cfg.cost_for(&classes[l])).collect();

    let targets: Vec<usize> = if classes.len() == 2 {
        let pos = match positive {
            Some(p) => classes.iter().position(|c| c == p).ok_or_else(|| Error::UnknownClass {
                problem: "training".into(),
                class: p.to_owned(),
            })?,
            None => 0,
        };
        vec![pos]
    } else {
        (0..classes.len()).collect()
    };

    let models = targets
        .par_iter()
        .map(|&target| {
            let y: Vec<f64> = labels.iter().map(|&l| if l == target { 1.0 } else { -1.0 }).collect();
            let fit = train_binary(x, &y, &costs, n_features, cfg)?;
            Ok(BinaryModel {
                positive_class: classes[target].clone(),
                weights: fit.weights,
                bias: fit.bias,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    OneVsRest::from_parts(classes.to_vec(), models)
}
