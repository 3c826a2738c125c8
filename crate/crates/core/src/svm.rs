//! Soft-margin linear SVM trained by dual coordinate descent.
//!
//! Minimizes `0.5 * |w|^2 + C * sum_i max(0, 1 - y_i * w.x_i)` where every
//! example is augmented with a constant feature 1, so the bias is the last
//! weight and is regularized together with the normal. The dual is
//! `max sum_i a_i - 0.5 * |sum_i a_i y_i x_i|^2` subject to `0 <= a_i <= C`.
//! Each coordinate step solves its one-dimensional subproblem exactly; the
//! visiting order is a fresh seeded permutation per epoch.
//!
//! Training stops once the duality gap is at most `tol` or after `max_iter`
//! epochs. The gap splits into one non-negative complementary-slackness term
//! per example, so a gap below `tol` bounds every per-example KKT residual.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::Stream;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SvmParams {
    pub c: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub seed: u64,
}

impl Default for SvmParams {
    fn default() -> Self {
        SvmParams {
            c: 1.0,
            tol: 1e-6,
            max_iter: 1000,
            seed: 0,
        }
    }
}

impl SvmParams {
    pub fn with_c(c: f64) -> Self {
        SvmParams {
            c,
            ..Default::default()
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochObjective {
    pub primal: f64,
    pub dual: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SvmModel {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub c: f64,
    pub duality_gap: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Total hinge loss on the training set; zero iff every example clears
    /// the margin.
    pub hinge_loss: f64,
    pub primal_objective: f64,
    pub dual_objective: f64,
    /// Dual variables in example order.
    pub alphas: Vec<f64>,
    /// Objectives after each epoch.
    pub trace: Vec<EpochObjective>,
}

impl SvmModel {
    pub fn decision(&self, x: &[f64]) -> f64 {
        dot(&self.weights, x) + self.bias
    }

    pub fn predict(&self, x: &[f64]) -> bool {
        self.decision(x) > 0.0
    }

    pub fn is_separable(&self) -> bool {
        self.hinge_loss == 0.0
    }

    pub fn weight_norm(&self) -> f64 {
        dot(&self.weights, &self.weights).sqrt()
    }
}

/// Trains on `pos` (label +1) followed by `neg` (label -1).
pub fn train_svm(pos: &[&[f64]], neg: &[&[f64]], params: &SvmParams) -> Result<SvmModel> {
    if pos.is_empty() {
        return Err(Error::EmptyClass("positive"));
    }
    if neg.is_empty() {
        return Err(Error::EmptyClass("negative"));
    }
    let examples: Vec<&[f64]> = pos.iter().chain(neg).copied().collect();
    let labels: Vec<bool> = std::iter::repeat_n(true, pos.len())
        .chain(std::iter::repeat_n(false, neg.len()))
        .collect();
    train_labeled(&examples, &labels, params)
}

/// Trains on examples with explicit labels (`true` = +1). Negating every
/// label with the same order and seed negates the model exactly.
pub fn train_labeled(examples: &[&[f64]], labels: &[bool], params: &SvmParams) -> Result<SvmModel> {
    if !(params.c > 0.0 && params.c.is_finite()) {
        return Err(Error::InvalidParameter(format!("C must be positive, got {}", params.c)));
    }
    if !(params.tol >= 0.0) {
        return Err(Error::InvalidParameter(format!("tol must be non-negative, got {}", params.tol)));
    }
    if examples.len() != labels.len() {
        return Err(Error::InvalidParameter(format!(
            "{} examples but {} labels",
            examples.len(),
            labels.len()
        )));
    }
    if !labels.iter().any(|&y| y) {
        return Err(Error::EmptyClass("positive"));
    }
    if labels.iter().all(|&y| y) {
        return Err(Error::EmptyClass("negative"));
    }
    let dim = examples[0].len();
    if let Some(bad) = examples.iter().find(|x| x.len() != dim) {
        return Err(Error::DimensionMismatch {
            expected: dim,
            actual: bad.len(),
        });
    }

    let n = examples.len();
    let c = params.c;
    let sign: Vec<f64> = labels.iter().map(|&y| if y { 1.0 } else { -1.0 }).collect();
    // Squared norms of the augmented examples.
    let q_diag: Vec<f64> = examples.iter().map(|x| dot(x, x) + 1.0).collect();

    // w[..dim] is the normal, w[dim] the bias.
    let mut w = vec![0.0; dim + 1];
    let mut alpha = vec![0.0; n];
    let mut order: Vec<usize> = (0..n).collect();
    let mut stream = Stream::new(params.seed, 0);
    let mut trace = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    let mut objective = objectives(examples, &sign, &alpha, &w, c);

    while iterations < params.max_iter {
        stream.shuffle(&mut order);
        for &i in &order {
            let x = examples[i];
            let y = sign[i];
            let margin = y * (dot(&w[..dim], x) + w[dim]);
            let grad = margin - 1.0;
            let old = alpha[i];
            let projected = if old == 0.0 {
                grad.min(0.0)
            } else if old == c {
                grad.max(0.0)
            } else {
                grad
            };
            if projected == 0.0 {
                continue;
            }
            let new = (old - grad / q_diag[i]).clamp(0.0, c);
            let step = (new - old) * y;
            if step != 0.0 {
                alpha[i] = new;
                for (wk, xk) in w[..dim].iter_mut().zip(x) {
                    *wk += step * xk;
                }
                w[dim] += step;
            }
        }
        iterations += 1;
        objective = objectives(examples, &sign, &alpha, &w, c);
        trace.push(EpochObjective {
            primal: objective.primal,
            dual: objective.dual,
        });
        if objective.gap() <= params.tol {
            converged = true;
            break;
        }
    }

    let bias = w.pop().unwrap();
    Ok(SvmModel {
        weights: w,
        bias,
        c,
        duality_gap: objective.gap(),
        iterations,
        converged,
        hinge_loss: objective.hinge,
        primal_objective: objective.primal,
        dual_objective: objective.dual,
        alphas: alpha,
        trace,
    })
}

struct Objectives {
    primal: f64,
    dual: f64,
    hinge: f64,
}

impl Objectives {
    fn gap(&self) -> f64 {
        (self.primal - self.dual).max(0.0)
    }
}

fn objectives(examples: &[&[f64]], sign: &[f64], alpha: &[f64], w: &[f64], c: f64) -> Objectives {
    let dim = w.len() - 1;
    let half_norm = 0.5 * dot(w, w);
    let hinge: f64 = examples
        .iter()
        .zip(sign)
        .map(|(x, y)| (1.0 - y * (dot(&w[..dim], x) + w[dim])).max(0.0))
        .sum();
    Objectives {
        primal: half_norm + c * hinge,
        dual: alpha.iter().sum::<f64>() - half_norm,
        hinge,
    }
}

/// Largest per-example complementary-slackness term of a trained model.
pub fn kkt_residual(model: &SvmModel, examples: &[&[f64]], labels: &[bool]) -> f64 {
    examples
        .iter()
        .zip(labels)
        .zip(&model.alphas)
        .map(|((x, &y), &a)| {
            let yf = if y { 1.0 } else { -1.0 } * model.decision(x);
            a * (yf - 1.0) + model.c * (1.0 - yf).max(0.0)
        })
        .fold(0.0, f64::max)
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
