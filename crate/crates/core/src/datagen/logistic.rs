//! Small full-batch logistic regression used as the base model.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{CalibError, Result};
use crate::prob::{sigmoid, ClippedScore};

const TOL: f64 = 1e-8;
const MAX_ITERS: usize = 200;

/// Trainer settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogisticOptions {
    /// L2 penalty `λ/2 ‖w‖²` added to the mean log-loss.
    pub ridge: f64,
    pub penalize_intercept: bool,
    /// Center and scale each feature on the training block first.
    pub standardize: bool,
}

impl Default for LogisticOptions {
    /// Nearly unregularized: ridge 1e−6 on every coefficient, raw features.
    fn default() -> Self {
        Self {
            ridge: 1e-6,
            penalize_intercept: true,
            standardize: false,
        }
    }
}

impl LogisticOptions {
    /// Unit-strength penalty on the summed loss (`C = 1`), intercept free.
    pub fn unit_penalty(n: usize) -> Self {
        Self {
            ridge: 1.0 / n.max(1) as f64,
            penalize_intercept: false,
            standardize: false,
        }
    }
}

/// Logistic model with an intercept. Features are shifted by `center` and
/// divided by `scale` (identity unless trained with standardization).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaseModelWeights {
    pub weights: Vec<f64>,
    pub intercept: f64,
    /// Per-feature centering and scaling learned on the training block.
    pub center: Vec<f64>,
    pub scale: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

impl BaseModelWeights {
    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    pub fn logit(&self, x: &[f64]) -> f64 {
        self.intercept
            + x.iter()
                .zip(&self.weights)
                .zip(self.center.iter().zip(&self.scale))
                .map(|((&v, &w), (&c, &s))| w * (v - c) / s)
                .sum::<f64>()
    }

    pub fn probability(&self, x: &[f64]) -> f64 {
        sigmoid(self.logit(x)).value()
    }

    /// Clipped base score `f(x)`.
    pub fn score(&self, x: &[f64]) -> Result<ClippedScore> {
        if x.len() != self.dim() {
            return Err(CalibError::DimensionMismatch {
                expected: self.dim(),
                got: x.len(),
            });
        }
        ClippedScore::new(self.probability(x))
    }
}

fn penalty(beta: &DVector<f64>, options: &LogisticOptions) -> f64 {
    let skip = usize::from(!options.penalize_intercept);
    0.5 * options.ridge * beta.iter().skip(skip).map(|b| b * b).sum::<f64>()
}

fn objective(
    design: &DMatrix<f64>,
    y: &DVector<f64>,
    beta: &DVector<f64>,
    options: &LogisticOptions,
) -> f64 {
    let z = design * beta;
    let n = y.len() as f64;
    let data: f64 = z
        .iter()
        .zip(y.iter())
        .map(|(&z, &y)| z.max(0.0) + (-z.abs()).exp().ln_1p() - y * z)
        .sum();
    data / n + penalty(beta, options)
}

/// The base model every stream uses: [`LogisticOptions::unit_penalty`] over
/// raw features.
pub fn train_base_logistic(features: &[Vec<f64>], labels: &[u8]) -> Result<BaseModelWeights> {
    train_logistic_with(
        features,
        labels,
        LogisticOptions::unit_penalty(features.len()),
    )
}

/// Penalized logistic regression by damped Newton with step-halving. Returns
/// the best iterate with `converged = false` if the gradient tolerance is not
/// reached within 200 iterations.
pub fn train_logistic_with(
    features: &[Vec<f64>],
    labels: &[u8],
    options: LogisticOptions,
) -> Result<BaseModelWeights> {
    let ridge = options.ridge;
    if !(ridge > 0.0 && ridge.is_finite()) {
        return Err(CalibError::Config(format!(
            "ridge must be positive, got {ridge}"
        )));
    }
    if features.is_empty() {
        return Err(CalibError::Empty("training block"));
    }
    if features.len() != labels.len() {
        return Err(CalibError::LengthMismatch {
            left: features.len(),
            right: labels.len(),
        });
    }
    let n = features.len();
    let d = features[0].len();
    if let Some(bad) = features.iter().find(|row| row.len() != d) {
        return Err(CalibError::DimensionMismatch {
            expected: d,
            got: bad.len(),
        });
    }
    if let Some(&bad) = labels.iter().find(|&&y| y > 1) {
        return Err(CalibError::NonBinaryOutcome(f64::from(bad)));
    }

    let mut center = vec![0.0; d];
    let mut scale = vec![0.0; d];
    for j in 0..d {
        let mean = features.iter().map(|r| r[j]).sum::<f64>() / n as f64;
        let var = features.iter().map(|r| (r[j] - mean).powi(2)).sum::<f64>() / n as f64;
        if options.standardize {
            center[j] = mean;
            scale[j] = if var > 1e-24 { var.sqrt() } else { 1.0 };
        } else {
            scale[j] = 1.0;
        }
    }
    let design = DMatrix::from_fn(n, d + 1, |i, j| {
        if j == 0 {
            1.0
        } else {
            (features[i][j - 1] - center[j - 1]) / scale[j - 1]
        }
    });
    let y = DVector::from_iterator(n, labels.iter().map(|&v| f64::from(v)));

    let mut beta = DVector::<f64>::zeros(d + 1);
    let mut loss = objective(&design, &y, &beta, &options);
    let mut converged = false;
    let mut iterations = 0;
    while iterations < MAX_ITERS {
        let z = &design * &beta;
        let p = z.map(|v| sigmoid(v).value());
        let w = p.map(|v| v * (1.0 - v));
        let mut grad = design.transpose() * (&p - &y) / n as f64 + &beta * ridge;
        if !options.penalize_intercept {
            grad[0] -= ridge * beta[0];
        }
        if grad.amax() <= TOL {
            converged = true;
            break;
        }
        iterations += 1;
        let mut weighted = design.clone();
        for (mut row, &wi) in weighted.row_iter_mut().zip(w.iter()) {
            row *= wi;
        }
        let mut hess = design.transpose() * weighted / n as f64;
        for i in usize::from(!options.penalize_intercept)..=d {
            hess[(i, i)] += ridge;
        }
        // An all-one-class block leaves the free intercept direction flat.
        hess[(0, 0)] += 1e-12;
        let Some(chol) = hess.cholesky() else {
            return Err(CalibError::NotPositiveDefinite(ridge));
        };
        let step = chol.solve(&grad);
        let mut t = 1.0;
        let mut improved = false;
        for _ in 0..50 {
            let candidate = &beta - &step * t;
            let cand_loss = objective(&design, &y, &candidate, &options);
            if cand_loss <= loss {
                beta = candidate;
                loss = cand_loss;
                improved = true;
                break;
            }
            t *= 0.5;
        }
        if !improved {
            break;
        }
    }

    Ok(BaseModelWeights {
        weights: beta.iter().skip(1).copied().collect(),
        intercept: beta[0],
        center,
        scale,
        iterations,
        converged,
    })
}
