use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{Calibrator, Labeled};
use crate::error::{CalibError, Result};
use crate::ons::{dot, project_ellipsoid};
use crate::prob::{sigmoid, ClippedScore, Probability};

/// Norm cap on fitted parameters, shared with the online learners' feasible set.
pub const PARAM_RADIUS: f64 = 100.0;

const MAX_ITERS: usize = 200;
const GRAD_TOL: f64 = 1e-8;
const HESSIAN_RIDGE: f64 = 1e-10;
const ARMIJO: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlattParams {
    pub a: f64,
    pub b: f64,
}

impl PlattParams {
    pub const IDENTITY: PlattParams = PlattParams { a: 1.0, b: 0.0 };

    pub fn new(a: f64, b: f64) -> Self {
        Self { a, b }
    }

    pub fn norm(&self) -> f64 {
        self.a.hypot(self.b)
    }

    pub(crate) fn feature(score: ClippedScore) -> [f64; 2] {
        [score.logit(), 1.0]
    }
}

impl Calibrator for PlattParams {
    fn apply(&self, score: ClippedScore) -> Probability {
        platt_apply(*self, score)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BetaParams {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl BetaParams {
    pub fn new(a: f64, b: f64, c: f64) -> Self {
        Self { a, b, c }
    }

    pub fn norm(&self) -> f64 {
        (self.a * self.a + self.b * self.b + self.c * self.c).sqrt()
    }

    pub(crate) fn feature(score: ClippedScore) -> [f64; 3] {
        let s = score.value();
        [s.ln(), (1.0 - s).ln(), 1.0]
    }
}

impl Calibrator for BetaParams {
    fn apply(&self, score: ClippedScore) -> Probability {
        beta_apply(*self, score)
    }
}

pub fn platt_apply(params: PlattParams, score: ClippedScore) -> Probability {
    sigmoid(params.a * score.logit() + params.b)
}

pub fn beta_apply(params: BetaParams, score: ClippedScore) -> Probability {
    let s = score.value();
    sigmoid(params.a * s.ln() + params.b * (1.0 - s).ln() + params.c)
}

/// Log-loss minimizer of the Platt family over the radius-100 ball.
pub fn fit_platt_batch(data: &[Labeled]) -> Result<PlattParams> {
    let features: Vec<([f64; 2], u8)> = data
        .iter()
        .map(|&(s, y)| (PlattParams::feature(s), y))
        .collect();
    let theta = fit_logistic_ball(&features, &[1.0, 0.0])?;
    Ok(PlattParams::new(theta[0], theta[1]))
}

/// Log-loss minimizer of the beta family over the radius-100 ball.
pub fn fit_beta_batch(data: &[Labeled]) -> Result<BetaParams> {
    let features: Vec<([f64; 3], u8)> = data
        .iter()
        .map(|&(s, y)| (BetaParams::feature(s), y))
        .collect();
    let theta = fit_logistic_ball(&features, &[1.0, -1.0, 0.0])?;
    Ok(BetaParams::new(theta[0], theta[1], theta[2]))
}

/// `log(1 + e^z) − y z`, exact in the tails.
fn logistic_loss(z: f64, y: u8) -> f64 {
    let softplus = z.max(0.0) + (-z.abs()).exp().ln_1p();
    softplus - f64::from(y) * z
}

fn mean_loss<const D: usize>(data: &[([f64; D], u8)], theta: &[f64]) -> f64 {
    data.iter()
        .map(|(x, y)| logistic_loss(dot(theta, x), *y))
        .sum::<f64>()
        / data.len() as f64
}

/// Projected damped Newton on the mean logistic loss, constrained to
/// `‖θ‖ ≤ PARAM_RADIUS`. Steps leaving the ball are projected in the Hessian
/// metric; each accepted step passes an Armijo test along the segment to the
/// projected Newton point. Separable data therefore ends on the boundary.
fn fit_logistic_ball<const D: usize>(data: &[([f64; D], u8)], start: &[f64]) -> Result<Vec<f64>> {
    if data.is_empty() {
        return Err(CalibError::Empty("calibration data"));
    }
    let n = data.len() as f64;
    let mut theta = DVector::from_column_slice(start);
    let mut loss = mean_loss(data, theta.as_slice());

    for _ in 0..MAX_ITERS {
        let mut grad = DVector::<f64>::zeros(D);
        let mut hess = DMatrix::<f64>::zeros(D, D);
        for (x, y) in data {
            let p = sigmoid(dot(theta.as_slice(), x)).value();
            let r = p - f64::from(*y);
            let w = p * (1.0 - p);
            for i in 0..D {
                grad[i] += r * x[i];
                for j in 0..D {
                    hess[(i, j)] += w * x[i] * x[j];
                }
            }
        }
        grad /= n;
        hess /= n;
        let interior = theta.norm() < PARAM_RADIUS * (1.0 - 1e-12);
        if interior && grad.norm() <= GRAD_TOL {
            break;
        }
        for i in 0..D {
            hess[(i, i)] += HESSIAN_RIDGE;
        }
        let Some(chol) = hess.clone().cholesky() else {
            return Err(CalibError::Invariant(
                "regularized Hessian is not positive definite".into(),
            ));
        };
        let newton_point = &theta - chol.solve(&grad);
        let target = DVector::from_vec(project_ellipsoid(
            &hess,
            newton_point.as_slice(),
            PARAM_RADIUS,
        )?);
        let direction = target - &theta;
        let slope = grad.dot(&direction);
        if slope.is_nan() || slope >= 0.0 {
            break;
        }
        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            let candidate = &theta + &direction * step;
            let cand_loss = mean_loss(data, candidate.as_slice());
            if cand_loss <= loss + ARMIJO * step * slope {
                accepted = Some((candidate, cand_loss));
                break;
            }
            step *= 0.5;
        }
        let Some((mut next, mut next_loss)) = accepted else {
            break;
        };
        if step == 1.0 {
            // Exponential tails make plain Newton crawl toward the boundary;
            // extrapolate along the same direction while the loss keeps falling.
            let mut stretch = 2.0;
            loop {
                let mut candidate = &theta + &direction * stretch;
                let norm = candidate.norm();
                let clipped = norm > PARAM_RADIUS;
                if clipped {
                    candidate *= PARAM_RADIUS / norm;
                }
                let cand_loss = mean_loss(data, candidate.as_slice());
                if cand_loss >= next_loss {
                    break;
                }
                next = candidate;
                next_loss = cand_loss;
                if clipped {
                    break;
                }
                stretch *= 2.0;
            }
        }
        let moved = (&next - &theta).norm();
        theta = next;
        loss = next_loss;
        if moved <= 1e-12 * (1.0 + theta.norm()) {
            break;
        }
    }
    // A strictly separating interior iterate only stops because the loss
    // underflowed; scaling it out to the boundary still lowers every term.
    let norm = theta.norm();
    let separates = data
        .iter()
        .all(|(x, y)| (2.0 * f64::from(*y) - 1.0) * dot(theta.as_slice(), x) > 0.0);
    if separates && norm > 0.0 && norm < PARAM_RADIUS {
        theta *= PARAM_RADIUS / norm;
    }
    Ok(theta.as_slice().to_vec())
}
