//! Online Newton Step for the log-loss of sigmoid-linear models.
//!
//! Each round plays `θ_t`, observes the gradient `∇_t` of the log-loss at
//! `θ_t`, grows the curvature matrix `A_t = A_{t-1} + ∇_t ∇_tᵀ`, takes the
//! Newton step `θ̃ = θ_t − γ⁻¹ A_t⁻¹ ∇_t` and projects `θ̃` back onto the
//! Euclidean ball of the configured radius in the `A_t`-norm.
//!
//! Dimensions are tiny (2 for Platt scaling, 3 for beta scaling), so the
//! projection is solved exactly via an eigendecomposition of `A_t` and a
//! one-dimensional bisection on the KKT multiplier.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{CalibError, Result};
use crate::prob::{log_loss, sigmoid, ClippedScore};
use crate::scalers::Calibrator;
use crate::trace::{ForecastTrace, Method};

const PROJECTION_TOL: f64 = 1e-10;
const PROJECTION_MAX_ITERS: usize = 500;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OnsConfig {
    pub dim: usize,
    pub gamma: f64,
    pub rho: f64,
    pub radius: f64,
}

impl OnsConfig {
    /// Fixed hyperparameters for online Platt scaling.
    pub fn platt() -> Self {
        Self {
            dim: 2,
            gamma: 0.1,
            rho: 100.0,
            radius: 100.0,
        }
    }

    /// Fixed hyperparameters for online beta scaling.
    pub fn beta() -> Self {
        Self {
            dim: 3,
            gamma: 0.1,
            rho: 25.0,
            radius: 100.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OnsState {
    theta: DVector<f64>,
    curvature: DMatrix<f64>,
    steps: u64,
}

impl OnsState {
    /// `A_0 = ρ I`, `θ_1 = theta0`.
    pub fn new(config: &OnsConfig, theta0: &[f64]) -> Result<Self> {
        if theta0.len() != config.dim {
            return Err(CalibError::DimensionMismatch {
                expected: config.dim,
                got: theta0.len(),
            });
        }
        Ok(Self {
            theta: DVector::from_column_slice(theta0),
            curvature: DMatrix::identity(config.dim, config.dim) * config.rho,
            steps: 0,
        })
    }

    pub fn theta(&self) -> &[f64] {
        self.theta.as_slice()
    }

    pub fn curvature(&self) -> &DMatrix<f64> {
        &self.curvature
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    /// `sigmoid(θᵀ x)` at the current parameters.
    pub fn predict(&self, feature: &[f64]) -> f64 {
        sigmoid(dot(self.theta.as_slice(), feature)).value()
    }

    /// One round of the online Newton step, in place.
    pub fn step(&mut self, config: &OnsConfig, feature: &[f64], y: u8) -> Result<()> {
        let grad = DVector::from_vec(logloss_gradient(self.theta.as_slice(), feature, y)?);
        self.curvature += &grad * grad.transpose();
        let chol = self.curvature.clone().cholesky().ok_or_else(|| {
            CalibError::Invariant("curvature matrix lost positive definiteness".into())
        })?;
        let newton = chol.solve(&grad);
        let tilde = &self.theta - newton / config.gamma;
        let projected = project_ellipsoid(&self.curvature, tilde.as_slice(), config.radius)?;
        self.theta = DVector::from_vec(projected);
        self.steps += 1;
        Ok(())
    }
}

/// Pure form of [`OnsState::step`].
pub fn ons_step(state: &OnsState, feature: &[f64], y: u8, config: &OnsConfig) -> Result<OnsState> {
    let mut next = state.clone();
    next.step(config, feature, y)?;
    Ok(next)
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Gradient of `log_loss(sigmoid(θᵀx), y)` with respect to `θ`, i.e.
/// `(sigmoid(θᵀx) − y)·x`.
pub fn logloss_gradient(theta: &[f64], feature: &[f64], y: u8) -> Result<Vec<f64>> {
    if theta.len() != feature.len() {
        return Err(CalibError::DimensionMismatch {
            expected: theta.len(),
            got: feature.len(),
        });
    }
    let residual = sigmoid(dot(theta, feature)).value() - f64::from(y);
    Ok(feature.iter().map(|x| residual * x).collect())
}

/// Minimizer of `(θ̃ − θ)ᵀ A (θ̃ − θ)` over `‖θ‖₂ ≤ radius`.
///
/// With `A = Q Λ Qᵀ` the KKT point is `θ(λ) = Q diag(λᵢ/(λᵢ+λ)) Qᵀ θ̃`, whose
/// norm decreases in `λ ≥ 0`; `λ` is bisected until `‖θ(λ)‖` is within
/// `1e-10` of the radius and the result is rescaled onto the sphere.
pub fn project_ellipsoid(a: &DMatrix<f64>, theta_tilde: &[f64], radius: f64) -> Result<Vec<f64>> {
    let d = theta_tilde.len();
    if a.nrows() != d || a.ncols() != d {
        return Err(CalibError::DimensionMismatch {
            expected: d,
            got: a.nrows(),
        });
    }
    let norm = dot(theta_tilde, theta_tilde).sqrt();
    if norm <= radius {
        return Ok(theta_tilde.to_vec());
    }
    let eig = SymmetricEigen::new(a.clone());
    let min_eig = eig.eigenvalues.min();
    if min_eig.is_nan() || min_eig <= 0.0 {
        return Err(CalibError::NotPositiveDefinite(min_eig));
    }
    let coords = eig.eigenvectors.transpose() * DVector::from_column_slice(theta_tilde);
    let shrunk_norm = |lambda: f64| -> f64 {
        eig.eigenvalues
            .iter()
            .zip(coords.iter())
            .map(|(&l, &c)| (l * c / (l + lambda)).powi(2))
            .sum::<f64>()
            .sqrt()
    };
    let mut lo = 0.0;
    let mut hi = eig.eigenvalues.max() * (norm / radius - 1.0);
    // shrunk_norm(hi) <= radius by construction; widen defensively for rounding.
    while shrunk_norm(hi) > radius {
        hi *= 2.0;
    }
    let mut lambda = hi;
    for _ in 0..PROJECTION_MAX_ITERS {
        lambda = 0.5 * (lo + hi);
        let n = shrunk_norm(lambda);
        if (n - radius).abs() <= PROJECTION_TOL {
            break;
        }
        if n > radius {
            lo = lambda;
        } else {
            hi = lambda;
        }
    }
    let shrink = DVector::from_iterator(
        d,
        eig.eigenvalues
            .iter()
            .zip(coords.iter())
            .map(|(&l, &c)| l * c / (l + lambda)),
    );
    let mut theta = &eig.eigenvectors * shrink;
    let n = theta.norm();
    if n > 0.0 {
        theta *= radius / n;
    }
    Ok(theta.as_slice().to_vec())
}

/// Cumulative log-loss of a method against a fixed comparator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegretReport {
    pub rounds: usize,
    pub method_loss: f64,
    pub oracle_loss: f64,
    pub regret: f64,
}

/// `Σ l(p_t, y_t) − Σ l(m_oracle(score_t), y_t)` over the whole trace. Base
/// scores are read from the trace's `BM` column.
pub fn regret<C: Calibrator>(
    trace: &ForecastTrace,
    method: Method,
    oracle: &C,
) -> Result<RegretReport> {
    if trace.is_empty() {
        return Err(CalibError::Empty("trace"));
    }
    let scores = trace.base_scores()?;
    let forecasts = trace
        .column(method)
        .ok_or_else(|| CalibError::Config(format!("trace has no {method} column")))?;
    let mut method_loss = 0.0;
    let mut oracle_loss = 0.0;
    for ((&p, &s), &y) in forecasts.iter().zip(scores).zip(trace.outcomes()) {
        method_loss += log_loss(p, y);
        oracle_loss += log_loss(oracle.apply(ClippedScore::new(s)?).value(), y);
    }
    Ok(RegretReport {
        rounds: trace.len(),
        method_loss,
        oracle_loss,
        regret: method_loss - oracle_loss,
    })
}

/// Logarithmic regret bound `2(e^B + 10B) log T + 1` for ONS-based online
/// Platt scaling with clipped scores, `B ≥ 1`, `T ≥ 10`.
pub fn ons_regret_bound(radius: f64, rounds: usize) -> f64 {
    let b = radius.max(1.0);
    2.0 * (b.exp() + 10.0 * b) * (rounds as f64).ln() + 1.0
}
