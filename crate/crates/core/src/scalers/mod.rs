//! Post-hoc mapping families and their learners.
//!
//! * parametric maps: Platt (`sigmoid(a·logit s + b)`) and beta
//!   (`sigmoid(a·ln s + b·ln(1−s) + c)`), fitted in batch by constrained Newton
//!   or online by [`OnlineScaler`];
//! * histogram binning with uniform-mass bins;
//! * [`WindowedLearner`], which refits any batch family on the full prefix
//!   every `W` steps after the calibration prefix.

mod histogram;
mod online;
mod parametric;
mod windowed;

pub use histogram::{fit_histogram_binning, HistogramBinningModel};
pub use online::{online_scaler_step, OnlineFamily, OnlineScaler};
pub use parametric::{
    beta_apply, fit_beta_batch, fit_platt_batch, platt_apply, BetaParams, PlattParams, PARAM_RADIUS,
};
pub use windowed::{BatchModel, Family, WindowedLearner};

use crate::prob::{ClippedScore, Probability};

/// Labelled calibration point.
pub type Labeled = (ClippedScore, u8);

/// A fixed map from base scores to forecasts.
pub trait Calibrator {
    fn apply(&self, score: ClippedScore) -> Probability;
}
