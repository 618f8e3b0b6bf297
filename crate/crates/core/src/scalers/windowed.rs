use serde::{Deserialize, Serialize};

use super::{
    fit_beta_batch, fit_histogram_binning, fit_platt_batch, BetaParams, Calibrator,
    HistogramBinningModel, Labeled, PlattParams,
};
use crate::error::{CalibError, Result};
use crate::prob::{ClippedScore, Probability};

/// Batch-fittable mapping families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Family {
    Platt,
    Beta,
    Histogram { bins: usize },
}

impl Family {
    pub fn fit(&self, data: &[Labeled]) -> Result<BatchModel> {
        Ok(match *self {
            Family::Platt => BatchModel::Platt(fit_platt_batch(data)?),
            Family::Beta => BatchModel::Beta(fit_beta_batch(data)?),
            Family::Histogram { bins } => BatchModel::Histogram(fit_histogram_binning(data, bins)?),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum BatchModel {
    Platt(PlattParams),
    Beta(BetaParams),
    Histogram(HistogramBinningModel),
}

impl Calibrator for BatchModel {
    fn apply(&self, score: ClippedScore) -> Probability {
        match self {
            BatchModel::Platt(p) => p.apply(score),
            BatchModel::Beta(p) => p.apply(score),
            BatchModel::Histogram(h) => h.apply(score),
        }
    }
}

/// Fixed-then-periodically-refit learner.
///
/// The first fit uses the calibration prefix `1..=T_cal`. Afterwards, at the
/// end of every step `t` with `(t − T_cal) mod W = 0` the model is refit on
/// the whole prefix `1..=t`. `window = None` never refits, which is the fixed
/// batch learner.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowedLearner {
    family: Family,
    t_cal: usize,
    window: Option<usize>,
    model: Option<BatchModel>,
    fitted_through: usize,
}

impl WindowedLearner {
    pub fn new(family: Family, t_cal: usize, window: Option<usize>) -> Result<Self> {
        if t_cal == 0 {
            return Err(CalibError::Config(
                "calibration prefix must be nonempty".into(),
            ));
        }
        if window == Some(0) {
            return Err(CalibError::Config("window must be positive".into()));
        }
        Ok(Self {
            family,
            t_cal,
            window,
            model: None,
            fitted_through: 0,
        })
    }

    pub fn model(&self) -> Option<&BatchModel> {
        self.model.as_ref()
    }

    /// Last time index whose data the current model has seen.
    pub fn fitted_through(&self) -> usize {
        self.fitted_through
    }

    /// Forecast for time `t > T_cal` given `history` covering at least
    /// `1..=t−1`. Performs any refit due at the end of step `t − 1` first.
    pub fn windowed_step(
        &mut self,
        t: usize,
        history: &[Labeled],
        score: ClippedScore,
    ) -> Result<Probability> {
        if t <= self.t_cal {
            return Err(CalibError::Config(format!(
                "windowed forecasts start after the calibration prefix ({t} <= {})",
                self.t_cal
            )));
        }
        if history.len() < t - 1 {
            return Err(CalibError::InsufficientData {
                needed: t - 1,
                have: history.len(),
            });
        }
        let due = match self.window {
            Some(w) => self.t_cal + ((t - 1 - self.t_cal) / w) * w,
            None => self.t_cal,
        };
        if self.model.is_none() || due != self.fitted_through {
            self.model = Some(self.family.fit(&history[..due])?);
            self.fitted_through = due;
        }
        Ok(self.model.as_ref().expect("fitted above").apply(score))
    }
}
