use serde::{Deserialize, Serialize};

use super::{Calibrator, Labeled};
use crate::error::{CalibError, Result};
use crate::prob::{ClippedScore, Probability};

/// Uniform-mass histogram binning: `m` bins whose edges sit between empirical
/// score quantiles, each predicting the mean outcome of its training members.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramBinningModel {
    /// `m + 1` nondecreasing edges, `edges[0] = 0`, `edges[m] = 1`.
    edges: Vec<f64>,
    means: Vec<f64>,
}

impl HistogramBinningModel {
    pub fn edges(&self) -> &[f64] {
        &self.edges
    }

    pub fn bin_means(&self) -> &[f64] {
        &self.means
    }

    pub fn bins(&self) -> usize {
        self.means.len()
    }

    /// 0-based bin for `score`: bin `k` is `[edges[k], edges[k + 1])`, the last
    /// bin closed at 1.
    pub fn bin_of(&self, score: f64) -> usize {
        let interior = &self.edges[1..self.edges.len() - 1];
        interior.partition_point(|&e| e <= score)
    }
}

impl Calibrator for HistogramBinningModel {
    fn apply(&self, score: ClippedScore) -> Probability {
        Probability::saturating(self.means[self.bin_of(score.value())])
    }
}

pub fn fit_histogram_binning(data: &[Labeled], m: usize) -> Result<HistogramBinningModel> {
    if m == 0 {
        return Err(CalibError::Config(
            "histogram binning needs at least one bin".into(),
        ));
    }
    if data.len() < m {
        return Err(CalibError::InsufficientData {
            needed: m,
            have: data.len(),
        });
    }
    let mut sorted: Vec<f64> = data.iter().map(|(s, _)| s.value()).collect();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let mut edges = Vec::with_capacity(m + 1);
    edges.push(0.0);
    for k in 1..m {
        let idx = k * n / m;
        edges.push(0.5 * (sorted[idx - 1] + sorted[idx]));
    }
    edges.push(1.0);

    let mut model = HistogramBinningModel {
        edges,
        means: vec![0.0; m],
    };
    let mut sums = vec![0.0; m];
    let mut counts = vec![0usize; m];
    for &(s, y) in data {
        let b = model.bin_of(s.value());
        sums[b] += f64::from(y);
        counts[b] += 1;
    }
    for b in 0..m {
        model.means[b] = if counts[b] > 0 {
            sums[b] / counts[b] as f64
        } else {
            0.5 * (model.edges[b] + model.edges[b + 1])
        };
    }
    Ok(model)
}
