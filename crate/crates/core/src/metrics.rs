//! Binned calibration and sharpness metrics plus truth-based diagnostics.

use serde::{Deserialize, Serialize};

use crate::error::{CalibError, Result};
use crate::prob::{BinStats, BinningScheme};

fn binned(p: &[f64], y: &[u8], scheme: BinningScheme) -> Result<BinStats> {
    if p.is_empty() {
        return Err(CalibError::Empty("forecast sequence"));
    }
    BinStats::from_sequence(scheme, p, y)
}

fn check_lengths(left: usize, right: usize) -> Result<()> {
    if left != right {
        return Err(CalibError::LengthMismatch { left, right });
    }
    if left == 0 {
        return Err(CalibError::Empty("forecast sequence"));
    }
    Ok(())
}

pub fn calibration_error(p: &[f64], y: &[u8], scheme: BinningScheme) -> Result<f64> {
    Ok(binned(p, y, scheme)?.calibration_error())
}

pub fn sharpness(p: &[f64], y: &[u8], scheme: BinningScheme) -> Result<f64> {
    Ok(binned(p, y, scheme)?.sharpness())
}

pub fn refinement(p: &[f64], y: &[u8], scheme: BinningScheme) -> Result<f64> {
    Ok(binned(p, y, scheme)?.refinement())
}

/// Mean squared error, unbinned.
pub fn brier(p: &[f64], y: &[u8]) -> Result<f64> {
    check_lengths(p.len(), y.len())?;
    let sum: f64 = p
        .iter()
        .zip(y)
        .map(|(&p, &y)| (f64::from(y) - p).powi(2))
        .sum();
    Ok(sum / p.len() as f64)
}

/// Mean `|p_t − Pr(Y_t = 1 | x_t)|`.
pub fn true_ce(p: &[f64], truth: Option<&[f64]>) -> Result<f64> {
    let truth = truth.ok_or(CalibError::TruthUnavailable)?;
    check_lengths(p.len(), truth.len())?;
    let sum: f64 = p.iter().zip(truth).map(|(&p, &q)| (p - q).abs()).sum();
    Ok(sum / p.len() as f64)
}

/// Expected accuracy of thresholding `p` at 0.5 (ties predict class 1).
pub fn true_accuracy(p: &[f64], truth: Option<&[f64]>) -> Result<f64> {
    let truth = truth.ok_or(CalibError::TruthUnavailable)?;
    check_lengths(p.len(), truth.len())?;
    let sum: f64 = p
        .iter()
        .zip(truth)
        .map(|(&p, &q)| if p >= 0.5 { q } else { 1.0 - q })
        .sum();
    Ok(sum / p.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub ce: f64,
    pub shp: f64,
    pub refinement: f64,
    pub brier: f64,
    pub ybar: f64,
    pub true_ce: Option<f64>,
    pub true_accuracy: Option<f64>,
}

impl MetricReport {
    pub fn compute(
        p: &[f64],
        y: &[u8],
        truth: Option<&[f64]>,
        scheme: BinningScheme,
    ) -> Result<Self> {
        let stats = binned(p, y, scheme)?;
        let (true_ce, true_accuracy) = match truth {
            Some(t) => (Some(true_ce(p, Some(t))?), Some(true_accuracy(p, Some(t))?)),
            None => (None, None),
        };
        Ok(Self {
            ce: stats.calibration_error(),
            shp: stats.sharpness(),
            refinement: stats.refinement(),
            brier: brier(p, y)?,
            ybar: stats.ybar(),
            true_ce,
            true_accuracy,
        })
    }

    /// Checks `ȳ² ≤ SHP ≤ ȳ`, `R = ȳ − SHP` and `R ≤ BS + ε + ε²/4`.
    pub fn check_invariants(&self, epsilon: f64) -> Result<()> {
        let tol = 1e-9;
        if self.shp < self.ybar.powi(2) - tol || self.shp > self.ybar + tol {
            return Err(CalibError::Invariant(format!(
                "sharpness {} outside [{}, {}]",
                self.shp,
                self.ybar.powi(2),
                self.ybar
            )));
        }
        if (self.refinement - (self.ybar - self.shp)).abs() > tol {
            return Err(CalibError::Invariant(format!(
                "refinement {} differs from ybar - shp {}",
                self.refinement,
                self.ybar - self.shp
            )));
        }
        if self.refinement > self.brier + epsilon + epsilon * epsilon / 4.0 + tol {
            return Err(CalibError::Invariant(format!(
                "refinement {} exceeds brier {} + slack",
                self.refinement, self.brier
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn scheme(eps: f64) -> BinningScheme {
        BinningScheme::new(eps).unwrap()
    }

    #[test]
    fn hand_evaluated_binned_metrics() {
        let p = [0.25, 0.25, 0.75, 0.75];
        let y = [0, 1, 1, 1];
        assert!((calibration_error(&p, &y, scheme(0.5)).unwrap() - 0.25).abs() < 1e-12);
        assert!((sharpness(&p, &y, scheme(0.5)).unwrap() - 0.625).abs() < 1e-12);
        assert!((refinement(&p, &y, scheme(0.5)).unwrap() - 0.125).abs() < 1e-12);
    }

    #[test]
    fn perfect_forecasts() {
        let y = [0, 1, 1, 0, 1];
        let p: Vec<f64> = y.iter().map(|&v| f64::from(v)).collect();
        let s = scheme(0.1);
        assert_eq!(calibration_error(&p, &y, s).unwrap(), 0.0);
        assert!((sharpness(&p, &y, s).unwrap() - 0.6).abs() < 1e-12);
        assert_eq!(refinement(&p, &y, s).unwrap(), 0.0);
        assert_eq!(brier(&p, &y).unwrap(), 0.0);
    }

    #[test]
    fn single_bin_forecasts() {
        let y = [0, 1, 1, 0, 1, 0, 0, 1];
        let p = [0.33; 8];
        let s = scheme(0.1);
        assert!((calibration_error(&p, &y, s).unwrap() - 0.17).abs() < 1e-12);
        assert!((sharpness(&p, &y, s).unwrap() - 0.25).abs() < 1e-12);
        assert!((refinement(&p, &y, s).unwrap() - 0.25).abs() < 1e-12);
    }

    #[test]
    fn brier_fixtures() {
        assert!((brier(&[0.2, 0.9], &[0, 1]).unwrap() - 0.025).abs() < 1e-12);
        assert!((brier(&[0.5; 4], &[0, 1, 1, 0]).unwrap() - 0.25).abs() < 1e-12);
        assert!(matches!(
            brier(&[0.5], &[0, 1]),
            Err(CalibError::LengthMismatch { .. })
        ));
    }

    #[test]
    fn truth_fixtures() {
        assert!((true_ce(&[0.1, 0.9], Some(&[0.9, 0.1])).unwrap() - 0.8).abs() < 1e-12);
        assert!((true_ce(&[0.5; 4], Some(&[0.1, 0.9, 0.1, 0.9])).unwrap() - 0.4).abs() < 1e-12);
        assert!(matches!(
            true_ce(&[0.5], None),
            Err(CalibError::TruthUnavailable)
        ));

        let truth = [0.1, 0.9, 0.9, 0.1];
        assert!((true_accuracy(&[0.2, 0.8, 0.7, 0.4], Some(&truth)).unwrap() - 0.9).abs() < 1e-12);
        assert!((true_accuracy(&[0.8, 0.2, 0.3, 0.6], Some(&truth)).unwrap() - 0.1).abs() < 1e-12);
        assert!((true_accuracy(&[0.5], Some(&[0.9])).unwrap() - 0.9).abs() < 1e-12);
    }

    #[test]
    fn report_fuzz_invariants() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2024);
        for case in 0..1000 {
            let eps = [0.05, 0.1, 0.2, 0.5][case % 4];
            let n = rng.random_range(1..=500);
            let p: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..=1.0)).collect();
            let y: Vec<u8> = (0..n).map(|_| u8::from(rng.random_bool(0.5))).collect();
            let report = MetricReport::compute(&p, &y, None, scheme(eps)).unwrap();
            report.check_invariants(eps).unwrap();
            assert!(report.ce <= 1.0 && report.shp <= 1.0);
        }
    }

    proptest! {
        #[test]
        fn binned_metrics_ignore_time_order(
            pairs in prop::collection::vec((0.0f64..=1.0, 0u8..=1), 1..200),
            rot in 0usize..200,
        ) {
            let s = scheme(0.1);
            let (p, y): (Vec<f64>, Vec<u8>) = pairs.iter().copied().unzip();
            let mut rotated = pairs.clone();
            rotated.rotate_left(rot % pairs.len());
            rotated.reverse();
            let (p2, y2): (Vec<f64>, Vec<u8>) = rotated.into_iter().unzip();
            let a = MetricReport::compute(&p, &y, None, s).unwrap();
            let b = MetricReport::compute(&p2, &y2, None, s).unwrap();
            prop_assert!((a.ce - b.ce).abs() < 1e-9);
            prop_assert!((a.shp - b.shp).abs() < 1e-9);
            prop_assert!((a.refinement - b.refinement).abs() < 1e-9);
        }
    }
}
