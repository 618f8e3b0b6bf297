//! Probability primitives shared by every learner: link functions, score
//! clipping, ε-bins and the log-loss.

use serde::{Deserialize, Serialize};

use crate::error::{CalibError, Result};

/// Lower clip applied to base-model scores at ingestion.
pub const SCORE_CLIP_LO: f64 = 0.01;
/// Upper clip applied to base-model scores at ingestion.
pub const SCORE_CLIP_HI: f64 = 0.99;

const LOSS_CLIP: f64 = 1e-12;
// Bin edges are snapped within this tolerance so decimal boundaries like 0.3
// land in the bin they open.
const EDGE_SNAP: f64 = 1e-9;

/// A forecast or score in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct Probability(f64);

impl Probability {
    pub fn new(value: f64) -> Result<Self> {
        if (0.0..=1.0).contains(&value) {
            Ok(Self(value))
        } else {
            Err(CalibError::InvalidProbability(value))
        }
    }

    /// Clamps into `[0, 1]`. NaN maps to 0.5.
    pub fn saturating(value: f64) -> Self {
        if value.is_nan() {
            Self(0.5)
        } else {
            Self(value.clamp(0.0, 1.0))
        }
    }

    #[inline]
    pub fn value(self) -> f64 {
        self.0
    }
}

impl From<Probability> for f64 {
    fn from(p: Probability) -> f64 {
        p.0
    }
}

/// A base-model score clipped to `[0.01, 0.99]`, so that its logit is bounded
/// by `logit(0.99) ≈ 4.595`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct ClippedScore(f64);

impl ClippedScore {
    /// Rejects values outside `[0, 1]`, clips the rest.
    pub fn new(value: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&value) {
            return Err(CalibError::InvalidProbability(value));
        }
        Ok(Self(value.clamp(SCORE_CLIP_LO, SCORE_CLIP_HI)))
    }

    pub fn from_probability(p: Probability) -> Self {
        Self(p.0.clamp(SCORE_CLIP_LO, SCORE_CLIP_HI))
    }

    #[inline]
    pub fn value(self) -> f64 {
        self.0
    }

    #[inline]
    pub fn logit(self) -> f64 {
        (self.0 / (1.0 - self.0)).ln()
    }

    pub fn probability(self) -> Probability {
        Probability(self.0)
    }
}

/// Numerically stable logistic function.
pub fn sigmoid(z: f64) -> Probability {
    let p = if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    };
    Probability(p)
}

/// `log(p / (1 - p))` after clipping `p` to `[0.01, 0.99]`.
pub fn logit(p: f64) -> Result<f64> {
    Ok(ClippedScore::new(p)?.logit())
}

/// Binary log-loss with the forecast clipped to `[1e-12, 1 - 1e-12]`.
pub fn log_loss(p: f64, y: u8) -> f64 {
    let p = p.clamp(LOSS_CLIP, 1.0 - LOSS_CLIP);
    if y == 1 {
        -p.ln()
    } else {
        -(1.0 - p).ln()
    }
}

/// Equal-width bins `[0, ε), [ε, 2ε), …, [1 − ε, 1]`.
///
/// Bin indices are 1-based in the public API, matching the usual `B_1 … B_m`
/// naming; `m = ceil(1/ε)` and the last bin absorbs any remainder.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BinningScheme {
    epsilon: f64,
    bins: usize,
}

impl BinningScheme {
    pub fn new(epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon <= 1.0) {
            return Err(CalibError::Config(format!(
                "epsilon must lie in (0, 1], got {epsilon}"
            )));
        }
        let bins = ((1.0 / epsilon) - EDGE_SNAP).ceil().max(1.0) as usize;
        Ok(Self { epsilon, bins })
    }

    #[inline]
    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// Number of bins `m`.
    #[inline]
    pub fn len(&self) -> usize {
        self.bins
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        false
    }

    /// 1-based bin containing `p`; `p = 1` maps to `m`.
    pub fn bin_index(&self, p: f64) -> usize {
        self.bin_zero(p) + 1
    }

    /// 0-based variant of [`bin_index`](Self::bin_index) used for array access.
    #[inline]
    pub(crate) fn bin_zero(&self, p: f64) -> usize {
        let raw = (p / self.epsilon + EDGE_SNAP).floor();
        if raw <= 0.0 {
            0
        } else {
            (raw as usize).min(self.bins - 1)
        }
    }

    /// Midpoint `(b − 0.5)ε` of 1-based bin `b`. When ε does not divide 1 the
    /// last bin is `[(m − 1)ε, 1]` and its midpoint is taken over that interval.
    pub fn midpoint(&self, b: usize) -> f64 {
        if b == self.bins && self.overhangs() {
            0.5 * (self.left(b) + 1.0)
        } else {
            (b as f64 - 0.5) * self.epsilon
        }
    }

    pub fn left(&self, b: usize) -> f64 {
        (b as f64 - 1.0) * self.epsilon
    }

    pub fn right(&self, b: usize) -> f64 {
        if b == self.bins && self.overhangs() {
            1.0
        } else {
            b as f64 * self.epsilon
        }
    }

    fn overhangs(&self) -> bool {
        self.bins as f64 * self.epsilon > 1.0 + EDGE_SNAP
    }

    /// Midpoint of the bin containing `p`.
    pub fn discretize(&self, p: f64) -> f64 {
        self.midpoint(self.bin_index(p))
    }
}

/// Per-bin aggregates of a forecast sequence: counts, outcome sums and
/// forecast sums. Accumulates incrementally.
#[derive(Debug, Clone, PartialEq)]
pub struct BinStats {
    scheme: BinningScheme,
    counts: Vec<u64>,
    outcome_sums: Vec<f64>,
    forecast_sums: Vec<f64>,
    total: u64,
    outcome_total: f64,
}

impl BinStats {
    pub fn new(scheme: BinningScheme) -> Self {
        let m = scheme.len();
        Self {
            scheme,
            counts: vec![0; m],
            outcome_sums: vec![0.0; m],
            forecast_sums: vec![0.0; m],
            total: 0,
            outcome_total: 0.0,
        }
    }

    pub fn from_sequence(
        scheme: BinningScheme,
        forecasts: &[f64],
        outcomes: &[u8],
    ) -> Result<Self> {
        if forecasts.len() != outcomes.len() {
            return Err(CalibError::LengthMismatch {
                left: forecasts.len(),
                right: outcomes.len(),
            });
        }
        let mut stats = Self::new(scheme);
        for (&p, &y) in forecasts.iter().zip(outcomes) {
            stats.push(p, y);
        }
        Ok(stats)
    }

    pub fn push(&mut self, p: f64, y: u8) {
        let b = self.scheme.bin_zero(p);
        let y = f64::from(y);
        self.counts[b] += 1;
        self.outcome_sums[b] += y;
        self.forecast_sums[b] += p;
        self.total += 1;
        self.outcome_total += y;
    }

    pub fn scheme(&self) -> &BinningScheme {
        &self.scheme
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    /// `N_b` for 1-based bin `b`.
    pub fn count(&self, b: usize) -> u64 {
        self.counts[b - 1]
    }

    /// `ŷ_b`; zero for empty bins.
    pub fn outcome_mean(&self, b: usize) -> f64 {
        let n = self.counts[b - 1];
        if n == 0 {
            0.0
        } else {
            self.outcome_sums[b - 1] / n as f64
        }
    }

    /// `p̂_b`; the bin midpoint for empty bins.
    pub fn forecast_mean(&self, b: usize) -> f64 {
        let n = self.counts[b - 1];
        if n == 0 {
            self.scheme.midpoint(b)
        } else {
            self.forecast_sums[b - 1] / n as f64
        }
    }

    pub fn ybar(&self) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.outcome_total / self.total as f64
        }
    }

    fn weighted<F: Fn(usize) -> f64>(&self, term: F) -> f64 {
        if self.total == 0 {
            return 0.0;
        }
        let sum: f64 = (1..=self.scheme.len())
            .filter(|&b| self.counts[b - 1] > 0)
            .map(|b| self.counts[b - 1] as f64 * term(b))
            .sum();
        sum / self.total as f64
    }

    /// ℓ1 calibration error `(1/T) Σ N_b |p̂_b − ŷ_b|`.
    pub fn calibration_error(&self) -> f64 {
        self.weighted(|b| (self.forecast_mean(b) - self.outcome_mean(b)).abs())
    }

    /// Sharpness `(1/T) Σ N_b ŷ_b²`.
    pub fn sharpness(&self) -> f64 {
        self.weighted(|b| self.outcome_mean(b).powi(2))
    }

    /// Refinement `(1/T) Σ N_b ŷ_b (1 − ŷ_b)`.
    pub fn refinement(&self) -> f64 {
        self.weighted(|b| {
            let y = self.outcome_mean(b);
            y * (1.0 - y)
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sigmoid_fixtures() {
        assert_eq!(sigmoid(0.0).value(), 0.5);
        assert!((sigmoid(logit(0.99).unwrap()).value() - 0.99).abs() < 1e-12);
        assert!((sigmoid(100.0).value() - 1.0).abs() <= f64::EPSILON);
        assert!(sigmoid(-700.0).value() >= 0.0);
        assert!(sigmoid(700.0).value() <= 1.0);
    }

    #[test]
    fn logit_fixtures() {
        assert_eq!(logit(0.5).unwrap(), 0.0);
        let l99 = 99f64.ln();
        assert!((logit(0.99).unwrap() - 4.59512).abs() < 1e-5);
        assert!((logit(0.99).unwrap() - l99).abs() < 1e-12);
        assert!((logit(0.999).unwrap() - l99).abs() < 1e-12);
        assert!((logit(0.0).unwrap() + l99).abs() < 1e-12);
        assert!(logit(1.5).is_err());
        assert!(logit(-0.1).is_err());
        assert!(logit(f64::NAN).is_err());
    }

    #[test]
    fn bin_index_fixtures() {
        let s = BinningScheme::new(0.1).unwrap();
        assert_eq!(s.len(), 10);
        assert_eq!(s.bin_index(0.05), 1);
        assert_eq!(s.bin_index(0.1), 2);
        assert_eq!(s.bin_index(1.0), 10);
        assert_eq!(s.bin_index(0.0), 1);
        assert_eq!(s.bin_index(0.3), 4);
        assert_eq!(s.bin_index(0.7), 8);
        assert!((s.midpoint(4) - 0.35).abs() < 1e-12);
    }

    #[test]
    fn uneven_epsilon_last_bin_absorbs_remainder() {
        let s = BinningScheme::new(0.3).unwrap();
        assert_eq!(s.len(), 4);
        assert_eq!(s.bin_index(0.95), 4);
        assert_eq!(s.bin_index(1.0), 4);
        assert!((s.midpoint(4) - 0.95).abs() < 1e-12);
        assert!(BinningScheme::new(0.0).is_err());
        assert!(BinningScheme::new(1.5).is_err());
        assert_eq!(BinningScheme::new(1.0).unwrap().len(), 1);
        assert_eq!(BinningScheme::new(0.05).unwrap().len(), 20);
        assert_eq!(BinningScheme::new(0.2).unwrap().len(), 5);
    }

    #[test]
    fn log_loss_fixtures() {
        assert!((log_loss(0.5, 1) - 2f64.ln()).abs() < 1e-12);
        assert!(log_loss(1.0, 1) <= 1e-11);
        assert!((log_loss(0.25, 0) - 0.2876820724517809).abs() < 1e-12);
        assert!(log_loss(0.0, 1).is_finite());
    }

    #[test]
    fn clipped_score_clips_and_rejects() {
        assert_eq!(ClippedScore::new(0.999).unwrap().value(), 0.99);
        assert_eq!(ClippedScore::new(0.0).unwrap().value(), 0.01);
        assert!(ClippedScore::new(1.01).is_err());
        let bound = ClippedScore::new(0.99).unwrap().logit();
        assert!(bound < 4.6);
    }

    #[test]
    fn bin_stats_empty_conventions() {
        let s = BinningScheme::new(0.5).unwrap();
        let stats = BinStats::new(s);
        assert_eq!(stats.outcome_mean(1), 0.0);
        assert_eq!(stats.forecast_mean(2), 0.75);
        assert_eq!(stats.calibration_error(), 0.0);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn sigmoid_inverts_logit(p in 0.01f64..=0.99) {
                let z = logit(p).unwrap();
                prop_assert!((sigmoid(z).value() - p).abs() < 1e-12);
            }

            #[test]
            fn bin_index_is_monotone_and_total(a in 0.0f64..=1.0, b in 0.0f64..=1.0,
                                               eps in prop::sample::select(vec![0.05, 0.1, 0.2, 0.3, 0.5])) {
                let s = BinningScheme::new(eps).unwrap();
                let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
                let (ilo, ihi) = (s.bin_index(lo), s.bin_index(hi));
                prop_assert!(ilo >= 1 && ihi <= s.len());
                prop_assert!(ilo <= ihi);
                prop_assert!((s.discretize(a) - a).abs() <= eps / 2.0 + 1e-9);
            }
        }

        #[test]
        fn bin_index_is_surjective() {
            for eps in [0.05, 0.1, 0.2] {
                let s = BinningScheme::new(eps).unwrap();
                let mut seen = vec![false; s.len()];
                for k in 0..=10_000 {
                    seen[s.bin_index(k as f64 / 10_000.0) - 1] = true;
                }
                assert!(seen.iter().all(|&x| x));
            }
        }
    }
}
