//! Tracking and hedging wrappers over an expert forecast stream.
//!
//! Tracking replaces the expert's forecast with the past outcome average of
//! its ε-bin. Hedging runs the F99 calibrated forecaster, one instance per
//! expert bin, so the result inherits the expert's sharpness while becoming
//! calibrated even against an adversary.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{CalibError, Result};
use crate::prob::{BinStats, BinningScheme, Probability};
use crate::trace::{ForecastTrace, Method};

/// Outcome averages of past steps keyed by the expert's bin.
#[derive(Debug, Clone, PartialEq)]
pub struct TrackingState {
    stats: BinStats,
}

impl TrackingState {
    pub fn new(scheme: BinningScheme) -> Self {
        Self {
            stats: BinStats::new(scheme),
        }
    }

    pub fn scheme(&self) -> &BinningScheme {
        self.stats.scheme()
    }

    pub fn count(&self, b: usize) -> u64 {
        self.stats.count(b)
    }

    /// Past outcome average of `expert_p`'s bin, or that bin's midpoint when
    /// the bin has not been visited yet.
    pub fn forecast(&self, expert_p: Probability) -> Probability {
        let b = self.scheme().bin_index(expert_p.value());
        if self.stats.count(b) == 0 {
            Probability::saturating(self.scheme().midpoint(b))
        } else {
            Probability::saturating(self.stats.outcome_mean(b))
        }
    }

    pub fn update(&mut self, expert_p: Probability, y: u8) {
        self.stats.push(expert_p.value(), y);
    }
}

pub fn tracking_forecast(state: &TrackingState, expert_p: Probability) -> Probability {
    state.forecast(expert_p)
}

pub fn tracking_update(state: &TrackingState, expert_p: Probability, y: u8) -> TrackingState {
    let mut next = state.clone();
    next.update(expert_p, y);
    next
}

/// Randomized forecast over bin midpoints.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum HedgeDistribution {
    Point(f64),
    /// `low` with probability `p_low`, else `high`. `low` and `high` are
    /// consecutive midpoints.
    TwoPoint {
        low: f64,
        high: f64,
        p_low: f64,
    },
}

impl HedgeDistribution {
    pub fn mean(&self) -> f64 {
        match *self {
            HedgeDistribution::Point(v) => v,
            HedgeDistribution::TwoPoint { low, high, p_low } => p_low * low + (1.0 - p_low) * high,
        }
    }

    /// `(value, probability)` pairs.
    pub fn support(&self) -> Vec<(f64, f64)> {
        match *self {
            HedgeDistribution::Point(v) => vec![(v, 1.0)],
            HedgeDistribution::TwoPoint { low, high, p_low } => {
                vec![(low, p_low), (high, 1.0 - p_low)]
            }
        }
    }

    /// Draws a forecast. Point masses consume no randomness.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Probability {
        let v = match *self {
            HedgeDistribution::Point(v) => v,
            HedgeDistribution::TwoPoint { low, high, p_low } => {
                if rng.random::<f64>() < p_low {
                    low
                } else {
                    high
                }
            }
        };
        Probability::saturating(v)
    }
}

/// State of the F99 calibrated forecaster.
///
/// For each bin `b` it keeps how often the midpoint `m_b` was forecast and the
/// mean outcome on those steps (`m_b` while unused). With `l_b`, `r_b` the bin
/// edges, the deficit is `d_b = l_b − p_b` and the excess `e_b = p_b − r_b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct F99State {
    scheme: BinningScheme,
    counts: Vec<u64>,
    averages: Vec<f64>,
}

impl F99State {
    pub fn new(scheme: BinningScheme) -> Self {
        let averages = (1..=scheme.len()).map(|b| scheme.midpoint(b)).collect();
        Self {
            counts: vec![0; scheme.len()],
            averages,
            scheme,
        }
    }

    /// State with given per-bin `(count, observed average)`; a zero count
    /// resets that bin's average to its midpoint.
    pub fn with_observed(scheme: BinningScheme, observed: &[(u64, f64)]) -> Result<Self> {
        if observed.len() != scheme.len() {
            return Err(CalibError::DimensionMismatch {
                expected: scheme.len(),
                got: observed.len(),
            });
        }
        let mut state = Self::new(scheme);
        for (b, &(n, avg)) in observed.iter().enumerate() {
            if n > 0 {
                state.averages[b] = Probability::new(avg)?.value();
                state.counts[b] = n;
            }
        }
        Ok(state)
    }

    pub fn scheme(&self) -> &BinningScheme {
        &self.scheme
    }

    /// Total number of updates.
    pub fn steps(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn count(&self, b: usize) -> u64 {
        self.counts[b - 1]
    }

    pub fn average(&self, b: usize) -> f64 {
        self.averages[b - 1]
    }

    pub fn deficit(&self, b: usize) -> f64 {
        self.scheme.left(b) - self.average(b)
    }

    pub fn excess(&self, b: usize) -> f64 {
        self.average(b) - self.scheme.right(b)
    }

    /// Current forecast distribution. Ties go to the smallest bin index.
    pub fn forecast(&self) -> Result<HedgeDistribution> {
        let m = self.scheme.len();
        if let Some(b) = (1..=m).find(|&b| self.deficit(b) <= 0.0 && self.excess(b) <= 0.0) {
            return Ok(HedgeDistribution::Point(self.scheme.midpoint(b)));
        }
        let Some(b) = (1..m).find(|&b| self.excess(b) > 0.0 && self.deficit(b + 1) > 0.0) else {
            return Err(CalibError::Invariant(
                "no bin satisfies either F99 condition".into(),
            ));
        };
        let (e, d) = (self.excess(b), self.deficit(b + 1));
        Ok(HedgeDistribution::TwoPoint {
            low: self.scheme.midpoint(b),
            high: self.scheme.midpoint(b + 1),
            p_low: d / (d + e),
        })
    }

    /// Records outcome `y` for a step on which `chosen` was forecast.
    pub fn update(&mut self, chosen: Probability, y: u8) -> Result<()> {
        let b = self.scheme.bin_index(chosen.value());
        if (self.scheme.midpoint(b) - chosen.value()).abs() > 1e-12 {
            return Err(CalibError::NotAMidpoint(chosen.value()));
        }
        let i = b - 1;
        let n = self.counts[i] as f64;
        let prior = if self.counts[i] == 0 {
            0.0
        } else {
            self.averages[i]
        };
        self.averages[i] = (prior * n + f64::from(y)) / (n + 1.0);
        self.counts[i] += 1;
        Ok(())
    }
}

pub fn f99_forecast<R: Rng + ?Sized>(
    state: &F99State,
    rng: &mut R,
) -> Result<(HedgeDistribution, Probability)> {
    let dist = state.forecast()?;
    let chosen = dist.sample(rng);
    Ok((dist, chosen))
}

pub fn f99_update(state: &F99State, chosen: Probability, y: u8) -> Result<F99State> {
    let mut next = state.clone();
    next.update(chosen, y)?;
    Ok(next)
}

/// One F99 instance per expert bin.
#[derive(Debug, Clone, PartialEq)]
pub struct HopsState {
    scheme: BinningScheme,
    instances: Vec<F99State>,
}

impl HopsState {
    pub fn new(scheme: BinningScheme) -> Self {
        Self {
            instances: vec![F99State::new(scheme); scheme.len()],
            scheme,
        }
    }

    pub fn instance(&self, b: usize) -> &F99State {
        &self.instances[b - 1]
    }

    /// Forecast distribution of the instance owning `expert_p`'s bin.
    pub fn distribution(&self, expert_p: Probability) -> Result<HedgeDistribution> {
        self.instances[self.scheme.bin_zero(expert_p.value())].forecast()
    }

    pub fn update(&mut self, expert_p: Probability, chosen: Probability, y: u8) -> Result<()> {
        let b = self.scheme.bin_zero(expert_p.value());
        self.instances[b].update(chosen, y)
    }

    /// Forecast, draw, then learn `y`. Only valid when `y` does not depend on
    /// the distribution; adversarial callers use [`Self::distribution`].
    pub fn step<R: Rng + ?Sized>(
        &mut self,
        expert_p: Probability,
        y: u8,
        rng: &mut R,
    ) -> Result<Probability> {
        let chosen = self.distribution(expert_p)?.sample(rng);
        self.update(expert_p, chosen, y)?;
        Ok(chosen)
    }
}

pub fn hops_step<R: Rng + ?Sized>(
    state: &HopsState,
    expert_p: Probability,
    y: u8,
    rng: &mut R,
) -> Result<(Probability, HopsState)> {
    let mut next = state.clone();
    let p = next.step(expert_p, y, rng)?;
    Ok((p, next))
}

/// Covariate-free F99 over an outcome sequence. The trace starts at `t = 1`
/// and holds a single `F99` column.
pub fn climatology_run<R: Rng + ?Sized>(
    outcomes: &[u8],
    epsilon: f64,
    rng: &mut R,
) -> Result<ForecastTrace> {
    if outcomes.is_empty() {
        return Err(CalibError::Empty("outcome sequence"));
    }
    let mut state = F99State::new(BinningScheme::new(epsilon)?);
    let mut forecasts = Vec::with_capacity(outcomes.len());
    for &y in outcomes {
        let (_, chosen) = f99_forecast(&state, rng)?;
        state.update(chosen, y)?;
        forecasts.push(chosen.value());
    }
    ForecastTrace::new(1, outcomes.to_vec(), None)?.with_column(Method::F99, forecasts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn p(v: f64) -> Probability {
        Probability::new(v).unwrap()
    }

    fn scheme() -> BinningScheme {
        BinningScheme::new(0.1).unwrap()
    }

    #[test]
    fn tracking_fixtures() {
        let mut st = TrackingState::new(scheme());
        assert!((st.forecast(p(0.33)).value() - 0.35).abs() < 1e-12);
        st.update(p(0.75), 1);
        assert_eq!(st.count(8), 1);
        st.update(p(0.72), 0);
        assert!((st.forecast(p(0.78)).value() - 0.5).abs() < 1e-12);
        for b in (1..=10).filter(|&b| b != 8) {
            assert_eq!(st.count(b), 0);
        }
        let mut st = TrackingState::new(scheme());
        for y in [1, 1, 0] {
            st = tracking_update(&st, p(0.41), y);
        }
        assert!((tracking_forecast(&st, p(0.49)).value() - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn tracking_reports_past_bin_average() {
        let mut st = TrackingState::new(scheme());
        for y in [1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 0, 0, 0] {
            st.update(p(0.75), y);
        }
        assert!((st.forecast(p(0.75)).value() - 0.85).abs() < 1e-12);
    }

    #[test]
    fn fresh_f99_forecasts_first_midpoint() {
        let st = F99State::new(scheme());
        assert_eq!(st.forecast().unwrap(), HedgeDistribution::Point(0.05));
    }

    #[test]
    fn f99_hedges_between_consecutive_midpoints() {
        let mut observed = vec![(1, 0.5), (1, 0.5), (1, 0.35), (1, 0.25)];
        observed.extend(std::iter::repeat_n((1, 0.1), 6));
        let st = F99State::with_observed(scheme(), &observed).unwrap();
        for b in 1..=10 {
            assert!(
                !(st.deficit(b) <= 0.0 && st.excess(b) <= 0.0),
                "A holds at {b}"
            );
        }
        match st.forecast().unwrap() {
            HedgeDistribution::TwoPoint { low, high, p_low } => {
                assert!((low - 0.25).abs() < 1e-12);
                assert!((high - 0.35).abs() < 1e-12);
                assert!((p_low - 0.5).abs() < 1e-9);
            }
            other => panic!("expected a hedge, got {other:?}"),
        }
    }

    #[test]
    fn f99_update_fixtures() {
        let st = f99_update(&F99State::new(scheme()), p(0.05), 1).unwrap();
        assert_eq!(st.average(1), 1.0);
        assert_eq!(st.deficit(1), -1.0);
        assert!((st.excess(1) - 0.9).abs() < 1e-12);
        for b in 2..=10 {
            assert_eq!(st.average(b), scheme().midpoint(b));
        }

        let mut observed = vec![(0, 0.0); 10];
        observed[4] = (3, 1.0 / 3.0);
        let mut st = F99State::with_observed(scheme(), &observed).unwrap();
        st.update(p(0.45), 1).unwrap();
        assert!((st.average(5) - 0.5).abs() < 1e-12);
        assert_eq!(st.count(5), 4);

        assert!(matches!(
            F99State::new(scheme()).update(p(0.33), 1),
            Err(CalibError::NotAMidpoint(_))
        ));
    }

    #[test]
    fn untouched_bin_satisfies_condition_a() {
        let mut observed = vec![(2, 1.0); 10];
        observed[6] = (0, 0.0);
        let st = F99State::with_observed(scheme(), &observed).unwrap();
        assert_eq!(
            st.forecast().unwrap(),
            HedgeDistribution::Point(scheme().midpoint(7))
        );
    }

    #[test]
    fn climatology_constant_ones_reach_top_bin() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let trace = climatology_run(&[1; 200], 0.1, &mut rng).unwrap();
        let f = trace.column(Method::F99).unwrap();
        assert!(f[150..].iter().all(|&v| (v - 0.95).abs() < 1e-12));
    }

    #[test]
    fn climatology_matches_base_rate() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let ys: Vec<u8> = (0..5000).map(|_| u8::from(rng.random_bool(0.37))).collect();
        let trace = climatology_run(&ys, 0.1, &mut rng).unwrap();
        let tail = &trace.column(Method::F99).unwrap()[4000..];
        let mean = tail.iter().sum::<f64>() / tail.len() as f64;
        assert!((mean - 0.37).abs() <= 0.05, "{mean}");
    }

    #[test]
    fn climatology_alternating_outcomes() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let ys: Vec<u8> = (0..5000).map(|t| (t % 2) as u8).collect();
        let trace = climatology_run(&ys, 0.1, &mut rng).unwrap();
        let tail = &trace.column(Method::F99).unwrap()[1000..];
        let mean = tail.iter().sum::<f64>() / tail.len() as f64;
        assert!((mean - 0.5).abs() <= 0.05, "{mean}");
    }

    #[test]
    fn hops_single_bin_equals_standalone_f99() {
        let ys: Vec<u8> = (0..300).map(|t| u8::from(t % 3 != 0)).collect();
        let mut hops = HopsState::new(scheme());
        let mut rng_a = ChaCha8Rng::seed_from_u64(9);
        let routed: Vec<f64> = ys
            .iter()
            .map(|&y| hops.step(p(0.62), y, &mut rng_a).unwrap().value())
            .collect();
        let mut rng_b = ChaCha8Rng::seed_from_u64(9);
        let standalone = climatology_run(&ys, 0.1, &mut rng_b).unwrap();
        assert_eq!(routed, standalone.column(Method::F99).unwrap());
        assert_eq!(hops.instance(7).steps(), 300);
    }

    #[test]
    fn hops_partitions_outcomes_by_expert_bin() {
        let mut hops = HopsState::new(scheme());
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for t in 0..100 {
            let expert = if t % 2 == 0 { 0.15 } else { 0.85 };
            hops = hops_step(&hops, p(expert), (t % 3 == 0) as u8, &mut rng)
                .unwrap()
                .1;
        }
        assert_eq!(hops.instance(2).steps(), 50);
        assert_eq!(hops.instance(9).steps(), 50);
        assert_eq!(hops.instance(2).steps() + hops.instance(9).steps(), 100);
    }

    #[test]
    fn hops_is_calibrated_against_the_adversary() {
        let sch = scheme();
        let t_max = 10_000;
        let mut total = 0.0;
        for seed in 0..20 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut hops = HopsState::new(sch);
            let mut forecasts = Vec::with_capacity(t_max);
            let mut ys = Vec::with_capacity(t_max);
            for _ in 0..t_max {
                let expert = p(rng.random_range(0.0..1.0));
                let dist = hops.distribution(expert).unwrap();
                let y = u8::from(dist.mean() <= 0.5);
                let chosen = dist.sample(&mut rng);
                hops.update(expert, chosen, y).unwrap();
                forecasts.push(chosen.value());
                ys.push(y);
            }
            total += BinStats::from_sequence(sch, &forecasts, &ys)
                .unwrap()
                .calibration_error();
        }
        let bound = 0.05 + 2.0 * (1.0 / (0.01 * t_max as f64)).sqrt();
        assert!(total / 20.0 <= bound, "{}", total / 20.0);
    }

    proptest! {
        #[test]
        fn f99_always_has_a_valid_distribution(
            eps in prop::sample::select(vec![0.05, 0.1, 0.2, 0.3, 0.5]),
            ys in prop::collection::vec(0u8..=1, 1..400),
            seed in any::<u64>(),
        ) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut st = F99State::new(BinningScheme::new(eps).unwrap());
            for &y in &ys {
                let (dist, chosen) = f99_forecast(&st, &mut rng).unwrap();
                let support = dist.support();
                let mass: f64 = support.iter().map(|&(_, q)| q).sum();
                prop_assert!((mass - 1.0).abs() <= 1e-12);
                prop_assert!(support.iter().all(|&(_, q)| (0.0..=1.0).contains(&q)));
                if let HedgeDistribution::TwoPoint { low, high, .. } = dist {
                    let b = st.scheme().bin_index(low);
                    prop_assert_eq!(st.scheme().bin_index(high), b + 1);
                }
                st.update(chosen, y).unwrap();
            }
        }

        #[test]
        fn seeded_replays_are_identical(ys in prop::collection::vec(0u8..=1, 1..200), seed in any::<u64>()) {
            let a = climatology_run(&ys, 0.1, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
            let b = climatology_run(&ys, 0.1, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
            prop_assert_eq!(a, b);
        }
    }
}
