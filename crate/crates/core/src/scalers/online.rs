use serde::{Deserialize, Serialize};

use super::{BetaParams, PlattParams};
use crate::error::Result;
use crate::ons::{OnsConfig, OnsState};
use crate::prob::{ClippedScore, Probability};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum OnlineFamily {
    Platt,
    Beta,
}

impl OnlineFamily {
    pub fn config(self) -> OnsConfig {
        match self {
            OnlineFamily::Platt => OnsConfig::platt(),
            OnlineFamily::Beta => OnsConfig::beta(),
        }
    }

    /// Identity-map starting point: `(1, 0)` for Platt, `(1, 1, 0)` for beta.
    pub fn initial_theta(self) -> &'static [f64] {
        match self {
            OnlineFamily::Platt => &[1.0, 0.0],
            OnlineFamily::Beta => &[1.0, 1.0, 0.0],
        }
    }

    fn feature(self, score: ClippedScore) -> Vec<f64> {
        match self {
            OnlineFamily::Platt => PlattParams::feature(score).to_vec(),
            OnlineFamily::Beta => BetaParams::feature(score).to_vec(),
        }
    }
}

/// Online Platt or beta scaling driven by the online Newton step.
#[derive(Debug, Clone, PartialEq)]
pub struct OnlineScaler {
    family: OnlineFamily,
    config: OnsConfig,
    state: OnsState,
}

impl OnlineScaler {
    pub fn new(family: OnlineFamily) -> Self {
        let config = family.config();
        let state = OnsState::new(&config, family.initial_theta())
            .expect("initial theta matches dimension");
        Self {
            family,
            config,
            state,
        }
    }

    pub fn family(&self) -> OnlineFamily {
        self.family
    }

    pub fn state(&self) -> &OnsState {
        &self.state
    }

    pub fn theta(&self) -> &[f64] {
        self.state.theta()
    }

    /// Forecast with the current (strict-past) parameters.
    pub fn forecast(&self, score: ClippedScore) -> Probability {
        Probability::saturating(self.state.predict(&self.family.feature(score)))
    }

    pub fn update(&mut self, score: ClippedScore, y: u8) -> Result<()> {
        self.state
            .step(&self.config, &self.family.feature(score), y)
    }

    /// Forecast-then-update.
    pub fn step(&mut self, score: ClippedScore, y: u8) -> Result<Probability> {
        let p = self.forecast(score);
        self.update(score, y)?;
        Ok(p)
    }
}

/// Value-style form of [`OnlineScaler::step`].
pub fn online_scaler_step(
    scaler: &OnlineScaler,
    score: ClippedScore,
    y: u8,
) -> Result<(Probability, OnlineScaler)> {
    let mut next = scaler.clone();
    let p = next.step(score, y)?;
    Ok((p, next))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cs(v: f64) -> ClippedScore {
        ClippedScore::new(v).unwrap()
    }

    #[test]
    fn first_forecasts_follow_initialization() {
        let ops = OnlineScaler::new(OnlineFamily::Platt);
        let (p, next) = online_scaler_step(&ops, cs(0.37), 1).unwrap();
        assert!((p.value() - 0.37).abs() < 1e-12);
        assert_eq!(next.state().steps(), 1);
        assert_eq!(ops.state().steps(), 0);

        let obs = OnlineScaler::new(OnlineFamily::Beta);
        assert!((obs.forecast(cs(0.5)).value() - 0.2).abs() < 1e-12);
    }

    #[test]
    fn calibrated_scores_keep_identity_map() {
        for seed in 0..10 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut ops = OnlineScaler::new(OnlineFamily::Platt);
            for _ in 0..10_000 {
                let s = cs(rng.random_range(0.01..0.99));
                let y = u8::from(rng.random_bool(s.value()));
                ops.step(s, y).unwrap();
            }
            let th = ops.theta();
            let dist = ((th[0] - 1.0).powi(2) + th[1].powi(2)).sqrt();
            assert!(dist <= 0.2, "seed {seed}: theta {th:?}");
        }
    }
}
