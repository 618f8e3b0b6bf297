use serde::{Deserialize, Serialize};

use crate::calibeating::HedgeDistribution;

/// Forecaster an adversarial stream plays against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AdversaryTarget {
    Ops,
    Hops,
}

impl AdversaryTarget {
    pub fn name(self) -> &'static str {
        match self {
            AdversaryTarget::Ops => "ops",
            AdversaryTarget::Hops => "hops",
        }
    }
}

/// `1{p ≤ 0.5}` where `p` is the announced forecast, or the mean of the
/// announced distribution for a hedging forecaster.
pub fn adversarial_outcome(announced: &HedgeDistribution) -> u8 {
    u8::from(announced.mean() <= 0.5)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn adversary_fixtures() {
        assert_eq!(adversarial_outcome(&HedgeDistribution::Point(0.3)), 1);
        assert_eq!(adversarial_outcome(&HedgeDistribution::Point(0.7)), 0);
        let hedge = HedgeDistribution::TwoPoint {
            low: 0.45,
            high: 0.55,
            p_low: 0.5,
        };
        assert_eq!(adversarial_outcome(&hedge), 1);
    }
}
