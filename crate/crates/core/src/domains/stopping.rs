//! Deciding when to stop deliberating about a binary prediction.
//!
//! One computation draws a Bernoulli(θ) sample; terminating predicts the
//! more probable outcome and earns +1 if right, -1 if wrong. The same
//! problem can also be scored by the probability of being right.

use serde::{Deserialize, Serialize};
use smallvec::smallvec;

use super::BetaParams;
use crate::error::{MetaError, Result};
use crate::mdp::{MetaMdp, MetaMdpSpec, Successors};

pub type StoppingBelief = BetaParams;

/// How a terminal prediction is scored.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StoppingScoring {
    /// `+1` if correct, `−1` if not: `2·p_correct − 1` in expectation.
    #[default]
    Signed,
    /// `p_correct` itself.
    Probability,
}

impl StoppingScoring {
    /// Maps an expected probability of being correct to this scoring.
    #[inline]
    pub fn score(&self, p_correct: f64) -> f64 {
        match self {
            StoppingScoring::Signed => 2.0 * p_correct - 1.0,
            StoppingScoring::Probability => p_correct,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StoppingMdp {
    pub cost: f64,
    pub horizon: usize,
    pub scoring: StoppingScoring,
}

impl StoppingMdp {
    pub const DEFAULT_HORIZON: usize = 30;

    pub fn new(cost: f64, horizon: usize) -> Result<Self> {
        if !(cost >= 0.0 && cost.is_finite()) {
            return Err(MetaError::Config(format!("cost must be finite and non-negative, got {cost}")));
        }
        if horizon == 0 {
            return Err(MetaError::Config("horizon must be positive".into()));
        }
        Ok(StoppingMdp { cost, horizon, scoring: StoppingScoring::Signed })
    }

    pub fn with_cost(cost: f64) -> Result<Self> {
        Self::new(cost, Self::DEFAULT_HORIZON)
    }

    pub fn with_scoring(self, scoring: StoppingScoring) -> Self {
        StoppingMdp { scoring, ..self }
    }

    /// Probability that the modal prediction is correct.
    pub fn p_correct(belief: &StoppingBelief) -> f64 {
        belief.alpha.max(belief.beta) / belief.total()
    }
}

/// `+1·p_correct − 1·(1 − p_correct)`.
pub fn stopping_terminal(belief: &StoppingBelief) -> f64 {
    2.0 * StoppingMdp::p_correct(belief) - 1.0
}

impl MetaMdp for StoppingMdp {
    type Belief = StoppingBelief;

    fn spec(&self) -> MetaMdpSpec {
        MetaMdpSpec { cost: self.cost, horizon: self.horizon, num_computations: 1 }
    }

    fn initial_belief(&self) -> StoppingBelief {
        BetaParams::UNIFORM
    }

    fn num_parameters(&self) -> usize {
        1
    }

    fn termination_utility(&self, belief: &StoppingBelief) -> f64 {
        self.scoring.score(Self::p_correct(belief))
    }

    fn successors(&self, belief: &StoppingBelief, _c: usize) -> Successors<StoppingBelief> {
        let p = belief.mean();
        smallvec![(belief.observe(true), p), (belief.observe(false), 1.0 - p)]
    }

    fn is_informative(&self, _belief: &StoppingBelief, _c: usize) -> bool {
        true
    }

    fn relevance(&self, _c: usize, _i: usize) -> bool {
        true
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn terminal_values() {
        assert_relative_eq!(stopping_terminal(&BetaParams::new(1.0, 1.0)), 0.0);
        assert_relative_eq!(stopping_terminal(&BetaParams::new(2.0, 1.0)), 1.0 / 3.0, epsilon = 1e-15);
        assert_relative_eq!(stopping_terminal(&BetaParams::new(29.0, 1.0)), 14.0 / 15.0, epsilon = 1e-15);
    }

    #[test]
    fn sampling_transition_probabilities() {
        let mdp = StoppingMdp::with_cost(0.01).unwrap();
        let succ = mdp.successors(&BetaParams::new(1.0, 1.0), 0);
        assert_eq!(succ[0], (BetaParams::new(2.0, 1.0), 0.5));
        assert_eq!(succ[1], (BetaParams::new(1.0, 2.0), 0.5));
    }

    #[test]
    fn probability_scoring() {
        let mdp = StoppingMdp::with_cost(0.01).unwrap().with_scoring(StoppingScoring::Probability);
        assert_eq!(mdp.termination_utility(&BetaParams::new(1.0, 1.0)), 0.5);
        assert_relative_eq!(mdp.termination_utility(&BetaParams::new(2.0, 1.0)), 2.0 / 3.0);
        let signed = StoppingMdp::with_cost(0.01).unwrap();
        assert_relative_eq!(signed.termination_utility(&BetaParams::new(2.0, 1.0)), 1.0 / 3.0, epsilon = 1e-15);
    }

    #[test]
    fn rejects_bad_config() {
        assert!(StoppingMdp::new(-0.1, 30).is_err());
        assert!(StoppingMdp::new(0.1, 0).is_err());
    }
}
