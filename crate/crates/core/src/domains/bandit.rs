//! Bernoulli metalevel probability model: choose one of k arms after
//! simulating pulls that carry information but no reward.

use smallvec::{smallvec, SmallVec};

use super::BetaParams;
use crate::error::{MetaError, Result};
use crate::mdp::{MetaMdp, MetaMdpSpec, Successors};

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BanditBelief {
    pub arms: SmallVec<[BetaParams; 6]>,
}

impl BanditBelief {
    pub fn uniform(k: usize) -> Self {
        BanditBelief { arms: smallvec![BetaParams::UNIFORM; k] }
    }

    pub fn from_pairs(pairs: &[(f64, f64)]) -> Result<Self> {
        let arms: SmallVec<[BetaParams; 6]> = pairs.iter().map(|&(a, b)| BetaParams::new(a, b)).collect();
        if arms.is_empty() || arms.iter().any(|a| !a.is_valid()) {
            return Err(MetaError::Config("bandit arms need positive Beta parameters".into()));
        }
        Ok(BanditBelief { arms })
    }

    pub fn k(&self) -> usize {
        self.arms.len()
    }

    pub fn means(&self) -> impl Iterator<Item = f64> + '_ {
        self.arms.iter().map(BetaParams::mean)
    }

    /// Highest posterior mean among arms other than `i` (-∞ for k = 1).
    pub fn best_other_mean(&self, i: usize) -> f64 {
        self.arms
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != i)
            .map(|(_, a)| a.mean())
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// `max_i α_i / (α_i + β_i)`.
pub fn bandit_terminal(belief: &BanditBelief) -> f64 {
    belief.means().fold(f64::NEG_INFINITY, f64::max)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BanditMdp {
    pub k: usize,
    pub cost: f64,
    pub horizon: usize,
}

impl BanditMdp {
    pub const DEFAULT_HORIZON: usize = 25;

    pub fn new(k: usize, cost: f64, horizon: usize) -> Result<Self> {
        if k == 0 || k > 6 {
            return Err(MetaError::Config(format!("bandit supports 1..=6 arms, got {k}")));
        }
        if !(cost >= 0.0 && cost.is_finite()) {
            return Err(MetaError::Config(format!("cost must be finite and non-negative, got {cost}")));
        }
        if horizon == 0 {
            return Err(MetaError::Config("horizon must be positive".into()));
        }
        Ok(BanditMdp { k, cost, horizon })
    }
}

impl MetaMdp for BanditMdp {
    type Belief = BanditBelief;

    fn spec(&self) -> MetaMdpSpec {
        MetaMdpSpec { cost: self.cost, horizon: self.horizon, num_computations: self.k }
    }

    fn initial_belief(&self) -> BanditBelief {
        BanditBelief::uniform(self.k)
    }

    fn num_parameters(&self) -> usize {
        self.k
    }

    fn termination_utility(&self, belief: &BanditBelief) -> f64 {
        bandit_terminal(belief)
    }

    fn successors(&self, belief: &BanditBelief, c: usize) -> Successors<BanditBelief> {
        let arm = belief.arms[c];
        let p = arm.mean();
        let mut up = belief.clone();
        up.arms[c] = arm.observe(true);
        let mut down = belief.clone();
        down.arms[c] = arm.observe(false);
        smallvec![(up, p), (down, 1.0 - p)]
    }

    fn is_informative(&self, _belief: &BanditBelief, _c: usize) -> bool {
        true
    }

    fn relevance(&self, c: usize, i: usize) -> bool {
        c == i
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn terminal_is_max_mean() {
        let b = BanditBelief::from_pairs(&[(3.0, 1.0), (1.0, 2.0)]).unwrap();
        assert_eq!(bandit_terminal(&b), 0.75);
        assert_eq!(bandit_terminal(&BanditBelief::uniform(5)), 0.5);
    }

    #[test]
    fn successors_follow_predictive() {
        let mdp = BanditMdp::new(2, 0.01, 25).unwrap();
        let b = BanditBelief::from_pairs(&[(3.0, 1.0), (1.0, 1.0)]).unwrap();
        let succ = mdp.successors(&b, 0);
        assert_eq!(succ[0].0, BanditBelief::from_pairs(&[(4.0, 1.0), (1.0, 1.0)]).unwrap());
        assert_eq!(succ[0].1, 0.75);
        assert_eq!(succ[1].0, BanditBelief::from_pairs(&[(3.0, 2.0), (1.0, 1.0)]).unwrap());
        assert_eq!(succ[1].1, 0.25);
    }

    #[test]
    fn relevance_is_identity() {
        let mdp = BanditMdp::new(3, 0.01, 25).unwrap();
        assert!(mdp.relevance(2, 2));
        assert!(!mdp.relevance(2, 1));
    }
}
