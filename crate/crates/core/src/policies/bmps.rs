use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{argmax_or_terminate, forced};
use crate::error::{MetaError, Result};
use crate::features::{FeatureEngine, FeatureVector, VoiFeatures};
use crate::mdp::{BeliefState, MetaAction, Policy};

const SIMPLEX_TOL: f64 = 1e-9;

/// BMPS weights: a convex combination of the three VOI features and a cost
/// multiplier `w4 ∈ [1, h]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightVector {
    pub w1: f64,
    pub w2: f64,
    pub w3: f64,
    pub w4: f64,
}

impl WeightVector {
    pub fn new(w1: f64, w2: f64, w3: f64, w4: f64, horizon: usize) -> Result<Self> {
        let w = WeightVector { w1, w2, w3, w4 };
        w.validate(horizon)?;
        Ok(w)
    }

    /// The meta-greedy weights `(1, 0, 0, 1)`.
    pub const fn myopic() -> Self {
        WeightVector { w1: 1.0, w2: 0.0, w3: 0.0, w4: 1.0 }
    }

    pub fn validate(&self, horizon: usize) -> Result<()> {
        let all = [self.w1, self.w2, self.w3, self.w4];
        if all.iter().any(|w| !w.is_finite()) {
            return Err(MetaError::Constraint(format!("non-finite weight in {self:?}")));
        }
        for (name, w) in [("w1", self.w1), ("w2", self.w2), ("w3", self.w3)] {
            if !(-SIMPLEX_TOL..=1.0 + SIMPLEX_TOL).contains(&w) {
                return Err(MetaError::Constraint(format!("{name} = {w} outside [0, 1]")));
            }
        }
        let sum = self.w1 + self.w2 + self.w3;
        if (sum - 1.0).abs() > SIMPLEX_TOL {
            return Err(MetaError::Constraint(format!("w1 + w2 + w3 = {sum}, expected 1")));
        }
        if self.w4 < 1.0 - SIMPLEX_TOL || self.w4 > horizon as f64 + SIMPLEX_TOL {
            return Err(MetaError::Constraint(format!("w4 = {} outside [1, {horizon}]", self.w4)));
        }
        Ok(())
    }

    /// `w1·VOI₁ + w2·VPI + w3·VPI_sub − w4·cost`.
    #[inline]
    pub fn voc_hat(&self, f: &FeatureVector) -> f64 {
        self.w1 * f.voi1 + self.w2 * f.vpi + self.w3 * f.vpi_sub - self.w4 * f.cost
    }

    pub fn as_array(&self) -> [f64; 4] {
        [self.w1, self.w2, self.w3, self.w4]
    }
}

/// Computes the highest-VOC-hat computation while that estimate is
/// positive.
pub struct BmpsPolicy<M: VoiFeatures> {
    weights: WeightVector,
    engine: Arc<FeatureEngine<M>>,
}

impl<M: VoiFeatures> BmpsPolicy<M> {
    pub fn new(mdp: &M, weights: WeightVector, engine: Arc<FeatureEngine<M>>) -> Result<Self> {
        weights.validate(mdp.spec().horizon)?;
        Ok(BmpsPolicy { weights, engine })
    }

    pub fn weights(&self) -> &WeightVector {
        &self.weights
    }

    /// VOC-hat of every informative computation.
    pub fn scores(&self, mdp: &M, state: &BeliefState<M::Belief>) -> Vec<(usize, f64)> {
        let cost = mdp.spec().cost;
        let f = self.engine.get(mdp, &state.belief);
        (0..f.num_computations())
            .filter(|&c| f.informative[c])
            .map(|c| (c, self.weights.voc_hat(&f.vector(c, cost))))
            .collect()
    }
}

impl<M: VoiFeatures> Policy<M> for BmpsPolicy<M> {
    fn act(&self, mdp: &M, state: &BeliefState<M::Belief>) -> Result<MetaAction> {
        if let Some(a) = forced(mdp, state)? {
            return Ok(a);
        }
        Ok(argmax_or_terminate(self.scores(mdp, state)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domains::{BanditBelief, BanditMdp, BetaParams, StoppingMdp};
    use crate::features::FeatureConfig;
    use crate::mdp::MetaMdp;

    #[test]
    fn weight_constraints() {
        assert!(WeightVector::new(0.2, 0.3, 0.5, 2.0, 30).is_ok());
        assert!(WeightVector::new(0.2, 0.3, 0.6, 2.0, 30).is_err());
        assert!(WeightVector::new(0.5, 0.5, 0.0, 0.5, 30).is_err());
        assert!(WeightVector::new(0.5, 0.5, 0.0, 31.0, 30).is_err());
        assert!(WeightVector::new(-0.1, 0.6, 0.5, 1.0, 30).is_err());
        let err = WeightVector::new(0.2, 0.3, 0.6, 2.0, 30).unwrap_err();
        assert_eq!(err.category(), "constraint");
    }

    #[test]
    fn symmetric_bandit_breaks_ties_low() {
        let mdp = BanditMdp::new(2, 0.01, 25).unwrap();
        let engine = Arc::new(FeatureEngine::new(&mdp, FeatureConfig::default()).unwrap());
        let w = WeightVector::new(0.0, 1.0, 0.0, 1.0, 25).unwrap();
        let p = BmpsPolicy::new(&mdp, w, engine).unwrap();
        let s = BeliefState::new(BanditBelief::uniform(2));
        assert_eq!(p.act(&mdp, &s).unwrap(), MetaAction::Compute(0));
    }

    #[test]
    fn myopic_weights_stop_in_blind_spot() {
        let mdp = StoppingMdp::with_cost(0.02).unwrap();
        let engine = Arc::new(FeatureEngine::new(&mdp, FeatureConfig::default()).unwrap());
        let p = BmpsPolicy::new(&mdp, WeightVector::myopic(), engine).unwrap();
        let s = BeliefState::new(BetaParams::new(2.0, 1.0));
        assert_eq!(p.act(&mdp, &s).unwrap(), MetaAction::Terminate);
        assert_eq!(p.act(&mdp, &mdp.initial_state()).unwrap(), MetaAction::Compute(0));
    }

    #[test]
    fn forced_stop_and_absorbed() {
        let mdp = StoppingMdp::with_cost(0.0).unwrap();
        let engine = Arc::new(FeatureEngine::new(&mdp, FeatureConfig::default()).unwrap());
        let p = BmpsPolicy::new(&mdp, WeightVector::myopic(), engine).unwrap();
        let last = BeliefState::at_step(BetaParams::UNIFORM, 29);
        assert_eq!(p.act(&mdp, &last).unwrap(), MetaAction::Terminate);
        let mut gone = BeliefState::new(BetaParams::UNIFORM);
        gone.absorbed = true;
        assert_eq!(p.act(&mdp, &gone).unwrap_err().category(), "lifecycle");
    }
}
