use std::sync::Arc;

use super::{argmax_or_terminate, check_live, forced};
use crate::domains::{BanditMdp, StoppingMdp, TornadoBelief, TornadoMdp, TreeMdp};
use crate::error::Result;
use crate::features::{FeatureEngine, VoiFeatures};
use crate::mdp::{BeliefState, MetaAction, MetaMdp, Policy};

/// Myopic VOC: `VOI₁(c) − λ`, as if the computation were the last one.
pub struct MetaGreedyPolicy<M: VoiFeatures> {
    engine: Arc<FeatureEngine<M>>,
}

impl<M: VoiFeatures> MetaGreedyPolicy<M> {
    pub fn new(engine: Arc<FeatureEngine<M>>) -> Self {
        MetaGreedyPolicy { engine }
    }
}

impl<M: VoiFeatures> Policy<M> for MetaGreedyPolicy<M> {
    fn act(&self, mdp: &M, state: &BeliefState<M::Belief>) -> Result<MetaAction> {
        if let Some(a) = forced(mdp, state)? {
            return Ok(a);
        }
        let cost = mdp.spec().cost;
        let f = self.engine.get(mdp, &state.belief);
        Ok(argmax_or_terminate(
            (0..f.num_computations()).filter(|&c| f.informative[c]).map(|c| (c, f.voi1[c] - cost)),
        ))
    }
}

/// How often each computation has already been performed at a belief.
pub trait Deliberation: MetaMdp {
    fn times_performed(&self, belief: &Self::Belief, c: usize) -> f64;
}

impl Deliberation for StoppingMdp {
    fn times_performed(&self, _belief: &Self::Belief, _c: usize) -> f64 {
        0.0
    }
}

impl Deliberation for BanditMdp {
    fn times_performed(&self, belief: &Self::Belief, c: usize) -> f64 {
        belief.arms[c].total()
    }
}

impl Deliberation for TreeMdp {
    fn times_performed(&self, belief: &Self::Belief, c: usize) -> f64 {
        if belief.is_revealed(c) {
            1.0
        } else {
            0.0
        }
    }
}

impl Deliberation for TornadoMdp {
    fn times_performed(&self, belief: &Self::Belief, c: usize) -> f64 {
        belief.cities[c].total()
    }
}

/// Deliberates until the horizon forces a stop, spreading computations
/// evenly: the least-performed informative computation, lowest index first.
#[derive(Debug, Clone, Copy, Default)]
pub struct FullDeliberationPolicy;

impl<M: Deliberation> Policy<M> for FullDeliberationPolicy {
    fn act(&self, mdp: &M, state: &BeliefState<M::Belief>) -> Result<MetaAction> {
        if let Some(a) = forced(mdp, state)? {
            return Ok(a);
        }
        let mut best: Option<(usize, f64)> = None;
        for c in 0..mdp.spec().num_computations {
            if !mdp.is_informative(&state.belief, c) {
                continue;
            }
            let n = mdp.times_performed(&state.belief, c);
            if best.is_none_or(|(_, m)| n < m) {
                best = Some((c, n));
            }
        }
        Ok(best.map_or(MetaAction::Terminate, |(c, _)| MetaAction::Compute(c)))
    }
}

/// Round-robin simulation over cities until the budget is spent.
#[derive(Debug, Clone, Copy, Default)]
pub struct UniformAllocationPolicy;

impl UniformAllocationPolicy {
    pub fn city_for(mdp: &TornadoMdp, belief: &TornadoBelief) -> Option<usize> {
        if belief.sims_remaining == 0 {
            return None;
        }
        let done = mdp.budget.saturating_sub(belief.sims_remaining);
        Some(done % mdp.k)
    }
}

impl Policy<TornadoMdp> for UniformAllocationPolicy {
    fn act(&self, mdp: &TornadoMdp, state: &BeliefState<TornadoBelief>) -> Result<MetaAction> {
        if let Some(a) = forced(mdp, state)? {
            return Ok(a);
        }
        Ok(Self::city_for(mdp, &state.belief).map_or(MetaAction::Terminate, MetaAction::Compute))
    }
}

/// Acts on the prior without deliberating.
#[derive(Debug, Clone, Copy, Default)]
pub struct ImmediateTerminatePolicy;

impl<M: MetaMdp> Policy<M> for ImmediateTerminatePolicy {
    fn act(&self, _mdp: &M, state: &BeliefState<M::Belief>) -> Result<MetaAction> {
        check_live(state)?;
        Ok(MetaAction::Terminate)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domains::{BetaParams, TreeBelief};
    use crate::episode::run_episode;
    use crate::features::FeatureConfig;

    #[test]
    fn full_deliberation_uses_the_whole_horizon() {
        let bandit = BanditMdp::new(3, 0.01, 25).unwrap();
        let t = run_episode(&bandit, &bandit.initial_state(), &FullDeliberationPolicy, 1).unwrap();
        assert_eq!(t.num_computations(), 24);
        let stopping = StoppingMdp::with_cost(0.01).unwrap();
        let t = run_episode(&stopping, &stopping.initial_state(), &FullDeliberationPolicy, 1).unwrap();
        assert_eq!(t.num_computations(), 29);
    }

    #[test]
    fn full_deliberation_balances_arms() {
        let bandit = BanditMdp::new(3, 0.01, 25).unwrap();
        let t = run_episode(&bandit, &bandit.initial_state(), &FullDeliberationPolicy, 5).unwrap();
        let order: Vec<MetaAction> = t.actions.iter().take(6).copied().collect();
        let expect: Vec<MetaAction> = [0, 1, 2, 0, 1, 2].into_iter().map(MetaAction::Compute).collect();
        assert_eq!(order, expect);
    }

    #[test]
    fn full_deliberation_stops_on_revealed_tree() {
        let tree = TreeMdp::new(2, 0.1).unwrap();
        let b = TreeBelief::from_probs(2, &[1.0, 0.0, 1.0, 1.0, 0.0, 0.0, 1.0]).unwrap();
        assert_eq!(FullDeliberationPolicy.act(&tree, &BeliefState::new(b)).unwrap(), MetaAction::Terminate);
    }

    #[test]
    fn uniform_allocation_is_round_robin() {
        let mdp = TornadoMdp::new(3, 7).unwrap();
        let t = run_episode(&mdp, &mdp.initial_state(), &UniformAllocationPolicy, 3).unwrap();
        let cities: Vec<MetaAction> = t.actions[..7].to_vec();
        let expect: Vec<MetaAction> = [0, 1, 2, 0, 1, 2, 0].into_iter().map(MetaAction::Compute).collect();
        assert_eq!(cities, expect);
        assert_eq!(t.actions[7], MetaAction::Terminate);
        let none = TornadoMdp::new(3, 0).unwrap();
        assert_eq!(UniformAllocationPolicy.act(&none, &none.initial_state()).unwrap(), MetaAction::Terminate);
    }

    #[test]
    fn meta_greedy_examples() {
        let stopping = StoppingMdp::with_cost(0.02).unwrap();
        let engine = Arc::new(FeatureEngine::new(&stopping, FeatureConfig::default()).unwrap());
        let p = MetaGreedyPolicy::new(engine);
        assert_eq!(p.act(&stopping, &stopping.initial_state()).unwrap(), MetaAction::Compute(0));
        let b = BeliefState::new(BetaParams::new(2.0, 1.0));
        assert_eq!(p.act(&stopping, &b).unwrap(), MetaAction::Terminate);

        let tree = TreeMdp::new(2, 0.25).unwrap();
        let engine = Arc::new(FeatureEngine::new(&tree, FeatureConfig::default()).unwrap());
        let p = MetaGreedyPolicy::new(engine);
        // every non-root node has VOI₁ = 0.5 > 0.25 on the prior; the tie
        // goes to the lowest index
        assert_eq!(p.act(&tree, &tree.initial_state()).unwrap(), MetaAction::Compute(1));
    }

    #[test]
    fn immediate_stop_on_prior() {
        let stopping = StoppingMdp::with_cost(0.02).unwrap();
        let t = run_episode(&stopping, &stopping.initial_state(), &ImmediateTerminatePolicy, 0).unwrap();
        assert_eq!(t.actions, vec![MetaAction::Terminate]);
        assert_eq!(t.return_total, 0.0);
    }
}
