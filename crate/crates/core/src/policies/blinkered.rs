use super::{argmax_or_terminate, forced};
use crate::domains::{bandit_terminal, BanditBelief, BanditMdp, BetaParams};
use crate::error::Result;
use crate::mdp::{BeliefState, MetaAction, Policy};

/// Blinkered approximation for the bandit: each arm is evaluated in a
/// one-arm subproblem where only that arm can be sampled and the best other
/// arm is a fixed fallback.
#[derive(Debug, Clone, Copy, Default)]
pub struct BlinkeredPolicy;

impl BlinkeredPolicy {
    /// Q-value of sampling `arm` once and continuing optimally in the
    /// one-arm subproblem with `budget` computations left (this one included).
    pub fn subproblem_q(arm: BetaParams, fallback: f64, budget: usize, cost: f64) -> f64 {
        assert!(budget >= 1);
        // values[s] at depth d: arm has seen s successes and d - s failures.
        let terminal = |s: usize, d: usize| {
            BetaParams::new(arm.alpha + s as f64, arm.beta + (d - s) as f64).mean().max(fallback)
        };
        let mut values: Vec<f64> = (0..=budget).map(|s| terminal(s, budget)).collect();
        for d in (1..budget).rev() {
            for s in 0..=d {
                let a = BetaParams::new(arm.alpha + s as f64, arm.beta + (d - s) as f64);
                let p = a.mean();
                let cont = -cost + p * values[s + 1] + (1.0 - p) * values[s];
                values[s] = terminal(s, d).max(cont);
            }
        }
        let p = arm.mean();
        -cost + p * values[1] + (1.0 - p) * values[0]
    }

    /// Blinkered VOC of every arm.
    pub fn vocs(mdp: &BanditMdp, state: &BeliefState<BanditBelief>) -> Vec<(usize, f64)> {
        let budget = state.computations_left(mdp.horizon);
        let current = bandit_terminal(&state.belief);
        (0..state.belief.k())
            .map(|i| {
                let q = Self::subproblem_q(state.belief.arms[i], state.belief.best_other_mean(i), budget, mdp.cost);
                (i, q - current)
            })
            .collect()
    }
}

impl Policy<BanditMdp> for BlinkeredPolicy {
    fn act(&self, mdp: &BanditMdp, state: &BeliefState<BanditBelief>) -> Result<MetaAction> {
        if let Some(a) = forced(mdp, state)? {
            return Ok(a);
        }
        debug_assert_eq!(mdp.k, state.belief.k());
        Ok(argmax_or_terminate(Self::vocs(mdp, state)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::MetaMdp;
    use rustc_hash::FxHashMap;

    /// Plain recursive oracle for the one-arm subproblem.
    fn oracle_v(arm: BetaParams, m: f64, left: usize, cost: f64, memo: &mut FxHashMap<(u64, u64, usize), f64>) -> f64 {
        let key = (arm.alpha.to_bits(), arm.beta.to_bits(), left);
        if let Some(&v) = memo.get(&key) {
            return v;
        }
        let stop = arm.mean().max(m);
        let v = if left == 0 {
            stop
        } else {
            let p = arm.mean();
            let cont = -cost
                + p * oracle_v(arm.observe(true), m, left - 1, cost, memo)
                + (1.0 - p) * oracle_v(arm.observe(false), m, left - 1, cost, memo);
            stop.max(cont)
        };
        memo.insert(key, v);
        v
    }

    #[test]
    fn subproblem_matches_recursive_oracle() {
        for &(a, b, m, left, cost) in &[(1.0, 1.0, 0.5, 10, 0.01), (3.0, 2.0, 0.7, 24, 0.001), (2.0, 6.0, 0.2, 5, 0.05)] {
            let arm = BetaParams::new(a, b);
            let mut memo = FxHashMap::default();
            let p = arm.mean();
            let q = -cost
                + p * oracle_v(arm.observe(true), m, left - 1, cost, &mut memo)
                + (1.0 - p) * oracle_v(arm.observe(false), m, left - 1, cost, &mut memo);
            let got = BlinkeredPolicy::subproblem_q(arm, m, left, cost);
            assert!((got - q).abs() < 1e-14, "{got} vs {q}");
        }
    }

    #[test]
    fn symmetric_arms_tie_low() {
        let mdp = BanditMdp::new(2, 0.001, 25).unwrap();
        assert_eq!(BlinkeredPolicy.act(&mdp, &mdp.initial_state()).unwrap(), MetaAction::Compute(0));
    }

    #[test]
    fn confident_arms_short_horizon_terminate() {
        let mdp = BanditMdp::new(2, 0.05, 3).unwrap();
        let b = BanditBelief::from_pairs(&[(5.0, 1.0), (1.0, 5.0)]).unwrap();
        assert_eq!(BlinkeredPolicy.act(&mdp, &BeliefState::new(b)).unwrap(), MetaAction::Terminate);
    }
}
