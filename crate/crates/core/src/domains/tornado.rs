//! Tornado evacuation: k cities, a fixed budget of weather simulations and
//! an evacuate/stay decision per city.

use smallvec::smallvec;

use super::BetaParams;
use crate::error::{MetaError, Result};
use crate::mdp::{MetaMdp, MetaMdpSpec, Successors};

pub const EVACUATION_COST: f64 = -1.0;
pub const FALSE_NEGATIVE_COST: f64 = -20.0;
pub const DAMAGE_PRIOR: BetaParams = BetaParams { alpha: 0.1, beta: 0.9 };

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TornadoBelief {
    pub cities: Vec<BetaParams>,
    pub sims_remaining: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TornadoMdp {
    pub k: usize,
    pub budget: usize,
    pub evacuation_cost: f64,
    pub false_negative_cost: f64,
    pub prior: BetaParams,
}

impl TornadoMdp {
    pub fn new(k: usize, budget: usize) -> Result<Self> {
        if k == 0 {
            return Err(MetaError::Config("tornado scenario needs at least one city".into()));
        }
        Ok(TornadoMdp {
            k,
            budget,
            evacuation_cost: EVACUATION_COST,
            false_negative_cost: FALSE_NEGATIVE_COST,
            prior: DAMAGE_PRIOR,
        })
    }

    /// Expected utility contributed by one city under the optimal decision.
    #[inline]
    pub fn city_utility(&self, city: &BetaParams) -> f64 {
        (city.mean() * self.false_negative_cost).max(self.evacuation_cost)
    }

    /// Evacuate iff evacuating is strictly better; ties stay put.
    #[inline]
    pub fn should_evacuate(&self, city: &BetaParams) -> bool {
        self.evacuation_cost > city.mean() * self.false_negative_cost
    }

    pub fn evacuation_plan(&self, belief: &TornadoBelief) -> Vec<bool> {
        belief.cities.iter().map(|c| self.should_evacuate(c)).collect()
    }

    /// Damage probability above which evacuation is preferred.
    pub fn evacuation_threshold(&self) -> f64 {
        self.evacuation_cost / self.false_negative_cost
    }

    pub fn belief_with_budget(&self, budget: usize) -> TornadoBelief {
        TornadoBelief { cities: vec![self.prior; self.k], sims_remaining: budget }
    }
}

/// `Σ_i max(μ_i · λ_fn, λ_evac)`.
pub fn tornado_terminal(mdp: &TornadoMdp, belief: &TornadoBelief) -> f64 {
    belief.cities.iter().map(|c| mdp.city_utility(c)).sum()
}

impl MetaMdp for TornadoMdp {
    type Belief = TornadoBelief;

    /// Simulations are free; the budget, not a cost, ends deliberation.
    fn spec(&self) -> MetaMdpSpec {
        MetaMdpSpec { cost: 0.0, horizon: self.budget + 1, num_computations: self.k }
    }

    fn initial_belief(&self) -> TornadoBelief {
        self.belief_with_budget(self.budget)
    }

    fn num_parameters(&self) -> usize {
        self.k
    }

    fn termination_utility(&self, belief: &TornadoBelief) -> f64 {
        tornado_terminal(self, belief)
    }

    fn successors(&self, belief: &TornadoBelief, c: usize) -> Successors<TornadoBelief> {
        if belief.sims_remaining == 0 {
            return smallvec![(belief.clone(), 1.0)];
        }
        let city = belief.cities[c];
        let p = city.mean();
        let mut hit = belief.clone();
        hit.cities[c] = city.observe(true);
        hit.sims_remaining -= 1;
        let mut miss = belief.clone();
        miss.cities[c] = city.observe(false);
        miss.sims_remaining -= 1;
        smallvec![(hit, p), (miss, 1.0 - p)]
    }

    fn is_informative(&self, belief: &TornadoBelief, _c: usize) -> bool {
        belief.sims_remaining > 0
    }

    fn relevance(&self, c: usize, i: usize) -> bool {
        c == i
    }
}

/// Time available for deliberation and the cost of its two kinds of work.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TornadoTimingModel {
    /// Hours until decisions are due.
    pub total_time: f64,
    /// Hours per weather simulation.
    pub sim_duration: f64,
    /// Hours spent choosing each simulation.
    pub metareason_duration: f64,
}

/// `n_sim = ⌊T / (t_MR + t_sim)⌋`.
pub fn tornado_budget(timing: &TornadoTimingModel) -> Result<usize> {
    let per_sim = timing.metareason_duration + timing.sim_duration;
    if !(timing.total_time >= 0.0)
        || !(timing.sim_duration >= 0.0)
        || !(timing.metareason_duration >= 0.0)
        || !(per_sim > 0.0)
        || !per_sim.is_finite()
    {
        return Err(MetaError::Config(format!(
            "timing needs T >= 0 and t_MR + t_sim > 0, got T={} t_sim={} t_MR={}",
            timing.total_time, timing.sim_duration, timing.metareason_duration
        )));
    }
    Ok((timing.total_time / per_sim).floor() as usize)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn terminal_examples() {
        let one = TornadoMdp::new(1, 0).unwrap();
        let prior = one.initial_belief();
        assert_relative_eq!(tornado_terminal(&one, &prior), -1.0);
        assert_eq!(one.evacuation_plan(&prior), vec![true]);

        let cleared = TornadoBelief { cities: vec![BetaParams::new(0.1, 2.9)], sims_remaining: 0 };
        assert_relative_eq!(tornado_terminal(&one, &cleared), -2.0 / 3.0, epsilon = 1e-12);
        assert_eq!(one.evacuation_plan(&cleared), vec![false]);

        let two = TornadoMdp::new(2, 0).unwrap();
        assert_relative_eq!(tornado_terminal(&two, &two.initial_belief()), -2.0);
    }

    #[test]
    fn evacuation_tie_stays() {
        let mdp = TornadoMdp::new(1, 0).unwrap();
        // mean exactly 1/20
        let tie = BetaParams::new(1.0, 19.0);
        assert!(!mdp.should_evacuate(&tie));
    }

    #[test]
    fn budget_examples() {
        let b = |t_sim, t_mr| {
            tornado_budget(&TornadoTimingModel { total_time: 24.0, sim_duration: t_sim, metareason_duration: t_mr })
        };
        assert_eq!(b(0.5, 0.0).unwrap(), 48);
        assert_eq!(b(0.5, 0.001).unwrap(), 47);
        assert_eq!(b(16.0, 0.001).unwrap(), 1);
        assert!(b(0.0, 0.0).is_err());
        assert!(b(-1.0, 0.5).is_err());
    }

    #[test]
    fn simulation_consumes_budget() {
        let mdp = TornadoMdp::new(2, 1).unwrap();
        let b = mdp.initial_belief();
        let succ = mdp.successors(&b, 1);
        assert_eq!(succ.len(), 2);
        assert!(succ.iter().all(|(s, _)| s.sims_remaining == 0));
        assert_relative_eq!(succ[0].1, 0.1);
        let spent = &succ[0].0;
        assert!(!mdp.is_informative(spent, 0));
        assert_eq!(mdp.successors(spent, 0).len(), 1);
    }
}
