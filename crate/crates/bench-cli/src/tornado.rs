//! Tornado timing sweep: BMPS pays `t_MR` per simulation it chooses, the
//! uniform schedule pays nothing, and both share the deadline `T`.

use std::sync::Arc;
use std::time::Instant;

use metalevel::domains::{tornado_budget, TornadoMdp, TornadoTimingModel};
use metalevel::episode::{episode_rng, evaluate_policy, paired_difference, EvalReport, PairedDiff};
use metalevel::features::{FeatureConfig, FeatureEngine};
use metalevel::mdp::sample_transition;
use metalevel::policies::{BmpsPolicy, UniformAllocationPolicy, WeightVector};
use metalevel::{MetaMdp, Policy};
use serde::{Deserialize, Serialize};

use crate::config::TornadoConfig;
use crate::error::Result;
use crate::output::ResultRow;

pub const TIMED_CALLS: usize = 100;
const WARMUP_CALLS: usize = 10;

/// Reuses weights trained on another cell: the tornado charges no cost per
/// simulation, so `w4` only has to respect the new horizon.
pub fn adapt_weights(w: WeightVector, horizon: usize) -> Result<WeightVector> {
    Ok(WeightVector::new(w.w1, w.w2, w.w3, w.w4.min(horizon as f64).max(1.0), horizon)?)
}

/// Median wall-clock hours of one BMPS decision. Calls are made on beliefs
/// visited by the policy itself; the feature cache is cleared before each
/// timed call so every decision recomputes its features.
pub fn measure_t_mr(mdp: &TornadoMdp, weights: WeightVector, seed: u64) -> Result<f64> {
    let engine = Arc::new(FeatureEngine::new(mdp, FeatureConfig::default())?);
    let policy = BmpsPolicy::new(mdp, adapt_weights(weights, mdp.spec().horizon)?, Arc::clone(&engine))?;
    let horizon = mdp.spec().horizon;
    let mut rng = episode_rng(seed);
    let mut states = Vec::with_capacity(WARMUP_CALLS + TIMED_CALLS);
    let mut state = mdp.initial_state();
    while states.len() < WARMUP_CALLS + TIMED_CALLS {
        if state.must_terminate(horizon) {
            state = mdp.initial_state();
            continue;
        }
        let action = policy.act(mdp, &state)?;
        states.push(state.clone());
        if action.is_terminate() {
            state = mdp.initial_state();
        } else {
            state = sample_transition(mdp, &state, action, &mut rng)?.0;
        }
    }
    for s in &states[..WARMUP_CALLS] {
        engine.clear();
        policy.act(mdp, s)?;
    }
    let mut secs: Vec<f64> = states[WARMUP_CALLS..]
        .iter()
        .map(|s| {
            engine.clear();
            let t = Instant::now();
            let a = policy.act(mdp, s);
            let dt = t.elapsed().as_secs_f64();
            a.map(|_| dt)
        })
        .collect::<metalevel::Result<_>>()?;
    secs.sort_by(f64::total_cmp);
    let mid = secs.len() / 2;
    let median = if secs.len().is_multiple_of(2) { 0.5 * (secs[mid - 1] + secs[mid]) } else { secs[mid] };
    Ok(median / 3600.0)
}

#[derive(Debug, Clone)]
pub struct TornadoCell {
    pub k: usize,
    pub t_sim: f64,
    pub t_mr: f64,
    pub n_sim_bmps: usize,
    pub n_sim_uniform: usize,
    pub bmps: EvalReport,
    pub uniform: EvalReport,
    /// `bmps − uniform` over common seeds.
    pub advantage: PairedDiff,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BudgetRow {
    pub k: usize,
    pub t_sim: f64,
    pub t_mr: f64,
    pub n_sim_bmps: usize,
    pub n_sim_uniform: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdvantageRow {
    pub k: usize,
    pub t_sim: f64,
    pub t_mr: f64,
    pub mean_diff: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub n: usize,
    pub config_hash: String,
}

impl TornadoCell {
    pub fn budget_row(&self) -> BudgetRow {
        BudgetRow {
            k: self.k,
            t_sim: self.t_sim,
            t_mr: self.t_mr,
            n_sim_bmps: self.n_sim_bmps,
            n_sim_uniform: self.n_sim_uniform,
        }
    }

    pub fn advantage_row(&self, hash: &str) -> AdvantageRow {
        AdvantageRow {
            k: self.k,
            t_sim: self.t_sim,
            t_mr: self.t_mr,
            mean_diff: self.advantage.mean,
            ci_lo: self.advantage.ci_lo,
            ci_hi: self.advantage.ci_hi,
            n: self.advantage.n,
            config_hash: hash.into(),
        }
    }

    /// Result rows; the cost column carries `t_sim`.
    pub fn result_rows(&self, hash: &str) -> [ResultRow; 2] {
        [
            ResultRow::from_report("tornado", self.k, self.t_sim, "bmps", &self.bmps, hash),
            ResultRow::from_report("tornado", self.k, self.t_sim, "uniform", &self.uniform, hash),
        ]
    }
}

/// One (k, t_sim) cell with a given metareasoning time.
pub fn run_cell(
    k: usize,
    t_sim: f64,
    t_mr: f64,
    total_time: f64,
    weights: WeightVector,
    rollouts: usize,
    seed: u64,
) -> Result<TornadoCell> {
    let timing = |t_mr| TornadoTimingModel { total_time, sim_duration: t_sim, metareason_duration: t_mr };
    let n_sim_bmps = tornado_budget(&timing(t_mr))?;
    let n_sim_uniform = tornado_budget(&timing(0.0))?;
    let with_mr = TornadoMdp::new(k, n_sim_bmps)?;
    let without_mr = TornadoMdp::new(k, n_sim_uniform)?;
    let engine = Arc::new(FeatureEngine::new(&with_mr, FeatureConfig::default())?);
    let policy = BmpsPolicy::new(&with_mr, adapt_weights(weights, with_mr.spec().horizon)?, engine)?;
    let bmps = evaluate_policy(&with_mr, &with_mr.initial_state(), &policy, rollouts, seed)?;
    let uniform = evaluate_policy(&without_mr, &without_mr.initial_state(), &UniformAllocationPolicy, rollouts, seed)?;
    let advantage = paired_difference(&bmps, &uniform)?;
    Ok(TornadoCell { k, t_sim, t_mr, n_sim_bmps, n_sim_uniform, bmps, uniform, advantage })
}

/// The full sweep. `t_mr` per city count: pinned in the config or measured.
pub fn run_sweep(
    sizes: &[usize],
    config: &TornadoConfig,
    weights: WeightVector,
    seed: u64,
) -> Result<(Vec<(usize, f64)>, Vec<TornadoCell>)> {
    let mut t_mrs = Vec::new();
    let mut cells = Vec::new();
    for &k in sizes {
        let t_mr = match config.t_mr {
            Some(t) => t,
            None => measure_t_mr(&TornadoMdp::new(k, config.train_budget)?, weights, seed)?,
        };
        t_mrs.push((k, t_mr));
        for &t_sim in &config.t_sim {
            cells.push(run_cell(k, t_sim, t_mr, config.total_time, weights, config.rollouts, seed)?);
        }
    }
    Ok((t_mrs, cells))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn weights() -> WeightVector {
        WeightVector::new(0.0, 0.5, 0.5, 1.0, 51).unwrap()
    }

    #[test]
    fn budgets_follow_the_timing_model() {
        let c = run_cell(10, 0.25, 0.001, 24.0, weights(), 50, 0).unwrap();
        assert_eq!(c.n_sim_uniform, 96);
        assert_eq!(c.n_sim_bmps, 95);
        let c = run_cell(10, 16.0, 0.0, 24.0, weights(), 50, 0).unwrap();
        assert_eq!((c.n_sim_bmps, c.n_sim_uniform), (1, 1));
    }

    #[test]
    fn equal_budgets_favour_adaptive_allocation() {
        let c = run_cell(10, 1.0, 0.0, 24.0, weights(), 2000, 3).unwrap();
        assert!(c.advantage.ci_hi >= 0.0, "{:?}", c.advantage);
    }

    #[test]
    fn measured_decision_time_is_small_and_positive() {
        let t = measure_t_mr(&TornadoMdp::new(10, 20).unwrap(), weights(), 0).unwrap();
        assert!(t > 0.0 && t < 0.001, "{t} h");
    }

    #[test]
    fn weights_adapt_to_short_horizons() {
        let w = WeightVector::new(0.2, 0.3, 0.5, 40.0, 51).unwrap();
        assert_eq!(adapt_weights(w, 2).unwrap().w4, 2.0);
        assert_eq!(adapt_weights(w, 51).unwrap(), w);
    }
}
