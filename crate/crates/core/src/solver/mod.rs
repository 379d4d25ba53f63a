//! Exact backward induction over the forward-reachable belief lattice.
//!
//! Beliefs are grouped into layers by metalevel step. Within a layer every
//! belief is expanded (and later valued) independently, so layers are
//! processed data-parallel while the layer order stays sequential; results
//! do not depend on the schedule.

mod regression;

use std::io::{BufRead, Write};
use std::sync::Arc;

use rustc_hash::{FxHashMap, FxHashSet};
use smallvec::SmallVec;

use crate::domains::{BanditMdp, StoppingMdp, TreeMdp};
use crate::error::{MetaError, Result};
use crate::mdp::{BeliefState, MetaAction, MetaMdp, Policy};
use crate::par;
use crate::policies::argmax_or_terminate;

pub use regression::{fit_voc_regression, least_squares, voc_regression_points, RegressionPoint, VocRegression};

/// Domain hooks for exact solution.
pub trait Solvable: MetaMdp {
    /// Key identifying a belief up to symmetries that preserve values.
    /// `None` when the belief cannot be keyed (it is then never covered).
    fn solver_key(&self, belief: &Self::Belief) -> Option<u128>;

    /// Computations that can be strictly better than every alternative.
    /// Dropped ones never win the strict argmax, so values are unaffected.
    fn solver_computations(&self, belief: &Self::Belief) -> SmallVec<[usize; 16]> {
        (0..self.spec().num_computations).filter(|&c| self.is_informative(belief, c)).collect()
    }
}

fn integer_param(x: f64) -> Option<u128> {
    ((0.0..256.0).contains(&x) && x.fract() == 0.0).then_some(x as u128)
}

impl Solvable for StoppingMdp {
    fn solver_key(&self, b: &Self::Belief) -> Option<u128> {
        Some((b.alpha.to_bits() as u128) << 64 | b.beta.to_bits() as u128)
    }
}

impl Solvable for BanditMdp {
    /// Arms are interchangeable for the value, so the key is the sorted
    /// multiset of arm parameters.
    fn solver_key(&self, b: &Self::Belief) -> Option<u128> {
        let mut arms: SmallVec<[u128; 6]> = SmallVec::new();
        for a in &b.arms {
            arms.push(integer_param(a.alpha)? << 8 | integer_param(a.beta)?);
        }
        arms.sort_unstable();
        Some(arms.iter().fold(0u128, |k, &a| k << 16 | a))
    }
}

impl Solvable for TreeMdp {
    fn solver_key(&self, b: &Self::Belief) -> Option<u128> {
        if b.num_nodes() > 64 {
            return None;
        }
        let (revealed, positive) = b.masks();
        Some(revealed | positive << 64)
    }

    /// Revealing the root shifts every path equally, so its Q-value is
    /// `V(b) − λ`; it can never beat terminating or another computation.
    fn solver_computations(&self, b: &Self::Belief) -> SmallVec<[usize; 16]> {
        (1..b.num_nodes()).filter(|&c| !b.is_revealed(c)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    /// Upper bound on the number of (belief, step) states.
    pub state_cap: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig { state_cap: 20_000_000 }
    }
}

/// Optimal values `V*(b, t)` for every reachable belief and step.
#[derive(Debug, Clone)]
pub struct ValueTable {
    pub cost: f64,
    pub horizon: usize,
    layers: Vec<FxHashMap<u128, f64>>,
}

fn key_of<M: Solvable>(mdp: &M, b: &M::Belief) -> Result<u128> {
    mdp.solver_key(b).ok_or_else(|| MetaError::Config(format!("belief {b:?} cannot be keyed for exact solution")))
}

/// Beliefs reachable from the initial belief through solver computations,
/// one layer per step, deduplicated by solver key.
pub fn reachable_layers<M: Solvable>(mdp: &M, config: &SolverConfig) -> Result<Vec<Vec<M::Belief>>> {
    let h = mdp.spec().horizon;
    let b0 = mdp.initial_belief();
    key_of(mdp, &b0)?;
    let mut layers: Vec<Vec<M::Belief>> = vec![vec![b0]];
    let mut total = 1usize;
    for _ in 0..h.saturating_sub(1) {
        let current = layers.last().expect("non-empty");
        let expanded: Vec<Vec<(u128, M::Belief)>> = par::map_slice(current, |b| {
            mdp.solver_computations(b)
                .into_iter()
                .flat_map(|c| mdp.successors(b, c))
                .map(|(s, _)| (mdp.solver_key(&s), s))
                .filter_map(|(k, s)| k.map(|k| (k, s)))
                .collect()
        });
        let mut seen = FxHashSet::default();
        let mut next = Vec::new();
        for (k, s) in expanded.into_iter().flatten() {
            if seen.insert(k) {
                next.push(s);
            }
        }
        total += next.len();
        if total > config.state_cap {
            return Err(MetaError::ResourceLimit { cap: config.state_cap });
        }
        if next.is_empty() {
            break;
        }
        layers.push(next);
    }
    Ok(layers)
}

/// Solves for optimal values over the reachable lattice by backward
/// induction.
pub fn backward_induction<M: Solvable>(mdp: &M, config: &SolverConfig) -> Result<ValueTable> {
    let layers = reachable_layers(mdp, config)?;
    solve_layers(mdp, &layers)
}

/// Backward induction over precomputed reachable layers.
pub fn solve_layers<M: Solvable>(mdp: &M, layers: &[Vec<M::Belief>]) -> Result<ValueTable> {
    let spec = mdp.spec();
    let h = spec.horizon;
    let mut values: Vec<FxHashMap<u128, f64>> = vec![FxHashMap::default(); layers.len()];
    for t in (0..layers.len()).rev() {
        let forced = t + 1 >= h;
        let later = values.get(t + 1);
        let layer_values: Vec<Result<(u128, f64)>> = par::map_slice(&layers[t], |b| {
            let key = key_of(mdp, b)?;
            let stop = mdp.termination_utility(b);
            if forced {
                return Ok((key, stop));
            }
            let mut best = stop;
            for c in mdp.solver_computations(b) {
                let q = q_from(mdp, b, c, spec.cost, later)?;
                best = best.max(q);
            }
            Ok((key, best))
        });
        let mut map = FxHashMap::default();
        map.reserve(layer_values.len());
        for r in layer_values {
            let (k, v) = r?;
            map.insert(k, v);
        }
        values[t] = map;
    }
    Ok(ValueTable { cost: spec.cost, horizon: h, layers: values })
}

fn q_from<M: Solvable>(
    mdp: &M,
    belief: &M::Belief,
    c: usize,
    cost: f64,
    next: Option<&FxHashMap<u128, f64>>,
) -> Result<f64> {
    let mut q = -cost;
    for (s, p) in mdp.successors(belief, c) {
        let key = mdp.solver_key(&s);
        let v = key
            .and_then(|k| next.and_then(|m| m.get(&k)))
            .ok_or_else(|| MetaError::Coverage(format!("successor {s:?} not in value table")))?;
        q += p * v;
    }
    Ok(q)
}

impl ValueTable {
    pub fn num_states(&self) -> usize {
        self.layers.iter().map(|l| l.len()).sum()
    }

    pub fn num_layers(&self) -> usize {
        self.layers.len()
    }

    pub fn layer_keys(&self, step: usize) -> impl Iterator<Item = u128> + '_ {
        self.layers.get(step).into_iter().flat_map(|l| l.keys().copied())
    }

    fn lookup(&self, key: Option<u128>, step: usize) -> Option<f64> {
        key.and_then(|k| self.layers.get(step)?.get(&k).copied())
    }

    /// `V*(b, step)`.
    pub fn value<M: Solvable>(&self, mdp: &M, belief: &M::Belief, step: usize) -> Result<f64> {
        self.lookup(mdp.solver_key(belief), step)
            .ok_or_else(|| MetaError::Coverage(format!("{belief:?} at step {step}")))
    }

    /// `Q*(b, c)` at `step`.
    pub fn q_value<M: Solvable>(&self, mdp: &M, belief: &M::Belief, step: usize, c: usize) -> Result<f64> {
        if step + 1 >= self.horizon {
            return Err(MetaError::Lifecycle("only termination is available at the last step"));
        }
        self.value(mdp, belief, step)?;
        q_from(mdp, belief, c, self.cost, self.layers.get(step + 1))
    }

    /// `VOC(c, b) = Q*(b, c) − U(b)`; zero for termination.
    pub fn exact_voc<M: Solvable>(&self, mdp: &M, belief: &M::Belief, step: usize, action: MetaAction) -> Result<f64> {
        match action {
            MetaAction::Terminate => {
                self.value(mdp, belief, step)?;
                Ok(0.0)
            }
            MetaAction::Compute(c) => {
                let count = mdp.spec().num_computations;
                if c >= count {
                    return Err(MetaError::InvalidAction { index: c, count });
                }
                Ok(self.q_value(mdp, belief, step, c)? - mdp.termination_utility(belief))
            }
        }
    }

    /// Optimal action; computes only when some VOC is strictly positive.
    pub fn optimal_action<M: Solvable>(&self, mdp: &M, belief: &M::Belief, step: usize) -> Result<MetaAction> {
        self.value(mdp, belief, step)?;
        if step + 1 >= self.horizon {
            return Ok(MetaAction::Terminate);
        }
        let stop = mdp.termination_utility(belief);
        let next = self.layers.get(step + 1);
        let mut scores = Vec::new();
        for c in mdp.solver_computations(belief) {
            scores.push((c, q_from(mdp, belief, c, self.cost, next)? - stop));
        }
        Ok(argmax_or_terminate(scores))
    }

    /// CSV dump: a versioned header line, then `step,key,value` rows with
    /// hex keys, sorted for reproducible output.
    pub fn write_csv<W: Write>(&self, mut w: W, spec_hash: &str) -> std::io::Result<()> {
        writeln!(w, "# metalevel-value-table v1 spec_hash={spec_hash} cost={} horizon={}", self.cost, self.horizon)?;
        writeln!(w, "step,key,value")?;
        for (t, layer) in self.layers.iter().enumerate() {
            let mut rows: Vec<(u128, f64)> = layer.iter().map(|(&k, &v)| (k, v)).collect();
            rows.sort_unstable_by_key(|r| r.0);
            for (k, v) in rows {
                writeln!(w, "{t},{k:x},{v:e}")?;
            }
        }
        Ok(())
    }

    /// Reads a dump written by [`ValueTable::write_csv`], checking the hash.
    pub fn read_csv<R: BufRead>(r: R, expected_hash: &str) -> Result<ValueTable> {
        let bad = |msg: &str| MetaError::Config(format!("value table dump: {msg}"));
        let mut lines = r.lines();
        let header = lines.next().ok_or_else(|| bad("empty file"))?.map_err(|e| bad(&e.to_string()))?;
        let mut fields = FxHashMap::default();
        let rest = header.strip_prefix("# metalevel-value-table v1 ").ok_or_else(|| bad("unknown header"))?;
        for part in rest.split_whitespace() {
            if let Some((k, v)) = part.split_once('=') {
                fields.insert(k.to_string(), v.to_string());
            }
        }
        if fields.get("spec_hash").map(String::as_str) != Some(expected_hash) {
            return Err(bad("spec hash mismatch"));
        }
        let cost: f64 = fields.get("cost").and_then(|v| v.parse().ok()).ok_or_else(|| bad("missing cost"))?;
        let horizon: usize = fields.get("horizon").and_then(|v| v.parse().ok()).ok_or_else(|| bad("missing horizon"))?;
        let mut layers: Vec<FxHashMap<u128, f64>> = Vec::new();
        for line in lines.skip(1) {
            let line = line.map_err(|e| bad(&e.to_string()))?;
            let mut it = line.split(',');
            let (Some(t), Some(k), Some(v)) = (it.next(), it.next(), it.next()) else {
                return Err(bad("short row"));
            };
            let t: usize = t.parse().map_err(|_| bad("step"))?;
            let k = u128::from_str_radix(k, 16).map_err(|_| bad("key"))?;
            let v: f64 = v.parse().map_err(|_| bad("value"))?;
            if layers.len() <= t {
                layers.resize_with(t + 1, FxHashMap::default);
            }
            layers[t].insert(k, v);
        }
        Ok(ValueTable { cost, horizon, layers })
    }
}

/// Acts optimally by one-step lookahead on a solved value table.
#[derive(Debug, Clone)]
pub struct OptimalPolicy {
    table: Arc<ValueTable>,
}

impl OptimalPolicy {
    pub fn new(table: Arc<ValueTable>) -> Self {
        OptimalPolicy { table }
    }

    pub fn table(&self) -> &ValueTable {
        &self.table
    }
}

impl<M: Solvable> Policy<M> for OptimalPolicy {
    fn act(&self, mdp: &M, state: &BeliefState<M::Belief>) -> Result<MetaAction> {
        crate::policies::check_live(state)?;
        self.table.optimal_action(mdp, &state.belief, state.step)
    }
}
