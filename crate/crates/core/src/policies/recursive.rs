//! Recursively blinkered approximation for the metalevel tree.
//!
//! The subproblem of computation `c` keeps only the computations informative
//! about paths through `c`'s node, minus those on the path from the root to
//! `c`; what remains is `c`'s strict descendants, so subproblems shrink
//! strictly along the recursion. Inside a subproblem everything outside
//! `c`'s subtree is frozen, which means its Q-value depends only on the
//! subtree's state and on the best path that avoids `c` (measured relative
//! to the rewards above `c`). That is the memo key.

use parking_lot::RwLock;
use rustc_hash::FxHashMap;

use super::{argmax_or_terminate, forced};
use crate::domains::{tree_terminal, TreeBelief, TreeMdp, TreeTopology};
use crate::error::Result;
use crate::mdp::{BeliefState, MetaAction, Policy};

const NONE: i32 = i32::MIN / 4;

/// The computations kept in `c`'s subproblem.
pub fn recursive_blinkered_subproblem(topology: &TreeTopology, c: usize) -> Vec<usize> {
    topology.descendants(c).collect()
}

type Key = (u8, u128, u128, i32);

pub struct RecursiveBlinkeredPolicy {
    cost: f64,
    height: usize,
    subtree_masks: Vec<u128>,
    capacity: usize,
    memo: RwLock<FxHashMap<Key, f64>>,
}

impl RecursiveBlinkeredPolicy {
    pub const DEFAULT_CAPACITY: usize = 1 << 22;

    pub fn new(mdp: &TreeMdp) -> Self {
        let topo = mdp.topology();
        let subtree_masks = (0..topo.num_nodes())
            .map(|c| std::iter::once(c).chain(topo.descendants(c)).fold(0u128, |m, i| m | 1u128 << i))
            .collect();
        RecursiveBlinkeredPolicy {
            cost: mdp.cost,
            height: mdp.height,
            subtree_masks,
            capacity: Self::DEFAULT_CAPACITY,
            memo: RwLock::new(FxHashMap::default()),
        }
    }

    pub fn memo_len(&self) -> usize {
        self.memo.read().len()
    }

    /// Q-value of computing `c` minus the expected reward above `c`, given
    /// the best avoiding path `o` on the same relative scale.
    fn q_relative(&self, belief: &TreeBelief, c: usize, o: i32) -> f64 {
        let (revealed, positive) = belief.masks();
        let mask = self.subtree_masks[c];
        let key = (c as u8, revealed & mask, positive & mask, o);
        if let Some(&q) = self.memo.read().get(&key) {
            return q;
        }
        let topo = belief.topology();
        let mut total = 0.0;
        let mut down = [0i32; 128];
        let mut above = [0i32; 128];
        let mut avoid = [0i32; 128];
        for outcome in [true, false] {
            let next = belief.reveal(c, outcome);
            next.best_down_values(&mut down);
            let mut best = down[c].max(o) as f64;
            above[c] = 0;
            avoid[c] = o;
            for n in topo.descendants(c) {
                let p = (n - 1) / 2;
                let s = TreeTopology::sibling(n).expect("non-root");
                let through_p = above[p] + next.value(p);
                above[n] = through_p;
                avoid[n] = avoid[p].max(through_p + down[s]);
                if !next.is_revealed(n) {
                    let q = self.q_relative(&next, n, avoid[n] - above[n]) + above[n] as f64;
                    best = best.max(q);
                }
            }
            total += 0.5 * best;
        }
        let q = -self.cost + total;
        let mut memo = self.memo.write();
        if memo.len() >= self.capacity {
            memo.clear();
        }
        memo.insert(key, q);
        q
    }

    /// Recursively blinkered Q-value of every unrevealed node.
    pub fn q_values(&self, belief: &TreeBelief) -> Vec<(usize, f64)> {
        debug_assert_eq!(belief.height(), self.height);
        let k = belief.num_nodes();
        let mut down = [0i32; 128];
        belief.best_down_values(&mut down);
        let mut above = [0i32; 128];
        let mut avoid = [NONE; 128];
        for c in 1..k {
            let p = (c - 1) / 2;
            let s = TreeTopology::sibling(c).expect("non-root");
            above[c] = above[p] + belief.value(p);
            avoid[c] = avoid[p].max(above[c] + down[s]);
        }
        (0..k)
            .filter(|&c| !belief.is_revealed(c))
            .map(|c| {
                let o = if avoid[c] == NONE { NONE } else { avoid[c] - above[c] };
                (c, above[c] as f64 + self.q_relative(belief, c, o))
            })
            .collect()
    }
}

impl Policy<TreeMdp> for RecursiveBlinkeredPolicy {
    fn act(&self, mdp: &TreeMdp, state: &BeliefState<TreeBelief>) -> Result<MetaAction> {
        if let Some(a) = forced(mdp, state)? {
            return Ok(a);
        }
        debug_assert_eq!(mdp.cost, self.cost);
        let current = tree_terminal(&state.belief);
        Ok(argmax_or_terminate(self.q_values(&state.belief).into_iter().map(|(c, q)| (c, q - current))))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::MetaMdp;

    /// Direct transcription of the recursion on full beliefs, no memo and
    /// no relative bookkeeping.
    fn oracle_q(mdp: &TreeMdp, b: &TreeBelief, c: usize) -> f64 {
        let topo = mdp.topology();
        let mut total = 0.0;
        for outcome in [true, false] {
            let next = b.reveal(c, outcome);
            let mut best = tree_terminal(&next);
            for n in topo.descendants(c) {
                if !next.is_revealed(n) {
                    best = best.max(oracle_q(mdp, &next, n));
                }
            }
            total += 0.5 * best;
        }
        -mdp.cost + total
    }

    #[test]
    fn matches_direct_recursion() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        for h in 1..=3 {
            for &cost in &[0.01, 0.1, 0.3] {
                let mdp = TreeMdp::new(h, cost).unwrap();
                let policy = RecursiveBlinkeredPolicy::new(&mdp);
                for _ in 0..20 {
                    let mut b = mdp.initial_belief();
                    for i in 0..b.num_nodes() {
                        match rng.random_range(0..4) {
                            0 => b = b.reveal(i, true),
                            1 => b = b.reveal(i, false),
                            _ => {}
                        }
                    }
                    for (c, q) in policy.q_values(&b) {
                        let want = oracle_q(&mdp, &b, c);
                        assert!((q - want).abs() < 1e-12, "h={h} c={c}: {q} vs {want}");
                    }
                }
            }
        }
    }

    #[test]
    fn subproblems_shrink() {
        let topo = TreeTopology::new(4);
        for c in 0..topo.num_nodes() {
            let outer = recursive_blinkered_subproblem(&topo, c);
            for &n in &outer {
                assert!(recursive_blinkered_subproblem(&topo, n).len() < outer.len());
            }
        }
        assert!(recursive_blinkered_subproblem(&topo, topo.first_leaf()).is_empty());
    }

    #[test]
    fn revealed_tree_terminates() {
        let mdp = TreeMdp::new(2, 0.01).unwrap();
        let b = TreeBelief::from_probs(2, &[1.0, 0.0, 1.0, 1.0, 0.0, 0.0, 1.0]).unwrap();
        let p = RecursiveBlinkeredPolicy::new(&mdp);
        assert_eq!(p.act(&mdp, &BeliefState::new(b)).unwrap(), MetaAction::Terminate);
    }

    #[test]
    fn cheap_computation_is_taken_on_the_prior() {
        let mdp = TreeMdp::new(2, 0.01).unwrap();
        let p = RecursiveBlinkeredPolicy::new(&mdp);
        assert!(matches!(p.act(&mdp, &mdp.initial_state()).unwrap(), MetaAction::Compute(_)));
    }
}
