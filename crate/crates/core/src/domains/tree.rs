//! Bernoulli metalevel tree: planning in a complete binary tree whose node
//! rewards are ±1 and hidden until a computation reveals them.
//!
//! Nodes use level-order indexing: the root is 0 and the children of `i` are
//! `2i+1` and `2i+2`. A tree of height `h` has `2^(h+1) - 1` nodes, the root's
//! reward lies on every path, and terminating follows the root-to-leaf path
//! with the highest expected reward sum.

use smallvec::smallvec;

use crate::error::{MetaError, Result};
use crate::mdp::{MetaMdp, MetaMdpSpec, Successors};

/// Largest supported height (127 nodes fit the bit masks).
pub const MAX_TREE_HEIGHT: usize = 6;

/// Index arithmetic for a complete binary tree of a given height.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TreeTopology {
    pub height: usize,
}

impl TreeTopology {
    pub fn new(height: usize) -> Self {
        TreeTopology { height }
    }

    #[inline]
    pub fn num_nodes(&self) -> usize {
        (1usize << (self.height + 1)) - 1
    }

    #[inline]
    pub fn first_leaf(&self) -> usize {
        (1usize << self.height) - 1
    }

    #[inline]
    pub fn is_leaf(&self, i: usize) -> bool {
        i >= self.first_leaf()
    }

    #[inline]
    pub fn parent(i: usize) -> Option<usize> {
        if i == 0 {
            None
        } else {
            Some((i - 1) / 2)
        }
    }

    #[inline]
    pub fn sibling(i: usize) -> Option<usize> {
        if i == 0 {
            None
        } else if i % 2 == 1 {
            Some(i + 1)
        } else {
            Some(i - 1)
        }
    }

    #[inline]
    pub fn depth(i: usize) -> usize {
        (usize::BITS - 1 - (i + 1).leading_zeros()) as usize
    }

    /// True when `a` is a strict ancestor of `d`.
    pub fn is_ancestor(a: usize, mut d: usize) -> bool {
        while d > a {
            d = (d - 1) / 2;
            if d == a {
                return true;
            }
        }
        false
    }

    /// Strict ancestors of `i`, nearest first.
    pub fn ancestors(i: usize) -> impl Iterator<Item = usize> {
        std::iter::successors(Self::parent(i), |&j| Self::parent(j))
    }

    /// Strict descendants of `i` in level order.
    pub fn descendants(&self, i: usize) -> impl Iterator<Item = usize> {
        let below = self.height - Self::depth(i);
        (1..=below).flat_map(move |r| {
            let start = ((i + 1) << r) - 1;
            start..start + (1 << r)
        })
    }
}

/// Belief over node rewards: each node is unknown (p = 0.5) or revealed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TreeBelief {
    height: u8,
    revealed: u128,
    positive: u128,
}

impl TreeBelief {
    pub fn unknown(height: usize) -> Self {
        TreeBelief { height: height as u8, revealed: 0, positive: 0 }
    }

    /// Builds a belief from per-node probabilities, each exactly 0, 0.5 or 1.
    pub fn from_probs(height: usize, probs: &[f64]) -> Result<Self> {
        if height == 0 || height > MAX_TREE_HEIGHT {
            return Err(MetaError::Config(format!("tree height must be in 1..={MAX_TREE_HEIGHT}")));
        }
        let k = TreeTopology::new(height).num_nodes();
        if probs.len() != k {
            return Err(MetaError::Config(format!("height {height} needs {k} node probabilities, got {}", probs.len())));
        }
        let mut b = TreeBelief::unknown(height);
        for (i, &p) in probs.iter().enumerate() {
            if p == 1.0 {
                b = b.reveal(i, true);
            } else if p == 0.0 {
                b = b.reveal(i, false);
            } else if p != 0.5 {
                return Err(MetaError::Config(format!("node {i} probability {p} is not in {{0, 0.5, 1}}")));
            }
        }
        Ok(b)
    }

    pub fn height(&self) -> usize {
        self.height as usize
    }

    pub fn topology(&self) -> TreeTopology {
        TreeTopology::new(self.height as usize)
    }

    pub fn num_nodes(&self) -> usize {
        self.topology().num_nodes()
    }

    #[inline]
    pub fn is_revealed(&self, i: usize) -> bool {
        self.revealed >> i & 1 == 1
    }

    #[inline]
    pub fn prob(&self, i: usize) -> f64 {
        match self.value(i) {
            1 => 1.0,
            -1 => 0.0,
            _ => 0.5,
        }
    }

    /// Expected node reward `2p - 1`.
    #[inline]
    pub fn value(&self, i: usize) -> i32 {
        if self.revealed >> i & 1 == 0 {
            0
        } else if self.positive >> i & 1 == 1 {
            1
        } else {
            -1
        }
    }

    #[must_use]
    pub fn reveal(&self, i: usize, positive: bool) -> Self {
        let bit = 1u128 << i;
        TreeBelief {
            height: self.height,
            revealed: self.revealed | bit,
            positive: if positive { self.positive | bit } else { self.positive & !bit },
        }
    }

    pub fn probs(&self) -> Vec<f64> {
        (0..self.num_nodes()).map(|i| self.prob(i)).collect()
    }

    pub fn num_revealed(&self) -> usize {
        self.revealed.count_ones() as usize
    }

    pub fn all_revealed(&self) -> bool {
        self.num_revealed() == self.num_nodes()
    }

    /// Raw (revealed, positive) masks.
    pub fn masks(&self) -> (u128, u128) {
        (self.revealed, self.positive)
    }

    /// Best expected path sum from each node down to a leaf.
    pub fn best_down_values(&self, out: &mut [i32]) {
        let topo = self.topology();
        let k = topo.num_nodes();
        let first_leaf = topo.first_leaf();
        for i in (0..k).rev() {
            out[i] = self.value(i)
                + if i >= first_leaf { 0 } else { out[2 * i + 1].max(out[2 * i + 2]) };
        }
    }
}

/// `max over root-to-leaf paths of Σ (2 p_i − 1)`, by max-sum DP.
pub fn tree_terminal(belief: &TreeBelief) -> f64 {
    let mut down = [0i32; 128];
    belief.best_down_values(&mut down);
    down[0] as f64
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TreeMdp {
    pub height: usize,
    pub cost: f64,
}

impl TreeMdp {
    pub fn new(height: usize, cost: f64) -> Result<Self> {
        if height == 0 || height > MAX_TREE_HEIGHT {
            return Err(MetaError::Config(format!("tree height must be in 1..={MAX_TREE_HEIGHT}, got {height}")));
        }
        if !(cost >= 0.0 && cost.is_finite()) {
            return Err(MetaError::Config(format!("cost must be finite and non-negative, got {cost}")));
        }
        Ok(TreeMdp { height, cost })
    }

    pub fn topology(&self) -> TreeTopology {
        TreeTopology::new(self.height)
    }

    pub fn num_nodes(&self) -> usize {
        self.topology().num_nodes()
    }
}

impl MetaMdp for TreeMdp {
    type Belief = TreeBelief;

    /// Every node can be revealed before the forced stop: h = k + 1.
    fn spec(&self) -> MetaMdpSpec {
        let k = self.num_nodes();
        MetaMdpSpec { cost: self.cost, horizon: k + 1, num_computations: k }
    }

    fn initial_belief(&self) -> TreeBelief {
        TreeBelief::unknown(self.height)
    }

    fn num_parameters(&self) -> usize {
        self.num_nodes()
    }

    fn termination_utility(&self, belief: &TreeBelief) -> f64 {
        tree_terminal(belief)
    }

    fn successors(&self, belief: &TreeBelief, c: usize) -> Successors<TreeBelief> {
        if belief.is_revealed(c) {
            smallvec![(*belief, 1.0)]
        } else {
            smallvec![(belief.reveal(c, true), 0.5), (belief.reveal(c, false), 0.5)]
        }
    }

    fn is_informative(&self, belief: &TreeBelief, c: usize) -> bool {
        !belief.is_revealed(c)
    }

    /// `c` informs every node on a path through it.
    fn relevance(&self, c: usize, i: usize) -> bool {
        i == c || TreeTopology::is_ancestor(i, c) || TreeTopology::is_ancestor(c, i)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Exhaustive maximum over the 2^h leaf paths.
    fn brute_force_terminal(b: &TreeBelief) -> i32 {
        let topo = b.topology();
        (topo.first_leaf()..topo.num_nodes())
            .map(|leaf| b.value(leaf) + TreeTopology::ancestors(leaf).map(|a| b.value(a)).sum::<i32>())
            .max()
            .unwrap()
    }

    #[test]
    fn topology_indices() {
        let t = TreeTopology::new(2);
        assert_eq!(t.num_nodes(), 7);
        assert_eq!(t.first_leaf(), 3);
        assert_eq!(TreeTopology::depth(0), 0);
        assert_eq!(TreeTopology::depth(2), 1);
        assert_eq!(TreeTopology::depth(3), 2);
        assert_eq!(TreeTopology::depth(6), 2);
        assert_eq!(t.descendants(1).collect::<Vec<_>>(), vec![3, 4]);
        assert_eq!(t.descendants(0).collect::<Vec<_>>(), vec![1, 2, 3, 4, 5, 6]);
        assert_eq!(TreeTopology::ancestors(5).collect::<Vec<_>>(), vec![2, 0]);
        assert!(TreeTopology::is_ancestor(0, 6));
        assert!(!TreeTopology::is_ancestor(1, 6));
    }

    #[test]
    fn terminal_examples() {
        assert_eq!(tree_terminal(&TreeBelief::unknown(2)), 0.0);
        let leaf_up = TreeBelief::unknown(2).reveal(3, true);
        assert_eq!(tree_terminal(&leaf_up), 1.0);
        let root_down = TreeBelief::unknown(2).reveal(0, false);
        assert_eq!(tree_terminal(&root_down), -1.0);
    }

    #[test]
    fn from_probs_validates() {
        assert!(TreeBelief::from_probs(2, &[0.5; 6]).is_err());
        assert!(TreeBelief::from_probs(2, &[0.5, 0.5, 0.5, 0.3, 0.5, 0.5, 0.5]).is_err());
        let b = TreeBelief::from_probs(2, &[0.5, 1.0, 0.5, 0.0, 0.5, 0.5, 0.5]).unwrap();
        assert_eq!(b.value(1), 1);
        assert_eq!(b.value(3), -1);
        assert_eq!(b.probs()[3], 0.0);
    }

    #[test]
    fn relevance_is_path_closure() {
        let mdp = TreeMdp::new(2, 0.1).unwrap();
        assert!((0..7).all(|i| mdp.relevance(0, i)));
        let rel: Vec<usize> = (0..7).filter(|&i| mdp.relevance(3, i)).collect();
        assert_eq!(rel, vec![0, 1, 3]);
    }

    #[test]
    fn terminal_matches_brute_force_on_random_beliefs() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for h in 1..=MAX_TREE_HEIGHT {
            for _ in 0..200 {
                let k = TreeTopology::new(h).num_nodes();
                let mut b = TreeBelief::unknown(h);
                for i in 0..k {
                    match rng.random_range(0..3) {
                        0 => b = b.reveal(i, true),
                        1 => b = b.reveal(i, false),
                        _ => {}
                    }
                }
                assert_eq!(tree_terminal(&b) as i32, brute_force_terminal(&b));
            }
        }
    }
}
