//! Exact tree features. Node rewards are ±1 so every path sum is an integer
//! in `[-(h+1), h+1]`; distributions over best-path values are carried as
//! small probability vectors, and the maximum of independent subtrees is the
//! product of their CDFs.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{BeliefFeatures, FeatureConfig, VoiFeatures};
use crate::domains::{TreeBelief, TreeMdp, TreeTopology, MAX_TREE_HEIGHT};

const OFFSET: i32 = MAX_TREE_HEIGHT as i32 + 1;
const SUPPORT: usize = 2 * OFFSET as usize + 1;
const NONE: i32 = i32::MIN / 4;

/// Distribution of an integer path value in `[-OFFSET, OFFSET]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathPmf(pub [f64; SUPPORT]);

impl PathPmf {
    pub fn point(v: i32) -> Self {
        let mut p = [0.0; SUPPORT];
        p[(v + OFFSET) as usize] = 1.0;
        PathPmf(p)
    }

    pub fn mean(&self) -> f64 {
        self.0.iter().enumerate().map(|(i, p)| p * (i as i32 - OFFSET) as f64).sum()
    }

    pub fn prob(&self, v: i32) -> f64 {
        self.0.get((v + OFFSET) as usize).copied().unwrap_or(0.0)
    }

    /// Distribution of `max(X, Y)` for independent X and Y.
    fn max_independent(&self, other: &PathPmf) -> PathPmf {
        let mut out = [0.0; SUPPORT];
        let (mut fx, mut fy, mut prev) = (0.0, 0.0, 0.0);
        for i in 0..SUPPORT {
            fx += self.0[i];
            fy += other.0[i];
            let f = fx * fy;
            out[i] = f - prev;
            prev = f;
        }
        PathPmf(out)
    }

    /// Distribution of `max(X, m)` for a constant `m`.
    fn max_const(&self, m: i32) -> PathPmf {
        let mi = (m + OFFSET) as usize;
        let mut out = [0.0; SUPPORT];
        for (i, &p) in self.0.iter().enumerate() {
            out[i.max(mi)] += p;
        }
        PathPmf(out)
    }

    /// Adds a node reward that is `v` if revealed or ±1 with equal odds.
    fn add_node(&self, belief: &TreeBelief, node: usize) -> PathPmf {
        let mut out = [0.0; SUPPORT];
        if belief.is_revealed(node) {
            let v = belief.value(node) as isize;
            for (i, &p) in self.0.iter().enumerate() {
                if p != 0.0 {
                    out[(i as isize + v) as usize] += p;
                }
            }
        } else {
            for (i, &p) in self.0.iter().enumerate() {
                if p != 0.0 {
                    out[i + 1] += 0.5 * p;
                    out[i - 1] += 0.5 * p;
                }
            }
        }
        PathPmf(out)
    }
}

/// For every node, the distribution of the best downward path value from it
/// once every reward in its subtree is revealed.
pub fn tree_full_information_pmf(belief: &TreeBelief) -> Vec<PathPmf> {
    let topo = belief.topology();
    let k = topo.num_nodes();
    let first_leaf = topo.first_leaf();
    let mut full = vec![PathPmf::point(0); k];
    for i in (0..k).rev() {
        let below = if i >= first_leaf { PathPmf::point(0) } else { full[2 * i + 1].max_independent(&full[2 * i + 2]) };
        full[i] = below.add_node(belief, i);
    }
    full
}

fn exact_tree_features(belief: &TreeBelief) -> BeliefFeatures {
    let topo = belief.topology();
    let k = topo.num_nodes();
    let mut down = [0i32; 128];
    belief.best_down_values(&mut down);
    let current = down[0];

    // Sum of expected rewards strictly above each node, and the best
    // expected path that avoids the node altogether.
    let mut above = [0i32; 128];
    let mut avoid = [NONE; 128];
    for c in 1..k {
        let p = (c - 1) / 2;
        above[c] = above[p] + belief.value(p);
        let s = TreeTopology::sibling(c).expect("non-root");
        avoid[c] = avoid[p].max(above[p] + belief.value(p) + down[s]);
    }

    let full = tree_full_information_pmf(belief);
    let vpi = (full[0].mean() - current as f64).max(0.0);

    let mut voi1 = Vec::with_capacity(k);
    let mut vpi_sub = Vec::with_capacity(k);
    let mut informative = Vec::with_capacity(k);
    for c in 0..k {
        let revealed = belief.is_revealed(c);
        informative.push(!revealed);
        let through = above[c] + down[c];
        let o = avoid[c];
        voi1.push(if revealed {
            0.0
        } else {
            let gain = (through + 1).max(o) + (through - 1).max(o) - 2 * through.max(o);
            gain as f64 / 2.0
        });

        // Reveal c's subtree, then c's ancestors; off-path siblings stay at
        // their expected best value.
        let mut x = full[c];
        let mut node = c;
        while let Some(p) = TreeTopology::parent(node) {
            let s = TreeTopology::sibling(node).expect("non-root");
            x = x.max_const(down[s]).add_node(belief, p);
            node = p;
        }
        vpi_sub.push((x.mean() - current as f64).max(0.0));
    }
    BeliefFeatures { vpi, voi1, vpi_sub, informative }
}

impl VoiFeatures for TreeMdp {
    fn exact_features(&self, belief: &TreeBelief, _config: &FeatureConfig) -> BeliefFeatures {
        exact_tree_features(belief)
    }

    fn sample_parameters(&self, belief: &TreeBelief, rng: &mut ChaCha8Rng, out: &mut Vec<f64>) {
        out.clear();
        for i in 0..belief.num_nodes() {
            let v = if belief.is_revealed(i) {
                belief.value(i)
            } else if rng.random::<bool>() {
                1
            } else {
                -1
            };
            out.push(v as f64);
        }
    }

    fn utility_with_revealed(&self, belief: &TreeBelief, theta: &[f64], revealed: &[bool]) -> f64 {
        let topo = belief.topology();
        let k = topo.num_nodes();
        let first_leaf = topo.first_leaf();
        let mut best = [0.0f64; 128];
        for i in (0..k).rev() {
            let v = if revealed[i] { theta[i] } else { belief.value(i) as f64 };
            best[i] = v + if i >= first_leaf { 0.0 } else { best[2 * i + 1].max(best[2 * i + 2]) };
        }
        best[0]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domains::tree_terminal;
    use crate::features::voi1_enumerated;
    use crate::mdp::MetaMdp;
    use approx::assert_relative_eq;
    use rand::SeedableRng;

    /// Expected best-path value when the nodes in `mask` are revealed,
    /// by enumerating every joint outcome of the unknown ones among them.
    fn enumerate_partial_reveal(mdp: &TreeMdp, b: &TreeBelief, mask: &[bool]) -> f64 {
        let hidden: Vec<usize> = (0..b.num_nodes()).filter(|&i| mask[i] && !b.is_revealed(i)).collect();
        let n = hidden.len();
        let mut total = 0.0;
        let mut theta: Vec<f64> = (0..b.num_nodes()).map(|i| b.value(i) as f64).collect();
        for bits in 0u64..(1 << n) {
            for (j, &node) in hidden.iter().enumerate() {
                theta[node] = if bits >> j & 1 == 1 { 1.0 } else { -1.0 };
            }
            total += mdp.utility_with_revealed(b, &theta, mask);
        }
        total / (1u64 << n) as f64
    }

    fn random_belief(h: usize, rng: &mut ChaCha8Rng) -> TreeBelief {
        let mut b = TreeBelief::unknown(h);
        for i in 0..b.num_nodes() {
            match rng.random_range(0..4) {
                0 => b = b.reveal(i, true),
                1 => b = b.reveal(i, false),
                _ => {}
            }
        }
        b
    }

    #[test]
    fn height_two_prior_values() {
        let mdp = TreeMdp::new(2, 0.1).unwrap();
        let b = mdp.initial_belief();
        let f = mdp.exact_features(&b, &FeatureConfig::default());
        assert_relative_eq!(f.voi1[3], 0.5);
        assert_relative_eq!(f.voi1[0], 0.0);
        assert_relative_eq!(f.vpi, enumerate_partial_reveal(&mdp, &b, &[true; 7]), epsilon = 1e-12);
        let leaf_mask = [true, true, false, true, false, false, false];
        assert_relative_eq!(f.vpi_sub[3], enumerate_partial_reveal(&mdp, &b, &leaf_mask), epsilon = 1e-12);
    }

    #[test]
    fn exact_features_match_enumeration_on_random_beliefs() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for h in 1..=3 {
            let mdp = TreeMdp::new(h, 0.1).unwrap();
            for _ in 0..60 {
                let b = random_belief(h, &mut rng);
                let f = mdp.exact_features(&b, &FeatureConfig::default());
                let current = tree_terminal(&b);
                let k = b.num_nodes();
                let vpi = enumerate_partial_reveal(&mdp, &b, &vec![true; k]) - current;
                assert_relative_eq!(f.vpi, vpi.max(0.0), epsilon = 1e-12);
                for c in 0..k {
                    let mask: Vec<bool> = (0..k).map(|i| mdp.relevance(c, i)).collect();
                    let sub = enumerate_partial_reveal(&mdp, &b, &mask) - current;
                    assert_relative_eq!(f.vpi_sub[c], sub.max(0.0), epsilon = 1e-12);
                    assert_relative_eq!(f.voi1[c], voi1_enumerated(&mdp, &b, c).max(0.0), epsilon = 1e-12);
                }
            }
        }
    }

    #[test]
    fn pmf_sums_to_one_at_max_height() {
        let b = TreeBelief::unknown(MAX_TREE_HEIGHT).reveal(5, true).reveal(64, false);
        for pmf in tree_full_information_pmf(&b) {
            assert_relative_eq!(pmf.0.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
        }
    }
}
