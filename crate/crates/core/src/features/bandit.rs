use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution};

use super::{BeliefFeatures, FeatureConfig, VoiFeatures};
use crate::domains::{bandit_terminal, BanditBelief, BanditMdp};
use crate::special::{expected_max_beta, expected_max_beta_const};

/// VOI₁ of pulling arm `c`: only the best-other comparison can change.
fn voi1_arm(belief: &BanditBelief, c: usize, current: f64) -> f64 {
    let arm = belief.arms[c];
    let other = belief.best_other_mean(c);
    let p = arm.mean();
    let up = arm.observe(true).mean().max(other);
    let down = arm.observe(false).mean().max(other);
    (p * up + (1.0 - p) * down - current).max(0.0)
}

impl VoiFeatures for BanditMdp {
    fn exact_features(&self, belief: &BanditBelief, config: &FeatureConfig) -> BeliefFeatures {
        let current = bandit_terminal(belief);
        let params: Vec<(f64, f64)> = belief.arms.iter().map(|a| (a.alpha, a.beta)).collect();
        let vpi = (expected_max_beta(&params, config.quadrature_points) - current).max(0.0);
        let k = belief.k();
        let vpi_sub = (0..k)
            .map(|c| {
                let a = belief.arms[c];
                (expected_max_beta_const(a.alpha, a.beta, belief.best_other_mean(c)) - current).max(0.0)
            })
            .collect();
        BeliefFeatures {
            vpi,
            voi1: (0..k).map(|c| voi1_arm(belief, c, current)).collect(),
            vpi_sub,
            informative: vec![true; k],
        }
    }

    fn sample_parameters(&self, belief: &BanditBelief, rng: &mut ChaCha8Rng, out: &mut Vec<f64>) {
        out.clear();
        out.extend(belief.arms.iter().map(|a| Beta::new(a.alpha, a.beta).expect("valid beta").sample(rng)));
    }

    fn utility_with_revealed(&self, belief: &BanditBelief, theta: &[f64], revealed: &[bool]) -> f64 {
        belief
            .arms
            .iter()
            .enumerate()
            .map(|(i, a)| if revealed[i] { theta[i] } else { a.mean() })
            .fold(f64::NEG_INFINITY, f64::max)
    }
}
