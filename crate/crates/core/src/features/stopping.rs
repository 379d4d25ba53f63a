use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution};

use super::{voi1_enumerated, BeliefFeatures, FeatureConfig, VoiFeatures};
use crate::domains::{StoppingBelief, StoppingMdp};
use crate::mdp::MetaMdp;
use crate::special::beta_cdf;

/// Probability of a correct prediction once θ is known:
/// `E[max(θ, 1−θ)] = μ + I_½(α,β) − 2μ·I_½(α+1,β)`.
fn informed_p_correct(b: &StoppingBelief) -> f64 {
    let mu = b.mean();
    mu + beta_cdf(0.5, b.alpha, b.beta) - 2.0 * mu * beta_cdf(0.5, b.alpha + 1.0, b.beta)
}

impl VoiFeatures for StoppingMdp {
    /// The single computation is relevant to the single parameter, so
    /// VPI_sub coincides with VPI.
    fn exact_features(&self, belief: &StoppingBelief, _config: &FeatureConfig) -> BeliefFeatures {
        let informed = self.scoring.score(informed_p_correct(belief));
        let vpi = (informed - self.termination_utility(belief)).max(0.0);
        BeliefFeatures {
            vpi,
            voi1: vec![voi1_enumerated(self, belief, 0).max(0.0)],
            vpi_sub: vec![vpi],
            informative: vec![true],
        }
    }

    fn sample_parameters(&self, belief: &StoppingBelief, rng: &mut ChaCha8Rng, out: &mut Vec<f64>) {
        out.clear();
        out.push(Beta::new(belief.alpha, belief.beta).expect("valid beta").sample(rng));
    }

    fn utility_with_revealed(&self, belief: &StoppingBelief, theta: &[f64], revealed: &[bool]) -> f64 {
        if revealed[0] {
            self.scoring.score(theta[0].max(1.0 - theta[0]))
        } else {
            self.termination_utility(belief)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domains::BetaParams;
    use crate::special::simpson;
    use approx::assert_relative_eq;

    #[test]
    fn closed_form_matches_quadrature() {
        for a in 1..12 {
            for b in 1..12 {
                let p = BetaParams::new(a as f64, b as f64);
                // E[max(θ,1−θ)] = ½ + ∫_½^1 P(max > y) dy
                let quad =
                    0.5 + simpson(|y| 1.0 - beta_cdf(y, p.alpha, p.beta) + beta_cdf(1.0 - y, p.alpha, p.beta), 0.5, 1.0, 4001);
                assert_relative_eq!(informed_p_correct(&p), quad, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn uniform_prior_values() {
        let mdp = StoppingMdp::with_cost(0.02).unwrap();
        let f = mdp.exact_features(&BetaParams::UNIFORM, &FeatureConfig::default());
        assert_relative_eq!(f.vpi, 0.5, epsilon = 1e-14);
        // both successors are worth 1/3 on the ±1 scale
        assert_relative_eq!(f.voi1[0], 1.0 / 3.0, epsilon = 1e-14);
        assert_eq!(f.vpi_sub[0], f.vpi);
    }

    #[test]
    fn probability_scoring_halves_everything() {
        let mdp = StoppingMdp::with_cost(0.02).unwrap().with_scoring(crate::domains::StoppingScoring::Probability);
        let f = mdp.exact_features(&BetaParams::UNIFORM, &FeatureConfig::default());
        assert_relative_eq!(f.vpi, 0.25, epsilon = 1e-14);
        assert_relative_eq!(f.voi1[0], 1.0 / 6.0, epsilon = 1e-14);
    }

    #[test]
    fn myopic_blind_spot() {
        let mdp = StoppingMdp::with_cost(0.02).unwrap();
        let f = mdp.exact_features(&BetaParams::new(2.0, 1.0), &FeatureConfig::default());
        assert!(f.voi1[0].abs() < 1e-12);
        assert!(f.vpi > 0.1);
    }
}
