use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution};

use super::{BeliefFeatures, FeatureConfig, VoiFeatures};
use crate::domains::{BetaParams, TornadoBelief, TornadoMdp};
use crate::special::beta_cdf;

impl TornadoMdp {
    /// Expected utility of one city once its damage probability is known:
    /// `E[max(λ_fn·θ, λ_evac)]`, split at the evacuation threshold `t`.
    pub fn city_informed_utility(&self, city: &BetaParams) -> f64 {
        let t = self.evacuation_threshold();
        let mu = city.mean();
        self.false_negative_cost * mu * beta_cdf(t, city.alpha + 1.0, city.beta)
            + self.evacuation_cost * (1.0 - beta_cdf(t, city.alpha, city.beta))
    }

    pub fn city_vpi(&self, city: &BetaParams) -> f64 {
        (self.city_informed_utility(city) - self.city_utility(city)).max(0.0)
    }

    pub fn city_voi1(&self, city: &BetaParams) -> f64 {
        let p = city.mean();
        let after = p * self.city_utility(&city.observe(true)) + (1.0 - p) * self.city_utility(&city.observe(false));
        (after - self.city_utility(city)).max(0.0)
    }
}

impl VoiFeatures for TornadoMdp {
    /// Cities are independent and utility is additive, so the VPI is the sum
    /// of per-city values and VPI_sub of a city is that city's term.
    fn exact_features(&self, belief: &TornadoBelief, _config: &FeatureConfig) -> BeliefFeatures {
        let per_city: Vec<f64> = belief.cities.iter().map(|c| self.city_vpi(c)).collect();
        let can_simulate = belief.sims_remaining > 0;
        BeliefFeatures {
            vpi: per_city.iter().sum(),
            voi1: belief.cities.iter().map(|c| if can_simulate { self.city_voi1(c) } else { 0.0 }).collect(),
            vpi_sub: per_city,
            informative: vec![can_simulate; belief.cities.len()],
        }
    }

    fn sample_parameters(&self, belief: &TornadoBelief, rng: &mut ChaCha8Rng, out: &mut Vec<f64>) {
        out.clear();
        out.extend(belief.cities.iter().map(|c| Beta::new(c.alpha, c.beta).expect("valid beta").sample(rng)));
    }

    fn utility_with_revealed(&self, belief: &TornadoBelief, theta: &[f64], revealed: &[bool]) -> f64 {
        belief
            .cities
            .iter()
            .enumerate()
            .map(|(i, c)| {
                if revealed[i] {
                    (theta[i] * self.false_negative_cost).max(self.evacuation_cost)
                } else {
                    self.city_utility(c)
                }
            })
            .sum()
    }
}
