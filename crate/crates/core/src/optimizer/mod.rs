//! Bayesian optimization of BMPS weights.
//!
//! Probes live in a unit search box `(w1, w2, s)`: `(w1, w2)` ranges over the
//! triangle `w1, w2 ≥ 0, w1 + w2 ≤ 1` with `w3 = 1 − w1 − w2`, and
//! `w4 = h^s`, so every probe is feasible by construction. The geometric
//! scale keeps useful cost multipliers (a few units) reachable when the
//! horizon is large, as in trees with over a hundred nodes. A GP
//! surrogate with expected improvement picks probes after a quasi-random
//! initial design. Every probe is scored on the same seed block (common
//! random numbers) and the top candidates are re-scored on a fresh block.

mod gp;

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::episode::evaluate_policy;
use crate::error::{MetaError, Result};
use crate::features::{FeatureEngine, VoiFeatures};
use crate::mdp::BeliefState;
use crate::par;
use crate::policies::{BmpsPolicy, WeightVector};

pub use gp::{expected_improvement, GaussianProcess, DIM, LENGTH_SCALES};

pub const INITIAL_DESIGN: usize = 10;
pub const ACQUISITION_CANDIDATES: usize = 4096;
/// Share of acquisition candidates drawn around the incumbent.
const LOCAL_FRACTION: f64 = 0.25;
const LOCAL_SD: f64 = 0.05;
/// The surrogate is fitted to at most this many of the best probes.
const MAX_GP_POINTS: usize = 200;
/// Multipliers on the per-probe noise variance, chosen by marginal
/// likelihood. Probes share their episodes, so differences between them are
/// far less noisy than each probe's own standard error suggests.
const NOISE_SCALES: [f64; 4] = [1.0, 0.1, 0.01, 0.001];
/// Below this many probes the hyperparameters are re-selected every iteration;
/// above it, every `REFIT_EVERY` iterations.
const FULL_REFIT_BELOW: usize = 60;
const REFIT_EVERY: usize = 10;

const TRAINING_BLOCK: u64 = 1;
const RESCORE_BLOCK: u64 = 2;
const ACQUISITION_BLOCK: u64 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SearchMode {
    #[default]
    Bayesian,
    /// Scrambled Halton points only; for ablation.
    QuasiRandom,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchSpec {
    pub iterations: usize,
    pub episodes_per_eval: usize,
    pub top_k_rescore: usize,
    pub rescore_episodes: usize,
    pub seed: u64,
    #[serde(default)]
    pub mode: SearchMode,
}

impl SearchSpec {
    pub fn new(iterations: usize, episodes_per_eval: usize, top_k_rescore: usize, rescore_episodes: usize) -> Self {
        SearchSpec { iterations, episodes_per_eval, top_k_rescore, rescore_episodes, seed: 0, mode: SearchMode::Bayesian }
    }

    pub fn stopping() -> Self {
        Self::new(500, 2500, 1, 3000)
    }

    pub fn bandit() -> Self {
        Self::new(10, 1000, 5, 5000)
    }

    pub fn tree() -> Self {
        Self::new(100, 1000, 3, 2000)
    }

    /// Same budget as the tree protocol.
    pub fn tornado() -> Self {
        Self::new(100, 1000, 3, 2000)
    }

    pub fn with_seed(self, seed: u64) -> Self {
        SearchSpec { seed, ..self }
    }

    pub fn with_mode(self, mode: SearchMode) -> Self {
        SearchSpec { mode, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("iterations", self.iterations),
            ("episodes_per_eval", self.episodes_per_eval),
            ("top_k_rescore", self.top_k_rescore),
            ("rescore_episodes", self.rescore_episodes),
        ] {
            if v == 0 {
                return Err(MetaError::Config(format!("{name} must be positive")));
            }
        }
        if self.top_k_rescore > self.iterations {
            return Err(MetaError::Config(format!(
                "top_k_rescore = {} exceeds iterations = {}",
                self.top_k_rescore, self.iterations
            )));
        }
        Ok(())
    }
}

/// A scored weight vector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub weights: WeightVector,
    pub mean_return: f64,
    pub std_error: f64,
    pub n_episodes: usize,
}

/// Something that scores weight vectors by mean return.
pub trait WeightObjective: Sync {
    fn horizon(&self) -> usize;

    /// Mean return over episodes seeded `base_seed..base_seed + n_episodes`.
    fn evaluate(&self, weights: &WeightVector, n_episodes: usize, base_seed: u64) -> Result<Candidate>;
}

/// Mean return of the BMPS policy from a fixed initial state.
pub struct BmpsObjective<'a, M: VoiFeatures> {
    mdp: &'a M,
    engine: Arc<FeatureEngine<M>>,
    initial: BeliefState<M::Belief>,
}

impl<'a, M: VoiFeatures> BmpsObjective<'a, M> {
    pub fn new(mdp: &'a M, engine: Arc<FeatureEngine<M>>) -> Self {
        BmpsObjective { mdp, engine, initial: mdp.initial_state() }
    }

    pub fn with_initial(self, initial: BeliefState<M::Belief>) -> Self {
        BmpsObjective { initial, ..self }
    }
}

impl<M: VoiFeatures> WeightObjective for BmpsObjective<'_, M> {
    fn horizon(&self) -> usize {
        self.mdp.spec().horizon
    }

    fn evaluate(&self, weights: &WeightVector, n_episodes: usize, base_seed: u64) -> Result<Candidate> {
        let policy = BmpsPolicy::new(self.mdp, *weights, Arc::clone(&self.engine))?;
        let r = evaluate_policy(self.mdp, &self.initial, &policy, n_episodes, base_seed)?;
        Ok(Candidate { weights: *weights, mean_return: r.mean, std_error: r.std_error(), n_episodes })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProbeSource {
    Initial,
    Model,
    QuasiRandom,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub iteration: usize,
    pub coords: [f64; DIM],
    pub candidate: Candidate,
    pub best_so_far: f64,
    pub source: ProbeSource,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SearchTrace {
    pub entries: Vec<TraceEntry>,
}

impl SearchTrace {
    pub fn best_so_far(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.best_so_far).collect()
    }

    pub fn final_best(&self) -> Option<f64> {
        self.entries.last().map(|e| e.best_so_far)
    }

    pub fn candidates(&self) -> Vec<Candidate> {
        self.entries.iter().map(|e| e.candidate).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchOutcome {
    /// The re-scoring winner.
    pub best: Candidate,
    pub trace: SearchTrace,
    /// Re-scored top candidates, in training rank order.
    pub rescored: Vec<Candidate>,
}

/// SplitMix64 finalizer; spreads `(seed, block)` over the seed space.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// First episode seed of a named block of a search seed.
pub fn seed_block(seed: u64, block: u64) -> u64 {
    mix(mix(seed) ^ block)
}

pub fn training_seed(seed: u64) -> u64 {
    seed_block(seed, TRAINING_BLOCK)
}

pub fn rescore_seed(seed: u64) -> u64 {
    seed_block(seed, RESCORE_BLOCK)
}

/// Maps search coordinates to weights; `coords` must lie in the search box.
pub fn coords_to_weights(coords: [f64; DIM], horizon: usize) -> Result<WeightVector> {
    let [w1, w2, s] = coords;
    let w3 = (1.0 - w1 - w2).max(0.0);
    let h = horizon as f64;
    WeightVector::new(w1, w2, w3, h.powf(s).clamp(1.0, h), horizon)
}

/// Maps the unit cube onto the search box, uniformly over the triangle.
pub fn cube_to_coords(u: [f64; DIM]) -> [f64; DIM] {
    let r = u[0].sqrt();
    [1.0 - r, r * (1.0 - u[1]), u[2]]
}

/// Nearest point of the search box (Euclidean in `(w1, w2)`).
pub fn project_coords(c: [f64; DIM]) -> [f64; DIM] {
    let (mut w1, mut w2) = (c[0], c[1]);
    let excess = w1 + w2 - 1.0;
    if excess > 0.0 {
        w1 -= excess / 2.0;
        w2 -= excess / 2.0;
    }
    if w1 < 0.0 {
        w1 = 0.0;
        w2 = w2.clamp(0.0, 1.0);
    } else if w2 < 0.0 {
        w2 = 0.0;
        w1 = w1.clamp(0.0, 1.0);
    }
    [w1, w2, c[2].clamp(0.0, 1.0)]
}

fn radical_inverse(mut i: u64, base: u64) -> f64 {
    let mut f = 1.0;
    let mut r = 0.0;
    while i > 0 {
        f /= base as f64;
        r += f * (i % base) as f64;
        i /= base;
    }
    r
}

/// Halton point `index` (bases 2, 3, 5) under a seed-dependent random shift.
pub fn halton_point(index: usize, seed: u64) -> [f64; DIM] {
    let mut rng = ChaCha8Rng::seed_from_u64(seed_block(seed, ACQUISITION_BLOCK ^ 0xFFFF));
    let mut out = [0.0; DIM];
    for (d, base) in [2u64, 3, 5].into_iter().enumerate() {
        let shift: f64 = rng.random();
        out[d] = (radical_inverse(index as u64 + 1, base) + shift).fract();
    }
    out
}

struct Observation {
    coords: [f64; DIM],
    mean: f64,
    noise_var: f64,
}

/// Picks the next probe by expected improvement over dense candidates.
fn propose(observations: &[Observation], hyper: &mut Option<(f64, f64)>, iteration: usize, seed: u64) -> Option<[f64; DIM]> {
    let mut order: Vec<usize> = (0..observations.len()).collect();
    if order.len() > MAX_GP_POINTS {
        order.sort_by(|&a, &b| observations[b].mean.total_cmp(&observations[a].mean).then(a.cmp(&b)));
        order.truncate(MAX_GP_POINTS);
        order.sort_unstable();
    }
    let xs: Vec<[f64; DIM]> = order.iter().map(|&i| observations[i].coords).collect();
    let ys: Vec<f64> = order.iter().map(|&i| observations[i].mean).collect();
    let noise: Vec<f64> = order.iter().map(|&i| observations[i].noise_var).collect();

    let scaled = |f: f64| noise.iter().map(|v| v * f).collect::<Vec<_>>();
    let refit = xs.len() < FULL_REFIT_BELOW || iteration.is_multiple_of(REFIT_EVERY);
    let gp = match (*hyper, refit) {
        (Some((l, f)), false) => GaussianProcess::fit(&xs, &ys, &scaled(f), l).map(|gp| (gp, f)),
        _ => None,
    }
    .or_else(|| {
        NOISE_SCALES
            .iter()
            .filter_map(|&f| GaussianProcess::fit_best(&xs, &ys, &scaled(f), &LENGTH_SCALES).map(|gp| (gp, f)))
            .fold(None, |best: Option<(GaussianProcess, f64)>, c| match best {
                Some(b) if b.0.log_marginal() >= c.0.log_marginal() => Some(b),
                _ => Some(c),
            })
    })?;
    let (gp, f) = gp;
    *hyper = Some((gp.length_scale(), f));

    let fitted: Vec<f64> = xs.iter().map(|x| gp.predict(x).0).collect();
    let (incumbent, best) = fitted
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |(bi, bv), (i, &v)| if v > bv { (i, v) } else { (bi, bv) });
    let y_mean = ys.iter().sum::<f64>() / ys.len() as f64;
    let y_sd = (ys.iter().map(|y| (y - y_mean) * (y - y_mean)).sum::<f64>() / ys.len() as f64).sqrt();
    let xi = 0.01 * y_sd;

    let mut rng = ChaCha8Rng::seed_from_u64(seed_block(seed, ACQUISITION_BLOCK).wrapping_add(iteration as u64));
    let local = Normal::new(0.0, LOCAL_SD).expect("positive sd");
    let n_local = (ACQUISITION_CANDIDATES as f64 * LOCAL_FRACTION) as usize;
    let centre = xs[incumbent];
    let candidates: Vec<[f64; DIM]> = (0..ACQUISITION_CANDIDATES)
        .map(|i| {
            if i < n_local {
                project_coords(std::array::from_fn(|d| centre[d] + local.sample(&mut rng)))
            } else {
                cube_to_coords(std::array::from_fn(|_| rng.random()))
            }
        })
        .collect();
    let scores = par::map_slice(&candidates, |c| {
        let (m, s) = gp.predict(c);
        expected_improvement(m, s, best, xi)
    });
    let pick = scores
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |(bi, bv), (i, &v)| if v > bv { (i, v) } else { (bi, bv) })
        .0;
    Some(candidates[pick])
}

/// Runs the search and returns the re-scoring winner with the full trace.
pub fn optimize_weights<O: WeightObjective>(objective: &O, spec: &SearchSpec) -> Result<SearchOutcome> {
    spec.validate()?;
    let horizon = objective.horizon();
    let train_base = training_seed(spec.seed);
    let mut observations: Vec<Observation> = Vec::with_capacity(spec.iterations);
    let mut trace = SearchTrace::default();
    let mut hyper = None;
    let mut best_so_far = f64::NEG_INFINITY;
    for it in 0..spec.iterations {
        let (coords, source) = match spec.mode {
            SearchMode::QuasiRandom => (cube_to_coords(halton_point(it, spec.seed)), ProbeSource::QuasiRandom),
            SearchMode::Bayesian if it < INITIAL_DESIGN => (cube_to_coords(halton_point(it, spec.seed)), ProbeSource::Initial),
            SearchMode::Bayesian => match propose(&observations, &mut hyper, it, spec.seed) {
                Some(c) => (c, ProbeSource::Model),
                None => (cube_to_coords(halton_point(it, spec.seed)), ProbeSource::QuasiRandom),
            },
        };
        let weights = coords_to_weights(coords, horizon)?;
        let candidate = objective.evaluate(&weights, spec.episodes_per_eval, train_base)?;
        best_so_far = best_so_far.max(candidate.mean_return);
        observations.push(Observation { coords, mean: candidate.mean_return, noise_var: candidate.std_error.powi(2) });
        trace.entries.push(TraceEntry { iteration: it, coords, candidate, best_so_far, source });
    }
    let (best, rescored) =
        rescore_ranked(objective, &trace.candidates(), spec.top_k_rescore, spec.rescore_episodes, spec.seed)?;
    Ok(SearchOutcome { best, trace, rescored })
}

/// Re-evaluates the `k` best candidates on a fresh common seed block and
/// returns the best re-evaluated one (lowest training rank on ties). With
/// `k = 1` the top candidate is returned unchanged.
pub fn rescore_top_candidates<O: WeightObjective>(
    objective: &O,
    candidates: &[Candidate],
    k: usize,
    rescore_episodes: usize,
    seed: u64,
) -> Result<Candidate> {
    rescore_ranked(objective, candidates, k, rescore_episodes, seed).map(|(best, _)| best)
}

fn rescore_ranked<O: WeightObjective>(
    objective: &O,
    candidates: &[Candidate],
    k: usize,
    rescore_episodes: usize,
    seed: u64,
) -> Result<(Candidate, Vec<Candidate>)> {
    if candidates.is_empty() {
        return Err(MetaError::Config("no candidates to re-score".into()));
    }
    if k == 0 || k > candidates.len() {
        return Err(MetaError::Config(format!("top_k = {k} must be in 1..={}", candidates.len())));
    }
    if rescore_episodes == 0 {
        return Err(MetaError::Config("rescore_episodes must be positive".into()));
    }
    let mut ranked: Vec<&Candidate> = candidates.iter().collect();
    ranked.sort_by(|a, b| b.mean_return.total_cmp(&a.mean_return));
    ranked.truncate(k);
    if k == 1 {
        return Ok((*ranked[0], vec![]));
    }
    let base = rescore_seed(seed);
    let rescored =
        ranked.iter().map(|c| objective.evaluate(&c.weights, rescore_episodes, base)).collect::<Result<Vec<_>>>()?;
    let best = rescored.iter().fold(rescored[0], |b, c| if c.mean_return > b.mean_return { *c } else { b });
    Ok((best, rescored))
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Quadratic;

    impl WeightObjective for Quadratic {
        fn horizon(&self) -> usize {
            10
        }

        fn evaluate(&self, w: &WeightVector, n: usize, _: u64) -> Result<Candidate> {
            let v = -(w.w1 - 0.2).powi(2) - (w.w2 - 0.3).powi(2);
            Ok(Candidate { weights: *w, mean_return: v, std_error: 0.0, n_episodes: n })
        }
    }

    #[test]
    fn finds_the_synthetic_optimum() {
        let spec = SearchSpec::new(60, 1, 1, 1);
        let out = optimize_weights(&Quadratic, &spec).unwrap();
        let w = out.best.weights;
        let err = (w.w1 - 0.2).abs().max((w.w2 - 0.3).abs()).max((w.w3 - 0.5).abs());
        assert!(err <= 0.05, "{w:?}");
    }

    #[test]
    fn best_so_far_is_monotone_and_probes_feasible() {
        let spec = SearchSpec::new(30, 1, 3, 1).with_seed(4);
        let out = optimize_weights(&Quadratic, &spec).unwrap();
        let curve = out.trace.best_so_far();
        assert!(curve.windows(2).all(|p| p[1] >= p[0]));
        for e in &out.trace.entries {
            e.candidate.weights.validate(10).unwrap();
        }
        assert_eq!(out.rescored.len(), 3);
    }

    #[test]
    fn constant_objective_gives_feasible_weights() {
        struct Flat;
        impl WeightObjective for Flat {
            fn horizon(&self) -> usize {
                5
            }
            fn evaluate(&self, w: &WeightVector, n: usize, _: u64) -> Result<Candidate> {
                Ok(Candidate { weights: *w, mean_return: 0.0, std_error: 0.0, n_episodes: n })
            }
        }
        let out = optimize_weights(&Flat, &SearchSpec::new(15, 1, 2, 1)).unwrap();
        out.best.weights.validate(5).unwrap();
    }

    #[test]
    fn search_is_reproducible() {
        let spec = SearchSpec::new(20, 1, 2, 1).with_seed(9);
        let a = optimize_weights(&Quadratic, &spec).unwrap();
        let b = optimize_weights(&Quadratic, &spec).unwrap();
        assert_eq!(a, b);
        let c = optimize_weights(&Quadratic, &spec.with_seed(10)).unwrap();
        assert_ne!(a.trace.entries[0].coords, c.trace.entries[0].coords);
    }

    #[test]
    fn quasi_random_mode_never_uses_the_model() {
        let spec = SearchSpec::new(20, 1, 1, 1).with_mode(SearchMode::QuasiRandom);
        let out = optimize_weights(&Quadratic, &spec).unwrap();
        assert!(out.trace.entries.iter().all(|e| e.source == ProbeSource::QuasiRandom));
    }

    #[test]
    fn config_errors() {
        assert_eq!(optimize_weights(&Quadratic, &SearchSpec::new(0, 1, 1, 1)).unwrap_err().category(), "config");
        assert!(SearchSpec::new(3, 1, 4, 1).validate().is_err());
        assert!(rescore_top_candidates(&Quadratic, &[], 1, 1, 0).is_err());
        for p in [SearchSpec::stopping(), SearchSpec::bandit(), SearchSpec::tree(), SearchSpec::tornado()] {
            p.validate().unwrap();
        }
    }

    #[test]
    fn rescoring_prefers_the_fresh_winner() {
        // training scores rank `a` first, but `b` is better on fresh seeds
        struct Noisy;
        impl WeightObjective for Noisy {
            fn horizon(&self) -> usize {
                10
            }
            fn evaluate(&self, w: &WeightVector, n: usize, _: u64) -> Result<Candidate> {
                Ok(Candidate { weights: *w, mean_return: w.w2, std_error: 0.0, n_episodes: n })
            }
        }
        let a = WeightVector::new(1.0, 0.0, 0.0, 1.0, 10).unwrap();
        let b = WeightVector::new(0.0, 1.0, 0.0, 1.0, 10).unwrap();
        let cands = [
            Candidate { weights: a, mean_return: 0.9, std_error: 0.1, n_episodes: 10 },
            Candidate { weights: b, mean_return: 0.5, std_error: 0.1, n_episodes: 10 },
        ];
        assert_eq!(rescore_top_candidates(&Noisy, &cands, 2, 100, 0).unwrap().weights, b);
        assert_eq!(rescore_top_candidates(&Noisy, &cands, 1, 100, 0).unwrap(), cands[0]);
    }

    #[test]
    fn coordinate_maps_stay_feasible() {
        for i in 0..500 {
            let c = cube_to_coords(halton_point(i, 3));
            coords_to_weights(c, 30).unwrap();
            let p = project_coords([c[0] + 0.3, c[1] - 0.4, c[2] * 2.0 - 0.5]);
            coords_to_weights(p, 30).unwrap();
        }
        let w = coords_to_weights([0.0, 0.0, 1.0], 30).unwrap();
        assert_eq!(w.as_array(), [0.0, 0.0, 1.0, 30.0]);
        assert_eq!(coords_to_weights([1.0, 0.0, 0.0], 30).unwrap(), WeightVector::myopic());
        let mid = coords_to_weights([0.2, 0.3, 0.5], 100).unwrap();
        assert!((mid.w4 - 10.0).abs() < 1e-12);
    }
}
