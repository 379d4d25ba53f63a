//! Metalevel MDPs, value-of-information features and the policies built on
//! them: BMPS, baselines, an exact solver and a Bayesian weight optimizer.

pub mod domains;
pub mod episode;
pub mod error;
pub mod features;
pub mod mdp;
pub mod optimizer;
pub mod par;
pub mod policies;
pub mod solver;
pub mod special;

pub use error::{MetaError, Result};
pub use mdp::{BeliefState, MetaAction, MetaMdp, MetaMdpSpec, Policy};
