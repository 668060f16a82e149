//! Adversarial contextual bandits with an abstention action.
//!
//! The crate is organised bottom-up:
//!
//! * [`action`]: stochastic actions, expert advice, the unnormalized relative
//!   entropy and action sampling.
//! * [`engine`]: the confidence-rated learner (entropic projection, unbiased
//!   reward estimation, multiplicative update).
//! * [`tree`]: the suffix-product tree used by the ball agent.
//! * [`bases`]: graphs, graph metrics, ball orders, community and interval bases.
//! * [`contextual`]: the learner instantiated on a basis, both directly and via
//!   one tree per (family, action).
//! * [`baselines`]: per-context EXP3 and EXP4 with an abstain arm.
//! * [`environments`]: synthetic graphs, edge-list loading and the reward model.

// `!(x >= 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod action;
pub mod baselines;
pub mod bases;
pub mod contextual;
pub mod engine;
pub mod environments;
mod error;
pub mod rng;
pub mod tree;

pub use action::{
    sample_action, unnormalized_relative_entropy, ActionId, ExpertAdvice, RewardVector,
    StochasticAction,
};
pub use error::{Error, Result};
