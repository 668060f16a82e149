//! The learner on a basis of context sets.
//!
//! Each pair of a basis element `B` and an action `a` is a specialist: at
//! context `x` it plays `a` with confidence 1 when `x ∈ B` and abstains
//! otherwise. With 0/1 confidences the entropic projection scales every awake
//! weight by `1/‖c_t‖₁` and leaves asleep weights alone, which both agents
//! here exploit.

mod agents;
mod comparator;
mod sets;

pub use agents::{DirectAgent, EngineAgent, FastAgent};
pub use comparator::{comparator_reward, ComparatorPiece, ComparatorPolicy};
pub use sets::{ExpertSets, ExplicitSets, NestedSets};

use crate::rng::SimRng;
use crate::{ActionId, Error, Result};

/// Learning rates are never tuned below this.
pub const ETA_FLOOR: f64 = 1e-4;
/// Learning rates are clamped to this from above.
pub const ETA_CEIL: f64 = 1.0 - 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tuning {
    pub eta: f64,
    /// Uniform initial weight of every expert.
    pub w1: f64,
}

fn clamp_eta(eta: f64) -> f64 {
    if eta >= ETA_CEIL {
        log::warn!("tuned learning rate {eta} clamped to {ETA_CEIL}");
        ETA_CEIL
    } else {
        eta.max(ETA_FLOOR)
    }
}

fn check_tuning_inputs(m: usize, k: usize, t: u64) -> Result<()> {
    if m == 0 || k == 0 || t == 0 {
        return Err(Error::InvalidParameter(format!(
            "tuning needs M, K, T ≥ 1 (got M={m}, K={k}, T={t})"
        )));
    }
    Ok(())
}

/// Tuning for a basis of `n` sets:
/// `η = sqrt(M ln N / ((6K + 1) T))`, `w1 = M / (N K)`.
pub fn tune(n: usize, m: usize, k: usize, t: u64) -> Result<Tuning> {
    check_tuning_inputs(m, k, t)?;
    if n == 0 {
        return Err(Error::Empty("basis"));
    }
    let eta = (m as f64 * (n as f64).ln() / ((6 * k + 1) as f64 * t as f64)).sqrt();
    Ok(Tuning {
        eta: clamp_eta(eta),
        w1: m as f64 / (n as f64 * k as f64),
    })
}

/// Tuning for per-center ball families over `n_contexts` contexts holding
/// `n_sets` balls in total:
/// `η = sqrt(2 M ln N / ((6K + 1) T))`, `w1 = M / (n_sets K)`.
pub fn tune_balls(n_contexts: usize, n_sets: usize, m: usize, k: usize, t: u64) -> Result<Tuning> {
    check_tuning_inputs(m, k, t)?;
    if n_contexts == 0 || n_sets == 0 {
        return Err(Error::Empty("basis"));
    }
    let eta = (2.0 * m as f64 * (n_contexts as f64).ln() / ((6 * k + 1) as f64 * t as f64)).sqrt();
    Ok(Tuning {
        eta: clamp_eta(eta),
        w1: m as f64 / (n_sets as f64 * k as f64),
    })
}

/// The learner's move on one trial.
#[derive(Debug, Clone, PartialEq)]
pub struct Decision {
    /// Probabilities of the foreground actions; the rest is abstention.
    pub probs: Vec<f64>,
    pub action: ActionId,
}

/// Counters a learner may expose for run metadata.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LearnerStats {
    pub projections: u64,
    pub bisection_iterations: u64,
    pub max_bisection_iterations: usize,
    pub tree_rebuilds: u64,
}

/// A contextual bandit learner with an abstain option: `step` then `feedback`
/// once per trial.
pub trait ContextualLearner: Send {
    fn n_actions(&self) -> usize;

    fn step(&mut self, context: usize, rng: &mut SimRng) -> Result<Decision>;

    /// Reward of the action chosen by the last `step` (0 after abstaining).
    fn feedback(&mut self, reward: f64) -> Result<()>;

    fn stats(&self) -> LearnerStats {
        LearnerStats::default()
    }
}
