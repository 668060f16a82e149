use std::sync::Arc;

use super::{ContextualLearner, Decision, ExpertSets, LearnerStats};
use crate::bases::NestedFamily;
use crate::engine::{reward_estimate, Cba, CbaConfig};
use crate::rng::SimRng;
use crate::tree::SuffixProductTree;
use crate::{sample_action, ActionId, Error, ExpertAdvice, Result, StochasticAction};

fn check_rates(k: usize, eta: f64, w1: f64) -> Result<()> {
    if k == 0 {
        return Err(Error::InvalidParameter("K must be at least 1".into()));
    }
    if !(eta > 0.0 && eta < 1.0) {
        return Err(Error::InvalidParameter(format!("learning rate {eta} outside (0, 1)")));
    }
    if !(w1 > 0.0 && w1.is_finite()) {
        return Err(Error::NotPositive {
            what: "initial weight",
            value: w1,
        });
    }
    Ok(())
}

/// Turns summed awake weight per action into `s_t`, projecting when the total
/// confidence exceeds one. Returns the distribution and the projection scale.
fn combine(mut sums: Vec<f64>, stats: &mut LearnerStats) -> Result<(StochasticAction, f64)> {
    let total: f64 = sums.iter().sum();
    let scale = if total > 1.0 {
        stats.projections += 1;
        1.0 / total
    } else {
        1.0
    };
    for p in &mut sums {
        *p = (*p * scale).min(1.0);
    }
    Ok((StochasticAction::new(sums)?, scale))
}

/// Multipliers `scale · exp(η r̂_a)` applied to every awake expert of action `a`.
fn update_factors(pending: &Pending, eta: f64, reward: f64) -> Result<Vec<f64>> {
    let estimate = reward_estimate(&pending.distribution, pending.action, reward)?;
    Ok(estimate
        .iter()
        .map(|r| pending.scale * (eta * r).exp())
        .collect())
}

#[derive(Debug, Clone)]
struct Pending {
    context: usize,
    scale: f64,
    distribution: StochasticAction,
    action: ActionId,
}

impl Pending {
    fn decision(&self) -> Decision {
        Decision {
            probs: self.distribution.probs().to_vec(),
            action: self.action,
        }
    }
}

/// One weight per (element, action), `O(K · #awake)` per trial.
pub struct DirectAgent {
    sets: Arc<dyn ExpertSets>,
    k: usize,
    eta: f64,
    weights: Vec<f64>,
    awake: Vec<usize>,
    pending: Option<Pending>,
    stats: LearnerStats,
}

impl DirectAgent {
    pub fn new(sets: Arc<dyn ExpertSets>, k: usize, eta: f64, w1: f64) -> Result<Self> {
        check_rates(k, eta, w1)?;
        if sets.is_empty() {
            return Err(Error::Empty("basis"));
        }
        Ok(Self {
            weights: vec![w1; sets.len() * k],
            sets,
            k,
            eta,
            awake: Vec::new(),
            pending: None,
            stats: LearnerStats::default(),
        })
    }

    /// Weights indexed `element · K + action`.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
}

impl ContextualLearner for DirectAgent {
    fn n_actions(&self) -> usize {
        self.k
    }

    fn step(&mut self, context: usize, rng: &mut SimRng) -> Result<Decision> {
        if self.pending.is_some() {
            return Err(Error::Protocol("step called twice without feedback"));
        }
        self.sets.awake(context, &mut self.awake)?;
        let k = self.k;
        let mut sums = vec![0.0; k];
        for &j in &self.awake {
            for (s, w) in sums.iter_mut().zip(&self.weights[j * k..(j + 1) * k]) {
                *s += w;
            }
        }
        let (distribution, scale) = combine(sums, &mut self.stats)?;
        let action = sample_action(&distribution, rng);
        let pending = Pending {
            context,
            scale,
            distribution,
            action,
        };
        let decision = pending.decision();
        self.pending = Some(pending);
        Ok(decision)
    }

    fn feedback(&mut self, reward: f64) -> Result<()> {
        let pending = self
            .pending
            .take()
            .ok_or(Error::Protocol("feedback called before step"))?;
        let factors = update_factors(&pending, self.eta, reward)?;
        let k = self.k;
        for &j in &self.awake {
            for (w, f) in self.weights[j * k..(j + 1) * k].iter_mut().zip(&factors) {
                *w *= f;
                if !w.is_finite() {
                    return Err(Error::NonFinite {
                        what: "weight",
                        value: *w,
                    });
                }
            }
        }
        Ok(())
    }

    fn stats(&self) -> LearnerStats {
        self.stats
    }
}

/// Trees ahead of the current one whose paths are prefetched.
const PREFETCH_AHEAD: usize = 4;

/// One suffix-product tree per (family, action) over the family's order.
///
/// The weight of element `order[..len]` lives on the leaf at position
/// `len − 1`; all other leaves hold zero. The elements containing `x` are then
/// exactly those whose leaf lies at or after `x`'s position, so one suffix
/// query sums them and one suffix update rescales them, in `O(log N)`.
pub struct FastAgent {
    k: usize,
    eta: f64,
    n_contexts: usize,
    /// One tree per family, one lane per action.
    trees: Vec<SuffixProductTree>,
    /// Leaf position of every context in every tree, context-major so one
    /// trial reads a single row.
    positions: Vec<u32>,
    pending: Option<Pending>,
    stats: LearnerStats,
}

impl FastAgent {
    pub fn new(families: &[NestedFamily], k: usize, eta: f64, w1: f64) -> Result<Self> {
        check_rates(k, eta, w1)?;
        let n_contexts = families.first().ok_or(Error::Empty("families"))?.order.len();
        let mut trees = Vec::with_capacity(families.len());
        for family in families {
            if family.order.len() != n_contexts {
                return Err(Error::DimensionMismatch {
                    expected: n_contexts,
                    found: family.order.len(),
                });
            }
            let mut initial = vec![0.0; n_contexts * k];
            for &len in &family.prefix_lens {
                let z = family.order[len - 1];
                initial[z * k..(z + 1) * k].fill(w1);
            }
            trees.push(SuffixProductTree::build_lanes(&initial, k, &family.order)?);
        }
        let mut positions = vec![0; n_contexts * trees.len()];
        for (f, tree) in trees.iter().enumerate() {
            for (p, &x) in tree.order().iter().enumerate() {
                positions[x * trees.len() + f] = p as u32;
            }
        }
        Ok(Self {
            k,
            eta,
            n_contexts,
            trees,
            positions,
            pending: None,
            stats: LearnerStats::default(),
        })
    }

    pub fn trees(&self) -> &[SuffixProductTree] {
        &self.trees
    }
}

impl ContextualLearner for FastAgent {
    fn n_actions(&self) -> usize {
        self.k
    }

    fn step(&mut self, context: usize, rng: &mut SimRng) -> Result<Decision> {
        if self.pending.is_some() {
            return Err(Error::Protocol("step called twice without feedback"));
        }
        if context >= self.n_contexts {
            return Err(Error::UnknownContext(context));
        }
        let mut sums = vec![0.0; self.k];
        let mut lanes = vec![0.0; self.k];
        let row = &self.positions[context * self.trees.len()..(context + 1) * self.trees.len()];
        for (f, (tree, &p)) in self.trees.iter().zip(row).enumerate() {
            if let (Some(ahead), Some(&q)) = (self.trees.get(f + PREFETCH_AHEAD), row.get(f + PREFETCH_AHEAD)) {
                ahead.prefetch_path(q as usize);
            }
            tree.query_lanes_at(p as usize, &mut lanes)?;
            for (s, v) in sums.iter_mut().zip(&lanes) {
                *s += v;
            }
        }
        let (distribution, scale) = combine(sums, &mut self.stats)?;
        let action = sample_action(&distribution, rng);
        let pending = Pending {
            context,
            scale,
            distribution,
            action,
        };
        let decision = pending.decision();
        self.pending = Some(pending);
        Ok(decision)
    }

    fn feedback(&mut self, reward: f64) -> Result<()> {
        let pending = self
            .pending
            .take()
            .ok_or(Error::Protocol("feedback called before step"))?;
        let factors = update_factors(&pending, self.eta, reward)?;
        if factors.iter().any(|&f| f != 1.0) {
            let n = self.trees.len();
            let row = &self.positions[pending.context * n..(pending.context + 1) * n];
            for f in 0..n {
                if f + PREFETCH_AHEAD < n {
                    self.trees[f + PREFETCH_AHEAD].prefetch_path(row[f + PREFETCH_AHEAD] as usize);
                }
                self.trees[f].update_lanes_at(row[f] as usize, &factors)?;
            }
        }
        Ok(())
    }

    fn stats(&self) -> LearnerStats {
        LearnerStats {
            tree_rebuilds: self.trees.iter().map(SuffixProductTree::rebuilds).sum(),
            ..self.stats
        }
    }
}

/// The generic learner fed explicit advice for every (element, action)
/// expert. Quadratic in the basis size; a reference for the agents above.
pub struct EngineAgent {
    sets: Arc<dyn ExpertSets>,
    k: usize,
    cba: Cba,
    awake: Vec<usize>,
    advice: Option<ExpertAdvice>,
}

impl EngineAgent {
    pub fn new(sets: Arc<dyn ExpertSets>, k: usize, config: CbaConfig) -> Result<Self> {
        if config.initial_weights.len() != sets.len() * k {
            return Err(Error::DimensionMismatch {
                expected: sets.len() * k,
                found: config.initial_weights.len(),
            });
        }
        Ok(Self {
            sets,
            k,
            cba: Cba::new(config)?,
            awake: Vec::new(),
            advice: None,
        })
    }

    pub fn engine(&self) -> &Cba {
        &self.cba
    }
}

impl ContextualLearner for EngineAgent {
    fn n_actions(&self) -> usize {
        self.k
    }

    fn step(&mut self, context: usize, rng: &mut SimRng) -> Result<Decision> {
        self.sets.awake(context, &mut self.awake)?;
        let k = self.k;
        let mut rows = vec![0.0; self.sets.len() * k * k];
        for &j in &self.awake {
            for a in 0..k {
                rows[(j * k + a) * k + a] = 1.0;
            }
        }
        let advice = ExpertAdvice::from_flat(k, rows)?;
        let selection = self.cba.select(&advice, rng)?;
        self.advice = Some(advice);
        Ok(Decision {
            probs: selection.distribution.into_inner(),
            action: selection.action,
        })
    }

    fn feedback(&mut self, reward: f64) -> Result<()> {
        let advice = self
            .advice
            .take()
            .ok_or(Error::Protocol("feedback called before step"))?;
        self.cba.feedback(&advice, reward)
    }

    fn stats(&self) -> LearnerStats {
        let s = self.cba.stats();
        LearnerStats {
            projections: s.projections,
            bisection_iterations: s.bisection_iterations,
            max_bisection_iterations: s.max_bisection_iterations,
            tree_rebuilds: 0,
        }
    }
}
