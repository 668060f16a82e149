//! EXP3 per context and EXP4, with abstention as arm `K` (zero-based).
//!
//! Both use raw rewards in `[−1, 1]` with the importance-weighted estimate
//! `r / p`. Uniform mixing keeps every arm probability at least `γ/(K+1)`, so
//! with learning rate `γ/(K+1)` each exponent stays within `[−1, 1]`.

use std::f64::consts::E;
use std::sync::Arc;

use crate::contextual::{ContextualLearner, Decision, ExpertSets};
use crate::rng::SimRng;
use crate::{sample_action, ActionId, Error, Result, StochasticAction};

/// `γ = min(1, sqrt(A ln E / ((e − 1) T)))` for `A` arms, `E` experts and
/// horizon `T`.
pub fn exploration_rate(arms: usize, experts: usize, horizon: u64) -> f64 {
    let t = horizon.max(1) as f64;
    ((arms as f64 * (experts.max(2) as f64).ln()) / ((E - 1.0) * t))
        .sqrt()
        .min(1.0)
}

/// Normalised, uniformly mixed probabilities from log-weights.
fn mixed(log_w: &[f64], gamma: f64) -> Vec<f64> {
    let max = log_w.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = log_w.iter().map(|l| (l - max).exp()).collect();
    let total: f64 = w.iter().sum();
    let uniform = gamma / log_w.len() as f64;
    w.iter().map(|x| (1.0 - gamma) * x / total + uniform).collect()
}

/// Draws an arm from a full distribution over `K + 1` arms with one uniform
/// variate; the last arm is abstention.
fn draw_arm(probs: &[f64], rng: &mut SimRng) -> Result<(Vec<f64>, ActionId)> {
    let k = probs.len() - 1;
    let foreground: Vec<f64> = probs[..k].iter().map(|p| p.clamp(0.0, 1.0)).collect();
    let s = StochasticAction::new(foreground)?;
    let action = sample_action(&s, rng);
    Ok((s.into_inner(), action))
}

fn arm_index(action: ActionId, k: usize) -> usize {
    action.index().unwrap_or(k)
}

#[derive(Debug, Clone)]
struct Pending {
    context: usize,
    probs: Vec<f64>,
    action: ActionId,
}

/// An independent EXP3 learner over `K + 1` arms for every context.
#[derive(Debug, Clone)]
pub struct Exp3PerContext {
    k: usize,
    gamma: f64,
    log_w: Vec<f64>,
    pending: Option<Pending>,
}

impl Exp3PerContext {
    pub fn new(n_contexts: usize, k: usize, gamma: f64) -> Result<Self> {
        if k == 0 || n_contexts == 0 {
            return Err(Error::InvalidParameter("EXP3 needs K ≥ 1 and N ≥ 1".into()));
        }
        if !(gamma > 0.0 && gamma <= 1.0) {
            return Err(Error::InvalidParameter(format!("exploration rate {gamma} outside (0, 1]")));
        }
        Ok(Self {
            k,
            gamma,
            log_w: vec![0.0; n_contexts * (k + 1)],
            pending: None,
        })
    }

    /// Tuned for the expected number of visits `ceil(T / N)` of each context.
    pub fn tuned(n_contexts: usize, k: usize, horizon: u64) -> Result<Self> {
        let visits = horizon.div_ceil(n_contexts.max(1) as u64);
        Self::new(n_contexts, k, exploration_rate(k + 1, k + 1, visits))
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// Current distribution over the `K + 1` arms at `context`.
    pub fn distribution(&self, context: usize) -> Result<Vec<f64>> {
        let arms = self.k + 1;
        let row = self
            .log_w
            .get(context * arms..(context + 1) * arms)
            .ok_or(Error::UnknownContext(context))?;
        Ok(mixed(row, self.gamma))
    }
}

impl ContextualLearner for Exp3PerContext {
    fn n_actions(&self) -> usize {
        self.k
    }

    fn step(&mut self, context: usize, rng: &mut SimRng) -> Result<Decision> {
        if self.pending.is_some() {
            return Err(Error::Protocol("step called twice without feedback"));
        }
        let full = self.distribution(context)?;
        let (probs, action) = draw_arm(&full, rng)?;
        self.pending = Some(Pending {
            context,
            probs: full,
            action,
        });
        Ok(Decision { probs, action })
    }

    fn feedback(&mut self, reward: f64) -> Result<()> {
        let p = self
            .pending
            .take()
            .ok_or(Error::Protocol("feedback called before step"))?;
        let arms = self.k + 1;
        let arm = arm_index(p.action, self.k);
        self.log_w[p.context * arms + arm] += self.gamma / arms as f64 * reward / p.probs[arm];
        Ok(())
    }
}

/// EXP4 over explicit advice: each expert gives a distribution over `K + 1`
/// arms (row-major, `E × (K + 1)`).
#[derive(Debug, Clone)]
pub struct Exp4 {
    arms: usize,
    gamma: f64,
    log_w: Vec<f64>,
    pending: Option<(Vec<f64>, Vec<f64>, usize)>,
}

impl Exp4 {
    pub fn new(experts: usize, k: usize, gamma: f64) -> Result<Self> {
        if experts == 0 || k == 0 {
            return Err(Error::InvalidParameter("EXP4 needs E ≥ 1 and K ≥ 1".into()));
        }
        if !(gamma > 0.0 && gamma <= 1.0) {
            return Err(Error::InvalidParameter(format!("exploration rate {gamma} outside (0, 1]")));
        }
        Ok(Self {
            arms: k + 1,
            gamma,
            log_w: vec![0.0; experts],
            pending: None,
        })
    }

    /// Arm distribution for `advice` (without drawing).
    pub fn distribution(&self, advice: &[f64]) -> Result<Vec<f64>> {
        if advice.len() != self.log_w.len() * self.arms {
            return Err(Error::DimensionMismatch {
                expected: self.log_w.len() * self.arms,
                found: advice.len(),
            });
        }
        let q = mixed(&self.log_w, 0.0);
        let mut p = vec![self.gamma / self.arms as f64; self.arms];
        for (qi, row) in q.iter().zip(advice.chunks_exact(self.arms)) {
            for (pj, &xi) in p.iter_mut().zip(row) {
                *pj += (1.0 - self.gamma) * qi * xi;
            }
        }
        Ok(p)
    }

    pub fn select(&mut self, advice: &[f64], rng: &mut SimRng) -> Result<Decision> {
        if self.pending.is_some() {
            return Err(Error::Protocol("select called twice without feedback"));
        }
        let full = self.distribution(advice)?;
        let (probs, action) = draw_arm(&full, rng)?;
        let arm = arm_index(action, self.arms - 1);
        self.pending = Some((advice.to_vec(), full, arm));
        Ok(Decision { probs, action })
    }

    pub fn feedback(&mut self, reward: f64) -> Result<()> {
        let (advice, probs, arm) = self
            .pending
            .take()
            .ok_or(Error::Protocol("feedback called before select"))?;
        let estimate = reward / probs[arm];
        let eta = self.gamma / self.arms as f64;
        for (lw, row) in self.log_w.iter_mut().zip(advice.chunks_exact(self.arms)) {
            *lw += eta * row[arm] * estimate;
        }
        Ok(())
    }
}

/// EXP4 with the same (element, action) specialists as the contextual
/// learner plus one always-abstain expert. A sleeping specialist advises
/// abstention.
pub struct Exp4Contextual {
    sets: Arc<dyn ExpertSets>,
    k: usize,
    gamma: f64,
    /// `element · K + action`, then the abstain expert last.
    log_w: Vec<f64>,
    awake: Vec<usize>,
    pending: Option<(Vec<f64>, ActionId)>,
}

impl Exp4Contextual {
    pub fn new(sets: Arc<dyn ExpertSets>, k: usize, gamma: f64) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidParameter("K must be at least 1".into()));
        }
        if !(gamma > 0.0 && gamma <= 1.0) {
            return Err(Error::InvalidParameter(format!("exploration rate {gamma} outside (0, 1]")));
        }
        Ok(Self {
            log_w: vec![0.0; sets.len() * k + 1],
            sets,
            k,
            gamma,
            awake: Vec::new(),
            pending: None,
        })
    }

    pub fn tuned(sets: Arc<dyn ExpertSets>, k: usize, horizon: u64) -> Result<Self> {
        let experts = sets.len() * k + 1;
        Self::new(sets, k, exploration_rate(k + 1, experts, horizon))
    }

    pub fn experts(&self) -> usize {
        self.log_w.len()
    }

    /// The dense advice matrix at `context`, for testing against [`Exp4`].
    pub fn advice(&self, context: usize) -> Result<Vec<f64>> {
        let mut awake = Vec::new();
        self.sets.awake(context, &mut awake)?;
        let arms = self.k + 1;
        let mut rows = vec![0.0; self.log_w.len() * arms];
        for i in 0..self.log_w.len() {
            rows[i * arms + self.k] = 1.0;
        }
        for &j in &awake {
            for a in 0..self.k {
                let i = j * self.k + a;
                rows[i * arms + self.k] = 0.0;
                rows[i * arms + a] = 1.0;
            }
        }
        Ok(rows)
    }
}

impl ContextualLearner for Exp4Contextual {
    fn n_actions(&self) -> usize {
        self.k
    }

    fn step(&mut self, context: usize, rng: &mut SimRng) -> Result<Decision> {
        if self.pending.is_some() {
            return Err(Error::Protocol("step called twice without feedback"));
        }
        self.sets.awake(context, &mut self.awake)?;
        let k = self.k;
        let arms = k + 1;
        let max = self.log_w.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let total: f64 = self.log_w.iter().map(|l| (l - max).exp()).sum();
        let mut mass = vec![0.0; arms];
        let mut awake_mass = 0.0;
        for &j in &self.awake {
            for (m, l) in mass.iter_mut().zip(&self.log_w[j * k..(j + 1) * k]) {
                let q = (l - max).exp() / total;
                *m += q;
                awake_mass += q;
            }
        }
        mass[k] = (1.0 - awake_mass).max(0.0);
        let full: Vec<f64> = mass
            .iter()
            .map(|m| (1.0 - self.gamma) * m + self.gamma / arms as f64)
            .collect();
        let (probs, action) = draw_arm(&full, rng)?;
        self.pending = Some((full, action));
        Ok(Decision { probs, action })
    }

    fn feedback(&mut self, reward: f64) -> Result<()> {
        let (probs, action) = self
            .pending
            .take()
            .ok_or(Error::Protocol("feedback called before step"))?;
        let k = self.k;
        let arm = arm_index(action, k);
        let step = self.gamma / (k + 1) as f64 * reward / probs[arm];
        if step == 0.0 {
            return Ok(());
        }
        match action {
            ActionId::Play(a) => {
                for &j in &self.awake {
                    self.log_w[j * k + a] += step;
                }
            }
            ActionId::Abstain => {
                // Every asleep specialist and the abstain expert advised this.
                let mut advised = vec![true; self.log_w.len()];
                for &j in &self.awake {
                    advised[j * k..(j + 1) * k].fill(false);
                }
                for (lw, on) in self.log_w.iter_mut().zip(advised) {
                    if on {
                        *lw += step;
                    }
                }
            }
        }
        Ok(())
    }
}
