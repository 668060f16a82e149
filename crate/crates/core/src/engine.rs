//! The confidence-rated learner with abstention.
//!
//! Each trial the learner projects its unnormalized weights `w_t` onto the set
//! of weight vectors whose advice combination is a valid stochastic action
//! (`Σ_i c_i w_i ≤ 1`), plays the combined stochastic action, builds an unbiased
//! reward estimate from the single observed reward and applies a multiplicative
//! update driven by each expert's estimated reward.
//!
//! Weights are kept strictly positive in exact arithmetic. In floating point an
//! expert whose estimated reward is very negative can underflow to `+0.0`; that
//! is treated as a vanished expert, not an error. NaN or infinite weights abort.

use rand::Rng;

use crate::action::{sample_action, ActionId, ExpertAdvice, StochasticAction};
use crate::{Error, Result};

pub const DEFAULT_BISECTION_TOL: f64 = 1e-10;
pub const DEFAULT_BISECTION_MAX_ITERS: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ProjectionMode {
    /// Bisect until `|Σ c_i w̃_i − 1| ≤ tol`.
    Exact,
    /// Clip weights to `clip`, then bisect on `[0, Z·E·ln(Z·E)]` until
    /// `Σ c_i w̃_i ∈ [1 − 1/horizon, 1]`.
    Certified { clip: f64, horizon: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProjectionSettings {
    pub mode: ProjectionMode,
    pub tol: f64,
    pub max_iters: usize,
}

impl Default for ProjectionSettings {
    fn default() -> Self {
        Self {
            mode: ProjectionMode::Exact,
            tol: DEFAULT_BISECTION_TOL,
            max_iters: DEFAULT_BISECTION_MAX_ITERS,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    pub weights: Vec<f64>,
    /// Lagrange multiplier; zero when the projection is the identity.
    pub lambda: f64,
    /// Number of evaluations of the constraint function during the search.
    pub iterations: usize,
    pub fired: bool,
}

fn constraint(w: &[f64], c: &[f64], lambda: f64) -> f64 {
    w.iter()
        .zip(c)
        .map(|(&wi, &ci)| ci * wi * (-lambda * ci).exp())
        .sum()
}

/// Newton steps on `λ` from a bisection point already within tolerance, kept
/// only while they shrink the residual. Brings the constraint to machine
/// precision for a couple of extra passes.
fn polish(w: &[f64], c: &[f64], mut lambda: f64, mut residual: f64, iterations: &mut usize) -> f64 {
    for _ in 0..3 {
        if residual == 0.0 {
            break;
        }
        let slope: f64 = w
            .iter()
            .zip(c)
            .map(|(&wi, &ci)| ci * ci * wi * (-lambda * ci).exp())
            .sum();
        if !(slope > 0.0) {
            break;
        }
        let next = lambda + residual / slope;
        let next_residual = constraint(w, c, next) - 1.0;
        *iterations += 1;
        if !(next >= 0.0 && next_residual.abs() < residual.abs()) {
            break;
        }
        lambda = next;
        residual = next_residual;
    }
    lambda
}

fn scaled(w: &[f64], c: &[f64], lambda: f64) -> Vec<f64> {
    w.iter()
        .zip(c)
        .map(|(&wi, &ci)| wi * (-lambda * ci).exp())
        .collect()
}

/// Upper bound on the certified search length: `⌈log₂(Z·E·T·ln(Z·E))⌉ + 2`.
pub fn certified_step_bound(clip: f64, experts: usize, horizon: u64) -> usize {
    let ze = clip * experts as f64;
    let span = ze * ze.ln().max(0.0) * horizon as f64;
    if span <= 1.0 {
        2
    } else {
        span.log2().ceil() as usize + 2
    }
}

/// Entropic projection of `w` onto `{v ≥ 0 : Σ_i c_i v_i ≤ 1}`.
///
/// The projection has the form `w̃_i = w_i exp(−λ c_i)`; `λ` is found by interval
/// bisection on the decreasing function `f(λ) = Σ_i c_i w_i exp(−λ c_i)`.
pub fn project(w: &[f64], c: &[f64], settings: &ProjectionSettings) -> Result<Projection> {
    if w.len() != c.len() {
        return Err(Error::DimensionMismatch {
            expected: w.len(),
            found: c.len(),
        });
    }
    for &wi in w {
        if !wi.is_finite() {
            return Err(Error::NonFinite {
                what: "weight",
                value: wi,
            });
        }
        if wi < 0.0 {
            return Err(Error::InvalidParameter(format!("negative weight {wi}")));
        }
    }
    if let Some(&ci) = c.iter().find(|ci| !(0.0..=1.0 + 1e-9).contains(*ci)) {
        return Err(Error::InvalidParameter(format!(
            "confidence {ci} outside [0, 1]"
        )));
    }

    let clipped;
    let w = match settings.mode {
        ProjectionMode::Certified { clip, .. } if w.iter().any(|&wi| wi > clip) => {
            clipped = w.iter().map(|&wi| wi.min(clip)).collect::<Vec<_>>();
            &clipped[..]
        }
        _ => w,
    };

    let identity = || Projection {
        weights: w.to_vec(),
        lambda: 0.0,
        iterations: 0,
        fired: false,
    };
    let at_zero = constraint(w, c, 0.0);
    if at_zero <= 1.0 {
        return Ok(identity());
    }
    if c.iter().zip(w).all(|(&ci, &wi)| ci == 0.0 || wi == 0.0) {
        return Err(Error::AllConfidencesZero);
    }

    match settings.mode {
        ProjectionMode::Exact => bisect_exact(w, c, settings.tol, settings.max_iters),
        ProjectionMode::Certified { clip, horizon } => {
            bisect_certified(w, c, clip, horizon, settings.max_iters)
        }
    }
}

fn bisect_exact(w: &[f64], c: &[f64], tol: f64, max_iters: usize) -> Result<Projection> {
    let mut iterations = 0;
    let mut lo = 0.0;
    let mut hi = 1.0;
    loop {
        let f = constraint(w, c, hi);
        iterations += 1;
        if (f - 1.0).abs() <= tol {
            let lambda = polish(w, c, hi, f - 1.0, &mut iterations);
            return Ok(Projection {
                weights: scaled(w, c, lambda),
                lambda,
                iterations,
                fired: true,
            });
        }
        if f < 1.0 {
            break;
        }
        if iterations >= max_iters {
            return Err(Error::BisectionDidNotConverge {
                iterations,
                residual: f - 1.0,
            });
        }
        lo = hi;
        hi *= 2.0;
    }
    loop {
        let mid = 0.5 * (lo + hi);
        let f = constraint(w, c, mid);
        iterations += 1;
        if (f - 1.0).abs() <= tol {
            let lambda = polish(w, c, mid, f - 1.0, &mut iterations);
            return Ok(Projection {
                weights: scaled(w, c, lambda),
                lambda,
                iterations,
                fired: true,
            });
        }
        if iterations >= max_iters || mid <= lo || mid >= hi {
            return Err(Error::BisectionDidNotConverge {
                iterations,
                residual: f - 1.0,
            });
        }
        if f > 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
}

fn bisect_certified(
    w: &[f64],
    c: &[f64],
    clip: f64,
    horizon: u64,
    max_iters: usize,
) -> Result<Projection> {
    let target_lo = 1.0 - 1.0 / horizon as f64;
    let ze = clip * w.len() as f64;
    let mut lo = 0.0;
    let mut hi = ze * ze.ln();
    let accept = |lambda: f64, iterations: usize| Projection {
        weights: scaled(w, c, lambda),
        lambda,
        iterations,
        fired: true,
    };

    let mut iterations = 1;
    let f_hi = constraint(w, c, hi);
    if (target_lo..=1.0).contains(&f_hi) {
        return Ok(accept(hi, iterations));
    }
    if f_hi > 1.0 {
        // Only reachable when some weight exceeds the clip bound.
        return Err(Error::BisectionDidNotConverge {
            iterations,
            residual: f_hi - 1.0,
        });
    }
    loop {
        let mid = 0.5 * (lo + hi);
        let f = constraint(w, c, mid);
        iterations += 1;
        if (target_lo..=1.0).contains(&f) {
            return Ok(accept(mid, iterations));
        }
        if iterations >= max_iters || mid <= lo || mid >= hi {
            return Err(Error::BisectionDidNotConverge {
                iterations,
                residual: f - 1.0,
            });
        }
        if f > 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
}

/// Importance-weighted reward estimate `r̂_a = 1 − 1{a = a_t}(1 − r)/s_{a_t}`.
///
/// One-sided: every entry is at most one. Abstaining yields the all-ones vector.
pub fn reward_estimate(s: &StochasticAction, action: ActionId, observed: f64) -> Result<Vec<f64>> {
    let mut estimate = vec![1.0; s.k()];
    if let ActionId::Play(a) = action {
        if a >= s.k() {
            return Err(Error::DimensionMismatch {
                expected: s.k(),
                found: a + 1,
            });
        }
        let p = s.probs()[a];
        if p <= 0.0 {
            return Err(Error::ZeroProbabilityAction { action: a });
        }
        estimate[a] = 1.0 - (1.0 - observed) / p;
    }
    Ok(estimate)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CbaConfig {
    pub eta: f64,
    pub initial_weights: Vec<f64>,
    pub projection: ProjectionMode,
    pub bisection_tol: f64,
    pub bisection_max_iters: usize,
}

impl CbaConfig {
    pub fn new(eta: f64, initial_weights: Vec<f64>) -> Self {
        Self {
            eta,
            initial_weights,
            projection: ProjectionMode::Exact,
            bisection_tol: DEFAULT_BISECTION_TOL,
            bisection_max_iters: DEFAULT_BISECTION_MAX_ITERS,
        }
    }

    pub fn certified(mut self, clip: f64, horizon: u64) -> Self {
        self.projection = ProjectionMode::Certified { clip, horizon };
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eta > 0.0 && self.eta < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "learning rate {} outside (0, 1)",
                self.eta
            )));
        }
        if self.initial_weights.is_empty() {
            return Err(Error::Empty("initial weights"));
        }
        if let Some(&w) = self
            .initial_weights
            .iter()
            .find(|w| !(**w > 0.0 && w.is_finite()))
        {
            return Err(Error::NotPositive {
                what: "initial weight",
                value: w,
            });
        }
        if !(self.bisection_tol > 0.0) || self.bisection_max_iters == 0 {
            return Err(Error::InvalidParameter("bisection settings".into()));
        }
        if let ProjectionMode::Certified { clip, horizon } = self.projection {
            let max_w = self.initial_weights.iter().cloned().fold(0.0, f64::max);
            if !(clip >= max_w) || horizon == 0 {
                return Err(Error::InvalidParameter(format!(
                    "certified clip {clip} must dominate the initial weights and horizon must be positive"
                )));
            }
        }
        Ok(())
    }

    fn projection_settings(&self) -> ProjectionSettings {
        ProjectionSettings {
            mode: self.projection,
            tol: self.bisection_tol,
            max_iters: self.bisection_max_iters,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EngineStats {
    pub trials: u64,
    pub projections: u64,
    pub bisection_iterations: u64,
    pub max_bisection_iterations: usize,
    /// Smallest probability of a selected foreground action so far.
    pub min_selected_probability: f64,
}

impl Default for EngineStats {
    fn default() -> Self {
        Self {
            trials: 0,
            projections: 0,
            bisection_iterations: 0,
            max_bisection_iterations: 0,
            min_selected_probability: f64::INFINITY,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    pub distribution: StochasticAction,
    pub action: ActionId,
    pub lambda: f64,
}

#[derive(Debug, Clone)]
struct Pending {
    projected: Vec<f64>,
    distribution: StochasticAction,
    action: ActionId,
}

/// Learner state: one instance per run, driven by alternating
/// [`Cba::select`] and [`Cba::update`] (or [`Cba::feedback`]).
#[derive(Debug, Clone)]
pub struct Cba {
    config: CbaConfig,
    weights: Vec<f64>,
    pending: Option<Pending>,
    stats: EngineStats,
}

impl Cba {
    pub fn new(config: CbaConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            weights: config.initial_weights.clone(),
            config,
            pending: None,
            stats: EngineStats::default(),
        })
    }

    pub fn config(&self) -> &CbaConfig {
        &self.config
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `w̃_t`, available between `select` and `update`.
    pub fn projected(&self) -> Option<&[f64]> {
        self.pending.as_ref().map(|p| &p.projected[..])
    }

    pub fn stats(&self) -> &EngineStats {
        &self.stats
    }

    pub fn trial_index(&self) -> u64 {
        self.stats.trials
    }

    pub fn select<R: Rng + ?Sized>(
        &mut self,
        advice: &ExpertAdvice,
        rng: &mut R,
    ) -> Result<Selection> {
        if self.pending.is_some() {
            return Err(Error::Protocol("select called twice without feedback"));
        }
        if advice.experts() != self.weights.len() {
            return Err(Error::DimensionMismatch {
                expected: self.weights.len(),
                found: advice.experts(),
            });
        }
        if let ProjectionMode::Certified { clip, .. } = self.config.projection {
            for w in &mut self.weights {
                *w = w.min(clip);
            }
        }
        let projection = project(
            &self.weights,
            advice.confidences(),
            &self.config.projection_settings(),
        )?;
        if projection.fired {
            self.stats.projections += 1;
            self.stats.bisection_iterations += projection.iterations as u64;
            self.stats.max_bisection_iterations =
                self.stats.max_bisection_iterations.max(projection.iterations);
        }

        let mut probs = vec![0.0; advice.k()];
        for (row, &wi) in advice.rows().zip(&projection.weights) {
            if wi == 0.0 {
                continue;
            }
            for (p, &e) in probs.iter_mut().zip(row) {
                *p += wi * e;
            }
        }
        for p in &mut probs {
            *p = p.clamp(0.0, 1.0);
        }
        let distribution = StochasticAction::new(probs)?;
        let action = sample_action(&distribution, rng);
        if let ActionId::Play(a) = action {
            self.stats.min_selected_probability =
                self.stats.min_selected_probability.min(distribution.probs()[a]);
        }
        self.pending = Some(Pending {
            projected: projection.weights,
            distribution: distribution.clone(),
            action,
        });
        Ok(Selection {
            distribution,
            action,
            lambda: projection.lambda,
        })
    }

    /// Applies `w_{t+1,i} = w̃_{t,i} exp(η e_t^i · r̂_t)`.
    pub fn update(&mut self, advice: &ExpertAdvice, reward_estimate: &[f64]) -> Result<()> {
        let pending = self
            .pending
            .take()
            .ok_or(Error::Protocol("update called before select"))?;
        if advice.experts() != self.weights.len() || reward_estimate.len() != advice.k() {
            self.pending = Some(pending);
            return Err(Error::DimensionMismatch {
                expected: advice.k(),
                found: reward_estimate.len(),
            });
        }
        let eta = self.config.eta;
        let mut next = pending.projected;
        for (w, row) in next.iter_mut().zip(advice.rows()) {
            let gain: f64 = row.iter().zip(reward_estimate).map(|(e, r)| e * r).sum();
            *w *= (eta * gain).exp();
            if !w.is_finite() {
                return Err(Error::NonFinite {
                    what: "weight",
                    value: *w,
                });
            }
        }
        self.weights = next;
        self.stats.trials += 1;
        Ok(())
    }

    /// Builds the reward estimate for the pending action and updates.
    pub fn feedback(&mut self, advice: &ExpertAdvice, observed: f64) -> Result<()> {
        let pending = self
            .pending
            .as_ref()
            .ok_or(Error::Protocol("feedback called before select"))?;
        let estimate = reward_estimate(&pending.distribution, pending.action, observed)?;
        self.update(advice, &estimate)
    }

    pub fn pending_action(&self) -> Option<ActionId> {
        self.pending.as_ref().map(|p| p.action)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::action::unnormalized_relative_entropy;
    use crate::rng;
    use proptest::prelude::*;
    use rand::Rng;

    fn exact() -> ProjectionSettings {
        ProjectionSettings::default()
    }

    #[test]
    fn projection_closed_form_equal_confidences() {
        let p = project(&[2.0, 2.0], &[1.0, 1.0], &exact()).unwrap();
        assert!(p.fired);
        assert!((p.lambda - 4f64.ln()).abs() < 1e-9);
        for w in &p.weights {
            assert!((w - 0.5).abs() < 1e-10);
        }
    }

    #[test]
    fn projection_quadratic_case() {
        // x = e^{-λ/2} solves x² + x/2 = 1.
        let x = -0.25 + (0.0625f64 + 1.0).sqrt();
        let lambda = -2.0 * x.ln();
        let p = project(&[1.0, 1.0], &[1.0, 0.5], &exact()).unwrap();
        assert!((p.lambda - lambda).abs() < 1e-9);
        assert!((p.lambda - 0.494933).abs() < 1e-6);
        assert!((p.weights[0] - 0.609612).abs() < 1e-6);
        assert!((p.weights[1] - 0.780776).abs() < 1e-6);
        assert!((p.weights[0] + 0.5 * p.weights[1] - 1.0).abs() < 1e-10);
    }

    #[test]
    fn projection_identity_when_feasible() {
        let p = project(&[0.3, 0.3], &[1.0, 1.0], &exact()).unwrap();
        assert!(!p.fired);
        assert_eq!(p.lambda, 0.0);
        assert_eq!(p.weights, vec![0.3, 0.3]);
    }

    #[test]
    fn projection_rejects_bad_input() {
        assert!(project(&[1.0], &[1.0, 1.0], &exact()).is_err());
        assert!(project(&[f64::NAN], &[1.0], &exact()).is_err());
        assert!(project(&[1.0], &[1.5], &exact()).is_err());
    }

    #[test]
    fn projection_reports_iteration_exhaustion() {
        let settings = ProjectionSettings {
            max_iters: 3,
            ..exact()
        };
        assert!(matches!(
            project(&[5.0, 7.0], &[0.3, 0.9], &settings),
            Err(Error::BisectionDidNotConverge { .. })
        ));
    }

    #[test]
    fn certified_projection_meets_target_within_bound() {
        let w = [3.0, 0.5, 2.0, 1.0];
        let c = [0.9, 0.2, 0.6, 1.0];
        let settings = ProjectionSettings {
            mode: ProjectionMode::Certified {
                clip: 3.0,
                horizon: 1000,
            },
            ..exact()
        };
        let p = project(&w, &c, &settings).unwrap();
        let total: f64 = p.weights.iter().zip(c).map(|(w, c)| w * c).sum();
        assert!((1.0 - 1e-3..=1.0).contains(&total), "{total}");
        assert!(p.iterations <= certified_step_bound(3.0, 4, 1000));
    }

    #[test]
    fn certified_projection_clips() {
        let settings = ProjectionSettings {
            mode: ProjectionMode::Certified {
                clip: 0.2,
                horizon: 10,
            },
            ..exact()
        };
        let p = project(&[5.0, 0.1], &[1.0, 1.0], &settings).unwrap();
        assert!(!p.fired);
        assert_eq!(p.weights, vec![0.2, 0.1]);
    }

    #[test]
    fn select_examples() {
        let mut r = rng::stream(0, 0);
        let mut single = Cba::new(CbaConfig::new(0.1, vec![1.0])).unwrap();
        let advice = ExpertAdvice::from_flat(2, vec![1.0, 0.0]).unwrap();
        let sel = single.select(&advice, &mut r).unwrap();
        assert_eq!(sel.distribution.probs(), &[1.0, 0.0]);
        assert_eq!(sel.action, ActionId::Play(0));

        let mut two = Cba::new(CbaConfig::new(0.1, vec![2.0, 2.0])).unwrap();
        let advice = ExpertAdvice::from_flat(2, vec![1.0, 0.0, 0.0, 1.0]).unwrap();
        let sel = two.select(&advice, &mut r).unwrap();
        for (p, w) in sel.distribution.probs().iter().zip(two.projected().unwrap()) {
            assert!((p - 0.5).abs() < 1e-10);
            assert!((w - 0.5).abs() < 1e-10);
        }

        let mut partial = Cba::new(CbaConfig::new(0.1, vec![0.4])).unwrap();
        let advice = ExpertAdvice::from_flat(2, vec![0.5, 0.5]).unwrap();
        let sel = partial.select(&advice, &mut r).unwrap();
        assert!((sel.distribution.probs()[0] - 0.2).abs() < 1e-15);
        assert!((sel.distribution.probs()[1] - 0.2).abs() < 1e-15);
        assert!((sel.distribution.abstain_probability() - 0.6).abs() < 1e-12);
    }

    #[test]
    fn protocol_errors() {
        let mut r = rng::stream(0, 0);
        let mut cba = Cba::new(CbaConfig::new(0.1, vec![1.0])).unwrap();
        let advice = ExpertAdvice::from_flat(1, vec![1.0]).unwrap();
        assert!(matches!(cba.update(&advice, &[1.0]), Err(Error::Protocol(_))));
        cba.select(&advice, &mut r).unwrap();
        assert!(matches!(cba.select(&advice, &mut r), Err(Error::Protocol(_))));
        cba.feedback(&advice, 1.0).unwrap();
        assert_eq!(cba.trial_index(), 1);
        assert!(cba.projected().is_none());
    }

    #[test]
    fn config_validation() {
        assert!(Cba::new(CbaConfig::new(1.0, vec![1.0])).is_err());
        assert!(Cba::new(CbaConfig::new(0.5, vec![0.0])).is_err());
        assert!(Cba::new(CbaConfig::new(0.5, vec![2.0]).certified(1.0, 10)).is_err());
        assert!(Cba::new(CbaConfig::new(0.5, vec![2.0]).certified(2.0, 10)).is_ok());
    }

    #[test]
    fn reward_estimate_examples() {
        let s = StochasticAction::new(vec![0.5, 0.25]).unwrap();
        assert_eq!(reward_estimate(&s, ActionId::Abstain, 0.0).unwrap(), vec![1.0, 1.0]);
        assert_eq!(reward_estimate(&s, ActionId::Play(0), 0.5).unwrap(), vec![0.0, 1.0]);
        assert_eq!(reward_estimate(&s, ActionId::Play(1), 1.0).unwrap(), vec![1.0, 1.0]);
        let zero = StochasticAction::new(vec![0.0, 0.5]).unwrap();
        assert!(matches!(
            reward_estimate(&zero, ActionId::Play(0), 0.5),
            Err(Error::ZeroProbabilityAction { action: 0 })
        ));
    }

    fn force_pending(cba: &mut Cba, projected: Vec<f64>, k: usize) {
        cba.pending = Some(Pending {
            projected,
            distribution: StochasticAction::abstain(k),
            action: ActionId::Abstain,
        });
    }

    #[test]
    fn update_examples() {
        let mut cba = Cba::new(CbaConfig::new(0.1, vec![0.5])).unwrap();
        let awake = ExpertAdvice::from_flat(2, vec![1.0, 0.0]).unwrap();
        force_pending(&mut cba, vec![0.5], 2);
        cba.update(&awake, &[1.0, 1.0]).unwrap();
        assert!((cba.weights()[0] - 0.5 * 0.1f64.exp()).abs() < 1e-15);
        assert!((cba.weights()[0] - 0.552585).abs() < 1e-6);

        let second = ExpertAdvice::from_flat(2, vec![0.0, 1.0]).unwrap();
        force_pending(&mut cba, vec![0.5], 2);
        cba.update(&second, &[0.0, -3.0]).unwrap();
        assert!((cba.weights()[0] - 0.370409).abs() < 1e-6);

        let asleep = ExpertAdvice::from_flat(2, vec![0.0, 0.0]).unwrap();
        force_pending(&mut cba, vec![0.5], 2);
        cba.update(&asleep, &[-50.0, 1.0]).unwrap();
        assert_eq!(cba.weights()[0], 0.5);
    }

    #[test]
    fn all_experts_abstaining() {
        let mut r = rng::stream(0, 0);
        let eta = 0.2;
        let mut cba = Cba::new(CbaConfig::new(eta, vec![3.0, 0.5])).unwrap();
        let advice = ExpertAdvice::from_flat(2, vec![0.0; 4]).unwrap();
        let sel = cba.select(&advice, &mut r).unwrap();
        assert_eq!(sel.action, ActionId::Abstain);
        cba.feedback(&advice, 0.0).unwrap();
        // Zero advice means zero gain: weights are untouched.
        assert_eq!(cba.weights(), &[3.0, 0.5]);
    }

    #[test]
    fn nan_reward_estimate_aborts() {
        let mut r = rng::stream(0, 0);
        let mut cba = Cba::new(CbaConfig::new(0.2, vec![1.0])).unwrap();
        let advice = ExpertAdvice::from_flat(1, vec![1.0]).unwrap();
        cba.select(&advice, &mut r).unwrap();
        let err = cba.update(&advice, &[f64::NAN]).unwrap_err();
        assert!(err.is_numeric_abort());
    }

    #[test]
    fn weights_stay_positive_over_long_horizon() {
        // Advice and rewards keep |r̂| bounded because every action has mass ≥ 0.2.
        let mut r = rng::stream(5, 0);
        let mut draw = rng::stream(5, 1);
        let advice = ExpertAdvice::from_flat(
            2,
            vec![0.6, 0.4, 0.4, 0.6, 0.5, 0.5, 0.2, 0.2],
        )
        .unwrap();
        let mut cba = Cba::new(CbaConfig::new(0.05, vec![0.4; 4])).unwrap();
        for _ in 0..100_000 {
            cba.select(&advice, &mut r).unwrap();
            let reward = if draw.random::<f64>() < 0.5 { 1.0 } else { -1.0 };
            cba.feedback(&advice, reward).unwrap();
            assert!(cba.weights().iter().all(|w| *w > 0.0 && w.is_finite()));
        }
    }

    fn feasible_pair() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
        (1usize..10).prop_flat_map(|e| {
            (
                prop::collection::vec(0.01f64..20.0, e),
                prop::collection::vec(0.0f64..=1.0, e),
            )
        })
    }

    proptest! {
        #[test]
        fn projection_has_kkt_form((w, c) in feasible_pair()) {
            let p = project(&w, &c, &exact()).unwrap();
            let total: f64 = p.weights.iter().zip(&c).map(|(a, b)| a * b).sum();
            if p.fired {
                prop_assert!((total - 1.0).abs() <= 1e-10);
                let lambda = c.iter().zip(&w).zip(&p.weights)
                    .find(|((ci, _), _)| **ci > 0.1)
                    .map(|((ci, wi), pi)| -(pi / wi).ln() / ci);
                if let Some(lambda) = lambda {
                    for ((ci, wi), pi) in c.iter().zip(&w).zip(&p.weights) {
                        let predicted = wi * (-lambda * ci).exp();
                        prop_assert!((predicted - pi).abs() <= 1e-8 * wi.max(1.0));
                        prop_assert!(*pi <= *wi);
                    }
                }
            } else {
                prop_assert!(total <= 1.0);
                prop_assert_eq!(&p.weights, &w);
            }
        }

        #[test]
        fn projection_contracts_entropy(
            (w, c) in feasible_pair(),
            raw_u in prop::collection::vec(0.0f64..1.0, 10),
        ) {
            let p = project(&w, &c, &exact()).unwrap();
            let mut u: Vec<f64> = raw_u[..w.len()].to_vec();
            let load: f64 = u.iter().zip(&c).map(|(a, b)| a * b).sum();
            if load > 1.0 {
                for ui in &mut u { *ui /= load; }
            }
            let before = unnormalized_relative_entropy(&u, &w).unwrap();
            let positive: Vec<f64> = p.weights.iter().map(|x| x.max(f64::MIN_POSITIVE)).collect();
            let after = unnormalized_relative_entropy(&u, &positive).unwrap();
            prop_assert!(before + 1e-9 * before.abs().max(1.0) >= after);
        }
    }
}
