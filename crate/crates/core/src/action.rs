//! Actions, stochastic actions and expert advice.
//!
//! Foreground actions are indexed `0..K` internally. A stochastic action is a
//! sub-probability vector over the foreground actions; the missing mass is the
//! probability of abstaining, whose reward is always zero.

use rand::Rng;

use crate::{Error, Result};

/// Slack allowed on `‖s‖₁ ≤ 1` to absorb summation error.
pub const MASS_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ActionId {
    /// Foreground action, zero-based.
    Play(usize),
    Abstain,
}

impl ActionId {
    pub fn is_abstain(self) -> bool {
        matches!(self, ActionId::Abstain)
    }

    pub fn index(self) -> Option<usize> {
        match self {
            ActionId::Play(a) => Some(a),
            ActionId::Abstain => None,
        }
    }
}

fn check_mass(probs: &[f64]) -> Result<f64> {
    let mut total = 0.0;
    for (a, &p) in probs.iter().enumerate() {
        if !p.is_finite() || !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidStochasticAction(format!(
                "entry {a} = {p} outside [0, 1]"
            )));
        }
        total += p;
    }
    if total > 1.0 + MASS_TOLERANCE {
        return Err(Error::InvalidStochasticAction(format!(
            "total mass {total} exceeds 1"
        )));
    }
    Ok(total)
}

/// A vector in `[0,1]^K` with 1-norm at most one.
#[derive(Debug, Clone, PartialEq)]
pub struct StochasticAction {
    probs: Vec<f64>,
}

impl StochasticAction {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        check_mass(&probs)?;
        Ok(Self { probs })
    }

    /// The stochastic action that always abstains.
    pub fn abstain(k: usize) -> Self {
        Self { probs: vec![0.0; k] }
    }

    /// Point mass on a single foreground action.
    pub fn point(k: usize, action: usize) -> Self {
        let mut probs = vec![0.0; k];
        probs[action] = 1.0;
        Self { probs }
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn k(&self) -> usize {
        self.probs.len()
    }

    pub fn mass(&self) -> f64 {
        self.probs.iter().sum()
    }

    pub fn abstain_probability(&self) -> f64 {
        (1.0 - self.mass()).max(0.0)
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.probs
    }
}

/// Per-trial advice of `E` experts over `K` actions, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpertAdvice {
    k: usize,
    rows: Vec<f64>,
    confidences: Vec<f64>,
}

impl ExpertAdvice {
    /// Builds advice from a flat row-major `E × K` matrix.
    pub fn from_flat(k: usize, rows: Vec<f64>) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidParameter("K must be at least 1".into()));
        }
        if !rows.len().is_multiple_of(k) {
            return Err(Error::DimensionMismatch {
                expected: rows.len().div_ceil(k) * k,
                found: rows.len(),
            });
        }
        let confidences = rows
            .chunks_exact(k)
            .map(check_mass)
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            k,
            rows,
            confidences,
        })
    }

    pub fn from_rows(rows: &[StochasticAction]) -> Result<Self> {
        let k = rows
            .first()
            .map(StochasticAction::k)
            .ok_or(Error::Empty("expert advice"))?;
        let mut flat = Vec::with_capacity(rows.len() * k);
        for row in rows {
            if row.k() != k {
                return Err(Error::DimensionMismatch {
                    expected: k,
                    found: row.k(),
                });
            }
            flat.extend_from_slice(row.probs());
        }
        Self::from_flat(k, flat)
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn experts(&self) -> usize {
        self.confidences.len()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.rows[i * self.k..(i + 1) * self.k]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.rows.chunks_exact(self.k)
    }

    /// `c_t^i = ‖e_t^i‖₁` for every expert.
    pub fn confidences(&self) -> &[f64] {
        &self.confidences
    }
}

/// Rewards of the `K` foreground actions on one trial; abstaining earns 0.
#[derive(Debug, Clone, PartialEq)]
pub struct RewardVector {
    rewards: Vec<f64>,
}

impl RewardVector {
    pub fn new(rewards: Vec<f64>) -> Result<Self> {
        if let Some(&r) = rewards
            .iter()
            .find(|r| !r.is_finite() || !(-1.0..=1.0).contains(*r))
        {
            return Err(Error::InvalidParameter(format!(
                "reward {r} outside [-1, 1]"
            )));
        }
        Ok(Self { rewards })
    }

    pub fn rewards(&self) -> &[f64] {
        &self.rewards
    }

    pub fn get(&self, action: ActionId) -> f64 {
        match action {
            ActionId::Play(a) => self.rewards[a],
            ActionId::Abstain => 0.0,
        }
    }
}

/// `Δ(u, v) = Σ u_i ln(u_i / v_i) − ‖u‖₁ + ‖v‖₁`, with `0 ln 0 = 0`.
pub fn unnormalized_relative_entropy(u: &[f64], v: &[f64]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::DimensionMismatch {
            expected: u.len(),
            found: v.len(),
        });
    }
    let mut total = 0.0;
    for (&ui, &vi) in u.iter().zip(v) {
        if !(vi > 0.0) || !vi.is_finite() {
            return Err(Error::NotPositive {
                what: "reference weight",
                value: vi,
            });
        }
        if !(ui >= 0.0) || !ui.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "weight {ui} must be non-negative"
            )));
        }
        if ui > 0.0 {
            total += ui * (ui / vi).ln();
        }
        total += vi - ui;
    }
    Ok(total)
}

/// Draws an action from `s`, consuming exactly one uniform variate.
pub fn sample_action<R: Rng + ?Sized>(s: &StochasticAction, rng: &mut R) -> ActionId {
    let u: f64 = rng.random();
    let mut cumulative = 0.0;
    for (a, &p) in s.probs().iter().enumerate() {
        cumulative += p;
        if u < cumulative {
            return ActionId::Play(a);
        }
    }
    ActionId::Abstain
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use proptest::prelude::*;

    #[test]
    fn entropy_examples() {
        assert_eq!(unnormalized_relative_entropy(&[1.0, 1.0], &[1.0, 1.0]).unwrap(), 0.0);
        assert_eq!(unnormalized_relative_entropy(&[0.0, 0.0], &[2.0, 3.0]).unwrap(), 5.0);
        let d = unnormalized_relative_entropy(&[2.0], &[1.0]).unwrap();
        assert!((d - (2.0 * 2f64.ln() - 1.0)).abs() < 1e-15);
        assert!((d - 0.386294).abs() < 1e-6);
    }

    #[test]
    fn entropy_errors() {
        assert!(matches!(
            unnormalized_relative_entropy(&[1.0], &[1.0, 2.0]),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(matches!(
            unnormalized_relative_entropy(&[1.0], &[0.0]),
            Err(Error::NotPositive { .. })
        ));
    }

    #[test]
    fn degenerate_sampling() {
        let mut r = rng::stream(1, 0);
        let first = StochasticAction::point(3, 0);
        let none = StochasticAction::abstain(3);
        for _ in 0..1000 {
            assert_eq!(sample_action(&first, &mut r), ActionId::Play(0));
            assert_eq!(sample_action(&none, &mut r), ActionId::Abstain);
        }
    }

    #[test]
    fn sampling_frequencies_within_binomial_bands() {
        let s = StochasticAction::new(vec![0.5, 0.25]).unwrap();
        let n = 1_000_000usize;
        let mut counts = [0usize; 3];
        let mut r = rng::stream(42, 0);
        for _ in 0..n {
            match sample_action(&s, &mut r) {
                ActionId::Play(a) => counts[a] += 1,
                ActionId::Abstain => counts[2] += 1,
            }
        }
        for (count, p) in counts.iter().zip([0.5, 0.25, 0.25]) {
            let sigma = (n as f64 * p * (1.0 - p)).sqrt();
            assert!((*count as f64 - n as f64 * p).abs() < 3.0 * sigma, "{counts:?}");
        }
    }

    #[test]
    fn sampling_chi_square() {
        // 2 degrees of freedom; the 0.999 quantile is 13.8155.
        let s = StochasticAction::new(vec![0.2, 0.35]).unwrap();
        let expected = [0.2, 0.35, 0.45];
        let n = 100_000usize;
        let mut counts = [0usize; 3];
        let mut r = rng::stream(9, 3);
        for _ in 0..n {
            counts[sample_action(&s, &mut r).index().unwrap_or(2)] += 1;
        }
        let chi2: f64 = counts
            .iter()
            .zip(expected)
            .map(|(&c, p)| {
                let e = n as f64 * p;
                (c as f64 - e).powi(2) / e
            })
            .sum();
        assert!(chi2 < 13.8155, "chi2 = {chi2}");
    }

    #[test]
    fn advice_rejects_overfull_rows() {
        assert!(ExpertAdvice::from_flat(2, vec![0.6, 0.4 + 2e-9]).is_err());
        let ok = ExpertAdvice::from_flat(2, vec![0.6, 0.4 + 5e-10, 0.0, 0.5]).unwrap();
        assert_eq!(ok.experts(), 2);
        assert_eq!(ok.confidences()[1], 0.5);
        for (row, &c) in ok.rows().zip(ok.confidences()) {
            assert_eq!(row.iter().sum::<f64>(), c);
        }
    }

    #[test]
    fn stochastic_action_validation() {
        assert!(StochasticAction::new(vec![-0.1, 0.5]).is_err());
        assert!(StochasticAction::new(vec![0.7, 0.7]).is_err());
        assert!(StochasticAction::new(vec![f64::NAN]).is_err());
        let s = StochasticAction::new(vec![0.2, 0.2]).unwrap();
        assert!((s.abstain_probability() - 0.6).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn entropy_is_nonnegative(
            pairs in prop::collection::vec((0.0f64..5.0, 1e-3f64..5.0), 1..12)
        ) {
            let (u, v): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
            let d = unnormalized_relative_entropy(&u, &v).unwrap();
            prop_assert!(d >= -1e-12);
            prop_assert!(unnormalized_relative_entropy(&v, &v).unwrap().abs() < 1e-12);
        }

        #[test]
        fn entropy_positive_off_diagonal(
            v in prop::collection::vec(1e-2f64..5.0, 1..8),
            idx in 0usize..8,
            bump in 1e-3f64..1.0,
        ) {
            let mut u = v.clone();
            let i = idx % u.len();
            u[i] += bump;
            prop_assert!(unnormalized_relative_entropy(&u, &v).unwrap() > 0.0);
        }
    }
}
