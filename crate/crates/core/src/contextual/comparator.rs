use crate::{Error, Result, RewardVector};

/// Slack on the per-context cover weight `Σ_j 1{x ∈ B_j} u_j ≤ 1`.
const COVER_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct ComparatorPiece {
    /// Sorted context ids.
    pub members: Vec<usize>,
    /// Zero-based action played on the members.
    pub action: usize,
    pub weight: f64,
}

/// A weighted collection of (set, action) pieces; the policy abstains on the
/// residual weight of every context.
#[derive(Debug, Clone, PartialEq)]
pub struct ComparatorPolicy {
    pieces: Vec<ComparatorPiece>,
    /// Per context, the (action, weight) of every piece covering it.
    cover: Vec<Vec<(usize, f64)>>,
}

impl ComparatorPolicy {
    pub fn new(n_contexts: usize, k: usize, mut pieces: Vec<ComparatorPiece>) -> Result<Self> {
        let mut cover = vec![Vec::new(); n_contexts];
        for piece in &mut pieces {
            if piece.action >= k {
                return Err(Error::InvalidParameter(format!(
                    "comparator action {} out of range",
                    piece.action
                )));
            }
            if !(0.0..=1.0).contains(&piece.weight) {
                return Err(Error::InvalidParameter(format!(
                    "comparator weight {} outside [0, 1]",
                    piece.weight
                )));
            }
            piece.members.sort_unstable();
            piece.members.dedup();
            for &x in &piece.members {
                cover.get_mut(x).ok_or(Error::UnknownContext(x))?.push((piece.action, piece.weight));
            }
        }
        for (context, c) in cover.iter().enumerate() {
            let total: f64 = c.iter().map(|p| p.1).sum();
            if total > 1.0 + COVER_TOLERANCE {
                return Err(Error::CoverWeightViolation { context, total });
            }
        }
        Ok(Self { pieces, cover })
    }

    /// Pieces with unit weight on disjoint sets.
    pub fn disjoint(n_contexts: usize, k: usize, pieces: Vec<(Vec<usize>, usize)>) -> Result<Self> {
        Self::new(
            n_contexts,
            k,
            pieces
                .into_iter()
                .map(|(members, action)| ComparatorPiece {
                    members,
                    action,
                    weight: 1.0,
                })
                .collect(),
        )
    }

    pub fn pieces(&self) -> &[ComparatorPiece] {
        &self.pieces
    }

    /// `r*_t = Σ_j 1{x ∈ B_j} u_j r_{t, b_j}`.
    pub fn reward(&self, context: usize, rewards: &RewardVector) -> f64 {
        self.cover[context]
            .iter()
            .map(|&(a, u)| u * rewards.rewards()[a])
            .sum()
    }
}

/// Total comparator reward over a trace of (context, reward vector) pairs.
pub fn comparator_reward(policy: &ComparatorPolicy, trace: &[(usize, RewardVector)]) -> Result<f64> {
    trace.iter().try_fold(0.0, |acc, (x, r)| {
        if *x >= policy.cover.len() {
            return Err(Error::UnknownContext(*x));
        }
        Ok(acc + policy.reward(*x, r))
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rv(v: &[f64]) -> RewardVector {
        RewardVector::new(v.to_vec()).unwrap()
    }

    #[test]
    fn empty_policy_earns_nothing() {
        let p = ComparatorPolicy::new(3, 2, vec![]).unwrap();
        assert_eq!(comparator_reward(&p, &[(0, rv(&[1.0, 1.0]))]).unwrap(), 0.0);
    }

    #[test]
    fn full_cover_sums_rewards() {
        let p = ComparatorPolicy::disjoint(3, 1, vec![(vec![0, 1, 2], 0)]).unwrap();
        let trace = vec![(0, rv(&[1.0])), (2, rv(&[-1.0])), (1, rv(&[0.5]))];
        assert_eq!(comparator_reward(&p, &trace).unwrap(), 0.5);
    }

    #[test]
    fn weighted_overlap_matches_brute_force() {
        let pieces = vec![
            ComparatorPiece {
                members: vec![0, 1],
                action: 0,
                weight: 0.5,
            },
            ComparatorPiece {
                members: vec![1, 2],
                action: 1,
                weight: 0.5,
            },
        ];
        let p = ComparatorPolicy::new(3, 2, pieces.clone()).unwrap();
        let trace = vec![
            (0, rv(&[1.0, -1.0])),
            (1, rv(&[1.0, 1.0])),
            (2, rv(&[-1.0, -1.0])),
            (1, rv(&[-1.0, 1.0])),
        ];
        let mut brute = 0.0;
        for (x, r) in &trace {
            for piece in &pieces {
                if piece.members.contains(x) {
                    brute += piece.weight * r.rewards()[piece.action];
                }
            }
        }
        assert_eq!(comparator_reward(&p, &trace).unwrap(), brute);
        assert_eq!(brute, 0.5 + 1.0 - 0.5 + 0.0);
    }

    #[test]
    fn overweight_cover_is_rejected() {
        let err = ComparatorPolicy::disjoint(2, 1, vec![(vec![0, 1], 0), (vec![1], 0)]).unwrap_err();
        assert_eq!(
            err,
            Error::CoverWeightViolation {
                context: 1,
                total: 2.0
            }
        );
    }
}
