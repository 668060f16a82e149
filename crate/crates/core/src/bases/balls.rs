//! Metric balls and nested families.

use super::{BasisElement, Basis, MetricMatrix, Provenance};
use crate::{Error, Result};

/// Relative tolerance under which two distances count as equal.
pub const RADIUS_TOLERANCE: f64 = 1e-12;

fn same_radius(a: f64, b: f64) -> bool {
    (b - a).abs() <= RADIUS_TOLERANCE * a.abs().max(b.abs()).max(1.0)
}

/// All contexts sorted by distance from `center`, ties broken by id.
#[derive(Debug, Clone, PartialEq)]
pub struct BallOrder {
    pub center: usize,
    pub order: Vec<usize>,
    /// `distances[p] = d(center, order[p])`.
    pub distances: Vec<f64>,
}

impl BallOrder {
    pub fn new(metric: &MetricMatrix, center: usize) -> Self {
        let row = metric.row(center);
        let mut order: Vec<usize> = (0..metric.len()).collect();
        order.sort_by(|&a, &b| {
            row[a]
                .total_cmp(&row[b])
                .then((a != center).cmp(&(b != center)))
                .then(a.cmp(&b))
        });
        let distances = order.iter().map(|&z| row[z]).collect();
        Self {
            center,
            order,
            distances,
        }
    }

    /// Prefix lengths at which the radius strictly grows; each prefix is one
    /// distinct ball.
    pub fn ball_ends(&self) -> Vec<usize> {
        let n = self.order.len();
        (1..=n)
            .filter(|&len| len == n || !same_radius(self.distances[len - 1], self.distances[len]))
            .collect()
    }

    pub fn family(&self) -> NestedFamily {
        let prefix_lens = self.ball_ends();
        let provenance = prefix_lens
            .iter()
            .map(|&len| Provenance::Ball {
                center: self.center,
                radius: self.distances[len - 1],
            })
            .collect();
        NestedFamily {
            order: self.order.clone(),
            prefix_lens,
            provenance,
        }
    }
}

pub fn ball_orders(metric: &MetricMatrix) -> Vec<BallOrder> {
    (0..metric.len()).map(|x| BallOrder::new(metric, x)).collect()
}

/// Every distinct ball of the metric, grouped by center in center order.
pub fn distinct_balls(metric: &MetricMatrix) -> Result<Basis> {
    let families: Vec<NestedFamily> = ball_orders(metric).iter().map(BallOrder::family).collect();
    NestedFamily::basis(metric.len(), &families)
}

/// A chain of sets `order[..len]` for each `len` in `prefix_lens`.
///
/// `order` is a permutation of all contexts; contexts past the longest
/// prefix belong to no element of the family.
#[derive(Debug, Clone, PartialEq)]
pub struct NestedFamily {
    pub order: Vec<usize>,
    /// Strictly increasing, each in `1..=order.len()`.
    pub prefix_lens: Vec<usize>,
    pub provenance: Vec<Provenance>,
}

impl NestedFamily {
    pub fn new(order: Vec<usize>, prefix_lens: Vec<usize>, provenance: Vec<Provenance>) -> Result<Self> {
        let n = order.len();
        let mut seen = vec![false; n];
        for &z in &order {
            if z >= n || std::mem::replace(&mut seen[z], true) {
                return Err(Error::InvalidParameter("family order is not a permutation".into()));
            }
        }
        if prefix_lens.is_empty()
            || prefix_lens[0] == 0
            || prefix_lens.windows(2).any(|w| w[0] >= w[1])
            || prefix_lens[prefix_lens.len() - 1] > n
        {
            return Err(Error::InvalidParameter(
                "prefix lengths must be strictly increasing within 1..=N".into(),
            ));
        }
        if provenance.len() != prefix_lens.len() {
            return Err(Error::DimensionMismatch {
                expected: prefix_lens.len(),
                found: provenance.len(),
            });
        }
        Ok(Self {
            order,
            prefix_lens,
            provenance,
        })
    }

    pub fn len(&self) -> usize {
        self.prefix_lens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.prefix_lens.is_empty()
    }

    /// Context id to position in `order`.
    pub fn positions(&self) -> Vec<usize> {
        let mut pos = vec![0; self.order.len()];
        for (p, &z) in self.order.iter().enumerate() {
            pos[z] = p;
        }
        pos
    }

    /// Index of the first element containing the context at `position`;
    /// every later element contains it too.
    pub fn first_containing(&self, position: usize) -> usize {
        self.prefix_lens.partition_point(|&len| len <= position)
    }

    pub fn elements(&self) -> impl Iterator<Item = BasisElement> + '_ {
        self.prefix_lens
            .iter()
            .zip(&self.provenance)
            .map(|(&len, prov)| {
                let mut members = self.order[..len].to_vec();
                members.sort_unstable();
                BasisElement {
                    members,
                    provenance: prov.clone(),
                }
            })
    }

    /// The deduplicated union of several families.
    pub fn basis(n_contexts: usize, families: &[NestedFamily]) -> Result<Basis> {
        Basis::new(n_contexts, families.iter().flat_map(NestedFamily::elements))
    }
}
