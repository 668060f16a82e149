//! Suffix-product tree.
//!
//! A balanced binary tree over contexts placed in a fixed leaf order (for ball
//! bases: increasing distance from a center). It implicitly maintains a leaf
//! function `ŷ` and supports, in `O(log N)`:
//!
//! * `query(q)`: `Σ ŷ(z)` over all leaves at or to the right of `q`;
//! * `update(q, u)`: `ŷ(z) ← u·ŷ(z)` for those same leaves.
//!
//! Every node `v` carries a multiplier `φ(v)` and a partial sum `ψ(v)` with
//!
//! ```text
//! ψ(v) · Π_{v' ∈ anc(v)} φ(v') = Σ_{z under v} ŷ(z)
//! ```
//!
//! where `anc(v)` includes `v` itself. Nodes are stored heap-style: the root is
//! index 1 and the children of `v` are `2v` and `2v + 1`.
//!
//! The lowest level is cut off: each tree leaf stands for a bucket of a few
//! consecutive positions whose values are stored explicitly, and its `ψ` is
//! their sum. Queries and updates touch the suffix of one bucket directly and
//! walk the tree above it, which keeps the tree small enough to stay in cache
//! when an agent holds hundreds of them.
//!
//! A tree may carry several lanes: independent leaf functions sharing the leaf
//! order, queried and updated at the same position in one walk. Lane values of
//! a node or position are stored contiguously.

use crate::{Error, Result};

/// Multipliers outside this range trigger a rebuild from explicit leaf values.
const PHI_MIN: f64 = 1e-300;
const PHI_MAX: f64 = 1e300;

/// Positions per bucket (a power of two).
const BUCKET: usize = 8;

#[derive(Debug, Clone)]
pub struct SuffixProductTree {
    /// Number of positions after padding to a power of two.
    padded: usize,
    /// Positions per bucket; the tree has `padded / bucket` leaves.
    bucket: usize,
    lanes: usize,
    /// Per node, `lanes` multipliers followed by `lanes` partial sums.
    nodes: Vec<f64>,
    /// Per position, the lane values below the bucket's ancestors.
    values: Vec<f64>,
    /// Context id to leaf position.
    position: Vec<usize>,
    /// Leaf position to context id.
    order: Vec<usize>,
    rebuilds: u64,
}

impl SuffixProductTree {
    /// Builds a single-lane tree with `ŷ(z) = initial[z]` and leaves arranged
    /// by `order` (`order[p]` is the context at position `p`).
    pub fn build(initial: &[f64], order: &[usize]) -> Result<Self> {
        Self::build_lanes(initial, 1, order)
    }

    /// Builds a tree with `lanes` leaf functions; `initial[z · lanes + l]` is
    /// `ŷ_l(z)`.
    pub fn build_lanes(initial: &[f64], lanes: usize, order: &[usize]) -> Result<Self> {
        let n = order.len();
        if n == 0 || lanes == 0 {
            return Err(Error::Empty("tree leaves"));
        }
        if initial.len() != n * lanes {
            return Err(Error::DimensionMismatch {
                expected: n * lanes,
                found: initial.len(),
            });
        }
        if let Some(&v) = initial.iter().find(|v| !(**v >= 0.0 && v.is_finite())) {
            return Err(Error::InvalidParameter(format!(
                "leaf value {v} must be finite and non-negative"
            )));
        }
        let mut position = vec![usize::MAX; n];
        for (p, &z) in order.iter().enumerate() {
            if z >= n || position[z] != usize::MAX {
                return Err(Error::InvalidParameter(
                    "leaf order is not a permutation".into(),
                ));
            }
            position[z] = p;
        }

        let padded = n.next_power_of_two();
        let bucket = BUCKET.min(padded);
        let mut tree = Self {
            padded,
            bucket,
            lanes,
            nodes: vec![0.0; 4 * (padded / bucket) * lanes],
            values: vec![0.0; padded * lanes],
            position,
            order: order.to_vec(),
            rebuilds: 0,
        };
        let values: Vec<f64> = order
            .iter()
            .flat_map(|&z| initial[z * lanes..(z + 1) * lanes].iter().copied())
            .collect();
        tree.fill(&values);
        Ok(tree)
    }

    /// Number of tree leaves (buckets).
    fn buckets(&self) -> usize {
        self.padded / self.bucket
    }

    /// Index of `φ_lane(v)`; `ψ_lane(v)` sits `lanes` entries later.
    #[inline]
    fn at(&self, v: usize, lane: usize) -> usize {
        2 * v * self.lanes + lane
    }

    #[inline]
    fn phi(&self, v: usize, lane: usize) -> f64 {
        self.nodes[self.at(v, lane)]
    }

    #[inline]
    fn psi(&self, v: usize, lane: usize) -> f64 {
        self.nodes[self.at(v, lane) + self.lanes]
    }

    /// Tree leaf holding `position`.
    #[inline]
    fn leaf_of(&self, position: usize) -> usize {
        self.buckets() + position / self.bucket
    }

    /// Resets all multipliers to one, stores position-major leaf values and
    /// recomputes partial sums.
    fn fill(&mut self, by_position: &[f64]) {
        let l = self.lanes;
        self.values.fill(0.0);
        self.values[..by_position.len()].copy_from_slice(by_position);
        let buckets = self.buckets();
        for v in 1..2 * buckets {
            for lane in 0..l {
                let i = self.at(v, lane);
                self.nodes[i] = 1.0;
                self.nodes[i + l] = if v >= buckets {
                    let first = (v - buckets) * self.bucket;
                    (first..first + self.bucket).map(|p| self.values[p * l + lane]).sum()
                } else {
                    0.0
                };
            }
        }
        for v in (1..buckets).rev() {
            for lane in 0..l {
                let sum = self.psi(2 * v, lane) + self.psi(2 * v + 1, lane);
                let i = self.at(v, lane) + l;
                self.nodes[i] = sum;
            }
        }
    }

    pub fn len(&self) -> usize {
        self.position.len()
    }

    pub fn is_empty(&self) -> bool {
        self.position.is_empty()
    }

    pub fn lanes(&self) -> usize {
        self.lanes
    }

    pub fn padded_len(&self) -> usize {
        self.padded
    }

    /// Number of times drifting multipliers forced a rebuild.
    pub fn rebuilds(&self) -> u64 {
        self.rebuilds
    }

    pub fn position(&self, context: usize) -> Result<usize> {
        self.position
            .get(context)
            .copied()
            .ok_or(Error::UnknownContext(context))
    }

    pub fn order(&self) -> &[usize] {
        &self.order
    }

    /// Total of lane 0.
    pub fn root_sum(&self) -> f64 {
        self.phi(1, 0) * self.psi(1, 0)
    }

    /// Lane-0 sum of `ŷ` over all leaves at or after the leaf of `context`.
    pub fn query(&self, context: usize) -> Result<f64> {
        let mut out = [0.0];
        self.query_lanes(context, &mut out)?;
        Ok(out[0])
    }

    /// Per-lane suffix sums at `context`, written to `out` (one per lane).
    pub fn query_lanes(&self, context: usize, out: &mut [f64]) -> Result<()> {
        self.query_lanes_at(self.position(context)?, out)
    }

    /// Hints the cache to load what a query or update at `position` reads.
    /// Callers walking many trees issue this a few trees early.
    pub fn prefetch_path(&self, position: usize) {
        // The bucket suffix read by a query, one hint per cache line.
        let values = self.values.as_ptr();
        let end = ((position | (self.bucket - 1)) + 1) * self.lanes;
        for i in (position * self.lanes..end).step_by(8) {
            prefetch(values.wrapping_add(i));
        }
        let base = self.nodes.as_ptr();
        let mut node = self.leaf_of(position);
        while node > 1 {
            // Sibling pairs are adjacent: one hint per level covers both.
            prefetch(base.wrapping_add(2 * (node & !1) * self.lanes));
            node >>= 1;
        }
    }

    /// As [`query_lanes`](Self::query_lanes), addressed by leaf position.
    pub fn query_lanes_at(&self, position: usize, out: &mut [f64]) -> Result<()> {
        if out.len() != self.lanes {
            return Err(Error::DimensionMismatch {
                expected: self.lanes,
                found: out.len(),
            });
        }
        if position >= self.order.len() {
            return Err(Error::UnknownContext(position));
        }
        // Literal lane counts let the walk unroll for the common cases.
        match self.lanes {
            1 => self.query_walk(position, out, 1),
            2 => self.query_walk(position, out, 2),
            3 => self.query_walk(position, out, 3),
            4 => self.query_walk(position, out, 4),
            l => self.query_walk(position, out, l),
        }
        Ok(())
    }

    #[inline(always)]
    fn query_walk(&self, position: usize, out: &mut [f64], l: usize) {
        let out = &mut out[..l];
        let end = (position | (self.bucket - 1)) + 1;
        out.fill(0.0);
        for chunk in self.values[position * l..end * l].chunks_exact(l) {
            for (sigma, v) in out.iter_mut().zip(chunk) {
                *sigma += v;
            }
        }
        let mut node = self.leaf_of(position);
        for (sigma, phi) in out.iter_mut().zip(&self.nodes[2 * node * l..(2 * node + 1) * l]) {
            *sigma *= phi;
        }
        while node > 1 {
            let parent = node >> 1;
            let parent_phi = &self.nodes[2 * parent * l..(2 * parent + 1) * l];
            // Selecting on values rather than branching keeps the walk free of
            // unpredictable jumps; adding 0.0 leaves the sum bit-identical.
            let sibling = node ^ 1;
            let block = &self.nodes[2 * sibling * l..2 * (sibling + 1) * l];
            let (sib_phi, sib_psi) = block.split_at(l);
            let take = node & 1 == 0;
            for (((sigma, p), a), b) in out.iter_mut().zip(parent_phi).zip(sib_phi).zip(sib_psi) {
                let right = if take { a * b } else { 0.0 };
                *sigma = p * (*sigma + right);
            }
            node = parent;
        }
    }

    /// Multiplies lane-0 `ŷ` by `factor` on every leaf at or after the leaf of
    /// `context`.
    ///
    /// A zero factor is accepted: it arises when an exponential multiplier
    /// underflows and simply zeroes the suffix.
    pub fn update(&mut self, context: usize, factor: f64) -> Result<()> {
        if self.lanes != 1 {
            return Err(Error::DimensionMismatch {
                expected: self.lanes,
                found: 1,
            });
        }
        self.update_lanes(context, &[factor])
    }

    /// Multiplies lane `l` by `factors[l]` on the suffix starting at `context`.
    pub fn update_lanes(&mut self, context: usize, factors: &[f64]) -> Result<()> {
        let position = self.position(context)?;
        self.update_lanes_at(position, factors)
    }

    /// As [`update_lanes`](Self::update_lanes), addressed by leaf position.
    pub fn update_lanes_at(&mut self, position: usize, factors: &[f64]) -> Result<()> {
        if factors.len() != self.lanes {
            return Err(Error::DimensionMismatch {
                expected: self.lanes,
                found: factors.len(),
            });
        }
        if let Some(f) = factors.iter().find(|f| !(**f >= 0.0) || !f.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "suffix multiplier {f} must be finite and non-negative"
            )));
        }
        if position >= self.order.len() {
            return Err(Error::UnknownContext(position));
        }
        let drifted = match self.lanes {
            1 => self.update_walk(position, factors, 1),
            2 => self.update_walk(position, factors, 2),
            3 => self.update_walk(position, factors, 3),
            4 => self.update_walk(position, factors, 4),
            l => self.update_walk(position, factors, l),
        };
        if drifted {
            self.rebuild();
        }
        #[cfg(feature = "invariant-checks")]
        if let Err(msg) = self.check_invariant() {
            panic!("suffix tree invariant broken: {msg}");
        }
        Ok(())
    }

    /// Scales the bucket suffix directly, then every right sibling hanging off
    /// the path to the root. Multipliers above those nodes cover both sides
    /// equally and stay where they are. Partial sums on the path are refreshed
    /// on the way up. True if a multiplier left the safe range.
    #[inline(always)]
    fn update_walk(&mut self, position: usize, factors: &[f64], l: usize) -> bool {
        let factors = &factors[..l];
        let first = position & !(self.bucket - 1);
        let end = first + self.bucket;
        for chunk in self.values[position * l..end * l].chunks_exact_mut(l) {
            for (v, f) in chunk.iter_mut().zip(factors) {
                *v *= f;
            }
        }
        let mut node = self.leaf_of(position);
        {
            let psi = &mut self.nodes[(2 * node + 1) * l..(2 * node + 2) * l];
            psi.fill(0.0);
            for chunk in self.values[first * l..end * l].chunks_exact(l) {
                for (s, v) in psi.iter_mut().zip(chunk) {
                    *s += v;
                }
            }
        }
        let mut drifted = false;
        while node > 1 {
            let parent = node >> 1;
            let (head, tail) = self.nodes.split_at_mut(4 * parent * l);
            let (left, right) = tail[..4 * l].split_at_mut(2 * l);
            // The right child is scaled when the path goes left; otherwise it
            // is the path node itself and takes a no-op factor of one.
            let take = node & 1 == 0;
            for (p, &f) in right[..l].iter_mut().zip(factors) {
                *p *= if take { f } else { 1.0 };
                drifted |= out_of_range(*p);
            }
            let (left_phi, left_psi) = left.split_at(l);
            let (right_phi, right_psi) = right.split_at(l);
            let psi = &mut head[(2 * parent + 1) * l..(2 * parent + 2) * l];
            for (((out, a), b), (c, d)) in psi
                .iter_mut()
                .zip(left_phi)
                .zip(left_psi)
                .zip(right_phi.iter().zip(right_psi))
            {
                *out = a * b + c * d;
            }
            node = parent;
        }
        drifted
    }

    fn rebuild(&mut self) {
        let values = self.values_by_position();
        self.fill(&values);
        self.rebuilds += 1;
    }

    /// `Π φ` over each node and its ancestors, indexed `v · lanes + lane`.
    fn prefix_products(&self) -> Vec<f64> {
        let l = self.lanes;
        let mut prefix = vec![1.0; 2 * self.buckets() * l];
        for v in 1..2 * self.buckets() {
            for lane in 0..l {
                let up = if v == 1 { 1.0 } else { prefix[(v >> 1) * l + lane] };
                prefix[v * l + lane] = up * self.phi(v, lane);
            }
        }
        prefix
    }

    /// `ŷ` at every leaf position, padding included, position-major.
    fn values_by_position(&self) -> Vec<f64> {
        let l = self.lanes;
        let prefix = self.prefix_products();
        (0..self.padded * l)
            .map(|i| self.values[i] * prefix[self.leaf_of(i / l) * l + i % l])
            .collect()
    }

    /// Lane-0 `ŷ(context)`.
    pub fn leaf_value(&self, context: usize) -> Result<f64> {
        Ok(self.leaf_value_at(self.position(context)?))
    }

    /// Lane-0 `ŷ` at a raw leaf position; padding leaves report zero.
    pub fn leaf_value_at(&self, position: usize) -> f64 {
        self.lane_value_at(position, 0)
    }

    /// `ŷ_lane` at a raw leaf position.
    pub fn lane_value_at(&self, position: usize, lane: usize) -> f64 {
        let mut value = self.values[position * self.lanes + lane];
        let mut node = self.leaf_of(position);
        while node >= 1 {
            value *= self.phi(node, lane);
            node >>= 1;
        }
        value
    }

    /// Lane-0 `ŷ` indexed by context id.
    pub fn leaf_values(&self) -> Vec<f64> {
        let by_position = self.values_by_position();
        self.position.iter().map(|&p| by_position[p * self.lanes]).collect()
    }

    /// Verifies the partial-sum invariant at every node and lane by full
    /// traversal.
    pub fn check_invariant(&self) -> std::result::Result<(), String> {
        let l = self.lanes;
        let buckets = self.buckets();
        let values = self.values_by_position();
        let mut subtree = vec![0.0; 2 * buckets * l];
        for (i, v) in values.iter().enumerate() {
            subtree[self.leaf_of(i / l) * l + i % l] += v;
        }
        for v in (1..buckets).rev() {
            for lane in 0..l {
                subtree[v * l + lane] = subtree[2 * v * l + lane] + subtree[(2 * v + 1) * l + lane];
            }
        }
        let prefix = self.prefix_products();
        for i in l..2 * buckets * l {
            let lhs = self.psi(i / l, i % l) * prefix[i];
            let rhs = subtree[i];
            if (lhs - rhs).abs() > 1e-9 * rhs.abs().max(lhs.abs()).max(f64::MIN_POSITIVE) {
                return Err(format!("node {} lane {}: {lhs} vs {rhs}", i / l, i % l));
            }
        }
        for (i, v) in values.iter().enumerate().skip(self.len() * l) {
            if *v != 0.0 {
                return Err(format!("padding leaf {} holds {v}", i / l));
            }
        }
        Ok(())
    }
}

fn out_of_range(phi: f64) -> bool {
    !(PHI_MIN..=PHI_MAX).contains(&phi)
}

#[cfg(target_arch = "x86_64")]
fn prefetch(address: *const f64) {
    use std::arch::x86_64::{_mm_prefetch, _MM_HINT_T0};
    // SAFETY: a prefetch is only a hint and never faults, whatever the address.
    unsafe { _mm_prefetch::<_MM_HINT_T0>(address.cast()) }
}

#[cfg(not(target_arch = "x86_64"))]
fn prefetch(_address: *const f64) {}
