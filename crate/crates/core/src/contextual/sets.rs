//! Membership queries over a basis: which elements contain a context.

use crate::bases::{Basis, NestedFamily};
use crate::{Error, Result};

pub trait ExpertSets: Send + Sync {
    fn n_contexts(&self) -> usize;

    /// Number of basis elements.
    fn len(&self) -> usize;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Replaces `out` with the elements containing `x`, ascending.
    fn awake(&self, x: usize, out: &mut Vec<usize>) -> Result<()>;
}

/// Arbitrary sets through an inverted index.
#[derive(Debug, Clone)]
pub struct ExplicitSets {
    containing: Vec<Vec<u32>>,
    len: usize,
}

impl ExplicitSets {
    pub fn new(basis: &Basis) -> Self {
        let mut containing = vec![Vec::new(); basis.n_contexts()];
        for (i, element) in basis.iter().enumerate() {
            for &x in &element.members {
                containing[x].push(i as u32);
            }
        }
        Self {
            containing,
            len: basis.len(),
        }
    }
}

impl ExpertSets for ExplicitSets {
    fn n_contexts(&self) -> usize {
        self.containing.len()
    }

    fn len(&self) -> usize {
        self.len
    }

    fn awake(&self, x: usize, out: &mut Vec<usize>) -> Result<()> {
        let list = self.containing.get(x).ok_or(Error::UnknownContext(x))?;
        out.clear();
        out.extend(list.iter().map(|&i| i as usize));
        Ok(())
    }
}

/// Nested families, numbered family by family. Elements repeated across
/// families stay separate.
#[derive(Debug, Clone)]
pub struct NestedSets {
    positions: Vec<Vec<u32>>,
    prefix_lens: Vec<Vec<usize>>,
    offsets: Vec<usize>,
    n_contexts: usize,
}

impl NestedSets {
    pub fn new(families: &[NestedFamily]) -> Result<Self> {
        let n_contexts = families.first().ok_or(Error::Empty("families"))?.order.len();
        let mut offsets = Vec::with_capacity(families.len() + 1);
        offsets.push(0);
        for f in families {
            if f.order.len() != n_contexts {
                return Err(Error::DimensionMismatch {
                    expected: n_contexts,
                    found: f.order.len(),
                });
            }
            offsets.push(offsets.last().unwrap() + f.len());
        }
        Ok(Self {
            positions: families
                .iter()
                .map(|f| f.positions().into_iter().map(|p| p as u32).collect())
                .collect(),
            prefix_lens: families.iter().map(|f| f.prefix_lens.clone()).collect(),
            offsets,
            n_contexts,
        })
    }
}

impl ExpertSets for NestedSets {
    fn n_contexts(&self) -> usize {
        self.n_contexts
    }

    fn len(&self) -> usize {
        *self.offsets.last().unwrap()
    }

    fn awake(&self, x: usize, out: &mut Vec<usize>) -> Result<()> {
        if x >= self.n_contexts {
            return Err(Error::UnknownContext(x));
        }
        out.clear();
        for (f, lens) in self.prefix_lens.iter().enumerate() {
            let p = self.positions[f][x] as usize;
            let first = lens.partition_point(|&len| len <= p);
            out.extend(self.offsets[f] + first..self.offsets[f + 1]);
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bases::{ball_orders, shortest_path_metric, BallOrder, Graph};

    #[test]
    fn nested_sets_match_element_membership() {
        let g = Graph::unweighted(6, &[(0, 1), (1, 2), (2, 3), (3, 4), (4, 5), (1, 4)]).unwrap();
        let families: Vec<_> = ball_orders(&shortest_path_metric(&g).unwrap())
            .iter()
            .map(BallOrder::family)
            .collect();
        let nested = NestedSets::new(&families).unwrap();
        let elements: Vec<_> = families.iter().flat_map(|f| f.elements()).collect();
        assert_eq!(nested.len(), elements.len());
        let mut awake = Vec::new();
        for x in 0..6 {
            nested.awake(x, &mut awake).unwrap();
            let expected: Vec<usize> = (0..elements.len()).filter(|&i| elements[i].contains(x)).collect();
            assert_eq!(awake, expected);
        }
        assert!(nested.awake(6, &mut awake).is_err());
    }

    #[test]
    fn explicit_sets_index() {
        let basis = crate::bases::parse_basis("0 1\n1 2\n2\n", 3).unwrap();
        let sets = ExplicitSets::new(&basis);
        let mut awake = Vec::new();
        sets.awake(1, &mut awake).unwrap();
        assert_eq!(awake, vec![0, 1]);
        sets.awake(2, &mut awake).unwrap();
        assert_eq!(awake, vec![1, 2]);
    }
}
