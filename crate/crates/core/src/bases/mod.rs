//! Graphs and bases of context sets.
//!
//! A basis is a collection of context subsets; each element paired with each
//! action becomes one specialist expert. Ball bases come from a metric on the
//! graph nodes, community bases from Louvain clusters refined by greedy
//! peeling, and interval bases from geodesic intervals.

mod balls;
mod community;
mod interval;
mod io;
mod metric;

use std::collections::{HashSet, VecDeque};

pub use balls::{ball_orders, distinct_balls, BallOrder, NestedFamily, RADIUS_TOLERANCE};
pub use community::{community_basis, community_families, greedy_peeling_chain, louvain_communities};
pub use interval::interval_basis;
pub use io::{parse_basis, parse_edge_list, parse_labels, read_edge_list, write_basis};
pub use metric::{
    effective_resistance_metric, euclidean_metric, mincut_metric, shortest_path_metric,
    MetricMatrix,
};

use crate::{Error, Result};

/// Undirected graph with positive edge weights. Parallel edges are allowed.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    n_nodes: usize,
    edges: Vec<(usize, usize, f64)>,
    adjacency: Vec<Vec<(usize, f64)>>,
}

impl Graph {
    pub fn new(n_nodes: usize, edges: Vec<(usize, usize, f64)>) -> Result<Self> {
        let mut adjacency = vec![Vec::new(); n_nodes];
        for &(u, v, w) in &edges {
            if u >= n_nodes || v >= n_nodes {
                return Err(Error::UnknownContext(u.max(v)));
            }
            if u == v {
                return Err(Error::InvalidParameter(format!("self-loop at node {u}")));
            }
            if !(w > 0.0 && w.is_finite()) {
                return Err(Error::NotPositive {
                    what: "edge weight",
                    value: w,
                });
            }
            adjacency[u].push((v, w));
            adjacency[v].push((u, w));
        }
        Ok(Self {
            n_nodes,
            edges,
            adjacency,
        })
    }

    /// Unit-weight graph from an edge list.
    pub fn unweighted(n_nodes: usize, edges: &[(usize, usize)]) -> Result<Self> {
        Self::new(n_nodes, edges.iter().map(|&(u, v)| (u, v, 1.0)).collect())
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn edges(&self) -> &[(usize, usize, f64)] {
        &self.edges
    }

    pub fn neighbors(&self, v: usize) -> &[(usize, f64)] {
        &self.adjacency[v]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.adjacency[v].len()
    }

    /// Connected components, each sorted, listed by smallest node.
    pub fn components(&self) -> Vec<Vec<usize>> {
        let mut seen = vec![false; self.n_nodes];
        let mut out = Vec::new();
        for start in 0..self.n_nodes {
            if seen[start] {
                continue;
            }
            seen[start] = true;
            let mut queue = VecDeque::from([start]);
            let mut comp = Vec::new();
            while let Some(u) = queue.pop_front() {
                comp.push(u);
                for &(v, _) in &self.adjacency[u] {
                    if !seen[v] {
                        seen[v] = true;
                        queue.push_back(v);
                    }
                }
            }
            comp.sort_unstable();
            out.push(comp);
        }
        out
    }

    pub fn is_connected(&self) -> bool {
        self.n_nodes > 0 && self.components().len() == 1
    }

    pub(crate) fn require_connected(&self) -> Result<()> {
        if self.is_connected() {
            Ok(())
        } else {
            Err(Error::Disconnected)
        }
    }

    /// Induced subgraph on `nodes`, relabelled `0..nodes.len()` in the given order.
    pub fn induced(&self, nodes: &[usize]) -> Result<Self> {
        let mut index = vec![usize::MAX; self.n_nodes];
        for (i, &v) in nodes.iter().enumerate() {
            index[v] = i;
        }
        let edges = self
            .edges
            .iter()
            .filter(|(u, v, _)| index[*u] != usize::MAX && index[*v] != usize::MAX)
            .map(|&(u, v, w)| (index[u], index[v], w))
            .collect();
        Self::new(nodes.len(), edges)
    }
}

/// Where a basis element came from.
#[derive(Debug, Clone, PartialEq)]
pub enum Provenance {
    Ball { center: usize, radius: f64 },
    Community { community: usize, size: usize },
    Singleton(usize),
    Interval { x: usize, y: usize },
    Loaded,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BasisElement {
    /// Sorted context ids.
    pub members: Vec<usize>,
    pub provenance: Provenance,
}

impl BasisElement {
    pub fn contains(&self, x: usize) -> bool {
        self.members.binary_search(&x).is_ok()
    }
}

/// A deduplicated collection of non-empty context sets.
#[derive(Debug, Clone, PartialEq)]
pub struct Basis {
    n_contexts: usize,
    elements: Vec<BasisElement>,
}

impl Basis {
    /// Keeps the first occurrence of every distinct set; drops empty sets.
    pub fn new(n_contexts: usize, candidates: impl IntoIterator<Item = BasisElement>) -> Result<Self> {
        let mut seen = HashSet::new();
        let mut elements = Vec::new();
        for mut element in candidates {
            element.members.sort_unstable();
            element.members.dedup();
            if element.members.is_empty() {
                continue;
            }
            if let Some(&x) = element.members.iter().find(|&&x| x >= n_contexts) {
                return Err(Error::UnknownContext(x));
            }
            if seen.insert(element.members.clone()) {
                elements.push(element);
            }
        }
        Ok(Self {
            n_contexts,
            elements,
        })
    }

    pub fn n_contexts(&self) -> usize {
        self.n_contexts
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn elements(&self) -> &[BasisElement] {
        &self.elements
    }

    pub fn iter(&self) -> impl Iterator<Item = &BasisElement> {
        self.elements.iter()
    }

    pub fn contains_set(&self, members: &[usize]) -> bool {
        let mut sorted = members.to_vec();
        sorted.sort_unstable();
        self.elements.iter().any(|e| e.members == sorted)
    }
}
