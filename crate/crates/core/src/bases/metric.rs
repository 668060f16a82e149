//! Graph metrics `d_1`, `d_2` and `d_∞`.
//!
//! Edge weights act as conductances for `d_1` (inverse min cut) and `d_2`
//! (square root of effective resistance) and as lengths for the shortest-path
//! metric `d_∞`. With unit weights all three agree with their textbook forms.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, VecDeque};

use nalgebra::DMatrix;

use super::Graph;
use crate::{Error, Result};

/// Dense symmetric distance matrix with zero diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricMatrix {
    n: usize,
    d: Vec<f64>,
}

impl MetricMatrix {
    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        let mut d = vec![0.0; n * n];
        for i in 0..n {
            for j in (i + 1)..n {
                let v = f(i, j);
                if !(v >= 0.0) || !v.is_finite() {
                    return Err(Error::InvalidParameter(format!(
                        "distance d({i},{j}) = {v} is not a finite non-negative number"
                    )));
                }
                d[i * n + j] = v;
                d[j * n + i] = v;
            }
        }
        Ok(Self { n, d })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.d[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.d[i * self.n..(i + 1) * self.n]
    }
}

/// Euclidean distances between points.
pub fn euclidean_metric(points: &[Vec<f64>]) -> Result<MetricMatrix> {
    MetricMatrix::from_fn(points.len(), |i, j| {
        points[i]
            .iter()
            .zip(&points[j])
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    })
}

/// All-pairs weighted shortest paths (`d_∞`): Dijkstra from every source,
/// `O(N·E log N)`.
pub fn shortest_path_metric(g: &Graph) -> Result<MetricMatrix> {
    g.require_connected()?;
    let n = g.n_nodes();
    let mut d = vec![f64::INFINITY; n * n];
    let mut heap = BinaryHeap::new();
    for source in 0..n {
        let row = &mut d[source * n..(source + 1) * n];
        row[source] = 0.0;
        // Non-negative floats order like their bit patterns.
        heap.push(Reverse((0u64, source)));
        while let Some(Reverse((bits, v))) = heap.pop() {
            let dv = f64::from_bits(bits);
            if dv > row[v] {
                continue;
            }
            for &(u, w) in g.neighbors(v) {
                let via = dv + w;
                if via < row[u] {
                    row[u] = via;
                    heap.push(Reverse((via.to_bits(), u)));
                }
            }
        }
    }
    Ok(MetricMatrix { n, d })
}

/// `d_2(i, j) = sqrt(L⁺_ii + L⁺_jj − 2 L⁺_ij)` from one factorization of
/// `L + 11ᵀ/N`, whose inverse is `L⁺ + 11ᵀ/N` for a connected graph.
pub fn effective_resistance_metric(g: &Graph) -> Result<MetricMatrix> {
    g.require_connected()?;
    let n = g.n_nodes();
    let shift = 1.0 / n as f64;
    let mut lap = DMatrix::from_element(n, n, shift);
    for &(u, v, w) in g.edges() {
        lap[(u, u)] += w;
        lap[(v, v)] += w;
        lap[(u, v)] -= w;
        lap[(v, u)] -= w;
    }
    let chol = lap
        .cholesky()
        .ok_or_else(|| Error::Numerical("shifted Laplacian is not positive definite".into()))?;
    let inv = chol.inverse();
    MetricMatrix::from_fn(n, |i, j| {
        let r = inv[(i, i)] + inv[(j, j)] - 2.0 * inv[(i, j)];
        r.max(0.0).sqrt()
    })
}

/// `d_1(i, j) = 1 / mincut(i, j)` via Gusfield's flow-equivalent tree
/// (`N − 1` max-flow computations).
pub fn mincut_metric(g: &Graph) -> Result<MetricMatrix> {
    g.require_connected()?;
    let n = g.n_nodes();
    let mut network = FlowNetwork::new(g);
    let mut parent = vec![0usize; n];
    let mut weight = vec![0.0; n];
    for s in 1..n {
        let t = parent[s];
        let (flow, side) = network.min_cut(s, t);
        if !(flow > 0.0) {
            return Err(Error::Numerical(format!("zero max-flow between {s} and {t}")));
        }
        weight[s] = flow;
        for i in (s + 1)..n {
            if side[i] && parent[i] == t {
                parent[i] = s;
            }
        }
    }
    // Min cut between i and j is the lightest edge on their tree path.
    let mut tree = vec![Vec::new(); n];
    for s in 1..n {
        tree[s].push((parent[s], weight[s]));
        tree[parent[s]].push((s, weight[s]));
    }
    let mut cut = vec![0.0; n * n];
    for root in 0..n {
        let mut best = vec![f64::NAN; n];
        best[root] = f64::INFINITY;
        let mut stack = vec![root];
        while let Some(u) = stack.pop() {
            for &(v, w) in &tree[u] {
                if best[v].is_nan() {
                    best[v] = best[u].min(w);
                    stack.push(v);
                }
            }
        }
        cut[root * n..(root + 1) * n].copy_from_slice(&best);
    }
    MetricMatrix::from_fn(n, |i, j| 1.0 / cut[i * n + j])
}

/// Dinic max-flow on an undirected network; each edge becomes a pair of arcs
/// that serve as each other's residual.
struct FlowNetwork {
    head: Vec<Vec<usize>>,
    to: Vec<usize>,
    capacity: Vec<f64>,
    residual: Vec<f64>,
    level: Vec<i64>,
    cursor: Vec<usize>,
}

impl FlowNetwork {
    fn new(g: &Graph) -> Self {
        let n = g.n_nodes();
        let mut head = vec![Vec::new(); n];
        let mut to = Vec::new();
        let mut capacity = Vec::new();
        for &(u, v, w) in g.edges() {
            head[u].push(to.len());
            to.push(v);
            capacity.push(w);
            head[v].push(to.len());
            to.push(u);
            capacity.push(w);
        }
        Self {
            head,
            residual: capacity.clone(),
            to,
            capacity,
            level: vec![-1; n],
            cursor: vec![0; n],
        }
    }

    fn bfs(&mut self, s: usize, t: usize) -> bool {
        self.level.fill(-1);
        self.level[s] = 0;
        let mut queue = VecDeque::from([s]);
        while let Some(u) = queue.pop_front() {
            for &e in &self.head[u] {
                let v = self.to[e];
                if self.level[v] < 0 && self.residual[e] > 1e-12 {
                    self.level[v] = self.level[u] + 1;
                    queue.push_back(v);
                }
            }
        }
        self.level[t] >= 0
    }

    fn dfs(&mut self, u: usize, t: usize, pushed: f64) -> f64 {
        if u == t {
            return pushed;
        }
        while self.cursor[u] < self.head[u].len() {
            let e = self.head[u][self.cursor[u]];
            let v = self.to[e];
            if self.level[v] == self.level[u] + 1 && self.residual[e] > 1e-12 {
                let got = self.dfs(v, t, pushed.min(self.residual[e]));
                if got > 0.0 {
                    self.residual[e] -= got;
                    self.residual[e ^ 1] += got;
                    return got;
                }
            }
            self.cursor[u] += 1;
        }
        0.0
    }

    /// Max-flow value and the source side of a minimum cut.
    fn min_cut(&mut self, s: usize, t: usize) -> (f64, Vec<bool>) {
        self.residual.copy_from_slice(&self.capacity);
        let mut flow = 0.0;
        while self.bfs(s, t) {
            self.cursor.fill(0);
            loop {
                let pushed = self.dfs(s, t, f64::INFINITY);
                if pushed <= 0.0 {
                    break;
                }
                flow += pushed;
            }
        }
        let side = self.level.iter().map(|&l| l >= 0).collect();
        (flow, side)
    }
}
