//! Labelled graphs, synthetic generators and the reward model.
//!
//! Every node carries a preferred foreground class (equal to an action index)
//! or belongs to the background. A suggested action is accepted with a
//! probability depending on whether it matches the node's class; background
//! nodes treat every suggestion as a mismatch.

use std::collections::BTreeSet;
use std::path::Path;

use rand::seq::index::sample;
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::bases::{parse_edge_list, parse_labels, Graph};
use crate::{ActionId, Error, Result, RewardVector};

/// Regeneration attempts before a disconnected sample is repaired.
pub const CONNECT_ATTEMPTS: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Label {
    /// Zero-based class, which is also the matching action.
    Foreground(usize),
    Background,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledGraph {
    pub graph: Graph,
    pub labels: Vec<Label>,
    /// Name of each foreground class.
    pub class_names: Vec<String>,
    /// Edges added to join components the generator left apart.
    pub repair_edges: usize,
}

impl LabeledGraph {
    pub fn n_nodes(&self) -> usize {
        self.graph.n_nodes()
    }

    pub fn n_classes(&self) -> usize {
        self.class_names.len()
    }

    /// Nodes of foreground class `class`, ascending.
    pub fn class_members(&self, class: usize) -> Vec<usize> {
        (0..self.labels.len())
            .filter(|&v| self.labels[v] == Label::Foreground(class))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RewardModel {
    pub p_accept_match: f64,
    pub p_accept_mismatch: f64,
    pub reward_accept: f64,
    pub reward_reject: f64,
}

impl Default for RewardModel {
    fn default() -> Self {
        Self {
            p_accept_match: 0.9,
            p_accept_mismatch: 0.1,
            reward_accept: 1.0,
            reward_reject: -1.0,
        }
    }
}

impl RewardModel {
    pub fn validate(&self) -> Result<()> {
        for (name, p) in [
            ("p_accept_match", self.p_accept_match),
            ("p_accept_mismatch", self.p_accept_mismatch),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::InvalidParameter(format!("{name} = {p} outside [0, 1]")));
            }
        }
        if !(0.0..=1.0).contains(&self.reward_accept) {
            return Err(Error::InvalidParameter(format!(
                "reward_accept = {} outside [0, 1]",
                self.reward_accept
            )));
        }
        if !(-1.0..0.0).contains(&self.reward_reject) {
            return Err(Error::InvalidParameter(format!(
                "reward_reject = {} outside [-1, 0)",
                self.reward_reject
            )));
        }
        Ok(())
    }

    pub fn accept_probability(&self, label: Label, action: usize) -> f64 {
        match label {
            Label::Foreground(c) if c == action => self.p_accept_match,
            _ => self.p_accept_mismatch,
        }
    }

    /// Expected reward of suggesting `action` to a node with `label`.
    pub fn mean_reward(&self, label: Label, action: usize) -> f64 {
        let p = self.accept_probability(label, action);
        p * self.reward_accept + (1.0 - p) * self.reward_reject
    }
}

pub fn draw_context<R: Rng + ?Sized>(n: usize, rng: &mut R) -> usize {
    rng.random_range(0..n)
}

/// Realised reward of `action` on a node; abstaining earns 0 without a draw.
pub fn draw_reward<R: Rng + ?Sized>(model: &RewardModel, label: Label, action: ActionId, rng: &mut R) -> f64 {
    match action {
        ActionId::Abstain => 0.0,
        ActionId::Play(a) => {
            if rng.random::<f64>() < model.accept_probability(label, a) {
                model.reward_accept
            } else {
                model.reward_reject
            }
        }
    }
}

/// Rewards of all `k` foreground actions, drawn in action order.
pub fn draw_reward_vector<R: Rng + ?Sized>(model: &RewardModel, label: Label, k: usize, rng: &mut R) -> RewardVector {
    let rewards = (0..k)
        .map(|a| draw_reward(model, label, ActionId::Play(a), rng))
        .collect();
    RewardVector::new(rewards).expect("reward model validated")
}

type Edges = Vec<(usize, usize, f64)>;

/// Regenerates `make` until connected; after the last attempt, links each
/// stray component to the largest by one random edge.
/// Returns the edges, the node count and the number of repair edges.
fn connected<R, F>(rng: &mut R, mut make: F) -> Result<(Edges, usize, usize)>
where
    R: Rng + ?Sized,
    F: FnMut(&mut R) -> (usize, Edges),
{
    let mut last = None;
    for _ in 0..CONNECT_ATTEMPTS {
        let (n, edges) = make(rng);
        let g = Graph::new(n, edges.clone())?;
        if g.is_connected() {
            return Ok((edges, n, 0));
        }
        last = Some((n, edges, g));
    }
    let (n, mut edges, g) = last.expect("at least one attempt");
    let mut components = g.components();
    components.sort_by_key(|c| std::cmp::Reverse(c.len()));
    let (main, rest) = components.split_first().expect("non-empty graph");
    for comp in rest {
        let u = comp[rng.random_range(0..comp.len())];
        let v = main[rng.random_range(0..main.len())];
        edges.push((u, v, 1.0));
    }
    log::warn!(
        "graph still disconnected after {CONNECT_ATTEMPTS} samples; joined {} stray components",
        rest.len()
    );
    Ok((edges, n, rest.len()))
}

fn class_names(n: usize) -> Vec<String> {
    (0..n).map(|c| format!("class{c}")).collect()
}

/// `n_fg` disjoint cliques of `f` nodes each (nodes `c·f..(c+1)·f` form class
/// `c`), then `b` background nodes, each linked to every other node
/// independently with probability `p_bg` (default `1/sqrt(f·b)`).
pub fn gen_sbm<R: Rng + ?Sized>(n_fg: usize, f: usize, b: usize, p_bg: Option<f64>, rng: &mut R) -> Result<LabeledGraph> {
    if f == 0 || n_fg == 0 {
        return Err(Error::InvalidParameter("SBM needs at least one non-empty class".into()));
    }
    let p = p_bg.unwrap_or(if b > 0 { 1.0 / ((f * b) as f64).sqrt() } else { 0.0 });
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidParameter(format!("p_bg = {p} outside [0, 1]")));
    }
    let fg = n_fg * f;
    let n = fg + b;
    let (edges, _, repair_edges) = connected(rng, |rng| {
        let mut edges = Vec::new();
        for c in 0..n_fg {
            for i in c * f..(c + 1) * f {
                for j in (i + 1)..(c + 1) * f {
                    edges.push((i, j, 1.0));
                }
            }
        }
        for u in fg..n {
            for v in 0..u {
                if rng.random::<f64>() < p {
                    edges.push((v, u, 1.0));
                }
            }
        }
        (n, edges)
    })?;
    let labels = (0..n)
        .map(|v| if v < fg { Label::Foreground(v / f) } else { Label::Background })
        .collect();
    Ok(LabeledGraph {
        graph: Graph::new(n, edges)?,
        labels,
        class_names: class_names(n_fg),
        repair_edges,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianKnnParams {
    /// At most four; class `c` sits at corner `c` of the unit square.
    pub n_fg: usize,
    pub fg_count: usize,
    pub fg_sigma: f64,
    pub bg_count: usize,
    pub bg_sigma: f64,
    pub k: usize,
}

const CORNERS: [[f64; 2]; 4] = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0]];

/// Gaussian blobs joined by a symmetrised k-nearest-neighbour graph.
/// Background points are centred in the middle of the square.
pub fn gen_gaussian_knn<R: Rng + ?Sized>(params: &GaussianKnnParams, rng: &mut R) -> Result<LabeledGraph> {
    let GaussianKnnParams {
        n_fg,
        fg_count,
        fg_sigma,
        bg_count,
        bg_sigma,
        k,
    } = *params;
    if n_fg == 0 || n_fg > CORNERS.len() {
        return Err(Error::InvalidParameter(format!("n_fg = {n_fg} must be in 1..=4")));
    }
    if k == 0 {
        return Err(Error::InvalidParameter("k must be at least 1".into()));
    }
    let fg_noise = Normal::new(0.0, fg_sigma).map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let bg_noise = Normal::new(0.0, bg_sigma).map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let n = n_fg * fg_count + bg_count;
    let mut labels = Vec::with_capacity(n);
    let (edges, _, repair_edges) = connected(rng, |rng| {
        let mut points = Vec::with_capacity(n);
        labels.clear();
        for (c, corner) in CORNERS.iter().enumerate().take(n_fg) {
            for _ in 0..fg_count {
                points.push([corner[0] + fg_noise.sample(rng), corner[1] + fg_noise.sample(rng)]);
                labels.push(Label::Foreground(c));
            }
        }
        for _ in 0..bg_count {
            points.push([0.5 + bg_noise.sample(rng), 0.5 + bg_noise.sample(rng)]);
            labels.push(Label::Background);
        }
        (n, knn_edges(&points, k))
    })?;
    Ok(LabeledGraph {
        graph: Graph::new(n, edges)?,
        labels,
        class_names: class_names(n_fg),
        repair_edges,
    })
}

fn knn_edges(points: &[[f64; 2]], k: usize) -> Vec<(usize, usize, f64)> {
    let n = points.len();
    let mut pairs = BTreeSet::new();
    let mut others: Vec<(f64, usize)> = Vec::with_capacity(n);
    for i in 0..n {
        others.clear();
        others.extend((0..n).filter(|&j| j != i).map(|j| {
            let dx = points[i][0] - points[j][0];
            let dy = points[i][1] - points[j][1];
            (dx * dx + dy * dy, j)
        }));
        let take = k.min(others.len());
        if take < others.len() {
            others.select_nth_unstable_by(take, |a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        }
        for &(_, j) in &others[..take] {
            pairs.insert((i.min(j), i.max(j)));
        }
    }
    pairs.into_iter().map(|(u, v)| (u, v, 1.0)).collect()
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct LoadOptions {
    /// Label names folded into the background.
    pub background: BTreeSet<String>,
    /// Fraction of foreground nodes whose label is replaced by a different
    /// foreground class.
    pub noise: f64,
}

/// Reads edge and label files; see [`labeled_graph_from_text`].
pub fn load_edge_list<R: Rng + ?Sized>(
    edges: &Path,
    labels: &Path,
    options: &LoadOptions,
    rng: &mut R,
) -> Result<LabeledGraph> {
    let edges = std::fs::read_to_string(edges)?;
    let labels = std::fs::read_to_string(labels)?;
    labeled_graph_from_text(&edges, &labels, options, rng)
}

/// Keeps the largest connected component (nodes renumbered in id order),
/// maps labels to foreground classes in sorted name order and applies label
/// noise. Self-loops are dropped.
pub fn labeled_graph_from_text<R: Rng + ?Sized>(
    edge_text: &str,
    label_text: &str,
    options: &LoadOptions,
    rng: &mut R,
) -> Result<LabeledGraph> {
    if !(0.0..=1.0).contains(&options.noise) {
        return Err(Error::InvalidParameter(format!(
            "noise fraction {} outside [0, 1]",
            options.noise
        )));
    }
    let edges: Vec<_> = parse_edge_list(edge_text)?
        .into_iter()
        .filter(|(u, v, _)| u != v)
        .collect();
    let named = parse_labels(label_text)?;
    let n = edges
        .iter()
        .map(|&(u, v, _)| u.max(v) + 1)
        .chain(named.iter().map(|(v, _)| v + 1))
        .max()
        .ok_or(Error::Empty("graph"))?;
    let full = Graph::new(n, edges)?;
    let keep = full
        .components()
        .into_iter()
        .max_by(|a, b| a.len().cmp(&b.len()).then(b[0].cmp(&a[0])))
        .ok_or(Error::Empty("graph"))?;
    if keep.len() < 2 && full.edges().is_empty() {
        return Err(Error::Empty("largest connected component"));
    }
    let graph = full.induced(&keep)?;

    let mut name_of: Vec<Option<&str>> = vec![None; n];
    for (v, name) in &named {
        name_of[*v] = Some(name);
    }
    let class_names: Vec<String> = keep
        .iter()
        .filter_map(|&v| name_of[v])
        .filter(|name| !options.background.contains(*name))
        .map(str::to_string)
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let mut labels = keep
        .iter()
        .map(|&v| match name_of[v] {
            None => Err(Error::InvalidParameter(format!("node {v} has no label"))),
            Some(name) if options.background.contains(name) => Ok(Label::Background),
            Some(name) => Ok(Label::Foreground(
                class_names.binary_search_by(|c| c.as_str().cmp(name)).expect("collected above"),
            )),
        })
        .collect::<Result<Vec<_>>>()?;

    let foreground: Vec<usize> = (0..labels.len())
        .filter(|&v| labels[v] != Label::Background)
        .collect();
    let flips = (options.noise * foreground.len() as f64).floor() as usize;
    if flips > 0 {
        if class_names.len() < 2 {
            return Err(Error::InvalidParameter(
                "label noise needs at least two foreground classes".into(),
            ));
        }
        for i in sample(rng, foreground.len(), flips) {
            let v = foreground[i];
            let Label::Foreground(c) = labels[v] else { unreachable!() };
            let shift = rng.random_range(1..class_names.len());
            labels[v] = Label::Foreground((c + shift) % class_names.len());
        }
    }
    Ok(LabeledGraph {
        graph,
        labels,
        class_names,
        repair_edges: 0,
    })
}
