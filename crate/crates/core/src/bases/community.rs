//! Louvain communities refined into nested chains by greedy peeling.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::Rng;

use super::{Basis, Graph, NestedFamily, Provenance};
use crate::{Error, Result};

const MAX_LOCAL_PASSES: usize = 1000;

/// Modularity-maximizing partition (resolution 1). Node visiting order at
/// every level is shuffled with `rng`. Communities are sorted internally and
/// listed by smallest member.
pub fn louvain_communities<R: Rng + ?Sized>(g: &Graph, rng: &mut R) -> Result<Vec<Vec<usize>>> {
    g.require_connected()?;
    let n = g.n_nodes();
    let mut adj: Vec<Vec<(usize, f64)>> = (0..n).map(|v| g.neighbors(v).to_vec()).collect();
    let mut self_loop = vec![0.0; n];
    let mut membership: Vec<usize> = (0..n).collect();

    loop {
        let (comm, moved) = local_moves(&adj, &self_loop, rng);
        if !moved {
            break;
        }
        let mut relabel = vec![usize::MAX; comm.len()];
        let mut count = 0;
        for &c in &comm {
            if relabel[c] == usize::MAX {
                relabel[c] = count;
                count += 1;
            }
        }
        let comm: Vec<usize> = comm.iter().map(|&c| relabel[c]).collect();
        for m in membership.iter_mut() {
            *m = comm[*m];
        }

        let mut next_loop = vec![0.0; count];
        let mut next_adj = vec![BTreeMap::new(); count];
        for (i, edges) in adj.iter().enumerate() {
            let ci = comm[i];
            next_loop[ci] += self_loop[i];
            for &(j, w) in edges {
                let cj = comm[j];
                if ci == cj {
                    next_loop[ci] += w;
                } else {
                    *next_adj[ci].entry(cj).or_insert(0.0) += w;
                }
            }
        }
        adj = next_adj.into_iter().map(|m| m.into_iter().collect()).collect();
        self_loop = next_loop;
        if count == 1 {
            break;
        }
    }

    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (v, &c) in membership.iter().enumerate() {
        groups.entry(c).or_default().push(v);
    }
    let mut out: Vec<Vec<usize>> = groups.into_values().collect();
    out.sort_by_key(|c| c[0]);
    Ok(out)
}

/// One level of greedy node moves. `self_loop[i]` is the weight of the
/// ordered pairs inside node `i` (twice its internal edge weight).
fn local_moves<R: Rng + ?Sized>(
    adj: &[Vec<(usize, f64)>],
    self_loop: &[f64],
    rng: &mut R,
) -> (Vec<usize>, bool) {
    let n = adj.len();
    let k: Vec<f64> = (0..n)
        .map(|i| self_loop[i] + adj[i].iter().map(|e| e.1).sum::<f64>())
        .collect();
    let m2: f64 = k.iter().sum();
    let eps = 1e-12 * m2.max(1.0);
    let mut comm: Vec<usize> = (0..n).collect();
    let mut tot = k.clone();
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);

    let mut link = vec![0.0; n];
    let mut touched = vec![false; n];
    let mut candidates = Vec::new();
    let mut moved_any = false;
    for _ in 0..MAX_LOCAL_PASSES {
        let mut moved = false;
        for &i in &order {
            let current = comm[i];
            touched[current] = true;
            candidates.push(current);
            for &(j, w) in &adj[i] {
                let c = comm[j];
                if !touched[c] {
                    touched[c] = true;
                    candidates.push(c);
                }
                link[c] += w;
            }
            tot[current] -= k[i];
            let gain = |c: usize| link[c] - tot[c] * k[i] / m2;
            let mut best = current;
            let mut best_gain = gain(current);
            for &c in &candidates {
                let g = gain(c);
                if g > best_gain + eps {
                    best = c;
                    best_gain = g;
                }
            }
            tot[best] += k[i];
            if best != current {
                comm[i] = best;
                moved = true;
                moved_any = true;
            }
            for &c in &candidates {
                link[c] = 0.0;
                touched[c] = false;
            }
            candidates.clear();
        }
        if !moved {
            break;
        }
    }
    (comm, moved_any)
}

/// Removal order of greedy peeling: repeatedly drop a node of minimum degree
/// in the subgraph induced by the remaining nodes. Ties go to the node with
/// the smaller degree in the whole cluster, then to the smaller id.
fn peeling_order(g: &Graph, cluster: &[usize]) -> Result<Vec<usize>> {
    if cluster.is_empty() {
        return Err(Error::Empty("cluster"));
    }
    let mut nodes = cluster.to_vec();
    nodes.sort_unstable();
    nodes.dedup();
    if let Some(&v) = nodes.iter().find(|&&v| v >= g.n_nodes()) {
        return Err(Error::UnknownContext(v));
    }
    let mut alive = vec![false; g.n_nodes()];
    for &v in &nodes {
        alive[v] = true;
    }
    let mut degree = vec![0usize; g.n_nodes()];
    for &v in &nodes {
        degree[v] = g.neighbors(v).iter().filter(|(u, _)| alive[*u]).count();
    }
    let initial = degree.clone();
    let mut removed = Vec::with_capacity(nodes.len());
    for _ in 0..nodes.len() {
        let &v = nodes
            .iter()
            .filter(|&&v| alive[v])
            .min_by_key(|&&v| (degree[v], initial[v], v))
            .expect("a node remains");
        alive[v] = false;
        for &(u, _) in g.neighbors(v) {
            if alive[u] {
                degree[u] -= 1;
            }
        }
        removed.push(v);
    }
    Ok(removed)
}

/// Nested chain `C = C^(|C|) ⊇ … ⊇ C^(1)`, largest first, each set sorted.
pub fn greedy_peeling_chain(g: &Graph, cluster: &[usize]) -> Result<Vec<Vec<usize>>> {
    let removed = peeling_order(g, cluster)?;
    Ok((0..removed.len())
        .map(|i| {
            let mut set = removed[i..].to_vec();
            set.sort_unstable();
            set
        })
        .collect())
}

/// One nested family per Louvain community (its peeling chain, survivor
/// first) plus singleton families for nodes not already a chain's last set.
pub fn community_families<R: Rng + ?Sized>(g: &Graph, rng: &mut R) -> Result<Vec<NestedFamily>> {
    let n = g.n_nodes();
    let communities = louvain_communities(g, rng)?;
    let mut families = Vec::new();
    let mut is_survivor = vec![false; n];
    for (ci, community) in communities.iter().enumerate() {
        let mut order = peeling_order(g, community)?;
        order.reverse();
        is_survivor[order[0]] = true;
        let size = order.len();
        let mut inside = vec![false; n];
        for &v in &order {
            inside[v] = true;
        }
        order.extend((0..n).filter(|&v| !inside[v]));
        let prefix_lens: Vec<usize> = (1..=size).collect();
        let provenance = prefix_lens
            .iter()
            .map(|&len| {
                if len == 1 {
                    Provenance::Singleton(order[0])
                } else {
                    Provenance::Community {
                        community: ci,
                        size: len,
                    }
                }
            })
            .collect();
        families.push(NestedFamily::new(order, prefix_lens, provenance)?);
    }
    for v in (0..n).filter(|&v| !is_survivor[v]) {
        let order = std::iter::once(v).chain((0..n).filter(|&u| u != v)).collect();
        families.push(NestedFamily::new(order, vec![1], vec![Provenance::Singleton(v)])?);
    }
    Ok(families)
}

/// Union of the peeling chains of all Louvain communities and all singletons.
pub fn community_basis<R: Rng + ?Sized>(g: &Graph, rng: &mut R) -> Result<Basis> {
    NestedFamily::basis(g.n_nodes(), &community_families(g, rng)?)
}
