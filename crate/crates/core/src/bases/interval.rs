use super::{shortest_path_metric, Basis, BasisElement, Graph, Provenance};
use crate::Result;

/// All distinct geodesic intervals
/// `I(x, y) = {z : d(x, z) + d(z, y) = d(x, y)}` over unordered pairs,
/// including `I(x, x) = {x}`.
pub fn interval_basis(g: &Graph) -> Result<Basis> {
    let d = shortest_path_metric(g)?;
    let n = g.n_nodes();
    let mut candidates = Vec::with_capacity(n * (n + 1) / 2);
    for x in 0..n {
        let dx = d.row(x);
        for y in x..n {
            let dy = d.row(y);
            let dxy = dx[y];
            let slack = 1e-9 * dxy.max(1.0);
            let members = (0..n).filter(|&z| dx[z] + dy[z] - dxy <= slack).collect();
            candidates.push(BasisElement {
                members,
                provenance: Provenance::Interval { x, y },
            });
        }
    }
    Basis::new(n, candidates)
}
