use nalgebra::Point2;

use crate::belief::Belief;
use crate::uniqueness_graph::UniquenessGraph;

use super::PlannerError;

/// Per-mode graph neighborhoods of radius `radius` around the mode means.
pub fn neighborhoods(b: &Belief, g: &UniquenessGraph, radius: f64) -> Vec<Vec<usize>> {
    b.modes
        .iter()
        .map(|m| g.nodes_in_neighborhood(&Point2::new(m.mean.x, m.mean.y), radius))
        .collect()
}

/// For every mode, the neighborhood node whose signatures overlap least with
/// the other modes' neighborhoods. Ties go to the lowest node index.
pub fn select_targets(
    b: &Belief,
    g: &UniquenessGraph,
    radius: f64,
) -> Result<Vec<usize>, PlannerError> {
    let hoods = neighborhoods(b, g, radius);
    if let Some(i) = hoods.iter().position(|h| h.is_empty()) {
        return Err(PlannerError::EmptyNeighborhood {
            mode: i,
            mode_id: b.modes[i].id,
        });
    }
    // owner[v] lists the modes whose neighborhood contains v
    let mut owner: Vec<Vec<usize>> = vec![Vec::new(); g.nodes().len()];
    for (j, h) in hoods.iter().enumerate() {
        for &v in h {
            owner[v].push(j);
        }
    }
    Ok(hoods
        .iter()
        .enumerate()
        .map(|(i, h)| {
            let mut best = (u64::MAX, usize::MAX);
            for &v in h {
                let w = overlap_weight(g, &owner, i, v);
                if w < best.0 {
                    best = (w, v);
                }
            }
            best.1
        })
        .collect())
}

/// Sum over modes j != i and over edges from `v` into N_j of the edge weight.
/// An edge into a node shared by several other neighborhoods counts once per
/// neighborhood.
fn overlap_weight(g: &UniquenessGraph, owner: &[Vec<usize>], i: usize, v: usize) -> u64 {
    g.neighbors(v)
        .iter()
        .map(|&(u, w)| owner[u].iter().filter(|&&j| j != i).count() as u64 * w as u64)
        .sum()
}
