//! Offline uniqueness graph: free-space samples linked by how many landmark
//! signatures their noiseless readings share.

use std::collections::BTreeSet;
use std::path::Path;

use nalgebra::Point2;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::models::{is_visible, ObsNoiseParams};
use crate::world::{Environment, Pose, Signature, WorldError, DEFAULT_SAMPLE_ATTEMPTS};

pub const GRAPH_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UGraphNode {
    pub pose: Pose,
    /// Sorted, without duplicates.
    pub signatures: Vec<Signature>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Edge {
    pub a: usize,
    pub b: usize,
    pub weight: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "GraphFile", into = "GraphFile")]
pub struct UniquenessGraph {
    nodes: Vec<UGraphNode>,
    /// Sorted by (a, b) with a < b.
    edges: Vec<Edge>,
    adjacency: Vec<Vec<(usize, u32)>>,
}

#[derive(Serialize, Deserialize)]
struct GraphFile {
    format_version: u32,
    nodes: Vec<UGraphNode>,
    edges: Vec<Edge>,
}

impl From<GraphFile> for UniquenessGraph {
    fn from(f: GraphFile) -> Self {
        UniquenessGraph::from_parts(f.nodes, f.edges)
    }
}

impl From<UniquenessGraph> for GraphFile {
    fn from(g: UniquenessGraph) -> Self {
        GraphFile {
            format_version: GRAPH_FORMAT_VERSION,
            nodes: g.nodes,
            edges: g.edges,
        }
    }
}

/// Landmark ids visible from `pose` under noiseless sensing.
pub fn signature_set(env: &Environment, pose: &Pose, sensor: &ObsNoiseParams) -> Vec<Signature> {
    let set: BTreeSet<Signature> = env
        .landmarks()
        .iter()
        .filter(|l| is_visible(env, pose, &l.position, sensor))
        .map(|l| l.id)
        .collect();
    set.into_iter().collect()
}

/// Size of the intersection of two sorted id lists.
pub fn shared_count(a: &[Signature], b: &[Signature]) -> u32 {
    let (mut i, mut j, mut n) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                n += 1;
                i += 1;
                j += 1;
            }
        }
    }
    n
}

impl UniquenessGraph {
    /// Samples `n` free poses and links every pair that shares a signature.
    /// The sensor's range and field of view decide visibility; pass a
    /// panoramic copy to ignore node heading.
    pub fn build<R: Rng + ?Sized>(
        env: &Environment,
        n: usize,
        sensor: &ObsNoiseParams,
        rng: &mut R,
    ) -> Result<Self, WorldError> {
        assert!(n >= 1, "graph needs at least one node");
        let poses = (0..n)
            .map(|_| env.sample_free_pose(rng, DEFAULT_SAMPLE_ATTEMPTS))
            .collect::<Result<Vec<_>, _>>()?;
        let nodes: Vec<UGraphNode> = poses
            .par_iter()
            .map(|p| UGraphNode {
                pose: *p,
                signatures: signature_set(env, p, sensor),
            })
            .collect();
        Ok(Self::from_nodes(nodes))
    }

    /// Computes all pairwise edges for the given nodes.
    pub fn from_nodes(nodes: Vec<UGraphNode>) -> Self {
        let n = nodes.len();
        let edges: Vec<Edge> = (0..n)
            .into_par_iter()
            .flat_map_iter(|a| {
                let nodes = &nodes;
                (a + 1..n).filter_map(move |b| {
                    let weight = shared_count(&nodes[a].signatures, &nodes[b].signatures);
                    (weight > 0).then_some(Edge { a, b, weight })
                })
            })
            .collect();
        Self::from_parts(nodes, edges)
    }

    fn from_parts(nodes: Vec<UGraphNode>, mut edges: Vec<Edge>) -> Self {
        for e in &mut edges {
            if e.a > e.b {
                std::mem::swap(&mut e.a, &mut e.b);
            }
        }
        edges.sort_by_key(|e| (e.a, e.b));
        let mut adjacency = vec![Vec::new(); nodes.len()];
        for e in &edges {
            adjacency[e.a].push((e.b, e.weight));
            adjacency[e.b].push((e.a, e.weight));
        }
        for adj in &mut adjacency {
            adj.sort_unstable();
        }
        Self {
            nodes,
            edges,
            adjacency,
        }
    }

    pub fn nodes(&self) -> &[UGraphNode] {
        &self.nodes
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    /// Neighbours of node `v` with their edge weights, sorted by index.
    pub fn neighbors(&self, v: usize) -> &[(usize, u32)] {
        &self.adjacency[v]
    }

    pub fn weight(&self, a: usize, b: usize) -> u32 {
        self.adjacency[a]
            .binary_search_by_key(&b, |&(n, _)| n)
            .map(|i| self.adjacency[a][i].1)
            .unwrap_or(0)
    }

    /// Node indices within `radius` of `center` in the plane, ascending.
    pub fn nodes_in_neighborhood(&self, center: &Point2<f64>, radius: f64) -> Vec<usize> {
        assert!(radius > 0.0, "neighborhood radius must be positive");
        self.nodes
            .iter()
            .enumerate()
            .filter(|(_, n)| (n.pose.position() - center).norm() <= radius)
            .map(|(i, _)| i)
            .collect()
    }

    /// Checks the stored invariants against the environment.
    pub fn validate(&self, env: &Environment) -> Result<(), String> {
        for (i, n) in self.nodes.iter().enumerate() {
            if !env.is_free(&n.pose) {
                return Err(format!("node {i} is not collision-free"));
            }
            if n.signatures.windows(2).any(|w| w[0] >= w[1]) {
                return Err(format!("node {i} signatures are not a sorted set"));
            }
        }
        for e in &self.edges {
            if e.a == e.b {
                return Err(format!("self edge at node {}", e.a));
            }
            if e.a >= self.nodes.len() || e.b >= self.nodes.len() {
                return Err(format!("edge ({}, {}) out of range", e.a, e.b));
            }
            let expect = shared_count(&self.nodes[e.a].signatures, &self.nodes[e.b].signatures);
            if e.weight == 0 || e.weight != expect {
                return Err(format!(
                    "edge ({}, {}) has weight {} != {expect}",
                    e.a, e.b, e.weight
                ));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("graph serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, WorldError> {
        let v: serde_json::Value =
            serde_json::from_str(text).map_err(|e| WorldError::Parse(e.to_string()))?;
        let found = v
            .get("format_version")
            .and_then(|f| f.as_u64())
            .unwrap_or(0) as u32;
        if found != GRAPH_FORMAT_VERSION {
            return Err(WorldError::Version {
                found,
                expected: GRAPH_FORMAT_VERSION,
            });
        }
        serde_json::from_value(v).map_err(|e| WorldError::Parse(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, WorldError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| WorldError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::{maze, Bounds, Landmark};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn panoramic() -> ObsNoiseParams {
        ObsNoiseParams {
            eta_r: 0.0,
            eta_theta: 0.0,
            sigma_b_r: 0.05,
            sigma_b_theta: 0.02,
            max_range: 5.0,
            fov: 2.0 * std::f64::consts::PI,
        }
    }

    fn node(x: f64, sig: &[u32]) -> UGraphNode {
        UGraphNode {
            pose: Pose::new(x, 0.0, 0.0),
            signatures: sig.to_vec(),
        }
    }

    #[test]
    fn no_landmarks_no_edges() {
        let env = Environment::new(Bounds::new(0.0, 0.0, 5.0, 5.0), vec![], vec![], 0.1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let g = UniquenessGraph::build(&env, 20, &panoramic(), &mut rng).unwrap();
        assert_eq!(g.nodes().len(), 20);
        assert!(g.edges().is_empty());
    }

    #[test]
    fn worked_weight_example() {
        let g = UniquenessGraph::from_nodes(vec![node(0.0, &[1, 2, 3]), node(1.0, &[1, 2, 4])]);
        assert_eq!(
            g.edges(),
            &[Edge {
                a: 0,
                b: 1,
                weight: 2
            }]
        );
        assert_eq!(g.weight(1, 0), 2);
    }

    #[test]
    fn maze_graph_matches_pairwise_recompute() {
        let env = maze::eight_room_maze();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let g = UniquenessGraph::build(&env, 50, &panoramic(), &mut rng).unwrap();
        g.validate(&env).unwrap();
        for a in 0..50 {
            for b in 0..50 {
                let sa: BTreeSet<_> = g.nodes()[a].signatures.iter().collect();
                let sb: BTreeSet<_> = g.nodes()[b].signatures.iter().collect();
                let expect = if a == b {
                    0
                } else {
                    sa.intersection(&sb).count() as u32
                };
                assert_eq!(g.weight(a, b), expect);
            }
        }
    }

    #[test]
    fn same_seed_same_graph() {
        let env = maze::eight_room_maze();
        let g1 = UniquenessGraph::build(&env, 40, &panoramic(), &mut ChaCha8Rng::seed_from_u64(5))
            .unwrap();
        let g2 = UniquenessGraph::build(&env, 40, &panoramic(), &mut ChaCha8Rng::seed_from_u64(5))
            .unwrap();
        assert_eq!(g1.to_json(), g2.to_json());
    }

    #[test]
    fn json_round_trip_and_version() {
        let g = UniquenessGraph::from_nodes(vec![
            node(0.0, &[1, 2, 3]),
            node(1.0, &[2, 9]),
            node(2.0, &[]),
        ]);
        let text = g.to_json();
        assert_eq!(UniquenessGraph::from_json(&text).unwrap(), g);
        let stale = text.replace("\"format_version\":1", "\"format_version\":0");
        assert!(matches!(
            UniquenessGraph::from_json(&stale),
            Err(WorldError::Version { found: 0, .. })
        ));
    }

    #[test]
    fn neighborhood_queries() {
        let env = Environment::new(
            Bounds::new(0.0, 0.0, 10.0, 10.0),
            vec![],
            vec![Landmark::new(1, 5.0, 5.0)],
            0.1,
        )
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let g = UniquenessGraph::build(&env, 60, &panoramic(), &mut rng).unwrap();
        let all = g.nodes_in_neighborhood(&Point2::new(5.0, 5.0), 100.0);
        assert_eq!(all, (0..60).collect::<Vec<_>>());
        assert!(g
            .nodes_in_neighborhood(&Point2::new(5.0, 5.0), 1e-9)
            .is_empty());
        let c = Point2::new(3.0, 6.0);
        let scan: Vec<usize> = (0..60)
            .filter(|&i| {
                let p = g.nodes()[i].pose;
                ((p.x - c.x).powi(2) + (p.y - c.y).powi(2)).sqrt() <= 2.5
            })
            .collect();
        assert_eq!(g.nodes_in_neighborhood(&c, 2.5), scan);
    }
}
