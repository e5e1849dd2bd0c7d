//! Relevant-neighborhood exploration: the set of nodes whose initial states
//! can influence a given node's state at time t.
//!
//! Nodes are explored one at a time: while unexplored discovered nodes
//! remain, an exponential clock with rate equal to their count fires, a
//! uniform one among them is explored, and its out-neighbors join the
//! discovered set. Exploration stops when the clock passes t.

use crate::graph::LabeledGraph;
use crate::rng;
use rand::Rng;

const SUB_EXPLORE: u64 = 0x0e;

#[derive(Debug, Clone)]
pub struct ExplorationRecord {
    /// Discovered nodes in discovery order; the root comes first.
    pub nodes: Vec<u32>,
    /// Activation (exploration) time per discovered node; None = discovered
    /// but never explored before t.
    pub activation_times: Vec<Option<f64>>,
    /// Edges out of explored nodes.
    pub edges: Vec<(u32, u32)>,
    /// Edge counts per ordered label pair, flattened |A| x |A| (from, to).
    pub edge_counts: Vec<u64>,
    pub num_labels: usize,
}

impl ExplorationRecord {
    /// Number of nodes in the neighborhood.
    pub fn v_t(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self, from: usize, to: usize) -> u64 {
        self.edge_counts[from * self.num_labels + to]
    }
}

pub fn explore_relevant_neighborhood(
    g: &LabeledGraph,
    root: usize,
    t: f64,
    seed: u64,
) -> ExplorationRecord {
    let mut rng = rng::stream(seed, &[SUB_EXPLORE, root as u64]);
    let na = g.labels().len();
    let mut nodes: Vec<u32> = vec![root as u32];
    let mut position = std::collections::HashMap::new();
    position.insert(root as u32, 0usize);
    let mut activation_times: Vec<Option<f64>> = vec![None];
    let mut unexplored: Vec<usize> = vec![0]; // indices into `nodes`
    let mut edges = Vec::new();
    let mut edge_counts = vec![0u64; na * na];
    let mut tau = 0.0f64;
    while !unexplored.is_empty() {
        let gamma = -rng.gen::<f64>().max(f64::MIN_POSITIVE).ln() / unexplored.len() as f64;
        tau += gamma;
        if tau > t {
            break;
        }
        let pick = rng.gen_range(0..unexplored.len());
        let node_idx = unexplored.swap_remove(pick);
        activation_times[node_idx] = Some(tau);
        let u = nodes[node_idx];
        let a = g.label_of(u as usize);
        for &h in g.out_neighbors(u as usize) {
            edges.push((u, h));
            edge_counts[a * na + g.label_of(h as usize)] += 1;
            if !position.contains_key(&h) {
                position.insert(h, nodes.len());
                activation_times.push(None);
                unexplored.push(nodes.len());
                nodes.push(h);
            }
        }
    }
    ExplorationRecord {
        nodes,
        activation_times,
        edges,
        edge_counts,
        num_labels: na,
    }
}
