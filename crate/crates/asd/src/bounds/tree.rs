//! The labeled branching process truncated at time t.
//!
//! The root's out-degree vector is drawn from the node law p_{k|a}, every
//! other node's from the edge-perspective law q^b_{k|a} of its discovering
//! edge. Nodes are explored by the same clock as the graph neighborhood:
//! exponential with rate equal to the number of unexplored nodes, uniform
//! choice among them, stopping once the clock passes t.

use crate::graph::{DegreeVector, NodeStatistics};
use crate::rng;
use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;

const SUB_TREE: u64 = 0x7e;

/// Hard cap on generated nodes; beyond it the sample is marked partial.
pub const TREE_NODE_BUDGET: usize = 10_000_000;

#[derive(Debug, Clone)]
pub struct TreeNode {
    pub class: usize,
    /// None for the root.
    pub parent: Option<u32>,
    /// Exploration time; None if the node was never explored before t.
    pub activation: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct TruncatedTree {
    /// Nodes in discovery order; the root comes first.
    pub nodes: Vec<TreeNode>,
    /// Edge counts W per ordered (from label b, to label a) pair, flattened.
    pub edge_counts: Vec<u64>,
    pub num_labels: usize,
    /// True if the node budget stopped growth before the clock passed t.
    pub budget_exceeded: bool,
}

impl TruncatedTree {
    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    /// Number of edges from label-b nodes to label-a nodes.
    pub fn w(&self, b: usize, a: usize) -> u64 {
        self.edge_counts[b * self.num_labels + a]
    }

    pub fn explored_count(&self) -> usize {
        self.nodes.iter().filter(|n| n.activation.is_some()).count()
    }

    /// Activation times are increasing along every root path.
    pub fn check_consistency(&self) {
        let mut counts = vec![0u64; self.num_labels * self.num_labels];
        for node in &self.nodes {
            if let Some(p) = node.parent {
                let parent = &self.nodes[p as usize];
                counts[parent.class * self.num_labels + node.class] += 1;
                if let Some(ta) = node.activation {
                    let tp = parent.activation.expect("explored child of unexplored parent");
                    assert!(tp < ta, "activation times must increase along root paths");
                }
            }
        }
        assert_eq!(counts, self.edge_counts);
    }
}

/// Categorical sampler over degree vectors; empty laws yield degree zero.
struct LawSampler {
    degrees: Vec<DegreeVector>,
    idx: Option<WeightedIndex<f64>>,
    num_labels: usize,
}

impl LawSampler {
    fn new(law: Vec<(DegreeVector, f64)>, num_labels: usize) -> Self {
        let (degrees, weights): (Vec<_>, Vec<f64>) = law.into_iter().unzip();
        let idx = if weights.iter().any(|&w| w > 0.0) {
            Some(WeightedIndex::new(&weights).expect("valid weights"))
        } else {
            None
        };
        LawSampler {
            degrees,
            idx,
            num_labels,
        }
    }

    fn draw<R: Rng>(&self, rng: &mut R) -> DegreeVector {
        match &self.idx {
            Some(idx) => self.degrees[idx.sample(rng)].clone(),
            None => DegreeVector::zeros(self.num_labels),
        }
    }
}

pub fn sample_truncated_tree(stats: &NodeStatistics, t: f64, seed: u64) -> TruncatedTree {
    let mut rng = rng::stream(seed, &[SUB_TREE]);
    let na = stats.labels().len();

    let class_weights: Vec<f64> = (0..na).map(|a| stats.p_class(a)).collect();
    let class_idx = WeightedIndex::new(&class_weights).expect("class mix");
    let root_laws: Vec<LawSampler> = (0..na)
        .map(|a| LawSampler::new(stats.k_marginal(a), na))
        .collect();
    // child_laws[b * na + a]: out-degree of a class-a node reached from class b
    let child_laws: Vec<LawSampler> = (0..na * na)
        .map(|i| LawSampler::new(stats.q_k_marginal(i / na, i % na), na))
        .collect();

    let root_class = class_idx.sample(&mut rng);
    let mut nodes = vec![TreeNode {
        class: root_class,
        parent: None,
        activation: None,
    }];
    let mut unexplored: Vec<usize> = vec![0];
    let mut edge_counts = vec![0u64; na * na];
    let mut budget_exceeded = false;
    let mut tau = 0.0f64;

    while !unexplored.is_empty() {
        let gamma = -rng.gen::<f64>().max(f64::MIN_POSITIVE).ln() / unexplored.len() as f64;
        tau += gamma;
        if tau > t {
            break;
        }
        let pick = rng.gen_range(0..unexplored.len());
        let node_idx = unexplored.swap_remove(pick);
        nodes[node_idx].activation = Some(tau);
        let b = nodes[node_idx].class;
        let k = match nodes[node_idx].parent {
            None => root_laws[b].draw(&mut rng),
            Some(p) => child_laws[nodes[p as usize].class * na + b].draw(&mut rng),
        };
        for a in 0..na {
            edge_counts[b * na + a] += k[a] as u64;
            for _ in 0..k[a] {
                unexplored.push(nodes.len());
                nodes.push(TreeNode {
                    class: a,
                    parent: Some(node_idx as u32),
                    activation: None,
                });
            }
        }
        if nodes.len() > TREE_NODE_BUDGET {
            budget_exceeded = true;
            break;
        }
    }
    TruncatedTree {
        nodes,
        edge_counts,
        num_labels: na,
        budget_exceeded,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{regular_statistics, Cell, LabelSet, NodeStatistics};
    use crate::dynamics::StateSet;

    fn single_class_stats(k: u32) -> NodeStatistics {
        regular_statistics(k, &StateSet::new(vec!["0".into(), "1".into()]))
    }

    #[test]
    fn zero_horizon_keeps_root_alone() {
        let stats = single_class_stats(3);
        for seed in 0..50 {
            let tree = sample_truncated_tree(&stats, 0.0, seed);
            assert_eq!(tree.node_count(), 1);
            assert_eq!(tree.w(0, 0), 0);
            assert_eq!(tree.explored_count(), 0);
        }
    }

    #[test]
    fn zero_degree_stops_after_root() {
        let stats = single_class_stats(0);
        for seed in 0..50 {
            let tree = sample_truncated_tree(&stats, 100.0, seed);
            assert_eq!(tree.node_count(), 1);
            assert_eq!(tree.explored_count(), 1);
        }
    }

    #[test]
    fn consistency_and_shape_on_mixed_statistics() {
        let labels = LabelSet::numbered(2);
        let states = StateSet::new(vec!["0".into(), "1".into()]);
        let cells = vec![
            Cell {
                d: DegreeVector(vec![2, 1]),
                k: DegreeVector(vec![2, 1]),
                a: 0,
                p: 0.5,
            },
            Cell {
                d: DegreeVector(vec![1, 1]),
                k: DegreeVector(vec![1, 1]),
                a: 1,
                p: 0.5,
            },
        ];
        let stats =
            NodeStatistics::new(labels, states, cells, vec![vec![1.0, 0.0], vec![0.5, 0.5]])
                .unwrap();
        for seed in 0..100 {
            let tree = sample_truncated_tree(&stats, 1.5, seed);
            tree.check_consistency();
        }
    }

    #[test]
    fn path_tree_node_count_matches_renewal_recursion() {
        // Out-degree identically 1: the tree is a path with exactly one
        // unexplored node at all times, so explorations form a rate-1 Poisson
        // process and the node count at time t is 1 + Poisson(t).
        let stats = single_class_stats(1);
        let t = 1.0;
        let trials = 100_000;
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        for seed in 0..trials {
            let n = sample_truncated_tree(&stats, t, seed as u64).node_count() as f64;
            sum += n;
            sum_sq += n * n;
        }
        let mean = sum / trials as f64;
        let var = sum_sq / trials as f64 - mean * mean;
        let expect = 1.0 + t;
        let sigma = (var / trials as f64).sqrt();
        assert!(
            (mean - expect).abs() <= 3.0 * sigma,
            "mean {mean} vs {expect} (3 sigma = {})",
            3.0 * sigma
        );
    }

    /// Upper chi-square critical values at significance 0.001 for df 1..=10.
    const CHI2_CRIT_999: [f64; 10] = [
        10.828, 13.816, 16.266, 18.467, 20.515, 22.458, 24.322, 26.125, 27.877, 29.588,
    ];

    #[test]
    fn root_and_child_degrees_match_their_laws() {
        let labels = LabelSet::single();
        let states = StateSet::new(vec!["0".into(), "1".into()]);
        let cells = vec![
            Cell {
                d: DegreeVector(vec![1]),
                k: DegreeVector(vec![1]),
                a: 0,
                p: 0.5,
            },
            Cell {
                d: DegreeVector(vec![3]),
                k: DegreeVector(vec![3]),
                a: 0,
                p: 0.5,
            },
        ];
        let stats =
            NodeStatistics::new(labels, states, cells, vec![vec![1.0, 0.0]]).unwrap();
        // p puts 1/2 on degree 1 and 3; q = size-biased: 1/4 on 1, 3/4 on 3.
        let trials = 100_000u64;
        let mut root_counts = [0u64; 2];
        let mut child_counts = [0u64; 2];
        let mut skipped = 0u64;
        for seed in 0..trials {
            // the law is supercritical (size-biased mean 2.5), so keep the
            // horizon short and condition on the root being explored
            let tree = sample_truncated_tree(&stats, 2.0, seed);
            let root_deg = tree
                .nodes
                .iter()
                .filter(|n| n.parent == Some(0))
                .count();
            if tree.nodes[0].activation.is_none() {
                skipped += 1;
                continue;
            }
            root_counts[if root_deg == 1 { 0 } else { 1 }] += 1;
            // first explored non-root child, if any
            if let Some((i, _)) = tree
                .nodes
                .iter()
                .enumerate()
                .find(|(_, n)| n.parent.is_some() && n.activation.is_some())
            {
                let deg = tree
                    .nodes
                    .iter()
                    .filter(|n| n.parent == Some(i as u32))
                    .count();
                child_counts[if deg == 1 { 0 } else { 1 }] += 1;
            }
        }
        assert!(skipped < trials / 4);
        let chi2 = |counts: &[u64; 2], probs: &[f64; 2]| {
            let total: u64 = counts.iter().sum();
            counts
                .iter()
                .zip(probs)
                .map(|(&c, &p)| {
                    let e = p * total as f64;
                    (c as f64 - e).powi(2) / e
                })
                .sum::<f64>()
        };
        let root_stat = chi2(&root_counts, &[0.5, 0.5]);
        let child_stat = chi2(&child_counts, &[0.25, 0.75]);
        assert!(root_stat < CHI2_CRIT_999[0], "root chi2 {root_stat}");
        assert!(child_stat < CHI2_CRIT_999[0], "child chi2 {child_stat}");
    }
}
