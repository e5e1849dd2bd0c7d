//! Labeled directed multigraphs and their ensemble statistics.

mod generate;
mod io;
mod stats;

pub use generate::{
    sample_cbm, sample_configuration_model, sample_powerlaw_sequence, sample_regular, PowerLawSpec,
};
pub use io::{load_edge_list, read_label_map, write_edge_list, write_label_map};
pub use stats::{
    draw_initial_states, extract_statistics, regular_statistics, Cell, InitialStateRule,
    NodeStatistics,
};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),
    #[error("stub imbalance {imbalance} for class pair ({a},{b}) exceeds repair budget {budget}")]
    UnbalancedStatistics {
        a: usize,
        b: usize,
        imbalance: u64,
        budget: u64,
    },
    #[error("invalid spec: {0}")]
    InvalidSpec(String),
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// Ordered set of distinct node labels (classes).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelSet {
    labels: Vec<String>,
}

impl LabelSet {
    pub fn new(labels: Vec<String>) -> Self {
        let mut seen = std::collections::HashSet::new();
        for l in &labels {
            assert!(seen.insert(l.clone()), "duplicate label {l}");
        }
        assert!(!labels.is_empty());
        LabelSet { labels }
    }

    /// Labels "c0".."c{k-1}".
    pub fn numbered(count: usize) -> Self {
        Self::new((0..count).map(|i| format!("c{i}")).collect())
    }

    pub fn single() -> Self {
        Self::numbered(1)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn name(&self, i: usize) -> &str {
        &self.labels[i]
    }

    pub fn index(&self, name: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == name)
    }

    pub fn names(&self) -> &[String] {
        &self.labels
    }
}

/// Per-label nonnegative counts (in- or out-degrees split by class).
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct DegreeVector(pub Vec<u32>);

impl DegreeVector {
    pub fn zeros(num_labels: usize) -> Self {
        DegreeVector(vec![0; num_labels])
    }

    pub fn total(&self) -> u64 {
        self.0.iter().map(|&x| x as u64).sum()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl std::ops::Index<usize> for DegreeVector {
    type Output = u32;
    fn index(&self, i: usize) -> &u32 {
        &self.0[i]
    }
}

impl std::ops::IndexMut<usize> for DegreeVector {
    fn index_mut(&mut self, i: usize) -> &mut u32 {
        &mut self.0[i]
    }
}

/// Immutable directed multigraph with node labels. Out-edges are stored in
/// compressed sparse rows; self-loops and parallel edges are permitted.
#[derive(Debug, Clone)]
pub struct LabeledGraph {
    labels: LabelSet,
    label_of: Vec<u16>,
    out_offsets: Vec<usize>,
    out_targets: Vec<u32>,
    /// In-degree per (node, source label), flattened n x |A|.
    in_deg: Vec<u32>,
    /// Out-degree per (node, target label), flattened n x |A|.
    out_deg: Vec<u32>,
}

impl LabeledGraph {
    /// Build from an edge list (tail, head). Node count is `label_of.len()`.
    pub fn from_edges(labels: LabelSet, label_of: Vec<u16>, edges: &[(u32, u32)]) -> Self {
        let n = label_of.len();
        let na = labels.len();
        for &(t, h) in edges {
            assert!((t as usize) < n && (h as usize) < n, "edge endpoint out of range");
        }
        let mut counts = vec![0usize; n];
        for &(t, _) in edges {
            counts[t as usize] += 1;
        }
        let mut out_offsets = vec![0usize; n + 1];
        for v in 0..n {
            out_offsets[v + 1] = out_offsets[v] + counts[v];
        }
        let mut out_targets = vec![0u32; edges.len()];
        let mut cursor = out_offsets.clone();
        for &(t, h) in edges {
            out_targets[cursor[t as usize]] = h;
            cursor[t as usize] += 1;
        }
        let mut in_deg = vec![0u32; n * na];
        let mut out_deg = vec![0u32; n * na];
        for &(t, h) in edges {
            let (t, h) = (t as usize, h as usize);
            in_deg[h * na + label_of[t] as usize] += 1;
            out_deg[t * na + label_of[h] as usize] += 1;
        }
        LabeledGraph {
            labels,
            label_of,
            out_offsets,
            out_targets,
            in_deg,
            out_deg,
        }
    }

    pub fn n(&self) -> usize {
        self.label_of.len()
    }

    pub fn labels(&self) -> &LabelSet {
        &self.labels
    }

    pub fn label_of(&self, v: usize) -> usize {
        self.label_of[v] as usize
    }

    pub fn out_neighbors(&self, v: usize) -> &[u32] {
        &self.out_targets[self.out_offsets[v]..self.out_offsets[v + 1]]
    }

    pub fn out_degree(&self, v: usize) -> usize {
        self.out_offsets[v + 1] - self.out_offsets[v]
    }

    /// Total in-degree of v.
    pub fn in_degree(&self, v: usize) -> u64 {
        let na = self.labels.len();
        self.in_deg[v * na..(v + 1) * na].iter().map(|&x| x as u64).sum()
    }

    pub fn in_degree_vec(&self, v: usize) -> DegreeVector {
        let na = self.labels.len();
        DegreeVector(self.in_deg[v * na..(v + 1) * na].to_vec())
    }

    pub fn out_degree_vec(&self, v: usize) -> DegreeVector {
        let na = self.labels.len();
        DegreeVector(self.out_deg[v * na..(v + 1) * na].to_vec())
    }

    /// Total edge count l.
    pub fn edge_count(&self) -> u64 {
        self.out_targets.len() as u64
    }

    /// Edges from class a to class b, counted from out-degree vectors.
    pub fn pair_edge_count(&self, a: usize, b: usize) -> u64 {
        let na = self.labels.len();
        (0..self.n())
            .filter(|&v| self.label_of(v) == a)
            .map(|v| self.out_deg[v * na + b] as u64)
            .sum()
    }

    /// Check the stored degree caches against the adjacency; used in tests.
    pub fn check_consistency(&self) {
        let na = self.labels.len();
        let mut in_deg = vec![0u32; self.n() * na];
        let mut out_deg = vec![0u32; self.n() * na];
        for v in 0..self.n() {
            for &h in self.out_neighbors(v) {
                in_deg[h as usize * na + self.label_of(v)] += 1;
                out_deg[v * na + self.label_of(h as usize)] += 1;
            }
        }
        assert_eq!(in_deg, self.in_deg);
        assert_eq!(out_deg, self.out_deg);
    }
}
