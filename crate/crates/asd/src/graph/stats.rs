//! Ensemble statistics: the joint law of (in-degree vector, out-degree
//! vector, label) plus per-class initial-state fractions, and the derived
//! edge-perspective quantities.

use super::{DegreeVector, GraphError, LabelSet, LabeledGraph};
use crate::dynamics::StateSet;
use crate::rng;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Single-class statistics of a k-regular graph (in- and out-degree both k)
/// with a uniform initial-state law.
pub fn regular_statistics(k: u32, states: &StateSet) -> NodeStatistics {
    let cells = vec![Cell {
        d: DegreeVector(vec![k]),
        k: DegreeVector(vec![k]),
        a: 0,
        p: 1.0,
    }];
    let row = vec![1.0 / states.len() as f64; states.len()];
    NodeStatistics::new(LabelSet::single(), states.clone(), cells, vec![row])
        .expect("point-mass statistics are always valid")
}

/// One cell of the joint histogram: P(node has in-degrees d, out-degrees k,
/// label a) = p.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub d: DegreeVector,
    pub k: DegreeVector,
    pub a: usize,
    pub p: f64,
}

/// Node statistics: joint (d, k, a) histogram and initial-state conditionals.
#[derive(Debug, Clone)]
pub struct NodeStatistics {
    labels: LabelSet,
    states: StateSet,
    /// Sorted by (a, d, k); probabilities sum to 1.
    cells: Vec<Cell>,
    /// Initial-state distribution per class, rows sum to 1.
    p_s_given_a: Vec<Vec<f64>>,
}

impl NodeStatistics {
    pub fn new(
        labels: LabelSet,
        states: StateSet,
        mut cells: Vec<Cell>,
        p_s_given_a: Vec<Vec<f64>>,
    ) -> Result<Self, GraphError> {
        let total: f64 = cells.iter().map(|c| c.p).sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(GraphError::InvalidDistribution(format!(
                "cell probabilities sum to {total}"
            )));
        }
        if cells.iter().any(|c| c.p < 0.0 || c.a >= labels.len()) {
            return Err(GraphError::InvalidDistribution(
                "negative probability or label out of range".into(),
            ));
        }
        if cells
            .iter()
            .any(|c| c.d.len() != labels.len() || c.k.len() != labels.len())
        {
            return Err(GraphError::InvalidDistribution(
                "degree vector length does not match label count".into(),
            ));
        }
        if p_s_given_a.len() != labels.len() {
            return Err(GraphError::InvalidDistribution(
                "need one initial-state row per class".into(),
            ));
        }
        for row in &p_s_given_a {
            if row.len() != states.len() {
                return Err(GraphError::InvalidDistribution(
                    "initial-state row length does not match state count".into(),
                ));
            }
            let s: f64 = row.iter().sum();
            if (s - 1.0).abs() > 1e-12 {
                return Err(GraphError::InvalidDistribution(format!(
                    "initial-state row sums to {s}"
                )));
            }
        }
        cells.sort_by(|x, y| (x.a, &x.d, &x.k).cmp(&(y.a, &y.d, &y.k)));
        // merge duplicates
        let mut merged: Vec<Cell> = Vec::with_capacity(cells.len());
        for c in cells {
            match merged.last_mut() {
                Some(last) if last.a == c.a && last.d == c.d && last.k == c.k => last.p += c.p,
                _ => merged.push(c),
            }
        }
        Ok(NodeStatistics {
            labels,
            states,
            cells: merged,
            p_s_given_a,
        })
    }

    pub fn labels(&self) -> &LabelSet {
        &self.labels
    }

    pub fn states(&self) -> &StateSet {
        &self.states
    }

    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    pub fn p_s_given_a(&self) -> &[Vec<f64>] {
        &self.p_s_given_a
    }

    /// Class marginal P(label = a).
    pub fn p_class(&self, a: usize) -> f64 {
        self.cells.iter().filter(|c| c.a == a).map(|c| c.p).sum()
    }

    /// Out-degree marginal p_{k|a}, normalized over cells of class a.
    pub fn k_marginal(&self, a: usize) -> Vec<(DegreeVector, f64)> {
        let pa = self.p_class(a);
        let mut map: BTreeMap<DegreeVector, f64> = BTreeMap::new();
        if pa == 0.0 {
            return vec![];
        }
        for c in self.cells.iter().filter(|c| c.a == a) {
            *map.entry(c.k.clone()).or_insert(0.0) += c.p / pa;
        }
        map.into_iter().collect()
    }

    /// Joint edge-perspective law q^a_{d,k|b}: the (d, k) law of a class-b
    /// node reached by traversing an edge out of a class-a node. Weight of a
    /// class-b cell is d_a * p, normalized.
    pub fn q_joint(&self, a: usize, b: usize) -> Vec<(DegreeVector, DegreeVector, f64)> {
        let norm: f64 = self
            .cells
            .iter()
            .filter(|c| c.a == b)
            .map(|c| c.d[a] as f64 * c.p)
            .sum();
        if norm <= 0.0 {
            return vec![];
        }
        self.cells
            .iter()
            .filter(|c| c.a == b && c.d[a] > 0)
            .map(|c| (c.d.clone(), c.k.clone(), c.d[a] as f64 * c.p / norm))
            .collect()
    }

    /// Out-degree marginal of q^a_{.|b}.
    pub fn q_k_marginal(&self, a: usize, b: usize) -> Vec<(DegreeVector, f64)> {
        let mut map: BTreeMap<DegreeVector, f64> = BTreeMap::new();
        for (_, k, w) in self.q_joint(a, b) {
            *map.entry(k).or_insert(0.0) += w;
        }
        map.into_iter().collect()
    }

    /// Expected number of a->b edges for a graph of size n, computed from
    /// in-degrees of class-b nodes.
    pub fn pair_edge_count(&self, a: usize, b: usize, n: usize) -> f64 {
        n as f64
            * self
                .cells
                .iter()
                .filter(|c| c.a == b)
                .map(|c| c.d[a] as f64 * c.p)
                .sum::<f64>()
    }

    /// Same quantity computed from out-degrees of class-a nodes; equals
    /// `pair_edge_count` for every consistent statistics object.
    pub fn pair_edge_count_from_out(&self, a: usize, b: usize, n: usize) -> f64 {
        n as f64
            * self
                .cells
                .iter()
                .filter(|c| c.a == a)
                .map(|c| c.k[b] as f64 * c.p)
                .sum::<f64>()
    }

    /// Mean total degree: E[d.total()] = E[k.total()] = l/n.
    pub fn mean_degree(&self) -> f64 {
        self.cells
            .iter()
            .map(|c| c.d.total() as f64 * c.p)
            .sum()
    }

    /// Largest gap between the two ways of counting l_{a,b}, relative to n=1.
    pub fn max_pair_imbalance(&self) -> f64 {
        let na = self.labels.len();
        let mut worst: f64 = 0.0;
        for a in 0..na {
            for b in 0..na {
                let d = (self.pair_edge_count(a, b, 1) - self.pair_edge_count_from_out(a, b, 1))
                    .abs();
                worst = worst.max(d);
            }
        }
        worst
    }

    /// Restrict each class's out-degree law to the smallest prefix (by
    /// probability, descending) holding at least `mass` of it, for
    /// finite-support ODE evaluation. Returns the truncated statistics and the
    /// discarded tail mass per class.
    pub fn truncate_k(&self, mass: f64) -> (NodeStatistics, Vec<f64>) {
        let na = self.labels.len();
        let mut keep: Vec<Cell> = Vec::new();
        let mut discarded = vec![0.0; na];
        for a in 0..na {
            let mut cells: Vec<&Cell> = self.cells.iter().filter(|c| c.a == a).collect();
            cells.sort_by(|x, y| y.p.partial_cmp(&x.p).unwrap().then((&x.d, &x.k).cmp(&(&y.d, &y.k))));
            let pa = self.p_class(a);
            let mut acc = 0.0;
            for c in cells {
                if pa > 0.0 && acc >= mass * pa {
                    discarded[a] += c.p / pa;
                } else {
                    acc += c.p;
                    keep.push(c.clone());
                }
            }
        }
        let total: f64 = keep.iter().map(|c| c.p).sum();
        for c in &mut keep {
            c.p /= total;
        }
        let stats = NodeStatistics::new(
            self.labels.clone(),
            self.states.clone(),
            keep,
            self.p_s_given_a.clone(),
        )
        .expect("renormalized truncation is a distribution");
        (stats, discarded)
    }

    pub fn to_json(&self) -> String {
        let doc = StatsDoc {
            labels: self.labels.names().to_vec(),
            states: self.states.names().to_vec(),
            cells: self
                .cells
                .iter()
                .map(|c| CellDoc {
                    d: c.d.0.clone(),
                    k: c.k.0.clone(),
                    a: self.labels.name(c.a).to_string(),
                    p: c.p,
                })
                .collect(),
            p_s_given_a: self
                .labels
                .names()
                .iter()
                .zip(&self.p_s_given_a)
                .map(|(l, row)| (l.clone(), row.clone()))
                .collect(),
        };
        serde_json::to_string_pretty(&doc).expect("statistics serialize")
    }

    pub fn from_json(doc: &str) -> Result<Self, GraphError> {
        let doc: StatsDoc = serde_json::from_str(doc)
            .map_err(|e| GraphError::InvalidDistribution(format!("json: {e}")))?;
        let labels = LabelSet::new(doc.labels);
        let states = StateSet::new(doc.states);
        let cells = doc
            .cells
            .into_iter()
            .map(|c| {
                let a = labels
                    .index(&c.a)
                    .ok_or_else(|| GraphError::InvalidDistribution(format!("unknown label {}", c.a)))?;
                Ok(Cell {
                    d: DegreeVector(c.d),
                    k: DegreeVector(c.k),
                    a,
                    p: c.p,
                })
            })
            .collect::<Result<Vec<_>, GraphError>>()?;
        let mut p_s_given_a = vec![Vec::new(); labels.len()];
        for (l, row) in doc.p_s_given_a {
            let a = labels
                .index(&l)
                .ok_or_else(|| GraphError::InvalidDistribution(format!("unknown label {l}")))?;
            p_s_given_a[a] = row;
        }
        NodeStatistics::new(labels, states, cells, p_s_given_a)
    }
}

#[derive(Serialize, Deserialize)]
struct CellDoc {
    d: Vec<u32>,
    k: Vec<u32>,
    a: String,
    p: f64,
}

#[derive(Serialize, Deserialize)]
struct StatsDoc {
    labels: Vec<String>,
    states: Vec<String>,
    cells: Vec<CellDoc>,
    p_s_given_a: Vec<(String, Vec<f64>)>,
}

/// How initial node states are assigned.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum InitialStateRule {
    /// Draw i.i.d. per node from the class's state distribution.
    FractionPerClass(Vec<Vec<f64>>),
    /// Explicit per-node state indices.
    Explicit(Vec<usize>),
}

/// Materialize initial states for a graph.
pub fn draw_initial_states(
    g: &LabeledGraph,
    rule: &InitialStateRule,
    num_states: usize,
    seed: u64,
) -> Vec<u8> {
    match rule {
        InitialStateRule::Explicit(states) => {
            assert_eq!(states.len(), g.n());
            states.iter().map(|&s| s as u8).collect()
        }
        InitialStateRule::FractionPerClass(rows) => {
            let mut rng = rng::stream(seed, &[0x1217]);
            let _ = num_states;
            (0..g.n())
                .map(|v| {
                    let row = &rows[g.label_of(v)];
                    let u: f64 = rng.gen();
                    let mut acc = 0.0;
                    for (i, &p) in row.iter().enumerate() {
                        acc += p;
                        if u < acc {
                            return i as u8;
                        }
                    }
                    (row.len() - 1) as u8
                })
                .collect()
        }
    }
}

/// Exact empirical statistics of a graph, with initial-state conditionals
/// taken from `rule` (empirical per class for explicit assignments).
pub fn extract_statistics(
    g: &LabeledGraph,
    states: &StateSet,
    rule: &InitialStateRule,
) -> NodeStatistics {
    let n = g.n();
    let na = g.labels().len();
    let mut hist: BTreeMap<(usize, DegreeVector, DegreeVector), usize> = BTreeMap::new();
    for v in 0..n {
        *hist
            .entry((g.label_of(v), g.in_degree_vec(v), g.out_degree_vec(v)))
            .or_insert(0) += 1;
    }
    let cells = hist
        .into_iter()
        .map(|((a, d, k), count)| Cell {
            d,
            k,
            a,
            p: count as f64 / n as f64,
        })
        .collect();
    let p_s_given_a = match rule {
        InitialStateRule::FractionPerClass(rows) => rows.clone(),
        InitialStateRule::Explicit(assignment) => {
            assert_eq!(assignment.len(), n);
            let mut counts = vec![vec![0usize; states.len()]; na];
            let mut class_sizes = vec![0usize; na];
            for v in 0..n {
                counts[g.label_of(v)][assignment[v]] += 1;
                class_sizes[g.label_of(v)] += 1;
            }
            counts
                .iter()
                .zip(&class_sizes)
                .map(|(row, &size)| {
                    if size == 0 {
                        // empty class: keep a valid row
                        let mut r = vec![0.0; states.len()];
                        r[0] = 1.0;
                        r
                    } else {
                        row.iter().map(|&c| c as f64 / size as f64).collect()
                    }
                })
                .collect()
        }
    };
    NodeStatistics::new(g.labels().clone(), states.clone(), cells, p_s_given_a)
        .expect("empirical histogram is a distribution")
}
