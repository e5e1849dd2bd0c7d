//! Update kernels: stochastic maps from neighbor counts to a distribution
//! over the next state.
//!
//! A kernel is semi-anonymous by construction: it sees only the matrix of
//! counts of out-neighbors per (label, state) cell, never neighbor identities.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DynamicsError {
    #[error("kernel expects {expected} states, got {got}")]
    StateMismatch { expected: usize, got: usize },
    #[error("invalid threshold: {0}")]
    InvalidThreshold(String),
    #[error("invalid payoffs: need c > b >= 0, got b={b}, c={c}")]
    InvalidPayoff { b: f64, c: f64 },
    #[error("malformed table row: {0}")]
    MalformedRow(String),
}

/// Ordered set of state identifiers.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StateSet {
    states: Vec<String>,
}

impl StateSet {
    pub fn new(states: Vec<String>) -> Self {
        let mut seen = std::collections::HashSet::new();
        for s in &states {
            assert!(seen.insert(s.clone()), "duplicate state identifier {s}");
        }
        assert!(states.len() >= 2, "need at least two states");
        StateSet { states }
    }

    /// States {-1, 0, 1} used by the ternary threshold kernel.
    pub fn ternary_signed() -> Self {
        Self::new(vec!["-1".into(), "0".into(), "1".into()])
    }

    /// States {-1, 1} used by the best-response coordination kernel.
    pub fn binary_signed() -> Self {
        Self::new(vec!["-1".into(), "1".into()])
    }

    /// States {R, P, S} used by the rock-paper-scissors kernel.
    pub fn rps() -> Self {
        Self::new(vec!["R".into(), "P".into(), "S".into()])
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn name(&self, i: usize) -> &str {
        &self.states[i]
    }

    pub fn index(&self, name: &str) -> Option<usize> {
        self.states.iter().position(|s| s == name)
    }

    pub fn names(&self) -> &[String] {
        &self.states
    }
}

/// Counts of out-neighbors per (label, state) cell: entry (a, x) at
/// `a * num_states + x`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NeighborCounts {
    pub counts: Vec<u64>,
    pub num_labels: usize,
    pub num_states: usize,
}

impl NeighborCounts {
    pub fn zeros(num_labels: usize, num_states: usize) -> Self {
        NeighborCounts {
            counts: vec![0; num_labels * num_states],
            num_labels,
            num_states,
        }
    }

    pub fn get(&self, label: usize, state: usize) -> u64 {
        self.counts[label * self.num_states + state]
    }

    pub fn add(&mut self, label: usize, state: usize, delta: u64) {
        self.counts[label * self.num_states + state] += delta;
    }

    /// Counts summed over labels, per state.
    pub fn aggregated(&self) -> Vec<u64> {
        let mut agg = vec![0u64; self.num_states];
        for a in 0..self.num_labels {
            for x in 0..self.num_states {
                agg[x] += self.counts[a * self.num_states + x];
            }
        }
        agg
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }
}

/// A stochastic update rule Theta: per-label map from neighbor counts to a
/// probability vector over states.
#[derive(Debug, Clone)]
pub enum UpdateKernel {
    /// Ternary linear threshold: states {-1, 0, 1}; the signed neighbor sum
    /// S = #(state 1) - #(state -1), aggregated over labels, is compared to
    /// the thresholds: S >= a_plus -> 1, S <= -a_minus -> -1, else 0.
    Tltm { a_plus: u32, a_minus: u32 },
    /// Binary best response: states {-1, 1}; coordinating nodes adopt the
    /// majority state, anti-coordinating the minority; ties split 1/2 each.
    Brca { coordinating: bool },
    /// Rock-paper-scissors best response: states {R, P, S}; payoffs
    /// R: b*xR + c*xS, P: c*xR + b*xP, S: c*xP + b*xS; the next state is
    /// uniform over the payoff argmax set.
    Erg { b: f64, c: f64 },
    /// Explicit lookup table per label over flattened count matrices, with a
    /// uniform fallback for unlisted counts.
    Table {
        per_label: Vec<BTreeMap<Vec<u64>, Vec<f64>>>,
        num_states: usize,
    },
    /// Dispatch to a different kernel per node label (all with the same
    /// state set).
    PerLabel(Vec<UpdateKernel>),
}

/// Ternary linear threshold kernel with thresholds >= 1.
pub fn tltm_kernel(a_plus: u32, a_minus: u32) -> Result<UpdateKernel, DynamicsError> {
    if a_plus < 1 || a_minus < 1 {
        return Err(DynamicsError::InvalidThreshold(format!(
            "thresholds must be >= 1, got a_plus={a_plus}, a_minus={a_minus}"
        )));
    }
    Ok(UpdateKernel::Tltm { a_plus, a_minus })
}

/// Majority (coordinating) or minority (anti-coordinating) best response.
pub fn brca_kernel(coordinating: bool) -> UpdateKernel {
    UpdateKernel::Brca { coordinating }
}

/// Rock-paper-scissors best response with win payoff c and tie-class payoff b.
pub fn erg_kernel(b: f64, c: f64) -> Result<UpdateKernel, DynamicsError> {
    if !(c > b && b >= 0.0) {
        return Err(DynamicsError::InvalidPayoff { b, c });
    }
    Ok(UpdateKernel::Erg { b, c })
}

/// Table-driven kernel; every listed row must sum to 1 within 1e-12.
pub fn table_kernel(
    per_label: Vec<BTreeMap<Vec<u64>, Vec<f64>>>,
    num_states: usize,
) -> Result<UpdateKernel, DynamicsError> {
    for table in &per_label {
        for (xi, row) in table {
            if row.len() != num_states {
                return Err(DynamicsError::MalformedRow(format!(
                    "row for {xi:?} has {} entries, expected {num_states}",
                    row.len()
                )));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > 1e-12 || row.iter().any(|&p| !(0.0..=1.0).contains(&p)) {
                return Err(DynamicsError::MalformedRow(format!(
                    "row for {xi:?} is not a probability vector (sum {sum})"
                )));
            }
        }
    }
    Ok(UpdateKernel::Table {
        per_label,
        num_states,
    })
}

impl UpdateKernel {
    pub fn num_states(&self) -> usize {
        match self {
            UpdateKernel::Tltm { .. } => 3,
            UpdateKernel::Brca { .. } => 2,
            UpdateKernel::Erg { .. } => 3,
            UpdateKernel::Table { num_states, .. } => *num_states,
            UpdateKernel::PerLabel(inner) => inner[0].num_states(),
        }
    }

    /// The state set the kernel is defined over.
    pub fn state_set(&self) -> StateSet {
        match self {
            UpdateKernel::Tltm { .. } => StateSet::ternary_signed(),
            UpdateKernel::Brca { .. } => StateSet::binary_signed(),
            UpdateKernel::Erg { .. } => StateSet::rps(),
            UpdateKernel::Table { num_states, .. } => StateSet::new(
                (0..*num_states).map(|i| i.to_string()).collect(),
            ),
            UpdateKernel::PerLabel(inner) => inner[0].state_set(),
        }
    }

    /// True when the output depends on counts only through their sums over
    /// labels.
    pub fn label_blind(&self) -> bool {
        match self {
            UpdateKernel::Tltm { .. } | UpdateKernel::Brca { .. } | UpdateKernel::Erg { .. } => {
                true
            }
            UpdateKernel::Table { .. } => false,
            UpdateKernel::PerLabel(inner) => inner.iter().all(|k| k.label_blind()),
        }
    }

    /// When the output depends only on counts[plus] - counts[minus]
    /// (aggregated over labels), returns those two state indices.
    pub fn signed_difference(&self) -> Option<(usize, usize)> {
        match self {
            UpdateKernel::Tltm { .. } => Some((2, 0)),
            UpdateKernel::Brca { .. } => Some((1, 0)),
            UpdateKernel::Erg { .. } | UpdateKernel::Table { .. } => None,
            UpdateKernel::PerLabel(inner) => {
                let first = inner[0].signed_difference()?;
                inner
                    .iter()
                    .all(|k| k.signed_difference() == Some(first))
                    .then_some(first)
            }
        }
    }

    /// Evaluate on per-state counts aggregated over labels. Only valid for
    /// label-blind kernels.
    pub fn evaluate_aggregate(&self, label: usize, agg: &[u64]) -> Vec<f64> {
        match self {
            UpdateKernel::Tltm { a_plus, a_minus } => {
                let s = agg[2] as i64 - agg[0] as i64;
                let mut out = vec![0.0; 3];
                if s >= *a_plus as i64 {
                    out[2] = 1.0;
                } else if s <= -(*a_minus as i64) {
                    out[0] = 1.0;
                } else {
                    out[1] = 1.0;
                }
                out
            }
            UpdateKernel::Brca { coordinating } => {
                let s = agg[1] as i64 - agg[0] as i64;
                let s = if *coordinating { s } else { -s };
                match s.cmp(&0) {
                    std::cmp::Ordering::Greater => vec![0.0, 1.0],
                    std::cmp::Ordering::Less => vec![1.0, 0.0],
                    std::cmp::Ordering::Equal => vec![0.5, 0.5],
                }
            }
            UpdateKernel::Erg { b, c } => {
                let (xr, xp, xs) = (agg[0] as f64, agg[1] as f64, agg[2] as f64);
                let payoffs = [b * xr + c * xs, c * xr + b * xp, c * xp + b * xs];
                let max = payoffs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let tol = 1e-12 * max.abs().max(1.0);
                let winners: Vec<usize> = (0..3).filter(|&i| payoffs[i] >= max - tol).collect();
                let mut out = vec![0.0; 3];
                for &i in &winners {
                    out[i] = 1.0 / winners.len() as f64;
                }
                out
            }
            UpdateKernel::Table { .. } => panic!("table kernel is not label-blind"),
            UpdateKernel::PerLabel(inner) => inner[label].evaluate_aggregate(0, agg),
        }
    }

    /// Evaluate on a signed difference of aggregated counts; only valid when
    /// `signed_difference` is Some.
    pub fn evaluate_signed(&self, label: usize, s: i64) -> Vec<f64> {
        match self {
            UpdateKernel::Tltm { a_plus, a_minus } => {
                let mut out = vec![0.0; 3];
                if s >= *a_plus as i64 {
                    out[2] = 1.0;
                } else if s <= -(*a_minus as i64) {
                    out[0] = 1.0;
                } else {
                    out[1] = 1.0;
                }
                out
            }
            UpdateKernel::Brca { coordinating } => {
                let s = if *coordinating { s } else { -s };
                match s.cmp(&0) {
                    std::cmp::Ordering::Greater => vec![0.0, 1.0],
                    std::cmp::Ordering::Less => vec![1.0, 0.0],
                    std::cmp::Ordering::Equal => vec![0.5, 0.5],
                }
            }
            UpdateKernel::PerLabel(inner) => inner[label].evaluate_signed(0, s),
            _ => panic!("kernel has no signed-difference reduction"),
        }
    }

    /// Evaluate the kernel for a node with the given label on the full count
    /// matrix.
    pub fn evaluate(&self, label: usize, xi: &NeighborCounts) -> Result<Vec<f64>, DynamicsError> {
        if xi.num_states != self.num_states() {
            return Err(DynamicsError::StateMismatch {
                expected: self.num_states(),
                got: xi.num_states,
            });
        }
        Ok(match self {
            UpdateKernel::Table {
                per_label,
                num_states,
            } => {
                let table = &per_label[label.min(per_label.len() - 1)];
                match table.get(&xi.counts) {
                    Some(row) => row.clone(),
                    None => vec![1.0 / *num_states as f64; *num_states],
                }
            }
            UpdateKernel::PerLabel(inner) => inner[label].evaluate(0, xi)?,
            _ => self.evaluate_aggregate(label, &xi.aggregated()),
        })
    }
}

/// Load a table kernel from JSON: `{"num_states": X, "labels": [ {"rows":
/// [{"xi": [..], "p": [..]}, ...]}, ...]}`.
pub fn table_kernel_from_json(doc: &str) -> Result<UpdateKernel, DynamicsError> {
    #[derive(Deserialize)]
    struct Row {
        xi: Vec<u64>,
        p: Vec<f64>,
    }
    #[derive(Deserialize)]
    struct LabelTable {
        rows: Vec<Row>,
    }
    #[derive(Deserialize)]
    struct Doc {
        num_states: usize,
        labels: Vec<LabelTable>,
    }
    let doc: Doc = serde_json::from_str(doc)
        .map_err(|e| DynamicsError::MalformedRow(format!("json: {e}")))?;
    let per_label = doc
        .labels
        .into_iter()
        .map(|t| t.rows.into_iter().map(|r| (r.xi, r.p)).collect())
        .collect();
    table_kernel(per_label, doc.num_states)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn counts(num_labels: usize, num_states: usize, entries: &[u64]) -> NeighborCounts {
        NeighborCounts {
            counts: entries.to_vec(),
            num_labels,
            num_states,
        }
    }

    #[test]
    fn tltm_threshold_rule() {
        let k = tltm_kernel(2, 2).unwrap();
        // xi_1 = 3, xi_{-1} = 0 -> state 1
        let p = k.evaluate(0, &counts(1, 3, &[0, 0, 3])).unwrap();
        assert_eq!(p, vec![0.0, 0.0, 1.0]);
        // all zero counts -> S = 0 in (-2, 2) -> state 0
        let p = k.evaluate(0, &counts(1, 3, &[0, 0, 0])).unwrap();
        assert_eq!(p, vec![0.0, 1.0, 0.0]);
        let k = tltm_kernel(2, 3).unwrap();
        // S = -3 <= -3 -> state -1
        let p = k.evaluate(0, &counts(1, 3, &[3, 0, 0])).unwrap();
        assert_eq!(p, vec![1.0, 0.0, 0.0]);
    }

    #[test]
    fn tltm_aggregates_over_labels() {
        let k = tltm_kernel(2, 2).unwrap();
        // split 3 ones across two labels: still S = 3
        let p = k.evaluate(0, &counts(2, 3, &[0, 0, 2, 0, 0, 1])).unwrap();
        assert_eq!(p, vec![0.0, 0.0, 1.0]);
    }

    #[test]
    fn brca_majority_minority_tie() {
        let coord = brca_kernel(true);
        let anti = brca_kernel(false);
        let maj = counts(1, 2, &[2, 5]);
        assert_eq!(coord.evaluate(0, &maj).unwrap(), vec![0.0, 1.0]);
        assert_eq!(anti.evaluate(0, &maj).unwrap(), vec![1.0, 0.0]);
        let tie = counts(1, 2, &[3, 3]);
        assert_eq!(coord.evaluate(0, &tie).unwrap(), vec![0.5, 0.5]);
        assert_eq!(anti.evaluate(0, &tie).unwrap(), vec![0.5, 0.5]);
    }

    #[test]
    fn erg_payoff_rule() {
        let k = erg_kernel(1.0, 2.0).unwrap();
        // all neighbors in R: P beats R beats S
        let p = k.evaluate(0, &counts(1, 3, &[5, 0, 0])).unwrap();
        assert_eq!(p, vec![0.0, 1.0, 0.0]);
        // degree-0 node: three-way tie
        let p = k.evaluate(0, &counts(1, 3, &[0, 0, 0])).unwrap();
        assert_eq!(p, vec![1.0 / 3.0; 3]);
        // one of each: payoffs (3, 3, 3)
        let p = k.evaluate(0, &counts(1, 3, &[1, 1, 1])).unwrap();
        assert_eq!(p, vec![1.0 / 3.0; 3]);
    }

    #[test]
    fn erg_rejects_bad_payoffs() {
        assert!(erg_kernel(2.0, 2.0).is_err());
        assert!(erg_kernel(3.0, 2.0).is_err());
    }

    #[test]
    fn table_lookup_and_fallback() {
        let mut t = BTreeMap::new();
        t.insert(vec![1, 0], vec![0.0, 1.0]);
        let k = table_kernel(vec![t], 2).unwrap();
        let p = k.evaluate(0, &counts(1, 2, &[1, 0])).unwrap();
        assert_eq!(p, vec![0.0, 1.0]);
        let p = k.evaluate(0, &counts(1, 2, &[0, 1])).unwrap();
        assert_eq!(p, vec![0.5, 0.5]);
    }

    #[test]
    fn table_rejects_bad_row() {
        let mut t = BTreeMap::new();
        t.insert(vec![1, 0], vec![0.0, 0.9]);
        assert!(table_kernel(vec![t], 2).is_err());
    }

    #[test]
    fn state_mismatch_detected() {
        let k = tltm_kernel(1, 1).unwrap();
        assert!(matches!(
            k.evaluate(0, &counts(1, 2, &[0, 0])),
            Err(DynamicsError::StateMismatch { .. })
        ));
    }

    #[test]
    fn stochasticity_exhaustive_small_counts() {
        // every built-in kernel, all count matrices with total <= 20 (single
        // label; the kernels aggregate over labels anyway)
        let kernels = vec![
            tltm_kernel(2, 2).unwrap(),
            tltm_kernel(1, 3).unwrap(),
            brca_kernel(true),
            brca_kernel(false),
            erg_kernel(1.0, 2.0).unwrap(),
            erg_kernel(0.5, 3.0).unwrap(),
        ];
        for k in kernels {
            let x = k.num_states();
            let mut xi = vec![0u64; x];
            sweep(&k, &mut xi, 0, 20);
        }

        fn sweep(k: &UpdateKernel, xi: &mut Vec<u64>, pos: usize, budget: u64) {
            if pos == xi.len() {
                let nc = NeighborCounts {
                    counts: xi.clone(),
                    num_labels: 1,
                    num_states: xi.len(),
                };
                let p = k.evaluate(0, &nc).unwrap();
                let sum: f64 = p.iter().sum();
                assert!((sum - 1.0).abs() < 1e-12, "{k:?} at {xi:?} sums to {sum}");
                assert!(p.iter().all(|&v| (0.0..=1.0).contains(&v)));
                return;
            }
            for c in 0..=budget {
                xi[pos] = c;
                sweep(k, xi, pos + 1, budget - c);
            }
            xi[pos] = 0;
        }
    }

    #[test]
    fn tltm_is_deterministic_one_hot() {
        let k = tltm_kernel(2, 2).unwrap();
        for a in 0..=6u64 {
            for b in 0..=6u64 {
                let p = k.evaluate(0, &counts(1, 3, &[a, 0, b])).unwrap();
                assert_eq!(p.iter().filter(|&&v| v == 1.0).count(), 1);
                assert_eq!(p.iter().filter(|&&v| v == 0.0).count(), 2);
            }
        }
    }

    #[test]
    fn brca_swap_symmetry() {
        for coordinating in [true, false] {
            let k = brca_kernel(coordinating);
            for a in 0..=6u64 {
                for b in 0..=6u64 {
                    let p = k.evaluate(0, &counts(1, 2, &[a, b])).unwrap();
                    let q = k.evaluate(0, &counts(1, 2, &[b, a])).unwrap();
                    assert_eq!(p[0], q[1]);
                    assert_eq!(p[1], q[0]);
                }
            }
        }
    }

    #[test]
    fn erg_cyclic_symmetry() {
        let k = erg_kernel(1.0, 2.0).unwrap();
        for r in 0..=5u64 {
            for p_ in 0..=5u64 {
                for s in 0..=5u64 {
                    let out = k.evaluate(0, &counts(1, 3, &[r, p_, s])).unwrap();
                    // rotate R->P->S->R in the counts; payoff structure is
                    // cyclic, so the output rotates the same way
                    let rot = k.evaluate(0, &counts(1, 3, &[s, r, p_])).unwrap();
                    assert!((out[0] - rot[1]).abs() < 1e-12);
                    assert!((out[1] - rot[2]).abs() < 1e-12);
                    assert!((out[2] - rot[0]).abs() < 1e-12);
                }
            }
        }
    }
}
