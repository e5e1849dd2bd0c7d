//! Random graph generators: labeled configuration model, block model,
//! regular graphs, and power-law degree sequences.
//!
//! All generators realize an exact per-node degree sequence first, then match
//! out-stubs to in-stubs within each ordered class pair by a uniform random
//! permutation. Self-loops and parallel edges are kept.

use super::{GraphError, LabelSet, LabeledGraph, NodeStatistics};
use crate::rng;
use rand::distributions::Distribution;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::Binomial;

const SUB_MATCH: u64 = 1;
const SUB_REPAIR: u64 = 2;
const SUB_DEGREES: u64 = 3;

/// Truncated power-law out-degree spec: P(k) proportional to k^-beta on
/// 1..=k_max. The optional scaling exponents document the regime in which the
/// asymptotic theory applies; `regime_ok` reports whether they satisfy
/// zeta < min{(1-delta)/2, 1/(beta-1)}.
#[derive(Debug, Clone)]
pub struct PowerLawSpec {
    pub beta: f64,
    pub k_max: u32,
    pub delta: Option<f64>,
    pub zeta: Option<f64>,
}

impl PowerLawSpec {
    pub fn validate(&self) -> Result<(), GraphError> {
        if !(self.beta > 2.0) {
            return Err(GraphError::InvalidSpec(format!(
                "power-law exponent must exceed 2, got {}",
                self.beta
            )));
        }
        if self.k_max < 1 {
            return Err(GraphError::InvalidSpec("k_max must be >= 1".into()));
        }
        Ok(())
    }

    pub fn regime_ok(&self) -> Option<bool> {
        match (self.delta, self.zeta) {
            (Some(d), Some(z)) => Some(z < ((1.0 - d) / 2.0).min(1.0 / (self.beta - 1.0))),
            _ => None,
        }
    }

    /// Mean of the truncated law.
    pub fn mean(&self) -> f64 {
        let norm: f64 = (1..=self.k_max).map(|k| (k as f64).powf(-self.beta)).sum();
        (1..=self.k_max)
            .map(|k| (k as f64).powf(1.0 - self.beta))
            .sum::<f64>()
            / norm
    }
}

/// Per-node degree targets used while assembling a graph.
struct DegreeTargets {
    labels: LabelSet,
    label_of: Vec<u16>,
    /// flattened n x |A|
    k: Vec<u32>,
    d: Vec<u32>,
}

impl DegreeTargets {
    fn n(&self) -> usize {
        self.label_of.len()
    }

    /// Uniform random perfect matching of out-stubs to in-stubs within each
    /// ordered class pair.
    fn match_stubs(&self, seed: u64) -> Vec<(u32, u32)> {
        let na = self.labels.len();
        let n = self.n();
        let mut edges = Vec::new();
        for a in 0..na {
            for b in 0..na {
                let mut tails: Vec<u32> = Vec::new();
                let mut heads: Vec<u32> = Vec::new();
                for v in 0..n {
                    if self.label_of[v] as usize == a {
                        for _ in 0..self.k[v * na + b] {
                            tails.push(v as u32);
                        }
                    }
                    if self.label_of[v] as usize == b {
                        for _ in 0..self.d[v * na + a] {
                            heads.push(v as u32);
                        }
                    }
                }
                assert_eq!(
                    tails.len(),
                    heads.len(),
                    "stub classes must be balanced before matching"
                );
                let mut rng = rng::stream(seed, &[SUB_MATCH, a as u64, b as u64]);
                heads.shuffle(&mut rng);
                edges.extend(tails.into_iter().zip(heads));
            }
        }
        edges
    }

    /// Add stubs to uniformly chosen nodes of the deficient side until every
    /// class pair is balanced. Returns the number of stubs added.
    fn repair_balance(&mut self, seed: u64) -> Result<u64, GraphError> {
        let na = self.labels.len();
        let n = self.n();
        let mut members: Vec<Vec<usize>> = vec![Vec::new(); na];
        for v in 0..n {
            members[self.label_of[v] as usize].push(v);
        }
        let mut added = 0u64;
        for a in 0..na {
            for b in 0..na {
                let out: u64 = members[a].iter().map(|&v| self.k[v * na + b] as u64).sum();
                let inn: u64 = members[b].iter().map(|&v| self.d[v * na + a] as u64).sum();
                if out == inn {
                    continue;
                }
                let (side, need) = if out < inn {
                    (a, inn - out)
                } else {
                    (b, out - inn)
                };
                if members[side].is_empty() {
                    return Err(GraphError::UnbalancedStatistics {
                        a,
                        b,
                        imbalance: need,
                        budget: 0,
                    });
                }
                let mut rng = rng::stream(seed, &[SUB_REPAIR, a as u64, b as u64]);
                for _ in 0..need {
                    let v = members[side][rng.gen_range(0..members[side].len())];
                    if out < inn {
                        self.k[v * na + b] += 1;
                    } else {
                        self.d[v * na + a] += 1;
                    }
                }
                added += need;
            }
        }
        Ok(added)
    }

    fn build(&self, seed: u64) -> LabeledGraph {
        LabeledGraph::from_edges(
            self.labels.clone(),
            self.label_of.clone(),
            &self.match_stubs(seed),
        )
    }
}

/// Largest-remainder apportionment of n into integer cell counts with the
/// given probabilities.
fn largest_remainder(probs: &[f64], n: usize) -> Vec<usize> {
    let mut counts: Vec<usize> = probs.iter().map(|p| (p * n as f64).floor() as usize).collect();
    let assigned: usize = counts.iter().sum();
    let mut order: Vec<usize> = (0..probs.len()).collect();
    order.sort_by(|&i, &j| {
        let ri = probs[i] * n as f64 - counts[i] as f64;
        let rj = probs[j] * n as f64 - counts[j] as f64;
        rj.partial_cmp(&ri).unwrap().then(i.cmp(&j))
    });
    for &i in order.iter().take(n - assigned) {
        counts[i] += 1;
    }
    counts
}

/// Sample a multigraph with n nodes whose per-node (d, k, label) multiset is
/// the largest-remainder rounding of n times the statistics, and whose edges
/// are a uniform matching within each class pair. Residual stub imbalance
/// from rounding is repaired by incrementing degrees of uniformly chosen
/// nodes, up to a budget of sqrt(n) stubs.
pub fn sample_configuration_model(
    stats: &NodeStatistics,
    n: usize,
    seed: u64,
) -> Result<LabeledGraph, GraphError> {
    let na = stats.labels().len();
    let probs: Vec<f64> = stats.cells().iter().map(|c| c.p).collect();
    let counts = largest_remainder(&probs, n);
    let mut label_of = Vec::with_capacity(n);
    let mut k = Vec::with_capacity(n * na);
    let mut d = Vec::with_capacity(n * na);
    for (cell, &count) in stats.cells().iter().zip(&counts) {
        for _ in 0..count {
            label_of.push(cell.a as u16);
            k.extend_from_slice(&cell.k.0);
            d.extend_from_slice(&cell.d.0);
        }
    }
    let mut targets = DegreeTargets {
        labels: stats.labels().clone(),
        label_of,
        k,
        d,
    };
    let budget = (n as f64).sqrt().floor() as u64;
    // measure the imbalance before attempting the repair so the error can
    // report it against the budget
    let mut worst = 0u64;
    {
        let na = targets.labels.len();
        for a in 0..na {
            for b in 0..na {
                let mut out = 0u64;
                let mut inn = 0u64;
                for v in 0..targets.n() {
                    if targets.label_of[v] as usize == a {
                        out += targets.k[v * na + b] as u64;
                    }
                    if targets.label_of[v] as usize == b {
                        inn += targets.d[v * na + a] as u64;
                    }
                }
                worst += out.abs_diff(inn);
            }
        }
    }
    if worst > budget {
        return Err(GraphError::UnbalancedStatistics {
            a: 0,
            b: 0,
            imbalance: worst,
            budget,
        });
    }
    targets.repair_balance(seed)?;
    Ok(targets.build(seed))
}

/// Configuration block model: community c holds `community_sizes[c]` nodes;
/// out-degrees of a community-i node toward community j are i.i.d. Binomial
/// with mean `edge_means[i][j]`, in-degrees Binomial with the matching mean;
/// stub totals are balanced by adding stubs to uniformly chosen nodes, then
/// matched uniformly.
pub fn sample_cbm(
    community_sizes: &[usize],
    edge_means: &[Vec<f64>],
    n: usize,
    seed: u64,
) -> Result<LabeledGraph, GraphError> {
    let na = community_sizes.len();
    if community_sizes.iter().sum::<usize>() != n {
        return Err(GraphError::InvalidSpec(
            "community sizes must sum to n".into(),
        ));
    }
    if edge_means.len() != na || edge_means.iter().any(|r| r.len() != na) {
        return Err(GraphError::InvalidSpec(
            "edge mean matrix must be |A| x |A|".into(),
        ));
    }
    if edge_means.iter().flatten().any(|&m| m < 0.0) {
        return Err(GraphError::InvalidSpec("edge means must be >= 0".into()));
    }
    let mut label_of = Vec::with_capacity(n);
    for (c, &size) in community_sizes.iter().enumerate() {
        label_of.extend(std::iter::repeat(c as u16).take(size));
    }
    let mut k = vec![0u32; n * na];
    let mut d = vec![0u32; n * na];
    let mut rng = rng::stream(seed, &[SUB_DEGREES]);
    for i in 0..na {
        for j in 0..na {
            let m = edge_means[i][j];
            if m == 0.0 || community_sizes[i] == 0 || community_sizes[j] == 0 {
                continue;
            }
            // out-degree of an i-node toward j: Binomial(|j|, m/|j|)
            let p_out = m / community_sizes[j] as f64;
            // in-degree of a j-node from i: Binomial(|i|, m/|j|), mean |i| m/|j|
            let p_in = m / community_sizes[j] as f64;
            if p_out > 1.0 || p_in > 1.0 {
                return Err(GraphError::InvalidSpec(format!(
                    "edge mean {m} too large for community sizes"
                )));
            }
            let bin_out = Binomial::new(community_sizes[j] as u64, p_out)
                .map_err(|e| GraphError::InvalidSpec(e.to_string()))?;
            let bin_in = Binomial::new(community_sizes[i] as u64, p_in)
                .map_err(|e| GraphError::InvalidSpec(e.to_string()))?;
            for v in 0..n {
                if label_of[v] as usize == i {
                    k[v * na + j] = bin_out.sample(&mut rng) as u32;
                }
                if label_of[v] as usize == j {
                    d[v * na + i] = bin_in.sample(&mut rng) as u32;
                }
            }
        }
    }
    let mut targets = DegreeTargets {
        labels: LabelSet::numbered(na),
        label_of,
        k,
        d,
    };
    targets.repair_balance(seed)?;
    Ok(targets.build(seed))
}

/// Regular graph: every node has out-degree k and in-degree k, single class,
/// uniform stub matching.
pub fn sample_regular(k: u32, n: usize, seed: u64) -> LabeledGraph {
    let targets = DegreeTargets {
        labels: LabelSet::single(),
        label_of: vec![0; n],
        k: vec![k; n],
        d: vec![k; n],
    };
    targets.build(seed)
}

/// n i.i.d. draws from the truncated power law P(k) proportional to k^-beta
/// on 1..=k_max. The same sequence serves as both the in- and out-degree
/// sequence, so the two stub totals are equal by construction.
pub fn sample_powerlaw_sequence(
    spec: &PowerLawSpec,
    n: usize,
    seed: u64,
) -> Result<Vec<u32>, GraphError> {
    spec.validate()?;
    let weights: Vec<f64> = (1..=spec.k_max)
        .map(|k| (k as f64).powf(-spec.beta))
        .collect();
    let total: f64 = weights.iter().sum();
    let mut cdf = Vec::with_capacity(weights.len());
    let mut acc = 0.0;
    for w in &weights {
        acc += w / total;
        cdf.push(acc);
    }
    let mut rng = rng::stream(seed, &[SUB_DEGREES]);
    Ok((0..n)
        .map(|_| {
            let u: f64 = rng.gen();
            let idx = cdf.partition_point(|&c| c < u).min(cdf.len() - 1);
            idx as u32 + 1
        })
        .collect())
}
