//! Exact transient distribution of the dynamics on small graphs via
//! uniformization: the chain is embedded in a Poisson(n t) number of jumps of
//! the discrete kernel "pick a uniform node, redraw its state".

use crate::dynamics::{NeighborCounts, UpdateKernel};
use crate::graph::LabeledGraph;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SimulateError {
    #[error("state space has {size} configurations, cap is {cap}")]
    StateSpaceTooLarge { size: u128, cap: u64 },
    #[error("initial distribution has wrong length or does not sum to 1")]
    BadInitial,
}

#[derive(Debug, Clone)]
pub enum ExactInitial {
    /// A single configuration (state index per node).
    PointMass(Vec<u8>),
    /// Full distribution over configurations, indexed by sum_v state_v * |X|^v.
    Distribution(Vec<f64>),
}

#[derive(Debug, Clone)]
pub struct ExactTransient {
    /// P(node v in state x at t), flattened n x |X|.
    pub marginals: Vec<f64>,
    /// Expected per-class state fractions, flattened |A| x |X|.
    pub fractions: Vec<f64>,
    /// Neglected Poisson tail mass (<= 1e-10 unless the series was cut
    /// by the safety cap).
    pub truncation_error: f64,
    pub num_states: usize,
}

const STATE_SPACE_CAP: u64 = 1 << 20;
const TAIL: f64 = 1e-10;

/// Expected state occupation at time t, exact up to a reported Poisson
/// truncation error.
pub fn exact_transient(
    g: &LabeledGraph,
    kernel: &UpdateKernel,
    initial: &ExactInitial,
    t: f64,
) -> Result<ExactTransient, SimulateError> {
    let n = g.n();
    let na = g.labels().len();
    let nx = kernel.num_states();
    let size_u128 = (nx as u128).checked_pow(n as u32).unwrap_or(u128::MAX);
    if size_u128 > STATE_SPACE_CAP as u128 {
        return Err(SimulateError::StateSpaceTooLarge {
            size: size_u128,
            cap: STATE_SPACE_CAP,
        });
    }
    let m = size_u128 as usize;
    let pow: Vec<usize> = (0..n).scan(1usize, |acc, _| {
        let cur = *acc;
        *acc *= nx;
        Some(cur)
    })
    .collect();

    let mut pi = match initial {
        ExactInitial::PointMass(states) => {
            if states.len() != n || states.iter().any(|&s| s as usize >= nx) {
                return Err(SimulateError::BadInitial);
            }
            let idx: usize = states
                .iter()
                .enumerate()
                .map(|(v, &s)| s as usize * pow[v])
                .sum();
            let mut pi = vec![0.0; m];
            pi[idx] = 1.0;
            pi
        }
        ExactInitial::Distribution(d) => {
            if d.len() != m || (d.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
                return Err(SimulateError::BadInitial);
            }
            d.clone()
        }
    };

    // Poisson(n t) weights over jump counts, accumulated until the tail is
    // below TAIL.
    let rate = n as f64 * t;
    let mut weight = (-rate).exp();
    let mut acc_marg = vec![0.0; n * nx];
    let mut covered = 0.0;
    let mut jumps = 0usize;
    // fallback cap well beyond the needed ~rate + O(sqrt(rate)) terms
    let max_jumps = (rate + 12.0 * rate.sqrt() + 64.0).ceil() as usize;
    loop {
        if weight > 0.0 {
            add_marginals(&pi, weight, &mut acc_marg, n, nx, &pow);
            covered += weight;
        }
        if 1.0 - covered <= TAIL || jumps >= max_jumps {
            break;
        }
        pi = apply_jump(g, kernel, &pi, nx, &pow);
        jumps += 1;
        weight *= rate / jumps as f64;
    }

    // normalize by covered mass so marginals stay stochastic
    for v in &mut acc_marg {
        *v /= covered;
    }
    let mut class_count = vec![0usize; na];
    for v in 0..n {
        class_count[g.label_of(v)] += 1;
    }
    let mut fractions = vec![0.0; na * nx];
    for v in 0..n {
        let a = g.label_of(v);
        for x in 0..nx {
            fractions[a * nx + x] += acc_marg[v * nx + x] / class_count[a] as f64;
        }
    }
    Ok(ExactTransient {
        marginals: acc_marg,
        fractions,
        truncation_error: 1.0 - covered,
        num_states: nx,
    })
}

fn add_marginals(pi: &[f64], w: f64, acc: &mut [f64], n: usize, nx: usize, pow: &[usize]) {
    for (idx, &p) in pi.iter().enumerate() {
        if p == 0.0 {
            continue;
        }
        for v in 0..n {
            let s = (idx / pow[v]) % nx;
            acc[v * nx + s] += w * p;
        }
    }
}

fn apply_jump(
    g: &LabeledGraph,
    kernel: &UpdateKernel,
    pi: &[f64],
    nx: usize,
    pow: &[usize],
) -> Vec<f64> {
    let n = g.n();
    let mut out = vec![0.0; pi.len()];
    let na = g.labels().len();
    let mut xi = NeighborCounts::zeros(na, nx);
    for (idx, &p) in pi.iter().enumerate() {
        if p == 0.0 {
            continue;
        }
        let share = p / n as f64;
        for v in 0..n {
            xi.counts.iter_mut().for_each(|c| *c = 0);
            for &h in g.out_neighbors(v) {
                let s = (idx / pow[h as usize]) % nx;
                xi.add(g.label_of(h as usize), s, 1);
            }
            let probs = kernel
                .evaluate(g.label_of(v), &xi)
                .expect("kernel/state-set mismatch");
            let s_v = (idx / pow[v]) % nx;
            let base = idx - s_v * pow[v];
            for (x, &q) in probs.iter().enumerate() {
                if q > 0.0 {
                    out[base + x * pow[v]] += share * q;
                }
            }
        }
    }
    out
}
