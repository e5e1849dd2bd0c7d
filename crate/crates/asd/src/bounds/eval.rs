//! Numeric evaluation of the approximation (topological), concentration, and
//! ODE-distance bounds, with Monte Carlo tail estimation for the branching
//! process edge counts.

use super::tree::sample_truncated_tree;
use super::BoundsError;
use crate::dynamics::UpdateKernel;
use crate::graph::{DegreeVector, NodeStatistics};
use crate::meanfield::{MeanFieldError, MeanFieldState, PhiMode, RhsPlan};
use crate::rng;
use rand::Rng;
use rayon::prelude::*;
use std::collections::BTreeMap;

/// Binomial tail estimate with Wilson score confidence interval.
#[derive(Debug, Clone, Copy)]
pub struct WilsonTail {
    pub successes: u64,
    pub trials: u64,
}

impl WilsonTail {
    pub fn point(&self) -> f64 {
        self.successes as f64 / self.trials as f64
    }

    pub fn upper(&self, z: f64) -> f64 {
        let (n, p) = (self.trials as f64, self.point());
        let z2 = z * z;
        let center = (p + z2 / (2.0 * n)) / (1.0 + z2 / n);
        let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / (1.0 + z2 / n);
        (center + half).min(1.0)
    }

    pub fn lower(&self, z: f64) -> f64 {
        let (n, p) = (self.trials as f64, self.point());
        let z2 = z * z;
        let center = (p + z2 / (2.0 * n)) / (1.0 + z2 / n);
        let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / (1.0 + z2 / n);
        (center - half).max(0.0)
    }
}

/// Cut points x_{b,a} for the topological bound: fixed values (flattened
/// b * |A| + a, ignored for pairs without edges) or a search over powers of
/// two per pair.
#[derive(Debug, Clone)]
pub enum CutChoice {
    Fixed(Vec<f64>),
    Optimize { max_exponent: u32 },
}

#[derive(Debug, Clone)]
pub struct PairTerms {
    pub b: usize,
    pub a: usize,
    pub cut: f64,
    /// Monte Carlo point estimate of P(W > cut).
    pub tail_point: f64,
    /// Wilson upper confidence limit, the value used in the bound.
    pub tail_upper: f64,
    /// Same-pair repeated-stub term x(x+1)/2 * E_q[d_b] / l.
    pub pairing: f64,
    /// Cross-class collision term.
    pub cross: f64,
}

impl PairTerms {
    pub fn total(&self) -> f64 {
        self.tail_upper + self.pairing + self.cross
    }
}

#[derive(Debug, Clone)]
pub struct TopologicalBound {
    pub value: f64,
    pub terms: Vec<PairTerms>,
    pub trials: usize,
    /// z-score of the Wilson interval applied to tail estimates.
    pub z: f64,
}

const SUB_TREE_TRIALS: u64 = 0x10b;
const WILSON_Z: f64 = 1.96;

/// Monte Carlo edge-count samples of the truncated branching process, sorted
/// per ordered (b, a) pair.
fn tree_edge_samples(
    stats: &NodeStatistics,
    t: f64,
    trials: usize,
    seed: u64,
) -> Vec<Vec<u64>> {
    let na = stats.labels().len();
    let counts: Vec<Vec<u64>> = (0..trials)
        .into_par_iter()
        .map(|i| {
            let s = rng::stream(seed, &[SUB_TREE_TRIALS, i as u64]).gen::<u64>();
            sample_truncated_tree(stats, t, s).edge_counts
        })
        .collect();
    let mut per_pair = vec![Vec::with_capacity(trials); na * na];
    for c in &counts {
        for (pair, &w) in c.iter().enumerate() {
            per_pair[pair].push(w);
        }
    }
    for v in &mut per_pair {
        v.sort_unstable();
    }
    per_pair
}

fn tail(samples: &[u64], x: f64) -> WilsonTail {
    let below = samples.partition_point(|&w| (w as f64) <= x);
    WilsonTail {
        successes: (samples.len() - below) as u64,
        trials: samples.len() as u64,
    }
}

/// Total variation gap between the branching-process tree and the relevant
/// neighborhood of a uniform node, as a computable upper bound: per-pair tail
/// of W plus repeated-stub and cross-class collision terms.
pub fn topological_bound(
    stats: &NodeStatistics,
    n: usize,
    t: f64,
    trials: usize,
    seed: u64,
    cuts: &CutChoice,
) -> TopologicalBound {
    let na = stats.labels().len();
    let samples = tree_edge_samples(stats, t, trials, seed);

    // m1[b * na + a] = E over q^b(.|a) of the in-degree from b
    let mut m1 = vec![0.0; na * na];
    let mut l = vec![0.0; na * na];
    for b in 0..na {
        for a in 0..na {
            m1[b * na + a] = stats
                .q_joint(b, a)
                .iter()
                .map(|(d, _, p)| d[b] as f64 * p)
                .sum();
            l[b * na + a] = stats.pair_edge_count(b, a, n);
        }
    }

    let eval_pair = |b: usize, a: usize, x: f64, others: &dyn Fn(usize) -> f64| -> PairTerms {
        let pair = b * na + a;
        let est = tail(&samples[pair], x);
        let cross = (0..na)
            .filter(|&b2| b2 != b && l[b2 * na + a] > 0.0)
            .map(|b2| x * others(b2) * m1[b2 * na + a] / l[pair])
            .sum();
        PairTerms {
            b,
            a,
            cut: x,
            tail_point: est.point(),
            tail_upper: est.upper(WILSON_Z),
            pairing: x * (x + 1.0) / 2.0 * m1[pair] / l[pair],
            cross,
        }
    };

    let mut terms: Vec<PairTerms> = Vec::new();
    for a in 0..na {
        let active: Vec<usize> = (0..na).filter(|&b| l[b * na + a] > 0.0).collect();
        if active.is_empty() {
            continue;
        }
        let chosen: Vec<f64> = match cuts {
            CutChoice::Fixed(x) => active.iter().map(|&b| x[b * na + a]).collect(),
            CutChoice::Optimize { max_exponent } => {
                // joint grid search over powers of two for all source classes
                // feeding class a, since the cross terms couple them
                let grid: Vec<f64> = (0..=*max_exponent).map(|j| (1u64 << j) as f64).collect();
                let mut best = vec![grid[0]; active.len()];
                let mut best_val = f64::INFINITY;
                let mut idx = vec![0usize; active.len()];
                loop {
                    let cand: Vec<f64> = idx.iter().map(|&i| grid[i]).collect();
                    let val: f64 = active
                        .iter()
                        .enumerate()
                        .map(|(bi, &b)| {
                            let cand = &cand;
                            let others = |b2: usize| {
                                cand[active.iter().position(|&x| x == b2).unwrap()]
                            };
                            eval_pair(b, a, cand[bi], &others).total()
                        })
                        .sum();
                    if val < best_val {
                        best_val = val;
                        best.copy_from_slice(&cand);
                    }
                    let mut c = 0;
                    loop {
                        if c == idx.len() {
                            break;
                        }
                        idx[c] += 1;
                        if idx[c] < grid.len() {
                            break;
                        }
                        idx[c] = 0;
                        c += 1;
                    }
                    if c == idx.len() {
                        break;
                    }
                }
                best
            }
        };
        for (bi, &b) in active.iter().enumerate() {
            let chosen = &chosen;
            let active = &active;
            let others =
                |b2: usize| chosen[active.iter().position(|&x| x == b2).unwrap()];
            terms.push(eval_pair(b, a, chosen[bi], &others));
        }
    }
    TopologicalBound {
        value: terms.iter().map(|t| t.total()).sum(),
        terms,
        trials,
        z: WILSON_Z,
    }
}

/// Parameters of the concentration bound on P(|b(t) - E b(t)| > eta n).
#[derive(Debug, Clone)]
pub struct BoundInputs {
    pub eta: f64,
    pub epsilon: f64,
    /// Moment order used for the neighborhood-size tail.
    pub s: f64,
    /// Neighborhood-size cut point.
    pub x: f64,
    pub n: usize,
    pub t: f64,
    pub mean_degree: f64,
    /// Sum over nodes of |delta_w|, the initial-condition deviations.
    pub delta_sum: f64,
}

#[derive(Debug, Clone)]
pub struct ConcentrationBound {
    /// The six summands, in display order.
    pub terms: [f64; 6],
    pub total: f64,
}

impl ConcentrationBound {
    pub fn dominant(&self) -> usize {
        self.terms
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap()
            .0
    }
}

/// Evaluate the six-term concentration bound; `moment_s` is an estimate of
/// E[V_t^s] for the neighborhood size V_t (in-degree-biased root for the
/// martingale terms; the same estimate is reused for the initial-condition
/// term). The bound is often vacuous (> 1) at small n and is reported as is.
pub fn concentration_bound(p: &BoundInputs, moment_s: f64) -> ConcentrationBound {
    assert!(p.eta > 0.0 && p.epsilon > 0.0 && p.x > 0.0 && p.s >= 1.0);
    let n = p.n as f64;
    let (eta, eps, s, x, t) = (p.eta, p.epsilon, p.s, p.x, p.t);
    let tail_factor = 2f64.powf(s) * moment_s / x.powf(s);
    let terms = [
        4.0 * (-eta * eta * n / (1152.0 * (1.0 + eps) * t * x * x)).exp(),
        (1.0 + 12.0 / eta) * (1.0 + eps) * t * n * tail_factor,
        2.0 * (-n * t * eps * eps / (2.0 * (1.0 + eps))).exp(),
        2.0 * (-eta * eta * n / (288.0 * (t + eta / 12.0))).exp(),
        (1.0 + 4.0 / eta) * tail_factor * p.delta_sum,
        2.0 * (-eta * eta * n / (128.0 * p.mean_degree * x * x)).exp(),
    ];
    ConcentrationBound {
        terms,
        total: terms.iter().sum(),
    }
}

/// Exact total variation distance between two finite degree laws.
pub fn tv_distance(p: &[(DegreeVector, f64)], q: &[(DegreeVector, f64)]) -> f64 {
    let mut diff: BTreeMap<&DegreeVector, f64> = BTreeMap::new();
    for (k, w) in p {
        *diff.entry(k).or_insert(0.0) += w;
    }
    for (k, w) in q {
        *diff.entry(k).or_insert(0.0) -= w;
    }
    0.5 * diff.values().map(|v| v.abs()).sum::<f64>()
}

#[derive(Debug, Clone)]
pub struct OdeDistanceBound {
    /// Sup-norm bound on the edge-law solution gap over [0, m * delta].
    pub zeta_sup: f64,
    /// Sup-norm bound on the node-law solution gap over the same window.
    pub y_sup: f64,
}

/// Discretized Gronwall bound on the distance between the ODE solutions under
/// two degree statistics: `zeta_gap0`/`y_gap0` are initial-condition gaps,
/// `tv_q`/`tv_p` the total variation between the edge/node degree laws,
/// `l`/`m_lip` the Lipschitz constants of the drift and of the node-law
/// coupling, `delta` the step and `steps` the number of steps covered.
pub fn ode_distance_bound(
    zeta_gap0: f64,
    y_gap0: f64,
    tv_q: f64,
    tv_p: f64,
    l: f64,
    m_lip: f64,
    delta: f64,
    steps: u32,
) -> Result<OdeDistanceBound, BoundsError> {
    let max = (1.0 / l).min(1.0);
    if delta >= max {
        return Err(BoundsError::InvalidStep { delta, max });
    }
    let growth_z = (1.0 - delta * l).powi(-(steps as i32));
    let zeta_sup = zeta_gap0 * growth_z + tv_q / l * (growth_z - 1.0);
    let growth_y = (1.0 - delta).powi(-(steps as i32));
    let y_sup = y_gap0 * growth_y + (growth_y - 1.0) * (m_lip * zeta_sup + tv_p);
    Ok(OdeDistanceBound { zeta_sup, y_sup })
}

#[derive(Debug, Clone)]
pub struct LipschitzEstimate {
    /// Estimated Lipschitz constant of the edge-law drift (infinity norm).
    pub drift: f64,
    /// Estimated Lipschitz constant of the node-law coupling.
    pub coupling: f64,
    /// Number of random state pairs probed; records the estimation method.
    pub pairs: usize,
}

const SUB_LIPSCHITZ: u64 = 0x11b;

/// Estimate the Lipschitz constants by sampled finite differences of the
/// drift between random simplex states. A sampled maximum can only
/// underestimate the true constants; callers wanting slack should inflate it.
pub fn estimate_lipschitz(
    stats: &NodeStatistics,
    kernel: &UpdateKernel,
    pairs: usize,
    seed: u64,
) -> Result<LipschitzEstimate, MeanFieldError> {
    let na = stats.labels().len();
    let nx = kernel.num_states();
    let plan = RhsPlan::new(stats, kernel, PhiMode::Exact);
    let mut rng = rng::stream(seed, &[SUB_LIPSCHITZ]);
    let random_state = |rng: &mut rng::Stream| {
        let mut s = MeanFieldState::new(na, nx);
        for col in s.zeta.chunks_mut(nx).chain(s.y.chunks_mut(nx)) {
            let mut sum = 0.0;
            for v in col.iter_mut() {
                *v = -rng.gen::<f64>().max(f64::MIN_POSITIVE).ln();
                sum += *v;
            }
            for v in col.iter_mut() {
                *v /= sum;
            }
        }
        s
    };
    let mut drift: f64 = 0.0;
    let mut coupling: f64 = 0.0;
    for _ in 0..pairs {
        let s1 = random_state(&mut rng);
        let s2 = random_state(&mut rng);
        let gap = s1
            .zeta
            .iter()
            .zip(&s2.zeta)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        if gap < 1e-12 {
            continue;
        }
        let d1 = plan.rhs(&s1)?;
        let d2 = plan.rhs(&s2)?;
        let dz = d1
            .zeta
            .iter()
            .zip(&d2.zeta)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        // the node-law drift is psi(zeta) - y, so psi = dy + y
        let dpsi = (0..s1.y.len())
            .map(|i| ((d1.y[i] + s1.y[i]) - (d2.y[i] + s2.y[i])).abs())
            .fold(0.0f64, f64::max);
        drift = drift.max(dz / gap);
        coupling = coupling.max(dpsi / gap);
    }
    Ok(LipschitzEstimate {
        drift,
        coupling,
        pairs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{tltm_kernel, StateSet};
    use crate::graph::{regular_statistics, Cell, LabelSet};
    use crate::meanfield::{integrate, OdeConfig};

    fn regular_stats(k: u32) -> NodeStatistics {
        regular_statistics(k, &StateSet::new(vec!["0".into(), "1".into()]))
    }

    #[test]
    fn wilson_interval_orders_and_degenerate_cases() {
        let est = WilsonTail {
            successes: 30,
            trials: 1000,
        };
        assert!(est.lower(1.96) < est.point() && est.point() < est.upper(1.96));
        let zero = WilsonTail {
            successes: 0,
            trials: 1000,
        };
        assert_eq!(zero.point(), 0.0);
        assert!(zero.upper(1.96) > 0.0 && zero.upper(1.96) < 0.01);
        let all = WilsonTail {
            successes: 1000,
            trials: 1000,
        };
        assert_eq!(all.upper(1.96), 1.0);
    }

    #[test]
    fn zero_horizon_reduces_to_pairing_terms() {
        let stats = regular_stats(3);
        let n = 10_000;
        let bound = topological_bound(&stats, n, 0.0, 500, 5, &CutChoice::Fixed(vec![1.0]));
        assert_eq!(bound.terms.len(), 1);
        let term = &bound.terms[0];
        assert_eq!(term.tail_point, 0.0);
        assert_eq!(term.cross, 0.0);
        // x(x+1)/2 * E_q[d] / l = 1 * 3 / (3n) = 1/n
        assert!((term.pairing - 1.0 / n as f64).abs() < 1e-12);
    }

    #[test]
    fn bound_decreases_with_n() {
        let stats = regular_stats(3);
        let cuts = CutChoice::Fixed(vec![32.0]);
        let small = topological_bound(&stats, 1_000, 1.0, 2_000, 9, &cuts);
        let large = topological_bound(&stats, 100_000, 1.0, 2_000, 9, &cuts);
        assert!(large.value < small.value);
    }

    #[test]
    fn single_class_value_matches_direct_formula() {
        // independent evaluation of the single-class display from the same
        // ingredients: tail + E_q[d] x(x+1) / (2 n dbar)
        let stats = regular_stats(3);
        let (n, t, trials, seed, x) = (10_000, 1.0, 3_000, 21, 32.0);
        let bound =
            topological_bound(&stats, n, t, trials, seed, &CutChoice::Fixed(vec![x]));
        let samples = tree_edge_samples(&stats, t, trials, seed);
        let exceed = samples[0].iter().filter(|&&w| w as f64 > x).count() as u64;
        let tail_up = WilsonTail {
            successes: exceed,
            trials: trials as u64,
        }
        .upper(1.96);
        let dq: f64 = stats
            .q_joint(0, 0)
            .iter()
            .map(|(d, _, p)| d[0] as f64 * p)
            .sum();
        let direct = tail_up + dq * x * (x + 1.0) / (2.0 * n as f64 * stats.mean_degree());
        assert!(
            (bound.value - direct).abs() < 1e-12,
            "{} vs {direct}",
            bound.value
        );
    }

    #[test]
    fn optimizer_beats_or_matches_fixed_cuts() {
        let stats = regular_stats(3);
        let best = topological_bound(
            &stats,
            10_000,
            1.0,
            2_000,
            33,
            &CutChoice::Optimize { max_exponent: 12 },
        );
        for j in [0u32, 3, 6, 9, 12] {
            let fixed = topological_bound(
                &stats,
                10_000,
                1.0,
                2_000,
                33,
                &CutChoice::Fixed(vec![(1u64 << j) as f64]),
            );
            assert!(best.value <= fixed.value + 1e-12);
        }
    }

    #[test]
    fn concentration_exponential_terms_vanish_with_eta() {
        let base = BoundInputs {
            eta: 0.1,
            epsilon: 0.5,
            s: 3.0,
            x: 100.0,
            n: 1_000_000,
            t: 1.0,
            mean_degree: 3.0,
            delta_sum: 0.0,
        };
        let loose = concentration_bound(&base, 50.0);
        let tight = concentration_bound(
            &BoundInputs {
                eta: 50.0,
                ..base.clone()
            },
            50.0,
        );
        for i in [0, 3, 5] {
            assert!(tight.terms[i] < loose.terms[i]);
            assert!(tight.terms[i] < 1e-12);
        }
        assert!(loose.terms.iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn concentration_terms_nonincreasing_in_n() {
        let mk = |n: usize| BoundInputs {
            eta: 0.05,
            epsilon: 0.5,
            s: 3.0,
            x: (n as f64).powf(4.0 / 9.0),
            n,
            t: 1.0,
            mean_degree: 3.0,
            delta_sum: 1.0,
        };
        let small = concentration_bound(&mk(100_000), 50.0);
        let large = concentration_bound(&mk(10_000_000), 50.0);
        // with x = n^{4/9} every term except the linear-in-n tail shrinks;
        // the tail term shrinks per unit of n via the x^s denominator
        for i in [0, 2, 3, 4, 5] {
            assert!(large.terms[i] <= small.terms[i] + 1e-15, "term {i}");
        }
        assert!(large.terms[1] / 1e7 < small.terms[1] / 1e5);
    }

    #[test]
    fn truncation_tv_equals_discarded_mass() {
        let labels = LabelSet::single();
        let states = StateSet::new(vec!["0".into(), "1".into()]);
        let cells = vec![
            Cell {
                d: DegreeVector(vec![8]),
                k: DegreeVector(vec![8]),
                a: 0,
                p: 0.95,
            },
            Cell {
                d: DegreeVector(vec![20]),
                k: DegreeVector(vec![20]),
                a: 0,
                p: 0.05,
            },
        ];
        let stats =
            NodeStatistics::new(labels, states, cells, vec![vec![1.0, 0.0]]).unwrap();
        let (trunc, discarded) = stats.truncate_k(0.9);
        let tv = tv_distance(&stats.k_marginal(0), &trunc.k_marginal(0));
        assert!((tv - discarded[0]).abs() < 1e-12);
        assert!((tv - 0.05).abs() < 1e-12);
    }

    #[test]
    fn identical_statistics_give_zero_distance_bound() {
        let b = ode_distance_bound(0.0, 0.0, 0.0, 0.0, 2.0, 1.0, 0.01, 500).unwrap();
        assert_eq!(b.zeta_sup, 0.0);
        assert_eq!(b.y_sup, 0.0);
        assert!(matches!(
            ode_distance_bound(0.0, 0.0, 0.0, 0.0, 2.0, 1.0, 0.6, 10),
            Err(BoundsError::InvalidStep { .. })
        ));
    }

    #[test]
    fn ode_gap_between_truncated_and_full_statistics_is_within_bound() {
        let labels = LabelSet::single();
        let states = StateSet::ternary_signed();
        let cells = vec![
            Cell {
                d: DegreeVector(vec![10]),
                k: DegreeVector(vec![10]),
                a: 0,
                p: 0.95,
            },
            Cell {
                d: DegreeVector(vec![16]),
                k: DegreeVector(vec![16]),
                a: 0,
                p: 0.05,
            },
        ];
        let p_s = vec![vec![0.3, 0.3, 0.4]];
        let full = NodeStatistics::new(labels, states, cells, p_s).unwrap();
        let (trunc, _) = full.truncate_k(0.9);
        let kernel = tltm_kernel(2, 2).unwrap();

        let horizon = 5.0;
        let cfg = OdeConfig::new(horizon);
        let init = MeanFieldState::from_class_distributions(&[vec![0.3, 0.3, 0.4]], 1);
        let run = |stats: &NodeStatistics| {
            integrate(stats, &kernel, &init, &cfg).unwrap()
        };
        let (a, b) = (run(&full), run(&trunc));
        let mut actual = 0.0f64;
        for (sa, sb) in a.states.iter().zip(&b.states) {
            for (x, y) in sa.zeta.iter().zip(&sb.zeta) {
                actual = actual.max((x - y).abs());
            }
        }

        let lip = estimate_lipschitz(&full, &kernel, 200, 3).unwrap();
        let tv_q = tv_distance(&full.q_k_marginal(0, 0), &trunc.q_k_marginal(0, 0));
        let delta = 0.01;
        let steps = (horizon / delta).round() as u32;
        let bound =
            ode_distance_bound(0.0, 0.0, tv_q, 0.0, lip.drift, lip.coupling, delta, steps)
                .unwrap();
        assert!(
            actual <= bound.zeta_sup,
            "actual gap {actual} exceeds bound {}",
            bound.zeta_sup
        );
        assert!(actual > 0.0);
    }
}
