//! Exact event-driven simulation of the dynamics, a multi-run ensemble
//! harness, a uniformization oracle for small graphs, and the
//! relevant-neighborhood exploration.

mod exact;
mod explore;

pub use exact::{exact_transient, ExactInitial, ExactTransient, SimulateError};
pub use explore::{explore_relevant_neighborhood, ExplorationRecord};

use crate::dynamics::{NeighborCounts, UpdateKernel};
use crate::graph::LabeledGraph;
use crate::rng;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

const SUB_RUN: u64 = 0x51;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RecordGranularity {
    Global,
    PerClass,
    PerClassState,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimConfig {
    /// Simulated horizon in units of the common update rate (rate 1).
    pub horizon: f64,
    /// Sampling grid step.
    pub dt: f64,
    /// Number of independent runs (ensemble use).
    pub runs: u32,
    pub seed: u64,
    pub granularity: RecordGranularity,
}

impl SimConfig {
    pub fn new(horizon: f64, dt: f64, runs: u32, seed: u64) -> Self {
        assert!(horizon > 0.0 && dt > 0.0 && runs >= 1);
        SimConfig {
            horizon,
            dt,
            runs,
            seed,
            granularity: RecordGranularity::PerClassState,
        }
    }

    pub fn grid(&self) -> Vec<f64> {
        let steps = (self.horizon / self.dt + 1e-9).floor() as usize;
        (0..=steps).map(|i| i as f64 * self.dt).collect()
    }
}

/// One run sampled on the grid: per (class, state) node fractions y and
/// in-degree-weighted fractions zeta.
#[derive(Debug, Clone)]
pub struct TrajectorySample {
    pub times: Vec<f64>,
    /// Flattened [time][class][state].
    pub y: Vec<f64>,
    /// Flattened [time][class][state]; the fraction of in-edges of each class
    /// whose endpoint is in the given state.
    pub zeta: Vec<f64>,
    pub num_labels: usize,
    pub num_states: usize,
    pub run_id: u32,
    /// Total number of update events over the horizon.
    pub updates: u64,
}

impl TrajectorySample {
    pub fn y_at(&self, ti: usize, a: usize, x: usize) -> f64 {
        self.y[(ti * self.num_labels + a) * self.num_states + x]
    }

    pub fn zeta_at(&self, ti: usize, a: usize, x: usize) -> f64 {
        self.zeta[(ti * self.num_labels + a) * self.num_states + x]
    }
}

/// Exact realization of the dynamics: events arrive at aggregate rate n, the
/// updating node is uniform, and the node redraws its state from the kernel
/// applied to its current neighbor counts. Sampling at grid points is
/// left-continuous: an event landing exactly on a grid time is counted after
/// the sample.
pub fn run_asd(
    g: &LabeledGraph,
    kernel: &UpdateKernel,
    initial: &[u8],
    cfg: &SimConfig,
    run_id: u32,
) -> TrajectorySample {
    let n = g.n();
    assert_eq!(initial.len(), n);
    let na = g.labels().len();
    let nx = kernel.num_states();
    let mut rng = rng::stream(cfg.seed, &[SUB_RUN, run_id as u64]);
    let mut state: Vec<u8> = initial.to_vec();

    let mut class_count = vec![0u64; na];
    let mut class_indeg = vec![0u64; na];
    for v in 0..n {
        class_count[g.label_of(v)] += 1;
        class_indeg[g.label_of(v)] += g.in_degree(v);
    }
    let mut y_num = vec![0u64; na * nx];
    let mut z_num = vec![0u64; na * nx];
    for v in 0..n {
        let a = g.label_of(v);
        y_num[a * nx + state[v] as usize] += 1;
        z_num[a * nx + state[v] as usize] += g.in_degree(v);
    }

    let times = cfg.grid();
    let mut y = Vec::with_capacity(times.len() * na * nx);
    let mut zeta = Vec::with_capacity(times.len() * na * nx);
    let record = |y_num: &[u64], z_num: &[u64], y: &mut Vec<f64>, zeta: &mut Vec<f64>| {
        for a in 0..na {
            for x in 0..nx {
                let yf = if class_count[a] > 0 {
                    y_num[a * nx + x] as f64 / class_count[a] as f64
                } else {
                    0.0
                };
                y.push(yf);
                zeta.push(if class_indeg[a] > 0 {
                    z_num[a * nx + x] as f64 / class_indeg[a] as f64
                } else {
                    yf
                });
            }
        }
    };

    let mut updates = 0u64;
    let mut next_grid = 0usize;
    let mut t = 0.0f64;
    let mut xi = NeighborCounts::zeros(na, nx);
    loop {
        let dt = if n == 0 {
            f64::INFINITY
        } else {
            -rng.gen::<f64>().max(f64::MIN_POSITIVE).ln() / n as f64
        };
        let t_next = t + dt;
        while next_grid < times.len() && times[next_grid] <= t_next {
            record(&y_num, &z_num, &mut y, &mut zeta);
            next_grid += 1;
        }
        if next_grid >= times.len() {
            break;
        }
        t = t_next;
        let v = rng.gen_range(0..n);
        let a = g.label_of(v);
        xi.counts.iter_mut().for_each(|c| *c = 0);
        for &h in g.out_neighbors(v) {
            xi.add(g.label_of(h as usize), state[h as usize] as usize, 1);
        }
        let probs = kernel
            .evaluate(a, &xi)
            .expect("kernel/state-set mismatch in simulation");
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        let mut new_state = probs.len() - 1;
        for (x, &p) in probs.iter().enumerate() {
            acc += p;
            if u < acc {
                new_state = x;
                break;
            }
        }
        updates += 1;
        let old = state[v] as usize;
        if old != new_state {
            let d = g.in_degree(v);
            y_num[a * nx + old] -= 1;
            y_num[a * nx + new_state] += 1;
            z_num[a * nx + old] -= d;
            z_num[a * nx + new_state] += d;
            state[v] = new_state as u8;
        }
    }

    TrajectorySample {
        times,
        y,
        zeta,
        num_labels: na,
        num_states: nx,
        run_id,
        updates,
    }
}

/// Pointwise mean/min/max over runs, per (class, state) and grid time.
#[derive(Debug, Clone)]
pub struct RunEnsembleSummary {
    pub times: Vec<f64>,
    pub mean: Vec<f64>,
    pub min: Vec<f64>,
    pub max: Vec<f64>,
    pub num_labels: usize,
    pub num_states: usize,
    pub runs: u32,
}

impl RunEnsembleSummary {
    pub fn at(&self, series: &[f64], ti: usize, a: usize, x: usize) -> f64 {
        series[(ti * self.num_labels + a) * self.num_states + x]
    }

    pub fn band_width(&self, ti: usize, a: usize, x: usize) -> f64 {
        self.at(&self.max, ti, a, x) - self.at(&self.min, ti, a, x)
    }
}

/// Run `cfg.runs` independent realizations. `setup` maps a run index to the
/// graph and initial states for that run (return the same graph each time for
/// a quenched ensemble, or build a fresh one to also average over topology).
/// Runs execute in parallel; results depend only on (seed, run index).
pub fn run_ensemble<F>(setup: F, kernel: &UpdateKernel, cfg: &SimConfig) -> RunEnsembleSummary
where
    F: Fn(u32) -> (std::sync::Arc<LabeledGraph>, Vec<u8>) + Sync,
{
    assert!(cfg.runs >= 1);
    let samples: Vec<TrajectorySample> = (0..cfg.runs)
        .into_par_iter()
        .map(|r| {
            let (g, init) = setup(r);
            run_asd(&g, kernel, &init, cfg, r)
        })
        .collect();
    summarize(&samples)
}

/// Reduce already-computed runs to a mean/min/max summary.
pub fn summarize(samples: &[TrajectorySample]) -> RunEnsembleSummary {
    assert!(!samples.is_empty());
    let len = samples[0].y.len();
    let mut mean = vec![0.0; len];
    let mut min = vec![f64::INFINITY; len];
    let mut max = vec![f64::NEG_INFINITY; len];
    for s in samples {
        assert_eq!(s.y.len(), len, "all runs must share the grid");
        for i in 0..len {
            mean[i] += s.y[i];
            min[i] = min[i].min(s.y[i]);
            max[i] = max[i].max(s.y[i]);
        }
    }
    for m in &mut mean {
        *m /= samples.len() as f64;
    }
    RunEnsembleSummary {
        times: samples[0].times.clone(),
        mean,
        min,
        max,
        num_labels: samples[0].num_labels,
        num_states: samples[0].num_states,
        runs: samples.len() as u32,
    }
}
