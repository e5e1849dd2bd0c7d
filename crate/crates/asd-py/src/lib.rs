//! Python bindings: graph construction, kernels, simulation, the mean-field
//! ODE system, stationary points, and the neighborhood-approximation bound.

use asd::bounds::{run_coupling, topological_bound, CutChoice};
use asd::dynamics::{brca_kernel, erg_kernel, tltm_kernel, UpdateKernel};
use asd::graph::{
    draw_initial_states, extract_statistics, sample_cbm, sample_regular, InitialStateRule,
    LabeledGraph, NodeStatistics,
};
use asd::meanfield::{
    find_stationary, integrate, MeanFieldState, OdeConfig, Stability, StationarySearch,
};
use asd::simulate::{run_ensemble, SimConfig};
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use std::sync::Arc;

#[pyclass(frozen)]
struct Graph {
    inner: Arc<LabeledGraph>,
}

#[pymethods]
impl Graph {
    fn n(&self) -> usize {
        self.inner.n()
    }

    fn edge_count(&self) -> u64 {
        self.inner.edge_count()
    }

    fn num_labels(&self) -> usize {
        self.inner.labels().len()
    }

    fn label_of(&self, v: usize) -> PyResult<String> {
        if v >= self.inner.n() {
            return Err(PyValueError::new_err("node index out of range"));
        }
        Ok(self.inner.labels().name(self.inner.label_of(v)).to_string())
    }

    fn out_degree(&self, v: usize) -> PyResult<usize> {
        if v >= self.inner.n() {
            return Err(PyValueError::new_err("node index out of range"));
        }
        Ok(self.inner.out_degree(v))
    }
}

#[pyclass(frozen)]
#[derive(Clone)]
struct Kernel {
    inner: UpdateKernel,
}

#[pymethods]
impl Kernel {
    fn states(&self) -> Vec<String> {
        self.inner.state_set().names().to_vec()
    }
}

#[pyclass(frozen)]
struct Statistics {
    inner: NodeStatistics,
}

#[pymethods]
impl Statistics {
    fn to_json(&self) -> String {
        self.inner.to_json()
    }

    fn mean_degree(&self) -> f64 {
        self.inner.mean_degree()
    }

    fn num_labels(&self) -> usize {
        self.inner.labels().len()
    }
}

fn value_err<E: std::fmt::Display>(e: E) -> PyErr {
    PyValueError::new_err(e.to_string())
}

#[pyfunction]
fn tltm(a_plus: u32, a_minus: u32) -> PyResult<Kernel> {
    Ok(Kernel {
        inner: tltm_kernel(a_plus, a_minus).map_err(value_err)?,
    })
}

#[pyfunction]
fn brca(coordinating: bool) -> Kernel {
    Kernel {
        inner: brca_kernel(coordinating),
    }
}

#[pyfunction]
fn erg(b: f64, c: f64) -> PyResult<Kernel> {
    Ok(Kernel {
        inner: erg_kernel(b, c).map_err(value_err)?,
    })
}

#[pyfunction]
fn regular_graph(k: u32, n: usize, seed: u64) -> Graph {
    Graph {
        inner: Arc::new(sample_regular(k, n, seed)),
    }
}

#[pyfunction]
fn cbm_graph(community_sizes: Vec<usize>, edge_means: Vec<Vec<f64>>, seed: u64) -> PyResult<Graph> {
    let n = community_sizes.iter().sum();
    Ok(Graph {
        inner: Arc::new(sample_cbm(&community_sizes, &edge_means, n, seed).map_err(value_err)?),
    })
}

#[pyfunction]
fn statistics_from_json(doc: &str) -> PyResult<Statistics> {
    Ok(Statistics {
        inner: NodeStatistics::from_json(doc).map_err(value_err)?,
    })
}

/// Empirical statistics of a graph with the given per-class initial-state
/// fractions.
#[pyfunction]
fn graph_statistics(
    graph: &Graph,
    kernel: &Kernel,
    initial: Vec<Vec<f64>>,
) -> PyResult<Statistics> {
    let states = kernel.inner.state_set();
    Ok(Statistics {
        inner: extract_statistics(
            &graph.inner,
            &states,
            &InitialStateRule::FractionPerClass(initial),
        ),
    })
}

/// Ensemble simulation. Returns (times, mean, min, max); the three series are
/// nested as [time][class][state].
#[allow(clippy::type_complexity)]
#[pyfunction]
fn simulate(
    graph: &Graph,
    kernel: &Kernel,
    initial: Vec<Vec<f64>>,
    horizon: f64,
    dt: f64,
    runs: u32,
    seed: u64,
) -> PyResult<(Vec<f64>, Vec<Vec<Vec<f64>>>, Vec<Vec<Vec<f64>>>, Vec<Vec<Vec<f64>>>)> {
    if !(horizon > 0.0 && dt > 0.0 && runs >= 1) {
        return Err(PyValueError::new_err("horizon, dt must be positive and runs >= 1"));
    }
    let states = kernel.inner.state_set();
    if initial.len() != graph.inner.labels().len() {
        return Err(PyValueError::new_err("need one initial row per class"));
    }
    let cfg = SimConfig::new(horizon, dt, runs, seed);
    let g = graph.inner.clone();
    let rule = InitialStateRule::FractionPerClass(initial);
    let summary = run_ensemble(
        |run| {
            let init = draw_initial_states(&g, &rule, states.len(), seed.wrapping_add(1 + run as u64));
            (g.clone(), init)
        },
        &kernel.inner,
        &cfg,
    );
    let unflatten = |series: &[f64]| -> Vec<Vec<Vec<f64>>> {
        summary
            .times
            .iter()
            .enumerate()
            .map(|(ti, _)| {
                (0..summary.num_labels)
                    .map(|a| {
                        (0..summary.num_states)
                            .map(|x| series[(ti * summary.num_labels + a) * summary.num_states + x])
                            .collect()
                    })
                    .collect()
            })
            .collect()
    };
    Ok((
        summary.times.clone(),
        unflatten(&summary.mean),
        unflatten(&summary.min),
        unflatten(&summary.max),
    ))
}

/// Integrate the mean-field system. Returns (times, y) with y nested as
/// [time][class][state].
#[pyfunction]
fn ode(
    stats: &Statistics,
    kernel: &Kernel,
    initial: Vec<Vec<f64>>,
    horizon: f64,
    h: f64,
) -> PyResult<(Vec<f64>, Vec<Vec<Vec<f64>>>)> {
    let na = stats.inner.labels().len();
    let nx = kernel.inner.num_states();
    if initial.len() != na || initial.iter().any(|r| r.len() != nx) {
        return Err(PyValueError::new_err("need one initial row per class over the kernel's states"));
    }
    let init = MeanFieldState::from_class_distributions(&initial, na);
    let mut cfg = OdeConfig::new(horizon);
    cfg.h = h;
    let traj = integrate(&stats.inner, &kernel.inner, &init, &cfg).map_err(value_err)?;
    let y = traj
        .states
        .iter()
        .map(|s| (0..na).map(|a| s.y_col(a).to_vec()).collect())
        .collect();
    Ok((traj.times.clone(), y))
}

/// Stationary points as dicts with keys residual, stability, y, zeta.
#[pyfunction]
fn stationary_points(
    py: Python<'_>,
    stats: &Statistics,
    kernel: &Kernel,
) -> PyResult<Vec<PyObject>> {
    let report = find_stationary(&stats.inner, &kernel.inner, &StationarySearch::default())
        .map_err(value_err)?;
    let na = stats.inner.labels().len();
    report
        .points
        .iter()
        .map(|p| {
            let dict = pyo3::types::PyDict::new_bound(py);
            dict.set_item("residual", p.residual)?;
            dict.set_item(
                "stability",
                match p.stability {
                    Stability::Stable => "stable",
                    Stability::Unstable => "unstable",
                    Stability::Marginal => "marginal",
                },
            )?;
            let y: Vec<Vec<f64>> = (0..na).map(|a| p.state.y_col(a).to_vec()).collect();
            let zeta: Vec<Vec<Vec<f64>>> = (0..na)
                .map(|a| (0..na).map(|b| p.state.zeta_col(a, b).to_vec()).collect())
                .collect();
            dict.set_item("y", y)?;
            dict.set_item("zeta", zeta)?;
            Ok(dict.into())
        })
        .collect()
}

/// Monte Carlo neighborhood-approximation bound.
#[pyfunction]
fn approximation_bound(stats: &Statistics, n: usize, t: f64, trials: usize, seed: u64) -> f64 {
    topological_bound(
        &stats.inner,
        n,
        t,
        trials,
        seed,
        &CutChoice::Optimize { max_exponent: 12 },
    )
    .value
}

/// One coupled graph-vs-tree exploration; returns (b1, b2, equal).
#[pyfunction]
fn couple_once(graph: &Graph, t: f64, seed: u64) -> (bool, bool, bool) {
    let trace = run_coupling(&graph.inner, t, seed);
    (trace.b1, trace.b2, trace.equal)
}

#[pymodule]
fn asd_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Graph>()?;
    m.add_class::<Kernel>()?;
    m.add_class::<Statistics>()?;
    m.add_function(wrap_pyfunction!(tltm, m)?)?;
    m.add_function(wrap_pyfunction!(brca, m)?)?;
    m.add_function(wrap_pyfunction!(erg, m)?)?;
    m.add_function(wrap_pyfunction!(regular_graph, m)?)?;
    m.add_function(wrap_pyfunction!(cbm_graph, m)?)?;
    m.add_function(wrap_pyfunction!(statistics_from_json, m)?)?;
    m.add_function(wrap_pyfunction!(graph_statistics, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(ode, m)?)?;
    m.add_function(wrap_pyfunction!(stationary_points, m)?)?;
    m.add_function(wrap_pyfunction!(approximation_bound, m)?)?;
    m.add_function(wrap_pyfunction!(couple_once, m)?)?;
    Ok(())
}
