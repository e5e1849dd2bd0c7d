//! The experiment configuration document and its materialization into graphs,
//! kernels, and ensemble statistics.

use crate::CliError;
use asd::dynamics::{
    brca_kernel, erg_kernel, table_kernel_from_json, tltm_kernel, StateSet, UpdateKernel,
};
use asd::graph::{
    extract_statistics, load_edge_list, read_label_map, sample_cbm, sample_configuration_model,
    sample_powerlaw_sequence, sample_regular, Cell, DegreeVector, InitialStateRule, LabelSet,
    LabeledGraph, NodeStatistics, PowerLawSpec,
};
use serde::{Deserialize, Serialize};
use std::path::PathBuf;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum GraphSpec {
    Regular {
        k: u32,
        n: usize,
    },
    /// Configuration model sampled from a statistics JSON file (the format
    /// written by `generate`).
    Configuration {
        stats_path: PathBuf,
        n: usize,
    },
    Cbm {
        community_sizes: Vec<usize>,
        edge_means: Vec<Vec<f64>>,
    },
    Powerlaw {
        beta: f64,
        k_max: u32,
        n: usize,
    },
    EdgeList {
        path: PathBuf,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        label_map: Option<PathBuf>,
    },
}

impl GraphSpec {
    /// The same generator resized to `n` nodes (for size sweeps).
    pub fn resized(&self, n: usize) -> Result<GraphSpec, CliError> {
        match self {
            GraphSpec::Regular { k, .. } => Ok(GraphSpec::Regular { k: *k, n }),
            GraphSpec::Configuration { stats_path, .. } => Ok(GraphSpec::Configuration {
                stats_path: stats_path.clone(),
                n,
            }),
            GraphSpec::Powerlaw { beta, k_max, .. } => Ok(GraphSpec::Powerlaw {
                beta: *beta,
                k_max: *k_max,
                n,
            }),
            GraphSpec::Cbm {
                community_sizes,
                edge_means,
            } => {
                let total: usize = community_sizes.iter().sum();
                if total == 0 {
                    return Err(CliError::Config("cbm with empty communities".into()));
                }
                let mut sizes: Vec<usize> = community_sizes
                    .iter()
                    .map(|&s| s * n / total)
                    .collect();
                let assigned: usize = sizes.iter().sum();
                sizes[0] += n - assigned;
                Ok(GraphSpec::Cbm {
                    community_sizes: sizes,
                    edge_means: edge_means.clone(),
                })
            }
            GraphSpec::EdgeList { .. } => Err(CliError::Config(
                "size sweeps need a generator, not a fixed edge list".into(),
            )),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kernel", rename_all = "snake_case", deny_unknown_fields)]
pub enum DynamicsSpec {
    Tltm { a_plus: u32, a_minus: u32 },
    Brca { coordinating: bool },
    Erg { b: f64, c: f64 },
    Table { path: PathBuf },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSection {
    pub horizon: f64,
    pub dt: f64,
    pub runs: u32,
}

fn default_h() -> f64 {
    0.01
}

fn default_record_every() -> usize {
    10
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OdeSection {
    pub horizon: f64,
    #[serde(default = "default_h")]
    pub h: f64,
    #[serde(default = "default_record_every")]
    pub record_every: usize,
}

fn default_grid() -> usize {
    10
}

fn default_max_seeds() -> usize {
    20_000
}

fn default_tol() -> f64 {
    1e-8
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StationarySection {
    #[serde(default = "default_grid")]
    pub grid: usize,
    #[serde(default = "default_max_seeds")]
    pub max_seeds: usize,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_tol")]
    pub tol_eig: f64,
}

impl Default for StationarySection {
    fn default() -> Self {
        StationarySection {
            grid: default_grid(),
            max_seeds: default_max_seeds(),
            tol: default_tol(),
            tol_eig: default_tol(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BasinsSection {
    pub horizon: f64,
    #[serde(default = "default_basin_tol")]
    pub tol: f64,
    /// Initial per-class state fractions, one matrix per start.
    pub inits: Vec<Vec<Vec<f64>>>,
}

fn default_basin_tol() -> f64 {
    1e-4
}

fn default_max_exponent() -> u32 {
    12
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConcentrationSection {
    pub eta: f64,
    pub epsilon: f64,
    pub s: f64,
    pub x: f64,
    pub delta_sum: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundsSection {
    pub t: f64,
    pub trials: usize,
    /// Graph sizes the bound is evaluated at.
    pub ns: Vec<usize>,
    #[serde(default = "default_max_exponent")]
    pub max_exponent: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub concentration: Option<ConcentrationSection>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoupleSection {
    pub t: f64,
    pub trials: usize,
    pub ns: Vec<usize>,
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub graph: GraphSpec,
    pub dynamics: DynamicsSpec,
    /// Initial state fractions per class (rows over the kernel's states);
    /// uniform when omitted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sim: Option<SimSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ode: Option<OdeSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stationary: Option<StationarySection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub basins: Option<BasinsSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bounds: Option<BoundsSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub couple: Option<CoupleSection>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_out")]
    pub out: PathBuf,
}

impl ExperimentConfig {
    pub fn load(path: &std::path::Path) -> Result<Self, CliError> {
        let doc = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_str(&doc)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    pub fn kernel(&self) -> Result<UpdateKernel, CliError> {
        match &self.dynamics {
            DynamicsSpec::Tltm { a_plus, a_minus } => tltm_kernel(*a_plus, *a_minus)
                .map_err(|e| CliError::Config(e.to_string())),
            DynamicsSpec::Brca { coordinating } => Ok(brca_kernel(*coordinating)),
            DynamicsSpec::Erg { b, c } => {
                erg_kernel(*b, *c).map_err(|e| CliError::Config(e.to_string()))
            }
            DynamicsSpec::Table { path } => {
                let doc = std::fs::read_to_string(path).map_err(|e| {
                    CliError::Config(format!("cannot read {}: {e}", path.display()))
                })?;
                table_kernel_from_json(&doc).map_err(|e| CliError::Config(e.to_string()))
            }
        }
    }

    /// Initial-state fractions per class, defaulting to uniform.
    pub fn initial_rows(&self, num_labels: usize, states: &StateSet) -> Result<Vec<Vec<f64>>, CliError> {
        match &self.initial {
            None => Ok(vec![vec![1.0 / states.len() as f64; states.len()]; num_labels]),
            Some(rows) => {
                if rows.len() != num_labels {
                    return Err(CliError::Config(format!(
                        "initial has {} rows but the graph has {num_labels} classes",
                        rows.len()
                    )));
                }
                for row in rows {
                    if row.len() != states.len() {
                        return Err(CliError::Config(format!(
                            "initial row has {} entries but the kernel has {} states",
                            row.len(),
                            states.len()
                        )));
                    }
                    let s: f64 = row.iter().sum();
                    if (s - 1.0).abs() > 1e-9 || row.iter().any(|&p| p < 0.0) {
                        return Err(CliError::Config(format!(
                            "initial row {row:?} is not a distribution"
                        )));
                    }
                }
                Ok(rows.clone())
            }
        }
    }

    /// Build the graph; `ids` holds original node ids for edge-list inputs.
    pub fn build_graph(&self, spec: &GraphSpec, seed: u64) -> Result<(LabeledGraph, Option<Vec<u64>>), CliError> {
        let runtime = |e: asd::graph::GraphError| CliError::Runtime(e.to_string());
        match spec {
            GraphSpec::Regular { k, n } => Ok((sample_regular(*k, *n, seed), None)),
            GraphSpec::Configuration { stats_path, n } => {
                let doc = std::fs::read_to_string(stats_path).map_err(|e| {
                    CliError::Config(format!("cannot read {}: {e}", stats_path.display()))
                })?;
                let stats =
                    NodeStatistics::from_json(&doc).map_err(|e| CliError::Config(e.to_string()))?;
                Ok((sample_configuration_model(&stats, *n, seed).map_err(runtime)?, None))
            }
            GraphSpec::Cbm {
                community_sizes,
                edge_means,
            } => {
                let n = community_sizes.iter().sum();
                Ok((sample_cbm(community_sizes, edge_means, n, seed).map_err(runtime)?, None))
            }
            GraphSpec::Powerlaw { beta, k_max, n } => {
                let pl = PowerLawSpec {
                    beta: *beta,
                    k_max: *k_max,
                    delta: None,
                    zeta: None,
                };
                pl.validate().map_err(|e| CliError::Config(e.to_string()))?;
                let degrees = sample_powerlaw_sequence(&pl, *n, seed).map_err(runtime)?;
                let cells: Vec<Cell> = {
                    let mut hist = std::collections::BTreeMap::new();
                    for &k in &degrees {
                        *hist.entry(k).or_insert(0usize) += 1;
                    }
                    hist.into_iter()
                        .map(|(k, c)| Cell {
                            d: DegreeVector(vec![k]),
                            k: DegreeVector(vec![k]),
                            a: 0,
                            p: c as f64 / *n as f64,
                        })
                        .collect()
                };
                let states = self.kernel()?.state_set();
                let rows = vec![vec![1.0 / states.len() as f64; states.len()]];
                let stats = NodeStatistics::new(LabelSet::single(), states, cells, rows)
                    .map_err(runtime)?;
                Ok((sample_configuration_model(&stats, *n, seed).map_err(runtime)?, None))
            }
            GraphSpec::EdgeList { path, label_map } => {
                let map = match label_map {
                    None => None,
                    Some(p) => Some(read_label_map(p).map_err(runtime)?),
                };
                let (g, ids) = load_edge_list(path, map.as_ref()).map_err(runtime)?;
                Ok((g, Some(ids)))
            }
        }
    }

    /// Ensemble statistics for mean-field work: exact for regular and
    /// file-based specs, empirical (from a sampled graph) otherwise.
    pub fn statistics(&self) -> Result<NodeStatistics, CliError> {
        let kernel = self.kernel()?;
        let states = kernel.state_set();
        match &self.graph {
            GraphSpec::Regular { k, .. } => {
                let rows = self.initial_rows(1, &states)?;
                let cells = vec![Cell {
                    d: DegreeVector(vec![*k]),
                    k: DegreeVector(vec![*k]),
                    a: 0,
                    p: 1.0,
                }];
                NodeStatistics::new(LabelSet::single(), states, cells, rows)
                    .map_err(|e| CliError::Config(e.to_string()))
            }
            GraphSpec::Configuration { stats_path, .. } => {
                let doc = std::fs::read_to_string(stats_path).map_err(|e| {
                    CliError::Config(format!("cannot read {}: {e}", stats_path.display()))
                })?;
                let stats =
                    NodeStatistics::from_json(&doc).map_err(|e| CliError::Config(e.to_string()))?;
                match &self.initial {
                    None => Ok(stats),
                    Some(_) => {
                        let rows = self.initial_rows(stats.labels().len(), &states)?;
                        NodeStatistics::new(
                            stats.labels().clone(),
                            states,
                            stats.cells().to_vec(),
                            rows,
                        )
                        .map_err(|e| CliError::Config(e.to_string()))
                    }
                }
            }
            spec => {
                let (g, _) = self.build_graph(spec, self.seed)?;
                let rows = self.initial_rows(g.labels().len(), &states)?;
                Ok(extract_statistics(
                    &g,
                    &states,
                    &InitialStateRule::FractionPerClass(rows),
                ))
            }
        }
    }

    pub fn initial_rule(&self, num_labels: usize, states: &StateSet) -> Result<InitialStateRule, CliError> {
        Ok(InitialStateRule::FractionPerClass(
            self.initial_rows(num_labels, states)?,
        ))
    }
}
