//! Branching-process sampling, the coupled exploration of graph neighborhood
//! versus tree, and numeric evaluation of the approximation, concentration,
//! and ODE-distance bounds.

mod coupling;
mod eval;
mod gw;
mod tree;

pub use coupling::{run_coupling, CouplingTrace};
pub use eval::{
    concentration_bound, estimate_lipschitz, ode_distance_bound, topological_bound, tv_distance,
    BoundInputs, ConcentrationBound, CutChoice, LipschitzEstimate, OdeDistanceBound, PairTerms,
    TopologicalBound, WilsonTail,
};
pub use gw::{gw_moment_probe, GwMomentProbe};
pub use tree::{sample_truncated_tree, TreeNode, TruncatedTree, TREE_NODE_BUDGET};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum BoundsError {
    #[error("step {delta} must be below min(1, 1/L) = {max}")]
    InvalidStep { delta: f64, max: f64 },
}
