//! Asynchronous semi-anonymous dynamics (ASD) on labeled directed multigraphs.
//!
//! A node updates at Poisson rate 1 and draws its next state from a kernel that
//! only sees how many of its out-neighbors are in each (label, state) cell.
//! This crate provides:
//!
//! - [`graph`]: labeled multigraph construction (configuration model, block
//!   model, regular graphs, SNAP edge lists) and ensemble statistics,
//! - [`dynamics`]: the update kernels (ternary threshold, coordination /
//!   anti-coordination best response, rock-paper-scissors best response,
//!   table-driven),
//! - [`simulate`]: exact event-driven simulation, a uniformization oracle for
//!   small graphs, and relevant-neighborhood exploration,
//! - [`meanfield`]: the mean-field ODE system, stationary-point search and
//!   classification, basin mapping, and regular-graph closed forms,
//! - [`bounds`]: the truncated branching process, the coupled exploration of
//!   graph vs tree, and numeric evaluation of the approximation, concentration
//!   and ODE-distance bounds.

pub mod bounds;
pub mod dynamics;
pub mod graph;
pub mod meanfield;
pub mod rng;
pub mod simulate;
