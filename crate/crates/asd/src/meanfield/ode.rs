//! Fixed-step RK4 integration of the mean-field system
//! dzeta/dt = phi(zeta) - zeta, dy/dt = psi(zeta) - y.

use super::{phi_mixture, MeanFieldError, MeanFieldState, PhiMode};
use crate::dynamics::UpdateKernel;
use crate::graph::{DegreeVector, NodeStatistics};

#[derive(Debug, Clone)]
pub struct OdeConfig {
    /// RK4 step.
    pub h: f64,
    pub horizon: f64,
    pub phi_mode: PhiMode,
    /// Record every this many steps (the initial and final states are always
    /// recorded).
    pub record_every: usize,
}

impl OdeConfig {
    pub fn new(horizon: f64) -> Self {
        OdeConfig {
            h: 0.01,
            horizon,
            phi_mode: PhiMode::Exact,
            record_every: 10,
        }
    }
}

#[derive(Debug, Clone)]
pub struct OdeTrajectory {
    pub times: Vec<f64>,
    pub states: Vec<MeanFieldState>,
    /// Out-degree tail mass per class discarded when truncating the input
    /// statistics to finite support.
    pub discarded_tail: Vec<f64>,
}

impl OdeTrajectory {
    pub fn final_state(&self) -> &MeanFieldState {
        self.states.last().expect("trajectory is never empty")
    }
}

/// One distinct degree mixture within a child class, with the set of
/// consumers it drives.
struct MixtureEntry {
    cells: Vec<(DegreeVector, f64)>,
    /// Parent classes b whose column zeta_{.|a,b} follows this mixture.
    parents: Vec<usize>,
    /// Whether the root marginal y_a also follows this mixture.
    drives_y: bool,
}

/// Precomputed evaluation plan: per child class, the distinct degree
/// mixtures. Columns with no incoming mixture (no edges from that parent
/// class) are frozen at their initial value.
pub(crate) struct RhsPlan {
    pub num_labels: usize,
    entries: Vec<Vec<MixtureEntry>>,
    kernel: UpdateKernel,
    mode: PhiMode,
}

impl RhsPlan {
    pub fn new(stats: &NodeStatistics, kernel: &UpdateKernel, mode: PhiMode) -> Self {
        let na = stats.labels().len();
        let mut entries: Vec<Vec<MixtureEntry>> = Vec::with_capacity(na);
        for a in 0..na {
            let mut list: Vec<MixtureEntry> = Vec::new();
            for b in 0..na {
                // law of a class-a child reached from a class-b node
                let cells = stats.q_k_marginal(b, a);
                if cells.is_empty() {
                    continue; // frozen column
                }
                match list.iter_mut().find(|e| e.cells == cells) {
                    Some(e) => e.parents.push(b),
                    None => list.push(MixtureEntry {
                        cells,
                        parents: vec![b],
                        drives_y: false,
                    }),
                }
            }
            let node_cells = stats.k_marginal(a);
            if !node_cells.is_empty() {
                match list.iter_mut().find(|e| e.cells == node_cells) {
                    Some(e) => e.drives_y = true,
                    None => list.push(MixtureEntry {
                        cells: node_cells,
                        parents: vec![],
                        drives_y: true,
                    }),
                }
            }
            entries.push(list);
        }
        RhsPlan {
            num_labels: na,
            entries,
            kernel: kernel.clone(),
            mode,
        }
    }

    /// Derivative of the full state; frozen columns get derivative 0.
    pub fn rhs(&self, s: &MeanFieldState) -> Result<MeanFieldState, MeanFieldError> {
        let nx = s.num_states;
        let mut d = MeanFieldState::new(s.num_labels, nx);
        for a in 0..self.num_labels {
            let cols = s.child_cols(a);
            for entry in &self.entries[a] {
                let phi = phi_mixture(&entry.cells, a, &cols, &self.kernel, self.mode)?;
                for &b in &entry.parents {
                    let col = s.zeta_col(a, b);
                    let dcol = d.zeta_col_mut(a, b);
                    for x in 0..nx {
                        dcol[x] = phi[x] - col[x];
                    }
                }
                if entry.drives_y {
                    let ycol = s.y_col(a);
                    for x in 0..nx {
                        d.y[a * nx + x] = phi[x] - ycol[x];
                    }
                }
            }
        }
        Ok(d)
    }

    /// Parent groups per child class: the column sets that provably evolve
    /// together (used by the stationary-point reduction).
    pub fn groups(&self, a: usize) -> Vec<&[usize]> {
        self.entries[a]
            .iter()
            .filter(|e| !e.parents.is_empty())
            .map(|e| e.parents.as_slice())
            .collect()
    }
}

fn axpy(out: &mut MeanFieldState, base: &MeanFieldState, k: &MeanFieldState, c: f64) {
    for (o, (b, v)) in out.zeta.iter_mut().zip(base.zeta.iter().zip(&k.zeta)) {
        *o = b + c * v;
    }
    for (o, (b, v)) in out.y.iter_mut().zip(base.y.iter().zip(&k.y)) {
        *o = b + c * v;
    }
}

/// Clamp to [0,1] and renormalize every column. Roundoff-scale drift is
/// repaired silently; returns true only when the step produced real drift
/// (beyond 1e-9), which counts toward the StepTooLarge budget.
fn renormalize(s: &mut MeanFieldState) -> bool {
    let nx = s.num_states;
    let mut fired = false;
    for col in s.zeta.chunks_mut(nx).chain(s.y.chunks_mut(nx)) {
        let before: f64 = col.iter().sum();
        if before == 0.0 {
            continue; // untouched frozen/empty column
        }
        if (before - 1.0).abs() > 1e-9 || col.iter().any(|&v| !(-1e-9..=1.0 + 1e-9).contains(&v)) {
            fired = true;
        }
        for v in col.iter_mut() {
            *v = v.clamp(0.0, 1.0);
        }
        let sum: f64 = col.iter().sum();
        if sum > 0.0 && (sum - 1.0).abs() > 1e-15 {
            for v in col.iter_mut() {
                *v /= sum;
            }
        }
    }
    fired
}

/// Integrate the mean-field system from `init` with fixed-step RK4. The
/// out-degree support of `stats` is truncated at cumulative mass 1 - 1e-8 per
/// class; the discarded tail is reported on the trajectory.
pub fn integrate(
    stats: &NodeStatistics,
    kernel: &UpdateKernel,
    init: &MeanFieldState,
    cfg: &OdeConfig,
) -> Result<OdeTrajectory, MeanFieldError> {
    if cfg.h <= 0.0 || cfg.horizon < 0.0 {
        return Err(MeanFieldError::InvalidArgument(
            "step and horizon must be positive".into(),
        ));
    }
    let (stats, discarded_tail) = stats.truncate_k(1.0 - 1e-8);
    let plan = RhsPlan::new(&stats, kernel, cfg.phi_mode);
    let steps = (cfg.horizon / cfg.h).round().max(1.0) as usize;
    let h = cfg.horizon / steps as f64;

    let mut state = init.clone();
    let mut times = vec![0.0];
    let mut states = vec![state.clone()];
    let mut fired = 0usize;
    let mut stage = state.clone();
    for step in 1..=steps {
        let k1 = plan.rhs(&state)?;
        axpy(&mut stage, &state, &k1, h / 2.0);
        let k2 = plan.rhs(&stage)?;
        axpy(&mut stage, &state, &k2, h / 2.0);
        let k3 = plan.rhs(&stage)?;
        axpy(&mut stage, &state, &k3, h);
        let k4 = plan.rhs(&stage)?;
        for i in 0..state.zeta.len() {
            state.zeta[i] += h / 6.0 * (k1.zeta[i] + 2.0 * k2.zeta[i] + 2.0 * k3.zeta[i] + k4.zeta[i]);
        }
        for i in 0..state.y.len() {
            state.y[i] += h / 6.0 * (k1.y[i] + 2.0 * k2.y[i] + 2.0 * k3.y[i] + k4.y[i]);
        }
        if renormalize(&mut state) {
            fired += 1;
        }
        if step % cfg.record_every.max(1) == 0 || step == steps {
            times.push(step as f64 * h);
            states.push(state.clone());
        }
    }
    if fired * 1000 > steps {
        return Err(MeanFieldError::StepTooLarge { fired, steps });
    }
    Ok(OdeTrajectory {
        times,
        states,
        discarded_tail,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{brca_kernel, erg_kernel, tltm_kernel, StateSet};
    use crate::graph::{regular_statistics, LabelSet};
    use crate::meanfield::{brca_ode_rhs, brca_phi1};

    #[test]
    fn erg_uniform_point_is_stationary() {
        let stats = regular_statistics(6, &StateSet::rps());
        let kernel = erg_kernel(1.0, 2.0).unwrap();
        let third = vec![1.0 / 3.0; 3];
        let init = MeanFieldState::from_class_distributions(&[third.clone()], 1);
        let mut cfg = OdeConfig::new(2.0);
        cfg.h = 0.05;
        let traj = integrate(&stats, &kernel, &init, &cfg).unwrap();
        for (a, b) in traj.final_state().zeta.iter().zip(&init.zeta) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn brca_matches_scalar_closed_form() {
        // single class, regular degree k: zeta_1 follows the scalar ODE with
        // alpha = 1 (all nodes coordinating)
        let k = 5u32;
        let stats = regular_statistics(k, &StateSet::binary_signed());
        let kernel = brca_kernel(true);
        let init = MeanFieldState::from_class_distributions(&[vec![0.3, 0.7]], 1);
        let mut cfg = OdeConfig::new(3.0);
        cfg.h = 0.005;
        cfg.record_every = 1;
        let traj = integrate(&stats, &kernel, &init, &cfg).unwrap();

        // independent RK4 on the scalar form
        let mut y = 0.7f64;
        let f = |y: f64| brca_ode_rhs(k as u64, 1.0, y);
        let steps = (3.0f64 / 0.005).round() as usize;
        let h = 3.0 / steps as f64;
        let mut scalar = vec![y];
        for _ in 0..steps {
            let k1 = f(y);
            let k2 = f(y + h / 2.0 * k1);
            let k3 = f(y + h / 2.0 * k2);
            let k4 = f(y + h * k3);
            y += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            scalar.push(y);
        }
        for (s, state) in scalar.iter().zip(&traj.states) {
            assert!(
                (state.zeta_col(0, 0)[1] - s).abs() < 1e-8,
                "{} vs {s}",
                state.zeta_col(0, 0)[1]
            );
        }
        // sanity: the drift is real (phi1 pushes 0.7 upward for majority)
        assert!(brca_phi1(k as u64, 0.7) > 0.7);
    }

    #[test]
    fn tltm_trajectory_stays_on_simplex() {
        let stats = regular_statistics(10, &StateSet::ternary_signed());
        let kernel = tltm_kernel(2, 2).unwrap();
        let init = MeanFieldState::from_class_distributions(&[vec![0.2, 0.5, 0.3]], 1);
        let mut cfg = OdeConfig::new(10.0);
        cfg.h = 0.01;
        let traj = integrate(&stats, &kernel, &init, &cfg).unwrap();
        for s in &traj.states {
            for col in s.zeta.chunks(3).chain(s.y.chunks(3)) {
                let sum: f64 = col.iter().sum();
                assert!((sum - 1.0).abs() < 1e-9);
                assert!(col.iter().all(|&v| (-1e-9..=1.0 + 1e-9).contains(&v)));
            }
        }
    }

    #[test]
    fn frozen_columns_keep_initial_value() {
        // two classes, no edges between or within class 1
        use crate::graph::{Cell, DegreeVector, NodeStatistics};
        let labels = LabelSet::numbered(2);
        let states = StateSet::binary_signed();
        let cells = vec![
            Cell {
                d: DegreeVector(vec![3, 0]),
                k: DegreeVector(vec![3, 0]),
                a: 0,
                p: 0.5,
            },
            Cell {
                d: DegreeVector(vec![0, 0]),
                k: DegreeVector(vec![0, 0]),
                a: 1,
                p: 0.5,
            },
        ];
        let stats = NodeStatistics::new(labels, states, cells, vec![vec![0.5, 0.5]; 2]).unwrap();
        let kernel = brca_kernel(true);
        let init =
            MeanFieldState::from_class_distributions(&[vec![0.4, 0.6], vec![0.9, 0.1]], 2);
        let cfg = OdeConfig::new(1.0);
        let traj = integrate(&stats, &kernel, &init, &cfg).unwrap();
        let fin = traj.final_state();
        // class-1 columns are never reached by any edge: frozen
        assert_eq!(fin.zeta_col(1, 0), init.zeta_col(1, 0));
        assert_eq!(fin.zeta_col(1, 1), init.zeta_col(1, 1));
        // class-0 seen from class 1 is frozen too (no 1 -> 0 edges)
        assert_eq!(fin.zeta_col(0, 1), init.zeta_col(0, 1));
        // but class-0 seen from class 0 moves
        assert_ne!(fin.zeta_col(0, 0), init.zeta_col(0, 0));
    }
}
