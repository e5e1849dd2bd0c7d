//! Stationary points of the mean-field system: multi-start damped fixed-point
//! iteration with Newton polish, Jacobian-based stability classification, and
//! basin-of-attraction mapping.

use super::ode::{integrate, OdeConfig, RhsPlan};
use super::{MeanFieldError, MeanFieldState, PhiMode};
use crate::dynamics::UpdateKernel;
use crate::graph::NodeStatistics;
use crate::rng;
use nalgebra::DMatrix;
use rand::Rng;

const SUB_SEEDS: u64 = 0x5ead;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stability {
    Stable,
    Unstable,
    /// Some eigenvalue real part within the tolerance band around 0.
    Marginal,
}

#[derive(Debug, Clone)]
pub struct StationaryPoint {
    pub state: MeanFieldState,
    /// Sup-norm of the reduced residual phi(zeta) - zeta.
    pub residual: f64,
    pub max_re_eigenvalue: f64,
    pub stability: Stability,
}

#[derive(Debug, Clone)]
pub struct StationaryReport {
    pub points: Vec<StationaryPoint>,
    /// Seeds whose iteration failed to reach the residual tolerance.
    pub failed_seeds: usize,
}

impl StationaryReport {
    pub fn stable(&self) -> impl Iterator<Item = (usize, &StationaryPoint)> {
        self.points
            .iter()
            .enumerate()
            .filter(|(_, p)| p.stability == Stability::Stable)
    }
}

#[derive(Debug, Clone)]
pub struct StationarySearch {
    /// Simplex grid resolution per column (grid+1 points per edge).
    pub grid: usize,
    /// Cap on the number of seeds; beyond it, random simplex seeds are used.
    pub max_seeds: usize,
    /// Residual tolerance for accepting a point.
    pub tol: f64,
    /// Band around 0 within which eigenvalue real parts are "marginal".
    pub tol_eig: f64,
    pub phi_mode: PhiMode,
    pub seed: u64,
}

impl Default for StationarySearch {
    fn default() -> Self {
        StationarySearch {
            grid: 10,
            max_seeds: 20_000,
            tol: 1e-8,
            tol_eig: 1e-8,
            phi_mode: PhiMode::Exact,
            seed: 0,
        }
    }
}

/// The reduced coordinate system: one representative zeta column per group of
/// parent classes that provably share their dynamics. Frozen columns (class
/// pairs with no connecting edges) are excluded and held uniform.
struct Reduction {
    /// (child class, parent classes sharing the column).
    columns: Vec<(usize, Vec<usize>)>,
    num_labels: usize,
    num_states: usize,
}

impl Reduction {
    fn new(plan: &RhsPlan, num_labels: usize, num_states: usize) -> Self {
        let mut columns = Vec::new();
        for a in 0..num_labels {
            for parents in plan.groups(a) {
                columns.push((a, parents.to_vec()));
            }
        }
        Reduction {
            columns,
            num_labels,
            num_states,
        }
    }

    /// Free coordinates per column: the last state's mass is implicit.
    fn dim(&self) -> usize {
        self.columns.len() * (self.num_states - 1)
    }

    fn to_state(&self, z: &[f64]) -> MeanFieldState {
        let nx = self.num_states;
        let mut s = MeanFieldState::new(self.num_labels, nx);
        // frozen columns and y get a uniform placeholder
        let u = 1.0 / nx as f64;
        s.zeta.fill(u);
        s.y.fill(u);
        for (ci, (a, parents)) in self.columns.iter().enumerate() {
            let head = &z[ci * (nx - 1)..(ci + 1) * (nx - 1)];
            let sum: f64 = head.iter().sum();
            for &b in parents {
                let col = s.zeta_col_mut(*a, b);
                col[..nx - 1].copy_from_slice(head);
                col[nx - 1] = 1.0 - sum;
            }
        }
        s
    }

    fn residual(&self, plan: &RhsPlan, z: &[f64]) -> Result<Vec<f64>, MeanFieldError> {
        let s = self.to_state(z);
        let d = plan.rhs(&s)?;
        let nx = self.num_states;
        let mut g = vec![0.0; self.dim()];
        for (ci, (a, parents)) in self.columns.iter().enumerate() {
            let dcol = d.zeta_col(*a, parents[0]);
            g[ci * (nx - 1)..(ci + 1) * (nx - 1)].copy_from_slice(&dcol[..nx - 1]);
        }
        Ok(g)
    }

    /// Clamp every column back onto the probability simplex.
    fn project(&self, z: &mut [f64]) {
        let nx = self.num_states;
        for head in z.chunks_mut(nx - 1) {
            for v in head.iter_mut() {
                *v = v.clamp(0.0, 1.0);
            }
            let sum: f64 = head.iter().sum();
            if sum > 1.0 {
                for v in head.iter_mut() {
                    *v /= sum;
                }
            }
        }
    }
}

/// Enumerate the simplex grid {c/grid : c composition of grid into nx parts}
/// for every reduced column, as a cross product. Returns None if the cross
/// product exceeds the cap.
fn grid_seeds(red: &Reduction, grid: usize, cap: usize) -> Option<Vec<Vec<f64>>> {
    let nx = red.num_states;
    let mut per_col: Vec<Vec<f64>> = Vec::new(); // flattened (nx-1)-points
    let mut point = vec![0usize; nx - 1];
    enumerate(grid, 0, &mut point, grid, &mut per_col);
    let count = per_col.len();
    let total = count.checked_pow(red.columns.len() as u32)?;
    if total > cap {
        return None;
    }
    let dim = red.dim();
    let mut seeds = Vec::with_capacity(total);
    let mut idx = vec![0usize; red.columns.len()];
    loop {
        let mut z = Vec::with_capacity(dim);
        for &i in &idx {
            z.extend_from_slice(&per_col[i]);
        }
        seeds.push(z);
        let mut c = 0;
        loop {
            if c == idx.len() {
                return Some(seeds);
            }
            idx[c] += 1;
            if idx[c] < count {
                break;
            }
            idx[c] = 0;
            c += 1;
        }
    }

    fn enumerate(left: usize, dim: usize, point: &mut [usize], grid: usize, out: &mut Vec<Vec<f64>>) {
        if dim == point.len() {
            // the implicit last part takes `left`
            out.push(point.iter().map(|&c| c as f64 / grid as f64).collect());
            return;
        }
        for c in 0..=left {
            point[dim] = c;
            enumerate(left - c, dim + 1, point, grid, out);
        }
        point[dim] = 0;
    }
}

/// Find and classify the stationary points of the mean-field system.
pub fn find_stationary(
    stats: &NodeStatistics,
    kernel: &UpdateKernel,
    search: &StationarySearch,
) -> Result<StationaryReport, MeanFieldError> {
    let (stats, _) = stats.truncate_k(1.0 - 1e-8);
    let na = stats.labels().len();
    let nx = kernel.num_states();
    let plan = RhsPlan::new(&stats, kernel, search.phi_mode);
    let red = Reduction::new(&plan, na, nx);
    let dim = red.dim();
    if dim == 0 {
        return Ok(StationaryReport {
            points: vec![],
            failed_seeds: 0,
        });
    }

    let seeds = match grid_seeds(&red, search.grid.max(2), search.max_seeds) {
        Some(s) => s,
        None => {
            // random simplex seeds via normalized exponentials
            let mut rng = rng::stream(search.seed, &[SUB_SEEDS]);
            (0..search.max_seeds)
                .map(|_| {
                    let mut z = Vec::with_capacity(dim);
                    for _ in 0..red.columns.len() {
                        let e: Vec<f64> = (0..nx)
                            .map(|_| -rng.gen::<f64>().max(f64::MIN_POSITIVE).ln())
                            .collect();
                        let s: f64 = e.iter().sum();
                        z.extend(e[..nx - 1].iter().map(|v| v / s));
                    }
                    z
                })
                .collect()
        }
    };

    let mut found: Vec<(Vec<f64>, f64)> = Vec::new();
    let mut failed = 0usize;
    for seed in seeds {
        // pure Newton reaches unstable points near the seed; damped iteration
        // followed by Newton reaches the attractors of the flow
        let candidates = [
            newton_polish(&red, &plan, seed.clone(), search.tol, 30)?,
            polish(&red, &plan, seed, search.tol)?,
        ];
        let mut any = false;
        for cand in candidates.into_iter().flatten() {
            any = true;
            let (z, res) = cand;
            if !found
                .iter()
                .any(|(f, _)| f.iter().zip(&z).all(|(x, y)| (x - y).abs() < 1e-6))
            {
                found.push((z, res));
            }
        }
        if !any {
            failed += 1;
        }
    }

    let mut points = Vec::with_capacity(found.len());
    for (z, residual) in found {
        let jac = jacobian(&red, &plan, &z)?;
        let eigs = jac.complex_eigenvalues();
        let max_re = eigs.iter().map(|e| e.re).fold(f64::NEG_INFINITY, f64::max);
        let stability = if max_re < -search.tol_eig {
            Stability::Stable
        } else if max_re > search.tol_eig {
            Stability::Unstable
        } else {
            Stability::Marginal
        };
        let mut state = red.to_state(&z);
        // y at a fixed point equals its drive: y* = dy + y for any y
        let d = plan.rhs(&state)?;
        for i in 0..state.y.len() {
            state.y[i] += d.y[i];
        }
        points.push(StationaryPoint {
            state,
            residual,
            max_re_eigenvalue: max_re,
            stability,
        });
    }
    points.sort_by(|p, q| {
        p.state
            .zeta
            .partial_cmp(&q.state.zeta)
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    Ok(StationaryReport {
        points,
        failed_seeds: failed,
    })
}

/// Damped fixed-point iteration followed by Newton steps. Returns the point
/// and its residual, or None if the tolerance is not reached.
fn polish(
    red: &Reduction,
    plan: &RhsPlan,
    mut z: Vec<f64>,
    tol: f64,
) -> Result<Option<(Vec<f64>, f64)>, MeanFieldError> {
    let alpha = 0.5;
    let mut g = red.residual(plan, &z)?;
    for _ in 0..400 {
        let norm = g.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if norm < 1e-12 {
            return Ok(Some((z, norm)));
        }
        for (zi, gi) in z.iter_mut().zip(&g) {
            *zi += alpha * gi;
        }
        red.project(&mut z);
        g = red.residual(plan, &z)?;
    }
    newton_polish(red, plan, z, tol, 25)
}

/// Newton iteration on the reduced residual, projected back onto the simplex
/// after each step.
fn newton_polish(
    red: &Reduction,
    plan: &RhsPlan,
    mut z: Vec<f64>,
    tol: f64,
    iters: usize,
) -> Result<Option<(Vec<f64>, f64)>, MeanFieldError> {
    let mut g = red.residual(plan, &z)?;
    for _ in 0..iters {
        let norm = g.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if norm < tol.min(1e-10) {
            return Ok(Some((z, norm)));
        }
        let jac = jacobian(red, plan, &z)?;
        let rhs = nalgebra::DVector::from_iterator(g.len(), g.iter().map(|v| -v));
        let Some(delta) = jac.lu().solve(&rhs) else {
            break;
        };
        for (zi, di) in z.iter_mut().zip(delta.iter()) {
            *zi += di;
        }
        red.project(&mut z);
        g = red.residual(plan, &z)?;
    }
    let norm = g.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if norm <= tol {
        Ok(Some((z, norm)))
    } else {
        Ok(None)
    }
}

/// Central finite-difference Jacobian of the reduced residual.
fn jacobian(red: &Reduction, plan: &RhsPlan, z: &[f64]) -> Result<DMatrix<f64>, MeanFieldError> {
    let dim = z.len();
    let h = 1e-6;
    let mut jac = DMatrix::zeros(dim, dim);
    let mut zp = z.to_vec();
    for j in 0..dim {
        zp[j] = z[j] + h;
        let gp = red.residual(plan, &zp)?;
        zp[j] = z[j] - h;
        let gm = red.residual(plan, &zp)?;
        zp[j] = z[j];
        for i in 0..dim {
            jac[(i, j)] = (gp[i] - gm[i]) / (2.0 * h);
        }
    }
    Ok(jac)
}

/// Map initial states to the index of the stable stationary point whose
/// zeta array they approach within `tol` (sup-norm over active columns)
/// before the horizon, or None if undecided.
pub fn map_basins(
    stats: &NodeStatistics,
    kernel: &UpdateKernel,
    report: &StationaryReport,
    inits: &[MeanFieldState],
    cfg: &OdeConfig,
    tol: f64,
) -> Result<Vec<Option<usize>>, MeanFieldError> {
    let (tstats, _) = stats.truncate_k(1.0 - 1e-8);
    let na = tstats.labels().len();
    let nx = kernel.num_states();
    let plan = RhsPlan::new(&tstats, kernel, cfg.phi_mode);
    let red = Reduction::new(&plan, na, nx);
    let stable: Vec<(usize, &StationaryPoint)> = report.stable().collect();
    let dist = |s: &MeanFieldState, p: &MeanFieldState| -> f64 {
        let mut worst: f64 = 0.0;
        for (a, parents) in &red.columns {
            for &b in parents {
                for (x, y) in s.zeta_col(*a, b).iter().zip(p.zeta_col(*a, b)) {
                    worst = worst.max((x - y).abs());
                }
            }
        }
        worst
    };
    let mut labels = Vec::with_capacity(inits.len());
    for init in inits {
        let hit = stable
            .iter()
            .find(|(_, p)| dist(init, &p.state) <= tol)
            .map(|(i, _)| *i);
        if hit.is_some() {
            labels.push(hit);
            continue;
        }
        let traj = integrate(stats, kernel, init, cfg)?;
        let mut label = None;
        'outer: for s in &traj.states {
            for (i, p) in &stable {
                if dist(s, &p.state) <= tol {
                    label = Some(*i);
                    break 'outer;
                }
            }
        }
        labels.push(label);
    }
    Ok(labels)
}
