//! Mean-field approximation: the functionals phi (next-state law of a node
//! given i.i.d. neighbor states), the ODE system they drive, stationary-point
//! analysis, and regular-graph closed forms.

mod closed;
mod ode;
mod stationary;

pub use closed::{brca_alpha_th, brca_ode_rhs, brca_phi1, erg_pi, tltm_phi_plus};
pub use ode::{integrate, OdeConfig, OdeTrajectory};
pub(crate) use ode::RhsPlan;
pub use stationary::{
    find_stationary, map_basins, Stability, StationaryPoint, StationaryReport, StationarySearch,
};

use crate::dynamics::{NeighborCounts, UpdateKernel};
use crate::graph::DegreeVector;
use crate::rng;
use rand::Rng;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MeanFieldError {
    #[error("exact enumeration budget exceeded: {needed} > {budget} compositions")]
    BudgetExceeded { needed: u128, budget: u128 },
    #[error("integration step too large: renormalization fired on {fired} of {steps} steps")]
    StepTooLarge { fired: usize, steps: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

/// Point of the mean-field system: per-edge-type state distributions zeta and
/// per-class root marginals y.
///
/// `zeta` holds one probability column per ordered (child class a, parent
/// class b) pair at `((a * num_labels) + b) * num_states ..`: the state law of
/// a class-a node reached from a class-b node. `y` holds one column per class
/// at `a * num_states ..`.
#[derive(Debug, Clone, PartialEq)]
pub struct MeanFieldState {
    pub zeta: Vec<f64>,
    pub y: Vec<f64>,
    pub num_labels: usize,
    pub num_states: usize,
}

impl MeanFieldState {
    pub fn new(num_labels: usize, num_states: usize) -> Self {
        MeanFieldState {
            zeta: vec![0.0; num_labels * num_labels * num_states],
            y: vec![0.0; num_labels * num_states],
            num_labels,
            num_states,
        }
    }

    /// Uniform initialization from per-class state distributions: every
    /// zeta column of a class-a child and the class-a root marginal get the
    /// same distribution.
    pub fn from_class_distributions(rows: &[Vec<f64>], num_labels: usize) -> Self {
        let num_states = rows[0].len();
        let mut s = Self::new(num_labels, num_states);
        for a in 0..num_labels {
            for b in 0..num_labels {
                s.zeta_col_mut(a, b).copy_from_slice(&rows[a]);
            }
            s.y[a * num_states..(a + 1) * num_states].copy_from_slice(&rows[a]);
        }
        s
    }

    pub fn zeta_col(&self, a: usize, b: usize) -> &[f64] {
        let i = (a * self.num_labels + b) * self.num_states;
        &self.zeta[i..i + self.num_states]
    }

    pub fn zeta_col_mut(&mut self, a: usize, b: usize) -> &mut [f64] {
        let i = (a * self.num_labels + b) * self.num_states;
        &mut self.zeta[i..i + self.num_states]
    }

    pub fn y_col(&self, a: usize) -> &[f64] {
        &self.y[a * self.num_states..(a + 1) * self.num_states]
    }

    /// Child-state columns seen from a class-`parent` node: entry c is
    /// zeta_{.|c,parent}.
    pub fn child_cols(&self, parent: usize) -> Vec<&[f64]> {
        (0..self.num_labels).map(|c| self.zeta_col(c, parent)).collect()
    }
}

/// How phi is evaluated.
#[derive(Debug, Clone, Copy)]
pub enum PhiMode {
    /// Exact sum over count matrices; error if over budget.
    Exact,
    /// Unbiased Monte Carlo with the given sample count and seed.
    MonteCarlo { samples: usize, seed: u64 },
    /// Exact when within budget, Monte Carlo otherwise.
    Auto { samples: usize, seed: u64 },
}

/// Default enumeration budget: product over classes of the per-row
/// composition counts.
pub const PHI_BUDGET: u128 = 200_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PhiModeUsed {
    Exact,
    MonteCarlo,
}

#[derive(Debug, Clone)]
pub struct PhiResult {
    pub probs: Vec<f64>,
    pub mode: PhiModeUsed,
}

fn compositions_count(k: u64, parts: u64) -> u128 {
    // C(k + parts - 1, parts - 1)
    let mut num = 1u128;
    let mut den = 1u128;
    for i in 0..(parts - 1) {
        num = num.saturating_mul((k + parts - 1 - i) as u128);
        den *= (i + 1) as u128;
    }
    num / den
}

/// Next-state law of a class-`label` node with out-degree vector k whose
/// class-c neighbors are i.i.d. with state law `cols[c]`.
pub fn phi_varphi(
    k: &DegreeVector,
    label: usize,
    cols: &[&[f64]],
    kernel: &UpdateKernel,
    mode: PhiMode,
) -> Result<PhiResult, MeanFieldError> {
    let nx = kernel.num_states();
    let na = k.len();
    for col in cols {
        let s: f64 = col.iter().sum();
        if (s - 1.0).abs() > 1e-9 || col.len() != nx {
            return Err(MeanFieldError::InvalidArgument(
                "neighbor state columns must be distributions over the kernel's states".into(),
            ));
        }
    }
    let needed: u128 = (0..na)
        .map(|c| compositions_count(k[c] as u64, nx as u64))
        .product();
    match mode {
        PhiMode::Exact => {
            if needed > PHI_BUDGET {
                return Err(MeanFieldError::BudgetExceeded {
                    needed,
                    budget: PHI_BUDGET,
                });
            }
            Ok(PhiResult {
                probs: phi_exact(k, label, cols, kernel),
                mode: PhiModeUsed::Exact,
            })
        }
        PhiMode::MonteCarlo { samples, seed } => Ok(PhiResult {
            probs: phi_monte_carlo(k, label, cols, kernel, samples, seed),
            mode: PhiModeUsed::MonteCarlo,
        }),
        PhiMode::Auto { samples, seed } => {
            if needed > PHI_BUDGET {
                Ok(PhiResult {
                    probs: phi_monte_carlo(k, label, cols, kernel, samples, seed),
                    mode: PhiModeUsed::MonteCarlo,
                })
            } else {
                Ok(PhiResult {
                    probs: phi_exact(k, label, cols, kernel),
                    mode: PhiModeUsed::Exact,
                })
            }
        }
    }
}

/// Exact sum over all count matrices with the given row sums: per-row
/// multinomial weight times the product of column probabilities.
fn phi_exact(k: &DegreeVector, label: usize, cols: &[&[f64]], kernel: &UpdateKernel) -> Vec<f64> {
    let nx = kernel.num_states();
    let na = k.len();
    let mut xi = NeighborCounts::zeros(na, nx);
    let mut out = vec![0.0; nx];
    recurse(k, label, cols, kernel, 0, 1.0, &mut xi, &mut out);
    return out;

    fn recurse(
        k: &DegreeVector,
        label: usize,
        cols: &[&[f64]],
        kernel: &UpdateKernel,
        class: usize,
        weight: f64,
        xi: &mut NeighborCounts,
        out: &mut Vec<f64>,
    ) {
        if class == k.len() {
            if weight != 0.0 {
                let p = kernel.evaluate(label, xi).expect("state count checked");
                for (o, &v) in out.iter_mut().zip(&p) {
                    *o += weight * v;
                }
            }
            return;
        }
        let nx = kernel.num_states();
        // enumerate compositions of k[class] into nx cells with multinomial
        // weight, building the factor incrementally
        row(k, label, cols, kernel, class, 0, k[class] as u64, weight, 1.0, xi, out);

        #[allow(clippy::too_many_arguments)]
        fn row(
            k: &DegreeVector,
            label: usize,
            cols: &[&[f64]],
            kernel: &UpdateKernel,
            class: usize,
            state: usize,
            remaining: u64,
            weight: f64,
            factor: f64,
            xi: &mut NeighborCounts,
            out: &mut Vec<f64>,
        ) {
            let nx = kernel.num_states();
            if state == nx - 1 {
                // last cell takes the remainder
                xi.counts[class * nx + state] = remaining;
                let f = factor * cols[class][state].powi(remaining as i32);
                recurse(k, label, cols, kernel, class + 1, weight * f, xi, out);
                xi.counts[class * nx + state] = 0;
                return;
            }
            let mut factor = factor;
            for c in 0..=remaining {
                xi.counts[class * nx + state] = c;
                row(
                    k,
                    label,
                    cols,
                    kernel,
                    class,
                    state + 1,
                    remaining - c,
                    weight,
                    factor,
                    xi,
                    out,
                );
                // extend the multinomial coefficient and probability power:
                // choosing one more neighbor for this cell multiplies by
                // (remaining - c) / (c + 1) * p
                factor *= (remaining - c) as f64 / (c + 1) as f64 * cols[class][state];
            }
            xi.counts[class * nx + state] = 0;
        }
        let _ = nx;
    }
}

fn phi_monte_carlo(
    k: &DegreeVector,
    label: usize,
    cols: &[&[f64]],
    kernel: &UpdateKernel,
    samples: usize,
    seed: u64,
) -> Vec<f64> {
    let nx = kernel.num_states();
    let na = k.len();
    let mut rng = rng::stream(seed, &[0x9b1]);
    let mut out = vec![0.0; nx];
    let mut xi = NeighborCounts::zeros(na, nx);
    for _ in 0..samples {
        xi.counts.iter_mut().for_each(|c| *c = 0);
        for c in 0..na {
            for _ in 0..k[c] {
                let u: f64 = rng.gen();
                let mut acc = 0.0;
                let mut s = nx - 1;
                for (x, &p) in cols[c].iter().enumerate() {
                    acc += p;
                    if u < acc {
                        s = x;
                        break;
                    }
                }
                xi.add(c, s, 1);
            }
        }
        let p = kernel.evaluate(label, &xi).expect("state count checked");
        for (o, &v) in out.iter_mut().zip(&p) {
            *o += v;
        }
    }
    for o in &mut out {
        *o /= samples as f64;
    }
    out
}

/// Mixture of phi over a finite out-degree law: the edge- or node-perspective
/// functionals. Uses a shared-prefix dynamic program over aggregated neighbor
/// counts for label-blind kernels, falling back to per-cell evaluation
/// otherwise.
pub fn phi_mixture(
    cells: &[(DegreeVector, f64)],
    label: usize,
    cols: &[&[f64]],
    kernel: &UpdateKernel,
    mode: PhiMode,
) -> Result<Vec<f64>, MeanFieldError> {
    if cells.is_empty() {
        return Err(MeanFieldError::InvalidArgument(
            "empty degree mixture".into(),
        ));
    }
    let nx = kernel.num_states();
    if let Some((plus, minus)) = kernel.signed_difference() {
        return Ok(mixture_signed(cells, label, cols, kernel, plus, minus));
    }
    if kernel.label_blind() {
        return Ok(mixture_lattice(cells, label, cols, kernel));
    }
    let mut out = vec![0.0; nx];
    for (k, w) in cells {
        let r = phi_varphi(k, label, cols, kernel, mode)?;
        for (o, &v) in out.iter_mut().zip(&r.probs) {
            *o += w * v;
        }
    }
    Ok(out)
}

/// phi over the degree mixture for kernels that only see the aggregated
/// difference counts[plus] - counts[minus]. Cells are processed in
/// lexicographic degree order so common prefixes of the walk distribution are
/// shared.
fn mixture_signed(
    cells: &[(DegreeVector, f64)],
    label: usize,
    cols: &[&[f64]],
    kernel: &UpdateKernel,
    plus: usize,
    minus: usize,
) -> Vec<f64> {
    let mut sorted: Vec<&(DegreeVector, f64)> = cells.iter().collect();
    sorted.sort_by(|x, y| x.0.cmp(&y.0));
    let kmax: u64 = sorted.iter().map(|(k, _)| k.total()).max().unwrap();
    let offset = kmax as usize;
    // dist[offset + s] = P(difference = s), support [-m, m] after m neighbors
    let mut dist = vec![0.0; 2 * offset + 1];
    dist[offset] = 1.0;
    let nx = kernel.num_states();
    let mut out = vec![0.0; nx];
    go(
        &sorted, 0, dist, offset, label, cols, kernel, plus, minus, &mut out,
    );
    return out;

    #[allow(clippy::too_many_arguments)]
    fn go(
        cells: &[&(DegreeVector, f64)],
        class: usize,
        dist: Vec<f64>,
        offset: usize,
        label: usize,
        cols: &[&[f64]],
        kernel: &UpdateKernel,
        plus: usize,
        minus: usize,
        out: &mut Vec<f64>,
    ) {
        let na = cells[0].0.len();
        if class == na {
            // all remaining cells share the full degree vector
            let w: f64 = cells.iter().map(|(_, w)| *w).sum();
            for (s, &p) in dist.iter().enumerate() {
                if p != 0.0 {
                    let probs = kernel.evaluate_signed(label, s as i64 - offset as i64);
                    for (o, &v) in out.iter_mut().zip(&probs) {
                        *o += w * p * v;
                    }
                }
            }
            return;
        }
        // no clamping: the DP must stay an exact multilinear polynomial in the
        // column entries so finite differencing across the simplex boundary is
        // consistent
        let p_plus = cols[class][plus];
        let p_minus = cols[class][minus];
        let p_zero = 1.0 - p_plus - p_minus;
        let mut dist = dist;
        let mut m = 0u32;
        let mut i = 0;
        while i < cells.len() {
            let target = cells[i].0[class];
            while m < target {
                let mut next = vec![0.0; dist.len()];
                // support stays within [offset - m, offset + m], so the
                // shifted indices cannot leave the array
                for (s, &p) in dist.iter().enumerate() {
                    if p != 0.0 {
                        if s + 1 < next.len() {
                            next[s + 1] += p * p_plus;
                        }
                        if s > 0 {
                            next[s - 1] += p * p_minus;
                        }
                        next[s] += p * p_zero;
                    }
                }
                dist = next;
                m += 1;
            }
            let mut j = i;
            while j < cells.len() && cells[j].0[class] == target {
                j += 1;
            }
            go(
                &cells[i..j],
                class + 1,
                dist.clone(),
                offset,
                label,
                cols,
                kernel,
                plus,
                minus,
                out,
            );
            i = j;
        }
    }
}

/// phi over the degree mixture for label-blind kernels: dynamic program over
/// the aggregated per-state counts (the last state's count is implicit).
fn mixture_lattice(
    cells: &[(DegreeVector, f64)],
    label: usize,
    cols: &[&[f64]],
    kernel: &UpdateKernel,
) -> Vec<f64> {
    let mut sorted: Vec<&(DegreeVector, f64)> = cells.iter().collect();
    sorted.sort_by(|x, y| x.0.cmp(&y.0));
    let nx = kernel.num_states();
    let kmax = sorted.iter().map(|(k, _)| k.total()).max().unwrap() as usize;
    let stride = kmax + 1;
    let dims = nx - 1;
    let size = stride.pow(dims as u32);
    let mut dist = vec![0.0; size];
    dist[0] = 1.0;
    let mut out = vec![0.0; nx];
    go(
        &sorted, 0, dist, 0, stride, dims, label, cols, kernel, &mut out,
    );
    return out;

    #[allow(clippy::too_many_arguments)]
    fn go(
        cells: &[&(DegreeVector, f64)],
        class: usize,
        dist: Vec<f64>,
        m: u32,
        stride: usize,
        dims: usize,
        label: usize,
        cols: &[&[f64]],
        kernel: &UpdateKernel,
        out: &mut Vec<f64>,
    ) {
        let na = cells[0].0.len();
        let nx = dims + 1;
        if class == na {
            // all remaining cells share the full degree vector
            let w: f64 = cells.iter().map(|(_, w)| *w).sum();
            let mut counts = vec![0u64; nx];
            let mut point = vec![0usize; dims];
            visit(&dist, 0, 0, 0, stride, dims, m as usize, &mut point, &mut |point, p| {
                let sum: usize = point.iter().sum();
                for (x, &c) in point.iter().enumerate() {
                    counts[x] = c as u64;
                }
                counts[nx - 1] = (m as usize - sum) as u64;
                let probs = kernel.evaluate_aggregate(label, &counts);
                for (o, &v) in out.iter_mut().zip(&probs) {
                    *o += w * p * v;
                }
            });
            return;
        }
        let probs = cols[class];
        let mut dist = dist;
        let m_entry = m;
        let mut m = m;
        let mut i = 0;
        while i < cells.len() {
            let target = m_entry + cells[i].0[class];
            // extend by one class-`class` neighbor at a time; coordinates
            // stay <= m < stride, so the shifted indices stay in range
            while m < target {
                let mut next = vec![0.0; dist.len()];
                for (idx, &p) in dist.iter().enumerate() {
                    if p == 0.0 {
                        continue;
                    }
                    let mut mul = 1usize;
                    for x in 0..dims {
                        next[idx + mul] += p * probs[x];
                        mul *= stride;
                    }
                    next[idx] += p * probs[nx - 1];
                }
                dist = next;
                m += 1;
            }
            let mut j = i;
            while j < cells.len() && cells[j].0[class] == cells[i].0[class] {
                j += 1;
            }
            go(
                &cells[i..j],
                class + 1,
                dist.clone(),
                m,
                stride,
                dims,
                label,
                cols,
                kernel,
                out,
            );
            i = j;
        }
    }

    // walk all lattice points with coordinate sum <= m
    #[allow(clippy::too_many_arguments)]
    fn visit(
        dist: &[f64],
        dim: usize,
        idx: usize,
        sum: usize,
        stride: usize,
        dims: usize,
        m: usize,
        point: &mut [usize],
        f: &mut dyn FnMut(&[usize], f64),
    ) {
        if dim == dims {
            let p = dist[idx];
            if p != 0.0 {
                f(point, p);
            }
            return;
        }
        let mul = stride.pow(dim as u32);
        for c in 0..=(m - sum) {
            point[dim] = c;
            visit(dist, dim + 1, idx + c * mul, sum + c, stride, dims, m, point, f);
        }
        point[dim] = 0;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{brca_kernel, erg_kernel, tltm_kernel, UpdateKernel};
    use crate::rng;
    use rand::Rng;

    fn random_simplex(rng: &mut impl Rng, nx: usize) -> Vec<f64> {
        let raw: Vec<f64> = (0..nx).map(|_| -rng.gen::<f64>().ln()).collect();
        let s: f64 = raw.iter().sum();
        raw.into_iter().map(|v| v / s).collect()
    }

    fn kernels() -> Vec<UpdateKernel> {
        vec![
            tltm_kernel(2, 1).unwrap(),
            brca_kernel(true),
            brca_kernel(false),
            erg_kernel(1.0, 2.0).unwrap(),
        ]
    }

    #[test]
    fn phi_outputs_are_distributions() {
        let mut rng = rng::stream(5, &[0x777]);
        for kernel in kernels() {
            let nx = kernel.num_states();
            for total in [0u32, 1, 3, 8] {
                let k = DegreeVector(vec![total]);
                let col = random_simplex(&mut rng, nx);
                let r = phi_varphi(&k, 0, &[&col], &kernel, PhiMode::Exact).unwrap();
                assert_eq!(r.mode, PhiModeUsed::Exact);
                let s: f64 = r.probs.iter().sum();
                assert!((s - 1.0).abs() < 1e-10, "sum {s}");
                assert!(r.probs.iter().all(|&p| p >= -1e-15));
            }
        }
    }

    #[test]
    fn zero_degree_reduces_to_the_kernel_at_empty_counts() {
        let k = DegreeVector(vec![0]);
        let tltm = tltm_kernel(1, 1).unwrap();
        let col = vec![0.2, 0.3, 0.5];
        let r = phi_varphi(&k, 0, &[&col], &tltm, PhiMode::Exact).unwrap();
        assert_eq!(r.probs, vec![0.0, 1.0, 0.0]);
        let brca = brca_kernel(true);
        let col2 = vec![0.4, 0.6];
        let r = phi_varphi(&k, 0, &[&col2], &brca, PhiMode::Exact).unwrap();
        assert!((r.probs[0] - 0.5).abs() < 1e-15);
        let erg = erg_kernel(1.0, 2.0).unwrap();
        let r = phi_varphi(&k, 0, &[&col], &erg, PhiMode::Exact).unwrap();
        assert!(r.probs.iter().all(|&p| (p - 1.0 / 3.0).abs() < 1e-15));
    }

    #[test]
    fn degenerate_neighbor_law_reduces_to_a_single_count_vector() {
        // all neighbors surely in state 1: a TLTM node with k >= a_plus flips up
        let kernel = tltm_kernel(2, 2).unwrap();
        let col = vec![0.0, 0.0, 1.0];
        let r = phi_varphi(&DegreeVector(vec![3]), 0, &[&col], &kernel, PhiMode::Exact).unwrap();
        assert_eq!(r.probs, vec![0.0, 0.0, 1.0]);
        let r = phi_varphi(&DegreeVector(vec![1]), 0, &[&col], &kernel, PhiMode::Exact).unwrap();
        assert_eq!(r.probs, vec![0.0, 1.0, 0.0]);
    }

    #[test]
    fn phi_matches_brute_force_enumeration_over_neighbor_tuples() {
        // 3 i.i.d. ternary neighbors: sum the kernel over all 27 ordered tuples
        let kernel = tltm_kernel(2, 1).unwrap();
        let col = [0.5, 0.2, 0.3];
        let mut expect = [0.0f64; 3];
        for s0 in 0..3 {
            for s1 in 0..3 {
                for s2 in 0..3 {
                    let w = col[s0] * col[s1] * col[s2];
                    let mut xi = crate::dynamics::NeighborCounts::zeros(1, 3);
                    for s in [s0, s1, s2] {
                        xi.add(0, s, 1);
                    }
                    let p = kernel.evaluate(0, &xi).unwrap();
                    for x in 0..3 {
                        expect[x] += w * p[x];
                    }
                }
            }
        }
        let r = phi_varphi(&DegreeVector(vec![3]), 0, &[&col[..]], &kernel, PhiMode::Exact)
            .unwrap();
        for x in 0..3 {
            assert!((r.probs[x] - expect[x]).abs() < 1e-12);
        }
    }

    #[test]
    fn mixture_is_the_convex_combination_of_its_components() {
        let mut rng = rng::stream(9, &[0x778]);
        for kernel in kernels() {
            let nx = kernel.num_states();
            let col = random_simplex(&mut rng, nx);
            let cells = vec![
                (DegreeVector(vec![2]), 0.3),
                (DegreeVector(vec![5]), 0.7),
            ];
            let mixed = phi_mixture(&cells, 0, &[&col], &kernel, PhiMode::Exact).unwrap();
            let a = phi_varphi(&cells[0].0, 0, &[&col], &kernel, PhiMode::Exact).unwrap();
            let b = phi_varphi(&cells[1].0, 0, &[&col], &kernel, PhiMode::Exact).unwrap();
            for x in 0..nx {
                let expect = 0.3 * a.probs[x] + 0.7 * b.probs[x];
                assert!((mixed[x] - expect).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn monte_carlo_agrees_with_exact_within_sampling_error() {
        let kernel = tltm_kernel(2, 2).unwrap();
        let mut rng = rng::stream(3, &[0x779]);
        let col = random_simplex(&mut rng, 3);
        let k = DegreeVector(vec![10]);
        let exact = phi_varphi(&k, 0, &[&col], &kernel, PhiMode::Exact).unwrap();
        let samples = 1_000_000;
        let mc = phi_varphi(
            &k,
            0,
            &[&col],
            &kernel,
            PhiMode::MonteCarlo { samples, seed: 12 },
        )
        .unwrap();
        assert_eq!(mc.mode, PhiModeUsed::MonteCarlo);
        for x in 0..3 {
            let p = exact.probs[x];
            let se = (p * (1.0 - p) / samples as f64).sqrt().max(1e-9);
            assert!(
                (mc.probs[x] - p).abs() < 4.0 * se,
                "state {x}: mc {} vs exact {p}",
                mc.probs[x]
            );
        }
    }

    #[test]
    fn auto_mode_switches_on_the_enumeration_budget() {
        let kernel = tltm_kernel(1, 1).unwrap();
        let col = vec![0.3, 0.4, 0.3];
        let small = phi_varphi(
            &DegreeVector(vec![4]),
            0,
            &[&col],
            &kernel,
            PhiMode::Auto { samples: 10, seed: 1 },
        )
        .unwrap();
        assert_eq!(small.mode, PhiModeUsed::Exact);
        let big = phi_varphi(
            &DegreeVector(vec![5000]),
            0,
            &[&col],
            &kernel,
            PhiMode::Auto { samples: 1000, seed: 1 },
        )
        .unwrap();
        assert_eq!(big.mode, PhiModeUsed::MonteCarlo);
        assert!(matches!(
            phi_varphi(&DegreeVector(vec![5000]), 0, &[&col], &kernel, PhiMode::Exact),
            Err(MeanFieldError::BudgetExceeded { .. })
        ));
    }

    #[test]
    fn two_class_phi_sees_each_class_through_its_own_column() {
        // neighbors of class 0 surely +1, class 1 surely -1; with equal
        // degrees the signed sum cancels
        let kernel = tltm_kernel(1, 1).unwrap();
        let up = vec![0.0, 0.0, 1.0];
        let down = vec![1.0, 0.0, 0.0];
        let r = phi_varphi(
            &DegreeVector(vec![2, 2]),
            0,
            &[&up, &down],
            &kernel,
            PhiMode::Exact,
        )
        .unwrap();
        assert_eq!(r.probs, vec![0.0, 1.0, 0.0]);
        // one extra up neighbor tips it
        let r = phi_varphi(
            &DegreeVector(vec![3, 2]),
            0,
            &[&up, &down],
            &kernel,
            PhiMode::Exact,
        )
        .unwrap();
        assert_eq!(r.probs, vec![0.0, 0.0, 1.0]);
    }

    #[test]
    fn threshold_response_is_monotone_in_both_arguments() {
        for (k, r) in [(10u64, 2u64), (10, 3)] {
            let grid: Vec<f64> = (0..=40).map(|i| i as f64 / 40.0).collect();
            for (i, &x) in grid.iter().enumerate() {
                for &z in grid.iter().take(41 - i) {
                    let base = tltm_phi_plus(k, r, x, z);
                    // increasing x (at the expense of the neutral mass)
                    if x + 0.025 + z <= 1.0 + 1e-12 {
                        assert!(tltm_phi_plus(k, r, x + 0.025, z) >= base - 1e-12);
                    }
                    // moving mass from -1 to 0 cannot lower the up-response
                    if z >= 0.025 {
                        assert!(tltm_phi_plus(k, r, x, z - 0.025) >= base - 1e-12);
                    }
                }
            }
        }
    }
}
