//! Monte Carlo moment estimation for depth-truncated branching processes,
//! compared to the geometric-growth envelope mu_s * mu_1^{s(h-1)}.

use crate::rng;
use rand::distributions::{Distribution, WeightedIndex};

const SUB_GW: u64 = 0x69;

#[derive(Debug, Clone)]
pub struct GwMomentProbe {
    /// Monte Carlo estimate of E[N_h^s] for the total node count N_h up to
    /// depth h.
    pub mean: f64,
    /// Normal-approximation 95% confidence half-width of the estimate.
    pub ci_half_width: f64,
    /// mu_s * mu_1^{s(h-1)} with moments of the non-root offspring law.
    pub envelope: f64,
    pub ratio: f64,
    pub trials: usize,
}

fn moment(law: &[(u64, f64)], j: f64) -> f64 {
    law.iter().map(|&(k, p)| (k as f64).powf(j) * p).sum()
}

/// Estimate E[N_h^s] of the branching process whose root offspring follows
/// `root_law` and every other node's follows `offspring_law`, truncated at
/// depth h.
pub fn gw_moment_probe(
    root_law: &[(u64, f64)],
    offspring_law: &[(u64, f64)],
    h: u32,
    s: u32,
    trials: usize,
    seed: u64,
) -> GwMomentProbe {
    assert!((1..=3).contains(&s), "moment order must be 1..=3");
    assert!(h <= 12, "depth capped to keep tree sizes tractable");
    let mut rng = rng::stream(seed, &[SUB_GW]);
    let draw = |law: &[(u64, f64)]| {
        let (vals, weights): (Vec<u64>, Vec<f64>) = law.iter().copied().unzip();
        (vals, WeightedIndex::new(&weights).expect("valid law"))
    };
    let (root_vals, root_idx) = draw(root_law);
    let (off_vals, off_idx) = draw(offspring_law);

    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for _ in 0..trials {
        let mut width = root_vals[root_idx.sample(&mut rng)];
        let mut total = 1 + width;
        for _ in 1..h {
            let mut next = 0u64;
            for _ in 0..width {
                next += off_vals[off_idx.sample(&mut rng)];
            }
            width = next;
            total += width;
            if width == 0 {
                break;
            }
        }
        let v = (total as f64).powi(s as i32);
        sum += v;
        sum_sq += v * v;
    }
    let mean = sum / trials as f64;
    let var = (sum_sq / trials as f64 - mean * mean).max(0.0);
    let ci_half_width = 1.96 * (var / trials as f64).sqrt();
    let mu1 = moment(offspring_law, 1.0);
    let envelope = moment(offspring_law, s as f64) * mu1.powf(s as f64 * (h as f64 - 1.0));
    GwMomentProbe {
        mean,
        ci_half_width,
        envelope,
        ratio: mean / envelope,
        trials,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_offspring_matches_geometric_series() {
        // offspring identically m: N_h = (m^{h+1} - 1) / (m - 1)
        let law = vec![(2u64, 1.0)];
        for h in 1..=6u32 {
            let probe = gw_moment_probe(&law, &law, h, 1, 200, h as u64);
            let exact = ((2u64.pow(h + 1) - 1) as f64) / 1.0;
            assert!((probe.mean - exact).abs() < 1e-9, "h={h}");
            assert_eq!(probe.ci_half_width, 0.0);
        }
    }

    #[test]
    fn zero_offspring_keeps_the_root_alone() {
        let law = vec![(0u64, 1.0)];
        let probe = gw_moment_probe(&law, &law, 8, 2, 100, 1);
        assert_eq!(probe.mean, 1.0);
    }

    #[test]
    fn poisson_offspring_second_moment_ratio_stays_bounded() {
        // Poisson(2) truncated at 20
        let lambda = 2.0f64;
        let mut law = Vec::new();
        let mut p = (-lambda).exp();
        for k in 0..=20u64 {
            law.push((k, p));
            p *= lambda / (k + 1) as f64;
        }
        let norm: f64 = law.iter().map(|&(_, p)| p).sum();
        for e in &mut law {
            e.1 /= norm;
        }
        let mut ratios = Vec::new();
        for h in 2..=6u32 {
            let probe = gw_moment_probe(&law, &law, h, 2, 100_000, 40 + h as u64);
            ratios.push(probe.ratio);
        }
        let max = ratios.iter().cloned().fold(0.0f64, f64::max);
        let min = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(max < 20.0 && min > 0.01, "ratios {ratios:?}");
        // the ratio saturates toward a constant instead of growing
        // geometrically: consecutive increments shrink
        let last_step = ratios[ratios.len() - 1] - ratios[ratios.len() - 2];
        let first_step = ratios[1] - ratios[0];
        assert!(last_step < first_step, "ratios {ratios:?}");
        assert!(ratios[ratios.len() - 1] / ratios[ratios.len() - 2] < 1.15, "ratios {ratios:?}");
    }
}
