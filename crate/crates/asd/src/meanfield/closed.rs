//! Closed forms for regular graphs: the threshold-model transition
//! probability, the binary coordination fractions and their critical mixing
//! parameter, and the cyclic-game state probabilities.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive};

fn binom(n: u64, k: u64) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut acc = 1u128;
    let mut pending = Vec::new();
    for i in 0..k {
        match acc.checked_mul((n - i) as u128) {
            Some(v) => acc = v / (i + 1) as u128,
            None => {
                pending.push(acc as f64);
                acc = (n - i) as u128 / (i + 1) as u128;
            }
        }
    }
    pending.into_iter().product::<f64>() * acc as f64
}

fn big_binom(n: u64, k: u64) -> BigInt {
    let mut acc = BigInt::one();
    for i in 0..k.min(n - k) {
        acc = acc * BigInt::from(n - i) / BigInt::from(i + 1);
    }
    acc
}

/// Probability that a degree-k node with threshold r moves to state +1 when
/// each neighbor is independently +1 with probability x and -1 with
/// probability z: P(#(+1) - #(-1) >= r).
pub fn tltm_phi_plus(k: u64, r: u64, x: f64, z: f64) -> f64 {
    if r > k {
        // the difference can never reach the threshold
        return 0.0;
    }
    assert!(
        (0.0..=1.0).contains(&x) && (0.0..=1.0).contains(&z) && x + z <= 1.0 + 1e-12,
        "(x, z) must be sub-probabilities"
    );
    let w = (1.0 - x - z).max(0.0);
    let mut total = 0.0;
    for u in r..=k {
        // v = number of -1 neighbors; u - v >= r
        let vmax = (k - u).min(u - r);
        for v in 0..=vmax {
            total += binom(k, u) * binom(k - u, v) * x.powi(u as i32) * z.powi(v as i32)
                * w.powi((k - u - v) as i32);
        }
    }
    total.min(1.0)
}

/// Probability that a degree-k majority update lands in state 1 when each
/// neighbor is independently in state 1 with probability zeta1. Even-degree
/// ties contribute with weight 1/2.
pub fn brca_phi1(k: u64, zeta1: f64) -> f64 {
    assert!((0.0..=1.0).contains(&zeta1));
    let mut total = 0.0;
    for j in 0..=k {
        let weight = if 2 * j > k {
            1.0
        } else if 2 * j == k {
            0.5
        } else {
            continue;
        };
        total += weight * binom(k, j) * zeta1.powi(j as i32) * (1.0 - zeta1).powi((k - j) as i32);
    }
    total
}

/// Right-hand side of the one-dimensional coordination/anti-coordination
/// mixture ODE at mixing fraction alpha of coordinating nodes:
/// dy1/dt = alpha phi1 + (1 - alpha)(1 - phi1) - y1.
pub fn brca_ode_rhs(k: u64, alpha: f64, y1: f64) -> f64 {
    let phi = brca_phi1(k, y1);
    alpha * phi + (1.0 - alpha) * (1.0 - phi) - y1
}

/// Critical mixing fraction above which y1 = 1/2 loses stability:
/// alpha_th = 1/2 (1 + 2^{k-1} / (k C(k-1, floor(k/2)))), evaluated in exact
/// rational arithmetic.
pub fn brca_alpha_th(k: u64) -> f64 {
    assert!(k >= 1);
    let num = BigInt::from(2u32).pow((k - 1) as u32);
    let den = BigInt::from(k) * big_binom(k - 1, k / 2);
    let ratio = BigRational::new(num, den);
    let half = BigRational::new(BigInt::one(), BigInt::from(2));
    (&half * (BigRational::one() + ratio))
        .to_f64()
        .expect("rational fits in f64")
}

/// State probabilities (pi_R, pi_P, pi_S) after one best-response update of a
/// degree-k node in the cyclic three-action game at payoff ratio c = 2b, when
/// neighbors are i.i.d. with law zeta = (zeta_R, zeta_P, zeta_S). R is chosen
/// iff 3 xi_S > k and 3 xi_P < k, with ties sharing mass 1/2 (one boundary)
/// or 1/3 (both); the other two components follow by cyclic rotation.
pub fn erg_pi(k: u64, zeta: &[f64; 3]) -> [f64; 3] {
    let sum: f64 = zeta.iter().sum();
    assert!(
        zeta.iter().all(|&v| (-1e-12..=1.0 + 1e-12).contains(&v)) && (sum - 1.0).abs() < 1e-9,
        "zeta must be a distribution"
    );
    let pi_r = |z: &[f64; 3]| -> f64 {
        let mut total = 0.0;
        for r in 0..=k {
            for p in 0..=(k - r) {
                let s = k - r - p;
                let win = 3 * s > k;
                let win_tie = 3 * s == k;
                let lose_ok = 3 * p < k;
                let lose_tie = 3 * p == k;
                let weight = match (win, win_tie, lose_ok, lose_tie) {
                    (true, _, true, _) => 1.0,
                    (true, _, _, true) | (_, true, true, _) => 0.5,
                    (_, true, _, true) => 1.0 / 3.0,
                    _ => continue,
                };
                let w = binom(k, r) * binom(k - r, p)
                    * z[0].powi(r as i32)
                    * z[1].powi(p as i32)
                    * z[2].powi(s as i32);
                total += weight * w;
            }
        }
        total
    };
    [
        pi_r(zeta),
        pi_r(&[zeta[1], zeta[2], zeta[0]]),
        pi_r(&[zeta[2], zeta[0], zeta[1]]),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{brca_kernel, erg_kernel, tltm_kernel};
    use crate::graph::DegreeVector;
    use crate::meanfield::{phi_varphi, PhiMode};

    #[test]
    fn tltm_boundary_values() {
        for k in 1..=10u64 {
            for r in 0..=k {
                assert!((tltm_phi_plus(k, r, 1.0, 0.0) - 1.0).abs() < 1e-12);
                if r >= 1 {
                    assert!(tltm_phi_plus(k, r, 0.0, 0.3).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn tltm_matches_general_phi() {
        let kernel = tltm_kernel(2, 2).unwrap();
        let (x, z) = (0.5, 0.2);
        // state order (-1, 0, 1): col = (z, 1-x-z, x)
        let col = [z, 1.0 - x - z, x];
        for k in [1u64, 3, 7, 10] {
            let dv = DegreeVector(vec![k as u32]);
            let r = phi_varphi(&dv, 0, &[&col[..]], &kernel, PhiMode::Exact).unwrap();
            let expect = tltm_phi_plus(k, 2, x, z);
            assert!((r.probs[2] - expect).abs() < 1e-12, "k={k}: {} vs {expect}", r.probs[2]);
        }
    }

    #[test]
    fn brca_phi_matches_general_phi() {
        let kernel = brca_kernel(true);
        for k in [1u64, 2, 4, 5, 21] {
            for &zeta in &[0.0, 0.2, 0.5, 0.9, 1.0] {
                // state order (-1, 1)
                let col = [1.0 - zeta, zeta];
                let dv = DegreeVector(vec![k as u32]);
                let r = phi_varphi(&dv, 0, &[&col[..]], &kernel, PhiMode::Exact).unwrap();
                assert!((r.probs[1] - brca_phi1(k, zeta)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn brca_symmetry_fixes_half() {
        for k in [3u64, 10, 21] {
            assert!((brca_phi1(k, 0.5) - 0.5).abs() < 1e-12);
            for alpha in [0.3, 0.6, 0.7, 0.9] {
                assert!(brca_ode_rhs(k, alpha, 0.5).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn alpha_th_small_degrees() {
        // k=3: 1/2 (1 + 4 / (3 C(2,1))) = 1/2 (1 + 2/3) = 5/6
        assert!((brca_alpha_th(3) - 5.0 / 6.0).abs() < 1e-15);
        // k=21: 1/2 (1 + 2^20 / (21 C(20,10)))
        let ratio = 1048576.0 / (21.0 * 184756.0);
        assert!((brca_alpha_th(21) - 0.5 * (1.0 + ratio)).abs() < 1e-15);
    }

    #[test]
    fn erg_pi_matches_kernel_at_payoff_ratio_two() {
        let kernel = erg_kernel(1.0, 2.0).unwrap();
        let zetas = [
            [1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0],
            [0.6, 0.3, 0.1],
            [0.0, 0.5, 0.5],
            [1.0, 0.0, 0.0],
        ];
        for k in [1u64, 2, 6, 9] {
            for z in &zetas {
                let dv = DegreeVector(vec![k as u32]);
                let r = phi_varphi(&dv, 0, &[&z[..]], &kernel, PhiMode::Exact).unwrap();
                let pi = erg_pi(k, z);
                for x in 0..3 {
                    assert!(
                        (r.probs[x] - pi[x]).abs() < 1e-12,
                        "k={k} z={z:?} state {x}: {} vs {}",
                        r.probs[x],
                        pi[x]
                    );
                }
            }
        }
    }

    #[test]
    fn erg_pi_sums_to_one() {
        for k in [1u64, 5, 17, 50] {
            let pi = erg_pi(k, &[0.2, 0.5, 0.3]);
            assert!((pi.iter().sum::<f64>() - 1.0).abs() < 1e-10);
        }
    }
}
