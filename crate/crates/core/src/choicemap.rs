//! The FTRL choice map `Q_h(z) = argmax_{y in simplex} <z, y> - h(y)`.
//!
//! For a separable `h` the maximizer decouples as `y_i = phi(lambda + z_i)`
//! where the scalar `lambda` is the unique root of
//! `g(lambda) = sum_i phi(lambda + z_i) = 1`. `g` is continuous and strictly
//! increasing at the root, so the root is bracketed and bisected.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{Kernel, KernelFamily};

pub const MAX_BISECTION_STEPS: usize = 200;
/// Target for `|g(lambda) - 1|` before the secant polish.
const BISECTION_TOL: f64 = 1e-13;
/// Residual accepted after polishing.
pub const RESIDUAL_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChoiceResult {
    pub y: Vec<f64>,
    /// KKT normalization scalar, so that `y_i = phi(lambda + z_i)`.
    pub lambda: f64,
    pub residual: f64,
}

/// Solve the choice map for a finite score vector.
pub fn solve_choice_map(kernel: &Kernel, z: &[f64]) -> Result<ChoiceResult> {
    let m = z.len();
    if m == 0 {
        return Err(Error::Domain("choice map needs at least one coordinate".into()));
    }
    if let Some(bad) = z.iter().find(|v| !v.is_finite()) {
        return Err(Error::Domain(format!("choice map scores must be finite, got {bad}")));
    }
    if m == 1 {
        return Ok(ChoiceResult { y: vec![1.0], lambda: 1.0 - z[0], residual: 0.0 });
    }

    let z_max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let shifted: Vec<f64> = z.iter().map(|v| v - z_max).collect();

    // Entropic weights are strictly positive, so with m >= 2 no coordinate
    // reaches the upper clip and the KKT system is solved by the softmax.
    if let KernelFamily::Entropic = kernel.family() {
        let w: Vec<f64> = shifted.iter().map(|v| v.exp()).collect();
        let total: f64 = w.iter().sum();
        let y: Vec<f64> = w.iter().map(|v| v / total).collect();
        // y_i = exp(lambda' + s_i - 1)  =>  lambda' = 1 - ln(total)
        let lambda_shifted = 1.0 - total.ln();
        let residual = (y.iter().sum::<f64>() - 1.0).abs();
        return Ok(ChoiceResult { y, lambda: lambda_shifted - z_max, residual });
    }

    let (lambda_shifted, residual) = bisect_lambda(kernel, &shifted)?;
    let mut y: Vec<f64> = shifted.iter().map(|&s| kernel.phi(lambda_shifted + s)).collect();
    let total: f64 = y.iter().sum();
    for v in &mut y {
        *v /= total;
    }
    Ok(ChoiceResult { y, lambda: lambda_shifted - z_max, residual })
}

/// Generic bracketing solve of `sum_i phi(lambda + s_i) = 1` for scores with
/// `max_i s_i = 0`. Returns `(lambda, residual)`.
pub(crate) fn bisect_lambda(kernel: &Kernel, shifted: &[f64]) -> Result<(f64, f64)> {
    let m = shifted.len();
    let g = |lambda: f64| shifted.iter().map(|&s| kernel.phi(lambda + s)).sum::<f64>();
    let s_min = shifted.iter().copied().fold(f64::INFINITY, f64::min);

    // At lo every term is <= phi(theta'(1/m)) = 1/m; at hi every term is >= 1/m.
    let anchor = kernel.theta_prime_unchecked(1.0 / m as f64);
    let mut lo = anchor;
    let mut hi = anchor - s_min;
    let mut g_lo = g(lo);
    let mut g_hi = g(hi);

    // Expand geometrically if rounding left the bracket short.
    let mut width = (hi - lo).max(1.0);
    let mut expansions = 0;
    while g_lo > 1.0 && expansions < 64 {
        lo -= width;
        width *= 2.0;
        g_lo = g(lo);
        expansions += 1;
    }
    while g_hi < 1.0 && expansions < 128 {
        hi += width;
        width *= 2.0;
        g_hi = g(hi);
        expansions += 1;
    }

    let mut best = if (g_lo - 1.0).abs() < (g_hi - 1.0).abs() { (lo, g_lo) } else { (hi, g_hi) };
    let mut steps = 0;
    while steps < MAX_BISECTION_STEPS && (best.1 - 1.0).abs() > BISECTION_TOL {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let g_mid = g(mid);
        if (g_mid - 1.0).abs() < (best.1 - 1.0).abs() {
            best = (mid, g_mid);
        }
        if g_mid < 1.0 {
            lo = mid;
            g_lo = g_mid;
        } else {
            hi = mid;
            g_hi = g_mid;
        }
        steps += 1;
    }

    // One monotone secant step inside the final bracket.
    if g_hi > g_lo {
        let cand = lo + (1.0 - g_lo) * (hi - lo) / (g_hi - g_lo);
        if cand > lo && cand < hi {
            let g_cand = g(cand);
            if (g_cand - 1.0).abs() < (best.1 - 1.0).abs() {
                best = (cand, g_cand);
            }
        }
    }

    let residual = (best.1 - 1.0).abs();
    if residual > RESIDUAL_TOL {
        return Err(Error::NonConvergence { residual, iterations: steps });
    }
    Ok((best.0, residual))
}

/// Conjugate of `h` restricted to the simplex:
/// `h*(z) = <z, Q_h(z)> - h(Q_h(z)) = sum_i theta*(lambda + z_i) - lambda`.
///
/// The second form is stationary in `lambda`, so root-finding error enters
/// only at second order.
pub fn conj_on_simplex(kernel: &Kernel, z: &[f64]) -> Result<f64> {
    let sol = solve_choice_map(kernel, z)?;
    Ok(conj_from_solution(kernel, z, &sol))
}

pub(crate) fn conj_from_solution(kernel: &Kernel, z: &[f64], sol: &ChoiceResult) -> f64 {
    let z_max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lambda_shifted = sol.lambda + z_max;
    if let KernelFamily::Entropic = kernel.family() {
        if z.len() > 1 {
            // log-sum-exp
            let total: f64 = z.iter().map(|v| (v - z_max).exp()).sum();
            return z_max + total.ln();
        }
    }
    let sum: f64 = z.iter().map(|&v| kernel.theta_conj(lambda_shifted + (v - z_max))).sum();
    sum - lambda_shifted + z_max
}

/// Bregman divergence of `h*`: `h*(z1) - h*(z2) - <Q_h(z2), z1 - z2>`.
pub fn bregman_conj(kernel: &Kernel, z1: &[f64], z2: &[f64]) -> Result<f64> {
    if z1.len() != z2.len() {
        return Err(Error::Domain(format!(
            "bregman arguments differ in length: {} vs {}",
            z1.len(),
            z2.len()
        )));
    }
    let s1 = solve_choice_map(kernel, z1)?;
    let s2 = solve_choice_map(kernel, z2)?;
    Ok(bregman_from_solutions(kernel, z1, &s1, z2, &s2))
}

pub(crate) fn bregman_from_solutions(
    kernel: &Kernel,
    z1: &[f64],
    s1: &ChoiceResult,
    z2: &[f64],
    s2: &ChoiceResult,
) -> f64 {
    // Shift both points by the same constant; the divergence is invariant.
    let c = z2.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let a: Vec<f64> = z1.iter().map(|v| v - c).collect();
    let b: Vec<f64> = z2.iter().map(|v| v - c).collect();
    let sa = ChoiceResult { y: s1.y.clone(), lambda: s1.lambda + c, residual: s1.residual };
    let sb = ChoiceResult { y: s2.y.clone(), lambda: s2.lambda + c, residual: s2.residual };
    let ha = conj_from_solution(kernel, &a, &sa);
    let hb = conj_from_solution(kernel, &b, &sb);
    let lin: f64 = sb.y.iter().zip(a.iter().zip(&b)).map(|(y, (p, q))| y * (p - q)).sum();
    ha - hb - lin
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn kernels() -> Vec<Kernel> {
        vec![
            Kernel::entropic(),
            Kernel::euclidean(),
            Kernel::tsallis(0.5).unwrap(),
            Kernel::tsallis(1.5).unwrap(),
        ]
    }

    /// Direct maximization of `<z,y> - h(y)` over a fine grid of the 2-simplex.
    fn brute_force_choice_2(kernel: &Kernel, z: &[f64; 2]) -> (f64, f64) {
        let mut best = (f64::NEG_INFINITY, 0.0);
        let n = 200_000;
        for i in 0..=n {
            let y0 = i as f64 / n as f64;
            let y = [y0, 1.0 - y0];
            let val = z[0] * y[0] + z[1] * y[1] - kernel.h(&y);
            if val > best.0 {
                best = (val, y0);
            }
        }
        best
    }

    #[test]
    fn entropic_uniform_scores() {
        let r = solve_choice_map(&Kernel::entropic(), &[0.0, 0.0, 0.0]).unwrap();
        for v in &r.y {
            assert!((v - 1.0 / 3.0).abs() < 1e-15);
        }
        assert!((r.lambda - (1.0 - 3f64.ln())).abs() < 1e-14);
    }

    #[test]
    fn euclidean_examples() {
        let k = Kernel::euclidean();
        let r = solve_choice_map(&k, &[0.5, 0.5, 0.0]).unwrap();
        assert!((r.y[0] - 0.5).abs() < 1e-12 && (r.y[1] - 0.5).abs() < 1e-12);
        assert!(r.y[2].abs() < 1e-12);
        assert!(r.lambda.abs() < 1e-12);

        let r = solve_choice_map(&k, &[2.0, 0.0, 0.0]).unwrap();
        assert!((r.y[0] - 1.0).abs() < 1e-12);
        assert_eq!(r.y[1], 0.0);
        // phi(lambda + 2) = 1 and phi(lambda) = 0 hold on lambda in [-1, 0];
        // any root in that interval is a valid multiplier.
        assert!(r.lambda >= -1.0 - 1e-12 && r.lambda <= 0.0 + 1e-12);
        assert!(r.residual <= RESIDUAL_TOL);
    }

    #[test]
    fn single_coordinate() {
        let r = solve_choice_map(&Kernel::euclidean(), &[3.0]).unwrap();
        assert_eq!(r.y, vec![1.0]);
        assert_eq!(r.lambda, -2.0);
        assert_eq!(r.residual, 0.0);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(solve_choice_map(&Kernel::entropic(), &[]).is_err());
        assert!(solve_choice_map(&Kernel::entropic(), &[0.0, f64::NAN]).is_err());
    }

    #[test]
    fn entropic_fast_path_matches_bisection() {
        let k = Kernel::entropic();
        for z in [[0.3, -1.2, 0.7, 2.0], [-40.0, 0.0, -3.0, -0.5], [5.0, 5.0, 5.0, -5.0]] {
            let fast = solve_choice_map(&k, &z).unwrap();
            let zmax = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let s: Vec<f64> = z.iter().map(|v| v - zmax).collect();
            let (lam, _) = bisect_lambda(&k, &s).unwrap();
            assert!((fast.lambda - (lam - zmax)).abs() < 1e-10);
            for (i, &si) in s.iter().enumerate() {
                assert!((fast.y[i] - k.phi(lam + si)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn matches_brute_force_on_two_simplex() {
        for k in kernels() {
            for z in [[0.4, -0.3], [2.5, 0.1], [-0.2, -0.2], [0.05, 0.9]] {
                let r = solve_choice_map(&k, &z).unwrap();
                let (_, y0) = brute_force_choice_2(&k, &z);
                assert!((r.y[0] - y0).abs() < 2e-5, "{k} z={z:?}: {} vs {y0}", r.y[0]);
            }
        }
    }

    #[test]
    fn conj_examples() {
        for m in [2usize, 3, 7] {
            let v = conj_on_simplex(&Kernel::entropic(), &vec![0.0; m]).unwrap();
            assert!((v - (m as f64).ln()).abs() < 1e-13);
        }
        let v = conj_on_simplex(&Kernel::euclidean(), &[0.0, 0.0]).unwrap();
        assert!((v + 0.25).abs() < 1e-13);
        for k in kernels() {
            let z = [0.3, -0.4, 1.1];
            let c = 2.75;
            let shifted: Vec<f64> = z.iter().map(|v| v + c).collect();
            let a = conj_on_simplex(&k, &z).unwrap();
            let b = conj_on_simplex(&k, &shifted).unwrap();
            assert!((b - a - c).abs() < 1e-12, "{k}");
        }
    }

    #[test]
    fn conj_matches_definition() {
        for k in kernels() {
            let z = [0.2, -1.3, 0.6, 0.0];
            let r = solve_choice_map(&k, &z).unwrap();
            let def: f64 = z.iter().zip(&r.y).map(|(a, b)| a * b).sum::<f64>() - k.h(&r.y);
            let v = conj_on_simplex(&k, &z).unwrap();
            assert!((v - def).abs() < 1e-11, "{k}: {v} vs {def}");
        }
    }

    #[test]
    fn bregman_examples() {
        for k in kernels() {
            let z = [0.1, -0.2, 0.3];
            assert!(bregman_conj(&k, &z, &z).unwrap().abs() < 1e-14);
        }
        let d = bregman_conj(&Kernel::entropic(), &[1.0, 0.0], &[0.0, 0.0]).unwrap();
        let expected = (1f64.exp() + 1.0).ln() - 2f64.ln() - 0.5;
        assert!((d - expected).abs() < 1e-14);

        // Euclidean, both projections interior: Q(z) = z + (1 - sum z)/2 * 1.
        let k = Kernel::euclidean();
        let z1 = [0.1, 0.0];
        let z2 = [0.0, 0.0];
        let d = bregman_conj(&k, &z1, &z2).unwrap();
        // h*(z) = <z, y> - |y|^2 / 2 with y = (1/2 + (z0 - z1)/2, 1/2 - (z0 - z1)/2).
        let h = |z: [f64; 2]| {
            let d = (z[0] - z[1]) / 2.0;
            let y = [0.5 + d, 0.5 - d];
            z[0] * y[0] + z[1] * y[1] - 0.5 * (y[0] * y[0] + y[1] * y[1])
        };
        let expected = h(z1) - h(z2) - 0.5 * (z1[0] - z2[0]) - 0.5 * (z1[1] - z2[1]);
        assert!((d - expected).abs() < 1e-14);
        assert!((d - 0.0025).abs() < 1e-14);
        assert!(d <= 0.01 / 2.0);
    }

    proptest! {
        #[test]
        fn solution_invariants(z in prop::collection::vec(-20.0f64..20.0, 1..8)) {
            for k in kernels() {
                let r = solve_choice_map(&k, &z).unwrap();
                prop_assert!(r.residual <= RESIDUAL_TOL);
                prop_assert!((r.y.iter().sum::<f64>() - 1.0).abs() <= 1e-10);
                for (yi, zi) in r.y.iter().zip(&z) {
                    prop_assert!((0.0..=1.0).contains(yi));
                    prop_assert!((yi - k.phi(r.lambda + zi)).abs() <= 1e-10);
                }
            }
        }

        #[test]
        fn gradient_of_conj_is_choice(z in prop::collection::vec(-3.0f64..3.0, 2..6)) {
            let eps = 1e-6;
            for k in kernels() {
                let r = solve_choice_map(&k, &z).unwrap();
                // Skip points near a clip boundary where Q is not smooth.
                let near_kink = z.iter().any(|&zi| {
                    let arg = r.lambda + zi;
                    (!k.is_steep() && (arg - k.boundary_slope()).abs() < 1e-4) || (arg - 1.0).abs() < 1e-4
                });
                if near_kink {
                    continue;
                }
                for i in 0..z.len() {
                    let mut zp = z.clone();
                    let mut zm = z.clone();
                    zp[i] += eps;
                    zm[i] -= eps;
                    let fd = (conj_on_simplex(&k, &zp).unwrap() - conj_on_simplex(&k, &zm).unwrap()) / (2.0 * eps);
                    prop_assert!((fd - r.y[i]).abs() <= 1e-5, "{} i={} fd={} y={}", k, i, fd, r.y[i]);
                }
            }
        }

        #[test]
        fn bregman_nonnegative_and_bounded(
            z1 in prop::collection::vec(-5.0f64..5.0, 4),
            z2 in prop::collection::vec(-5.0f64..5.0, 4),
        ) {
            for k in kernels() {
                let d = bregman_conj(&k, &z1, &z2).unwrap();
                let diff: Vec<f64> = z1.iter().zip(&z2).map(|(a, b)| a - b).collect();
                let g = k.geometry();
                let bound = g.norm_profile.dual_norm(&diff).powi(2) / (2.0 * g.strong_convexity_alpha);
                prop_assert!(d >= -1e-12, "{} d={}", k, d);
                prop_assert!(d <= bound + 1e-12, "{} d={} bound={}", k, d, bound);
            }
        }

        #[test]
        fn choice_map_is_lipschitz(
            z1 in prop::collection::vec(-5.0f64..5.0, 5),
            z2 in prop::collection::vec(-5.0f64..5.0, 5),
        ) {
            for k in kernels() {
                let g = k.geometry();
                let y1 = solve_choice_map(&k, &z1).unwrap().y;
                let y2 = solve_choice_map(&k, &z2).unwrap().y;
                let dy: Vec<f64> = y1.iter().zip(&y2).map(|(a, b)| a - b).collect();
                let dz: Vec<f64> = z1.iter().zip(&z2).map(|(a, b)| a - b).collect();
                let lhs = g.norm_profile.primal_norm(&dy);
                let rhs = g.norm_profile.dual_norm(&dz) / g.strong_convexity_alpha;
                prop_assert!(lhs <= rhs + 1e-10, "{} {} > {}", k, lhs, rhs);
            }
        }

        #[test]
        fn shift_invariance(z in prop::collection::vec(-10.0f64..10.0, 2..6), c in -50.0f64..50.0) {
            for k in kernels() {
                let a = solve_choice_map(&k, &z).unwrap().y;
                let zc: Vec<f64> = z.iter().map(|v| v + c).collect();
                let b = solve_choice_map(&k, &zc).unwrap().y;
                for (p, q) in a.iter().zip(&b) {
                    prop_assert!((p - q).abs() <= 1e-10);
                }
            }
        }
    }
}
