//! Conditional-gradient synthesis of a fixed optimizer strategy maximizing the
//! continuous-time reward `Phi_eta(S0) - G(x)` with `G(x) = Phi_eta(S0 - T A^T x)`.

use serde::{Deserialize, Serialize};

use crate::choicemap::{conj_from_solution, solve_choice_map};
use crate::error::{Error, Result};
use crate::game::ZeroSumGame;
use crate::kernels::{Kernel, NormProfile};
use crate::numeric::uniform;

const POWER_MAX_STEPS: usize = 10_000;
const POWER_TOL: f64 = 1e-12;

/// `max_x ||A^T x||_* / ||x||` in the given pairing.
pub fn operator_norm(g: &ZeroSumGame, profile: NormProfile) -> Result<f64> {
    match profile {
        // The max over the l1 ball is attained at a vertex +-e_i.
        NormProfile::L1withLinfDual => Ok((0..g.n())
            .flat_map(|i| g.row(i).iter().map(|v| v.abs()).collect::<Vec<_>>())
            .fold(0.0, f64::max)),
        NormProfile::L2selfDual => spectral_norm(g),
    }
}

/// Largest singular value by power iteration on `A A^T`.
fn spectral_norm(g: &ZeroSumGame) -> Result<f64> {
    let n = g.n();
    // Deterministic start with no symmetry that could be orthogonal to the top vector.
    let mut x: Vec<f64> = (0..n).map(|i| 1.0 + 0.1 * (i as f64 + 1.0).sqrt()).collect();
    let norm = |v: &[f64]| v.iter().map(|a| a * a).sum::<f64>().sqrt();
    let nx = norm(&x);
    x.iter_mut().for_each(|v| *v /= nx);
    let mut sigma_sq = 0.0;
    for _ in 0..POWER_MAX_STEPS {
        let w = g.a_y(&g.at_x(&x));
        let nw = norm(&w);
        if nw == 0.0 {
            return Ok(0.0);
        }
        let next: Vec<f64> = w.iter().map(|v| v / nw).collect();
        let delta = (nw - sigma_sq).abs();
        sigma_sq = nw;
        x = next;
        if delta <= POWER_TOL * nw {
            return Ok(sigma_sq.sqrt());
        }
    }
    Err(Error::PowerIteration(POWER_MAX_STEPS))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FWResult {
    pub x_hat: Vec<f64>,
    pub iterations: usize,
    /// `2 R^2 beta / (iterations + 1)` with `beta = (eta T ||A||)^2 / alpha`,
    /// the smoothness of `x -> h*(eta (S0 - T A^T x))`.
    pub certified_gap_bound: f64,
    /// The same certificate in reward units (divided by `eta`), bounding
    /// `G(x_hat) - min G`.
    pub reward_gap_bound: f64,
    pub beta: f64,
    pub reward_estimate: f64,
    /// `G(x_s)` for `s = 0..=iterations`.
    pub objective_trace: Vec<f64>,
    /// Frank–Wolfe duality gap `<grad G(x_s), x_s - v_s>` per iteration.
    pub fw_gaps: Vec<f64>,
}

/// Objective and gradient of `G` at `x`.
pub fn fw_objective(
    g: &ZeroSumGame,
    kernel: &Kernel,
    eta: f64,
    horizon: f64,
    s0: &[f64],
    x: &[f64],
) -> Result<(f64, Vec<f64>)> {
    let v = g.at_x(x);
    let z: Vec<f64> = s0.iter().zip(&v).map(|(s, vj)| eta * (s - horizon * vj)).collect();
    let sol = solve_choice_map(kernel, &z)?;
    let value = conj_from_solution(kernel, &z, &sol) / eta;
    let grad: Vec<f64> = g.a_y(&sol.y).iter().map(|u| -horizon * u).collect();
    Ok((value, grad))
}

pub fn fw_optimize(
    g: &ZeroSumGame,
    kernel: &Kernel,
    eta: f64,
    horizon: f64,
    s0: &[f64],
    iters: usize,
) -> Result<FWResult> {
    if iters == 0 {
        return Err(Error::Domain("Frank-Wolfe needs at least one iteration".into()));
    }
    if !(eta > 0.0 && horizon > 0.0) {
        return Err(Error::Domain(format!("need eta, T > 0, got eta={eta}, T={horizon}")));
    }
    if s0.len() != g.m() {
        return Err(Error::Domain(format!("initial score has length {}, expected {}", s0.len(), g.m())));
    }
    let n = g.n();
    let mut x = uniform(n);
    let mut trace = Vec::with_capacity(iters + 1);
    let mut gaps = Vec::with_capacity(iters);
    let (mut val, mut grad) = fw_objective(g, kernel, eta, horizon, s0, &x)?;
    trace.push(val);
    for s in 0..iters {
        // Lowest-index minimizer of the gradient.
        let mut vtx = 0;
        for i in 1..n {
            if grad[i] < grad[vtx] {
                vtx = i;
            }
        }
        let gap: f64 = grad.iter().zip(&x).map(|(g, xi)| g * xi).sum::<f64>() - grad[vtx];
        gaps.push(gap);
        let step = 2.0 / (s as f64 + 2.0);
        for (i, xi) in x.iter_mut().enumerate() {
            *xi *= 1.0 - step;
            if i == vtx {
                *xi += step;
            }
        }
        (val, grad) = fw_objective(g, kernel, eta, horizon, s0, &x)?;
        trace.push(val);
    }
    let geo = kernel.geometry();
    let op = operator_norm(g, geo.norm_profile)?;
    let beta = (eta * horizon * op).powi(2) / geo.strong_convexity_alpha;
    let r = geo.norm_profile.simplex_diameter();
    let certified = 2.0 * r * r * beta / (iters as f64 + 1.0);
    let start = {
        let z: Vec<f64> = s0.iter().map(|s| eta * s).collect();
        conj_from_solution(kernel, &z, &solve_choice_map(kernel, &z)?) / eta
    };
    Ok(FWResult {
        x_hat: x,
        iterations: iters,
        certified_gap_bound: certified,
        reward_gap_bound: certified / eta,
        beta,
        reward_estimate: start - val,
        objective_trace: trace,
        fw_gaps: gaps,
    })
}

/// `ceil(2 R^2 eta T^2 ||A||^2 / (alpha eps))`.
pub fn fw_iteration_budget(g: &ZeroSumGame, kernel: &Kernel, eta: f64, horizon: f64, eps: f64) -> Result<usize> {
    if !(eps > 0.0) {
        return Err(Error::Domain(format!("accuracy must be positive, got {eps}")));
    }
    let geo = kernel.geometry();
    let op = operator_norm(g, geo.norm_profile)?;
    let r = geo.norm_profile.simplex_diameter();
    let raw = 2.0 * r * r * eta * horizon * horizon * op * op / (geo.strong_convexity_alpha * eps);
    // Guard against representation noise pushing an exact integer up by one.
    Ok((raw * (1.0 - 1e-12)).ceil().max(1.0) as usize)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::random_game;

    #[test]
    fn operator_norm_examples() {
        let mp = ZeroSumGame::matching_pennies();
        assert!((operator_norm(&mp, NormProfile::L2selfDual).unwrap() - 2.0).abs() < 1e-8);
        let id = ZeroSumGame::new(vec![vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        assert!((operator_norm(&id, NormProfile::L2selfDual).unwrap() - 1.0).abs() < 1e-8);
        let g = random_game(4, 5, 3).unwrap();
        let mx = (0..4).flat_map(|i| g.row(i).to_vec()).fold(0.0f64, |a, v| a.max(v.abs()));
        assert_eq!(operator_norm(&g, NormProfile::L1withLinfDual).unwrap(), mx);
    }

    #[test]
    fn spectral_norm_matches_brute_force() {
        // sup over unit vectors on a fine circle for 2-row games.
        for seed in 0..5 {
            let g = random_game(2, 3, seed).unwrap();
            let mut best = 0.0f64;
            for i in 0..200_000 {
                let a = i as f64 / 200_000.0 * std::f64::consts::PI;
                let v = g.at_x(&[a.cos(), a.sin()]);
                best = best.max(v.iter().map(|x| x * x).sum::<f64>().sqrt());
            }
            let s = operator_norm(&g, NormProfile::L2selfDual).unwrap();
            assert!((s - best).abs() < 1e-8, "{s} vs {best}");
        }
    }

    #[test]
    fn budget_examples() {
        let mp = ZeroSumGame::matching_pennies();
        let k = Kernel::entropic();
        assert_eq!(fw_iteration_budget(&mp, &k, 0.1, 100.0, 0.1).unwrap(), 80_000);
        let b1 = fw_iteration_budget(&mp, &k, 0.1, 10.0, 0.01).unwrap();
        let b2 = fw_iteration_budget(&mp, &k, 0.1, 20.0, 0.01).unwrap();
        assert_eq!(b2, 4 * b1);
        let b3 = fw_iteration_budget(&mp, &k, 0.1, 10.0, 0.02).unwrap();
        assert!((b3 as f64 - b1 as f64 / 2.0).abs() <= 1.0);
    }

    #[test]
    fn singleton_and_first_step() {
        let g = ZeroSumGame::new(vec![vec![0.0, 0.5, 1.0]]).unwrap();
        let r = fw_optimize(&g, &Kernel::entropic(), 0.1, 10.0, &[0.0; 3], 5).unwrap();
        assert_eq!(r.x_hat, vec![1.0]);

        let g = random_game(3, 3, 2).unwrap();
        let r = fw_optimize(&g, &Kernel::entropic(), 0.1, 10.0, &[0.0; 3], 1).unwrap();
        assert_eq!(r.x_hat.iter().filter(|v| **v == 1.0).count(), 1);
        assert!((r.certified_gap_bound - 4.0 * r.beta).abs() < 1e-12);
    }

    #[test]
    fn matching_pennies_converges_to_zero_reward() {
        let mp = ZeroSumGame::matching_pennies();
        let r = fw_optimize(&mp, &Kernel::entropic(), 0.1, 10.0, &[0.0; 2], 5000).unwrap();
        assert!(r.reward_estimate.abs() < 1e-3);
        assert!(r.reward_estimate <= 1e-12);
    }

    #[test]
    fn duality_gap_certificate() {
        for seed in 0..5 {
            let g = random_game(3, 4, seed).unwrap();
            for k in [Kernel::entropic(), Kernel::euclidean()] {
                let r = fw_optimize(&g, &k, 0.2, 5.0, &[0.0; 4], 400).unwrap();
                // A long run gives a proxy for min G.
                let best = fw_optimize(&g, &k, 0.2, 5.0, &[0.0; 4], 20_000).unwrap();
                let min_g = best.objective_trace.iter().copied().fold(f64::INFINITY, f64::min);
                for (s, gap) in r.fw_gaps.iter().enumerate() {
                    assert!(*gap >= r.objective_trace[s] - min_g - 1e-9);
                }
                assert!(r.objective_trace[400] - min_g <= r.reward_gap_bound);
            }
        }
    }
}
