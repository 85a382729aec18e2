//! Price of best response: how much a learner pays, against the trap, to get
//! within `l1` distance `gamma` of the uniform best-response mix.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::choicemap::solve_choice_map;
use crate::dynamics::{simulate, OptimizerSchedule};
use crate::error::{Error, Result};
use crate::game::{gap_profile, solve_minimax, ZeroSumGame, DEFAULT_BR_TOL};
use crate::kernels::Kernel;
use crate::numeric::{log_space, NeumaierSum};
use crate::trap::{build_trap, DEFAULT_SUPP_TOL};

pub const DEFAULT_ETA_POINTS: usize = 20;
pub const DEFAULT_T_POINTS: usize = 40;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostCurvePoint {
    pub gamma: f64,
    pub eta: f64,
    pub t: usize,
    /// `||y(t) - unif(br)||_1` at the minimizing grid point.
    pub epsilon: f64,
    pub exploitation: f64,
    pub theorem_lower: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostCurve {
    pub points: Vec<CostCurvePoint>,
    /// Surplus constant `(v'_i - v'_j)^2 / (2 M)` with `M` the largest curvature
    /// met by the two trap coordinates on the simulated paths.
    pub surplus_constant: f64,
    pub delta_min: f64,
    pub k: usize,
    pub m: usize,
    /// Requested accuracies that no grid point reached.
    pub unreached: Vec<f64>,
}

/// `(C / (2 delta_min)) [theta'((1 - gamma/2)/k) - theta'(gamma / (2(m - k)))]`.
pub fn cost_lower_bound(kernel: &Kernel, gamma: f64, k: usize, m: usize, delta_min: f64, c: f64) -> Result<f64> {
    if k == 0 || k >= m {
        return Err(Error::Domain(format!("need 1 <= k < m, got k={k}, m={m}")));
    }
    let sub = (m - k) as f64;
    if !(gamma > 0.0 && gamma < 2.0 * sub) {
        return Err(Error::Domain(format!("accuracy gamma must lie in (0, {}), got {gamma}", 2.0 * sub)));
    }
    let clamp = |u: f64| u.clamp(f64::MIN_POSITIVE, 1.0);
    let hi = kernel.theta_prime_unchecked(clamp((1.0 - gamma / 2.0) / k as f64));
    let lo = kernel.theta_prime_unchecked(clamp(gamma / (2.0 * sub)));
    Ok(c / (2.0 * delta_min) * (hi - lo))
}

/// Log-spaced integer horizons in `[1, t_max]`, deduplicated.
pub fn default_t_grid(t_max: usize, points: usize) -> Vec<usize> {
    let mut grid: Vec<usize> = log_space(1.0, t_max.max(1) as f64, points)
        .into_iter()
        .map(|t| t.round() as usize)
        .collect();
    grid.dedup();
    grid
}

pub fn cost_curve(
    g: &ZeroSumGame,
    kernel: &Kernel,
    gammas: &[f64],
    eta_grid: &[f64],
    t_max: usize,
) -> Result<CostCurve> {
    cost_curve_on_grid(g, kernel, gammas, eta_grid, &default_t_grid(t_max, DEFAULT_T_POINTS))
}

/// For each `gamma`, the cheapest grid point `(eta, t)` whose learner is
/// `gamma`-accurate, under the alternating trap schedule.
pub fn cost_curve_on_grid(
    g: &ZeroSumGame,
    kernel: &Kernel,
    gammas: &[f64],
    eta_grid: &[f64],
    t_grid: &[usize],
) -> Result<CostCurve> {
    if gammas.is_empty() || eta_grid.is_empty() || t_grid.is_empty() {
        return Err(Error::Domain("cost curve needs non-empty gamma, eta and t grids".into()));
    }
    let sol = solve_minimax(g)?;
    let trap = build_trap(g, &sol, DEFAULT_BR_TOL, DEFAULT_SUPP_TOL)?;
    let profile = gap_profile(g, &sol.x_star, DEFAULT_BR_TOL)?;
    let (m, k) = (g.m(), profile.k);
    let Some(delta_min) = profile.delta_min else {
        return Err(Error::Degenerate("every learner action is a best response; no accuracy to buy".into()));
    };
    let t_max = *t_grid.iter().max().unwrap();
    let horizon = t_max + t_max % 2;
    let target: Vec<f64> = (0..m).map(|j| if profile.is_best_response(j) { 1.0 / k as f64 } else { 0.0 }).collect();
    let l1 = |y: &[f64]| y.iter().zip(&target).map(|(a, b)| (a - b).abs()).sum::<f64>();
    let dot_v = |y: &[f64]| trap.v.iter().zip(y).map(|(a, b)| a * b).sum::<f64>();

    // (eta, t, epsilon, exploitation) for every grid point.
    let mut samples = Vec::with_capacity(eta_grid.len() * t_grid.len());
    let mut max_curv: f64 = 0.0;
    let sched = OptimizerSchedule::Alternating {
        x_prime: trap.x_prime.clone(),
        x_double: trap.x_double.clone(),
        last: trap.x_star.clone(),
    };
    for &eta in eta_grid {
        let traj = simulate(g, kernel, eta, &sched, horizon)?;
        for y in &traj.strategies {
            for p in [trap.i, trap.j] {
                if y[p] > 0.0 {
                    max_curv = max_curv.max(kernel.theta_second_unchecked(y[p]));
                }
            }
        }
        let mut prefix = Vec::with_capacity(horizon + 1);
        let mut acc = NeumaierSum::new();
        prefix.push(0.0);
        for r in &traj.rewards {
            acc.add(r - sol.value);
            prefix.push(acc.value());
        }
        for &t in t_grid {
            let exploitation = if t % 2 == 0 {
                prefix[t]
            } else {
                // Odd horizon: the last round plays x*.
                prefix[t - 1] + dot_v(&traj.strategies[t - 1]) - sol.value
            };
            let z: Vec<f64> = trap.v.iter().map(|v| -eta * t as f64 * v).collect();
            let epsilon = l1(&solve_choice_map(kernel, &z)?.y);
            samples.push((eta, t, epsilon, exploitation));
        }
    }
    let gap = trap.gap_v_prime();
    let surplus_constant = gap * gap / (2.0 * max_curv.max(f64::MIN_POSITIVE));

    let mut points = Vec::new();
    let mut unreached = Vec::new();
    for &gamma in gammas {
        let theorem_lower = cost_lower_bound(kernel, gamma, k, m, delta_min, surplus_constant)?;
        let best = samples
            .iter()
            .filter(|s| s.2 <= gamma)
            .min_by(|a, b| a.3.total_cmp(&b.3));
        match best {
            Some(&(eta, t, epsilon, exploitation)) => {
                points.push(CostCurvePoint { gamma, eta, t, epsilon, exploitation, theorem_lower })
            }
            None => unreached.push(gamma),
        }
    }
    Ok(CostCurve { points, surplus_constant, delta_min, k, m, unreached })
}

pub const PBR_CSV_HEADER: &str = "gamma,eta,t,epsilon,exploitation,theorem_lower";

pub fn write_pbr_csv<W: Write>(points: &[CostCurvePoint], mut out: W) -> Result<()> {
    writeln!(out, "{PBR_CSV_HEADER}")?;
    for p in points {
        writeln!(out, "{},{},{},{},{},{}", p.gamma, p.eta, p.t, p.epsilon, p.exploitation, p.theorem_lower)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn formula_examples() {
        let c = 0.3;
        let d = 0.5;
        let e = cost_lower_bound(&Kernel::entropic(), 0.1, 1, 3, d, c).unwrap();
        assert!((e - c / (2.0 * d) * (0.95f64.ln() + 40f64.ln())).abs() < 1e-12);
        let u = cost_lower_bound(&Kernel::euclidean(), 0.1, 1, 3, d, c).unwrap();
        assert!((u - c / (2.0 * d) * (0.95 - 0.025)).abs() < 1e-12);
        assert!(cost_lower_bound(&Kernel::entropic(), 4.0, 1, 3, d, c).is_err());
        assert!(cost_lower_bound(&Kernel::entropic(), 0.0, 1, 3, d, c).is_err());
        // Euclidean saturates at 1/k; entropic grows without bound.
        for gamma in [1e-2, 1e-6, 1e-12] {
            let u = cost_lower_bound(&Kernel::euclidean(), gamma, 1, 3, d, 1.0).unwrap();
            assert!(u <= 1.0 / (2.0 * d) + 1e-12);
        }
        let a = cost_lower_bound(&Kernel::entropic(), 1e-3, 1, 3, d, 1.0).unwrap();
        let b = cost_lower_bound(&Kernel::entropic(), 1e-4, 1, 3, d, 1.0).unwrap();
        assert!((b - a - 10f64.ln() / (2.0 * d)).abs() < 1e-3);
    }

    #[test]
    fn t_grid_is_sorted_unique() {
        let g = default_t_grid(1000, 40);
        assert_eq!(g[0], 1);
        assert_eq!(*g.last().unwrap(), 1000);
        assert!(g.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn requires_suboptimal_actions() {
        let mp = ZeroSumGame::matching_pennies();
        let r = cost_curve(&mp, &Kernel::entropic(), &[0.1], &[0.1], 100);
        assert!(matches!(r, Err(Error::Degenerate(_))));
        let saddle = ZeroSumGame::new(vec![vec![0.3, 0.5], vec![-0.2, 0.9]]).unwrap();
        assert!(matches!(cost_curve(&saddle, &Kernel::entropic(), &[0.1], &[0.1], 100), Err(Error::EventFailure { .. })));
    }
}
