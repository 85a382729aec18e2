//! Discrete-time FTRL trajectories and the reward decomposition
//! `R_disc = R_cont + DG`.
//!
//! The learner's cumulative score is `S(t+1) = S(t) - A^T x(t)` and it plays
//! `y(t) = Q_h(eta S(t))`. The potential `Phi_eta(Z) = h*(eta Z) / eta` turns the
//! continuous-time reward into a difference of two potentials, so no ODE is
//! ever integrated.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::choicemap::{bregman_from_solutions, conj_from_solution, conj_on_simplex, solve_choice_map};
use crate::error::{Error, Result};
use crate::frank_wolfe::fw_optimize;
use crate::game::{solve_minimax, GameSolution, GapProfile, ZeroSumGame};
use crate::kernels::Kernel;
use crate::numeric::{check_simplex, compensated_sum, NeumaierSum};

const SIMPLEX_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum OptimizerSchedule {
    Fixed(Vec<f64>),
    /// The LP max-min strategy of the game being simulated.
    MaxMin,
    /// `x_prime` on even rounds, `x_double` on odd rounds, and `last` on the
    /// final round when the horizon is odd.
    Alternating { x_prime: Vec<f64>, x_double: Vec<f64>, last: Vec<f64> },
    FrankWolfeFixed(Vec<f64>),
    Explicit(Vec<Vec<f64>>),
}

/// A schedule checked against a concrete game and horizon.
#[derive(Debug, Clone)]
pub struct ResolvedSchedule {
    kind: OptimizerSchedule,
    horizon: usize,
}

impl OptimizerSchedule {
    pub fn resolve(&self, g: &ZeroSumGame, horizon: usize) -> Result<ResolvedSchedule> {
        let n = g.n();
        let kind = match self {
            OptimizerSchedule::MaxMin => OptimizerSchedule::Fixed(solve_minimax(g)?.x_star),
            OptimizerSchedule::Fixed(x) | OptimizerSchedule::FrankWolfeFixed(x) => {
                check_simplex(x, n, SIMPLEX_TOL, "fixed strategy")?;
                self.clone()
            }
            OptimizerSchedule::Alternating { x_prime, x_double, last } => {
                check_simplex(x_prime, n, SIMPLEX_TOL, "x'")?;
                check_simplex(x_double, n, SIMPLEX_TOL, "x''")?;
                check_simplex(last, n, SIMPLEX_TOL, "final strategy")?;
                self.clone()
            }
            OptimizerSchedule::Explicit(list) => {
                if list.len() < horizon {
                    return Err(Error::Schedule(format!(
                        "explicit schedule has {} rounds but the horizon is {horizon}",
                        list.len()
                    )));
                }
                for (t, x) in list.iter().enumerate().take(horizon) {
                    check_simplex(x, n, SIMPLEX_TOL, &format!("x({t})"))?;
                }
                self.clone()
            }
        };
        Ok(ResolvedSchedule { kind, horizon })
    }
}

impl ResolvedSchedule {
    pub fn at(&self, t: usize) -> &[f64] {
        match &self.kind {
            OptimizerSchedule::Fixed(x) | OptimizerSchedule::FrankWolfeFixed(x) => x,
            OptimizerSchedule::Alternating { x_prime, x_double, last } => {
                if self.horizon % 2 == 1 && t + 1 == self.horizon {
                    last
                } else if t % 2 == 0 {
                    x_prime
                } else {
                    x_double
                }
            }
            OptimizerSchedule::Explicit(list) => &list[t],
            OptimizerSchedule::MaxMin => unreachable!("resolved to Fixed"),
        }
    }

    /// The fixed strategy, when the schedule is stationary.
    pub fn fixed(&self) -> Option<&[f64]> {
        match &self.kind {
            OptimizerSchedule::Fixed(x) | OptimizerSchedule::FrankWolfeFixed(x) => Some(x),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub eta: f64,
    pub horizon: usize,
    /// `S(0..=T)`.
    pub scores: Vec<Vec<f64>>,
    /// `y(0..T)`.
    pub strategies: Vec<Vec<f64>>,
    /// `x(0..T)`.
    pub plays: Vec<Vec<f64>>,
    pub rewards: Vec<f64>,
    pub bregman_increments: Vec<f64>,
    /// `Phi_eta(S(t))` for `t = 0..=T`.
    pub potentials: Vec<f64>,
}

/// Runs `T` rounds of FTRL against `sched`.
pub fn simulate(
    g: &ZeroSumGame,
    kernel: &Kernel,
    eta: f64,
    sched: &OptimizerSchedule,
    horizon: usize,
) -> Result<Trajectory> {
    if !(eta > 0.0 && eta.is_finite()) {
        return Err(Error::Domain(format!("step size must be positive, got {eta}")));
    }
    if horizon == 0 {
        return Err(Error::Domain("horizon must be at least 1".into()));
    }
    let sched = sched.resolve(g, horizon)?;
    let m = g.m();

    let mut acc = vec![NeumaierSum::new(); m];
    let mut score = vec![0.0; m];
    let mut scores = Vec::with_capacity(horizon + 1);
    let mut strategies = Vec::with_capacity(horizon);
    let mut plays = Vec::with_capacity(horizon);
    let mut rewards = Vec::with_capacity(horizon);
    let mut increments = Vec::with_capacity(horizon);
    let mut potentials = Vec::with_capacity(horizon + 1);

    let mut z: Vec<f64> = score.iter().map(|s| eta * s).collect();
    let mut sol = solve_choice_map(kernel, &z)?;
    potentials.push(conj_from_solution(kernel, &z, &sol) / eta);
    scores.push(score.clone());

    for t in 0..horizon {
        let x = sched.at(t).to_vec();
        let loss = g.at_x(&x);
        let reward: f64 = loss.iter().zip(&sol.y).map(|(a, b)| a * b).sum();
        for ((a, s), l) in acc.iter_mut().zip(score.iter_mut()).zip(&loss) {
            a.add(-l);
            *s = a.value();
        }
        let z_next: Vec<f64> = score.iter().map(|s| eta * s).collect();
        let sol_next = solve_choice_map(kernel, &z_next)?;
        let d = bregman_from_solutions(kernel, &z_next, &sol_next, &z, &sol) / eta;
        potentials.push(conj_from_solution(kernel, &z_next, &sol_next) / eta);

        strategies.push(std::mem::take(&mut sol.y));
        plays.push(x);
        rewards.push(reward);
        increments.push(d);
        scores.push(score.clone());
        z = z_next;
        sol = sol_next;
    }

    Ok(Trajectory {
        eta,
        horizon,
        scores,
        strategies,
        plays,
        rewards,
        bregman_increments: increments,
        potentials,
    })
}

/// `Phi_eta(Z) = h*(eta Z) / eta`.
pub fn potential(kernel: &Kernel, eta: f64, z: &[f64]) -> Result<f64> {
    if !(eta > 0.0) {
        return Err(Error::Domain(format!("step size must be positive, got {eta}")));
    }
    let scaled: Vec<f64> = z.iter().map(|v| eta * v).collect();
    Ok(conj_on_simplex(kernel, &scaled)? / eta)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExploitationReport {
    pub total_reward: f64,
    pub continuous_reward: f64,
    pub discretization_gap: f64,
    pub value_term: f64,
    pub exploitation_discrete: f64,
    pub exploitation_continuous: f64,
    /// `R_disc - R_cont - DG`; zero up to rounding.
    pub identity_residual: f64,
    /// Present for fixed-strategy runs.
    pub vag: Option<f64>,
    pub lag_discrete: Option<f64>,
    pub lag_continuous: Option<f64>,
}

pub fn reward_report(
    traj: &Trajectory,
    sol: &GameSolution,
    profile: Option<&GapProfile>,
) -> ExploitationReport {
    let total_reward = compensated_sum(traj.rewards.iter().copied());
    let continuous_reward = traj.potentials[0] - traj.potentials[traj.horizon];
    let discretization_gap = compensated_sum(traj.bregman_increments.iter().copied());
    let value_term = traj.horizon as f64 * sol.value;
    let exploitation_discrete = total_reward - value_term;
    let exploitation_continuous = continuous_reward - value_term;
    let vag = profile.map(|p| traj.horizon as f64 * (p.v_star - sol.value));
    ExploitationReport {
        total_reward,
        continuous_reward,
        discretization_gap,
        value_term,
        exploitation_discrete,
        exploitation_continuous,
        identity_residual: total_reward - continuous_reward - discretization_gap,
        vag,
        lag_discrete: vag.map(|v| exploitation_discrete - v),
        lag_continuous: vag.map(|v| exploitation_continuous - v),
    }
}

/// Continuous-time learner-approximation gap of a fixed `x_hat` up to time `T`:
/// `int_0^T sum_i delta_i y_i(t) dt`.
///
/// Evaluated as `(h*(0) - h*(-eta T delta)) / eta`, which equals
/// `Phi_eta(0) - Phi_eta(-T A^T x_hat) - T u*` after shifting out the
/// best-response level, without the cancellation of the unshifted form.
pub fn continuous_lag(
    g: &ZeroSumGame,
    kernel: &Kernel,
    eta: f64,
    x_hat: &[f64],
    horizon: f64,
) -> Result<f64> {
    check_simplex(x_hat, g.n(), 1e-9, "x_hat")?;
    let profile = GapProfile::from_values(g.at_x(x_hat), 0.0);
    continuous_lag_from_gaps(kernel, eta, &profile.gaps, horizon)
}

pub fn continuous_lag_from_gaps(kernel: &Kernel, eta: f64, gaps: &[f64], horizon: f64) -> Result<f64> {
    if !(eta > 0.0) || !(horizon >= 0.0) {
        return Err(Error::Domain(format!("need eta > 0 and T >= 0, got eta={eta}, T={horizon}")));
    }
    if gaps.iter().all(|&d| d == 0.0) || horizon == 0.0 {
        return Ok(0.0);
    }
    let zero = vec![0.0; gaps.len()];
    let z: Vec<f64> = gaps.iter().map(|d| -eta * horizon * d).collect();
    let lag = (conj_on_simplex(kernel, &zero)? - conj_on_simplex(kernel, &z)?) / eta;
    Ok(lag.max(0.0))
}

/// `(T V*, estimate of the optimal continuous reward, T V* + (h_max - h_min)/eta)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardSandwich {
    pub lower: f64,
    pub value: f64,
    pub upper: f64,
}

impl RewardSandwich {
    pub fn holds(&self, tol: f64) -> bool {
        self.lower - tol <= self.value && self.value <= self.upper + tol
    }
}

pub const SANDWICH_FW_ITERS: usize = 2000;

/// Continuous reward `Phi(0) - Phi(-T A^T x)` of a fixed strategy.
pub fn continuous_reward_fixed(
    g: &ZeroSumGame,
    kernel: &Kernel,
    eta: f64,
    x: &[f64],
    horizon: f64,
) -> Result<f64> {
    let v = g.at_x(x);
    let v_star = v.iter().copied().fold(f64::INFINITY, f64::min);
    let gaps: Vec<f64> = v.iter().map(|vi| vi - v_star).collect();
    Ok(horizon * v_star + continuous_lag_from_gaps(kernel, eta, &gaps, horizon)?)
}

/// Brackets the optimal continuous-time reward. The estimate is the better of
/// the Frank–Wolfe strategy and the max-min strategy, so it is itself a
/// feasible reward and never drops below `T V*`.
pub fn reward_sandwich_check(
    g: &ZeroSumGame,
    kernel: &Kernel,
    eta: f64,
    horizon: f64,
) -> Result<RewardSandwich> {
    let sol = solve_minimax(g)?;
    let m = g.m();
    let lower = horizon * sol.value;
    let upper = lower + (kernel.h_max(m) - kernel.h_min(m)) / eta;
    let fw = fw_optimize(g, kernel, eta, horizon, &vec![0.0; m], SANDWICH_FW_ITERS)?;
    let r_fw = continuous_reward_fixed(g, kernel, eta, &fw.x_hat, horizon)?;
    let r_star = continuous_reward_fixed(g, kernel, eta, &sol.x_star, horizon)?;
    let out = RewardSandwich { lower, value: r_fw.max(r_star), upper };
    if !out.holds(1e-6) {
        return Err(Error::Degenerate(format!(
            "reward estimate {} outside [{}, {}]",
            out.value, out.lower, out.upper
        )));
    }
    Ok(out)
}

/// Upper bound `(eta / 2 alpha) sum_t ||A^T x(t)||_*^2` on the discretization gap.
pub fn dg_upper_bound(g: &ZeroSumGame, kernel: &Kernel, traj: &Trajectory) -> f64 {
    let geo = kernel.geometry();
    let s: f64 = traj
        .plays
        .iter()
        .map(|x| geo.norm_profile.dual_norm(&g.at_x(x)).powi(2))
        .sum();
    traj.eta / (2.0 * geo.strong_convexity_alpha) * s
}

#[derive(Serialize)]
struct LogRecord<'a> {
    t: usize,
    y: &'a [f64],
    reward: f64,
    bregman_increment: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    score: Option<&'a [f64]>,
}

/// Writes one JSON record per round.
pub fn write_trajectory_log<W: Write>(traj: &Trajectory, log_scores: bool, mut out: W) -> Result<()> {
    for t in 0..traj.horizon {
        let rec = LogRecord {
            t,
            y: &traj.strategies[t],
            reward: traj.rewards[t],
            bregman_increment: traj.bregman_increments[t],
            score: log_scores.then(|| traj.scores[t].as_slice()),
        };
        serde_json::to_writer(&mut out, &rec)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}
