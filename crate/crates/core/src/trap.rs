//! The alternating trap: an optimizer that averages to a max-min strategy
//! while flipping the learner between two best responses, extracting a surplus
//! linear in `eta T` from any FTRL learner.
//!
//! Each pair of rounds plays `x'` then `x''` with `(x' + x'')/2 = x*`. Along
//! the interpolation `y(r) = Q_h(-2 eta s v - r eta v')` the learner's exposure
//! to `v'` satisfies
//!
//! `d/dr <v', y(r)> = -eta W_r Var(Z_r)`,
//!
//! with weights `w_i = 1/theta''(y_i)`, so every pair gains at least
//! `eta (v'_i - v'_j)^2 / (2M)` once the best-response masses stay in
//! `[delta, 1 - delta]` where the curvature is at most `M`.

use serde::{Deserialize, Serialize};

use crate::choicemap::solve_choice_map;
use crate::dynamics::{reward_report, simulate, OptimizerSchedule, Trajectory};
use crate::error::{Error, Result};
use crate::game::{gap_profile, row_gap_min, GameSolution, ZeroSumGame};
use crate::kernels::Kernel;

pub const DEFAULT_SUPP_TOL: f64 = 1e-7;
/// Entries of one optimizer row closer than this do not distinguish actions.
const DISTINGUISH_TOL: f64 = 1e-12;
const TIE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrapConstruction {
    pub x_star: Vec<f64>,
    pub value: f64,
    pub br_set: Vec<usize>,
    pub i: usize,
    pub j: usize,
    pub ell: usize,
    pub x_prime: Vec<f64>,
    pub x_double: Vec<f64>,
    pub v_prime: Vec<f64>,
    pub v: Vec<f64>,
    pub event_a_holds: bool,
    pub event_gap_holds: bool,
    /// Smallest within-row separation, the witness for the gap event.
    pub row_gap_min: f64,
    pub gamma: f64,
}

impl TrapConstruction {
    /// `v'_i - v'_j > 0`.
    pub fn gap_v_prime(&self) -> f64 {
        self.v_prime[self.i] - self.v_prime[self.j]
    }

    pub fn schedule(&self) -> OptimizerSchedule {
        OptimizerSchedule::Alternating {
            x_prime: self.x_prime.clone(),
            x_double: self.x_double.clone(),
            last: self.x_star.clone(),
        }
    }
}

pub fn gamma(n: usize, m: usize) -> f64 {
    2.0 / ((n * n) as f64 * (m * m * m) as f64)
}

/// Builds `(x*, i, j, ell, x', x'')`.
///
/// `ell` is the heaviest support index of `x*` (lowest index on ties); the
/// pair `(i, j)` of best responses maximizes `|A_ell,i - A_ell,j|`, oriented so
/// that `A_ell,i > A_ell,j`. If the heaviest index does not separate any two
/// best responses, lighter support indices are tried in order.
pub fn build_trap(g: &ZeroSumGame, sol: &GameSolution, br_tol: f64, supp_tol: f64) -> Result<TrapConstruction> {
    let profile = gap_profile(g, &sol.x_star, br_tol)?;
    let br = profile.br_set.clone();
    let (n, m) = (g.n(), g.m());
    let gap_witness = if m >= 2 { row_gap_min(g)? } else { 0.0 };
    let gam = gamma(n, m);

    if br.len() < 2 {
        return Err(Error::EventFailure {
            event: "E_A",
            detail: format!("max-min strategy has a single best response (br = {br:?})"),
        });
    }
    let mut support: Vec<usize> = (0..n).filter(|&l| sol.x_star[l] > supp_tol).collect();
    // Weights equal up to LP rounding count as ties.
    let key = |l: usize| (sol.x_star[l] / TIE_TOL).round() as i64;
    support.sort_by(|&a, &b| key(b).cmp(&key(a)).then(a.cmp(&b)));

    let mut choice = None;
    'outer: for &ell in &support {
        let row = g.row(ell);
        let mut best: Option<(usize, usize, f64)> = None;
        for (a, &p) in br.iter().enumerate() {
            for &q in &br[a + 1..] {
                let d = (row[p] - row[q]).abs();
                if d > DISTINGUISH_TOL && best.map_or(true, |(_, _, bd)| d > bd) {
                    best = Some((p, q, d));
                }
            }
        }
        if let Some((p, q, _)) = best {
            let (i, j) = if row[p] > row[q] { (p, q) } else { (q, p) };
            choice = Some((ell, i, j));
            break 'outer;
        }
    }
    let Some((ell, i, j)) = choice else {
        return Err(Error::EventFailure {
            event: "E_A",
            detail: "no support row of the max-min strategy separates two best responses".into(),
        });
    };

    let w = sol.x_star[ell];
    let mut x_prime: Vec<f64> = sol.x_star.iter().map(|x| (1.0 - w) * x).collect();
    x_prime[ell] += w;
    let mut x_double: Vec<f64> = sol.x_star.iter().map(|x| (1.0 + w) * x).collect();
    x_double[ell] -= w;
    // x''_ell = x*_ell^2 >= 0 exactly; clear rounding residue.
    x_double[ell] = x_double[ell].max(0.0);

    Ok(TrapConstruction {
        x_star: sol.x_star.clone(),
        value: sol.value,
        br_set: br,
        i,
        j,
        ell,
        v_prime: g.at_x(&x_prime),
        v: profile.v,
        x_prime,
        x_double,
        event_a_holds: true,
        event_gap_holds: m >= 2 && gap_witness >= gam,
        row_gap_min: gap_witness,
        gamma: gam,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvatureBudget {
    pub delta: f64,
    /// `sup_{u in [delta, 1 - delta]} theta''(u)`.
    pub m_curv: f64,
    pub eta_cap: f64,
    /// Worst-case surplus constant `1 / (2 M (n m)^6)`.
    pub c_worst: f64,
}

pub fn curvature_budget(kernel: &Kernel, n: usize, m: usize, delta: f64) -> Result<CurvatureBudget> {
    let inv_m = 1.0 / m as f64;
    if !(delta > 0.0 && delta < inv_m) {
        return Err(Error::Domain(format!("interior margin delta must lie in (0, 1/m = {inv_m}), got {delta}")));
    }
    let geo = kernel.geometry();
    let m_curv = kernel.max_curvature(delta, 1.0 - delta)?;
    let radius = geo.norm_profile.dual_ball_radius(m);
    let eta_cap = geo.strong_convexity_alpha / (geo.norm_profile.c_norm() * radius) * (inv_m - delta);
    let nm = (n * m) as f64;
    Ok(CurvatureBudget { delta, m_curv, eta_cap, c_worst: 1.0 / (2.0 * m_curv * nm.powi(6)) })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrapRun {
    pub trajectory: Trajectory,
    /// `sum_t r(t) - T V*`.
    pub surplus: f64,
    /// Proven pathwise certificate `floor(T/2) eta (v'_i - v'_j)^2 / (2M)`.
    pub bound: f64,
    /// `eta (T - 1) (v'_i - v'_j)^2 / (2M)`, reported for comparison.
    pub bound_linear: f64,
    /// Certificate with the gap replaced by its event floor `gamma / n`.
    pub bound_worst_case: f64,
    /// Smallest per-pair drop `<v', y_2s> - <v', y_2s+1>`.
    pub min_pair_drop: f64,
}

/// Plays the trap for `T` rounds and certifies its surplus.
pub fn run_trap(
    g: &ZeroSumGame,
    kernel: &Kernel,
    trap: &TrapConstruction,
    eta: f64,
    horizon: usize,
    budget: &CurvatureBudget,
) -> Result<TrapRun> {
    if eta > budget.eta_cap {
        return Err(Error::StepSize { eta, cap: budget.eta_cap });
    }
    if horizon < 2 {
        return Err(Error::Domain("trap horizon must be at least 2".into()));
    }
    let traj = simulate(g, kernel, eta, &trap.schedule(), horizon)?;
    let sol = GameSolution { value: trap.value, x_star: trap.x_star.clone(), y_star: Vec::new() };
    let report = reward_report(&traj, &sol, None);
    let gap = trap.gap_v_prime();
    let per_pair = eta * gap * gap / (2.0 * budget.m_curv);
    let pairs = (horizon / 2) as f64;
    let dot = |y: &[f64]| trap.v_prime.iter().zip(y).map(|(a, b)| a * b).sum::<f64>();
    let min_pair_drop = (0..horizon / 2)
        .map(|s| dot(&traj.strategies[2 * s]) - dot(&traj.strategies[2 * s + 1]))
        .fold(f64::INFINITY, f64::min);
    Ok(TrapRun {
        surplus: report.exploitation_discrete,
        bound: pairs * per_pair,
        bound_linear: eta * (horizon as f64 - 1.0) * gap * gap / (2.0 * budget.m_curv),
        bound_worst_case: {
            let floor_gap = gamma(g.n(), g.m()) / g.n() as f64;
            pairs * eta * floor_gap * floor_gap / (2.0 * budget.m_curv)
        },
        min_pair_drop,
        trajectory: traj,
    })
}

/// Learner strategy on the interpolation path of pair `s` at `r in [0, 1]`.
pub fn interpolation_point(kernel: &Kernel, eta: f64, trap: &TrapConstruction, s: usize, r: f64) -> Result<Vec<f64>> {
    let z: Vec<f64> = trap
        .v
        .iter()
        .zip(&trap.v_prime)
        .map(|(v, vp)| -2.0 * eta * s as f64 * v - r * eta * vp)
        .collect();
    Ok(solve_choice_map(kernel, &z)?.y)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarianceCheck {
    pub max_abs_error: f64,
    /// Grid points skipped because the support changes within the stencil.
    pub skipped: usize,
    /// `min_r [W_r Var(Z_r) - (v'_i - v'_j)^2 / (theta''_i + theta''_j)]`.
    pub min_two_point_slack: f64,
    pub points: usize,
}

/// `(W, Var)` of `v'` under the curvature-weighted distribution of `y`.
pub fn weighted_variance(kernel: &Kernel, y: &[f64], v_prime: &[f64]) -> (f64, f64) {
    let w: Vec<f64> = y
        .iter()
        .map(|&u| if u > 0.0 { 1.0 / kernel.theta_second_unchecked(u) } else { 0.0 })
        .collect();
    let total: f64 = w.iter().sum();
    let mean: f64 = w.iter().zip(v_prime).map(|(a, b)| a * b).sum::<f64>() / total;
    let second: f64 = w.iter().zip(v_prime).map(|(a, b)| a * b * b).sum::<f64>() / total;
    (total, (second - mean * mean).max(0.0))
}

/// Compares a central difference of `<v', y(r)>` with `-eta W_r Var(Z_r)` at
/// `grid` interior points `r = p / (grid + 1)`.
pub fn variance_identity_check(
    kernel: &Kernel,
    eta: f64,
    trap: &TrapConstruction,
    s: usize,
    grid: usize,
) -> Result<VarianceCheck> {
    const H: f64 = 1e-6;
    let dot = |y: &[f64]| trap.v_prime.iter().zip(y).map(|(a, b)| a * b).sum::<f64>();
    let support = |y: &[f64]| y.iter().map(|v| *v > 0.0).collect::<Vec<_>>();
    let gap = trap.gap_v_prime();
    let mut out = VarianceCheck { max_abs_error: 0.0, skipped: 0, min_two_point_slack: f64::INFINITY, points: 0 };
    for p in 1..=grid {
        let r = p as f64 / (grid + 1) as f64;
        let y = interpolation_point(kernel, eta, trap, s, r)?;
        let yp = interpolation_point(kernel, eta, trap, s, r + H)?;
        let ym = interpolation_point(kernel, eta, trap, s, r - H)?;
        if support(&y) != support(&yp) || support(&y) != support(&ym) {
            out.skipped += 1;
            continue;
        }
        let fd = (dot(&yp) - dot(&ym)) / (2.0 * H);
        let (w, var) = weighted_variance(kernel, &y, &trap.v_prime);
        out.max_abs_error = out.max_abs_error.max((fd + eta * w * var).abs());
        let lb = gap * gap / (kernel.theta_second_unchecked(y[trap.i]) + kernel.theta_second_unchecked(y[trap.j]));
        out.min_two_point_slack = out.min_two_point_slack.min(w * var - lb);
        out.points += 1;
    }
    Ok(out)
}

/// True iff every best response keeps mass in `[delta, 1 - delta]` along the
/// interpolation path of pair `s` (upper side only checked when `|br| >= 2`).
pub fn path_mass_check(
    kernel: &Kernel,
    eta: f64,
    trap: &TrapConstruction,
    s: usize,
    delta: f64,
    grid: usize,
) -> Result<bool> {
    let grid = grid.max(2);
    for p in 0..grid {
        let r = p as f64 / (grid - 1) as f64;
        let y = interpolation_point(kernel, eta, trap, s, r)?;
        for &q in &trap.br_set {
            if y[q] < delta || (trap.br_set.len() >= 2 && y[q] > 1.0 - delta) {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// The record written by the `trap` command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrapReport {
    #[serde(rename = "event_A")]
    pub event_a: bool,
    pub event_gap: bool,
    pub gap_v_prime: f64,
    pub eta_cap: f64,
    #[serde(rename = "M")]
    pub m_curv: f64,
    pub surplus: f64,
    pub certified_bound: f64,
    #[serde(rename = "T")]
    pub horizon: usize,
    pub eta: f64,
}

impl TrapReport {
    pub fn new(trap: &TrapConstruction, budget: &CurvatureBudget, run: &TrapRun) -> Self {
        TrapReport {
            event_a: trap.event_a_holds,
            event_gap: trap.event_gap_holds,
            gap_v_prime: trap.gap_v_prime(),
            eta_cap: budget.eta_cap,
            m_curv: budget.m_curv,
            surplus: run.surplus,
            certified_bound: run.bound,
            horizon: run.trajectory.horizon,
            eta: run.trajectory.eta,
        }
    }
}
