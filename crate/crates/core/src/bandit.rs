//! Sampled play: both players draw pure actions from their mixed strategies
//! while the learner keeps its full-information FTRL update.

use std::io::Write;

use rand::distributions::{Distribution, WeightedIndex};
use serde::{Deserialize, Serialize};

use crate::dynamics::{simulate, OptimizerSchedule};
use crate::error::{Error, Result};
use crate::game::ZeroSumGame;
use crate::kernels::Kernel;
use crate::rng::rng_from_seed;

pub const DEFAULT_CONFIDENCE: f64 = 0.05;

/// Which comparator enters the realized regret.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LearnerFeedback {
    /// Benchmark against the expected loss vectors `A^T x(t)`.
    Full,
    /// Benchmark against the realized rows `A_{i_t, .}`.
    Realized,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BanditRun {
    pub seed: u64,
    pub horizon: usize,
    pub delta: f64,
    pub sampled_actions: Vec<(usize, usize)>,
    pub realized_payoffs: Vec<f64>,
    /// `x(t)^T A y(t)`.
    pub expected_payoffs: Vec<f64>,
    /// `sum_t x(t)^T A y(t) - min_j sum_t (A^T x(t))_j`.
    pub full_info_regret: f64,
    /// `sum_t A_{i_t j_t} - min_j sum_t c_j(t)` with the comparator of `feedback`.
    pub realized_regret: f64,
    pub feedback: LearnerFeedback,
}

#[allow(clippy::too_many_arguments)]
pub fn simulate_bandit(
    g: &ZeroSumGame,
    kernel: &Kernel,
    eta: f64,
    sched: &OptimizerSchedule,
    horizon: usize,
    seed: u64,
    delta: f64,
    feedback: LearnerFeedback,
) -> Result<BanditRun> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::Domain(format!("confidence delta must lie in (0, 1), got {delta}")));
    }
    let traj = simulate(g, kernel, eta, sched, horizon)?;
    let mut rng = rng_from_seed(seed);
    let m = g.m();
    let mut actions = Vec::with_capacity(horizon);
    let mut realized = Vec::with_capacity(horizon);
    let mut cum_expected = vec![0.0; m];
    let mut cum_realized = vec![0.0; m];
    for t in 0..horizon {
        let x = &traj.plays[t];
        let y = &traj.strategies[t];
        let i = WeightedIndex::new(x).map_err(|e| Error::Domain(e.to_string()))?.sample(&mut rng);
        let j = WeightedIndex::new(y).map_err(|e| Error::Domain(e.to_string()))?.sample(&mut rng);
        actions.push((i, j));
        realized.push(g.get(i, j));
        for (c, v) in cum_expected.iter_mut().zip(g.at_x(x)) {
            *c += v;
        }
        for (c, v) in cum_realized.iter_mut().zip(g.row(i)) {
            *c += v;
        }
    }
    let min = |v: &[f64]| v.iter().copied().fold(f64::INFINITY, f64::min);
    let expected_total: f64 = traj.rewards.iter().sum();
    let realized_total: f64 = realized.iter().sum();
    let comparator = match feedback {
        LearnerFeedback::Full => min(&cum_expected),
        LearnerFeedback::Realized => min(&cum_realized),
    };
    Ok(BanditRun {
        seed,
        horizon,
        delta,
        sampled_actions: actions,
        realized_payoffs: realized,
        expected_payoffs: traj.rewards,
        full_info_regret: expected_total - min(&cum_expected),
        realized_regret: realized_total - comparator,
        feedback,
    })
}

/// `2 sqrt(2T ln(2/delta)) + 2 sqrt(2T ln(2m/delta))`.
pub fn azuma_margin(horizon: usize, m: usize, delta: f64) -> f64 {
    let t = horizon as f64;
    2.0 * (2.0 * t * (2.0 / delta).ln()).sqrt() + 2.0 * (2.0 * t * (2.0 * m as f64 / delta).ln()).sqrt()
}

impl BanditRun {
    pub fn margin(&self, m: usize) -> f64 {
        azuma_margin(self.horizon, m, self.delta)
    }

    /// True when `|realized - full-information regret|` exceeds the margin.
    pub fn violated(&self, m: usize) -> bool {
        (self.realized_regret - self.full_info_regret).abs() > self.margin(m)
    }

    /// Mean of the martingale increments `A_{i_t j_t} - x(t)^T A y(t)`.
    pub fn centering_mean(&self) -> f64 {
        let s: f64 = self.realized_payoffs.iter().zip(&self.expected_payoffs).map(|(a, b)| a - b).sum();
        s / self.horizon as f64
    }
}

/// `sum_t A_{i_t j_t} <= T V* + R_y(T) + 2 sqrt(2T ln(1/delta))`.
pub fn bandit_reward_sandwich(run: &BanditRun, v_star: f64) -> bool {
    let t = run.horizon as f64;
    let realized: f64 = run.realized_payoffs.iter().sum();
    realized <= t * v_star + run.full_info_regret + 2.0 * (2.0 * t * (1.0 / run.delta).ln()).sqrt()
}

pub const BANDIT_CSV_HEADER: &str = "seed,T,realized_regret,full_info_regret,margin,violated";

pub fn write_bandit_csv<W: Write>(runs: &[BanditRun], m: usize, mut out: W) -> Result<()> {
    writeln!(out, "{BANDIT_CSV_HEADER}")?;
    for r in runs {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            r.seed,
            r.horizon,
            r.realized_regret,
            r.full_info_regret,
            r.margin(m),
            r.violated(m)
        )?;
    }
    Ok(())
}
