//! Monte-Carlo checks of the random-game events and batch trap runs.
//!
//! Trial `t` of a sweep with base seed `s` plays the game
//! `random_game(n, m, trial_seed(s, t))`; the derived seed is recorded so any
//! single trial can be replayed.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::game::{has_pure_nash, random_game, row_gap_min, solve_minimax, DEFAULT_BR_TOL};
use crate::kernels::Kernel;
use crate::rng::trial_seed;
use crate::trap::{build_trap, curvature_budget, gamma, run_trap, DEFAULT_SUPP_TOL};

/// `n! m! / (n + m - 1)!`, the probability that an i.i.d. continuous game has
/// a pure saddle point.
pub fn pure_nash_probability(n: usize, m: usize) -> f64 {
    let ln_fact = |k: usize| (2..=k).map(|i| (i as f64).ln()).sum::<f64>();
    if n == 0 || m == 0 {
        return 0.0;
    }
    (ln_fact(n) + ln_fact(m) - ln_fact(n + m - 1)).exp()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: u64,
    pub seed: u64,
    pub pure_nash: bool,
    pub event_a: bool,
    pub event_gap: bool,
    /// Present when the trap was run.
    pub surplus: Option<f64>,
    pub bound: Option<f64>,
    pub met: Option<bool>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub trials: u64,
    pub pure_nash: u64,
    pub event_a: u64,
    pub event_gap: u64,
    /// Trials on which the trap ran (event `E_A` held).
    pub trap_runs: u64,
    pub surplus_met: u64,
    pub mean_surplus: f64,
    pub mean_bound: f64,
    /// Smallest `surplus - bound` over trap runs.
    pub min_margin: f64,
}

impl SweepResult {
    fn from_records(records: &[TrialRecord]) -> Self {
        let count = |f: &dyn Fn(&TrialRecord) -> bool| records.iter().filter(|r| f(r)).count() as u64;
        let runs: Vec<&TrialRecord> = records.iter().filter(|r| r.surplus.is_some()).collect();
        let k = runs.len() as f64;
        let mean = |f: &dyn Fn(&TrialRecord) -> f64| if runs.is_empty() { 0.0 } else { runs.iter().map(|r| f(r)).sum::<f64>() / k };
        SweepResult {
            trials: records.len() as u64,
            pure_nash: count(&|r| r.pure_nash),
            event_a: count(&|r| r.event_a),
            event_gap: count(&|r| r.event_gap),
            trap_runs: runs.len() as u64,
            surplus_met: count(&|r| r.met == Some(true)),
            mean_surplus: mean(&|r| r.surplus.unwrap()),
            mean_bound: mean(&|r| r.bound.unwrap()),
            min_margin: runs
                .iter()
                .map(|r| r.surplus.unwrap() - r.bound.unwrap())
                .fold(if runs.is_empty() { 0.0 } else { f64::INFINITY }, f64::min),
        }
    }

    pub fn rate(&self, count: u64) -> f64 {
        if self.trials == 0 {
            0.0
        } else {
            count as f64 / self.trials as f64
        }
    }
}

fn event_record(n: usize, m: usize, base: u64, trial: u64) -> Result<(TrialRecord, Option<(crate::ZeroSumGame, crate::trap::TrapConstruction)>)> {
    let seed = trial_seed(base, trial);
    let g = random_game(n, m, seed)?;
    let pure_nash = has_pure_nash(&g);
    let event_gap = m >= 2 && row_gap_min(&g)? >= gamma(n, m);
    let sol = solve_minimax(&g)?;
    let trap = build_trap(&g, &sol, DEFAULT_BR_TOL, DEFAULT_SUPP_TOL).ok();
    let rec = TrialRecord {
        trial,
        seed,
        pure_nash,
        event_a: trap.is_some(),
        event_gap,
        surplus: None,
        bound: None,
        met: None,
    };
    Ok((rec, trap.map(|t| (g, t))))
}

/// Counts saddle points, the row-gap event and the trap-construction event.
pub fn estimate_event_rates(n: usize, m: usize, trials: u64, seed: u64) -> Result<SweepResult> {
    let records: Vec<TrialRecord> = (0..trials)
        .into_par_iter()
        .map(|t| event_record(n, m, seed, t).map(|(r, _)| r))
        .collect::<Result<_>>()?;
    Ok(SweepResult::from_records(&records))
}

/// Parameters of a batch trap sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub n: usize,
    pub m: usize,
    pub kernel: Kernel,
    /// Fraction of the step-size cap, in `(0, 1]`.
    pub eta_fraction: f64,
    pub delta: f64,
    pub horizon: usize,
    pub trials: u64,
    pub seed: u64,
}

/// Runs the trap on every sampled game where it can be built.
pub fn trap_sweep(cfg: &SweepConfig) -> Result<(SweepResult, Vec<TrialRecord>)> {
    if !(cfg.eta_fraction > 0.0 && cfg.eta_fraction <= 1.0) {
        return Err(crate::Error::Domain(format!("eta fraction must lie in (0, 1], got {}", cfg.eta_fraction)));
    }
    let budget = curvature_budget(&cfg.kernel, cfg.n, cfg.m, cfg.delta)?;
    let eta = cfg.eta_fraction * budget.eta_cap;
    let records: Vec<TrialRecord> = (0..cfg.trials)
        .into_par_iter()
        .map(|t| {
            let (mut rec, built) = event_record(cfg.n, cfg.m, cfg.seed, t)?;
            if let Some((g, trap)) = built {
                let run = run_trap(&g, &cfg.kernel, &trap, eta, cfg.horizon, &budget)?;
                rec.surplus = Some(run.surplus);
                rec.bound = Some(run.bound);
                rec.met = Some(run.surplus >= run.bound - 1e-8);
            }
            Ok(rec)
        })
        .collect::<Result<_>>()?;
    Ok((SweepResult::from_records(&records), records))
}

pub const SWEEP_CSV_HEADER: &str = "trial,seed,pure_nash,event_A,event_gap,surplus,bound,met";

/// Writes sweep records; trap-only columns are empty where the trap did not run.
pub fn write_sweep_csv<W: Write>(records: &[TrialRecord], mut out: W) -> Result<()> {
    writeln!(out, "{SWEEP_CSV_HEADER}")?;
    let opt = |v: Option<f64>| v.map(|x| format!("{x}")).unwrap_or_default();
    for r in records {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            r.trial,
            r.seed,
            r.pure_nash,
            r.event_a,
            r.event_gap,
            opt(r.surplus),
            opt(r.bound),
            r.met.map(|b| b.to_string()).unwrap_or_default()
        )?;
    }
    Ok(())
}
