mod args;
mod output;

use std::io::Write;
use std::process::ExitCode;

use clap::Parser;
use rayon::prelude::*;
use serde::Serialize;

use ftrl_exploit::bandit::{simulate_bandit, write_bandit_csv, BanditRun, LearnerFeedback};
use ftrl_exploit::dynamics::{continuous_lag, reward_report, simulate, write_trajectory_log, ExploitationReport, OptimizerSchedule};
use ftrl_exploit::fixed_analysis::{exploitation_bounds, l1_distance_bounds, Regime};
use ftrl_exploit::frank_wolfe::{fw_iteration_budget, fw_optimize};
use ftrl_exploit::game::{gap_profile, solve_minimax};
use ftrl_exploit::numeric::log_space;
use ftrl_exploit::pbr::{cost_curve_on_grid, default_t_grid, write_pbr_csv};
use ftrl_exploit::random_suite::{trap_sweep, write_sweep_csv, SweepConfig, SweepResult, TrialRecord};
use ftrl_exploit::trap::{build_trap, curvature_budget, run_trap, TrapReport};
use ftrl_exploit::{Error, Result};

use args::{
    BanditArgs, BoundsArgs, Cli, Command, Feedback, Format, FwArgs, GameSource, PbrArgs, SimulateArgs, SweepArgs,
    TrapArgs,
};
use output::{emit_csv, emit_json, sink};

/// Argument problems detected after clap has parsed the command line.
#[derive(Debug)]
struct Usage(String);

enum Failure {
    Usage(Usage),
    Run(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Run(e)
    }
}

impl From<Usage> for Failure {
    fn from(u: Usage) -> Self {
        Failure::Usage(u)
    }
}

type CmdResult = std::result::Result<(), Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(a) => run_simulate(a),
        Command::Bounds(a) => run_bounds(a),
        Command::Trap(a) => run_trap_cmd(a),
        Command::Sweep(a) => run_sweep(a),
        Command::Pbr(a) => run_pbr(a),
        Command::Bandit(a) => run_bandit(a),
        Command::Fw(a) => run_fw(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(Usage(msg))) => {
            eprintln!("error: {msg}\n\nFor more information, try '--help'.");
            ExitCode::from(2)
        }
        Err(Failure::Run(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn with_pool<T: Send>(jobs: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(j) = jobs {
        builder = builder.num_threads(j);
    }
    let pool = builder.build().map_err(|e| Error::Domain(e.to_string()))?;
    Ok(pool.install(f))
}

fn optional_path(p: &Option<std::path::PathBuf>) -> Option<&std::path::Path> {
    p.as_deref()
}

#[derive(Serialize)]
struct SimulateOutput {
    kernel: String,
    eta: f64,
    #[serde(rename = "T")]
    horizon: usize,
    value: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    x_hat: Option<Vec<f64>>,
    #[serde(flatten)]
    report: ExploitationReport,
}

fn run_simulate(a: SimulateArgs) -> CmdResult {
    let c = &a.common;
    let g = c.game.load()?;
    let sol = solve_minimax(&g)?;
    let (sched, profile) = match &a.x_hat {
        Some(x) => (OptimizerSchedule::Fixed(x.clone()), Some(gap_profile(&g, x, c.br_tol)?)),
        None => (OptimizerSchedule::MaxMin, None),
    };
    let traj = simulate(&g, &c.kernel, a.eta, &sched, a.horizon)?;
    if let Some(path) = &a.log {
        let mut w = sink(Some(path))?;
        write_trajectory_log(&traj, a.log_scores, &mut w)?;
        w.flush().map_err(Error::from)?;
    }
    let out = SimulateOutput {
        kernel: c.kernel.to_string(),
        eta: a.eta,
        horizon: a.horizon,
        value: sol.value,
        x_hat: a.x_hat.clone(),
        report: reward_report(&traj, &sol, profile.as_ref()),
    };
    match c.format {
        Format::Json => emit_json(&out, optional_path(&c.out))?,
        Format::Csv => emit_csv(optional_path(&c.out), |w| {
            let r = &out.report;
            let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
            writeln!(
                w,
                "total_reward,continuous_reward,discretization_gap,value_term,exploitation_discrete,exploitation_continuous,identity_residual,vag,lag_discrete,lag_continuous"
            )?;
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{},{}",
                r.total_reward,
                r.continuous_reward,
                r.discretization_gap,
                r.value_term,
                r.exploitation_discrete,
                r.exploitation_continuous,
                r.identity_residual,
                opt(r.vag),
                opt(r.lag_discrete),
                opt(r.lag_continuous)
            )?;
            Ok(())
        })?,
    }
    Ok(())
}

#[derive(Serialize)]
struct BoundsRow {
    t: usize,
    lower_dv: f64,
    upper_dv: f64,
    lag_lower: f64,
    lag_upper: f64,
    lag_continuous: f64,
    l1_exact: f64,
    l1_lower: f64,
    l1_upper: f64,
}

#[derive(Serialize)]
struct BoundsOutput {
    kernel: String,
    eta: f64,
    regime: Regime,
    k: usize,
    delta_min: Option<f64>,
    delta_max: Option<f64>,
    /// Absent for steep kernels, which never eliminate an action.
    saturation_time: Option<f64>,
    rows: Vec<BoundsRow>,
}

const BOUNDS_CSV_HEADER: &str = "t,lower_dv,upper_dv,lag_lower,lag_upper,lag_continuous,l1_exact,l1_lower,l1_upper";

fn run_bounds(a: BoundsArgs) -> CmdResult {
    let c = &a.common;
    let g = c.game.load()?;
    let p = gap_profile(&g, &a.x_hat, c.br_tol)?;
    let mut rows = Vec::new();
    let mut head = None;
    for t in default_t_grid(a.horizon, a.points.max(2)) {
        let env = exploitation_bounds(&c.kernel, &p, a.eta, t as f64)?;
        let l1 = l1_distance_bounds(&c.kernel, &p, a.eta, t as f64)?;
        rows.push(BoundsRow {
            t,
            lower_dv: env.lower_dv,
            upper_dv: env.upper_dv,
            lag_lower: env.lag_lower,
            lag_upper: env.lag_upper,
            lag_continuous: continuous_lag(&g, &c.kernel, a.eta, &a.x_hat, t as f64)?,
            l1_exact: l1.exact,
            l1_lower: l1.lower,
            l1_upper: l1.upper,
        });
        head.get_or_insert((env.regime, env.saturation_time));
    }
    let (regime, sat) = head.ok_or_else(|| Usage("empty horizon grid".into()))?;
    let out = BoundsOutput {
        kernel: c.kernel.to_string(),
        eta: a.eta,
        regime,
        k: p.k,
        delta_min: p.delta_min,
        delta_max: p.delta_max,
        saturation_time: sat.is_finite().then_some(sat),
        rows,
    };
    match c.format {
        Format::Json => emit_json(&out, optional_path(&c.out))?,
        Format::Csv => emit_csv(optional_path(&c.out), |w| {
            writeln!(w, "{BOUNDS_CSV_HEADER}")?;
            for r in &out.rows {
                writeln!(
                    w,
                    "{},{},{},{},{},{},{},{},{}",
                    r.t, r.lower_dv, r.upper_dv, r.lag_lower, r.lag_upper, r.lag_continuous, r.l1_exact, r.l1_lower, r.l1_upper
                )?;
            }
            Ok(())
        })?,
    }
    Ok(())
}

fn run_trap_cmd(a: TrapArgs) -> CmdResult {
    let c = &a.common;
    let g = c.game.load()?;
    let sol = solve_minimax(&g)?;
    let trap = build_trap(&g, &sol, c.br_tol, a.supp_tol)?;
    let budget = curvature_budget(&c.kernel, g.n(), g.m(), a.step.delta)?;
    let eta = match a.step.eta {
        Some(e) => e,
        None if a.step.eta_frac > 0.0 && a.step.eta_frac <= 1.0 => a.step.eta_frac * budget.eta_cap,
        None => return Err(Usage(format!("--eta-frac must lie in (0, 1], got {}", a.step.eta_frac)).into()),
    };
    let run = run_trap(&g, &c.kernel, &trap, eta, a.horizon, &budget)?;
    if let Some(path) = &a.log {
        let mut w = sink(Some(path))?;
        write_trajectory_log(&run.trajectory, a.log_scores, &mut w)?;
        w.flush().map_err(Error::from)?;
    }
    let report = TrapReport::new(&trap, &budget, &run);
    match c.format {
        Format::Json => emit_json(&report, optional_path(&c.out))?,
        Format::Csv => emit_csv(optional_path(&c.out), |w| {
            writeln!(w, "event_A,event_gap,gap_v_prime,eta_cap,M,surplus,certified_bound,T,eta")?;
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{}",
                report.event_a,
                report.event_gap,
                report.gap_v_prime,
                report.eta_cap,
                report.m_curv,
                report.surplus,
                report.certified_bound,
                report.horizon,
                report.eta
            )?;
            Ok(())
        })?,
    }
    Ok(())
}

#[derive(Serialize)]
struct SweepOutput {
    n: usize,
    m: usize,
    kernel: String,
    seed: u64,
    summary: SweepResult,
    records: Vec<TrialRecord>,
}

fn run_sweep(a: SweepArgs) -> CmdResult {
    let c = &a.common;
    let GameSource::Random { n, m, seed } = c.game else {
        return Err(Usage("sweep samples its games; pass --game random:<n>,<m>,<seed>".into()).into());
    };
    let cfg = SweepConfig {
        n,
        m,
        kernel: c.kernel,
        eta_fraction: a.eta_frac,
        delta: a.delta,
        horizon: a.horizon,
        trials: a.trials,
        seed: a.seed.unwrap_or(seed),
    };
    let (summary, records) = with_pool(a.jobs, || trap_sweep(&cfg))??;
    eprintln!(
        "sweep: {} trials, pure NE {}, E_A {}, E_gap {}, surplus met {}/{}",
        summary.trials, summary.pure_nash, summary.event_a, summary.event_gap, summary.surplus_met, summary.trap_runs
    );
    match c.format {
        Format::Json => emit_json(
            &SweepOutput { n, m, kernel: c.kernel.to_string(), seed: cfg.seed, summary, records },
            optional_path(&c.out),
        )?,
        Format::Csv => emit_csv(optional_path(&c.out), |w| write_sweep_csv(&records, w))?,
    }
    Ok(())
}

fn run_pbr(a: PbrArgs) -> CmdResult {
    let c = &a.common;
    if a.gamma_points == 0 || a.eta_points == 0 || a.t_points == 0 {
        return Err(Usage("grid sizes must be positive".into()).into());
    }
    let g = c.game.load()?;
    let gammas = log_space(a.gamma_min, a.gamma_max, a.gamma_points);
    let cap = curvature_budget(&c.kernel, g.n(), g.m(), a.delta)?.eta_cap;
    let etas = log_space(cap / 20.0, cap, a.eta_points);
    let curve = cost_curve_on_grid(&g, &c.kernel, &gammas, &etas, &default_t_grid(a.horizon, a.t_points))?;
    if !curve.unreached.is_empty() {
        eprintln!("pbr: {} accuracies not reached on the grid: {:?}", curve.unreached.len(), curve.unreached);
    }
    match c.format {
        Format::Json => emit_json(&curve, optional_path(&c.out))?,
        Format::Csv => emit_csv(optional_path(&c.out), |w| write_pbr_csv(&curve.points, w))?,
    }
    Ok(())
}

#[derive(Serialize)]
struct BanditSummary {
    seed: u64,
    #[serde(rename = "T")]
    horizon: usize,
    realized_regret: f64,
    full_info_regret: f64,
    margin: f64,
    violated: bool,
    centering_mean: f64,
}

fn run_bandit(a: BanditArgs) -> CmdResult {
    let c = &a.common;
    if a.trials == 0 {
        return Err(Usage("--trials must be positive".into()).into());
    }
    let g = c.game.load()?;
    let sched = match &a.x_hat {
        Some(x) => OptimizerSchedule::Fixed(x.clone()),
        None => OptimizerSchedule::MaxMin,
    };
    let feedback = match a.feedback {
        Feedback::Full => LearnerFeedback::Full,
        Feedback::Realized => LearnerFeedback::Realized,
    };
    let runs: Vec<BanditRun> = with_pool(a.jobs, || {
        (0..a.trials)
            .into_par_iter()
            .map(|i| simulate_bandit(&g, &c.kernel, a.eta, &sched, a.horizon, a.seed + i, a.delta, feedback))
            .collect::<Result<Vec<_>>>()
    })??;
    let m = g.m();
    match c.format {
        Format::Json => {
            let rows: Vec<BanditSummary> = runs
                .iter()
                .map(|r| BanditSummary {
                    seed: r.seed,
                    horizon: r.horizon,
                    realized_regret: r.realized_regret,
                    full_info_regret: r.full_info_regret,
                    margin: r.margin(m),
                    violated: r.violated(m),
                    centering_mean: r.centering_mean(),
                })
                .collect();
            emit_json(&rows, optional_path(&c.out))?
        }
        Format::Csv => emit_csv(optional_path(&c.out), |w| write_bandit_csv(&runs, m, w))?,
    }
    Ok(())
}

fn run_fw(a: FwArgs) -> CmdResult {
    let c = &a.common;
    let g = c.game.load()?;
    let iters = match a.iters {
        Some(i) => i,
        None => fw_iteration_budget(&g, &c.kernel, a.eta, a.horizon, a.eps)?,
    };
    let res = fw_optimize(&g, &c.kernel, a.eta, a.horizon, &vec![0.0; g.m()], iters)?;
    match c.format {
        Format::Json => emit_json(&res, optional_path(&c.out))?,
        Format::Csv => emit_csv(optional_path(&c.out), |w| {
            writeln!(w, "iteration,objective,fw_gap")?;
            for (s, obj) in res.objective_trace.iter().enumerate() {
                let gap = res.fw_gaps.get(s).map(|v| v.to_string()).unwrap_or_default();
                writeln!(w, "{s},{obj},{gap}")?;
            }
            Ok(())
        })?,
    }
    Ok(())
}
