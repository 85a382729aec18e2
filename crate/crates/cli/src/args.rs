use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};

use ftrl_exploit::game::{random_game, DEFAULT_BR_TOL};
use ftrl_exploit::trap::DEFAULT_SUPP_TOL;
use ftrl_exploit::{Kernel, ZeroSumGame};

#[derive(Debug, Parser)]
#[command(name = "ftrl-exploit", version, about = "Exploiting FTRL learners in zero-sum matrix games")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run FTRL against a fixed or max-min optimizer and report the reward decomposition.
    Simulate(SimulateArgs),
    /// Exploitation envelope of a fixed optimizer strategy.
    Bounds(BoundsArgs),
    /// Build and run the alternating trap.
    Trap(TrapArgs),
    /// Batch trap runs over random games.
    Sweep(SweepArgs),
    /// Price-of-best-response cost curve.
    Pbr(PbrArgs),
    /// Sampled-play runs over many seeds.
    Bandit(BanditArgs),
    /// Frank–Wolfe search for the best fixed strategy.
    Fw(FwArgs),
}

/// `path/to/game.json` or `random:<n>,<m>,<seed>`.
#[derive(Debug, Clone, PartialEq)]
pub enum GameSource {
    File(PathBuf),
    Random { n: usize, m: usize, seed: u64 },
}

impl FromStr for GameSource {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let Some(spec) = s.strip_prefix("random:") else {
            return Ok(GameSource::File(PathBuf::from(s)));
        };
        let parts: Vec<&str> = spec.split(',').map(str::trim).collect();
        let [n, m, seed] = parts[..] else {
            return Err(format!("expected random:<n>,<m>,<seed>, got `{s}`"));
        };
        let dim = |v: &str| match v.parse::<usize>() {
            Ok(d) if d > 0 => Ok(d),
            _ => Err(format!("invalid dimension `{v}`")),
        };
        Ok(GameSource::Random {
            n: dim(n)?,
            m: dim(m)?,
            seed: seed.parse().map_err(|_| format!("invalid seed `{seed}`"))?,
        })
    }
}

impl GameSource {
    pub fn load(&self) -> ftrl_exploit::Result<ZeroSumGame> {
        match self {
            GameSource::File(p) => ZeroSumGame::load(p),
            GameSource::Random { n, m, seed } => random_game(*n, *m, *seed),
        }
    }
}

fn parse_kernel(s: &str) -> Result<Kernel, String> {
    s.parse().map_err(|e: ftrl_exploit::Error| e.to_string())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Feedback {
    Full,
    Realized,
}

/// Flags shared by every subcommand.
#[derive(Debug, Args)]
pub struct Common {
    #[arg(long)]
    pub game: GameSource,
    /// `entropic`, `euclidean` or `tsallis:<q>`.
    #[arg(long, value_parser = parse_kernel)]
    pub kernel: Kernel,
    /// Output file; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    /// Tolerance for treating an action as a best response.
    #[arg(long = "br-tol", default_value_t = DEFAULT_BR_TOL)]
    pub br_tol: f64,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub eta: f64,
    #[arg(long = "T")]
    pub horizon: usize,
    /// Fixed optimizer strategy (comma-separated); the max-min strategy when omitted.
    #[arg(long = "x-hat", value_delimiter = ',')]
    pub x_hat: Option<Vec<f64>>,
    /// Write the per-round NDJSON trajectory here.
    #[arg(long)]
    pub log: Option<PathBuf>,
    /// Include score vectors in the trajectory log.
    #[arg(long = "log-scores")]
    pub log_scores: bool,
}

#[derive(Debug, Args)]
pub struct BoundsArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub eta: f64,
    #[arg(long = "T")]
    pub horizon: usize,
    #[arg(long = "x-hat", value_delimiter = ',', required = true)]
    pub x_hat: Vec<f64>,
    /// Number of log-spaced horizons in the table.
    #[arg(long, default_value_t = 40)]
    pub points: usize,
}

/// Step size given directly or as a fraction of the trap cap.
#[derive(Debug, Args)]
pub struct StepArgs {
    #[arg(long, conflicts_with = "eta_frac")]
    pub eta: Option<f64>,
    #[arg(long = "eta-frac", default_value_t = 0.5)]
    pub eta_frac: f64,
    /// Interior margin of the curvature budget.
    #[arg(long, default_value_t = 0.1)]
    pub delta: f64,
}

#[derive(Debug, Args)]
pub struct TrapArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub step: StepArgs,
    #[arg(long = "T")]
    pub horizon: usize,
    /// Support threshold for the max-min strategy.
    #[arg(long = "supp-tol", default_value_t = DEFAULT_SUPP_TOL)]
    pub supp_tol: f64,
    #[arg(long = "log-scores")]
    pub log_scores: bool,
    /// Write the per-round NDJSON trajectory here.
    #[arg(long)]
    pub log: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long = "eta-frac", default_value_t = 0.5)]
    pub eta_frac: f64,
    #[arg(long, default_value_t = 0.1)]
    pub delta: f64,
    #[arg(long = "T")]
    pub horizon: usize,
    #[arg(long)]
    pub trials: u64,
    /// Base seed; defaults to the seed of `--game random:..`.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads; all cores when omitted.
    #[arg(long)]
    pub jobs: Option<usize>,
}

#[derive(Debug, Args)]
pub struct PbrArgs {
    #[command(flatten)]
    pub common: Common,
    /// Largest horizon on the grid.
    #[arg(long = "T")]
    pub horizon: usize,
    #[arg(long, default_value_t = 0.1)]
    pub delta: f64,
    #[arg(long = "gamma-min", default_value_t = 1e-4)]
    pub gamma_min: f64,
    #[arg(long = "gamma-max", default_value_t = 1e-1)]
    pub gamma_max: f64,
    #[arg(long = "gamma-points", default_value_t = 10)]
    pub gamma_points: usize,
    #[arg(long = "eta-points", default_value_t = ftrl_exploit::pbr::DEFAULT_ETA_POINTS)]
    pub eta_points: usize,
    #[arg(long = "t-points", default_value_t = ftrl_exploit::pbr::DEFAULT_T_POINTS)]
    pub t_points: usize,
}

#[derive(Debug, Args)]
pub struct BanditArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub eta: f64,
    #[arg(long = "T")]
    pub horizon: usize,
    /// Confidence level of the deviation margin.
    #[arg(long, default_value_t = ftrl_exploit::bandit::DEFAULT_CONFIDENCE)]
    pub delta: f64,
    /// Number of seeds.
    #[arg(long, default_value_t = 1)]
    pub trials: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long = "x-hat", value_delimiter = ',')]
    pub x_hat: Option<Vec<f64>>,
    #[arg(long, value_enum, default_value_t = Feedback::Realized)]
    pub feedback: Feedback,
    #[arg(long)]
    pub jobs: Option<usize>,
}

#[derive(Debug, Args)]
pub struct FwArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub eta: f64,
    #[arg(long = "T")]
    pub horizon: f64,
    /// Target accuracy; sets the iteration count unless `--iters` is given.
    #[arg(long, default_value_t = 1e-3)]
    pub eps: f64,
    #[arg(long)]
    pub iters: Option<usize>,
}
