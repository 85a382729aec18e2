//! Simulation and analysis of optimizers exploiting Follow-the-Regularized-Leader
//! learners in two-player zero-sum matrix games.
//!
//! The optimizer (rows) maximizes `x^T A y`; the learner (columns) runs FTRL on
//! the payoff matrix `B = -A` with a separable regularizer `h(y) = sum theta(y_i)`.

pub mod bandit;
pub mod choicemap;
pub mod dynamics;
pub mod error;
pub mod fixed_analysis;
pub mod frank_wolfe;
pub mod game;
pub mod kernels;
pub mod numeric;
pub mod pbr;
pub mod random_suite;
pub mod rng;
pub mod trap;

pub use error::{Error, Result};
pub use game::{GameSolution, GapProfile, ZeroSumGame};
pub use kernels::{Kernel, KernelFamily, NormProfile};
