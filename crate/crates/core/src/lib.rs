//! Strategy synthesis for finite two-player games under window-stability,
//! mean-payoff and variance-stability objectives.
//!
//! All solver-facing arithmetic is exact: rewards are stored as integers with
//! a per-function denominator and thresholds are [`Rational`]s.

pub mod cli;
pub mod error;
pub mod fixtures;
pub mod game;
pub mod hardgen;
pub mod io;
pub mod mpsolve;
pub mod objective;
pub mod oracle;
pub mod rational;
pub mod scheme;
pub mod semantics;
pub mod variance;
pub mod window;

pub use error::{Error, Result};
pub use game::{Game, Lasso, Owner, RewardFunction, StateId};
pub use objective::{MeanPayoffObjective, MultiObjective, VarianceObjective, WindowObjective};
pub use rational::Rational;
pub use scheme::{FiniteStrategy, MemId, ProductGame, StrategyScheme};
