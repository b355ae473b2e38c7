//! Budget-conditioned architecture generation over learned Pareto frontiers.
//!
//! The pipeline collects cost/quality measurements for randomly sampled
//! architectures, trains a pairwise ranking evaluator from a Pareto dominance
//! rule, then trains a budget-conditioned recurrent policy by policy gradient
//! against that evaluator. A trained generator emits feasible, near-optimal
//! architectures for any cost budget, including budgets between the trained
//! grid points via embedding interpolation.

pub mod config;
pub mod diffcore;
pub mod error;
pub mod evaluator;
pub mod frontier;
pub mod generator;
pub mod oracle;
pub mod pipeline;
pub mod space;

pub use error::{Error, Result};
