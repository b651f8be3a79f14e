//! Chance-constrained linear programs over probability measures.
//!
//! Given a cost `J(x)`, a constraint `h(x, δ) ≤ 0` with random `δ` and a level
//! `α`, the toolkit looks for a probability measure `μ` on the decision box
//! minimizing `∫ J dμ` subject to `Pr_{x∼μ, δ}{h(x, δ) ≤ 0} ≥ 1 − α`. Three
//! solvers are provided:
//!
//! * [`lp::solve_sample_lp`]: a linear program over weights on `S` sampled
//!   decisions, with the chance taken over `N` sampled scenarios;
//! * [`gmm::solve_gmm`]: a Gaussian-mixture density optimized by a penalty
//!   method with Nelder–Mead search;
//! * [`lp::solve_ccp_baseline`]: the best single sampled decision.
//!
//! [`validation`] checks any returned policy on fresh scenarios.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod cli;
pub mod config;
pub mod error;
pub mod gmm;
pub mod lp;
pub mod pipeline;
pub mod plot;
pub mod problem;
pub mod quadrotor;
pub mod rng;
pub mod sampling;
pub mod satisfaction;
pub mod validation;

pub use error::{Error, Result};
pub use problem::{DecisionBox, PolicyArtifact, Problem};
pub use rng::RngStream;
