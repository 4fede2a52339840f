//! Distributed PPO training for a simulated race car.

// `!(x > 0.0)` is the NaN-rejecting positivity check used throughout
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod config;
pub mod eval;
pub mod fabric;
pub mod geometry;
pub mod randomize;
pub mod rl;
pub mod sim;
