//! Simulation and bound evaluation for polynomially mixing Markov chains.
//!
//! The crate is `no_std` with `alloc`. It carries the exemplar chains
//! (renewal chain on the integers, Harris chain on `[0, 1]`, doubling chain),
//! exact and Monte-Carlo mixing coefficients, closed-form evaluators for the
//! deviation and concentration bounds, and Monte-Carlo tail estimation with
//! exact small-instance oracles.
//!
//! Randomness always flows from an explicit [`rng::RngStream`]; Monte-Carlo
//! work is split into fixed-size chunks, each with its own stream, so results
//! never depend on how chunks are scheduled. A [`tails::ChunkRunner`] decides
//! the schedule; [`tails::Sequential`] is provided here and threaded runners
//! live in the std companion crate.

#![cfg_attr(not(test), no_std)]
// NaN must fail every range check, so `!(x > 0.0)` is intentional.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

extern crate alloc;

pub mod bounds;
pub mod chains;
mod error;
pub mod mixing;
pub mod rng;
pub mod special;
pub mod tails;

pub use error::{Error, Result};
