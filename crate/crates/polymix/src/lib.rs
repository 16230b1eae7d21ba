//! Experiment runner for `polymix-core`: threaded Monte Carlo, CSV and
//! JSON-lines formats, configuration, verification suites and the
//! `polymix` command line.

// NaN must fail every range check, so `!(x > 0.0)` is intentional.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod config;
pub mod error;
pub mod experiments;
pub mod io;
pub mod runner;
pub mod verify;

pub use error::CliError;
pub use runner::Threaded;
