//! Command-line experiments, CSV formats and the check suite for
//! `riemann-stein`.

pub mod checks;
pub mod cli;
pub mod config;
pub mod error;
pub mod experiments;
pub mod io;
