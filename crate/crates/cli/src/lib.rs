//! Command-line front end: config-driven experiments over the exponent,
//! hypergeometric, PDE-scan, and Monte Carlo modules, emitting CSV tables
//! stamped with the config hash.

pub mod checkpoint;
pub mod commands;
pub mod config;
pub mod table;

pub use commands::{run, CliError, Command, Invocation};
