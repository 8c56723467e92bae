//! Command-line harness for NC-Bayes: configuration, seeding, replication
//! studies, table reproduction and artifact output.

pub mod cli;
pub mod commands;
pub mod config;
pub mod experiments;
pub mod failure;
pub mod manifest;
pub mod reproduce;

pub use failure::{CliError, CliResult};
