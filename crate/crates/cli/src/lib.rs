//! Experiment harness: configuration, dataset builders and the `qls` command line.

pub mod cli;
pub mod config;
pub mod experiments;
pub mod output;
