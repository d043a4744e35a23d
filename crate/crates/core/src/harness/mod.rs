//! Experiment orchestration: configuration, replicated runs, reports and the
//! command-line front end.

pub mod cli;
pub mod config;
pub mod experiments;
pub mod report;
pub mod rng;
pub mod stats;
