//! Experiment harness for operator scaling stable random sheets: configuration, runs, artifacts
//! and the aggregate report.

pub mod config;
pub mod experiments;
pub mod output;
pub mod report;
