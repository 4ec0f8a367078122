//! Scenario configuration, runs and reports for the `ddctl` binary.

pub mod config;
pub mod error;
pub mod plot;
pub mod report;
pub mod run;
pub mod scenarios;
