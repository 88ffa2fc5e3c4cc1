//! Sweeps, file formats and Monte-Carlo cross-checks on top of
//! `shellcap-core`. The `shellcap` binary is a thin wrapper around
//! [`config::RunConfig`] and [`sweep::run_sweep`].

pub mod config;
pub mod oracle;
pub mod output;
pub mod selftest;
pub mod sweep;

pub use config::{Format, RunConfig};
pub use oracle::{mc_mutual_information, mc_output_histogram, McConfig, McEstimate};
pub use sweep::{run_sweep, PointOutcome, SweepRecord};
