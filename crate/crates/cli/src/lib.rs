//! Command-line pipeline around the `dqlids` library: preprocess, train,
//! evaluate, sweep, and report, all writing into one output directory.

pub mod commands;
pub mod config;
pub mod report;

pub use commands::{Prepared, Split, SweepRow, TrainOutcome};
pub use config::RunConfig;
