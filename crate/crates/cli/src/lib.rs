//! Experiment harness behind the `uavroute` binary: instance generation,
//! training, single-instance solving, benchmarking and result verification.

pub mod commands;
pub mod config;
pub mod results;
pub mod solver;

pub use commands::{cmd_bench, cmd_gen, cmd_solve, cmd_train, cmd_verify, CommonArgs};
pub use config::{ExperimentConfig, InstanceSet};
pub use results::{ResultRow, RESULTS_HEADER};
pub use solver::{SolverContext, SolverSpec};
