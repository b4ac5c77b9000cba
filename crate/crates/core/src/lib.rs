//! Energy-aware UAV data-collection routing over clustered sensor networks.
//!
//! A UAV leaves a start point, hovers above one cluster head per cluster to
//! collect that cluster's data, and returns. This crate provides the energy
//! model, seeded instance generation, exact cluster-head selection for a
//! fixed visiting order (A* and DP), a pointer-network policy that proposes
//! visiting orders, and classical baselines.

pub mod baselines;
pub mod energy;
pub mod error;
pub mod instance;
pub mod nn;
pub mod policy;
pub mod route;
pub mod solution;

pub use baselines::{solve_genetic, solve_genetic_traced, solve_nearest_neighbor, solve_random, GaConfig};
pub use energy::{evaluate_solution, EnergyBreakdown, EnergyParams};
pub use error::{Error, Result};
pub use instance::{generate, Cluster, GenSpec, Instance, Point, Tour};
pub use nn::{init_params, Checkpoint, CriticParams, PolicyParams};
pub use policy::{
    infer_active, infer_greedy, infer_sampling, train, ActiveOutcome, ActiveSearchConfig, BaselineMode, TraceRow,
    TrainConfig, Trainer,
};
pub use route::{astar_select_chs, brute_force_solve, dp_select_chs, HeadSelection};
pub use solution::Solution;
