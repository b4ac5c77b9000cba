//! Training and inference for the pointer-network route policy.

pub mod adam;
pub mod infer;
pub mod train;

pub use adam::AdamState;
pub use infer::{infer_active, infer_greedy, infer_sampling, ActiveOutcome, ActiveSearchConfig, BaselineMode};
pub use train::{train, TraceRow, TrainConfig, Trainer};
