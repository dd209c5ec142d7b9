//! Desk-scale federated learning simulation.
//!
//! Ties the pieces together: datasets and class-balanced partitioning
//! ([`data`]), a multinomial logistic-regression model ([`logreg`]), and the
//! communication round loop that selects devices, beams, aggregates over the
//! air, and applies the global update ([`trainer`]).

pub mod data;
pub mod logreg;
pub mod trainer;

pub use data::{load_idx, partition_iid, Dataset, GaussianMixture};
pub use logreg::{accuracy, cross_entropy_loss, local_gradient, BatchSpec, ModelState};
pub use trainer::{run_round, run_training, RoundMetrics, TraceRow, TrainingConfig, TrainingTrace};
