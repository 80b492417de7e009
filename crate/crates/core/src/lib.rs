//! Budgeted multi-level Monte Carlo.
//!
//! The crate is organised bottom-up: [`stats`] holds mergeable per-level
//! sample statistics, [`estimator`] turns them into rate, error and
//! allocation estimates, [`scheduler`] maps sample counts onto power-of-two
//! processor groups and executes them, and [`controller`] drives the
//! budgeted estimation rounds. [`models`] provides the sample problems.

pub mod controller;
pub mod error;
pub mod estimator;
pub mod models;
pub mod scheduler;
pub mod seed;
pub mod stats;

pub use controller::{run, BmlmcConfig, RunReport, Termination};
pub use error::{Error, Result};
pub use estimator::{Allocation, ErrorEstimate, RateEstimate};
pub use models::{ModelError, ProblemDescriptor, SampleOutput, SampleProblem};
pub use scheduler::{ExecutionMode, SchedulerConfig};
pub use stats::{LevelAccumulator, MlmcDataset};
