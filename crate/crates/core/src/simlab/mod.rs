//! Simulation designs, replication sweeps and placebo audits.

pub mod config;
pub mod dgp;
pub mod placebo;
pub mod rng;
pub mod sizes;
pub mod sweep;

pub use config::{parse_sweep, BinaryScope, SimConfig};
pub use dgp::{gen_dataset, gen_factor, Layout};
pub use placebo::{placebo_run, PlaceboConfig, PlaceboKind, PlaceboResult};
pub use rng::{Stream, StreamKey};
pub use sizes::{allocate_intersections, cluster_sizes, count_empty, thin_intersections};
pub use sweep::{run_sweep, write_sweep_csv, SweepOptions, SweepResult, Tally};

use crate::dataset::DataError;
use crate::ols::EstimationError;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SimError {
    #[error("config key `{key}`: {reason}")]
    Config { key: String, reason: String },
    #[error("infeasible cluster sizes: {0}")]
    InfeasibleSizes(String),
    #[error("infeasible thinning: {0}")]
    InfeasibleThinning(String),
    #[error(transparent)]
    Estimation(#[from] EstimationError),
}

impl From<DataError> for SimError {
    fn from(e: DataError) -> Self {
        SimError::Estimation(EstimationError::Data(e))
    }
}
