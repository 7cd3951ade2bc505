//! TOML-driven experiments: build the network, run seeded simulations in
//! parallel, and write per-run and aggregate CSVs with a manifest.

mod config;
mod run;

pub use config::{
    config_hash, parse_config, DegreeAxis, ExperimentConfig, NetworkKind, NetworkSpec, SimSection,
    SweepSpec,
};
pub use run::{
    derive_seeds, load_network, run_cell, run_experiment, run_sweep, CellOutcome, Network,
    RunManifest, RunStats, SweepCell,
};

use thiserror::Error;

use crate::engine::EngineError;
use crate::metrics::MetricsError;
use crate::netmodel::NetError;
use crate::theory::TheoryError;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("config error at `{path}`: {msg}")]
    Parse { path: String, msg: String },
    #[error("invalid value for `{path}`: {msg}")]
    Invalid { path: String, msg: String },
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Net(#[from] NetError),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Theory(#[from] TheoryError),
    #[error("could not start worker pool: {0}")]
    Pool(String),
}

impl ExperimentError {
    /// True when the input (config, data files, parameters) is at fault rather
    /// than the run itself.
    pub fn is_validation(&self) -> bool {
        match self {
            ExperimentError::Parse { .. }
            | ExperimentError::Invalid { .. }
            | ExperimentError::Net(_) => true,
            ExperimentError::Engine(e) => matches!(e, EngineError::Config(_)),
            ExperimentError::Theory(e) => {
                matches!(e, TheoryError::Domain(_) | TheoryError::OutOfModel(_))
            }
            ExperimentError::Io { .. } | ExperimentError::Metrics(_) | ExperimentError::Pool(_) => {
                false
            }
        }
    }

    /// Process exit code: 1 for validation errors, 2 for runtime failures.
    pub fn exit_code(&self) -> i32 {
        if self.is_validation() {
            1
        } else {
            2
        }
    }
}
