//! End-to-end experiments: configuration, the collect → synthesize →
//! evaluate pipeline, metrics and artifacts.

mod artifacts;
mod config;
mod metrics;
mod pipeline;
mod plot;

pub use artifacts::{config_echo, write_config_echo, ControllerFile, SynthesisArtifact};
pub use config::{
    AccConfig, CollectionConfig, EvaluationConfig, ExperimentConfig, PerturbationConfig,
    PlatoonConfig, ProfileConfig, ResolvedExperiment, SynthesisConfig, VehicleConfig,
};
pub use metrics::{compute_metrics, read_trajectory_csv, write_metrics_csv, MetricsReport, Window};
pub use pipeline::{
    collect, evaluate, run_case1, run_case2, run_experiment, synthesize_variant, variant_name,
    write_json, write_trajectory, write_variant_artifacts, Evaluation, ExperimentReport,
    GroupReport, VariantReport,
};
pub use plot::{emit_plots, PlotSeries};

use thiserror::Error;

use crate::datagen::DataError;
use crate::dynamics::ModelError;
use crate::runtime::RuntimeError;
use crate::synthesis::SynthesisError;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExperimentError {
    #[error("configuration: {0}")]
    Config(String),
    #[error("{0}")]
    Io(String),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Synthesis(#[from] SynthesisError),
    #[error(transparent)]
    Runtime(#[from] RuntimeError),
    #[error("no samples in the window [{0}, {1}] s")]
    EmptyWindow(f64, f64),
    #[error("plot: {0}")]
    Plot(String),
}

pub const EXIT_OK: i32 = 0;
pub const EXIT_INFEASIBLE: i32 = 2;
pub const EXIT_DIVERGED: i32 = 3;
pub const EXIT_CONFIG: i32 = 4;

impl ExperimentError {
    /// 2 for infeasible or data-starved synthesis, 3 for a run that left the
    /// physical envelope, 4 for configuration and file problems.
    pub fn exit_code(&self) -> i32 {
        match self {
            ExperimentError::Synthesis(
                SynthesisError::RankDeficient(_)
                | SynthesisError::Infeasible { .. }
                | SynthesisError::SingularP(_)
                | SynthesisError::Precondition(_)
                | SynthesisError::Solver(_),
            ) => EXIT_INFEASIBLE,
            ExperimentError::Data(
                DataError::Divergence { .. }
                | DataError::Collision { .. }
                | DataError::ControllerFault { .. },
            )
            | ExperimentError::Runtime(RuntimeError::Fault(_)) => EXIT_DIVERGED,
            _ => EXIT_CONFIG,
        }
    }
}

impl From<std::io::Error> for ExperimentError {
    fn from(e: std::io::Error) -> Self {
        ExperimentError::Io(e.to_string())
    }
}

impl From<serde_json::Error> for ExperimentError {
    fn from(e: serde_json::Error) -> Self {
        ExperimentError::Io(e.to_string())
    }
}
