//! Closed-loop simulation, data collection and reference profiles.

mod acc;
mod batch;
mod profile;
mod simulate;

pub use acc::{AccController, AccGains, Dither};
pub use batch::{
    check_richness, collect_data, Collection, CollectionMode, CollectionOptions, DataBatch,
    RichnessReport,
};
pub use profile::{
    load_drive_cycle, parse_drive_cycle, us06, virtual_leader_position, DriveCycleOptions,
    Interpolation, ReferenceProfile, SpeedUnit,
};
pub use simulate::{
    ControlFault, DesignSimulator, HighFidelitySimulator, PlatoonController, Sample, SimStart,
    Trajectory,
};

use thiserror::Error;

use crate::dynamics::ModelError;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DataError {
    #[error("{0}")]
    Io(String),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("{0}")]
    Validation(String),
    #[error("vehicle {vehicle} diverged at t = {t} s")]
    Divergence { t: f64, vehicle: usize },
    #[error("vehicle {vehicle} collided at t = {t} s (gap {gap} m)")]
    Collision { t: f64, vehicle: usize, gap: f64 },
    #[error("controller produced a non-finite effort for vehicle {vehicle} at t = {t} s")]
    ControllerFault { t: f64, vehicle: usize },
    #[error(transparent)]
    Model(#[from] ModelError),
}
