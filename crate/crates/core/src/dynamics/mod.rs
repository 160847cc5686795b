//! Vehicle models, the platoon error system and its polynomial lifting.
//!
//! The error state of vehicle `i` is `(h̃ᵢ, ṽᵢ, aᵢ)`: spacing error against
//! the desired gap `h*`, velocity error against `v*`, and acceleration.
//! States are stacked head first. The lifted vector appends `(ṽᵢaᵢ, ṽᵢ²)`
//! for every automated vehicle in platoon order; human drivers contribute
//! no monomials and no input column.

mod disturbance;
mod platoon;
mod vehicle;

pub use disturbance::{
    av_disturbance_bound, av_true_disturbance, disturbance_bound, hv_disturbance_bound,
    hv_true_disturbance, true_disturbance, DisturbanceBound, HvBox, ParamBox, VehicleBox,
};
pub use platoon::{
    assemble_polynomial_system, build_system, discretize, step_design_consistent, LiftLayout,
    LiftedSystem, PlatoonSpec, Vehicle,
};
pub use vehicle::{
    air_resistance, av_derivative, build_av_error_blocks, build_hv_error_blocks, hv_derivative,
    range_policy, AvErrorBlocks, ErrorState, HvErrorBlocks, HvParams, VehicleParams, VehicleState,
};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("parameter {name} = {value} is out of range")]
    InvalidParameter { name: &'static str, value: f64 },
    #[error("platoon has no vehicles")]
    EmptyPlatoon,
    #[error("the first vehicle of a platoon must be automated")]
    HumanLeader,
    #[error("{what}: expected dimension {expected}, got {got}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("parameter box kind does not match the vehicle kind")]
    BoxKindMismatch,
}
