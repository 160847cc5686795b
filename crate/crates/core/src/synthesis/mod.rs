//! Controller synthesis from recorded data.
//!
//! A [`SynthesisProblem`] holds `U₀`, `Z₀`, `X₁`, the known disturbance
//! input `D` and the per-step disturbance bound `δ`. [`solve_sdp`] returns
//! the gain `K` of `u = K Z(x)` with its certificate `(P, Y, G₂, γ)`.

mod lmi;
mod solve;
mod split;
mod verify;

pub use lmi::{
    assemble_lmi, data_row_basis, disturbance_matrix, lmi_matrix, AssembledLmi, GainNorm,
    LmiScalars, SynthesisProblem, Unpacked, VariableLayout,
};
pub use solve::{
    certificate_residuals, extract_gain, solve_sdp, solve_sdp_with, Attempt, CertificateResiduals,
    SynthesisResult, SynthesisSettings,
};
pub use split::{split_subplatoons, SubPlatoon};
pub use verify::{
    cross_term_bound_check, spectral_radius, verify_closed_loop, ClosedLoopDiagnostics,
    CrossTermCheck,
};

use thiserror::Error;

use crate::datagen::RichnessReport;
use crate::dynamics::ModelError;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SynthesisError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("invalid settings: {0}")]
    InvalidSettings(String),
    #[error("Z0 has rank {} < n_z = {} over {} samples", .0.rank, .0.n_z, .0.samples)]
    RankDeficient(RichnessReport),
    #[error("no feasible certificate ({status}) after {} attempt(s)", attempts.len())]
    Infeasible {
        status: String,
        attempts: Vec<Attempt>,
    },
    #[error("P is not positive definite (smallest eigenvalue {0:.3e})")]
    SingularP(f64),
    #[error("W Wᵀ ⪯ Δ Δᵀ fails (margin {0:.3e})")]
    Precondition(f64),
    #[error("cannot split platoon: {0}")]
    Split(String),
    #[error("solver error: {0}")]
    Solver(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}
