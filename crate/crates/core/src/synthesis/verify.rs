use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::SynthesisError;

/// White-box view of a learned closed loop
/// `x⁺ = Ā x + Ē Q(x) + D w`, available when the true disturbance
/// sequence was recorded.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClosedLoopDiagnostics {
    #[serde(with = "crate::matrix_serde::row_major")]
    pub a_bar: DMatrix<f64>,
    #[serde(with = "crate::matrix_serde::row_major")]
    pub e_bar: DMatrix<f64>,
    pub spectral_radius: f64,
    /// `|Z₀[G₁ G₂] − I|_max`
    pub identity_residual: f64,
    /// `|X₁G₂|_max`
    pub cancellation_residual: f64,
}

pub fn spectral_radius(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone()
        .complex_eigenvalues()
        .iter()
        .map(|c| c.norm())
        .fold(0.0, f64::max)
}

/// `Ā = (X₁ − DW₀)G₁`, `Ē = (X₁ − DW₀)G₂` with `G₁ = Y P⁻¹`.
pub fn verify_closed_loop(
    z0: &DMatrix<f64>,
    x1: &DMatrix<f64>,
    w0: &DMatrix<f64>,
    d: &DMatrix<f64>,
    p: &DMatrix<f64>,
    y: &DMatrix<f64>,
    g2: &DMatrix<f64>,
) -> Result<ClosedLoopDiagnostics, SynthesisError> {
    let n_z = z0.nrows();
    let p_inv = p
        .clone()
        .cholesky()
        .ok_or(SynthesisError::SingularP(f64::NAN))?
        .inverse();
    let g1 = y * p_inv;
    let mut g = DMatrix::zeros(y.nrows(), n_z);
    g.columns_mut(0, g1.ncols()).copy_from(&g1);
    g.columns_mut(g1.ncols(), g2.ncols()).copy_from(g2);
    let data = x1 - d * w0;
    let a_bar = &data * &g1;
    let e_bar = &data * g2;
    Ok(ClosedLoopDiagnostics {
        spectral_radius: spectral_radius(&a_bar),
        identity_residual: (z0 * &g - DMatrix::<f64>::identity(n_z, n_z)).amax(),
        cancellation_residual: (x1 * g2).amax(),
        a_bar,
        e_bar,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CrossTermCheck {
    pub holds: bool,
    /// Smallest eigenvalue of the right side minus the left side.
    pub margin: f64,
}

/// Checks `MWᵀN + NᵀWMᵀ ⪯ ε⁻¹MMᵀ + εNᵀΔΔᵀN` for `M ∈ ℝ^{k×T}`,
/// `N ∈ ℝ^{n_w×k}`, `W ∈ ℝ^{n_w×T}` with `WWᵀ ⪯ ΔΔᵀ`. A violated
/// precondition is an error, not a failed check.
pub fn cross_term_bound_check(
    m: &DMatrix<f64>,
    n: &DMatrix<f64>,
    w: &DMatrix<f64>,
    delta: &DMatrix<f64>,
    epsilon: f64,
    tolerance: f64,
) -> Result<CrossTermCheck, SynthesisError> {
    let (k, t) = m.shape();
    let n_w = w.nrows();
    if n.shape() != (n_w, k) || w.ncols() != t || delta.nrows() != n_w {
        return Err(SynthesisError::Dimension(
            "M, N, W, Δ shapes do not conform".into(),
        ));
    }
    if epsilon.is_nan() || epsilon <= 0.0 {
        return Err(SynthesisError::InvalidSettings(format!(
            "ε = {epsilon} must be positive"
        )));
    }
    let pre = ddcacc_sdp::min_eigenvalue(&(delta * delta.transpose() - w * w.transpose()));
    if pre < -tolerance {
        return Err(SynthesisError::Precondition(pre));
    }
    let cross = m * w.transpose() * n;
    let lhs = &cross + cross.transpose();
    let nd = n.transpose() * delta;
    let rhs = m * m.transpose() / epsilon + &nd * nd.transpose() * epsilon;
    let margin = ddcacc_sdp::min_eigenvalue(&(rhs - lhs));
    Ok(CrossTermCheck {
        holds: margin >= -tolerance,
        margin,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_disturbance_holds() {
        let m = DMatrix::from_row_slice(2, 3, &[1.0, 2.0, 3.0, -1.0, 0.0, 2.0]);
        let n = DMatrix::from_row_slice(1, 2, &[0.5, -0.5]);
        let c = cross_term_bound_check(
            &m,
            &n,
            &DMatrix::zeros(1, 3),
            &DMatrix::identity(1, 1),
            1.0,
            1e-12,
        )
        .unwrap();
        assert!(c.holds);
    }

    #[test]
    fn scalar_equality_case() {
        // 2·m·w·n ≤ m² + n²δ² with m = n = 1, w = δ = 1: equality.
        let one = DMatrix::from_element(1, 1, 1.0);
        let c = cross_term_bound_check(&one, &one, &one, &one, 1.0, 1e-12).unwrap();
        assert!(c.holds);
        assert!(c.margin.abs() < 1e-12);
    }

    #[test]
    fn precondition_violation_is_distinct() {
        let one = DMatrix::from_element(1, 1, 1.0);
        let two = DMatrix::from_element(1, 1, 2.0);
        assert!(matches!(
            cross_term_bound_check(&one, &one, &two, &one, 1.0, 1e-12),
            Err(SynthesisError::Precondition(_))
        ));
    }

    #[test]
    fn spectral_radius_of_rotation() {
        let r = DMatrix::from_row_slice(2, 2, &[0.0, -0.5, 0.5, 0.0]);
        assert!((spectral_radius(&r) - 0.5).abs() < 1e-14);
    }
}
