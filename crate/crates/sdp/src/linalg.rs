use nalgebra::{DMatrix, SymmetricEigen};

/// Builds a symmetric matrix from a dense row-major buffer, averaging the
/// two triangles.
pub fn symmetric_from_row_major(n: usize, data: &[f64]) -> DMatrix<f64> {
    let m = DMatrix::from_row_slice(n, n, data);
    (&m + m.transpose()) * 0.5
}

/// Smallest eigenvalue of a symmetric matrix. Empty matrices report +∞.
pub fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 {
        return f64::INFINITY;
    }
    let sym = (m + m.transpose()) * 0.5;
    SymmetricEigen::new(sym)
        .eigenvalues
        .iter()
        .fold(f64::INFINITY, |a, &b| a.min(b))
}

/// Inverse of a symmetric positive definite matrix, `None` if the Cholesky
/// factorization fails.
pub(crate) fn spd_inverse(m: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let chol = m.clone().cholesky()?;
    let inv = chol.inverse();
    Some((&inv + inv.transpose()) * 0.5)
}

/// Largest `α ≥ 0` (capped at `cap`) such that `x + α·dx` stays positive
/// semidefinite. `None` when `x` itself is not positive definite.
pub(crate) fn max_step(x: &DMatrix<f64>, dx: &DMatrix<f64>, cap: f64) -> Option<f64> {
    let chol = x.clone().cholesky()?;
    let l = chol.l();
    let w = l.solve_lower_triangular(dx)?;
    let w = l.solve_lower_triangular(&w.transpose())?;
    let lam = min_eigenvalue(&w);
    if lam >= 0.0 {
        Some(cap)
    } else {
        Some((-1.0 / lam).min(cap))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn step_to_boundary() {
        let x = DMatrix::<f64>::identity(2, 2);
        let dx = DMatrix::from_row_slice(2, 2, &[-2.0, 0.0, 0.0, 1.0]);
        let a = max_step(&x, &dx, 10.0).unwrap();
        assert!((a - 0.5).abs() < 1e-14);
        let up = DMatrix::<f64>::identity(2, 2);
        assert_eq!(max_step(&x, &up, 1.0), Some(1.0));
    }

    #[test]
    fn min_eig_of_diag() {
        let m = DMatrix::from_row_slice(2, 2, &[3.0, 0.0, 0.0, -1.0]);
        assert!((min_eigenvalue(&m) + 1.0).abs() < 1e-14);
    }
}
