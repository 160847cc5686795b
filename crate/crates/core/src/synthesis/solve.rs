use std::time::Instant;

use ddcacc_sdp::{min_eigenvalue, ConicSolver, InteriorPoint, SolveStatus};
use log::{debug, info, warn};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::lmi::{assemble_lmi, lmi_matrix, GainNorm, LmiScalars, SynthesisProblem};
use super::SynthesisError;
use crate::datagen::check_richness;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthesisSettings {
    pub epsilon1: f64,
    pub epsilon2: f64,
    pub lambda1: f64,
    pub lambda2: f64,
    pub norm: GainNorm,
    pub margin: f64,
    /// Solve over the data row space instead of all `T` columns.
    pub compress: bool,
    /// Try every pair from `grid` and keep the feasible one with the
    /// smallest objective; `(epsilon1, epsilon2)` is tried first.
    pub grid_search: bool,
    pub grid: Vec<f64>,
}

impl Default for SynthesisSettings {
    fn default() -> Self {
        Self {
            epsilon1: 1.0,
            epsilon2: 1.0,
            lambda1: 1.0,
            lambda2: 0.1,
            norm: GainNorm::Spectral,
            margin: 1e-6,
            compress: true,
            grid_search: true,
            grid: vec![0.1, 1.0, 10.0],
        }
    }
}

impl SynthesisSettings {
    fn scalars(&self, epsilon1: f64, epsilon2: f64) -> LmiScalars {
        LmiScalars {
            epsilon1,
            epsilon2,
            lambda1: self.lambda1,
            lambda2: self.lambda2,
            norm: self.norm,
            margin: self.margin,
        }
    }

    fn candidates(&self) -> Vec<(f64, f64)> {
        let mut out = vec![(self.epsilon1, self.epsilon2)];
        if self.grid_search {
            for &a in &self.grid {
                for &b in &self.grid {
                    if !out.contains(&(a, b)) {
                        out.push((a, b));
                    }
                }
            }
        }
        out
    }
}

/// Residuals of a returned certificate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificateResiduals {
    /// `|Z₀Y − [P; 0]|_max`
    pub state_interpolation: f64,
    /// `|Z₀G₂ − [0; I]|_max`
    pub monomial_interpolation: f64,
    /// `|X₁G₂|_max`
    pub monomial_cancellation: f64,
    /// Smallest eigenvalue of the full-side LMI matrix.
    pub lmi_min_eigenvalue: f64,
    pub p_min_eigenvalue: f64,
    pub p_condition: f64,
}

impl CertificateResiduals {
    pub fn max_equality(&self) -> f64 {
        self.state_interpolation
            .max(self.monomial_interpolation)
            .max(self.monomial_cancellation)
    }
}

/// One solver call inside a synthesis run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Attempt {
    pub epsilon1: f64,
    pub epsilon2: f64,
    pub status: String,
    pub objective: Option<f64>,
    pub iterations: usize,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthesisResult {
    #[serde(with = "crate::matrix_serde::row_major")]
    pub k: DMatrix<f64>,
    #[serde(with = "crate::matrix_serde::row_major")]
    pub p: DMatrix<f64>,
    #[serde(with = "crate::matrix_serde::row_major")]
    pub y: DMatrix<f64>,
    #[serde(with = "crate::matrix_serde::row_major")]
    pub g2: DMatrix<f64>,
    pub gamma: f64,
    /// Norm of `G₂` in the selected norm.
    pub g2_norm: f64,
    pub epsilon1: f64,
    pub epsilon2: f64,
    pub status: String,
    pub objective: f64,
    pub residuals: CertificateResiduals,
    /// Wall time of every attempt, summed.
    pub solve_seconds: f64,
    pub attempts: Vec<Attempt>,
    /// Raised when `P` is close to singular.
    pub warnings: Vec<String>,
}

/// `K = U₀ [Y P⁻¹, G₂]`.
pub fn extract_gain(
    u0: &DMatrix<f64>,
    y: &DMatrix<f64>,
    g2: &DMatrix<f64>,
    p: &DMatrix<f64>,
) -> Result<(DMatrix<f64>, Vec<String>), SynthesisError> {
    let mut warnings = Vec::new();
    let eig = p.clone().symmetric_eigen();
    let (lo, hi) = eig
        .eigenvalues
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(l, h), &v| {
            (l.min(v), h.max(v.abs()))
        });
    if lo.is_nan() || lo <= 0.0 {
        return Err(SynthesisError::SingularP(lo));
    }
    let cond = hi / lo;
    if cond > 1e12 {
        warnings.push(format!(
            "P is ill-conditioned (condition number {cond:.3e})"
        ));
    }
    let p_inv = p
        .clone()
        .cholesky()
        .ok_or(SynthesisError::SingularP(lo))?
        .inverse();
    let g1 = y * p_inv;
    let mut g = DMatrix::zeros(y.nrows(), g1.ncols() + g2.ncols());
    g.columns_mut(0, g1.ncols()).copy_from(&g1);
    g.columns_mut(g1.ncols(), g2.ncols()).copy_from(g2);
    Ok((u0 * g, warnings))
}

/// Residuals of `(P, Y, G₂, γ)` against the problem's constraints, using
/// the full-side LMI.
pub fn certificate_residuals(
    problem: &SynthesisProblem,
    p: &DMatrix<f64>,
    y: &DMatrix<f64>,
    g2: &DMatrix<f64>,
    gamma: f64,
    epsilon1: f64,
    epsilon2: f64,
) -> CertificateResiduals {
    let (n_x, n_q) = (problem.n_x, problem.n_q());
    let mut rhs_p = DMatrix::zeros(problem.n_z(), n_x);
    rhs_p.rows_mut(0, n_x).copy_from(p);
    let mut rhs_q = DMatrix::zeros(problem.n_z(), n_q);
    rhs_q.rows_mut(n_x, n_q).fill_with_identity();
    let lmi = lmi_matrix(problem, p, y, gamma, epsilon1, epsilon2);
    let eig = p.clone().symmetric_eigen().eigenvalues;
    let (lo, hi) = eig.iter().fold((f64::INFINITY, 0.0f64), |(l, h), &v| {
        (l.min(v), h.max(v.abs()))
    });
    CertificateResiduals {
        state_interpolation: (&problem.z0 * y - rhs_p).amax(),
        monomial_interpolation: (&problem.z0 * g2 - rhs_q).amax(),
        monomial_cancellation: (&problem.x1 * g2).amax(),
        lmi_min_eigenvalue: min_eigenvalue(&lmi),
        p_min_eigenvalue: lo,
        p_condition: hi / lo,
    }
}

fn norm_of(g2: &DMatrix<f64>, norm: GainNorm) -> f64 {
    match norm {
        GainNorm::Frobenius => g2.norm(),
        GainNorm::Spectral => {
            if g2.is_empty() {
                0.0
            } else {
                g2.clone().svd(false, false).singular_values.max()
            }
        }
    }
}

/// Minimizes `λ₁γ + λ₂‖G₂‖` over the LMI. A rank-deficient `Z₀` is
/// rejected before any solver call.
pub fn solve_sdp(
    problem: &SynthesisProblem,
    settings: &SynthesisSettings,
) -> Result<SynthesisResult, SynthesisError> {
    solve_sdp_with(problem, settings, &InteriorPoint::default())
}

pub fn solve_sdp_with(
    problem: &SynthesisProblem,
    settings: &SynthesisSettings,
    solver: &dyn ConicSolver,
) -> Result<SynthesisResult, SynthesisError> {
    problem.validate()?;
    let richness = check_richness(&problem.z0);
    if !richness.passed {
        return Err(SynthesisError::RankDeficient(richness));
    }
    let mut attempts = Vec::new();
    let mut best: Option<(
        f64,
        f64,
        f64,
        ddcacc_sdp::Solution,
        super::lmi::VariableLayout,
    )> = None;
    for (e1, e2) in settings.candidates() {
        let asm = assemble_lmi(problem, &settings.scalars(e1, e2), settings.compress)?;
        let started = Instant::now();
        let sol = solver
            .solve(&asm.program)
            .map_err(|e| SynthesisError::Solver(e.to_string()))?;
        let seconds = started.elapsed().as_secs_f64();
        debug!(
            "ε1 = {e1}, ε2 = {e2}: {} after {} iterations ({seconds:.2} s), objective {:.6e}",
            sol.status, sol.iterations, sol.objective
        );
        attempts.push(Attempt {
            epsilon1: e1,
            epsilon2: e2,
            status: sol.status.to_string(),
            objective: sol.status.has_solution().then_some(sol.objective),
            iterations: sol.iterations,
            seconds,
        });
        if sol.status.has_solution() && best.as_ref().is_none_or(|b| sol.objective < b.2) {
            best = Some((e1, e2, sol.objective, sol, asm.layout));
        }
    }
    let solve_seconds = attempts.iter().map(|a| a.seconds).sum();
    let Some((e1, e2, objective, sol, layout)) = best else {
        let status = attempts
            .iter()
            .map(|a| a.status.as_str())
            .find(|s| *s != SolveStatus::Infeasible.to_string())
            .unwrap_or("infeasible")
            .to_string();
        return Err(SynthesisError::Infeasible { status, attempts });
    };
    let u = layout.unpack(&sol.x);
    let (k, mut warnings) = extract_gain(&problem.u0, &u.y, &u.g2, &u.p)?;
    let residuals = certificate_residuals(problem, &u.p, &u.y, &u.g2, u.gamma, e1, e2);
    if sol.status == SolveStatus::Inaccurate {
        warnings.push("solver stopped before full accuracy".into());
    }
    for w in &warnings {
        warn!("{w}");
    }
    info!(
        "synthesis: γ = {:.4e}, ε1 = {e1}, ε2 = {e2}, LMI min eigenvalue {:.3e}, {} attempt(s) in {solve_seconds:.2} s",
        u.gamma,
        residuals.lmi_min_eigenvalue,
        attempts.len()
    );
    Ok(SynthesisResult {
        k,
        g2_norm: norm_of(&u.g2, settings.norm),
        p: u.p,
        y: u.y,
        g2: u.g2,
        gamma: u.gamma,
        epsilon1: e1,
        epsilon2: e2,
        status: sol.status.to_string(),
        objective,
        residuals,
        solve_seconds,
        attempts,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gain_with_identity_p() {
        let u0 = DMatrix::from_row_slice(1, 3, &[1.0, 2.0, 3.0]);
        let y = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 1.0, 1.0]);
        let g2 = DMatrix::from_row_slice(3, 1, &[0.5, 0.5, 0.0]);
        let (k, w) = extract_gain(&u0, &y, &g2, &DMatrix::identity(2, 2)).unwrap();
        assert!(w.is_empty());
        assert_eq!(k, DMatrix::from_row_slice(1, 3, &[4.0, 5.0, 1.5]));
    }

    #[test]
    fn gain_rejects_indefinite_p() {
        let p = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        let r = extract_gain(
            &DMatrix::zeros(1, 2),
            &DMatrix::zeros(2, 2),
            &DMatrix::zeros(2, 0),
            &p,
        );
        assert!(matches!(r, Err(SynthesisError::SingularP(_))));
    }

    #[test]
    fn gain_warns_on_ill_conditioning() {
        let p = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 1e-13]);
        let (_, w) = extract_gain(
            &DMatrix::zeros(1, 2),
            &DMatrix::zeros(2, 2),
            &DMatrix::zeros(2, 0),
            &p,
        )
        .unwrap();
        assert_eq!(w.len(), 1);
    }

    #[test]
    fn grid_candidates() {
        let s = SynthesisSettings::default();
        let c = s.candidates();
        assert_eq!(c.len(), 9);
        assert_eq!(c[0], (1.0, 1.0));
        let single = SynthesisSettings {
            grid_search: false,
            ..Default::default()
        };
        assert_eq!(single.candidates(), vec![(1.0, 1.0)]);
    }
}
