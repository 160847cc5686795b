//! Data-driven LMI for the lifted closed loop.
//!
//! Decision variables are `P = Pᵀ ≻ 0`, `Y ∈ ℝ^{T×n_x}`, `G₂ ∈ ℝ^{T×n_q}`,
//! `γ > 0` and, with a norm penalty, an epigraph scalar `η ≥ ‖G₂‖`:
//!
//! ```text
//! Z₀Y = [P; 0]     Z₀G₂ = [0; I]     X₁G₂ = 0
//!
//! ┌ P    0    P    (X₁Y)ᵀ  0      Yᵀ     0      ┐
//! │ 0    γI   0    0       Dᵀ     0      0      │
//! │ P    0    γI   0       0      0      0      │
//! │ X₁Y  0    0    ε̂P      0      0      DΔ     │ ≻ 0,   ε̂ = ε₁/(1+ε₁)
//! │ 0    D    0    0       P/ε₁   0      0      │
//! │ Y    0    0    0       0      ε₂I_T  0      │
//! └ 0    0    0    ΔᵀDᵀ    0      0      I/ε₂   ┘
//! ```
//!
//! `Y` and `G₂` only reach the constraints through `Z₀`, `X₁` and the
//! Gram matrix `YᵀY`. Writing `Y = B C`, `G₂ = B C₂` with `B` an orthonormal
//! basis of the row space of `[Z₀; X₁]` loses no feasible objective value:
//! the orthogonal remainder of `Y` only adds a PSD term to `YᵀY`, and the
//! remainder of `G₂` only adds norm. The `I_T` block then shrinks to `I_s`
//! with `s ≤ n_z + n_x`, by an orthogonal congruence.

use ddcacc_sdp::{ConicProgram, PsdBlock};
use nalgebra::{DMatrix, SVD};
use serde::{Deserialize, Serialize};

use super::SynthesisError;
use crate::datagen::DataBatch;
use crate::dynamics::LiftLayout;

/// Norm used for the `G₂` penalty.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GainNorm {
    #[default]
    Spectral,
    Frobenius,
}

/// Data and scalars defining one synthesis problem.
#[derive(Debug, Clone)]
pub struct SynthesisProblem {
    pub u0: DMatrix<f64>,
    pub z0: DMatrix<f64>,
    pub x1: DMatrix<f64>,
    /// Disturbance input matrix of the discrete model.
    pub d: DMatrix<f64>,
    /// Disturbance amplitude bound per step.
    pub delta: f64,
    pub n_x: usize,
}

impl SynthesisProblem {
    pub fn from_batch(batch: &DataBatch, delta: f64) -> Result<Self, SynthesisError> {
        batch
            .validate()
            .map_err(|e| SynthesisError::Dimension(e.to_string()))?;
        let problem = Self {
            u0: batch.u0.clone(),
            z0: batch.z0.clone(),
            x1: batch.x1.clone(),
            d: disturbance_matrix(&batch.layout, batch.t_s),
            delta,
            n_x: batch.layout.n_x(),
        };
        problem.validate()?;
        Ok(problem)
    }

    pub fn validate(&self) -> Result<(), SynthesisError> {
        let t = self.z0.ncols();
        let mismatch = |what: &str| Err(SynthesisError::Dimension(what.to_string()));
        if self.n_x == 0 || self.z0.nrows() < self.n_x {
            return mismatch("Z0 must have at least n_x rows");
        }
        if self.x1.shape() != (self.n_x, t) {
            return mismatch("X1 must be n_x × T");
        }
        if self.u0.ncols() != t {
            return mismatch("U0 must have T columns");
        }
        if self.d.nrows() != self.n_x {
            return mismatch("D must have n_x rows");
        }
        if !(self.delta.is_finite() && self.delta >= 0.0) {
            return Err(SynthesisError::InvalidSettings(format!(
                "δ = {} must be nonnegative",
                self.delta
            )));
        }
        Ok(())
    }

    pub fn samples(&self) -> usize {
        self.z0.ncols()
    }

    pub fn n_z(&self) -> usize {
        self.z0.nrows()
    }

    pub fn n_q(&self) -> usize {
        self.n_z() - self.n_x
    }

    pub fn n_w(&self) -> usize {
        self.d.ncols()
    }

    /// `δ √T`, the diagonal of `Δ`.
    pub fn delta_scale(&self) -> f64 {
        self.delta * (self.samples() as f64).sqrt()
    }

    /// Side of the full LMI with the `I_T` block.
    pub fn lmi_side(&self) -> usize {
        4 * self.n_x + 2 * self.n_w() + self.samples()
    }
}

/// `D` with a unit-jerk column per vehicle, scaled by the sample time.
pub fn disturbance_matrix(layout: &LiftLayout, t_s: f64) -> DMatrix<f64> {
    let n = layout.n_vehicles();
    let mut d = DMatrix::zeros(3 * n, n);
    for i in 0..n {
        d[(3 * i + 2, i)] = t_s;
    }
    d
}

/// Scalars fixed while assembling one program.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LmiScalars {
    pub epsilon1: f64,
    pub epsilon2: f64,
    pub lambda1: f64,
    pub lambda2: f64,
    pub norm: GainNorm,
    /// Strictness margin on `P`, `γ` and the main LMI.
    pub margin: f64,
}

/// Where each decision variable lives in the program's variable vector.
#[derive(Debug, Clone)]
pub struct VariableLayout {
    pub n_x: usize,
    pub n_q: usize,
    /// Columns of the basis `B`; `Y = B C`, `G₂ = B C₂`.
    pub basis: DMatrix<f64>,
    pub p_start: usize,
    pub c_start: usize,
    pub c2_start: usize,
    pub gamma: usize,
    pub eta: Option<usize>,
    pub n_vars: usize,
}

impl VariableLayout {
    pub fn s(&self) -> usize {
        self.basis.ncols()
    }

    /// Index of `P[i, j]` (either triangle).
    pub fn p(&self, i: usize, j: usize) -> usize {
        let (i, j) = if i <= j { (i, j) } else { (j, i) };
        // Row-major upper triangle.
        self.p_start + i * self.n_x - i * (i + 1) / 2 + j
    }

    pub fn c(&self, r: usize, col: usize) -> usize {
        self.c_start + r * self.n_x + col
    }

    pub fn c2(&self, r: usize, col: usize) -> usize {
        self.c2_start + r * self.n_q + col
    }

    pub fn unpack(&self, x: &[f64]) -> Unpacked {
        let (n_x, n_q, s) = (self.n_x, self.n_q, self.s());
        let p = DMatrix::from_fn(n_x, n_x, |i, j| x[self.p(i, j)]);
        let c = DMatrix::from_fn(s, n_x, |r, col| x[self.c(r, col)]);
        let c2 = DMatrix::from_fn(s, n_q, |r, col| x[self.c2(r, col)]);
        Unpacked {
            y: &self.basis * &c,
            g2: &self.basis * &c2,
            p,
            gamma: x[self.gamma],
            eta: self.eta.map(|i| x[i]),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Unpacked {
    pub p: DMatrix<f64>,
    pub y: DMatrix<f64>,
    pub g2: DMatrix<f64>,
    pub gamma: f64,
    pub eta: Option<f64>,
}

/// Orthonormal basis (as columns, `T × s`) of the row space of `[Z₀; X₁]`.
pub fn data_row_basis(z0: &DMatrix<f64>, x1: &DMatrix<f64>) -> DMatrix<f64> {
    let stacked = {
        let mut s = DMatrix::zeros(z0.nrows() + x1.nrows(), z0.ncols());
        s.rows_mut(0, z0.nrows()).copy_from(z0);
        s.rows_mut(z0.nrows(), x1.nrows()).copy_from(x1);
        s
    };
    // Right singular vectors of the row space via the transpose (T × m, T ≥ m typical).
    let svd = SVD::new(stacked.transpose(), true, false);
    let u = svd.u.expect("u requested");
    let sv = &svd.singular_values;
    let s_max = sv.iter().fold(0.0f64, |m, &v| m.max(v));
    let tol = stacked.nrows().max(stacked.ncols()) as f64 * f64::EPSILON * s_max;
    let keep: Vec<usize> = (0..sv.len()).filter(|&i| sv[i] > tol).collect();
    DMatrix::from_fn(u.nrows(), keep.len(), |r, c| u[(r, keep[c])])
}

#[derive(Debug, Clone)]
pub struct AssembledLmi {
    pub program: ConicProgram,
    pub layout: VariableLayout,
    /// Index of the main LMI among the program's PSD blocks.
    pub main_block: usize,
}

/// Builds the conic program. With `compress` the data-row-space reduction
/// is applied; otherwise `B = I_T` and the LMI has its full side.
pub fn assemble_lmi(
    problem: &SynthesisProblem,
    scalars: &LmiScalars,
    compress: bool,
) -> Result<AssembledLmi, SynthesisError> {
    problem.validate()?;
    if !(scalars.epsilon1 > 0.0 && scalars.epsilon2 > 0.0) {
        return Err(SynthesisError::InvalidSettings(format!(
            "ε1 = {} and ε2 = {} must be positive",
            scalars.epsilon1, scalars.epsilon2
        )));
    }
    if !(scalars.lambda1 >= 0.0 && scalars.lambda2 >= 0.0 && scalars.margin >= 0.0) {
        return Err(SynthesisError::InvalidSettings(
            "weights and margin must be nonnegative".into(),
        ));
    }
    let (n_x, n_z, n_w, t) = (problem.n_x, problem.n_z(), problem.n_w(), problem.samples());
    let n_q = n_z - n_x;
    let basis = if compress {
        data_row_basis(&problem.z0, &problem.x1)
    } else {
        DMatrix::identity(t, t)
    };
    let s = basis.ncols();
    let zr = &problem.z0 * &basis;
    let xr = &problem.x1 * &basis;

    let n_p = n_x * (n_x + 1) / 2;
    let c_start = n_p;
    let c2_start = c_start + s * n_x;
    let gamma = c2_start + s * n_q;
    let eta = (scalars.lambda2 > 0.0 && n_q > 0).then_some(gamma + 1);
    let n_vars = gamma + 1 + usize::from(eta.is_some());
    let layout = VariableLayout {
        n_x,
        n_q,
        basis,
        p_start: 0,
        c_start,
        c2_start,
        gamma,
        eta,
        n_vars,
    };

    let mut program = ConicProgram::new(n_vars);
    program.set_objective(gamma, scalars.lambda1);
    if let Some(e) = eta {
        program.set_objective(e, scalars.lambda2);
    }

    // Z₀Y = [P; 0]
    for a in 0..n_z {
        for col in 0..n_x {
            let mut row: Vec<(usize, f64)> =
                (0..s).map(|r| (layout.c(r, col), zr[(a, r)])).collect();
            if a < n_x {
                row.push((layout.p(a, col), -1.0));
            }
            program.add_equality(&row, 0.0);
        }
    }
    // Z₀G₂ = [0; I]
    for a in 0..n_z {
        for col in 0..n_q {
            let row: Vec<(usize, f64)> = (0..s).map(|r| (layout.c2(r, col), zr[(a, r)])).collect();
            program.add_equality(&row, if a == n_x + col { 1.0 } else { 0.0 });
        }
    }
    // X₁G₂ = 0
    for a in 0..n_x {
        for col in 0..n_q {
            let row: Vec<(usize, f64)> = (0..s).map(|r| (layout.c2(r, col), xr[(a, r)])).collect();
            program.add_equality(&row, 0.0);
        }
    }

    let mu = scalars.margin;
    let (e1, e2) = (scalars.epsilon1, scalars.epsilon2);
    let dl = problem.delta_scale();
    let sizes = [n_x, n_w, n_x, n_x, n_x, s, n_w];
    let mut off = [0usize; 7];
    for k in 1..7 {
        off[k] = off[k - 1] + sizes[k - 1];
    }
    let side = off[6] + n_w;
    let mut lmi = PsdBlock::new(side, "closed-loop dissipation");
    for i in 0..side {
        lmi.add_constant(i, i, -mu);
    }
    // P at (1,1), (1,3); ε̂P at (4,4); P/ε₁ at (5,5).
    for i in 0..n_x {
        for j in 0..n_x {
            let v = layout.p(i, j);
            if i <= j {
                lmi.add_term(v, off[0] + i, off[0] + j, 1.0);
                lmi.add_term(v, off[3] + i, off[3] + j, e1 / (1.0 + e1));
                lmi.add_term(v, off[4] + i, off[4] + j, 1.0 / e1);
            }
            lmi.add_term(v, off[0] + i, off[2] + j, 1.0);
        }
    }
    // γI at (2,2) and (3,3).
    for i in 0..n_w {
        lmi.add_term(gamma, off[1] + i, off[1] + i, 1.0);
    }
    for i in 0..n_x {
        lmi.add_term(gamma, off[2] + i, off[2] + i, 1.0);
    }
    // (X₁Y)ᵀ at (1,4) and Yᵀ at (1,6).
    for i in 0..n_x {
        for r in 0..s {
            let v = layout.c(r, i);
            for j in 0..n_x {
                lmi.add_term(v, off[0] + i, off[3] + j, xr[(j, r)]);
            }
            lmi.add_term(v, off[0] + i, off[5] + r, 1.0);
        }
    }
    // Dᵀ at (2,5), DΔ at (4,7).
    for i in 0..n_x {
        for j in 0..n_w {
            lmi.add_constant(off[1] + j, off[4] + i, problem.d[(i, j)]);
            lmi.add_constant(off[3] + i, off[6] + j, problem.d[(i, j)] * dl);
        }
    }
    for i in 0..s {
        lmi.add_constant(off[5] + i, off[5] + i, e2);
    }
    for i in 0..n_w {
        lmi.add_constant(off[6] + i, off[6] + i, 1.0 / e2);
    }
    let main_block = program.add_block(lmi);

    let mut p_block = PsdBlock::new(n_x, "P margin");
    for i in 0..n_x {
        p_block.add_constant(i, i, -mu);
        for j in i..n_x {
            p_block.add_term(layout.p(i, j), i, j, 1.0);
        }
    }
    program.add_block(p_block);

    let mut g_block = PsdBlock::new(1, "γ margin");
    g_block.add_constant(0, 0, -mu);
    g_block.add_term(gamma, 0, 0, 1.0);
    program.add_block(g_block);

    // B is orthonormal, so ‖G₂‖ = ‖C₂‖ in both norms.
    if let Some(e) = eta {
        match scalars.norm {
            GainNorm::Spectral => {
                let mut b = PsdBlock::new(n_q + s, "‖G2‖₂ epigraph");
                for i in 0..n_q + s {
                    b.add_term(e, i, i, 1.0);
                }
                for r in 0..s {
                    for col in 0..n_q {
                        b.add_term(layout.c2(r, col), n_q + r, col, 1.0);
                    }
                }
                program.add_block(b);
            }
            GainNorm::Frobenius => {
                let m = s * n_q;
                let mut b = PsdBlock::new(m + 1, "‖G2‖_F epigraph");
                for i in 0..=m {
                    b.add_term(e, i, i, 1.0);
                }
                for r in 0..s {
                    for col in 0..n_q {
                        b.add_term(layout.c2(r, col), 0, 1 + r * n_q + col, 1.0);
                    }
                }
                program.add_block(b);
            }
        }
    }
    Ok(AssembledLmi {
        program,
        layout,
        main_block,
    })
}

/// The main LMI matrix, full side `4n_x + 2n_w + T`, evaluated at a
/// candidate without any margin.
pub fn lmi_matrix(
    problem: &SynthesisProblem,
    p: &DMatrix<f64>,
    y: &DMatrix<f64>,
    gamma: f64,
    epsilon1: f64,
    epsilon2: f64,
) -> DMatrix<f64> {
    let (n_x, n_w, t) = (problem.n_x, problem.n_w(), problem.samples());
    let sizes = [n_x, n_w, n_x, n_x, n_x, t, n_w];
    let mut off = [0usize; 7];
    for k in 1..7 {
        off[k] = off[k - 1] + sizes[k - 1];
    }
    let side = off[6] + n_w;
    let mut m = DMatrix::zeros(side, side);
    let mut put = |bi: usize, bj: usize, blk: &DMatrix<f64>| {
        m.view_mut((off[bi], off[bj]), blk.shape()).copy_from(blk);
        if bi != bj {
            m.view_mut((off[bj], off[bi]), (blk.ncols(), blk.nrows()))
                .copy_from(&blk.transpose());
        }
    };
    let xy = &problem.x1 * y;
    let dd = &problem.d * problem.delta_scale();
    put(0, 0, p);
    put(0, 2, p);
    put(0, 3, &xy.transpose());
    put(0, 5, &y.transpose());
    put(1, 1, &(DMatrix::identity(n_w, n_w) * gamma));
    put(1, 4, &problem.d.transpose());
    put(2, 2, &(DMatrix::identity(n_x, n_x) * gamma));
    put(3, 3, &(p * (epsilon1 / (1.0 + epsilon1))));
    put(3, 6, &dd);
    put(4, 4, &(p / epsilon1));
    put(5, 5, &(DMatrix::identity(t, t) * epsilon2));
    put(6, 6, &(DMatrix::identity(n_w, n_w) / epsilon2));
    m
}
