//! Dense primal-dual interior-point method.
//!
//! Equalities are eliminated up front through an SVD of the constraint
//! matrix (`x = x₀ + N z`), so the returned point satisfies them to rounding
//! error. The remaining LMI problem in the free coordinates `z` is solved in
//! the standard dual form
//!
//! ```text
//! max bᵀy   s.t.  S = C − Σⱼ yⱼ Aⱼ ⪰ 0
//! min ⟨C,X⟩ s.t.  ⟨Aⱼ,X⟩ = bⱼ,  X ⪰ 0
//! ```
//!
//! with the HKM search direction and Mehrotra predictor-corrector steps,
//! starting from an infeasible interior point.

use log::debug;
use nalgebra::{DMatrix, DVector, SVD};

use crate::linalg::{max_step, min_eigenvalue, spd_inverse, symmetric_from_row_major};
use crate::{ConicProgram, ConicSolver, Solution, SolveStatus, SolverError};

#[derive(Debug, Clone)]
pub struct InteriorPoint {
    pub max_iterations: usize,
    /// Target for the relative duality gap and block residual.
    pub tolerance: f64,
    /// Fraction of the distance to the cone boundary taken per step.
    pub step_fraction: f64,
}

impl Default for InteriorPoint {
    fn default() -> Self {
        Self {
            max_iterations: 120,
            tolerance: 1e-8,
            step_fraction: 0.95,
        }
    }
}

struct Reduction {
    x0: DVector<f64>,
    /// Null-space basis of the equality matrix; `None` means identity.
    basis: Option<DMatrix<f64>>,
}

impl Reduction {
    fn n_free(&self, n_vars: usize) -> usize {
        self.basis.as_ref().map_or(n_vars, |b| b.ncols())
    }

    fn expand(&self, z: &DVector<f64>) -> DVector<f64> {
        match &self.basis {
            Some(b) => &self.x0 + b * z,
            None => &self.x0 + z,
        }
    }
}

enum Elimination {
    Reduced(Reduction),
    Inconsistent(f64),
}

fn eliminate(program: &ConicProgram) -> Elimination {
    let n = program.n_vars();
    let eq = program.equalities();
    if eq.n_rows == 0 {
        return Elimination::Reduced(Reduction {
            x0: DVector::zeros(n),
            basis: None,
        });
    }
    // Pad to at least n rows so the SVD yields a complete right basis.
    let rows = eq.n_rows.max(n);
    let mut a = DMatrix::<f64>::zeros(rows, n);
    for t in &eq.triplets {
        a[(t.row, t.col)] += t.value;
    }
    let mut b = DVector::<f64>::zeros(rows);
    for (i, v) in eq.rhs.iter().enumerate() {
        b[i] = *v;
    }
    let svd = SVD::new(a.clone(), true, true);
    let u = svd.u.as_ref().expect("u requested");
    let v_t = svd.v_t.as_ref().expect("v_t requested");
    let sigma = &svd.singular_values;
    let s_max = sigma.iter().fold(0.0f64, |m, &s| m.max(s));
    let cutoff = rows.max(n) as f64 * f64::EPSILON * s_max;

    let mut x0 = DVector::<f64>::zeros(n);
    let mut null_rows = Vec::new();
    for i in 0..sigma.len() {
        if sigma[i] > cutoff && s_max > 0.0 {
            let coef = u.column(i).dot(&b) / sigma[i];
            x0 += v_t.row(i).transpose() * coef;
        } else {
            null_rows.push(i);
        }
    }
    let residual = (&a * &x0 - &b).amax();
    let scale = 1.0 + b.amax() + s_max * x0.amax();
    if residual > 1e-9 * scale {
        return Elimination::Inconsistent(residual);
    }
    let mut basis = DMatrix::<f64>::zeros(n, null_rows.len());
    for (j, &i) in null_rows.iter().enumerate() {
        basis.set_column(j, &v_t.row(i).transpose());
    }
    Elimination::Reduced(Reduction {
        x0,
        basis: Some(basis),
    })
}

/// LMI problem in dual standard form over the free coordinates.
struct DualForm {
    c: Vec<DMatrix<f64>>,
    /// `a[j][k]`: coefficient of `y_j` in block `k`.
    a: Vec<Vec<DMatrix<f64>>>,
    active: Vec<Vec<bool>>,
    b: DVector<f64>,
}

impl DualForm {
    fn m(&self) -> usize {
        self.b.len()
    }

    fn a_op(&self, xs: &[DMatrix<f64>]) -> DVector<f64> {
        DVector::from_iterator(
            self.m(),
            (0..self.m()).map(|j| {
                (0..xs.len())
                    .filter(|&k| self.active[j][k])
                    .map(|k| self.a[j][k].dot(&xs[k]))
                    .sum()
            }),
        )
    }

    fn a_adj(&self, y: &DVector<f64>) -> Vec<DMatrix<f64>> {
        let mut out: Vec<DMatrix<f64>> = self
            .c
            .iter()
            .map(|c| DMatrix::zeros(c.nrows(), c.ncols()))
            .collect();
        for j in 0..self.m() {
            if y[j] == 0.0 {
                continue;
            }
            for (k, o) in out.iter_mut().enumerate() {
                if self.active[j][k] {
                    *o += &self.a[j][k] * y[j];
                }
            }
        }
        out
    }
}

fn build_dual_form(
    program: &ConicProgram,
    red: &Reduction,
) -> (DualForm, Vec<usize>, Option<usize>) {
    let n_free = red.n_free(program.n_vars());
    let blocks = program.blocks();
    let mut c = Vec::with_capacity(blocks.len());
    let mut a: Vec<Vec<DMatrix<f64>>> = (0..n_free)
        .map(|_| {
            blocks
                .iter()
                .map(|b| DMatrix::zeros(b.size(), b.size()))
                .collect()
        })
        .collect();
    for (k, blk) in blocks.iter().enumerate() {
        let x0: Vec<f64> = red.x0.iter().copied().collect();
        c.push(symmetric_from_row_major(blk.size(), &blk.evaluate(&x0)));
        for (var, t) in blk.term_entries() {
            let mut put = |j: usize, v: f64| {
                let m = &mut a[j][k];
                m[(t.row, t.col)] -= v;
                if t.row != t.col {
                    m[(t.col, t.row)] -= v;
                }
            };
            match &red.basis {
                Some(basis) => {
                    for j in 0..n_free {
                        let w = basis[(var, j)];
                        if w != 0.0 {
                            put(j, w * t.value);
                        }
                    }
                }
                None => put(var, t.value),
            }
        }
    }
    let cost = DVector::from_column_slice(program.objective());
    let b_full: DVector<f64> = match &red.basis {
        Some(basis) => -(basis.transpose() * &cost),
        None => -cost,
    };

    // Drop coordinates that no block depends on.
    let scale = a
        .iter()
        .flat_map(|row| row.iter().map(|m| m.amax()))
        .fold(0.0f64, f64::max);
    let mut keep = Vec::new();
    let mut unbounded = None;
    for (j, row) in a.iter().enumerate() {
        let mx = row.iter().map(|m| m.amax()).fold(0.0f64, f64::max);
        if mx > 1e-13 * scale.max(1e-300) {
            keep.push(j);
        } else if b_full[j].abs() > 1e-12 * (1.0 + b_full.amax()) {
            unbounded = Some(j);
        }
    }
    let mut a_kept = Vec::with_capacity(keep.len());
    let mut a_iter: Vec<Option<Vec<DMatrix<f64>>>> = a.into_iter().map(Some).collect();
    for &j in &keep {
        a_kept.push(a_iter[j].take().expect("each column kept once"));
    }
    let active = a_kept
        .iter()
        .map(|row| row.iter().map(|m| m.amax() > 0.0).collect())
        .collect();
    let b = DVector::from_iterator(keep.len(), keep.iter().map(|&j| b_full[j]));
    (
        DualForm {
            c,
            a: a_kept,
            active,
            b,
        },
        keep,
        unbounded,
    )
}

struct CoreOutcome {
    status: SolveStatus,
    y: DVector<f64>,
    iterations: usize,
    rp: f64,
    rd: f64,
    gap: f64,
}

fn frob_all(a: &[DMatrix<f64>], b: &[DMatrix<f64>]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x.dot(y)).sum()
}

fn symmetrize(m: DMatrix<f64>) -> DMatrix<f64> {
    (&m + m.transpose()) * 0.5
}

fn solve_schur(m: &DMatrix<f64>, rhs: &DVector<f64>) -> Option<DVector<f64>> {
    if let Some(ch) = m.clone().cholesky() {
        let mut x = ch.solve(rhs);
        // one round of iterative refinement
        let r = rhs - m * &x;
        x += ch.solve(&r);
        return Some(x);
    }
    let reg = 1e-14 * m.diagonal().amax().max(1e-300);
    let shifted = m + DMatrix::identity(m.nrows(), m.ncols()) * reg;
    if let Some(ch) = shifted.cholesky() {
        return Some(ch.solve(rhs));
    }
    m.clone().lu().solve(rhs)
}

impl InteriorPoint {
    fn run(&self, p: &DualForm) -> CoreOutcome {
        let nb = p.c.len();
        let m = p.m();
        let n_total: usize = p.c.iter().map(|c| c.nrows()).sum();
        let c_norm = p.c.iter().map(|c| c.norm()).fold(0.0f64, f64::max);
        let b_norm = p.b.norm();

        let scale = 10.0 * p.c.iter().map(|c| c.amax()).fold(1.0f64, f64::max);
        let xs0: Vec<DMatrix<f64>> =
            p.c.iter()
                .map(|c| DMatrix::identity(c.nrows(), c.nrows()) * scale)
                .collect();
        let mut xs = xs0.clone();
        let mut ss = xs0;
        let mut y = DVector::<f64>::zeros(m);

        let mut best: Option<(f64, DVector<f64>, f64, f64, f64)> = None;
        let mut best_at = 0usize;
        let mut iterations = self.max_iterations;
        let mut last = (f64::INFINITY, f64::INFINITY, f64::INFINITY);
        let mut stall = 0usize;

        for it in 0..self.max_iterations {
            let aty = p.a_adj(&y);
            let rd_m: Vec<DMatrix<f64>> = (0..nb).map(|k| &p.c[k] - &ss[k] - &aty[k]).collect();
            let rp_v = &p.b - p.a_op(&xs);
            let mu = frob_all(&xs, &ss) / n_total as f64;
            let pobj = frob_all(&p.c, &xs);
            let dobj = p.b.dot(&y);
            let rp = rp_v.norm() / (1.0 + b_norm);
            let rd = rd_m.iter().map(|r| r.norm()).fold(0.0f64, f64::max) / (1.0 + c_norm);
            let gap = (pobj - dobj).abs() / (1.0 + pobj.abs() + dobj.abs());
            debug!("it {it:3} pobj {pobj:+.6e} dobj {dobj:+.6e} rp {rp:.1e} rd {rd:.1e} gap {gap:.1e} mu {mu:.1e}");

            if gap < self.tolerance && rd < self.tolerance && rp < self.tolerance.sqrt() {
                return CoreOutcome {
                    status: SolveStatus::Optimal,
                    y,
                    iterations: it,
                    rp,
                    rd,
                    gap,
                };
            }
            if rd < self.tolerance.sqrt() * 1e-2 {
                let score = gap.max(rd);
                if best.as_ref().is_none_or(|b| score < 0.5 * b.0) {
                    best_at = it;
                }
                if best.as_ref().is_none_or(|b| score < b.0) {
                    best = Some((score, y.clone(), rp, rd, gap));
                }
            }

            // Farkas certificate for an empty LMI: X ⪰ 0, A(X) ≈ 0, ⟨C,X⟩ < 0.
            let tr_x: f64 = xs.iter().map(|x| x.trace()).sum();
            if tr_x > 1e8 {
                let cert = pobj / tr_x;
                let a_res = p.a_op(&xs).norm() / tr_x;
                if cert < -1e-9 * (1.0 + c_norm) && a_res < 1e-6 {
                    return CoreOutcome {
                        status: SolveStatus::Infeasible,
                        y,
                        iterations: it,
                        rp,
                        rd,
                        gap,
                    };
                }
            }
            if y.amax() > 1e14 {
                return CoreOutcome {
                    status: SolveStatus::Unbounded,
                    y,
                    iterations: it,
                    rp,
                    rd,
                    gap,
                };
            }

            let progress = gap.max(rd) < 0.9 * last.0.max(last.1) || rp < 0.5 * last.2;
            stall = if progress { 0 } else { stall + 1 };
            last = (gap, rd, rp);
            if stall >= 8 || (best.is_some() && it >= best_at + 10) {
                iterations = it;
                break;
            }

            let Some(step) = self.newton_step(p, &xs, &ss, &rd_m, mu) else {
                iterations = it;
                break;
            };
            let (dx, dy, ds) = step;
            let ap = (0..nb)
                .map(|k| max_step(&xs[k], &dx[k], f64::INFINITY))
                .try_fold(f64::INFINITY, |acc, v| v.map(|v| acc.min(v)));
            let ad = (0..nb)
                .map(|k| max_step(&ss[k], &ds[k], f64::INFINITY))
                .try_fold(f64::INFINITY, |acc, v| v.map(|v| acc.min(v)));
            let (Some(ap), Some(ad)) = (ap, ad) else {
                iterations = it;
                break;
            };
            let ap = (self.step_fraction * ap).min(1.0);
            let ad = (self.step_fraction * ad).min(1.0);
            for k in 0..nb {
                xs[k] = symmetrize(&xs[k] + &dx[k] * ap);
                ss[k] = symmetrize(&ss[k] + &ds[k] * ad);
            }
            y.axpy(ad, &dy, 1.0);
        }

        match best {
            Some((_, y, rp, rd, gap)) if gap < 1e-5 => CoreOutcome {
                status: SolveStatus::Inaccurate,
                y,
                iterations,
                rp,
                rd,
                gap,
            },
            _ => CoreOutcome {
                status: SolveStatus::MaxIterations,
                y,
                iterations,
                rp: f64::NAN,
                rd: f64::NAN,
                gap: f64::NAN,
            },
        }
    }

    /// Mehrotra predictor-corrector HKM direction.
    #[allow(clippy::type_complexity)]
    fn newton_step(
        &self,
        p: &DualForm,
        xs: &[DMatrix<f64>],
        ss: &[DMatrix<f64>],
        rd: &[DMatrix<f64>],
        mu: f64,
    ) -> Option<(Vec<DMatrix<f64>>, DVector<f64>, Vec<DMatrix<f64>>)> {
        let nb = xs.len();
        let m = p.m();
        let s_inv: Vec<DMatrix<f64>> = ss.iter().map(spd_inverse).collect::<Option<_>>()?;

        let mut schur = DMatrix::<f64>::zeros(m, m);
        for k in 0..nb {
            for j in 0..m {
                if !p.active[j][k] {
                    continue;
                }
                let g = &xs[k] * &p.a[j][k] * &s_inv[k];
                for i in 0..=j {
                    if p.active[i][k] {
                        schur[(i, j)] += p.a[i][k].dot(&g);
                    }
                }
            }
        }
        // Only the upper triangle was accumulated.
        for j in 0..m {
            for i in 0..j {
                schur[(j, i)] = schur[(i, j)];
            }
        }
        if schur.iter().any(|v| !v.is_finite()) {
            return None;
        }

        let x_rd_sinv: Vec<DMatrix<f64>> = (0..nb).map(|k| &xs[k] * &rd[k] * &s_inv[k]).collect();
        let base_rhs = &p.b + p.a_op(&x_rd_sinv);

        let direction = |sigma: f64,
                         corr: Option<&Vec<DMatrix<f64>>>|
         -> Option<(Vec<DMatrix<f64>>, DVector<f64>, Vec<DMatrix<f64>>)> {
            let mut target: Vec<DMatrix<f64>> = s_inv.iter().map(|s| s * (sigma * mu)).collect();
            if let Some(c) = corr {
                for k in 0..nb {
                    target[k] -= &c[k];
                }
            }
            let rhs = &base_rhs - p.a_op(&target);
            let dy = solve_schur(&schur, &rhs)?;
            let aty = p.a_adj(&dy);
            let ds: Vec<DMatrix<f64>> = (0..nb).map(|k| &rd[k] - &aty[k]).collect();
            let dx: Vec<DMatrix<f64>> = (0..nb)
                .map(|k| symmetrize(&target[k] - &xs[k] - &xs[k] * &ds[k] * &s_inv[k]))
                .collect();
            Some((dx, dy, ds))
        };

        let (dx_a, _, ds_a) = direction(0.0, None)?;
        let mut ap = 1.0f64;
        let mut ad = 1.0f64;
        for k in 0..nb {
            ap = ap.min(max_step(&xs[k], &dx_a[k], 1.0)?);
            ad = ad.min(max_step(&ss[k], &ds_a[k], 1.0)?);
        }
        let n_total: usize = xs.iter().map(|x| x.nrows()).sum();
        let mut mu_aff = 0.0;
        for k in 0..nb {
            mu_aff += (&xs[k] + &dx_a[k] * ap).dot(&(&ss[k] + &ds_a[k] * ad));
        }
        mu_aff /= n_total as f64;
        let sigma = (mu_aff / mu).clamp(0.0, 1.0).powi(3);
        let corr: Vec<DMatrix<f64>> = (0..nb).map(|k| &dx_a[k] * &ds_a[k] * &s_inv[k]).collect();
        direction(sigma, Some(&corr))
    }
}

impl ConicSolver for InteriorPoint {
    fn name(&self) -> &str {
        "native-hkm-ipm"
    }

    fn solve(&self, program: &ConicProgram) -> Result<Solution, SolverError> {
        program.validate()?;
        let n = program.n_vars();
        let red = match eliminate(program) {
            Elimination::Reduced(r) => r,
            Elimination::Inconsistent(res) => {
                debug!("equalities inconsistent, residual {res:.3e}");
                return Ok(finish(
                    program,
                    SolveStatus::Infeasible,
                    vec![0.0; n],
                    0,
                    NAN3,
                ));
            }
        };
        let (dual, keep, unbounded) = build_dual_form(program, &red);
        if let Some(j) = unbounded {
            debug!("free coordinate {j} appears in no block but carries cost");
            let x: Vec<f64> = red.x0.iter().copied().collect();
            return Ok(finish(program, SolveStatus::Unbounded, x, 0, NAN3));
        }

        let outcome = if dual.m() == 0 {
            CoreOutcome {
                status: SolveStatus::Optimal,
                y: DVector::zeros(0),
                iterations: 0,
                rp: 0.0,
                rd: 0.0,
                gap: 0.0,
            }
        } else {
            self.run(&dual)
        };
        let mut z = DVector::<f64>::zeros(red.n_free(n));
        for (i, &j) in keep.iter().enumerate() {
            z[j] = outcome.y[i];
        }
        let x: Vec<f64> = red.expand(&z).iter().copied().collect();
        let mut status = outcome.status;
        if dual.m() == 0 {
            // Nothing to optimize; feasibility is decided by the constant blocks.
            let worst = program
                .blocks()
                .iter()
                .map(|b| min_eigenvalue(&symmetric_from_row_major(b.size(), &b.evaluate(&x))))
                .fold(f64::INFINITY, f64::min);
            if worst < 0.0 {
                status = SolveStatus::Infeasible;
            }
        }
        Ok(finish(
            program,
            status,
            x,
            outcome.iterations,
            (outcome.rp, outcome.rd, outcome.gap),
        ))
    }
}

const NAN3: (f64, f64, f64) = (f64::NAN, f64::NAN, f64::NAN);

fn finish(
    program: &ConicProgram,
    status: SolveStatus,
    x: Vec<f64>,
    iterations: usize,
    (rp, rd, gap): (f64, f64, f64),
) -> Solution {
    let block_min_eigenvalues = program
        .blocks()
        .iter()
        .map(|b| min_eigenvalue(&symmetric_from_row_major(b.size(), &b.evaluate(&x))))
        .collect();
    Solution {
        status,
        objective: program.objective_value(&x),
        equality_residual: program.equality_residual(&x),
        x,
        iterations,
        multiplier_residual: rp,
        block_residual: rd,
        relative_gap: gap,
        block_min_eigenvalues,
    }
}
