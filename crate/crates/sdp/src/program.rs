//! Solver-agnostic description of a linear conic program over the
//! positive semidefinite cone:
//!
//! ```text
//! minimize    cᵀx
//! subject to  A x = b
//!             F₀ᵏ + Σᵢ xᵢ Fᵢᵏ ⪰ 0     for every block k
//! ```
//!
//! Matrices are given as sparse triplets. PSD block entries are symmetric;
//! only one triangle needs to be supplied and `(r, c)` / `(c, r)` refer to
//! the same entry.

use std::collections::BTreeMap;

use crate::SolverError;

/// One nonzero entry of a sparse matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Triplet {
    pub row: usize,
    pub col: usize,
    pub value: f64,
}

/// Linear equality constraints `A x = b` in triplet form.
#[derive(Debug, Clone, Default)]
pub struct Equalities {
    pub n_rows: usize,
    pub triplets: Vec<Triplet>,
    pub rhs: Vec<f64>,
}

/// An affine symmetric matrix `F₀ + Σᵢ xᵢ Fᵢ` constrained to be PSD.
#[derive(Debug, Clone)]
pub struct PsdBlock {
    size: usize,
    label: String,
    constant: BTreeMap<(usize, usize), f64>,
    terms: BTreeMap<(usize, usize, usize), f64>,
}

impl PsdBlock {
    pub fn new(size: usize, label: impl Into<String>) -> Self {
        Self {
            size,
            label: label.into(),
            constant: BTreeMap::new(),
            terms: BTreeMap::new(),
        }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    fn key(r: usize, c: usize) -> (usize, usize) {
        if r <= c {
            (r, c)
        } else {
            (c, r)
        }
    }

    /// Adds `value` to the constant entry `(r, c)` (and its mirror).
    pub fn add_constant(&mut self, r: usize, c: usize, value: f64) {
        if value == 0.0 {
            return;
        }
        *self.constant.entry(Self::key(r, c)).or_insert(0.0) += value;
    }

    /// Adds `value · x[var]` to entry `(r, c)` (and its mirror).
    pub fn add_term(&mut self, var: usize, r: usize, c: usize, value: f64) {
        if value == 0.0 {
            return;
        }
        let (r, c) = Self::key(r, c);
        *self.terms.entry((var, r, c)).or_insert(0.0) += value;
    }

    /// Upper-triangle entries of the constant matrix.
    pub fn constant_entries(&self) -> impl Iterator<Item = Triplet> + '_ {
        self.constant
            .iter()
            .map(|(&(row, col), &value)| Triplet { row, col, value })
    }

    /// Upper-triangle entries of every coefficient matrix, tagged with the
    /// variable index they multiply.
    pub fn term_entries(&self) -> impl Iterator<Item = (usize, Triplet)> + '_ {
        self.terms
            .iter()
            .map(|(&(var, row, col), &value)| (var, Triplet { row, col, value }))
    }

    /// Evaluates the affine matrix at `x` as a dense row-major vector of
    /// length `size²`.
    pub fn evaluate(&self, x: &[f64]) -> Vec<f64> {
        let n = self.size;
        let mut out = vec![0.0; n * n];
        let mut put = |r: usize, c: usize, v: f64| {
            out[r * n + c] += v;
            if r != c {
                out[c * n + r] += v;
            }
        };
        for t in self.constant_entries() {
            put(t.row, t.col, t.value);
        }
        for (var, t) in self.term_entries() {
            put(t.row, t.col, t.value * x[var]);
        }
        out
    }
}

/// A complete conic program handed to a [`crate::ConicSolver`].
#[derive(Debug, Clone)]
pub struct ConicProgram {
    n_vars: usize,
    objective: Vec<f64>,
    equalities: Equalities,
    blocks: Vec<PsdBlock>,
}

impl ConicProgram {
    pub fn new(n_vars: usize) -> Self {
        Self {
            n_vars,
            objective: vec![0.0; n_vars],
            equalities: Equalities::default(),
            blocks: Vec::new(),
        }
    }

    pub fn n_vars(&self) -> usize {
        self.n_vars
    }

    pub fn objective(&self) -> &[f64] {
        &self.objective
    }

    pub fn set_objective(&mut self, var: usize, coef: f64) {
        self.objective[var] = coef;
    }

    pub fn equalities(&self) -> &Equalities {
        &self.equalities
    }

    pub fn blocks(&self) -> &[PsdBlock] {
        &self.blocks
    }

    pub fn block_mut(&mut self, index: usize) -> &mut PsdBlock {
        &mut self.blocks[index]
    }

    /// Adds the row `Σ coefs · x = rhs`. Repeated variables are summed.
    pub fn add_equality(&mut self, coefs: &[(usize, f64)], rhs: f64) -> usize {
        let row = self.equalities.n_rows;
        for &(col, value) in coefs {
            if value != 0.0 {
                self.equalities.triplets.push(Triplet { row, col, value });
            }
        }
        self.equalities.rhs.push(rhs);
        self.equalities.n_rows += 1;
        row
    }

    pub fn add_block(&mut self, block: PsdBlock) -> usize {
        self.blocks.push(block);
        self.blocks.len() - 1
    }

    /// Checks indices against the declared dimensions.
    pub fn validate(&self) -> Result<(), SolverError> {
        if self.objective.len() != self.n_vars {
            return Err(SolverError::Malformed(format!(
                "objective has {} entries for {} variables",
                self.objective.len(),
                self.n_vars
            )));
        }
        for t in &self.equalities.triplets {
            if t.row >= self.equalities.n_rows || t.col >= self.n_vars {
                return Err(SolverError::Malformed(format!(
                    "equality triplet ({}, {}) out of range",
                    t.row, t.col
                )));
            }
        }
        if self.equalities.rhs.len() != self.equalities.n_rows {
            return Err(SolverError::Malformed(
                "equality rhs length mismatch".into(),
            ));
        }
        for b in &self.blocks {
            for t in b.constant_entries() {
                if t.col >= b.size {
                    return Err(SolverError::Malformed(format!(
                        "block '{}' constant entry ({}, {}) outside size {}",
                        b.label, t.row, t.col, b.size
                    )));
                }
            }
            for (var, t) in b.term_entries() {
                if var >= self.n_vars || t.col >= b.size {
                    return Err(SolverError::Malformed(format!(
                        "block '{}' term (x{}, {}, {}) out of range",
                        b.label, var, t.row, t.col
                    )));
                }
            }
        }
        Ok(())
    }

    /// Largest absolute equality residual `|A x − b|∞`.
    pub fn equality_residual(&self, x: &[f64]) -> f64 {
        let mut r: Vec<f64> = self.equalities.rhs.iter().map(|v| -v).collect();
        for t in &self.equalities.triplets {
            r[t.row] += t.value * x[t.col];
        }
        r.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective.iter().zip(x).map(|(c, v)| c * v).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mirrored_entries_accumulate() {
        let mut b = PsdBlock::new(2, "t");
        b.add_constant(0, 1, 1.0);
        b.add_constant(1, 0, 2.0);
        b.add_term(0, 1, 1, 3.0);
        let m = b.evaluate(&[2.0]);
        assert_eq!(m, vec![0.0, 3.0, 3.0, 6.0]);
    }

    #[test]
    fn validate_catches_out_of_range() {
        let mut p = ConicProgram::new(1);
        let mut b = PsdBlock::new(2, "bad");
        b.add_term(3, 0, 0, 1.0);
        p.add_block(b);
        assert!(p.validate().is_err());
    }

    #[test]
    fn equality_residual() {
        let mut p = ConicProgram::new(2);
        p.add_equality(&[(0, 1.0), (1, 1.0)], 3.0);
        assert_eq!(p.equality_residual(&[1.0, 2.0]), 0.0);
        assert_eq!(p.equality_residual(&[1.0, 1.0]), 1.0);
    }
}
