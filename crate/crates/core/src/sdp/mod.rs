//! Small dense semidefinite programs:
//!
//! ```text
//! minimize    c^T v
//! subject to  A v = b
//!             F_j(v) = F_j0 + sum_i v_i F_ji  is PSD for every block j
//! ```

mod dump;
mod eig;
mod solver;

use nalgebra::{DMatrix, DVector};

use crate::error::{check_dim, Error, Result};

pub use dump::{parse_dump, write_dump};
pub use eig::{eig_floor, symmetric_eigenvalues};
pub use solver::{solve_sdp, IterateRecord, SdpOptions, SdpSolution, SdpStatus};

/// Largest block size accepted by [`SdpProblem::validate`].
pub const MAX_BLOCK_SIZE: usize = 32;

/// One affine matrix constraint `F0 + sum v_i F_i`, storing only the
/// variables that actually enter the block.
#[derive(Clone, Debug, PartialEq)]
pub struct PsdBlock {
    pub constant: DMatrix<f64>,
    pub terms: Vec<(usize, DMatrix<f64>)>,
}

impl PsdBlock {
    pub fn new(size: usize) -> Self {
        PsdBlock {
            constant: DMatrix::zeros(size, size),
            terms: Vec::new(),
        }
    }

    pub fn size(&self) -> usize {
        self.constant.nrows()
    }

    fn term_mut(&mut self, var: usize) -> &mut DMatrix<f64> {
        let pos = match self.terms.binary_search_by_key(&var, |(v, _)| *v) {
            Ok(p) => p,
            Err(p) => {
                let n = self.size();
                self.terms.insert(p, (var, DMatrix::zeros(n, n)));
                p
            }
        };
        &mut self.terms[pos].1
    }

    /// Adds `value` to entries `(i, j)` and `(j, i)` of the matrix multiplying
    /// `var` (`None` for the constant), once if `i == j`.
    pub fn add_entry(&mut self, var: Option<usize>, i: usize, j: usize, value: f64) {
        let m = match var {
            None => &mut self.constant,
            Some(v) => self.term_mut(v),
        };
        m[(i, j)] += value;
        if i != j {
            m[(j, i)] += value;
        }
    }

    pub fn evaluate(&self, v: &DVector<f64>) -> DMatrix<f64> {
        let mut out = self.constant.clone();
        for (i, m) in &self.terms {
            out += m * v[*i];
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SdpProblem {
    pub c: DVector<f64>,
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
    pub blocks: Vec<PsdBlock>,
}

impl SdpProblem {
    pub fn new(num_vars: usize) -> Self {
        SdpProblem {
            c: DVector::zeros(num_vars),
            a: DMatrix::zeros(0, num_vars),
            b: DVector::zeros(0),
            blocks: Vec::new(),
        }
    }

    pub fn num_vars(&self) -> usize {
        self.c.len()
    }

    pub fn num_equalities(&self) -> usize {
        self.a.nrows()
    }

    /// Appends `sum coeff * v_var = rhs`.
    pub fn add_equality(&mut self, coeffs: &[(usize, f64)], rhs: f64) {
        let n = self.num_vars();
        let p = self.a.nrows();
        let a = std::mem::replace(&mut self.a, DMatrix::zeros(0, 0));
        self.a = a.insert_row(p, 0.0);
        for &(j, v) in coeffs {
            assert!(j < n, "equality references variable {j} of {n}");
            self.a[(p, j)] += v;
        }
        let b = std::mem::replace(&mut self.b, DVector::zeros(0));
        self.b = b.push(rhs);
    }

    pub fn add_block(&mut self, block: PsdBlock) -> usize {
        self.blocks.push(block);
        self.blocks.len() - 1
    }

    pub fn objective(&self, v: &DVector<f64>) -> f64 {
        self.c.dot(v)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.num_vars();
        check_dim("equality matrix columns", n, self.a.ncols())?;
        check_dim("equality right-hand side", self.a.nrows(), self.b.len())?;
        let finite = |m: &DMatrix<f64>| m.iter().all(|v| v.is_finite());
        if !self.c.iter().all(|v| v.is_finite()) || !finite(&self.a) || !self.b.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("SDP data"));
        }
        for (j, blk) in self.blocks.iter().enumerate() {
            let s = blk.size();
            if s == 0 || s > MAX_BLOCK_SIZE || blk.constant.ncols() != s {
                return Err(Error::contract(format!("block {j} has invalid size {s}")));
            }
            let mats = std::iter::once(&blk.constant).chain(blk.terms.iter().map(|(_, m)| m));
            for m in mats {
                if m.nrows() != s || m.ncols() != s || !finite(m) {
                    return Err(Error::contract(format!("block {j} has a malformed matrix")));
                }
                if (m - m.transpose()).amax() > 0.0 {
                    return Err(Error::contract(format!("block {j} has a non-symmetric matrix")));
                }
            }
            if blk.terms.iter().any(|(i, _)| *i >= n) {
                return Err(Error::contract(format!("block {j} references an unknown variable")));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gram2(coeffs: [f64; 3]) -> SdpProblem {
        // z = (y1, y2), q = (q11, q12, q22)
        let mut p = SdpProblem::new(3);
        p.add_equality(&[(0, 1.0)], coeffs[0]);
        p.add_equality(&[(1, 2.0)], coeffs[1]);
        p.add_equality(&[(2, 1.0)], coeffs[2]);
        let mut q = PsdBlock::new(2);
        q.add_entry(Some(0), 0, 0, 1.0);
        q.add_entry(Some(1), 0, 1, 1.0);
        q.add_entry(Some(2), 1, 1, 1.0);
        p.add_block(q);
        p
    }

    #[test]
    fn two_by_two_minimum() {
        let mut p = SdpProblem::new(1);
        p.c[0] = 1.0;
        let mut blk = PsdBlock::new(2);
        blk.add_entry(Some(0), 0, 0, 1.0);
        blk.add_entry(Some(0), 1, 1, 1.0);
        blk.add_entry(None, 0, 1, 1.0);
        p.add_block(blk);
        let s = solve_sdp(&p, &SdpOptions::default()).unwrap();
        assert_eq!(s.status, SdpStatus::Optimal, "{}", s.message);
        assert!((s.v[0] - 1.0).abs() < 1e-6, "{}", s.v[0]);
    }

    #[test]
    fn perfect_square_gram() {
        let s = solve_sdp(&gram2([1.0, 2.0, 1.0]), &SdpOptions::default()).unwrap();
        assert_eq!(s.status, SdpStatus::Optimal, "{}", s.message);
        assert!((s.v[1] - 1.0).abs() < 1e-7);
        assert!(s.min_eigenvalues[0] >= -1e-7);
    }

    #[test]
    fn negative_square_rejected() {
        let s = solve_sdp(&gram2([-1.0, 0.0, 0.0]), &SdpOptions::default()).unwrap();
        assert_eq!(s.status, SdpStatus::Infeasible, "{} after {}", s.message, s.iterations);
    }

    #[test]
    fn schur_epigraph() {
        // v = (u, delta)
        let mut p = SdpProblem::new(2);
        p.c[1] = 1.0;
        p.add_equality(&[(0, 1.0)], 2.0);
        let mut blk = PsdBlock::new(2);
        blk.add_entry(None, 0, 0, 1.0);
        blk.add_entry(Some(0), 0, 1, 1.0);
        blk.add_entry(Some(1), 1, 1, 1.0);
        p.add_block(blk);
        let s = solve_sdp(&p, &SdpOptions::default()).unwrap();
        assert_eq!(s.status, SdpStatus::Optimal);
        assert!((s.v[1] - 4.0).abs() < 1e-6, "{}", s.v[1]);
    }

    #[test]
    fn dependent_and_inconsistent_rows() {
        let mut p = gram2([1.0, 2.0, 1.0]);
        p.add_equality(&[(0, 2.0)], 2.0);
        let s = solve_sdp(&p, &SdpOptions::default()).unwrap();
        assert_eq!(s.status, SdpStatus::Optimal);
        p.add_equality(&[(0, 1.0)], 3.0);
        let s = solve_sdp(&p, &SdpOptions::default()).unwrap();
        assert_eq!(s.status, SdpStatus::Infeasible);
    }

    #[test]
    fn validation_rejects_asymmetric_block() {
        let mut p = SdpProblem::new(1);
        let mut blk = PsdBlock::new(2);
        blk.constant[(0, 1)] = 1.0;
        p.add_block(blk);
        assert!(p.validate().is_err());
    }
}
