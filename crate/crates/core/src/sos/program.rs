//! Gram-matrix encoding of the sum-of-squares filter program.
//!
//! For a fixed state the extent condition is a polynomial in `y` whose
//! coefficients are affine in the input `u`. The program looks for `u`, a
//! Gram matrix `Q` and a multiplier Gram matrix `S` with
//!
//! ```text
//! p(y; u) - s(y) h(y) = z(y)^T Q z(y),   s(y) = w(y)^T S w(y),   Q, S PSD
//! ```
//!
//! and minimizes `delta` subject to the epigraph block
//! `[[I, u], [u^T, delta + 2 k^T u - k^T k]]` being PSD, i.e.
//! `delta >= |u - k|^2`. A second block `[[M I, u], [u^T, M]]` keeps
//! `|u| <= M`.

use nalgebra::{DMatrix, DVector};

use super::{Monomial, MultiPoly};
use crate::dynamics::ControlAffineSystem;
use crate::error::{check_dim, Error, Result};
use crate::geometry::{ExtentFunction, SafeFunction};
use crate::safety_filters::ClassK;
use crate::sdp::{eig_floor, solve_sdp, PsdBlock, SdpOptions, SdpProblem, SdpSolution, SdpStatus};

/// A polynomial in `y` whose coefficients are affine in `u`:
/// `constant(y) + sum_j u_j channels[j](y)`.
#[derive(Clone, Debug)]
pub struct AffinePoly {
    pub constant: MultiPoly,
    pub channels: Vec<MultiPoly>,
}

impl AffinePoly {
    pub fn degree(&self) -> u32 {
        self.channels
            .iter()
            .map(MultiPoly::degree)
            .fold(self.constant.degree(), u32::max)
    }

    pub fn at(&self, u: &[f64]) -> MultiPoly {
        let mut p = self.constant.clone();
        for (c, uj) in self.channels.iter().zip(u) {
            p = &p + &c.scale(*uj);
        }
        p
    }
}

/// All monomials up to a degree in graded-lexicographic order.
#[derive(Clone, Debug, PartialEq)]
pub struct GramBasis {
    pub monomials: Vec<Monomial>,
}

impl GramBasis {
    pub fn new(nvars: usize, degree: u32) -> Self {
        GramBasis {
            monomials: Monomial::all_up_to(nvars, degree),
        }
    }

    pub fn len(&self) -> usize {
        self.monomials.len()
    }

    pub fn is_empty(&self) -> bool {
        self.monomials.is_empty()
    }

    pub fn evaluate(&self, y: &[f64]) -> DVector<f64> {
        DVector::from_iterator(self.len(), self.monomials.iter().map(|m| m.evaluate(y)))
    }

    /// `z(y)^T G z(y)` as a polynomial.
    pub fn quadratic_form(&self, g: &DMatrix<f64>) -> MultiPoly {
        let n = self.monomials.first().map_or(0, Monomial::nvars);
        let mut p = MultiPoly::zero(n);
        for a in 0..self.len() {
            for b in 0..self.len() {
                p.add_term(self.monomials[a].mul(&self.monomials[b]), g[(a, b)]);
            }
        }
        p
    }
}

/// The extent condition `dE/dx (f + g u) + alpha1(E) + alpha2(h)` for a fixed
/// state, as a polynomial in `y` affine in `u`. Only linear class-K
/// functions are accepted since anything else raises the degree.
#[allow(clippy::too_many_arguments)]
pub fn build_constraint_poly(
    extent: &ExtentFunction,
    h: &SafeFunction,
    alpha1: &ClassK,
    alpha2: &ClassK,
    sys: &ControlAffineSystem,
    x: &[f64],
) -> Result<AffinePoly> {
    let (Some(k1), Some(k2)) = (alpha1.linear_gain(), alpha2.linear_gain()) else {
        return Err(Error::Unsupported(
            "the sum-of-squares filter only accepts linear class-K functions".into(),
        ));
    };
    let hp = h.as_polynomial().ok_or_else(|| {
        Error::Unsupported("the sum-of-squares filter needs a polynomial safe function".into())
    })?;
    check_dim("safe function variables", 2, hp.nvars())?;
    check_dim("extent state", extent.state_dimension(), sys.state_dimension())?;
    let polys = extent.polynomials_in_y(x)?;
    let f = sys.drift(x)?;
    let g = sys.actuation(x)?;

    let mut constant = &polys.value.scale(k1) + &hp.scale(k2);
    for (i, de) in polys.grad_x.iter().enumerate() {
        constant = &constant + &de.scale(f[i]);
    }
    let channels = (0..sys.input_dimension())
        .map(|j| {
            polys
                .grad_x
                .iter()
                .enumerate()
                .fold(MultiPoly::zero(2), |acc, (i, de)| &acc + &de.scale(g[(i, j)]))
        })
        .collect();
    Ok(AffinePoly { constant, channels })
}

/// Decision-vector layout of an assembled program.
#[derive(Clone, Debug)]
pub struct SosProgram {
    pub poly: AffinePoly,
    pub safe: MultiPoly,
    pub target: DVector<f64>,
    pub input_bound: f64,
    pub full_degree: u32,
    pub multiplier_degree: u32,
    pub q_basis: GramBasis,
    pub s_basis: GramBasis,
    pub sdp: SdpProblem,
    /// Monomials of the coefficient-matching rows, in row order.
    pub rows: Vec<Monomial>,
}

fn upper_index(n: usize, a: usize, b: usize) -> usize {
    let (a, b) = if a <= b { (a, b) } else { (b, a) };
    a * n - a * (a + 1) / 2 + b
}

impl SosProgram {
    pub fn num_inputs(&self) -> usize {
        self.target.len()
    }

    pub fn delta_index(&self) -> usize {
        self.num_inputs()
    }

    pub fn q_offset(&self) -> usize {
        self.num_inputs() + 1
    }

    pub fn s_offset(&self) -> usize {
        let n = self.q_basis.len();
        self.q_offset() + n * (n + 1) / 2
    }

    fn unpack(&self, v: &DVector<f64>, offset: usize, n: usize) -> DMatrix<f64> {
        DMatrix::from_fn(n, n, |a, b| v[offset + upper_index(n, a, b)])
    }

    pub fn gram_q(&self, v: &DVector<f64>) -> DMatrix<f64> {
        self.unpack(v, self.q_offset(), self.q_basis.len())
    }

    pub fn gram_s(&self, v: &DVector<f64>) -> DMatrix<f64> {
        self.unpack(v, self.s_offset(), self.s_basis.len())
    }
}

/// Default multiplier degree: the largest even degree not exceeding
/// `deg(p) - deg(h)`.
pub fn default_multiplier_degree(poly_degree: u32, safe_degree: u32) -> u32 {
    let d = poly_degree.saturating_sub(safe_degree);
    d - d % 2
}

pub fn assemble_sos_program(
    poly: AffinePoly,
    safe: &MultiPoly,
    multiplier_degree: Option<u32>,
    target: &DVector<f64>,
    input_bound: f64,
) -> Result<SosProgram> {
    let m = poly.channels.len();
    check_dim("nominal input", m, target.len())?;
    if !(input_bound > 0.0) {
        return Err(Error::contract("input bound must be positive"));
    }
    let nvars = poly.constant.nvars();
    let deg_p = poly.degree();
    let deg_h = safe.degree();
    let deg_s = multiplier_degree.unwrap_or_else(|| default_multiplier_degree(deg_p, deg_h));
    let mut problems = Vec::new();
    if deg_s % 2 == 1 {
        problems.push(format!("multiplier degree {deg_s} must be even"));
    }
    let full = deg_p.max(deg_s + deg_h);
    if full % 2 == 1 {
        problems.push(format!(
            "matched polynomial degree {full} is odd; pick a multiplier degree making it even"
        ));
    }
    if !problems.is_empty() {
        return Err(Error::Config(problems));
    }

    let q_basis = GramBasis::new(nvars, full / 2);
    let s_basis = GramBasis::new(nvars, deg_s / 2);
    let nq = q_basis.len();
    let ns = s_basis.len();
    let q_off = m + 1;
    let s_off = q_off + nq * (nq + 1) / 2;
    let nv = s_off + ns * (ns + 1) / 2;
    let mut sdp = SdpProblem::new(nv);
    sdp.c[m] = 1.0;

    // Coefficient of each monomial in w_a w_b h, for the multiplier entries.
    let mut sh: Vec<(usize, MultiPoly)> = Vec::new();
    for a in 0..ns {
        for b in a..ns {
            let mut wab = MultiPoly::zero(nvars);
            wab.add_term(s_basis.monomials[a].mul(&s_basis.monomials[b]), if a == b { 1.0 } else { 2.0 });
            sh.push((s_off + upper_index(ns, a, b), &wab * safe));
        }
    }

    let rows = Monomial::all_up_to(nvars, full);
    for mu in &rows {
        let mut coeffs: Vec<(usize, f64)> = Vec::new();
        for (j, ch) in poly.channels.iter().enumerate() {
            let c = ch.coeff(mu);
            if c != 0.0 {
                coeffs.push((j, c));
            }
        }
        for (var, p) in &sh {
            let c = p.coeff(mu);
            if c != 0.0 {
                coeffs.push((*var, -c));
            }
        }
        for a in 0..nq {
            for b in a..nq {
                if q_basis.monomials[a].mul(&q_basis.monomials[b]) == *mu {
                    coeffs.push((q_off + upper_index(nq, a, b), if a == b { -1.0 } else { -2.0 }));
                }
            }
        }
        sdp.add_equality(&coeffs, -poly.constant.coeff(mu));
    }

    let mut qb = PsdBlock::new(nq);
    for a in 0..nq {
        for b in a..nq {
            qb.add_entry(Some(q_off + upper_index(nq, a, b)), a, b, 1.0);
        }
    }
    sdp.add_block(qb);
    let mut sb = PsdBlock::new(ns);
    for a in 0..ns {
        for b in a..ns {
            sb.add_entry(Some(s_off + upper_index(ns, a, b)), a, b, 1.0);
        }
    }
    sdp.add_block(sb);

    let mut schur = PsdBlock::new(m + 1);
    let mut ball = PsdBlock::new(m + 1);
    for j in 0..m {
        schur.add_entry(None, j, j, 1.0);
        schur.add_entry(Some(j), j, m, 1.0);
        schur.add_entry(Some(j), m, m, 2.0 * target[j]);
        ball.add_entry(None, j, j, input_bound);
        ball.add_entry(Some(j), j, m, 1.0);
    }
    schur.add_entry(Some(m), m, m, 1.0);
    schur.add_entry(None, m, m, -target.norm_squared());
    ball.add_entry(None, m, m, input_bound);
    sdp.add_block(schur);
    sdp.add_block(ball);

    Ok(SosProgram {
        poly,
        safe: safe.clone(),
        target: target.clone(),
        input_bound,
        full_degree: full,
        multiplier_degree: deg_s,
        q_basis,
        s_basis,
        sdp,
        rows,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SosStatus {
    /// Solved and the certificate passed post-validation.
    Certified,
    Infeasible,
    NotConverged,
    /// The solver reported success but the certificate failed validation.
    Rejected,
}

#[derive(Clone, Debug)]
pub struct SosSolution {
    pub status: SosStatus,
    pub u: DVector<f64>,
    pub delta: f64,
    pub q: DMatrix<f64>,
    pub s: DMatrix<f64>,
    /// Largest coefficient gap between `p - s h` and `z^T Q z`.
    pub coefficient_mismatch: f64,
    pub min_eig_q: f64,
    pub min_eig_s: f64,
    pub sdp: SdpSolution,
}

/// Coefficient tolerance of the certificate check.
pub const COEFFICIENT_TOL: f64 = 1e-6;
/// Eigenvalue floor of the certificate check.
pub const EIGEN_FLOOR: f64 = -1e-7;

impl SosSolution {
    /// `p(y; u) - s(y) h(y)` with the returned `u` and `S`.
    pub fn residual_poly(&self, program: &SosProgram) -> MultiPoly {
        let s = program.s_basis.quadratic_form(&self.s);
        &program.poly.at(self.u.as_slice()) - &(&s * &program.safe)
    }
}

pub fn solve_sos_program(program: &SosProgram, opts: &SdpOptions) -> Result<SosSolution> {
    let mut opts = opts.clone();
    if opts.warm_start.is_none() {
        let mut v0 = DVector::zeros(program.sdp.num_vars());
        v0[program.delta_index()] = program.target.norm_squared() + 1.0;
        opts.warm_start = Some(v0);
    }
    let sol = solve_sdp(&program.sdp, &opts)?;
    let m = program.num_inputs();
    let u = sol.v.rows(0, m).into_owned();
    let q = program.gram_q(&sol.v);
    let s = program.gram_s(&sol.v);
    let min_eig_q = eig_floor(&q)?;
    let min_eig_s = eig_floor(&s)?;
    let mut out = SosSolution {
        status: SosStatus::NotConverged,
        delta: sol.v[program.delta_index()],
        u,
        q,
        s,
        coefficient_mismatch: f64::INFINITY,
        min_eig_q,
        min_eig_s,
        sdp: sol,
    };
    let gram = program.q_basis.quadratic_form(&out.q);
    out.coefficient_mismatch = out.residual_poly(program).max_coeff_diff(&gram);
    out.status = match out.sdp.status {
        SdpStatus::Optimal => {
            if out.coefficient_mismatch <= COEFFICIENT_TOL
                && min_eig_q >= EIGEN_FLOOR
                && min_eig_s >= EIGEN_FLOOR
                && out.u.norm() <= program.input_bound * (1.0 + 1e-9)
            {
                SosStatus::Certified
            } else {
                SosStatus::Rejected
            }
        }
        SdpStatus::Infeasible => SosStatus::Infeasible,
        SdpStatus::Unbounded | SdpStatus::MaxIterations => SosStatus::NotConverged,
    };
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn upper_indexing() {
        let n = 4;
        let mut seen = Vec::new();
        for a in 0..n {
            for b in a..n {
                seen.push(upper_index(n, a, b));
                assert_eq!(upper_index(n, a, b), upper_index(n, b, a));
            }
        }
        assert_eq!(seen, (0..10).collect::<Vec<_>>());
    }

    #[test]
    fn default_degrees() {
        assert_eq!(default_multiplier_degree(4, 2), 2);
        assert_eq!(default_multiplier_degree(4, 4), 0);
        assert_eq!(default_multiplier_degree(5, 2), 2);
        assert_eq!(default_multiplier_degree(2, 4), 0);
    }

    fn one_input(constant: MultiPoly) -> AffinePoly {
        AffinePoly {
            channels: vec![MultiPoly::zero(constant.nvars())],
            constant,
        }
    }

    #[test]
    fn trivially_nonnegative() {
        // p = y1^2 + 1, h = 1, deg_s = 0
        let p = MultiPoly::from_terms(2, [(vec![2, 0], 1.0), (vec![0, 0], 1.0)]).unwrap();
        let h = MultiPoly::constant(2, 1.0);
        let prog = assemble_sos_program(one_input(p), &h, Some(0), &DVector::zeros(1), 1.0).unwrap();
        let sol = solve_sos_program(&prog, &SdpOptions::default()).unwrap();
        assert_eq!(sol.status, SosStatus::Certified, "{:?}", sol.sdp.message);
        assert!(sol.delta.abs() < 1e-6 && sol.u[0].abs() < 1e-6);
    }

    #[test]
    fn negative_constant_rejected() {
        let h = MultiPoly::from_terms(2, [(vec![2, 0], 1.0)]).unwrap();
        let prog = assemble_sos_program(
            one_input(MultiPoly::constant(2, -1.0)),
            &h,
            Some(0),
            &DVector::zeros(1),
            1.0,
        )
        .unwrap();
        let sol = solve_sos_program(&prog, &SdpOptions::default()).unwrap();
        assert_eq!(sol.status, SosStatus::Infeasible, "{}", sol.sdp.message);
    }

    #[test]
    fn odd_degree_is_a_config_error() {
        let p = MultiPoly::from_terms(2, [(vec![3, 0], 1.0)]).unwrap();
        let h = MultiPoly::constant(2, 1.0);
        let err = assemble_sos_program(one_input(p), &h, Some(1), &DVector::zeros(1), 1.0).unwrap_err();
        match err {
            Error::Config(list) => assert_eq!(list.len(), 2),
            other => panic!("{other}"),
        }
    }
}
