use std::collections::BTreeMap;

use nalgebra::DMatrix;

use super::{GramBasis, Monomial, MultiPoly, SosStatus, COEFFICIENT_TOL, EIGEN_FLOOR};
use crate::error::Result;
use crate::sdp::{eig_floor, solve_sdp, PsdBlock, SdpOptions, SdpProblem, SdpStatus};

/// Outcome of a sum-of-squares test on a fixed polynomial.
#[derive(Clone, Debug)]
pub struct GramCertificate {
    pub status: SosStatus,
    pub basis: GramBasis,
    pub gram: DMatrix<f64>,
    pub coefficient_mismatch: f64,
    pub min_eigenvalue: f64,
}

/// Drops basis monomials whose Gram row is forced to zero: `m` goes when
/// `p` has no `m^2` term and no pair of other kept monomials multiplies to
/// `m^2`, since the diagonal entry alone would then have to vanish. Repeats
/// until nothing changes. Without this a polynomial like `(y1 + y2)^2`
/// leaves the constant row pinned at zero and the PSD cone has no interior.
fn prune(p: &MultiPoly, mut monomials: Vec<Monomial>) -> Vec<Monomial> {
    loop {
        let before = monomials.len();
        let keep: Vec<bool> = monomials
            .iter()
            .map(|m| {
                let sq = m.mul(m);
                p.coeff(&sq) != 0.0
                    || monomials.iter().enumerate().any(|(i, a)| {
                        a != m && monomials[i + 1..].iter().any(|b| b != m && a.mul(b) == sq)
                    })
            })
            .collect();
        let mut flags = keep.into_iter();
        monomials.retain(|_| flags.next().unwrap_or(true));
        if monomials.len() == before {
            return monomials;
        }
    }
}

/// Looks for a PSD `G` with `p = z^T G z`, `z` the monomials up to half the
/// degree of `p` that survive [`prune`]. A certificate is only reported after
/// the coefficient and eigenvalue checks pass.
pub fn gram_feasibility(p: &MultiPoly, opts: &SdpOptions) -> Result<GramCertificate> {
    let nvars = p.nvars();
    let deg = p.degree();
    let basis = GramBasis {
        monomials: prune(p, GramBasis::new(nvars, deg.div_ceil(2)).monomials),
    };
    let n = basis.len();
    let empty = |status| GramCertificate {
        status,
        basis: basis.clone(),
        gram: DMatrix::zeros(n, n),
        coefficient_mismatch: f64::INFINITY,
        min_eigenvalue: f64::NAN,
    };
    if deg % 2 == 1 {
        return Ok(empty(SosStatus::Infeasible));
    }
    if n == 0 {
        let zero = p.terms().all(|(_, c)| c == 0.0);
        return Ok(GramCertificate {
            coefficient_mismatch: if zero { 0.0 } else { f64::INFINITY },
            min_eigenvalue: 0.0,
            ..empty(if zero { SosStatus::Certified } else { SosStatus::Infeasible })
        });
    }
    let idx = |a: usize, b: usize| {
        let (i, j) = if a <= b { (a, b) } else { (b, a) };
        i * n - i * (i + 1) / 2 + j
    };
    let mut rows: BTreeMap<Monomial, Vec<(usize, f64)>> = BTreeMap::new();
    for a in 0..n {
        for b in a..n {
            let m = basis.monomials[a].mul(&basis.monomials[b]);
            rows.entry(m).or_default().push((idx(a, b), if a == b { 1.0 } else { 2.0 }));
        }
    }
    if p.terms().any(|(m, c)| c != 0.0 && !rows.contains_key(m)) {
        return Ok(empty(SosStatus::Infeasible));
    }
    let mut sdp = SdpProblem::new(n * (n + 1) / 2);
    for (m, coeffs) in &rows {
        sdp.add_equality(coeffs, p.coeff(m));
    }
    let mut blk = PsdBlock::new(n);
    for a in 0..n {
        for b in a..n {
            blk.add_entry(Some(idx(a, b)), a, b, 1.0);
        }
    }
    sdp.add_block(blk);
    let sol = solve_sdp(&sdp, opts)?;
    let gram = DMatrix::from_fn(n, n, |a, b| sol.v[idx(a, b)]);
    let min_eigenvalue = eig_floor(&gram)?;
    let coefficient_mismatch = basis.quadratic_form(&gram).max_coeff_diff(p);
    let status = match sol.status {
        SdpStatus::Optimal if coefficient_mismatch <= COEFFICIENT_TOL && min_eigenvalue >= EIGEN_FLOOR => {
            SosStatus::Certified
        }
        SdpStatus::Optimal => SosStatus::Rejected,
        SdpStatus::Infeasible => SosStatus::Infeasible,
        _ => SosStatus::NotConverged,
    };
    Ok(GramCertificate {
        status,
        basis,
        gram,
        coefficient_mismatch,
        min_eigenvalue,
    })
}
