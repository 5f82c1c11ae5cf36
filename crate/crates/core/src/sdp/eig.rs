use nalgebra::DMatrix;

use crate::error::{Error, Result};

const SWEEPS: usize = 100;

/// Eigenvalues of a symmetric matrix by the cyclic Jacobi method, ascending.
/// Sweeps stop once the off-diagonal mass is below `1e-12` relative to the
/// matrix norm.
pub fn symmetric_eigenvalues(m: &DMatrix<f64>) -> Result<Vec<f64>> {
    let n = m.nrows();
    if m.ncols() != n {
        return Err(Error::contract("eigenvalues of a non-square matrix"));
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("eigenvalue input"));
    }
    let scale = m.norm().max(f64::MIN_POSITIVE);
    if (m - m.transpose()).amax() > 1e-12 * scale {
        return Err(Error::contract("eigenvalues of a non-symmetric matrix"));
    }
    let mut a = (m + m.transpose()) * 0.5;
    for _ in 0..SWEEPS {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[(i, j)] * a[(i, j)])
            .sum::<f64>()
            .sqrt();
        if off <= 1e-12 * scale * 1e-3 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut ev: Vec<f64> = (0..n).map(|i| a[(i, i)]).collect();
    ev.sort_by(f64::total_cmp);
    Ok(ev)
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn eig_floor(m: &DMatrix<f64>) -> Result<f64> {
    let ev = symmetric_eigenvalues(m)?;
    ev.first()
        .copied()
        .ok_or_else(|| Error::contract("eigenvalues of an empty matrix"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simple_floors() {
        assert_eq!(eig_floor(&DMatrix::identity(3, 3)).unwrap(), 1.0);
        let d = DMatrix::from_row_slice(2, 2, &[5.0, 0.0, 0.0, -2.0]);
        assert_eq!(eig_floor(&d).unwrap(), -2.0);
    }

    #[test]
    fn rejects_asymmetric() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 0.0, 1.0]);
        assert!(matches!(eig_floor(&m), Err(Error::Contract(_))));
    }

    #[test]
    fn two_by_two_closed_form() {
        let m = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]);
        let ev = symmetric_eigenvalues(&m).unwrap();
        assert!((ev[0] - 1.0).abs() < 1e-14 && (ev[1] - 3.0).abs() < 1e-14);
    }
}
