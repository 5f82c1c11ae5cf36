use nalgebra::{DMatrix, DVector};

use super::{HalfspaceQP, LinearConstraint, QPStatus, QPSolution};
use crate::error::{Error, Result};

/// Nearest point to `k` on `{A u = b}`, or on `{A u = b, |u| = radius}` when
/// `radius` is given. `None` when the rows are dependent or the sphere misses
/// the affine set.
pub(crate) fn equality_projection(
    k: &DVector<f64>,
    rows: &[&LinearConstraint],
    radius: Option<f64>,
) -> Option<DVector<f64>> {
    let m = k.len();
    let s = rows.len();
    let (u0, null_part) = if s == 0 {
        (DVector::zeros(m), k.clone())
    } else {
        let a = DMatrix::from_fn(s, m, |i, j| rows[i].a[j]);
        let b = DVector::from_iterator(s, rows.iter().map(|r| r.b));
        let gram = &a * a.transpose();
        let chol = gram.clone().cholesky()?;
        // Reject near-dependent row sets; a better-conditioned subset covers
        // the same vertex.
        let diag_min = (0..s).map(|i| chol.l()[(i, i)]).fold(f64::INFINITY, f64::min);
        let diag_max = (0..s).map(|i| chol.l()[(i, i)]).fold(0.0, f64::max);
        if diag_min <= 1e-9 * diag_max {
            return None;
        }
        let u0 = a.transpose() * chol.solve(&b);
        let null_part = k - a.transpose() * chol.solve(&(&a * k));
        (u0, null_part)
    };
    match radius {
        None => Some(&u0 + null_part),
        Some(radius) => {
            let rem = radius * radius - u0.norm_squared();
            if rem < 0.0 || s >= m {
                return None;
            }
            let rho = rem.sqrt();
            let zn = null_part.norm();
            let dir = if zn > 1e-14 * k.norm().max(1.0) {
                null_part / zn
            } else {
                // k lies in the row space; every null direction is equally
                // good, take the first one deterministically.
                any_null_direction(rows, m)?
            };
            Some(u0 + dir * rho)
        }
    }
}

fn any_null_direction(rows: &[&LinearConstraint], m: usize) -> Option<DVector<f64>> {
    let mut basis: Vec<DVector<f64>> = Vec::new();
    for r in rows {
        let mut w = r.a.clone();
        for q in &basis {
            w -= q * q.dot(&w);
        }
        let n = w.norm();
        if n > 1e-12 {
            basis.push(w / n);
        }
    }
    (0..m).find_map(|e| {
        let mut v = DVector::zeros(m);
        v[e] = 1.0;
        for q in &basis {
            v -= q * q.dot(&v);
        }
        let n = v.norm();
        (n > 1e-8).then(|| v / n)
    })
}

fn subsets(n: usize, max_size: usize, mut visit: impl FnMut(&[usize])) {
    fn rec(start: usize, n: usize, max: usize, cur: &mut Vec<usize>, visit: &mut dyn FnMut(&[usize])) {
        visit(cur);
        if cur.len() == max {
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, max, cur, visit);
            cur.pop();
        }
    }
    rec(0, n, max_size, &mut Vec::new(), &mut visit);
}

/// Exact projection by enumerating candidate active sets: every subset of at
/// most `m` rows with the ball inactive and at most `m - 1` rows with the
/// ball active. Among the candidates that satisfy every constraint, the one
/// closest to the target is the projection. Limited to `m <= 3`.
pub fn solve_active_set(problem: &HalfspaceQP, tol: f64) -> Result<QPSolution> {
    problem.validate()?;
    let m = problem.dimension();
    if m > 3 {
        return Err(Error::Unsupported(
            "active-set enumeration is limited to at most three inputs".into(),
        ));
    }
    if !(tol > 0.0) {
        return Err(Error::contract("tolerance must be positive"));
    }
    if problem.rows.iter().any(LinearConstraint::is_contradictory) {
        return Ok(problem.infeasible(0));
    }
    let rows: Vec<&LinearConstraint> = problem.rows.iter().filter(|r| r.a.norm() > 0.0).collect();
    let scale = problem.ball_radius.max(1.0);
    let feas_tol = tol * scale;
    let k = &problem.target;

    let mut best: Option<(f64, DVector<f64>)> = None;
    let mut visited = 0;
    let mut consider = |u: DVector<f64>| {
        if u.norm() > problem.ball_radius * (1.0 + 1e-12) + 1e-15 {
            return;
        }
        if rows.iter().any(|r| r.distance(&u) > feas_tol) {
            return;
        }
        let obj = (&u - k).norm_squared();
        if best.as_ref().map_or(true, |(b, _)| obj < *b) {
            best = Some((obj, u));
        }
    };

    subsets(rows.len(), m, |idx| {
        visited += 1;
        let sel: Vec<&LinearConstraint> = idx.iter().map(|&i| rows[i]).collect();
        if let Some(u) = equality_projection(k, &sel, None) {
            consider(u);
        }
        if idx.len() < m {
            if let Some(u) = equality_projection(k, &sel, Some(problem.ball_radius)) {
                consider(u);
            }
        }
    });

    Ok(match best {
        Some((_, u)) => problem.finish(QPStatus::Optimal, u, visited),
        None => problem.infeasible(visited),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ball_and_row_active() {
        // u1 <= 0.5 with target (2, 1) on the unit ball: the corner
        // (0.5, sqrt(0.75)) is the projection.
        let p = HalfspaceQP::new(
            DVector::from_column_slice(&[2.0, 1.0]),
            vec![LinearConstraint::from_slice(&[-1.0, 0.0], -0.5)],
            1.0,
        )
        .unwrap();
        let s = solve_active_set(&p, 1e-9).unwrap();
        assert!((s.u[0] - 0.5).abs() < 1e-12 && (s.u[1] - 0.75f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn target_in_row_space_with_ball() {
        let p = HalfspaceQP::new(
            DVector::from_column_slice(&[0.0, 2.0]),
            vec![LinearConstraint::from_slice(&[0.0, -1.0], -0.2)],
            1.0,
        )
        .unwrap();
        let s = solve_active_set(&p, 1e-9).unwrap();
        assert!((s.u[1] - 0.2).abs() < 1e-12 && s.u[0].abs() < 1e-12);
    }

    #[test]
    fn rejects_four_inputs() {
        let p = HalfspaceQP::new(DVector::zeros(4), vec![], 1.0).unwrap();
        assert!(solve_active_set(&p, 1e-9).is_err());
    }
}
