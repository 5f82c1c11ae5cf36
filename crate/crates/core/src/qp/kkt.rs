use nalgebra::{DMatrix, DVector};

use super::HalfspaceQP;

/// Lawson-Hanson nonnegative least squares: `argmin_{x >= 0} |G x - r|`.
pub fn nnls(g: &DMatrix<f64>, r: &DVector<f64>) -> DVector<f64> {
    let n = g.ncols();
    let mut x = DVector::zeros(n);
    if n == 0 {
        return x;
    }
    let mut passive = vec![false; n];
    let tol = 1e-12 * g.norm().max(1.0) * r.norm().max(1.0);

    let solve_passive = |passive: &[bool]| -> DVector<f64> {
        let idx: Vec<usize> = (0..n).filter(|&j| passive[j]).collect();
        let mut z = DVector::zeros(n);
        if idx.is_empty() {
            return z;
        }
        let sub = g.select_columns(&idx);
        let sol = sub
            .clone()
            .svd(true, true)
            .solve(r, 1e-14)
            .unwrap_or_else(|_| DVector::zeros(idx.len()));
        for (k, &j) in idx.iter().enumerate() {
            z[j] = sol[k];
        }
        z
    };

    for _ in 0..3 * n + 10 {
        let w = g.transpose() * (r - g * &x);
        let pick = (0..n)
            .filter(|&j| !passive[j])
            .max_by(|&a, &b| w[a].total_cmp(&w[b]));
        match pick {
            Some(j) if w[j] > tol => passive[j] = true,
            _ => break,
        }
        loop {
            let z = solve_passive(&passive);
            if (0..n).filter(|&j| passive[j]).all(|j| z[j] > 0.0) {
                x = z;
                break;
            }
            let mut alpha = f64::INFINITY;
            for j in (0..n).filter(|&j| passive[j] && z[j] <= 0.0) {
                alpha = alpha.min(x[j] / (x[j] - z[j]));
            }
            x += (z - &x) * alpha;
            for j in 0..n {
                if passive[j] && x[j] <= 1e-15 {
                    passive[j] = false;
                    x[j] = 0.0;
                }
            }
        }
    }
    x
}

/// Stationarity residual of `u` for the projection problem: the distance
/// from `k - u` to the cone generated by `-a_i` over rows active within
/// `active_tol` and by `u` itself when `u` is on the ball.
pub fn kkt_residual(problem: &HalfspaceQP, u: &DVector<f64>, active_tol: f64) -> f64 {
    let m = problem.dimension();
    let mut cols: Vec<DVector<f64>> = problem
        .rows
        .iter()
        .filter(|r| r.a.norm() > 0.0 && -r.distance(u) <= active_tol)
        .map(|r| -&r.a)
        .collect();
    if u.norm() >= problem.ball_radius - active_tol {
        cols.push(u.clone());
    }
    let target = &problem.target - u;
    if cols.is_empty() {
        return target.norm();
    }
    let g = DMatrix::from_fn(m, cols.len(), |i, j| cols[j][i]);
    let lambda = nnls(&g, &target);
    (g * lambda - target).norm()
}
