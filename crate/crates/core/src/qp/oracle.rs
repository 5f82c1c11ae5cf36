use nalgebra::DVector;

use super::{HalfspaceQP, QPSolution, QPStatus};
use crate::error::{Error, Result};

/// Brute-force reference solver for tests: scans a `resolution`-per-axis grid
/// over the box `[-M, M]^m` and keeps the best point satisfying every
/// constraint exactly. The grid is then recentred on that point and its half
/// width quartered, until the spacing drops below `1e-7 M`. Quartering
/// rather than shrinking to a few cells lets the search walk into narrow
/// corners where exactly feasible grid points are sparse.
pub fn oracle_solve(problem: &HalfspaceQP, resolution: usize) -> Result<QPSolution> {
    problem.validate()?;
    let m = problem.dimension();
    if m > 3 {
        return Err(Error::Unsupported("grid oracle is limited to three inputs".into()));
    }
    if resolution < 2 {
        return Err(Error::contract("grid resolution must be at least 2"));
    }
    let radius = problem.ball_radius;
    let feasible = |u: &DVector<f64>| {
        u.norm() <= radius && problem.rows.iter().all(|r| r.a.dot(u) >= r.b)
    };

    let mut center = DVector::zeros(m);
    let mut half = radius;
    let mut best: Option<(f64, DVector<f64>)> = None;
    let mut evaluated = 0;
    loop {
        let h = 2.0 * half / (resolution - 1) as f64;
        if h < 1e-7 * radius {
            break;
        }
        let total = resolution.pow(m as u32);
        let mut u = DVector::zeros(m);
        for flat in 0..total {
            let mut rem = flat;
            for i in 0..m {
                u[i] = center[i] - half + h * (rem % resolution) as f64;
                rem /= resolution;
            }
            evaluated += 1;
            if !feasible(&u) {
                continue;
            }
            let obj = problem.objective(&u);
            if best.as_ref().map_or(true, |(b, _)| obj < *b) {
                best = Some((obj, u.clone()));
            }
        }
        match &best {
            Some((_, b)) => {
                center = b.clone();
                half /= 4.0;
            }
            None => break,
        }
    }
    Ok(match best {
        Some((_, u)) => problem.finish(QPStatus::Optimal, u, evaluated),
        None => problem.infeasible(evaluated),
    })
}
