use nalgebra::DVector;

use super::active_set::equality_projection;
use super::{kkt_residual, HalfspaceQP, LinearConstraint, QPSolution, QPStatus};
use crate::error::{Error, Result};

fn project_halfspace(row: &LinearConstraint, y: &DVector<f64>) -> DVector<f64> {
    let v = row.violation(y);
    if v <= 0.0 {
        y.clone()
    } else {
        y + &row.a * (v / row.a.norm_squared())
    }
}

fn project_ball(radius: f64, y: &DVector<f64>) -> DVector<f64> {
    let n = y.norm();
    if n <= radius {
        y.clone()
    } else {
        y * (radius / n)
    }
}

/// Dykstra's cyclic projection over the rows followed by the ball.
///
/// A cycle that moves the iterate and every increment by at most `tol * M`
/// while leaving every violation below `tol * M` ends the loop. The converged
/// iterate is then polished: the near-active constraints are solved as
/// equalities and the result is kept only if it is feasible and passes the
/// KKT cone test, which makes it the exact projection. After `max_iter` cycles the problem is
/// declared infeasible if violation stays above `10 tol M` while the cycle
/// displacement is below `tol M / 10`. Every 64 cycles the row increments are
/// also tested as a Farkas certificate, which ends hopeless runs early.
pub fn solve_dykstra(problem: &HalfspaceQP, tol: f64, max_iter: usize) -> Result<QPSolution> {
    problem.validate()?;
    if !(tol > 0.0) {
        return Err(Error::contract("tolerance must be positive"));
    }
    if problem.rows.iter().any(LinearConstraint::is_contradictory) {
        return Ok(problem.infeasible(0));
    }
    let rows: Vec<&LinearConstraint> = problem.rows.iter().filter(|r| r.a.norm() > 0.0).collect();
    let radius = problem.ball_radius;
    let scale = tol * radius;
    let m = problem.dimension();

    let mut x = problem.target.clone();
    let mut incr = vec![DVector::<f64>::zeros(m); rows.len() + 1];
    let mut disp = f64::INFINITY;
    let mut viol = f64::INFINITY;
    for it in 1..=max_iter {
        let prev = x.clone();
        let mut shift: f64 = 0.0;
        for (i, row) in rows.iter().enumerate() {
            let y = &x + &incr[i];
            x = project_halfspace(row, &y);
            let d = y - &x;
            shift = shift.max((&d - &incr[i]).norm());
            incr[i] = d;
        }
        let y = &x + &incr[rows.len()];
        x = project_ball(radius, &y);
        let d = y - &x;
        shift = shift.max((&d - &incr[rows.len()]).norm());
        incr[rows.len()] = d;

        // The iterate can sit still for a whole cycle while the increments
        // keep moving, so both must settle.
        disp = (&x - &prev).norm().max(shift);
        viol = problem.residual(&x);
        if it % 64 == 0 && viol > scale && farkas_certificate(&rows, &incr, radius) {
            return Ok(problem.finish(QPStatus::Infeasible, x, it));
        }
        if disp <= scale && viol <= scale {
            let u = polish(problem, &rows, &x, tol).unwrap_or(x);
            return Ok(problem.finish(QPStatus::Optimal, u, it));
        }
    }
    if (viol > 10.0 * scale && disp < scale / 10.0) || farkas_certificate(&rows, &incr, radius) {
        return Ok(problem.finish(QPStatus::Infeasible, x, max_iter));
    }
    Ok(match polish(problem, &rows, &x, tol) {
        Some(u) => problem.finish(QPStatus::Optimal, u, max_iter),
        None => problem.finish(QPStatus::MaxIterations, x, max_iter),
    })
}

/// On an infeasible problem the row increments grow along a separating
/// combination. Weights `l >= 0` with `sum l_i b_i > M |sum l_i a_i|` prove
/// that no point of the ball satisfies every row.
fn farkas_certificate(rows: &[&LinearConstraint], incr: &[DVector<f64>], radius: f64) -> bool {
    let m = incr[0].len();
    let mut combo = DVector::zeros(m);
    let (mut rhs, mut weight) = (0.0, 0.0);
    for (row, d) in rows.iter().zip(incr) {
        // the increment is a nonnegative multiple of -a
        let l = (-d.dot(&row.a)).max(0.0) / row.a.norm_squared();
        combo += &row.a * l;
        rhs += l * row.b;
        weight += l * row.a.norm();
    }
    weight > 0.0 && rhs - radius * combo.norm() > 1e-9 * weight * radius
}

/// Solves the constraints that are nearly tight at `x` as equalities. Returns
/// the result only when it is feasible and certified optimal by the KKT test.
fn polish(
    problem: &HalfspaceQP,
    rows: &[&LinearConstraint],
    x: &DVector<f64>,
    tol: f64,
) -> Option<DVector<f64>> {
    let m = problem.dimension();
    let radius = problem.ball_radius;
    let unit = radius.max(problem.target.norm()).max(1.0);
    let near = (1e-6 * unit).max(100.0 * tol * radius);

    let mut tight: Vec<(f64, &LinearConstraint)> = rows
        .iter()
        .map(|r| (r.distance(x), *r))
        .filter(|(d, _)| *d >= -near)
        .collect();
    tight.sort_by(|a, b| b.0.total_cmp(&a.0));

    // Greedy independent subset, tightest first.
    let mut basis: Vec<DVector<f64>> = Vec::new();
    let mut chosen: Vec<&LinearConstraint> = Vec::new();
    for (_, r) in &tight {
        let mut w = r.a.clone() / r.a.norm();
        for q in &basis {
            w -= q * q.dot(&w);
        }
        let n = w.norm();
        if n > 1e-6 && chosen.len() < m {
            basis.push(w / n);
            chosen.push(r);
        }
    }

    let on_ball = x.norm() >= radius - near;
    let mut attempts: Vec<(usize, bool)> = Vec::new();
    for s in (0..=chosen.len()).rev() {
        if on_ball && s < m {
            attempts.push((s, true));
        }
        attempts.push((s, false));
    }
    let feas = tol * radius;
    for (s, ball) in attempts {
        let u = match equality_projection(&problem.target, &chosen[..s], ball.then_some(radius)) {
            Some(u) => u,
            None => continue,
        };
        if problem.residual(&u) > feas || (&u - x).norm() > 1e-3 * unit {
            continue;
        }
        if kkt_residual(problem, &u, near) <= 1e-9 * unit {
            return Some(u);
        }
    }
    None
}
