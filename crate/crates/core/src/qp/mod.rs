//! Euclidean projection of a target input onto an intersection of
//! halfspaces `a_i^T u >= b_i` and the ball `|u| <= M`.

mod active_set;
mod dykstra;
mod kkt;
mod oracle;

use nalgebra::DVector;

use crate::error::{check_dim, Error, Result};

pub use active_set::solve_active_set;
pub use dykstra::solve_dykstra;
pub use kkt::{kkt_residual, nnls};
pub use oracle::oracle_solve;

/// `a^T u >= b`
#[derive(Clone, Debug, PartialEq)]
pub struct LinearConstraint {
    pub a: DVector<f64>,
    pub b: f64,
}

impl LinearConstraint {
    pub fn new(a: DVector<f64>, b: f64) -> Self {
        LinearConstraint { a, b }
    }

    pub fn from_slice(a: &[f64], b: f64) -> Self {
        LinearConstraint {
            a: DVector::from_column_slice(a),
            b,
        }
    }

    /// `b - a^T u`, positive when violated.
    pub fn violation(&self, u: &DVector<f64>) -> f64 {
        self.b - self.a.dot(u)
    }

    /// Violation divided by `|a|`, the Euclidean distance to the halfspace.
    /// Zero rows report their raw violation.
    pub fn distance(&self, u: &DVector<f64>) -> f64 {
        let n = self.a.norm();
        let v = self.violation(u);
        if n > 0.0 {
            v / n
        } else {
            v
        }
    }

    /// A zero row with `b > 0` can never hold.
    pub fn is_contradictory(&self) -> bool {
        self.a.iter().all(|v| *v == 0.0) && self.b > 0.0
    }
}

#[derive(Clone, Debug)]
pub struct HalfspaceQP {
    pub target: DVector<f64>,
    pub rows: Vec<LinearConstraint>,
    pub ball_radius: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum QPStatus {
    Optimal,
    Infeasible,
    MaxIterations,
}

#[derive(Clone, Debug)]
pub struct QPSolution {
    pub status: QPStatus,
    pub u: DVector<f64>,
    pub objective: f64,
    pub iterations: usize,
    /// Largest constraint violation at `u`, rows measured as distance to the
    /// halfspace.
    pub residual: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum QPMethod {
    /// Exact enumeration for small problems, constraint generation on top of
    /// enumeration for long row lists, Dykstra otherwise.
    Auto,
    Dykstra,
    ActiveSet,
}

#[derive(Clone, Copy, Debug)]
pub struct QPOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub method: QPMethod,
}

impl Default for QPOptions {
    fn default() -> Self {
        QPOptions {
            tol: 1e-8,
            max_iter: 50_000,
            method: QPMethod::Auto,
        }
    }
}

/// Row count up to which [`QPMethod::Auto`] enumerates active sets directly.
pub const ENUMERATION_ROW_LIMIT: usize = 16;

impl HalfspaceQP {
    pub fn new(target: DVector<f64>, rows: Vec<LinearConstraint>, ball_radius: f64) -> Result<Self> {
        let qp = HalfspaceQP {
            target,
            rows,
            ball_radius,
        };
        qp.validate()?;
        Ok(qp)
    }

    pub fn dimension(&self) -> usize {
        self.target.len()
    }

    pub fn validate(&self) -> Result<()> {
        let m = self.target.len();
        if m == 0 {
            return Err(Error::contract("QP input dimension must be positive"));
        }
        if !(self.ball_radius > 0.0 && self.ball_radius.is_finite()) {
            return Err(Error::contract("QP ball radius must be positive and finite"));
        }
        if self.target.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("QP target"));
        }
        for r in &self.rows {
            check_dim("QP row", m, r.a.len())?;
            if !r.b.is_finite() || r.a.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite("QP row"));
            }
        }
        Ok(())
    }

    pub fn objective(&self, u: &DVector<f64>) -> f64 {
        (u - &self.target).norm_squared()
    }

    /// Largest violation at `u` over all rows and the ball.
    pub fn residual(&self, u: &DVector<f64>) -> f64 {
        let ball = u.norm() - self.ball_radius;
        self.rows
            .iter()
            .map(|r| r.distance(u))
            .fold(ball.max(0.0), f64::max)
    }

    pub(crate) fn finish(&self, status: QPStatus, u: DVector<f64>, iterations: usize) -> QPSolution {
        QPSolution {
            status,
            objective: self.objective(&u),
            residual: self.residual(&u),
            u,
            iterations,
        }
    }

    pub(crate) fn infeasible(&self, iterations: usize) -> QPSolution {
        self.finish(QPStatus::Infeasible, self.target.clone(), iterations)
    }
}

/// Dykstra's cyclic projection; see [`solve_dykstra`].
pub fn solve(problem: &HalfspaceQP, tol: f64, max_iter: usize) -> Result<QPSolution> {
    solve_dykstra(problem, tol, max_iter)
}

pub fn solve_with(problem: &HalfspaceQP, opts: &QPOptions) -> Result<QPSolution> {
    match opts.method {
        QPMethod::Dykstra => solve_dykstra(problem, opts.tol, opts.max_iter),
        QPMethod::ActiveSet => solve_active_set(problem, opts.tol),
        QPMethod::Auto => solve_auto(problem, opts),
    }
}

fn solve_auto(problem: &HalfspaceQP, opts: &QPOptions) -> Result<QPSolution> {
    problem.validate()?;
    let m = problem.dimension();
    if m > 3 {
        return solve_dykstra(problem, opts.tol, opts.max_iter);
    }
    if problem.rows.len() <= ENUMERATION_ROW_LIMIT {
        return solve_active_set(problem, opts.tol);
    }
    if problem.rows.iter().any(LinearConstraint::is_contradictory) {
        return Ok(problem.infeasible(0));
    }

    // Constraint generation: project onto a growing subset of rows until the
    // projection satisfies every row. Since the subset problem is a
    // relaxation, a point feasible for all rows is the exact projection.
    let scale = problem.ball_radius.max(problem.target.norm()).max(1.0);
    let mut working: Vec<usize> = Vec::new();
    let mut rounds = 0;
    loop {
        rounds += 1;
        let sub = HalfspaceQP {
            target: problem.target.clone(),
            rows: working.iter().map(|&i| problem.rows[i].clone()).collect(),
            ball_radius: problem.ball_radius,
        };
        let sol = solve_active_set(&sub, opts.tol)?;
        if sol.status == QPStatus::Infeasible {
            return Ok(problem.infeasible(rounds));
        }
        let worst = problem
            .rows
            .iter()
            .enumerate()
            .filter(|(i, _)| !working.contains(i))
            .map(|(i, r)| (i, r.distance(&sol.u)))
            .fold((usize::MAX, f64::NEG_INFINITY), |acc, c| if c.1 > acc.1 { c } else { acc });
        if worst.0 == usize::MAX || worst.1 <= opts.tol * scale {
            return Ok(problem.finish(QPStatus::Optimal, sol.u, rounds));
        }
        working.push(worst.0);
        if working.len() > ENUMERATION_ROW_LIMIT {
            return solve_dykstra(problem, opts.tol, opts.max_iter);
        }
    }
}
