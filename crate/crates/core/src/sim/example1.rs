//! Feasibility thresholds of the sampled filter for a unit-disk extent on a
//! planar single integrator approaching the wall `y1 = 0`, with `A = 1`,
//! `B = 2`, `M = 1`.
//!
//! With `n` samples the tightened rows are jointly feasible exactly when
//! `x1 <= -(B / gamma + A) tau`. For four samples the feasible set shrinks to
//! a single input at the threshold; the geometry puts it at `(-gamma / 2, 0)`.

use nalgebra::DVector;
use serde::Serialize;

use crate::dynamics::ControlAffineSystem;
use crate::error::Result;
use crate::geometry::{sample_boundary, ExtentFunction, SafeFunction};
use crate::qp::{QPOptions, QPSolution, QPStatus};
use crate::safety_filters::{filter_input, sampled_constraints, LipschitzConstants};

pub const LIP_A: f64 = 1.0;
pub const LIP_B: f64 = 2.0;
pub const GAMMAS: [f64; 3] = [0.25, 0.5, 1.0];
pub const THRESHOLD_TOL: f64 = 1e-6;

/// Exact net parameter for `n` equally spaced samples on the unit circle.
pub fn exact_tau(n: usize) -> f64 {
    4.0 * (std::f64::consts::PI / (2 * n) as f64).sin()
}

pub fn closed_form_threshold(n: usize, gamma: f64) -> f64 {
    -(LIP_B / gamma + LIP_A) * exact_tau(n)
}

/// Solves the filter QP at `(x1, 0)` with nominal input `(1, 0)`.
pub fn solve_at(samples: usize, gamma: f64, x1: f64) -> Result<(QPSolution, f64)> {
    let sys = ControlAffineSystem::single_integrator(2, 1.0)?;
    let extent = ExtentFunction::ball(1.0, 2)?;
    let h = SafeFunction::halfspace(vec![-1.0, 0.0], 0.0)?;
    let x = [x1, 0.0];
    let net = sample_boundary(&extent, &x, samples)?;
    let consts = LipschitzConstants::user(LIP_A, LIP_B)?;
    let rows = sampled_constraints(&extent, &h, &net, &consts, gamma, &sys, &x)?;
    let k = DVector::from_column_slice(&[1.0, 0.0]);
    let opts = QPOptions {
        tol: 1e-12,
        ..QPOptions::default()
    };
    Ok((filter_input(&rows, &k, 1.0, &opts)?, net.tau))
}

pub fn feasible(samples: usize, gamma: f64, x1: f64) -> Result<bool> {
    Ok(solve_at(samples, gamma, x1)?.0.status == QPStatus::Optimal)
}

/// Largest feasible `x1` by bisection on `[-100, 0]`.
pub fn bisect_threshold(samples: usize, gamma: f64) -> Result<f64> {
    let (mut lo, mut hi) = (-100.0, 0.0);
    debug_assert!(feasible(samples, gamma, lo)?);
    while hi - lo > 1e-10 {
        let mid = 0.5 * (lo + hi);
        if feasible(samples, gamma, mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}

#[derive(Clone, Debug, Serialize)]
pub struct ThresholdRow {
    pub samples: usize,
    pub gamma: f64,
    pub tau: f64,
    pub closed_form: f64,
    pub measured: f64,
    pub error: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct BoundaryInput {
    pub gamma: f64,
    pub x1: f64,
    pub u: [f64; 2],
}

#[derive(Clone, Debug, Serialize)]
pub struct Example1Report {
    pub rows: Vec<ThresholdRow>,
    /// Thresholds increase with gamma toward `-A tau` for each net.
    pub monotone_trend: bool,
    /// Filter output at the four-sample threshold for each gamma.
    pub boundary_inputs: Vec<BoundaryInput>,
    pub max_error: f64,
}

impl Example1Report {
    pub fn passed(&self) -> bool {
        self.max_error <= THRESHOLD_TOL && self.monotone_trend
    }
}

pub fn run_example1_table() -> Result<Example1Report> {
    let mut rows = Vec::new();
    for samples in [2, 4] {
        for gamma in GAMMAS {
            let measured = bisect_threshold(samples, gamma)?;
            let closed_form = closed_form_threshold(samples, gamma);
            let (_, tau) = solve_at(samples, gamma, measured)?;
            rows.push(ThresholdRow {
                samples,
                gamma,
                tau,
                closed_form,
                measured,
                error: (measured - closed_form).abs(),
            });
        }
    }
    let monotone_trend = [2, 4].iter().all(|&n| {
        let xs: Vec<f64> = rows.iter().filter(|r| r.samples == n).map(|r| r.measured).collect();
        xs.windows(2).all(|w| w[0] < w[1]) && xs.iter().all(|x| *x < -LIP_A * exact_tau(n))
    });
    let mut boundary_inputs = Vec::new();
    for gamma in GAMMAS {
        let x1 = closed_form_threshold(4, gamma);
        let (sol, _) = solve_at(4, gamma, x1)?;
        boundary_inputs.push(BoundaryInput {
            gamma,
            x1,
            u: [sol.u[0], sol.u[1]],
        });
    }
    let max_error = rows.iter().map(|r| r.error).fold(0.0, f64::max);
    Ok(Example1Report {
        rows,
        monotone_trend,
        boundary_inputs,
        max_error,
    })
}

pub fn format_report(r: &Example1Report) -> String {
    let mut s = String::from("samples  gamma   tau            closed form      measured         error\n");
    for row in &r.rows {
        s.push_str(&format!(
            "{:>7}  {:<6}  {:.12}  {:+.9e}  {:+.9e}  {:.2e}\n",
            row.samples, row.gamma, row.tau, row.closed_form, row.measured, row.error
        ));
    }
    s.push_str(&format!("monotone toward -A tau: {}\n", r.monotone_trend));
    for b in &r.boundary_inputs {
        s.push_str(&format!(
            "4 samples, gamma {}: input at threshold x1 = {:.9} is ({:+.9}, {:+.9})\n",
            b.gamma, b.x1, b.u[0], b.u[1]
        ));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_tau_values() {
        assert!((exact_tau(2) - 2.0 * 2f64.sqrt()).abs() < 1e-15);
        assert!((exact_tau(4) - 2.0 * (2.0 - 2f64.sqrt()).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn four_sample_threshold() {
        let t = closed_form_threshold(4, 1.0);
        assert!((t + 4.592201188).abs() < 1e-8);
        assert!(feasible(4, 1.0, t - 1e-6).unwrap());
        assert!(!feasible(4, 1.0, t + 1e-6).unwrap());
    }

    #[test]
    fn single_point_at_threshold() {
        let (sol, _) = solve_at(4, 0.5, closed_form_threshold(4, 0.5)).unwrap();
        assert_eq!(sol.status, QPStatus::Optimal);
        assert!((sol.u[0] + 0.25).abs() < 1e-6 && sol.u[1].abs() < 1e-6, "{:?}", sol.u);
    }
}
