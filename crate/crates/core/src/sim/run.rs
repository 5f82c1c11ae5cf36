//! Closed-loop simulation.

use std::time::Instant;

use nalgebra::DVector;
use serde::Serialize;

use super::config::Scenario;
use crate::error::Result;
use crate::geometry::boundary_minimum;
use crate::safety_filters::FilterStatus;

/// One control step: the state at `t` and the input applied over `[t, t + dt)`.
#[derive(Clone, Debug, PartialEq)]
pub struct StepRecord {
    pub t: f64,
    pub x: Vec<f64>,
    pub u: Vec<f64>,
    /// Smallest safe-function value over the extent boundary.
    pub min_boundary_h: f64,
    pub filter_active: bool,
    pub solve_ms: f64,
    pub status: FilterStatus,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Trajectory {
    pub state_dimension: usize,
    pub input_dimension: usize,
    pub steps: Vec<StepRecord>,
    /// State after the last applied input (the last recorded state after a halt).
    pub terminal_state: Vec<f64>,
    pub terminal_time: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SolveTimeStats {
    pub min: f64,
    pub median: f64,
    pub max: f64,
}

/// One enforced input row `a.u >= b`, with its slack at the nominal input.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HaltRow {
    pub a: Vec<f64>,
    pub b: f64,
    pub nominal_slack: f64,
}

/// What the filter faced at the step that stopped the run.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HaltRecord {
    pub t: f64,
    pub state: Vec<f64>,
    pub nominal: Vec<f64>,
    pub status: String,
    pub detail: String,
    pub rows: Vec<HaltRow>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunSummary {
    pub scenario: String,
    pub filter: String,
    pub steps: usize,
    pub dt: f64,
    /// Over all recorded states and the terminal state.
    pub min_boundary_h: f64,
    pub min_boundary_h_time: f64,
    /// Smallest safe-function value at the extent center.
    pub min_center_h: f64,
    pub active_steps: usize,
    pub infeasible_halts: usize,
    pub not_converged_halts: usize,
    pub halted_at: Option<f64>,
    pub halt: Option<HaltRecord>,
    pub solve_ms: SolveTimeStats,
    pub terminal_state: Vec<f64>,
    pub tau: Option<f64>,
    pub lipschitz_a: Option<f64>,
    pub lipschitz_b: Option<f64>,
}

pub(crate) fn clearance(sc: &Scenario, x: &[f64]) -> Result<f64> {
    Ok(boundary_minimum(&sc.extent, x, sc.probes, |y| sc.safe.value(y).unwrap_or(f64::NEG_INFINITY))?.0)
}

fn center_h(sc: &Scenario, x: &[f64]) -> Result<f64> {
    let c = sc.extent.center(x)?;
    sc.safe.value(&[c.x, c.y])
}

pub fn run_scenario(sc: &mut Scenario) -> Result<(Trajectory, RunSummary)> {
    let cfg = sc.config.clone();
    let n_steps = (cfg.horizon / cfg.dt).round() as usize;
    let mut x = sc.initial_state.clone();
    let mut traj = Trajectory {
        state_dimension: sc.system.state_dimension(),
        input_dimension: sc.system.input_dimension(),
        steps: Vec::with_capacity(n_steps),
        terminal_state: Vec::new(),
        terminal_time: 0.0,
    };
    let mut min_center = f64::INFINITY;
    let mut halted = None;
    let bound = sc.system.input_bound();
    let mut t = 0.0;
    for k in 0..n_steps {
        t = k as f64 * cfg.dt;
        let nominal = sc.controller.input(&sc.system, &x)?;
        let started = Instant::now();
        let out = sc.filter.filter(&x, &nominal)?;
        let elapsed = started.elapsed().as_secs_f64() * 1e3;
        min_center = min_center.min(center_h(sc, &x)?);
        let mut u: DVector<f64> = out.u;
        let nu = u.norm();
        if nu > bound {
            u *= bound / nu;
        }
        traj.steps.push(StepRecord {
            t,
            x: x.clone(),
            u: u.as_slice().to_vec(),
            min_boundary_h: clearance(sc, &x)?,
            filter_active: out.active,
            solve_ms: if cfg.output.record_solve_time { elapsed } else { 0.0 },
            status: out.status,
        });
        if out.status != FilterStatus::Optimal {
            let rows = sc
                .filter
                .diagnostic_rows(&x)?
                .into_iter()
                .map(|r| HaltRow {
                    nominal_slack: r.a.dot(&nominal) - r.b,
                    a: r.a.as_slice().to_vec(),
                    b: r.b,
                })
                .collect();
            halted = Some(HaltRecord {
                t,
                state: x.clone(),
                nominal: nominal.as_slice().to_vec(),
                status: out.status.as_str().into(),
                detail: out.detail,
                rows,
            });
            break;
        }
        x = sc.system.step(&x, u.as_slice(), cfg.dt)?.as_slice().to_vec();
        t = (k + 1) as f64 * cfg.dt;
    }
    traj.terminal_time = t;
    let terminal_h = clearance(sc, &x)?;
    min_center = min_center.min(center_h(sc, &x)?);
    traj.terminal_state = x;

    let mut min_h = (terminal_h, traj.terminal_time);
    for s in &traj.steps {
        if s.min_boundary_h < min_h.0 {
            min_h = (s.min_boundary_h, s.t);
        }
    }
    let mut times: Vec<f64> = traj.steps.iter().map(|s| s.solve_ms).collect();
    times.sort_by(f64::total_cmp);
    let solve_ms = if times.is_empty() {
        SolveTimeStats {
            min: 0.0,
            median: 0.0,
            max: 0.0,
        }
    } else {
        let mid = times.len() / 2;
        SolveTimeStats {
            min: times[0],
            median: if times.len() % 2 == 1 {
                times[mid]
            } else {
                0.5 * (times[mid - 1] + times[mid])
            },
            max: times[times.len() - 1],
        }
    };
    let summary = RunSummary {
        scenario: cfg.name.clone(),
        filter: cfg.filter.name().into(),
        steps: traj.steps.len(),
        dt: cfg.dt,
        min_boundary_h: min_h.0,
        min_boundary_h_time: min_h.1,
        min_center_h: min_center,
        active_steps: traj.steps.iter().filter(|s| s.filter_active).count(),
        infeasible_halts: usize::from(halted.as_ref().is_some_and(|h| h.status == FilterStatus::Infeasible.as_str())),
        not_converged_halts: usize::from(
            halted.as_ref().is_some_and(|h| h.status == FilterStatus::NotConverged.as_str()),
        ),
        halted_at: halted.as_ref().map(|h| h.t),
        halt: halted,
        solve_ms,
        terminal_state: traj.terminal_state.clone(),
        tau: sc.tau,
        lipschitz_a: sc.constants.as_ref().map(|c| c.a),
        lipschitz_b: sc.constants.as_ref().map(|c| c.b),
    };
    Ok((traj, summary))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::config::{ControllerSpec, ScenarioConfig};

    fn short(filter: &str) -> ScenarioConfig {
        let text = crate::sim::config::tests::CS1.replace("kind = \"zcbf\"", filter);
        ScenarioConfig::from_toml(&text).unwrap()
    }

    #[test]
    fn records_every_step() {
        let mut c = short("kind = \"zcbf\"");
        c.horizon = 0.03;
        let mut sc = c.build().unwrap();
        let (traj, sum) = run_scenario(&mut sc).unwrap();
        assert_eq!(traj.steps.len(), 3);
        assert!(traj.steps.windows(2).all(|w| w[0].t < w[1].t));
        assert_eq!(sum.steps, 3);
        assert!((traj.terminal_time - 0.03).abs() < 1e-12);
        assert!(sum.min_boundary_h <= traj.steps[0].min_boundary_h);
    }

    #[test]
    fn halts_on_infeasibility() {
        // a wall the extent already touches from the inside, with the sampled
        // tightening larger than the remaining clearance
        let text = r#"
name = "wall"
dt = 0.01
horizon = 1.0
initial_state = [-1.05, 0.0]

[system]
kind = "single_integrator"
dimension = 2
input_bound = 1.0

[extent]
kind = "ball"
radius = 1.0

[safe]
kind = "halfspace"
normal = [-1.0, 0.0]
offset = 0.0

[filter]
kind = "sampled"
samples = 4
gamma = 1.0
tau_margin = 1.0
constants = { source = "user", a = 1.0, b = 2.0 }

[controller]
kind = "constant"
input = [1.0, 0.0]
"#;
        let c = ScenarioConfig::from_toml(text).unwrap();
        let mut sc = c.build().unwrap();
        let (traj, sum) = run_scenario(&mut sc).unwrap();
        assert_eq!(traj.steps.len(), 1);
        assert_eq!(traj.steps[0].status, FilterStatus::Infeasible);
        assert_eq!(sum.infeasible_halts, 1);
        assert_eq!(sum.halted_at, Some(0.0));
        assert_eq!(traj.terminal_state, vec![-1.05, 0.0]);
        let halt = sum.halt.unwrap();
        assert_eq!((halt.state, halt.nominal, halt.status.as_str()), (vec![-1.05, 0.0], vec![1.0, 0.0], "infeasible"));
        assert_eq!(halt.rows.len(), 4);
        assert!(halt.rows.iter().any(|r| r.nominal_slack < 0.0));
    }

    #[test]
    fn deterministic_without_timing() {
        let mut c = short("kind = \"zcbf\"");
        c.horizon = 0.2;
        c.output.record_solve_time = false;
        c.controller = ControllerSpec::Constant { input: vec![1.0, 0.5] };
        let a = run_scenario(&mut c.build().unwrap()).unwrap();
        let b = run_scenario(&mut c.build().unwrap()).unwrap();
        assert_eq!(a.0, b.0);
    }
}
