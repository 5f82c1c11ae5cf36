//! Control-affine models `xdot = f(x) + g(x) u`, nominal controllers and a
//! fixed-step RK4 integrator with zero-order-hold input.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{check_dim, Error, Result};

pub type DriftFn = Arc<dyn Fn(&[f64]) -> DVector<f64> + Send + Sync>;
pub type ActuationFn = Arc<dyn Fn(&[f64]) -> DMatrix<f64> + Send + Sync>;

#[derive(Clone)]
pub enum SystemKind {
    SingleIntegrator(usize),
    /// State `(x1, x2, phi)`, input `(v, omega)`.
    Unicycle,
    Custom {
        n: usize,
        m: usize,
        drift: DriftFn,
        actuation: ActuationFn,
    },
}

impl fmt::Debug for SystemKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SystemKind::SingleIntegrator(n) => write!(f, "SingleIntegrator({n})"),
            SystemKind::Unicycle => write!(f, "Unicycle"),
            SystemKind::Custom { n, m, .. } => write!(f, "Custom {{ n: {n}, m: {m} }}"),
        }
    }
}

#[derive(Clone, Debug)]
pub struct ControlAffineSystem {
    kind: SystemKind,
    input_bound: f64,
}

/// Wraps an angle into `[-pi, pi)`.
pub fn wrap_angle(a: f64) -> f64 {
    let w = (a + PI).rem_euclid(2.0 * PI) - PI;
    // rem_euclid can round up to exactly 2 pi for tiny negative inputs
    if w >= PI {
        w - 2.0 * PI
    } else {
        w
    }
}

impl ControlAffineSystem {
    pub fn new(kind: SystemKind, input_bound: f64) -> Result<Self> {
        if !(input_bound > 0.0) || !input_bound.is_finite() {
            return Err(Error::contract("input bound must be positive and finite"));
        }
        match &kind {
            SystemKind::SingleIntegrator(0) => {
                return Err(Error::contract("single integrator needs a positive dimension"))
            }
            SystemKind::Custom { n, m, .. } if *n == 0 || *m == 0 => {
                return Err(Error::contract("custom system dimensions must be positive"))
            }
            _ => {}
        }
        Ok(ControlAffineSystem { kind, input_bound })
    }

    pub fn single_integrator(n: usize, input_bound: f64) -> Result<Self> {
        Self::new(SystemKind::SingleIntegrator(n), input_bound)
    }

    pub fn unicycle(input_bound: f64) -> Result<Self> {
        Self::new(SystemKind::Unicycle, input_bound)
    }

    pub fn kind(&self) -> &SystemKind {
        &self.kind
    }

    pub fn state_dimension(&self) -> usize {
        match &self.kind {
            SystemKind::SingleIntegrator(n) => *n,
            SystemKind::Unicycle => 3,
            SystemKind::Custom { n, .. } => *n,
        }
    }

    pub fn input_dimension(&self) -> usize {
        match &self.kind {
            SystemKind::SingleIntegrator(n) => *n,
            SystemKind::Unicycle => 2,
            SystemKind::Custom { m, .. } => *m,
        }
    }

    pub fn input_bound(&self) -> f64 {
        self.input_bound
    }

    /// Index of a wrapped angle coordinate, if the model has one.
    pub fn heading_index(&self) -> Option<usize> {
        matches!(self.kind, SystemKind::Unicycle).then_some(2)
    }

    pub fn drift(&self, x: &[f64]) -> Result<DVector<f64>> {
        check_dim("state", self.state_dimension(), x.len())?;
        Ok(match &self.kind {
            SystemKind::SingleIntegrator(n) => DVector::zeros(*n),
            SystemKind::Unicycle => DVector::zeros(3),
            SystemKind::Custom { n, drift, .. } => {
                let f = drift(x);
                check_dim("custom drift", *n, f.len())?;
                f
            }
        })
    }

    pub fn actuation(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        check_dim("state", self.state_dimension(), x.len())?;
        Ok(match &self.kind {
            SystemKind::SingleIntegrator(n) => DMatrix::identity(*n, *n),
            SystemKind::Unicycle => {
                let (s, c) = x[2].sin_cos();
                DMatrix::from_row_slice(3, 2, &[c, 0.0, s, 0.0, 0.0, 1.0])
            }
            SystemKind::Custom { n, m, actuation, .. } => {
                let g = actuation(x);
                if g.nrows() != *n || g.ncols() != *m {
                    return Err(Error::contract(format!(
                        "custom actuation returned {}x{}, expected {n}x{m}",
                        g.nrows(),
                        g.ncols()
                    )));
                }
                g
            }
        })
    }

    pub fn vector_field(&self, x: &[f64], u: &[f64]) -> Result<DVector<f64>> {
        check_dim("input", self.input_dimension(), u.len())?;
        let g = self.actuation(x)?;
        Ok(self.drift(x)? + g * DVector::from_column_slice(u))
    }

    /// One RK4 step of length `dt` with `u` held constant.
    pub fn step(&self, x: &[f64], u: &[f64], dt: f64) -> Result<DVector<f64>> {
        if !(dt > 0.0) {
            return Err(Error::contract("time step must be positive"));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("state"));
        }
        if u.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("input"));
        }
        let norm = u.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > self.input_bound + 1e-9 {
            return Err(Error::contract(format!(
                "input norm {norm} exceeds bound {}",
                self.input_bound
            )));
        }
        let x0 = DVector::from_column_slice(x);
        let k1 = self.vector_field(x, u)?;
        let k2 = self.vector_field((&x0 + &k1 * (dt / 2.0)).as_slice(), u)?;
        let k3 = self.vector_field((&x0 + &k2 * (dt / 2.0)).as_slice(), u)?;
        let k4 = self.vector_field((&x0 + &k3 * dt).as_slice(), u)?;
        let mut next = x0 + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0);
        if next.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("integrated state"));
        }
        if let Some(i) = self.heading_index() {
            next[i] = wrap_angle(next[i]);
        }
        Ok(next)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Gains {
    /// Linear (or single-integrator) proportional gain.
    pub kv: f64,
    /// Heading gain, unicycle only.
    pub kw: f64,
    /// Below this distance the unicycle's turn rate is faded out so the law
    /// stays continuous at the goal.
    pub arrive_radius: f64,
}

impl Default for Gains {
    fn default() -> Self {
        Gains {
            kv: 1.0,
            kw: 2.0,
            arrive_radius: 0.05,
        }
    }
}

pub type PolicyFn = Arc<dyn Fn(&[f64]) -> DVector<f64> + Send + Sync>;

#[derive(Clone)]
pub enum NominalController {
    GoToGoal {
        goal: Vec<f64>,
        gains: Gains,
    },
    /// Visits the goals in order, cycling, switching once within
    /// `switch_radius` of the current goal.
    WaypointCycle {
        goals: Vec<Vec<f64>>,
        switch_radius: f64,
        gains: Gains,
        current: usize,
    },
    ConstantInput(Vec<f64>),
    Custom(PolicyFn),
}

impl fmt::Debug for NominalController {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NominalController::GoToGoal { goal, gains } => f
                .debug_struct("GoToGoal")
                .field("goal", goal)
                .field("gains", gains)
                .finish(),
            NominalController::WaypointCycle {
                goals,
                switch_radius,
                current,
                ..
            } => f
                .debug_struct("WaypointCycle")
                .field("goals", goals)
                .field("switch_radius", switch_radius)
                .field("current", current)
                .finish(),
            NominalController::ConstantInput(u) => f.debug_tuple("ConstantInput").field(u).finish(),
            NominalController::Custom(_) => f.write_str("Custom"),
        }
    }
}

fn clip(mut u: DVector<f64>, bound: f64) -> DVector<f64> {
    let n = u.norm();
    if n > bound {
        u *= bound / n;
    }
    u
}

fn go_to_goal(sys: &ControlAffineSystem, x: &[f64], goal: &[f64], gains: &Gains) -> DVector<f64> {
    match sys.kind() {
        SystemKind::Unicycle => {
            let ex = goal[0] - x[0];
            let ey = goal[1] - x[1];
            let dist = ex.hypot(ey);
            if dist == 0.0 {
                return DVector::zeros(2);
            }
            let eth = wrap_angle(ey.atan2(ex) - x[2]);
            let fade = (dist / gains.arrive_radius).min(1.0);
            DVector::from_column_slice(&[gains.kv * dist * eth.cos(), gains.kw * eth * fade])
        }
        _ => {
            let n = goal.len().min(x.len());
            let mut u = DVector::zeros(sys.input_dimension());
            for i in 0..n.min(u.len()) {
                u[i] = gains.kv * (goal[i] - x[i]);
            }
            u
        }
    }
}

impl NominalController {
    pub fn go_to_goal(goal: Vec<f64>, gains: Gains) -> Self {
        NominalController::GoToGoal { goal, gains }
    }

    pub fn waypoint_cycle(goals: Vec<Vec<f64>>, switch_radius: f64, gains: Gains) -> Self {
        NominalController::WaypointCycle {
            goals,
            switch_radius,
            gains,
            current: 0,
        }
    }

    /// Nominal input at `x`, clipped to the system's input bound.
    pub fn input(&mut self, sys: &ControlAffineSystem, x: &[f64]) -> Result<DVector<f64>> {
        check_dim("state", sys.state_dimension(), x.len())?;
        let m = sys.input_dimension();
        let u = match self {
            NominalController::GoToGoal { goal, gains } => go_to_goal(sys, x, goal, gains),
            NominalController::WaypointCycle {
                goals,
                switch_radius,
                gains,
                current,
            } => {
                if goals.is_empty() {
                    return Err(Error::contract("waypoint cycle without goals"));
                }
                let here = &goals[*current];
                let d: f64 = here
                    .iter()
                    .zip(x)
                    .map(|(g, v)| (g - v) * (g - v))
                    .sum::<f64>()
                    .sqrt();
                if d < *switch_radius {
                    *current = (*current + 1) % goals.len();
                }
                go_to_goal(sys, x, &goals[*current], gains)
            }
            NominalController::ConstantInput(u) => DVector::from_column_slice(u),
            NominalController::Custom(policy) => policy(x),
        };
        check_dim("nominal input", m, u.len())?;
        if u.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("nominal input"));
        }
        Ok(clip(u, sys.input_bound()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unicycle_actuation() {
        let sys = ControlAffineSystem::unicycle(1.0).unwrap();
        let g = sys.actuation(&[0.0, 0.0, 0.0]).unwrap();
        assert_eq!(g, DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 0.0, 0.0, 1.0]));
        let g = sys.actuation(&[0.0, 0.0, PI / 2.0]).unwrap();
        assert!(g[(0, 0)].abs() < 1e-16 && g[(1, 0)] == 1.0 && g[(2, 0)] == 0.0);
        assert!(sys.drift(&[1.0, 2.0, 3.0]).unwrap().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn single_integrator_step_is_exact() {
        let sys = ControlAffineSystem::single_integrator(2, 1.0).unwrap();
        assert_eq!(sys.actuation(&[3.0, 4.0]).unwrap(), DMatrix::identity(2, 2));
        let x = sys.step(&[0.0, 0.0], &[1.0, 0.0], 0.1).unwrap();
        assert!((x[0] - 0.1).abs() < 1e-16 && x[1] == 0.0);
    }

    #[test]
    fn unicycle_steps() {
        let sys = ControlAffineSystem::unicycle(4.0).unwrap();
        let x = sys.step(&[0.0, 0.0, 0.0], &[1.0, 0.0], 0.5).unwrap();
        assert_eq!(x.as_slice(), &[0.5, 0.0, 0.0]);
        let x = sys.step(&[0.0, 0.0, 0.0], &[0.0, PI], 1.0).unwrap();
        assert!(x[0].abs() < 1e-15 && x[1].abs() < 1e-15);
        assert!((x[2] + PI).abs() < 1e-6, "{}", x[2]);
    }

    #[test]
    fn step_rejects_bad_inputs() {
        let sys = ControlAffineSystem::unicycle(1.0).unwrap();
        assert!(sys.step(&[0.0, 0.0, 0.0], &[2.0, 0.0], 0.1).is_err());
        assert!(matches!(
            sys.step(&[f64::NAN, 0.0, 0.0], &[0.0, 0.0], 0.1),
            Err(Error::NonFinite(_))
        ));
        assert!(sys.step(&[0.0, 0.0, 0.0], &[0.0, 0.0], 0.0).is_err());
        assert!(sys.step(&[0.0, 0.0], &[0.0, 0.0], 0.1).is_err());
    }

    #[test]
    fn wrap_range() {
        for a in [-10.0, -PI, -1e-300, 0.0, PI, 3.0 * PI, 7.5] {
            let w = wrap_angle(a);
            assert!((-PI..PI).contains(&w), "{a} -> {w}");
            assert!(((w - a) / (2.0 * PI)).round() * 2.0 * PI - (w - a) < 1e-12);
        }
    }

    #[test]
    fn go_to_goal_laws() {
        let si = ControlAffineSystem::single_integrator(2, 5.0).unwrap();
        let mut k = NominalController::go_to_goal(vec![1.0, 0.0], Gains::default());
        assert_eq!(k.input(&si, &[0.0, 0.0]).unwrap().as_slice(), &[1.0, 0.0]);
        assert_eq!(k.input(&si, &[1.0, 0.0]).unwrap().as_slice(), &[0.0, 0.0]);

        let uni = ControlAffineSystem::unicycle(1.0).unwrap();
        let mut k = NominalController::go_to_goal(vec![0.0, 1.0], Gains::default());
        let u = k.input(&uni, &[0.0, 0.0, 0.0]).unwrap();
        assert!(u[1] > 0.0 && u.norm() <= 1.0 + 1e-12);
        // Goal directly behind the left shoulder: positive turn, forward speed
        // from the cosine term is positive only when the goal is ahead.
        let u = k.input(&uni, &[0.0, 0.0, 0.3]).unwrap();
        assert!(u[0] > 0.0 && u[1] > 0.0);
        let mut at = NominalController::go_to_goal(vec![0.5, 0.5], Gains::default());
        assert_eq!(at.input(&uni, &[0.5, 0.5, 1.0]).unwrap().as_slice(), &[0.0, 0.0]);
    }

    #[test]
    fn waypoints_advance() {
        let si = ControlAffineSystem::single_integrator(2, 1.0).unwrap();
        let mut k = NominalController::waypoint_cycle(
            vec![vec![0.0, 0.0], vec![1.0, 0.0]],
            0.1,
            Gains::default(),
        );
        let u = k.input(&si, &[0.01, 0.0]).unwrap();
        assert!(u[0] > 0.9);
    }
}
