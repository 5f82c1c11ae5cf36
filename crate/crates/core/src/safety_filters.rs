//! Admissible-input constraints and the minimally invasive filters built on
//! them: the point barrier filter, the sampled-boundary extent filter, and a
//! shared interface that the sum-of-squares filter also implements.

use std::time::Instant;

use nalgebra::DVector;

use crate::dynamics::ControlAffineSystem;
use crate::error::{check_dim, Error, Result};
use crate::geometry::{sample_boundary_with, BoundaryNet, ExtentFunction, NetOptions, SafeFunction};
use crate::qp::{solve_with, HalfspaceQP, QPOptions, QPSolution, QPStatus};

pub use crate::qp::LinearConstraint as LinearInputConstraint;

/// Class-K function used to soften barrier conditions away from the boundary.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ClassK {
    /// `gain * s`
    Linear(f64),
    /// `gain * s^3`
    Cubic(f64),
}

impl ClassK {
    pub fn new_linear(gain: f64) -> Result<Self> {
        if !(gain > 0.0 && gain.is_finite()) {
            return Err(Error::contract("class-K gain must be positive"));
        }
        Ok(ClassK::Linear(gain))
    }

    pub fn eval(&self, s: f64) -> f64 {
        match *self {
            ClassK::Linear(k) => k * s,
            ClassK::Cubic(k) => k * s * s * s,
        }
    }

    pub fn linear_gain(&self) -> Option<f64> {
        match *self {
            ClassK::Linear(k) => Some(k),
            ClassK::Cubic(_) => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Provenance {
    UserSupplied,
    GridEstimated { resolution: usize, margin: f64 },
}

/// `a` bounds `|dh/dy|` over the domain; `b` bounds `|dE/dx (f + g u)|`
/// over the domain, the extent boundary and `|u| <= M`.
#[derive(Clone, Debug, PartialEq)]
pub struct LipschitzConstants {
    pub a: f64,
    pub b: f64,
    pub provenance: Provenance,
}

impl LipschitzConstants {
    pub fn user(a: f64, b: f64) -> Result<Self> {
        if !(a >= 0.0 && b >= 0.0) || !a.is_finite() || !b.is_finite() {
            return Err(Error::contract("Lipschitz constants must be finite and nonnegative"));
        }
        Ok(LipschitzConstants {
            a,
            b,
            provenance: Provenance::UserSupplied,
        })
    }
}

/// Axis-aligned box.
#[derive(Clone, Debug, PartialEq)]
pub struct DomainBox {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl DomainBox {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() || lower.iter().zip(&upper).any(|(l, u)| !(l <= u)) {
            return Err(Error::contract("domain box bounds are inconsistent"));
        }
        Ok(DomainBox { lower, upper })
    }

    pub fn dimension(&self) -> usize {
        self.lower.len()
    }

    fn axis(&self, i: usize, resolution: usize) -> Vec<f64> {
        let (l, u) = (self.lower[i], self.upper[i]);
        if resolution == 1 || l == u {
            return vec![0.5 * (l + u)];
        }
        (0..resolution)
            .map(|k| l + (u - l) * k as f64 / (resolution - 1) as f64)
            .collect()
    }

    /// Calls `visit` on every point of the tensor grid built from `axes`.
    fn for_each(axes: &[Vec<f64>], mut visit: impl FnMut(&[f64]) -> Result<()>) -> Result<()> {
        let total: usize = axes.iter().map(Vec::len).product();
        let mut p = vec![0.0; axes.len()];
        for flat in 0..total {
            let mut rem = flat;
            for (i, ax) in axes.iter().enumerate() {
                p[i] = ax[rem % ax.len()];
                rem /= ax.len();
            }
            visit(&p)?;
        }
        Ok(())
    }
}

/// Lifts a safe function on points to the state: a safe function whose
/// dimension matches the state applies directly, a lower-dimensional one
/// acts on the leading state coordinates.
fn lifted_safe(h: &SafeFunction, x: &[f64]) -> Result<(f64, DVector<f64>)> {
    let d = h.dimension();
    if d > x.len() {
        return Err(Error::DimensionMismatch {
            what: "safe function versus state",
            expected: x.len(),
            got: d,
        });
    }
    let value = h.value(&x[..d])?;
    let g = h.gradient(&x[..d])?;
    let mut grad = DVector::zeros(x.len());
    grad.rows_mut(0, d).copy_from(&g);
    Ok((value, grad))
}

/// Point barrier condition `dh/dx (f + g u) + alpha(h) >= 0` as `a^T u >= b`.
pub fn zcbf_constraint(
    h: &SafeFunction,
    alpha: &ClassK,
    sys: &ControlAffineSystem,
    x: &[f64],
) -> Result<LinearInputConstraint> {
    let (hx, dh) = lifted_safe(h, x)?;
    let f = sys.drift(x)?;
    let g = sys.actuation(x)?;
    Ok(LinearInputConstraint::new(
        g.transpose() * &dh,
        -dh.dot(&f) - alpha.eval(hx),
    ))
}

/// Extent condition at a single point `y`:
/// `dE/dx (f + g u) + alpha1(E(x, y)) + alpha2(h(y)) >= 0`.
#[allow(clippy::too_many_arguments)]
pub fn eccbf_pointwise(
    extent: &ExtentFunction,
    h: &SafeFunction,
    alpha1: &ClassK,
    alpha2: &ClassK,
    sys: &ControlAffineSystem,
    x: &[f64],
    y: &[f64],
) -> Result<LinearInputConstraint> {
    check_dim("extent state", extent.state_dimension(), sys.state_dimension())?;
    let de = extent.grad_x(x, y)?;
    let e = extent.value(x, y)?;
    let hy = h.value(y)?;
    let f = sys.drift(x)?;
    let g = sys.actuation(x)?;
    Ok(LinearInputConstraint::new(
        g.transpose() * &de,
        -de.dot(&f) - alpha1.eval(e) - alpha2.eval(hy),
    ))
}

/// Inputs to [`estimate_constants`].
#[derive(Clone, Debug)]
pub struct EstimateOptions {
    /// Grid points per axis.
    pub resolution: usize,
    pub margin: f64,
    /// Boundary points per state when bounding `B`.
    pub boundary_points: usize,
}

impl Default for EstimateOptions {
    fn default() -> Self {
        EstimateOptions {
            resolution: 50,
            margin: 1.1,
            boundary_points: 256,
        }
    }
}

/// Grid estimates of the constants.
///
/// `A` is the largest `|dh/dy|` on a grid over the point box, `B` the
/// largest `|dE/dx f| + M |g^T dE/dx^T|` over a state grid and the extent
/// boundary at each state (the exact supremum over `|u| <= M` of the
/// triangle bound). For built-in extents on drift-free models with
/// position-independent actuation, `B` does not depend on the position
/// coordinates, so those axes collapse to one grid value.
pub fn estimate_constants(
    extent: &ExtentFunction,
    h: &SafeFunction,
    sys: &ControlAffineSystem,
    state_domain: &DomainBox,
    point_domain: &DomainBox,
    opts: &EstimateOptions,
) -> Result<LipschitzConstants> {
    if opts.resolution < 2 {
        return Err(Error::contract("estimation grid needs at least two points per axis"));
    }
    if !(opts.margin >= 1.0) {
        return Err(Error::contract("estimation margin must be at least 1"));
    }
    check_dim("state domain", sys.state_dimension(), state_domain.dimension())?;
    check_dim("point domain", h.dimension(), point_domain.dimension())?;

    let mut a: f64 = 0.0;
    let axes: Vec<Vec<f64>> = (0..point_domain.dimension())
        .map(|i| point_domain.axis(i, opts.resolution))
        .collect();
    DomainBox::for_each(&axes, |y| {
        a = a.max(h.gradient(y)?.norm());
        Ok(())
    })?;

    let translation_invariant = extent.is_builtin()
        && matches!(
            sys.kind(),
            crate::dynamics::SystemKind::SingleIntegrator(_) | crate::dynamics::SystemKind::Unicycle
        );
    let pos = extent.position_indices();
    let axes: Vec<Vec<f64>> = (0..state_domain.dimension())
        .map(|i| {
            if translation_invariant && pos.contains(&i) {
                state_domain.axis(i, 1)
            } else {
                state_domain.axis(i, opts.resolution)
            }
        })
        .collect();
    let m = sys.input_bound();
    let net_opts = NetOptions {
        probe_factor: 1,
        min_probes: 8,
        ..NetOptions::default()
    };
    let mut b: f64 = 0.0;
    DomainBox::for_each(&axes, |x| {
        let f = sys.drift(x)?;
        let g = sys.actuation(x)?;
        let net = sample_boundary_with(extent, x, opts.boundary_points, &net_opts)?;
        for y in &net.samples {
            let de = extent.grad_x(x, &[y.x, y.y])?;
            let val = de.dot(&f).abs() + m * (g.transpose() * &de).norm();
            b = b.max(val);
        }
        Ok(())
    })?;

    Ok(LipschitzConstants {
        a: a * opts.margin,
        b: b * opts.margin,
        provenance: Provenance::GridEstimated {
            resolution: opts.resolution,
            margin: opts.margin,
        },
    })
}

/// One tightened row per net sample:
/// `dE(x, y*)/dx (f + g u) + gamma h(y*) >= (B + gamma A) tau`.
pub fn sampled_constraints(
    extent: &ExtentFunction,
    h: &SafeFunction,
    net: &BoundaryNet,
    consts: &LipschitzConstants,
    gamma: f64,
    sys: &ControlAffineSystem,
    x: &[f64],
) -> Result<Vec<LinearInputConstraint>> {
    if !(gamma > 0.0) {
        return Err(Error::contract("gamma must be positive"));
    }
    let f = sys.drift(x)?;
    let g = sys.actuation(x)?;
    let margin = (consts.b + gamma * consts.a) * net.tau;
    net.samples
        .iter()
        .map(|y| {
            let yy = [y.x, y.y];
            let de = extent.grad_x(x, &yy)?;
            Ok(LinearInputConstraint::new(
                g.transpose() * &de,
                margin - de.dot(&f) - gamma * h.value(&yy)?,
            ))
        })
        .collect()
}

/// Projects `k` onto `{u : every constraint holds, |u| <= M}`.
pub fn filter_input(
    constraints: &[LinearInputConstraint],
    k: &DVector<f64>,
    input_bound: f64,
    opts: &QPOptions,
) -> Result<QPSolution> {
    let qp = HalfspaceQP::new(k.clone(), constraints.to_vec(), input_bound)?;
    solve_with(&qp, opts)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FilterStatus {
    Optimal,
    Infeasible,
    NotConverged,
}

impl FilterStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            FilterStatus::Optimal => "ok",
            FilterStatus::Infeasible => "infeasible",
            FilterStatus::NotConverged => "not_converged",
        }
    }
}

impl From<QPStatus> for FilterStatus {
    fn from(s: QPStatus) -> Self {
        match s {
            QPStatus::Optimal => FilterStatus::Optimal,
            QPStatus::Infeasible => FilterStatus::Infeasible,
            QPStatus::MaxIterations => FilterStatus::NotConverged,
        }
    }
}

#[derive(Clone, Debug)]
pub struct FilterOutcome {
    pub u: DVector<f64>,
    pub status: FilterStatus,
    /// Whether the filter changed the nominal input.
    pub active: bool,
    pub solve_ms: f64,
    pub detail: String,
}

impl FilterOutcome {
    fn from_qp(k: &DVector<f64>, sol: QPSolution, started: Instant) -> Self {
        let status = FilterStatus::from(sol.status);
        FilterOutcome {
            active: status == FilterStatus::Optimal && is_modified(k, &sol.u),
            detail: format!("qp iterations {}, residual {:.3e}", sol.iterations, sol.residual),
            u: sol.u,
            status,
            solve_ms: started.elapsed().as_secs_f64() * 1e3,
        }
    }
}

pub(crate) fn is_modified(k: &DVector<f64>, u: &DVector<f64>) -> bool {
    (k - u).norm() > 1e-9 * k.norm().max(1.0)
}

/// A minimally invasive filter: maps a state and nominal input to the input
/// that is applied.
pub trait SafetyFilter: Send + Sync {
    fn name(&self) -> &'static str;
    fn filter(&self, x: &[f64], k: &DVector<f64>) -> Result<FilterOutcome>;

    /// Input rows the filter enforces at `x`, for halt diagnostics. Filters
    /// without a row form (pass-through, sum-of-squares) return none.
    fn diagnostic_rows(&self, _x: &[f64]) -> Result<Vec<LinearInputConstraint>> {
        Ok(Vec::new())
    }
}

/// Applies the nominal input unchanged (clipped to the input bound).
#[derive(Clone, Debug)]
pub struct PassThrough {
    pub input_bound: f64,
}

impl SafetyFilter for PassThrough {
    fn name(&self) -> &'static str {
        "none"
    }

    fn filter(&self, _x: &[f64], k: &DVector<f64>) -> Result<FilterOutcome> {
        let mut u = k.clone();
        let n = u.norm();
        if n > self.input_bound {
            u *= self.input_bound / n;
        }
        Ok(FilterOutcome {
            u,
            status: FilterStatus::Optimal,
            active: false,
            solve_ms: 0.0,
            detail: String::new(),
        })
    }
}

/// Point barrier filter: keeps the reference point inside the safe set.
#[derive(Clone, Debug)]
pub struct ZcbfFilter {
    pub safe: SafeFunction,
    pub alpha: ClassK,
    pub system: ControlAffineSystem,
    pub qp: QPOptions,
}

impl SafetyFilter for ZcbfFilter {
    fn name(&self) -> &'static str {
        "zcbf"
    }

    fn filter(&self, x: &[f64], k: &DVector<f64>) -> Result<FilterOutcome> {
        let started = Instant::now();
        let row = zcbf_constraint(&self.safe, &self.alpha, &self.system, x)?;
        let sol = filter_input(&[row], k, self.system.input_bound(), &self.qp)?;
        Ok(FilterOutcome::from_qp(k, sol, started))
    }

    fn diagnostic_rows(&self, x: &[f64]) -> Result<Vec<LinearInputConstraint>> {
        Ok(vec![zcbf_constraint(&self.safe, &self.alpha, &self.system, x)?])
    }
}

/// Sampled-boundary extent filter.
///
/// The net parameter is measured once at construction and multiplied by
/// `tau_margin`; the net is then re-solved on the boundary at every call.
/// The covering radius of the built-in extents is invariant under the
/// translations and rotations they undergo, so the certificate carries over.
#[derive(Clone, Debug)]
pub struct SampledFilter {
    extent: ExtentFunction,
    safe: SafeFunction,
    system: ControlAffineSystem,
    constants: LipschitzConstants,
    gamma: f64,
    template: BoundaryNet,
    qp: QPOptions,
}

impl SampledFilter {
    /// Builds the net at `reference_state` with `samples` points and scales
    /// the measured net parameter by `tau_margin` (at least 1).
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        extent: ExtentFunction,
        safe: SafeFunction,
        system: ControlAffineSystem,
        constants: LipschitzConstants,
        gamma: f64,
        samples: usize,
        net_options: &NetOptions,
        tau_margin: f64,
        reference_state: &[f64],
        qp: QPOptions,
    ) -> Result<Self> {
        if !(gamma > 0.0) {
            return Err(Error::contract("gamma must be positive"));
        }
        if !(tau_margin >= 1.0) {
            return Err(Error::contract("net margin must be at least 1"));
        }
        if !extent.is_builtin() {
            return Err(Error::Unsupported(
                "the sampled filter relies on rigid-motion invariance of built-in extents".into(),
            ));
        }
        check_dim("extent state", system.state_dimension(), extent.state_dimension())?;
        let mut template = sample_boundary_with(&extent, reference_state, samples, net_options)?;
        template.tau *= tau_margin;
        let tightening = (constants.b + gamma * constants.a) * template.tau;
        if qp.tol * 100.0 >= tightening {
            return Err(Error::config(format!(
                "QP tolerance {} is not small against the constraint tightening {tightening}",
                qp.tol
            )));
        }
        Ok(SampledFilter {
            extent,
            safe,
            system,
            constants,
            gamma,
            template,
            qp,
        })
    }

    pub fn tau(&self) -> f64 {
        self.template.tau
    }

    pub fn constants(&self) -> &LipschitzConstants {
        &self.constants
    }

    pub fn samples(&self) -> usize {
        self.template.len()
    }

    pub fn net_at(&self, x: &[f64]) -> Result<BoundaryNet> {
        self.template.moved_to(&self.extent, x)
    }

    pub fn constraints(&self, x: &[f64]) -> Result<Vec<LinearInputConstraint>> {
        let net = self.net_at(x)?;
        sampled_constraints(
            &self.extent,
            &self.safe,
            &net,
            &self.constants,
            self.gamma,
            &self.system,
            x,
        )
    }
}

impl SafetyFilter for SampledFilter {
    fn name(&self) -> &'static str {
        "sampled"
    }

    fn filter(&self, x: &[f64], k: &DVector<f64>) -> Result<FilterOutcome> {
        let started = Instant::now();
        let rows = self.constraints(x)?;
        let sol = filter_input(&rows, k, self.system.input_bound(), &self.qp)?;
        Ok(FilterOutcome::from_qp(k, sol, started))
    }

    fn diagnostic_rows(&self, x: &[f64]) -> Result<Vec<LinearInputConstraint>> {
        self.constraints(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sos::MultiPoly;

    fn unit_disk() -> SafeFunction {
        SafeFunction::ball(vec![0.0, 0.0], 1.0).unwrap()
    }

    fn minus_y1() -> SafeFunction {
        SafeFunction::halfspace(vec![-1.0, 0.0], 0.0).unwrap()
    }

    #[test]
    fn zcbf_rows() {
        let sys = ControlAffineSystem::single_integrator(2, 1.0).unwrap();
        let alpha = ClassK::Linear(1.0);
        let r = zcbf_constraint(&unit_disk(), &alpha, &sys, &[0.0, 0.0]).unwrap();
        assert_eq!((r.a.as_slice(), r.b), (&[0.0, 0.0][..], -1.0));
        let r = zcbf_constraint(&unit_disk(), &alpha, &sys, &[1.0, 0.0]).unwrap();
        assert_eq!((r.a.as_slice(), r.b), (&[-2.0, 0.0][..], 0.0));
        let r = zcbf_constraint(&unit_disk(), &alpha, &sys, &[0.5, 0.0]).unwrap();
        assert_eq!((r.a.as_slice(), r.b), (&[-1.0, 0.0][..], -0.75));
    }

    #[test]
    fn eccbf_rows() {
        let sys = ControlAffineSystem::single_integrator(2, 1.0).unwrap();
        let e = ExtentFunction::ball(1.0, 2).unwrap();
        let id = ClassK::Linear(1.0);
        let r = eccbf_pointwise(&e, &minus_y1(), &id, &id, &sys, &[-3.0, 0.0], &[-2.0, 0.0]).unwrap();
        assert_eq!((r.a.as_slice(), r.b), (&[-2.0, 0.0][..], -2.0));
        let r = eccbf_pointwise(&e, &minus_y1(), &id, &id, &sys, &[-3.0, 0.0], &[-3.0, 1.0]).unwrap();
        assert_eq!((r.a.as_slice(), r.b), (&[0.0, -2.0][..], -3.0));
        let r = eccbf_pointwise(&e, &minus_y1(), &id, &id, &sys, &[-30.0, 0.0], &[-30.0, 0.5]).unwrap();
        assert!(r.b < -29.0);
    }

    #[test]
    fn class_k_monotone() {
        for k in [ClassK::Linear(0.5), ClassK::Cubic(2.0)] {
            assert_eq!(k.eval(0.0), 0.0);
            let grid: Vec<f64> = (-50..=50).map(|i| i as f64 * 0.1).collect();
            assert!(grid.windows(2).all(|w| k.eval(w[0]) < k.eval(w[1])));
        }
    }

    #[test]
    fn example_constants() {
        let sys = ControlAffineSystem::single_integrator(2, 1.0).unwrap();
        let e = ExtentFunction::ball(1.0, 2).unwrap();
        let dom = DomainBox::new(vec![-4.0, -2.5], vec![0.0, 2.5]).unwrap();
        let opts = EstimateOptions {
            margin: 1.0,
            ..EstimateOptions::default()
        };
        let c = estimate_constants(&e, &minus_y1(), &sys, &dom, &dom, &opts).unwrap();
        assert!((c.a - 1.0).abs() < 1e-12 && (c.b - 2.0).abs() < 1e-9, "{c:?}");

        let flat = SafeFunction::polynomial(MultiPoly::constant(2, 3.0)).unwrap();
        let c = estimate_constants(&e, &flat, &sys, &dom, &dom, &opts).unwrap();
        assert_eq!(c.a, 0.0);

        let r = 0.3;
        let e = ExtentFunction::ball(r, 2).unwrap();
        let sys = ControlAffineSystem::single_integrator(2, 1.7).unwrap();
        let c = estimate_constants(&e, &minus_y1(), &sys, &dom, &dom, &EstimateOptions::default()).unwrap();
        let exact = 2.0 * r * 1.7;
        assert!(c.b >= exact && c.b <= exact * 1.1 * 1.02, "{} vs {exact}", c.b);
        assert!(estimate_constants(
            &e,
            &minus_y1(),
            &sys,
            &dom,
            &dom,
            &EstimateOptions {
                resolution: 1,
                ..EstimateOptions::default()
            }
        )
        .is_err());
    }

    #[test]
    fn sampled_rows_two_points() {
        let sys = ControlAffineSystem::single_integrator(2, 1.0).unwrap();
        let e = ExtentFunction::ball(1.0, 2).unwrap();
        let consts = LipschitzConstants::user(1.0, 2.0).unwrap();
        let gamma = 0.5;
        let x = [-7.0, 0.3];
        let net = crate::geometry::sample_boundary(&e, &x, 2).unwrap();
        let rows = sampled_constraints(&e, &minus_y1(), &net, &consts, gamma, &sys, &x).unwrap();
        let rhs = (2.0 + gamma) * net.tau + gamma * x[0];
        // samples at +90 and -90 degrees: -2 u2 >= rhs and +2 u2 >= rhs
        assert!((rows[0].a[0]).abs() < 1e-10 && (rows[0].a[1] + 2.0).abs() < 1e-10);
        assert!((rows[1].a[0]).abs() < 1e-10 && (rows[1].a[1] - 2.0).abs() < 1e-10);
        for r in &rows {
            assert!((r.b - rhs).abs() < 1e-10);
        }
    }

    #[test]
    fn pass_through_clips() {
        let f = PassThrough { input_bound: 1.0 };
        let out = f.filter(&[0.0], &DVector::from_column_slice(&[3.0, 4.0])).unwrap();
        assert!((out.u.norm() - 1.0).abs() < 1e-15);
    }
}
