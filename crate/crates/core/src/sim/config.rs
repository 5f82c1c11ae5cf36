//! Scenario files: one TOML document per closed-loop run.

use nalgebra::Matrix2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dynamics::{ControlAffineSystem, Gains, NominalController};
use crate::error::{Error, Result};
use crate::geometry::{boundary_minimum, ExtentFunction, NetOptions, SafeFunction, SamplingMode};
use crate::qp::QPOptions;
use crate::safety_filters::{
    estimate_constants, ClassK, DomainBox, EstimateOptions, LipschitzConstants, PassThrough, SafetyFilter,
    SampledFilter, ZcbfFilter,
};
use crate::sdp::SdpOptions;
use crate::sos::{MultiPoly, SosFilter};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    /// Seeds the initial-state jitter; the run itself is deterministic.
    #[serde(default)]
    pub seed: u64,
    pub dt: f64,
    pub horizon: f64,
    pub initial_state: Vec<f64>,
    /// Half-width of a uniform perturbation applied to the initial state.
    #[serde(default)]
    pub initial_jitter: f64,
    pub system: SystemSpec,
    pub extent: ExtentSpec,
    pub safe: SafeSpec,
    pub filter: FilterSpec,
    pub controller: ControllerSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domain: Option<DomainSpec>,
    #[serde(default)]
    pub output: OutputSpec,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SystemSpec {
    SingleIntegrator { dimension: usize, input_bound: f64 },
    Unicycle { input_bound: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ExtentSpec {
    Ball {
        radius: f64,
    },
    /// `p^T shape p <= size^2` in body coordinates.
    Ellipse {
        shape: [[f64; 2]; 2],
        size: f64,
    },
    /// `(a p1)^4 + (b p2)^4 <= size^4` in body coordinates.
    Superellipse4 {
        a: f64,
        b: f64,
        size: f64,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolyTerm {
    pub exponents: Vec<u32>,
    pub coeff: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SafeSpec {
    Halfspace { normal: Vec<f64>, offset: f64 },
    Ball { center: Vec<f64>, radius: f64 },
    Superellipse { center: Vec<f64>, semi_axes: Vec<f64>, power: u32 },
    Polynomial { dimension: usize, terms: Vec<PolyTerm> },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ClassKSpec {
    Linear { gain: f64 },
    Cubic { gain: f64 },
}

impl ClassKSpec {
    fn gain(&self) -> f64 {
        match *self {
            ClassKSpec::Linear { gain } | ClassKSpec::Cubic { gain } => gain,
        }
    }

    fn build(&self) -> ClassK {
        match *self {
            ClassKSpec::Linear { gain } => ClassK::Linear(gain),
            ClassKSpec::Cubic { gain } => ClassK::Cubic(gain),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case", deny_unknown_fields)]
pub enum ConstantsSpec {
    User { a: f64, b: f64 },
    Estimate { resolution: usize, margin: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SamplingSpec {
    #[default]
    UniformAngle,
    ArcLength,
}

fn default_tau_margin() -> f64 {
    1.05
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FilterSpec {
    None,
    Zcbf {
        alpha: ClassKSpec,
    },
    Sampled {
        samples: usize,
        gamma: f64,
        constants: ConstantsSpec,
        #[serde(default = "default_tau_margin")]
        tau_margin: f64,
        #[serde(default)]
        sampling: SamplingSpec,
    },
    Sos {
        alpha1: ClassKSpec,
        alpha2: ClassKSpec,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        multiplier_degree: Option<u32>,
    },
}

impl FilterSpec {
    pub fn name(&self) -> &'static str {
        match self {
            FilterSpec::None => "none",
            FilterSpec::Zcbf { .. } => "zcbf",
            FilterSpec::Sampled { .. } => "sampled",
            FilterSpec::Sos { .. } => "sos",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GainsSpec {
    pub kv: f64,
    pub kw: f64,
    pub arrive_radius: f64,
}

impl Default for GainsSpec {
    fn default() -> Self {
        let g = Gains::default();
        GainsSpec {
            kv: g.kv,
            kw: g.kw,
            arrive_radius: g.arrive_radius,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ControllerSpec {
    GoToGoal {
        goal: Vec<f64>,
        #[serde(default)]
        gains: GainsSpec,
    },
    Waypoints {
        goals: Vec<Vec<f64>>,
        switch_radius: f64,
        #[serde(default)]
        gains: GainsSpec,
    },
    Constant {
        input: Vec<f64>,
    },
}

/// Boxes over which Lipschitz constants are estimated.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainSpec {
    pub state_lower: Vec<f64>,
    pub state_upper: Vec<f64>,
    pub point_lower: Vec<f64>,
    pub point_upper: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSpec {
    pub csv: bool,
    pub summary: bool,
    pub svg: bool,
    /// Draw an extent outline every this many steps.
    pub extent_stride: usize,
    /// Boundary probes per filter sample when measuring the extent margin.
    pub probe_factor: usize,
    pub min_probes: usize,
    /// When false, solve times are written as zero so runs are bit-identical.
    pub record_solve_time: bool,
}

impl Default for OutputSpec {
    fn default() -> Self {
        OutputSpec {
            csv: true,
            summary: true,
            svg: true,
            extent_stride: 100,
            probe_factor: 10,
            min_probes: 2000,
            record_solve_time: true,
        }
    }
}

/// Everything a run needs, built from a validated config.
pub struct Scenario {
    pub config: ScenarioConfig,
    pub system: ControlAffineSystem,
    pub extent: ExtentFunction,
    pub safe: SafeFunction,
    pub filter: Box<dyn SafetyFilter>,
    pub controller: NominalController,
    pub initial_state: Vec<f64>,
    /// Boundary probes used for the extent margin.
    pub probes: usize,
    pub tau: Option<f64>,
    pub constants: Option<LipschitzConstants>,
}

fn finite(v: f64) -> bool {
    v.is_finite()
}

impl ScenarioConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Parse(e.to_string()))
    }

    fn state_dimension(&self) -> usize {
        match self.system {
            SystemSpec::SingleIntegrator { dimension, .. } => dimension,
            SystemSpec::Unicycle { .. } => 3,
        }
    }

    fn input_dimension(&self) -> usize {
        match self.system {
            SystemSpec::SingleIntegrator { dimension, .. } => dimension,
            SystemSpec::Unicycle { .. } => 2,
        }
    }

    /// Checks every field and reports all problems at once. The geometric
    /// start condition is only checked once the parts it needs are valid.
    pub fn validate(&self) -> Result<()> {
        let mut errs = Vec::new();
        self.collect_errors(&mut errs);
        if errs.is_empty() {
            match self.initial_clearance() {
                Ok(c) if c > 0.0 => {}
                Ok(c) => errs.push(format!(
                    "initial extent is not strictly inside the safe set (min boundary h = {c:.6e})"
                )),
                Err(e) => errs.push(format!("initial extent check failed: {e}")),
            }
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(errs))
        }
    }

    fn collect_errors(&self, errs: &mut Vec<String>) {
        let mut err = |m: String| errs.push(m);
        // TOML integers are signed, larger seeds could not be written back
        if self.seed > i64::MAX as u64 {
            err(format!("seed must be at most {}, got {}", i64::MAX, self.seed));
        }
        if !(self.dt > 0.0 && finite(self.dt)) {
            err(format!("dt must be positive and finite, got {}", self.dt));
        }
        if !(self.horizon > 0.0 && finite(self.horizon)) {
            err(format!("horizon must be positive and finite, got {}", self.horizon));
        }
        if !(self.initial_jitter >= 0.0 && finite(self.initial_jitter)) {
            err("initial_jitter must be nonnegative".into());
        }
        let n = self.state_dimension();
        let m = self.input_dimension();
        match self.system {
            SystemSpec::SingleIntegrator { dimension, input_bound } => {
                if dimension < 2 {
                    err("single integrator needs at least two position coordinates".into());
                }
                if !(input_bound > 0.0 && finite(input_bound)) {
                    err("system input_bound must be positive".into());
                }
            }
            SystemSpec::Unicycle { input_bound } => {
                if !(input_bound > 0.0 && finite(input_bound)) {
                    err("system input_bound must be positive".into());
                }
            }
        }
        if self.initial_state.len() != n {
            err(format!("initial_state has {} entries, the system has {n} states", self.initial_state.len()));
        } else if self.initial_state.iter().any(|v| !v.is_finite()) {
            err("initial_state must be finite".into());
        }
        match &self.extent {
            ExtentSpec::Ball { radius } => {
                if !(*radius > 0.0) {
                    err("extent radius must be positive".into());
                }
            }
            ExtentSpec::Ellipse { shape, size } => {
                let p = Matrix2::new(shape[0][0], shape[0][1], shape[1][0], shape[1][1]);
                if shape[0][1] != shape[1][0] || !(p[(0, 0)] > 0.0 && p.determinant() > 0.0) {
                    err("extent ellipse shape must be symmetric positive definite".into());
                }
                if !(*size > 0.0) {
                    err("extent size must be positive".into());
                }
            }
            ExtentSpec::Superellipse4 { a, b, size } => {
                if !(*a > 0.0 && *b > 0.0 && *size > 0.0) {
                    err("extent superellipse weights and size must be positive".into());
                }
            }
        }
        let safe_dim = match &self.safe {
            SafeSpec::Halfspace { normal, .. } => {
                if normal.iter().all(|v| *v == 0.0) {
                    err("safe halfspace normal must be nonzero".into());
                }
                normal.len()
            }
            SafeSpec::Ball { center, radius } => {
                if !(*radius > 0.0) {
                    err("safe ball radius must be positive".into());
                }
                center.len()
            }
            SafeSpec::Superellipse { center, semi_axes, power } => {
                if center.len() != semi_axes.len() {
                    err("safe superellipse center and semi_axes lengths differ".into());
                }
                if semi_axes.iter().any(|a| !(*a > 0.0)) {
                    err("safe superellipse semi_axes must be positive".into());
                }
                if *power == 0 || power % 2 == 1 {
                    err("safe superellipse power must be a positive even integer".into());
                }
                center.len()
            }
            SafeSpec::Polynomial { dimension, terms } => {
                if terms.iter().any(|t| t.exponents.len() != *dimension) {
                    err("safe polynomial term exponents must match its dimension".into());
                }
                *dimension
            }
        };
        if safe_dim != 2 {
            err(format!("safe function must act on planar points, got dimension {safe_dim}"));
        }
        match &self.filter {
            FilterSpec::None => {}
            FilterSpec::Zcbf { alpha } => {
                if !(alpha.gain() > 0.0) {
                    err("zcbf alpha gain must be positive".into());
                }
            }
            FilterSpec::Sampled {
                samples,
                gamma,
                constants,
                tau_margin,
                ..
            } => {
                if *samples < 2 {
                    err("sampled filter needs at least two samples".into());
                }
                if !(*gamma > 0.0) {
                    err("sampled filter gamma must be positive".into());
                }
                if !(*tau_margin >= 1.0) {
                    err("sampled filter tau_margin must be at least 1".into());
                }
                match constants {
                    ConstantsSpec::User { a, b } => {
                        if !(*a >= 0.0 && *b >= 0.0 && finite(*a) && finite(*b)) {
                            err("user constants must be finite and nonnegative".into());
                        }
                    }
                    ConstantsSpec::Estimate { resolution, margin } => {
                        if *resolution < 2 {
                            err("constant estimation needs resolution >= 2".into());
                        }
                        if !(*margin >= 1.0) {
                            err("constant estimation margin must be at least 1".into());
                        }
                        if self.domain.is_none() {
                            err("estimated constants need a [domain] section".into());
                        }
                    }
                }
            }
            FilterSpec::Sos {
                alpha1,
                alpha2,
                multiplier_degree,
            } => {
                for (name, a) in [("alpha1", alpha1), ("alpha2", alpha2)] {
                    if !matches!(a, ClassKSpec::Linear { .. }) {
                        err(format!("sos filter {name} must be linear"));
                    }
                    if !(a.gain() > 0.0) {
                        err(format!("sos filter {name} gain must be positive"));
                    }
                }
                if let Some(d) = multiplier_degree {
                    if d % 2 == 1 {
                        err("sos multiplier_degree must be even".into());
                    }
                }
            }
        }
        if let Some(d) = &self.domain {
            if d.state_lower.len() != n || d.state_upper.len() != n {
                err(format!("domain state bounds must have {n} entries"));
            }
            if d.point_lower.len() != 2 || d.point_upper.len() != 2 {
                err("domain point bounds must have 2 entries".into());
            }
            let bad = |l: &[f64], u: &[f64]| l.iter().zip(u).any(|(a, b)| !(a <= b));
            if bad(&d.state_lower, &d.state_upper) || bad(&d.point_lower, &d.point_upper) {
                err("domain lower bounds must not exceed upper bounds".into());
            }
        }
        match &self.controller {
            ControllerSpec::GoToGoal { goal, gains } => {
                if goal.len() != 2 {
                    err("controller goal must be a planar point".into());
                }
                check_gains(gains, &mut err);
            }
            ControllerSpec::Waypoints {
                goals,
                switch_radius,
                gains,
            } => {
                if goals.is_empty() || goals.iter().any(|g| g.len() != 2) {
                    err("controller waypoints must be a nonempty list of planar points".into());
                }
                if !(*switch_radius > 0.0) {
                    err("controller switch_radius must be positive".into());
                }
                check_gains(gains, &mut err);
            }
            ControllerSpec::Constant { input } => {
                if input.len() != m {
                    err(format!("constant input has {} entries, the system has {m} inputs", input.len()));
                }
            }
        }
        if self.output.extent_stride == 0 {
            err("output extent_stride must be positive".into());
        }
        if self.output.probe_factor == 0 {
            err("output probe_factor must be positive".into());
        }
    }

    fn system(&self) -> Result<ControlAffineSystem> {
        match self.system {
            SystemSpec::SingleIntegrator { dimension, input_bound } => {
                ControlAffineSystem::single_integrator(dimension, input_bound)
            }
            SystemSpec::Unicycle { input_bound } => ControlAffineSystem::unicycle(input_bound),
        }
    }

    fn extent(&self, sys: &ControlAffineSystem) -> Result<ExtentFunction> {
        let n = sys.state_dimension();
        let e = match &self.extent {
            ExtentSpec::Ball { radius } => ExtentFunction::ball(*radius, n)?,
            ExtentSpec::Ellipse { shape, size } => ExtentFunction::ellipse(
                Matrix2::new(shape[0][0], shape[0][1], shape[1][0], shape[1][1]),
                *size,
                n,
            )?,
            ExtentSpec::Superellipse4 { a, b, size } => ExtentFunction::superellipse4(*a, *b, *size, n)?,
        };
        match sys.heading_index() {
            Some(i) => e.with_heading(i),
            None => Ok(e),
        }
    }

    fn safe(&self) -> Result<SafeFunction> {
        match &self.safe {
            SafeSpec::Halfspace { normal, offset } => SafeFunction::halfspace(normal.clone(), *offset),
            SafeSpec::Ball { center, radius } => SafeFunction::ball(center.clone(), *radius),
            SafeSpec::Superellipse {
                center,
                semi_axes,
                power,
            } => SafeFunction::superellipse(center.clone(), semi_axes.clone(), *power),
            SafeSpec::Polynomial { dimension, terms } => SafeFunction::polynomial(MultiPoly::from_terms(
                *dimension,
                terms.iter().map(|t| (t.exponents.clone(), t.coeff)),
            )?),
        }
    }

    /// The initial state after the seeded jitter.
    pub fn start_state(&self) -> Vec<f64> {
        if self.initial_jitter == 0.0 {
            return self.initial_state.clone();
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let j = self.initial_jitter;
        self.initial_state.iter().map(|v| v + rng.random_range(-j..=j)).collect()
    }

    fn probes(&self) -> usize {
        let samples = match &self.filter {
            FilterSpec::Sampled { samples, .. } => *samples,
            _ => 0,
        };
        (self.output.probe_factor * samples).max(self.output.min_probes)
    }

    fn initial_clearance(&self) -> Result<f64> {
        let sys = self.system()?;
        let extent = self.extent(&sys)?;
        let safe = self.safe()?;
        let x0 = self.start_state();
        Ok(boundary_minimum(&extent, &x0, self.probes(), |y| {
            safe.value(y).unwrap_or(f64::NEG_INFINITY)
        })?
        .0)
    }

    /// Validates and instantiates the run.
    pub fn build(&self) -> Result<Scenario> {
        self.validate()?;
        let system = self.system()?;
        let extent = self.extent(&system)?;
        let safe = self.safe()?;
        let initial_state = self.start_state();
        let qp = QPOptions::default();
        let mut tau = None;
        let mut constants = None;
        let filter: Box<dyn SafetyFilter> = match &self.filter {
            FilterSpec::None => Box::new(PassThrough {
                input_bound: system.input_bound(),
            }),
            FilterSpec::Zcbf { alpha } => Box::new(ZcbfFilter {
                safe: safe.clone(),
                alpha: alpha.build(),
                system: system.clone(),
                qp,
            }),
            FilterSpec::Sampled {
                samples,
                gamma,
                constants: spec,
                tau_margin,
                sampling,
            } => {
                let consts = match spec {
                    ConstantsSpec::User { a, b } => LipschitzConstants::user(*a, *b)?,
                    ConstantsSpec::Estimate { resolution, margin } => {
                        let d = self.domain.as_ref().expect("validated");
                        estimate_constants(
                            &extent,
                            &safe,
                            &system,
                            &DomainBox::new(d.state_lower.clone(), d.state_upper.clone())?,
                            &DomainBox::new(d.point_lower.clone(), d.point_upper.clone())?,
                            &EstimateOptions {
                                resolution: *resolution,
                                margin: *margin,
                                ..EstimateOptions::default()
                            },
                        )?
                    }
                };
                let net = NetOptions {
                    mode: match sampling {
                        SamplingSpec::UniformAngle => SamplingMode::UniformAngle,
                        SamplingSpec::ArcLength => SamplingMode::ArcLength,
                    },
                    ..NetOptions::default()
                };
                let f = SampledFilter::new(
                    extent.clone(),
                    safe.clone(),
                    system.clone(),
                    consts.clone(),
                    *gamma,
                    *samples,
                    &net,
                    *tau_margin,
                    &initial_state,
                    qp,
                )?;
                tau = Some(f.tau());
                constants = Some(consts);
                Box::new(f)
            }
            FilterSpec::Sos {
                alpha1,
                alpha2,
                multiplier_degree,
            } => Box::new(SosFilter::new(
                extent.clone(),
                safe.clone(),
                alpha1.build(),
                alpha2.build(),
                system.clone(),
                *multiplier_degree,
                SdpOptions::default(),
            )?),
        };
        let controller = match &self.controller {
            ControllerSpec::GoToGoal { goal, gains } => NominalController::go_to_goal(goal.clone(), gains_of(gains)),
            ControllerSpec::Waypoints {
                goals,
                switch_radius,
                gains,
            } => NominalController::waypoint_cycle(goals.clone(), *switch_radius, gains_of(gains)),
            ControllerSpec::Constant { input } => NominalController::ConstantInput(input.clone()),
        };
        Ok(Scenario {
            config: self.clone(),
            probes: self.probes(),
            system,
            extent,
            safe,
            filter,
            controller,
            initial_state,
            tau,
            constants,
        })
    }
}

fn check_gains(g: &GainsSpec, err: &mut impl FnMut(String)) {
    if !(g.kv > 0.0 && g.kw >= 0.0 && g.arrive_radius > 0.0) {
        err("controller gains need kv > 0, kw >= 0 and arrive_radius > 0".into());
    }
}

fn gains_of(g: &GainsSpec) -> Gains {
    Gains {
        kv: g.kv,
        kw: g.kw,
        arrive_radius: g.arrive_radius,
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    pub(crate) const CS1: &str = r#"
name = "t"
dt = 0.01
horizon = 1.0
initial_state = [0.0, 0.0, 0.3]

[system]
kind = "unicycle"
input_bound = 1.0

[extent]
kind = "superellipse4"
a = 1.5
b = 2.0
size = 0.2

[safe]
kind = "ball"
center = [0.0, 0.0]
radius = 1.0

[filter]
kind = "zcbf"
alpha = { kind = "linear", gain = 1.0 }

[controller]
kind = "go_to_goal"
goal = [2.0, 0.6]
"#;

    #[test]
    fn parses_and_round_trips() {
        let c = ScenarioConfig::from_toml(CS1).unwrap();
        assert_eq!(c.output, OutputSpec::default());
        let back = ScenarioConfig::from_toml(&c.to_toml().unwrap()).unwrap();
        assert_eq!(c, back);
        c.validate().unwrap();
        assert!(c.build().is_ok());
    }

    #[test]
    fn all_errors_listed() {
        let mut c = ScenarioConfig::from_toml(CS1).unwrap();
        c.dt = 0.0;
        c.horizon = -1.0;
        c.initial_state = vec![0.0];
        c.filter = FilterSpec::Sampled {
            samples: 1,
            gamma: 1.0,
            constants: ConstantsSpec::Estimate {
                resolution: 10,
                margin: 1.1,
            },
            tau_margin: 1.05,
            sampling: SamplingSpec::UniformAngle,
        };
        match c.validate() {
            Err(Error::Config(errs)) => assert_eq!(errs.len(), 5, "{errs:?}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn start_outside_rejected() {
        let mut c = ScenarioConfig::from_toml(CS1).unwrap();
        // center inside, extent tip across the boundary
        c.initial_state = vec![0.9, 0.0, 0.0];
        match c.validate() {
            Err(Error::Config(errs)) => assert!(errs[0].contains("strictly inside"), "{errs:?}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unknown_field_rejected() {
        let text = CS1.replace("horizon = 1.0", "horizon = 1.0\nhorizn = 2.0");
        assert!(matches!(ScenarioConfig::from_toml(&text), Err(Error::Parse(_))));
    }

    #[test]
    fn jitter_is_seeded() {
        let mut c = ScenarioConfig::from_toml(CS1).unwrap();
        c.initial_jitter = 0.01;
        assert_eq!(c.start_state(), c.start_state());
        let a = c.start_state();
        c.seed = 1;
        assert_ne!(a, c.start_state());
    }
}
