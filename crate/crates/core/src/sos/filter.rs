use std::time::Instant;

use nalgebra::DVector;

use super::{assemble_sos_program, build_constraint_poly, solve_sos_program, MultiPoly, SosStatus};
use crate::dynamics::ControlAffineSystem;
use crate::error::{Error, Result};
use crate::geometry::{ExtentFunction, SafeFunction};
use crate::safety_filters::{ClassK, FilterOutcome, FilterStatus, SafetyFilter};
use crate::sdp::SdpOptions;

/// Sum-of-squares extent filter: one SDP per call, the returned input is
/// used only if its certificate passes validation.
#[derive(Clone, Debug)]
pub struct SosFilter {
    extent: ExtentFunction,
    safe: SafeFunction,
    safe_poly: MultiPoly,
    alpha1: ClassK,
    alpha2: ClassK,
    system: ControlAffineSystem,
    multiplier_degree: Option<u32>,
    sdp: SdpOptions,
}

impl SosFilter {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        extent: ExtentFunction,
        safe: SafeFunction,
        alpha1: ClassK,
        alpha2: ClassK,
        system: ControlAffineSystem,
        multiplier_degree: Option<u32>,
        sdp: SdpOptions,
    ) -> Result<Self> {
        let safe_poly = safe.as_polynomial().ok_or_else(|| {
            Error::Unsupported("the sum-of-squares filter needs a polynomial safe function".into())
        })?;
        if alpha1.linear_gain().is_none() || alpha2.linear_gain().is_none() {
            return Err(Error::Unsupported(
                "the sum-of-squares filter only accepts linear class-K functions".into(),
            ));
        }
        Ok(SosFilter {
            extent,
            safe,
            safe_poly,
            alpha1,
            alpha2,
            system,
            multiplier_degree,
            sdp,
        })
    }

    pub fn solve(&self, x: &[f64], k: &DVector<f64>) -> Result<(super::SosProgram, super::SosSolution)> {
        let poly = build_constraint_poly(&self.extent, &self.safe, &self.alpha1, &self.alpha2, &self.system, x)?;
        let program = assemble_sos_program(poly, &self.safe_poly, self.multiplier_degree, k, self.system.input_bound())?;
        let sol = solve_sos_program(&program, &self.sdp)?;
        Ok((program, sol))
    }
}

impl SafetyFilter for SosFilter {
    fn name(&self) -> &'static str {
        "sos"
    }

    fn filter(&self, x: &[f64], k: &DVector<f64>) -> Result<FilterOutcome> {
        let started = Instant::now();
        let (_, sol) = self.solve(x, k)?;
        let status = match sol.status {
            SosStatus::Certified => FilterStatus::Optimal,
            SosStatus::Infeasible => FilterStatus::Infeasible,
            SosStatus::NotConverged | SosStatus::Rejected => FilterStatus::NotConverged,
        };
        let mut u = sol.u.clone();
        // Interior-point output sits within solver tolerance of the bound.
        let n = u.norm();
        let bound = self.system.input_bound();
        if n > bound {
            u *= bound / n;
        }
        Ok(FilterOutcome {
            active: status == FilterStatus::Optimal && (k - &u).norm() > 1e-6 * k.norm().max(1.0),
            detail: format!(
                "{:?}: sdp {} iterations ({}), mismatch {:.2e}, eig floors {:.2e} {:.2e}",
                sol.status,
                sol.sdp.iterations,
                sol.sdp.message,
                sol.coefficient_mismatch,
                sol.min_eig_q,
                sol.min_eig_s
            ),
            u,
            status,
            solve_ms: started.elapsed().as_secs_f64() * 1e3,
        })
    }
}
