//! Polynomials and the sum-of-squares filter program.

mod filter;
mod gram;
mod poly;
mod program;

pub use filter::SosFilter;
pub use gram::{gram_feasibility, GramCertificate};
pub use poly::{Monomial, MultiPoly};
pub use program::{
    assemble_sos_program, build_constraint_poly, default_multiplier_degree, solve_sos_program,
    AffinePoly, GramBasis, SosProgram, SosSolution, SosStatus, COEFFICIENT_TOL, EIGEN_FLOOR,
};
