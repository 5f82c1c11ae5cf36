//! Extent functions, safe functions and boundary nets.

mod extent;
mod net;
mod safe;

pub use extent::{ExtentField, ExtentFunction, ExtentGradient, ExtentKind, ExtentPolynomials};
pub use net::{
    boundary_minimum, boundary_point, covering_radius, sample_boundary, sample_boundary_with,
    BoundaryNet, NetOptions, SamplingMode,
};
pub use safe::{SafeFunction, SafeKind, ScalarField, VectorField};
