//! Safety filters that keep a system's whole physical extent, not just its
//! reference point, inside a safe set.
//!
//! Two filters are provided on top of the classic single-point barrier
//! filter: a sampled-boundary filter that solves a small projection QP with
//! one tightened constraint per boundary sample, and a sum-of-squares filter
//! that certifies the condition over the entire safe set by solving a dense
//! SDP. The QP, SDP and polynomial machinery are part of the crate.

// `!(x > 0.0)` is used on purpose so that NaN fails the check too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dynamics;
pub mod error;
pub mod geometry;
pub mod qp;
pub mod safety_filters;
pub mod sdp;
pub mod sim;
pub mod sos;

pub use error::{Error, Result};
