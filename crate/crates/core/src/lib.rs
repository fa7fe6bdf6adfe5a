//! Differentiable SAR rendering and mesh reconstruction.

// tensor ops are fallible methods named after the arithmetic they do, and
// `!(x > 0.0)` is the intended NaN-rejecting form
#![allow(clippy::should_implement_trait, clippy::neg_cmp_op_on_partial_ord)]

pub mod autodiff;
pub mod error;
pub mod geometry;
pub mod gradcheck;
pub mod metrics;
pub mod optimize;
pub mod raster;
pub mod sarcam;
pub mod shade;

pub use error::{Error, ErrorClass, Result};
