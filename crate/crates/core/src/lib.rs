//! Numerical evaluation of the fully fractional heat operator `(d/dt - Laplacian)^s`,
//! its reductions to the fractional Laplacian and the Marchaud derivative,
//! and the tail and defect quantities attached to sequences of functions.

// Negated comparisons reject NaN along with out-of-range values; the
// coefficient tables keep the digits they were published with.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::excessive_precision)]

pub mod catalog;
pub mod defect;
pub mod error;
pub mod families;
pub mod funcdsl;
pub mod function;
pub mod kernel;
pub mod operators;
pub mod quadrature;
pub mod regions;
pub mod special;

pub use error::{Error, Result};
pub use function::{Dependence, FunctionHandle, GrowthEnvelope, Scales, Smoothness, SupportBox};
pub use kernel::{KernelParams, Normalization, SpaceTimePoint};
pub use quadrature::{Horizon, QuadResult, QuadSpec};
