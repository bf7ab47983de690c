//! Gaussian kernel density estimation with exact sampling under linear
//! equality constraints, plus SVD parameter reduction for scenario vectors.

// `!(x > 0.0)` is used on purpose so NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod alias;
pub mod cli;
pub mod constraint;
pub mod error;
pub mod io;
pub mod kde;
mod linalg;
pub mod oracle;
pub mod reduction;
pub mod rng;
pub mod sampler;
pub mod scenario;
pub mod stats;

pub use constraint::{decompose, ConstraintDecomposition, LinearConstraint};
pub use error::{Error, Result};
pub use kde::{BandwidthMatrix, DataSet, GaussianKde};
pub use reduction::{BasisFile, EndpointKind, ReducedBasis};
pub use sampler::{prepare, Diagnostics, SamplerState};
