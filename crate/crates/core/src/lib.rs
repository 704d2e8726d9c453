//! Numerical toolkit for the metric complexity of tracking non-admissible
//! curves with drifted control-affine systems in corank one.
//!
//! The pipeline is: frame data on R^3 ([`geometry`]) reduces to scalar
//! profiles on the curve ([`scalar_fields`]); the reduced optimal control
//! layer ([`reduced_oc`]) classifies the time regime and evaluates the
//! asymptotic constants; [`oracle_dp`] solves the reduced problems by brute
//! force for cross-checking; [`martinet`] simulates crossings of points
//! where the distribution has step 3; [`schema`] reads the JSON inputs.

pub mod error;
pub mod expr;
pub mod geometry;
pub mod martinet;
pub mod ode;
pub mod oracle_dp;
pub mod reduced_oc;
pub mod scalar_fields;
pub mod schema;

pub use error::{Error, Result};
