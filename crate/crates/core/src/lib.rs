//! Numerical toolkit for Cramér-Rao type lower bounds on the quadratic error
//! of prediction.
//!
//! * [`model`]: dominated families, likelihood ratios, seeded sampling;
//! * [`expectation`]: exact, quadrature and Monte Carlo expectations;
//! * [`l2diff`]: scores, Fisher information, L²-differentiability checks;
//! * [`covariance`]: the covariance inequality on finite joint laws;
//! * [`bounds`]: QEP, sensitivity matrices and prediction bounds;
//! * [`reconstruction`]: path-integral reconstruction of exponential-type
//!   families;
//! * [`catalog`]: built-in families with closed-form oracles.

// `!(x > 0.0)` is deliberate: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod catalog;
pub mod covariance;
pub mod error;
pub mod expectation;
pub mod l2diff;
pub mod linalg;
pub mod model;
pub mod reconstruction;

pub use error::{Error, Result};
pub use expectation::{IntegrationMode, IntegrationSpec};
pub use model::{DominatedModel, Observation, ParameterPoint};
