//! Nonparametric maximum-likelihood estimation for monotone binary regression
//! when the feature impact fades with the sample size.

// NaN fails the `!(x > 0.0)` checks.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod estimator;
pub mod experiments;
pub mod io;
pub mod limits;
pub mod metrics;
pub mod model;
pub mod quadrature;
pub mod rng;

pub use error::{Error, Result};
pub use estimator::{npmle_fit, pava_fit, StepEstimate};
pub use model::{Curve, FeatureLaw, FnCurve, Link, Sample, Scenario};
pub use quadrature::QuadratureCfg;
