//! Prevalence estimation from an imperfect automated judge plus a small
//! human-labeled calibration set.
//!
//! Binary estimators live in [`estimators`], their asymptotic theory and
//! interval construction in [`inference`], and the joint likelihood in
//! [`mle`]. Continuous outcomes are handled by [`regression`].

pub mod data_io;
pub mod error;
pub mod estimators;
pub mod identities;
pub mod inference;
pub mod mle;
pub mod regression;
pub mod simulation;
pub mod spline;

pub use error::{Error, Result};
