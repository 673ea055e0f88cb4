//! Top-1 accuracy estimation from ordinary and complementary labels.
//!
//! An ordinary label says "the answer is `y`"; a complementary label says
//! "the answer is not `ȳ`". Given a prediction per item, [`label_model`]
//! tallies both kinds into a [`CountSummary`], [`estimators`] turns the
//! counts into accuracy estimates, [`bounds`] attaches finite-sample
//! deviation radii, [`simulator`] checks all of it by Monte Carlo, and
//! [`fitness`] uses complementary accuracy to pick among candidate systems.
//! [`records`] holds the line-delimited file formats.

pub mod bounds;
pub mod error;
pub mod estimators;
pub mod fitness;
pub mod label_model;
pub mod records;
pub mod rng;
pub mod simulator;

pub use error::{Error, Result};
pub use estimators::{Estimate, Method};
pub use label_model::{CountSummary, LabelKind, Observation};
