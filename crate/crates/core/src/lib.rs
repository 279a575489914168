//! Exemplar-free analytic class-incremental learning.
//!
//! The pipeline has three stages. A small feature extractor is trained by
//! gradient descent on the base task and then frozen. Its outputs are pushed
//! through a fixed random expansion and a ridge-regression classifier is
//! solved in closed form. Every later task updates that classifier
//! recursively through the Woodbury identity, so the weights after task `t`
//! are exactly the ridge solution over all data seen so far while no past
//! sample is ever stored.
//!
//! Module map:
//!
//! * [`expansion`], [`afam`], [`classifier`], [`snapshot`]: the analytic core.
//! * [`features`]: datasets, CSV/manifest IO, synthetic tasks and the extractor.
//! * [`harness`]: task splits, the end-to-end experiment, metrics and oracles.

pub mod afam;
pub mod classifier;
pub mod error;
pub mod expansion;
pub mod features;
pub mod harness;
pub mod matrix;
pub mod rng;
pub mod snapshot;

pub use afam::Afam;
pub use classifier::{AnalyticClassifier, ClassRegistry};
pub use error::{Error, Result};
pub use expansion::{Activation, ExpansionMap};
pub use matrix::{relative_frobenius, ClassId, FeatureMatrix, LabelMatrix};
pub use snapshot::Snapshot;

pub use nalgebra;
