//! Doubly robust causal feature selection.
//!
//! For every feature `j` the crate estimates
//! `chi_j = E[(E[Y|X] - E[Y|X_{-j}])^2]` with cross-fitted orthogonal scores,
//! tests `chi_j = 0` with a paired t-test and controls the false discovery rate
//! with the Benjamini-Yekutieli procedure.

pub mod dataset;
pub mod dgp;
pub mod drcfs;
pub mod error;
pub mod metrics;
pub mod nuisance;
pub mod oracle;
pub mod rng;

pub use dataset::Dataset;
pub use dgp::{simulate_dataset, DgpConfig, GroundTruth, SimulatedDataset, Transform};
pub use drcfs::{run_drcfs, run_drcfs_with, DrcfsConfig, FeatureTestResult, ScoreConvention, SelectionReport};
pub use error::{DrcfsError, Result};
pub use metrics::SelectionMetrics;
pub use nuisance::{FeatureMap, ForestSpec, LearnerSpec, LinearSpec, NuisanceLearner};
