//! Pattern-by-pattern linear prediction with missing values.

pub mod complexity;
pub mod dataset;
pub mod error;
pub mod estimators;
pub mod harness;
pub mod pattern;
pub mod simulate;
pub mod solver;

pub use dataset::{build_pattern_index, MaskedDataset, PatternIndex};
pub use error::{Error, Result};
pub use estimators::{EstimatorConfig, PbPPredictor, Predictor, TauRule};
pub use pattern::{ExplicitDistribution, MergeModel, MissingPattern, PatternDistribution};
pub use solver::{clip, conditional_gaussian, least_squares, AffineModel, GaussianParams};
