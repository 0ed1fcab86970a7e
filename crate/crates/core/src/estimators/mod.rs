//! Trainable predictors: thresholded pattern-by-pattern least squares and
//! the two imputation baselines.

mod impute;
mod pbp;

pub use impute::{
    chained_imputation, fit_constant_impute, fit_iterative_impute, ChainedImputation, ChainedImputer, ImputeLRModel,
    COLUMN_RIDGE, DEFAULT_ROUNDS,
};
pub use pbp::{default_d, fit_pbp, predict_pbp, EstimatorConfig, NamedTau, PbPPredictor, TauRule};

use crate::dataset::MaskedDataset;
use crate::error::Result;
use crate::pattern::MissingPattern;

/// A predictor of `Y` from `(X_obs, M)`.
pub trait Predictor: Sync {
    fn predict(&self, x_obs: &[f64], m: MissingPattern) -> Result<f64>;

    /// Predictions for every row of `data`.
    fn predict_dataset(&self, data: &MaskedDataset) -> Result<Vec<f64>> {
        let mut buf = Vec::with_capacity(data.dim());
        (0..data.n())
            .map(|i| {
                buf.clear();
                data.extend_observed(i, &mut buf);
                self.predict(&buf, data.pattern(i))
            })
            .collect()
    }
}
