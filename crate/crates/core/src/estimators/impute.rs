use nalgebra::{DMatrix, DVector};

use crate::dataset::MaskedDataset;
use crate::error::{Error, Result};
use crate::pattern::MissingPattern;
use crate::solver::{least_squares, AffineModel};

use super::Predictor;

/// Ridge damping added to the normal equations of the per-column models.
pub const COLUMN_RIDGE: f64 = 1e-8;

pub const DEFAULT_ROUNDS: usize = 10;

#[derive(Clone, Debug, PartialEq)]
pub enum ImputeLRModel {
    /// Regression on `[X ⊙ (1 - M), M]`: equivalent to learning one
    /// imputation constant per column jointly with the linear model.
    Constant { dim: usize, regression: AffineModel },
    /// Chained-equations imputation followed by least squares.
    Iterative { imputer: ChainedImputer, regression: AffineModel },
}

impl ImputeLRModel {
    pub fn dim(&self) -> usize {
        match self {
            Self::Constant { dim, .. } => *dim,
            Self::Iterative { imputer, .. } => imputer.dim(),
        }
    }

    pub fn regression(&self) -> &AffineModel {
        match self {
            Self::Constant { regression, .. } | Self::Iterative { regression, .. } => regression,
        }
    }
}

fn constant_features(x_obs: &[f64], m: MissingPattern, out: &mut Vec<f64>) {
    let d = m.dim();
    let mut obs = x_obs.iter();
    for j in 0..d {
        out.push(if m.is_missing(j) { 0.0 } else { *obs.next().expect("length checked") });
    }
    out.extend((0..d).map(|j| if m.is_missing(j) { 1.0 } else { 0.0 }));
}

pub fn fit_constant_impute(data: &MaskedDataset) -> Result<ImputeLRModel> {
    let d = data.dim();
    let mut features = Vec::with_capacity(data.n() * 2 * d);
    let mut buf = Vec::with_capacity(d);
    for i in 0..data.n() {
        buf.clear();
        data.extend_observed(i, &mut buf);
        constant_features(&buf, data.pattern(i), &mut features);
    }
    let features = DMatrix::from_row_slice(data.n(), 2 * d, &features);
    let regression = least_squares(&features, data.responses())?;
    Ok(ImputeLRModel::Constant { dim: d, regression })
}

/// Chained-equations imputer: column means to start, then `rounds` sweeps
/// over the columns in ascending order, each refitting column `j` on the
/// other columns and overwriting its masked cells.
#[derive(Clone, Debug, PartialEq)]
pub struct ChainedImputer {
    means: Vec<f64>,
    /// `None` for a column with no observed entry (imputed by 0).
    column_models: Vec<Option<AffineModel>>,
    rounds: usize,
}

/// Result of running the imputer on a training sample.
#[derive(Clone, Debug)]
pub struct ChainedImputation {
    pub imputer: ChainedImputer,
    /// Row-major completed `n x d` matrix.
    pub completed: Vec<f64>,
    /// Largest absolute change of any imputed cell in each round.
    pub round_changes: Vec<f64>,
}

impl ChainedImputer {
    pub fn dim(&self) -> usize {
        self.means.len()
    }

    pub fn rounds(&self) -> usize {
        self.rounds
    }

    pub fn column_model(&self, j: usize) -> Option<&AffineModel> {
        self.column_models[j].as_ref()
    }

    /// Completes one row given its observed values and pattern.
    pub fn complete_row(&self, x_obs: &[f64], m: MissingPattern) -> Vec<f64> {
        let d = self.dim();
        let mut row = Vec::with_capacity(d);
        let mut obs = x_obs.iter();
        for j in 0..d {
            row.push(if m.is_missing(j) { self.means[j] } else { *obs.next().expect("length checked") });
        }
        let mut others = Vec::with_capacity(d);
        for _ in 0..self.rounds {
            for j in m.missing_indices() {
                if let Some(model) = &self.column_models[j] {
                    others.clear();
                    others.extend(row.iter().enumerate().filter(|(k, _)| *k != j).map(|(_, v)| *v));
                    row[j] = model.evaluate(&others);
                }
            }
        }
        row
    }
}

pub fn chained_imputation(data: &MaskedDataset, rounds: usize) -> Result<ChainedImputation> {
    if rounds == 0 {
        return Err(Error::InvalidConfig("rounds must be at least 1".into()));
    }
    let (n, d) = (data.n(), data.dim());
    let means: Vec<f64> = (0..d)
        .map(|j| {
            let (sum, count) = (0..n).filter_map(|i| data.get(i, j)).fold((0.0, 0usize), |(s, c), v| (s + v, c + 1));
            if count == 0 {
                0.0
            } else {
                sum / count as f64
            }
        })
        .collect();
    let mut completed: Vec<f64> =
        (0..n).flat_map(|i| (0..d).map(move |j| (i, j))).map(|(i, j)| data.get(i, j).unwrap_or(means[j])).collect();
    let observed_rows: Vec<Vec<usize>> = (0..d).map(|j| (0..n).filter(|&i| !data.is_missing(i, j)).collect()).collect();
    let mut column_models: Vec<Option<AffineModel>> = vec![None; d];
    let mut round_changes = Vec::with_capacity(rounds);
    let mut others = Vec::with_capacity(d);
    for _ in 0..rounds {
        let mut change = 0.0f64;
        for j in 0..d {
            if observed_rows[j].is_empty() {
                continue;
            }
            let model = ridge_column_model(&completed, d, j, &observed_rows[j])?;
            for i in (0..n).filter(|&i| data.is_missing(i, j)) {
                let row = &completed[i * d..(i + 1) * d];
                others.clear();
                others.extend(row.iter().enumerate().filter(|(k, _)| *k != j).map(|(_, v)| *v));
                let value = model.evaluate(&others);
                change = change.max((value - completed[i * d + j]).abs());
                completed[i * d + j] = value;
            }
            column_models[j] = Some(model);
        }
        round_changes.push(change);
    }
    Ok(ChainedImputation { imputer: ChainedImputer { means, column_models, rounds }, completed, round_changes })
}

/// Column `j` on the other columns over `rows`, by damped normal equations.
fn ridge_column_model(completed: &[f64], d: usize, j: usize, rows: &[usize]) -> Result<AffineModel> {
    let p = d; // intercept + (d - 1) other columns
    let mut gram = DMatrix::<f64>::zeros(p, p);
    let mut rhs = DVector::<f64>::zeros(p);
    let mut feat = vec![0.0; p];
    for &i in rows {
        let row = &completed[i * d..(i + 1) * d];
        feat[0] = 1.0;
        let mut c = 1;
        for (k, v) in row.iter().enumerate() {
            if k != j {
                feat[c] = *v;
                c += 1;
            }
        }
        for a in 0..p {
            rhs[a] += feat[a] * row[j];
            for b in 0..=a {
                gram[(a, b)] += feat[a] * feat[b];
            }
        }
    }
    for a in 0..p {
        for b in 0..a {
            gram[(b, a)] = gram[(a, b)];
        }
        gram[(a, a)] += COLUMN_RIDGE;
    }
    let solution = gram.cholesky().map(|c| c.solve(&rhs)).ok_or(Error::NonFinite("column model normal equations"))?;
    AffineModel::new(solution[0], solution.as_slice()[1..].to_vec())
}

pub fn fit_iterative_impute(data: &MaskedDataset, rounds: usize) -> Result<ImputeLRModel> {
    let imputation = chained_imputation(data, rounds)?;
    let features = DMatrix::from_row_slice(data.n(), data.dim(), &imputation.completed);
    let regression = least_squares(&features, data.responses())?;
    Ok(ImputeLRModel::Iterative { imputer: imputation.imputer, regression })
}

impl Predictor for ImputeLRModel {
    fn predict(&self, x_obs: &[f64], m: MissingPattern) -> Result<f64> {
        if m.dim() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: m.dim() });
        }
        if x_obs.len() != m.n_observed() {
            return Err(Error::DimensionMismatch { expected: m.n_observed(), found: x_obs.len() });
        }
        Ok(match self {
            Self::Constant { regression, .. } => {
                let mut features = Vec::with_capacity(2 * m.dim());
                constant_features(x_obs, m, &mut features);
                regression.evaluate(&features)
            }
            Self::Iterative { imputer, regression } => regression.evaluate(&imputer.complete_row(x_obs, m)),
        })
    }
}
