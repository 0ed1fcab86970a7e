//! Masked samples `(X_i, M_i, Y_i)` and their grouping by pattern.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pattern::MissingPattern;

/// `n` rows of covariates with a missing-pattern per row and a response.
///
/// Masked cells hold `NaN` and must never be read: [`MaskedDataset::value`]
/// panics on them.
#[derive(Clone, Debug)]
pub struct MaskedDataset {
    dim: usize,
    values: Vec<f64>,
    patterns: Vec<MissingPattern>,
    responses: Vec<f64>,
}

impl MaskedDataset {
    /// `values` is row-major `n x d`. Masked cells are overwritten with the
    /// sentinel; observed cells and responses must be finite.
    pub fn new(dim: usize, mut values: Vec<f64>, patterns: Vec<MissingPattern>, responses: Vec<f64>) -> Result<Self> {
        let n = responses.len();
        if n == 0 {
            return Err(Error::InvalidDataset("empty dataset".into()));
        }
        if patterns.len() != n {
            return Err(Error::DimensionMismatch { expected: n, found: patterns.len() });
        }
        if values.len() != n * dim {
            return Err(Error::DimensionMismatch { expected: n * dim, found: values.len() });
        }
        if let Some(m) = patterns.iter().find(|m| m.dim() != dim) {
            return Err(Error::DimensionMismatch { expected: dim, found: m.dim() });
        }
        if responses.iter().any(|y| !y.is_finite()) {
            return Err(Error::NonFinite("responses"));
        }
        for (row, m) in values.chunks_mut(dim).zip(&patterns) {
            for (j, v) in row.iter_mut().enumerate() {
                if m.is_missing(j) {
                    *v = f64::NAN;
                } else if !v.is_finite() {
                    return Err(Error::NonFinite("observed covariates"));
                }
            }
        }
        Ok(Self { dim, values, patterns, responses })
    }

    pub fn from_rows(rows: &[Vec<f64>], patterns: Vec<MissingPattern>, responses: Vec<f64>) -> Result<Self> {
        let dim = patterns.first().map_or(0, |m| m.dim());
        if let Some(row) = rows.iter().find(|r| r.len() != dim) {
            return Err(Error::DimensionMismatch { expected: dim, found: row.len() });
        }
        Self::new(dim, rows.concat(), patterns, responses)
    }

    pub fn n(&self) -> usize {
        self.responses.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn pattern(&self, i: usize) -> MissingPattern {
        self.patterns[i]
    }

    pub fn patterns(&self) -> &[MissingPattern] {
        &self.patterns
    }

    pub fn response(&self, i: usize) -> f64 {
        self.responses[i]
    }

    pub fn responses(&self) -> &[f64] {
        &self.responses
    }

    pub fn is_missing(&self, i: usize, j: usize) -> bool {
        self.patterns[i].is_missing(j)
    }

    /// Observed cell `(i, j)`.
    ///
    /// # Panics
    /// If the cell is masked.
    pub fn value(&self, i: usize, j: usize) -> f64 {
        assert!(!self.is_missing(i, j), "read of masked cell ({i}, {j}) with pattern {}", self.patterns[i]);
        self.values[i * self.dim + j]
    }

    /// Cell `(i, j)` if observed.
    pub fn get(&self, i: usize, j: usize) -> Option<f64> {
        (!self.is_missing(i, j)).then(|| self.values[i * self.dim + j])
    }

    /// `X_{i, obs(M_i)}` in ascending coordinate order.
    pub fn observed_values(&self, i: usize) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.dim);
        self.extend_observed(i, &mut out);
        out
    }

    pub(crate) fn extend_observed(&self, i: usize, out: &mut Vec<f64>) {
        let m = self.patterns[i];
        let row = &self.values[i * self.dim..(i + 1) * self.dim];
        out.extend(row.iter().enumerate().filter(|(j, _)| !m.is_missing(*j)).map(|(_, v)| *v));
    }

    /// Rows in the given order.
    pub fn select(&self, rows: &[usize]) -> Result<Self> {
        let mut values = Vec::with_capacity(rows.len() * self.dim);
        for &i in rows {
            values.extend_from_slice(&self.values[i * self.dim..(i + 1) * self.dim]);
        }
        Self::new(
            self.dim,
            values,
            rows.iter().map(|&i| self.patterns[i]).collect(),
            rows.iter().map(|&i| self.responses[i]).collect(),
        )
    }

    pub fn to_json_string(&self) -> Result<String> {
        Ok(serde_json::to_string(&DatasetRepr::from(self))?)
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let repr: DatasetRepr = serde_json::from_str(s)?;
        repr.try_into()
    }

    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }
}

/// On-disk layout: masked cells are `null`.
#[derive(Serialize, Deserialize)]
pub(crate) struct DatasetRepr {
    pub d: usize,
    pub x: Vec<Vec<Option<f64>>>,
    pub mask: Vec<MissingPattern>,
    pub y: Vec<f64>,
}

impl From<&MaskedDataset> for DatasetRepr {
    fn from(data: &MaskedDataset) -> Self {
        let x = (0..data.n()).map(|i| (0..data.dim).map(|j| data.get(i, j)).collect()).collect();
        Self { d: data.dim, x, mask: data.patterns.clone(), y: data.responses.clone() }
    }
}

impl TryFrom<DatasetRepr> for MaskedDataset {
    type Error = Error;

    fn try_from(repr: DatasetRepr) -> Result<Self> {
        if repr.x.len() != repr.mask.len() {
            return Err(Error::DimensionMismatch { expected: repr.mask.len(), found: repr.x.len() });
        }
        let mut values = Vec::with_capacity(repr.x.len() * repr.d);
        for (row, m) in repr.x.iter().zip(&repr.mask) {
            if row.len() != repr.d {
                return Err(Error::DimensionMismatch { expected: repr.d, found: row.len() });
            }
            for (j, v) in row.iter().enumerate() {
                match (v, m.is_missing(j)) {
                    (Some(v), false) => values.push(*v),
                    (_, true) => values.push(f64::NAN),
                    (None, false) => {
                        return Err(Error::InvalidDataset(format!("observed cell {j} is null for mask {m}")))
                    }
                }
            }
        }
        MaskedDataset::new(repr.d, values, repr.mask, repr.y)
    }
}

/// Rows grouped by missing pattern: `E_m` and `p̂_m = |E_m| / n`.
#[derive(Clone, Debug, PartialEq)]
pub struct PatternIndex {
    n: usize,
    groups: BTreeMap<MissingPattern, Vec<usize>>,
}

impl PatternIndex {
    pub fn build(data: &MaskedDataset) -> Self {
        let mut groups: BTreeMap<MissingPattern, Vec<usize>> = BTreeMap::new();
        for (i, &m) in data.patterns().iter().enumerate() {
            groups.entry(m).or_default().push(i);
        }
        Self { n: data.n(), groups }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn n_groups(&self) -> usize {
        self.groups.len()
    }

    pub fn rows(&self, m: MissingPattern) -> &[usize] {
        self.groups.get(&m).map_or(&[], Vec::as_slice)
    }

    pub fn frequency(&self, m: MissingPattern) -> f64 {
        self.rows(m).len() as f64 / self.n as f64
    }

    /// `(m, E_m, p̂_m)` in increasing pattern order.
    pub fn iter(&self) -> impl Iterator<Item = (MissingPattern, &[usize], f64)> + '_ {
        let n = self.n as f64;
        self.groups.iter().map(move |(m, rows)| (*m, rows.as_slice(), rows.len() as f64 / n))
    }
}

pub fn build_pattern_index(data: &MaskedDataset) -> PatternIndex {
    PatternIndex::build(data)
}
