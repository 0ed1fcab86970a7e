//! Dense least squares and Gaussian conditioning.
//!
//! Everything here is minimum-norm: rank-deficient systems and singular
//! covariance blocks go through a spectral pseudo-inverse whose cut-off is
//! `f64::EPSILON * max_dim * largest_singular_value`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `x -> intercept + coefficients . x` over some ordered feature set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AffineModel {
    pub intercept: f64,
    pub coefficients: Vec<f64>,
}

impl AffineModel {
    pub fn new(intercept: f64, coefficients: Vec<f64>) -> Result<Self> {
        if !intercept.is_finite() || coefficients.iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFinite("affine model"));
        }
        Ok(Self { intercept, coefficients })
    }

    pub fn zero(n_features: usize) -> Self {
        Self { intercept: 0.0, coefficients: vec![0.0; n_features] }
    }

    pub fn n_features(&self) -> usize {
        self.coefficients.len()
    }

    pub fn evaluate(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.coefficients.len());
        self.intercept + self.coefficients.iter().zip(x).map(|(c, v)| c * v).sum::<f64>()
    }

    /// Euclidean norm of `(intercept, coefficients)`.
    pub fn norm(&self) -> f64 {
        (self.intercept.powi(2) + self.coefficients.iter().map(|c| c * c).sum::<f64>()).sqrt()
    }
}

pub(crate) fn rank_cutoff(largest: f64, rows: usize, cols: usize) -> f64 {
    f64::EPSILON * rows.max(cols) as f64 * largest
}

/// Minimum-norm least squares of `targets` on `features` with an intercept
/// column prepended internally.
pub fn least_squares(features: &DMatrix<f64>, targets: &[f64]) -> Result<AffineModel> {
    let (n, k) = features.shape();
    if n == 0 {
        return Err(Error::InvalidDataset("least squares needs at least one row".into()));
    }
    if targets.len() != n {
        return Err(Error::DimensionMismatch { expected: n, found: targets.len() });
    }
    if features.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("least-squares features"));
    }
    if targets.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("least-squares targets"));
    }
    let mut design = DMatrix::from_element(n, k + 1, 1.0);
    design.columns_mut(1, k).copy_from(features);
    let solution = min_norm_solve(design, DVector::from_column_slice(targets));
    AffineModel::new(solution[0], solution.as_slice()[1..].to_vec())
}

fn min_norm_solve(design: DMatrix<f64>, rhs: DVector<f64>) -> DVector<f64> {
    let (n, p) = design.shape();
    // Tall systems are first reduced to the triangular factor: same singular
    // values and null space, and the SVD below stays p x p.
    let (reduced, rhs) = if n > p {
        let qr = design.qr();
        let qt_b = qr.q().transpose() * rhs;
        (qr.r(), qt_b)
    } else {
        (design, rhs)
    };
    let svd = reduced.svd(true, true);
    let largest = svd.singular_values.max();
    let cutoff = rank_cutoff(largest, n, p);
    let u = svd.u.as_ref().expect("u requested");
    let v_t = svd.v_t.as_ref().expect("v_t requested");
    let mut scaled = u.transpose() * rhs;
    for (i, s) in svd.singular_values.iter().enumerate() {
        scaled[i] = if *s > cutoff { scaled[i] / s } else { 0.0 };
    }
    v_t.transpose() * scaled
}

/// `T_L v = max(-L, min(v, L))`.
pub fn clip(value: f64, level: f64) -> f64 {
    debug_assert!(level > 0.0);
    value.clamp(-level, level)
}

/// Moore-Penrose inverse of a symmetric matrix.
pub fn symmetric_pinv(matrix: &DMatrix<f64>) -> DMatrix<f64> {
    let dim = matrix.nrows();
    if dim == 0 {
        return DMatrix::zeros(0, 0);
    }
    let eigen = SymmetricEigen::new(matrix.clone());
    let largest = eigen.eigenvalues.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let cutoff = rank_cutoff(largest, dim, dim);
    let inv = eigen.eigenvalues.map(|l| if l.abs() > cutoff { 1.0 / l } else { 0.0 });
    &eigen.eigenvectors * DMatrix::from_diagonal(&inv) * eigen.eigenvectors.transpose()
}

/// Mean and (possibly singular) covariance of a Gaussian vector.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GaussianRepr", into = "GaussianRepr")]
pub struct GaussianParams {
    mean: DVector<f64>,
    covariance: DMatrix<f64>,
}

#[derive(Serialize, Deserialize)]
struct GaussianRepr {
    mean: Vec<f64>,
    cov: Vec<Vec<f64>>,
}

impl TryFrom<GaussianRepr> for GaussianParams {
    type Error = Error;

    fn try_from(repr: GaussianRepr) -> Result<Self> {
        let d = repr.mean.len();
        if let Some(row) = repr.cov.iter().find(|r| r.len() != d) {
            return Err(Error::DimensionMismatch { expected: d, found: row.len() });
        }
        if repr.cov.len() != d {
            return Err(Error::DimensionMismatch { expected: d, found: repr.cov.len() });
        }
        let cov = DMatrix::from_fn(d, d, |i, j| repr.cov[i][j]);
        GaussianParams::new(DVector::from_vec(repr.mean), cov)
    }
}

impl From<GaussianParams> for GaussianRepr {
    fn from(g: GaussianParams) -> Self {
        let d = g.dim();
        GaussianRepr {
            mean: g.mean.as_slice().to_vec(),
            cov: (0..d).map(|i| (0..d).map(|j| g.covariance[(i, j)]).collect()).collect(),
        }
    }
}

impl GaussianParams {
    pub const SYMMETRY_TOLERANCE: f64 = 1e-12;
    pub const EIGENVALUE_FLOOR: f64 = -1e-10;

    pub fn new(mean: DVector<f64>, covariance: DMatrix<f64>) -> Result<Self> {
        let d = mean.len();
        if covariance.shape() != (d, d) {
            return Err(Error::DimensionMismatch { expected: d, found: covariance.nrows() });
        }
        if mean.iter().chain(covariance.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("Gaussian parameters"));
        }
        let asymmetry = (&covariance - covariance.transpose()).amax();
        if asymmetry > Self::SYMMETRY_TOLERANCE {
            return Err(Error::InvalidScenario(format!("covariance not symmetric (max deviation {asymmetry:e})")));
        }
        if d > 0 {
            let smallest = SymmetricEigen::new(covariance.clone()).eigenvalues.min();
            if smallest < Self::EIGENVALUE_FLOOR {
                return Err(Error::InvalidScenario(format!("covariance has eigenvalue {smallest:e}")));
            }
        }
        Ok(Self { mean, covariance })
    }

    pub fn from_slices(mean: &[f64], covariance: DMatrix<f64>) -> Result<Self> {
        Self::new(DVector::from_column_slice(mean), covariance)
    }

    pub fn standard(dim: usize) -> Self {
        Self { mean: DVector::zeros(dim), covariance: DMatrix::identity(dim, dim) }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.covariance
    }

    /// Sub-vector / sub-matrix on `indices`.
    pub fn marginal(&self, indices: &[usize]) -> GaussianParams {
        GaussianParams {
            mean: DVector::from_iterator(indices.len(), indices.iter().map(|&i| self.mean[i])),
            covariance: submatrix(&self.covariance, indices, indices),
        }
    }

    /// Linear form of `E[X_mis | X_obs = x]`: returns `(K, mu_mis, mu_obs)`
    /// with `E[X_mis | X_obs = x] = mu_mis + K (x - mu_obs)`.
    pub(crate) fn conditioning_map(
        &self,
        observed: &[usize],
        missing: &[usize],
    ) -> (DMatrix<f64>, DVector<f64>, DVector<f64>) {
        let s_oo = submatrix(&self.covariance, observed, observed);
        let s_mo = submatrix(&self.covariance, missing, observed);
        let gain = s_mo * symmetric_pinv(&s_oo);
        let mu_mis = DVector::from_iterator(missing.len(), missing.iter().map(|&i| self.mean[i]));
        let mu_obs = DVector::from_iterator(observed.len(), observed.iter().map(|&i| self.mean[i]));
        (gain, mu_mis, mu_obs)
    }
}

pub(crate) fn submatrix(m: &DMatrix<f64>, rows: &[usize], cols: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), cols.len(), |i, j| m[(rows[i], cols[j])])
}

/// `E[X_mis | X_obs = x_obs]` for `X ~ N(mu, Sigma)`, where `mis` is the
/// complement of `observed_indices` in ascending order.
pub fn conditional_gaussian(params: &GaussianParams, observed_indices: &[usize], x_obs: &[f64]) -> Result<Vec<f64>> {
    let d = params.dim();
    if x_obs.len() != observed_indices.len() {
        return Err(Error::DimensionMismatch { expected: observed_indices.len(), found: x_obs.len() });
    }
    let mut is_observed = vec![false; d];
    for &j in observed_indices {
        if j >= d || is_observed[j] {
            return Err(Error::InvalidConfig(format!("bad observed index {j} for d = {d}")));
        }
        is_observed[j] = true;
    }
    let observed: Vec<usize> = (0..d).filter(|&j| is_observed[j]).collect();
    let missing: Vec<usize> = (0..d).filter(|&j| !is_observed[j]).collect();
    // Callers may list observed indices in any order; align x accordingly.
    let x_sorted: Vec<f64> =
        observed.iter().map(|j| x_obs[observed_indices.iter().position(|k| k == j).expect("present")]).collect();
    let (gain, mu_mis, mu_obs) = params.conditioning_map(&observed, &missing);
    let centred = DVector::from_vec(x_sorted) - mu_obs;
    Ok((mu_mis + gain * centred).as_slice().to_vec())
}

/// Draws from `N(mu, Sigma)` through `mu + F z` with `F F^T = Sigma` taken
/// from the spectral decomposition, so singular covariances are exact.
#[derive(Clone, Debug)]
pub struct GaussianSampler {
    mean: DVector<f64>,
    factor: DMatrix<f64>,
}

impl GaussianSampler {
    pub fn new(params: &GaussianParams) -> Self {
        let d = params.dim();
        if d == 0 {
            return Self { mean: DVector::zeros(0), factor: DMatrix::zeros(0, 0) };
        }
        let eigen = SymmetricEigen::new(params.covariance.clone());
        let largest = eigen.eigenvalues.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let cutoff = rank_cutoff(largest, d, d);
        let kept: Vec<usize> = (0..d).filter(|&i| eigen.eigenvalues[i] > cutoff).collect();
        let factor = DMatrix::from_fn(d, kept.len(), |i, c| {
            eigen.eigenvectors[(i, kept[c])] * eigen.eigenvalues[kept[c]].sqrt()
        });
        Self { mean: params.mean.clone(), factor }
    }

    pub fn rank(&self) -> usize {
        self.factor.ncols()
    }

    pub fn factor(&self) -> &DMatrix<f64> {
        &self.factor
    }

    pub fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        let d = self.mean.len();
        debug_assert_eq!(out.len(), d);
        out.copy_from_slice(self.mean.as_slice());
        for c in 0..self.factor.ncols() {
            let z: f64 = rng.sample(StandardNormal);
            let column = self.factor.column(c);
            for (o, f) in out.iter_mut().zip(column.iter()) {
                *o += f * z;
            }
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let mut out = vec![0.0; self.mean.len()];
        self.sample_into(rng, &mut out);
        out
    }
}
