#![allow(dead_code)]

use patternlab::{ExplicitDistribution, MissingPattern, PatternDistribution};
use rand::seq::index::sample;
use rand::Rng;

/// Random explicit law on `{0,1}^d` with `support` atoms of uneven mass.
pub fn random_explicit<R: Rng>(rng: &mut R, d: usize, support: usize) -> ExplicitDistribution {
    let total = 1usize << d;
    let k = support.clamp(1, total);
    let bits = sample(rng, total, k);
    let mut weights: Vec<f64> = (0..k).map(|_| (-rng.gen::<f64>().max(1e-300).ln()).powi(2)).collect();
    let sum: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= sum);
    let mut entries: Vec<(MissingPattern, f64)> =
        bits.iter().zip(weights).map(|(b, w)| (MissingPattern::new(b as u64, d).unwrap(), w)).collect();
    // Fold round-off into the last atom so the mass is 1 to the ulp.
    let head: f64 = entries[..k - 1].iter().map(|e| e.1).sum();
    entries[k - 1].1 = 1.0 - head;
    ExplicitDistribution::new(d, entries).unwrap()
}

/// `sum_m min(p_m, tau)` over all `2^d` patterns.
pub fn brute_force_cp(dist: &PatternDistribution, tau: f64) -> f64 {
    MissingPattern::all(dist.dim()).map(|m| dist.probability(m).unwrap().min(tau)).sum()
}

/// Cyclic Jacobi eigendecomposition of a symmetric matrix stored row-major.
/// Returns eigenvalues and column eigenvectors (row-major `n x n`).
pub fn jacobi_eigen(a: &[f64], n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut a = a.to_vec();
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i * n + j].powi(2))
            .sum();
        let scale: f64 = a.iter().map(|x| x * x).sum::<f64>().max(f64::MIN_POSITIVE);
        if off <= 1e-30 * scale {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[p * n + q];
                if apq.abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q * n + q] - a[p * n + p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }
    ((0..n).map(|i| a[i * n + i]).collect(), v)
}

/// Minimum-norm least-squares solution `(A^T A)^+ A^T y` through Jacobi.
/// `a` is row-major `rows x cols`.
pub fn min_norm_oracle(a: &[f64], rows: usize, cols: usize, y: &[f64]) -> Vec<f64> {
    let mut gram = vec![0.0; cols * cols];
    let mut aty = vec![0.0; cols];
    for r in 0..rows {
        let row = &a[r * cols..(r + 1) * cols];
        for i in 0..cols {
            aty[i] += row[i] * y[r];
            for j in 0..cols {
                gram[i * cols + j] += row[i] * row[j];
            }
        }
    }
    let (values, vectors) = jacobi_eigen(&gram, cols);
    let largest = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let cutoff = 1e-10 * largest;
    let mut out = vec![0.0; cols];
    for k in 0..cols {
        if values[k] <= cutoff {
            continue;
        }
        let proj: f64 = (0..cols).map(|i| vectors[i * cols + k] * aty[i]).sum();
        for i in 0..cols {
            out[i] += vectors[i * cols + k] * proj / values[k];
        }
    }
    out
}
