//! Minimum-norm least squares on a rank-deficient design and Gaussian
//! conditioning with a singular covariance.
//!
//! cargo run --example least_squares

use nalgebra::DMatrix;
use patternlab::{clip, conditional_gaussian, least_squares, GaussianParams};

fn main() -> patternlab::Result<()> {
    // Third column duplicates the first, so the normal equations are singular.
    let features =
        DMatrix::from_row_slice(5, 3, &[1.0, 2.0, 1.0, 0.0, 1.0, 0.0, 2.0, -1.0, 2.0, 1.0, 0.5, 1.0, -1.0, 3.0, -1.0]);
    let targets = [3.1, 1.0, 2.9, 2.6, 1.9];
    let model = least_squares(&features, &targets)?;
    println!("intercept {:.4}, coefficients {:?}, norm {:.4}", model.intercept, model.coefficients, model.norm());
    println!("clipped prediction at level 2: {}", clip(model.evaluate(&[3.0, 1.0, 3.0]), 2.0));

    // Comonotone pair plus an independent coordinate.
    let cov = DMatrix::from_row_slice(3, 3, &[1.0, 1.0, 0.0, 1.0, 1.0, 0.0, 0.0, 0.0, 2.0]);
    let gaussian = GaussianParams::from_slices(&[0.0, 1.0, -1.0], cov)?;
    let mis = conditional_gaussian(&gaussian, &[0, 2], &[0.7, 0.0])?;
    println!("E[X_2 | X_1 = 0.7, X_3 = 0] = {:.4}", mis[0]);
    Ok(())
}
