//! Impute-then-regress baselines next to the pattern-by-pattern predictor
//! under block missingness at random.
//!
//! cargo run --release --example imputation_baselines

use patternlab::estimators::{chained_imputation, fit_constant_impute, fit_iterative_impute, fit_pbp, DEFAULT_ROUNDS};
use patternlab::harness::excess_risk;
use patternlab::simulate::{generate, scenario_preset};
use patternlab::{EstimatorConfig, Predictor, TauRule};

fn main() -> patternlab::Result<()> {
    let scenario = scenario_preset("mar_b")?;
    let n = 3_000;
    let train = generate(&scenario, n, 11)?.dataset;

    let pbp = fit_pbp(&train, &EstimatorConfig::thresholded(TauRule::D_OVER_N.resolve(train.dim(), n)))?;
    let constant = fit_constant_impute(&train)?;
    let iterative = fit_iterative_impute(&train, DEFAULT_ROUNDS)?;
    let models: [(&str, &dyn Predictor); 3] =
        [("pbp (tau = d/n)", &pbp), ("constant impute + LR", &constant), ("iterative impute + LR", &iterative)];
    for (name, model) in models {
        let risk = excess_risk(model, &scenario, 20_000, 12)?;
        println!("{name:<22} excess risk {:.4} +/- {:.4}", risk.estimate, risk.std_error);
    }

    let imputer = chained_imputation(&train, DEFAULT_ROUNDS)?;
    let i = (0..train.n()).find(|&i| train.pattern(i).n_missing() > 0).unwrap_or(0);
    println!("\nrow {i} pattern {}", train.pattern(i));
    println!("  observed {:?}", train.observed_values(i));
    println!("  imputed  {:?}", imputer.imputer.complete_row(&train.observed_values(i), train.pattern(i)));
    Ok(())
}
