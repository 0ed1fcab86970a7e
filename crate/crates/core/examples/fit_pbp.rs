//! Fits the pattern-by-pattern least-squares predictor with and without
//! thresholding and compares excess risks on fresh data.
//!
//! cargo run --example fit_pbp

use patternlab::estimators::fit_pbp;
use patternlab::harness::excess_risk;
use patternlab::simulate::{generate, scenario_preset};
use patternlab::{EstimatorConfig, TauRule};

fn main() -> patternlab::Result<()> {
    let scenario = scenario_preset("gpmm_c")?;
    for n in [200, 2_000] {
        let train = generate(&scenario, n, 1)?;
        for rule in [TauRule::D_OVER_N, TauRule::ONE_OVER_N, TauRule::Fixed(0.05)] {
            let tau = rule.resolve(scenario.d, n);
            let model = fit_pbp(&train.dataset, &EstimatorConfig::thresholded(tau))?;
            let risk = excess_risk(&model, &scenario, 20_000, 2)?;
            println!(
                "n = {n:>5}  tau = {:<12} patterns fitted = {}  excess risk = {:.4} +/- {:.4}",
                rule.label(),
                model.n_models(),
                risk.estimate,
                risk.std_error
            );
        }
    }

    let train = generate(&scenario, 2_000, 1)?;
    let model = fit_pbp(&train.dataset, &EstimatorConfig::thresholded(0.01))?;
    for (m, regression) in model.models().take(3) {
        println!("{m}: intercept {:.3}, {} coefficients", regression.intercept, regression.coefficients.len());
    }
    Ok(())
}
