//! Draws a labeled sample from the Gaussian pattern mixture preset and
//! reports pattern frequencies and the Bayes risk floor.
//!
//! cargo run --example generate_scenario

use std::collections::BTreeMap;

use patternlab::simulate::{generate, scenario_preset};

fn main() -> patternlab::Result<()> {
    let scenario = scenario_preset("gpmm_c")?;
    let sample = generate(&scenario, 20_000, 42)?;
    let data = &sample.dataset;

    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    for &m in data.patterns() {
        *counts.entry(m.to_string()).or_default() += 1;
    }
    println!("{} rows, d = {}", data.n(), data.dim());
    for (mask, count) in counts {
        println!("  {mask}  {:.4}", count as f64 / data.n() as f64);
    }

    if let Some(bayes) = &sample.bayes_values {
        let noise: f64 = (0..data.n()).map(|i| (data.response(i) - bayes[i]).powi(2)).sum::<f64>() / data.n() as f64;
        println!("mean (Y - f*)^2 = {noise:.4} (sigma^2 = {})", scenario.sigma.powi(2));
    }
    println!("first row, before masking: {:?}", sample.full_row(0));
    println!("first row, observed:       {:?}", data.observed_values(0));
    Ok(())
}
