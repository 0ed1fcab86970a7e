//! A small excess-risk experiment written as CSV, the same pipeline the
//! `patternlab bench` subcommand drives from a JSON config.
//!
//! cargo run --release --example benchmark

use patternlab::harness::{median_risks, run_experiment, write_results_csv, ExperimentConfig};

const CONFIG: &str = r#"{
    "scenario": {"preset": "mar_b"},
    "estimators": [
        {"kind": "pbp", "tau": "d_over_n"},
        {"kind": "pbp", "tau": "one_over_n"},
        {"kind": "cst_impute_lr"}
    ],
    "n_grid": [200, 1000, 5000],
    "repetitions": 5,
    "n_test": 5000,
    "seed": 2024
}"#;

fn main() -> patternlab::Result<()> {
    let config = ExperimentConfig::from_json_str(CONFIG)?;
    let records = run_experiment(&config)?;
    write_results_csv(&records, false, std::io::stdout().lock())?;
    eprintln!("\nmedian excess risk");
    for (estimator, n, risk) in median_risks(&records) {
        eprintln!("  {estimator:<16} n = {n:<5} {risk:.4}");
    }
    Ok(())
}
