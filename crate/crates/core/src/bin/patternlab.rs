use std::fs::File;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use patternlab::estimators::fit_pbp;
use patternlab::harness::{
    cp_curve, excess_risk, parse_tau_grid, run_experiment, write_curve_csv, write_results_csv, ExperimentConfig,
    DEFAULT_RENYI_ALPHA,
};
use patternlab::simulate::{distribution_preset, generate, scenario_preset, Scenario};
use patternlab::{EstimatorConfig, ExplicitDistribution, MaskedDataset, PatternDistribution, PbPPredictor, TauRule};

#[derive(Parser)]
#[command(name = "patternlab", version, about = "Pattern-by-pattern linear prediction with missing values")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an excess-risk experiment and write one CSV row per record.
    Bench {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the config's output path; stdout if neither is set.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Write measured fit/predict times instead of zeros.
        #[arg(long)]
        timings: bool,
    },
    /// Tabulate C_p(tau) and its entropy bounds.
    Complexity {
        /// Comma-separated preset names (bern_pA..bern_pD).
        #[arg(long, value_delimiter = ',')]
        preset: Vec<String>,
        /// Distribution JSON files (explicit or tagged family).
        #[arg(long)]
        dist: Vec<PathBuf>,
        /// `lo:hi:logK`, `lo:hi:linK` or a comma-separated list.
        #[arg(long, default_value = "0.001:1:log40")]
        tau_grid: String,
        #[arg(long, default_value_t = DEFAULT_RENYI_ALPHA)]
        alpha: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Draw a labeled dataset from a scenario.
    Gen {
        /// Scenario JSON file or preset name.
        #[arg(long)]
        scenario: String,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fit an estimator on a dataset and save the model.
    Fit {
        #[arg(long)]
        data: PathBuf,
        #[arg(long, value_enum, default_value_t = EstimatorKind::Pbp)]
        estimator: EstimatorKind,
        /// `d_over_n`, `one_over_n` or a number.
        #[arg(long, default_value = "d_over_n")]
        tau: TauRule,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Excess risk of a saved model on fresh scenario data.
    Eval {
        #[arg(long)]
        model: PathBuf,
        /// Scenario JSON file or preset name.
        #[arg(long)]
        scenario: String,
        #[arg(long, default_value_t = patternlab::harness::DEFAULT_N_TEST)]
        n_test: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum EstimatorKind {
    Pbp,
}

fn output(path: Option<&Path>) -> patternlab::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(File::create(p)?),
        None => Box::new(io::stdout().lock()),
    })
}

fn load_scenario(arg: &str) -> patternlab::Result<Scenario> {
    if Path::new(arg).exists() {
        Scenario::from_json_file(arg)
    } else {
        scenario_preset(arg)
    }
}

fn load_distribution(path: &Path) -> patternlab::Result<(String, PatternDistribution)> {
    let text = std::fs::read_to_string(path)?;
    let name = path.file_stem().map_or_else(|| "dist".into(), |s| s.to_string_lossy().into_owned());
    let dist = match serde_json::from_str::<PatternDistribution>(&text) {
        Ok(d) => d,
        Err(_) => ExplicitDistribution::from_json_str(&text)?.into(),
    };
    dist.validate()?;
    Ok((name, dist))
}

fn run(cli: Cli) -> patternlab::Result<()> {
    match cli.command {
        Command::Bench { config, out, timings } => {
            let mut config = ExperimentConfig::from_json_file(config)?;
            config.timings |= timings;
            let records = run_experiment(&config)?;
            let path = out.or(config.output.clone());
            write_results_csv(&records, config.timings, output(path.as_deref())?)?;
        }
        Command::Complexity { preset, dist, tau_grid, alpha, out } => {
            let mut dists = preset
                .iter()
                .map(|name| Ok((name.clone(), distribution_preset(name)?)))
                .collect::<patternlab::Result<Vec<_>>>()?;
            for path in &dist {
                dists.push(load_distribution(path)?);
            }
            if dists.is_empty() {
                return Err(patternlab::Error::InvalidConfig("give --preset or --dist".into()));
            }
            let rows = cp_curve(&dists, &parse_tau_grid(&tau_grid)?, alpha)?;
            write_curve_csv(&rows, output(out.as_deref())?)?;
        }
        Command::Gen { scenario, n, seed, out } => {
            let sample = generate(&load_scenario(&scenario)?, n, seed)?;
            let mut w = output(out.as_deref())?;
            writeln!(w, "{}", sample.dataset.to_json_string()?)?;
        }
        Command::Fit { data, estimator: EstimatorKind::Pbp, tau, out } => {
            let data = MaskedDataset::from_json_file(data)?;
            let config = EstimatorConfig::thresholded(tau.resolve(data.dim(), data.n()));
            let model = fit_pbp(&data, &config)?;
            eprintln!("fitted {} pattern models on n = {}", model.n_models(), data.n());
            let mut w = output(out.as_deref())?;
            writeln!(w, "{}", model.to_json_string()?)?;
        }
        Command::Eval { model, scenario, n_test, seed } => {
            let model = PbPPredictor::from_json_file(model)?;
            let risk = excess_risk(&model, &load_scenario(&scenario)?, n_test, seed)?;
            println!("excess_risk,std_error,n_test");
            println!("{},{},{}", risk.estimate, risk.std_error, risk.samples);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
