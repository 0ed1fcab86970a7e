//! Excess-risk benchmarks and complexity curves.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::complexity::{bound_report, EntropyBoundKind, McEstimate, RunningMoments};
use crate::error::{Error, Result};
use crate::estimators::{
    fit_constant_impute, fit_iterative_impute, fit_pbp, EstimatorConfig, Predictor, TauRule, DEFAULT_ROUNDS,
};
use crate::pattern::PatternDistribution;
use crate::simulate::{derive_seed, generate, label_hash, Scenario, ScenarioRef};

/// Environment variable capping the worker-thread count.
pub const THREADS_ENV: &str = "PATTERNLAB_THREADS";

pub const DEFAULT_N_TEST: usize = 10_000;
pub const MIN_N_TEST: usize = 100;

pub const RESULTS_HEADER: [&str; 8] =
    ["scenario", "estimator", "n", "repetition", "seed", "excess_risk", "fit_seconds", "predict_seconds"];

pub const COMPLEXITY_HEADER: [&str; 10] = [
    "distribution",
    "tau",
    "cp_exact",
    "hartley",
    "shannon",
    "shannon_valid",
    "renyi_alpha",
    "renyi",
    "bertrand",
    "bertrand_valid",
];

/// One entry of the regressor menu.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EstimatorSpec {
    Pbp {
        tau: TauRule,
    },
    CstImputeLr,
    IterativeImputeLr {
        #[serde(default = "default_rounds")]
        rounds: usize,
    },
}

fn default_rounds() -> usize {
    DEFAULT_ROUNDS
}

impl EstimatorSpec {
    pub fn name(&self) -> String {
        match self {
            EstimatorSpec::Pbp { tau } => format!("pbp_{}", tau.label()),
            EstimatorSpec::CstImputeLr => "cst_impute_lr".into(),
            EstimatorSpec::IterativeImputeLr { .. } => "iterative_impute_lr".into(),
        }
    }

    pub fn fit(&self, data: &crate::dataset::MaskedDataset) -> Result<Box<dyn Predictor + Send>> {
        Ok(match self {
            EstimatorSpec::Pbp { tau } => {
                let tau = tau.resolve(data.dim(), data.n());
                Box::new(fit_pbp(data, &EstimatorConfig::thresholded(tau))?)
            }
            EstimatorSpec::CstImputeLr => Box::new(fit_constant_impute(data)?),
            EstimatorSpec::IterativeImputeLr { rounds } => Box::new(fit_iterative_impute(data, *rounds)?),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub scenario: ScenarioRef,
    pub estimators: Vec<EstimatorSpec>,
    pub n_grid: Vec<usize>,
    pub repetitions: usize,
    #[serde(default = "default_n_test")]
    pub n_test: usize,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    /// Write measured wall-clock times to the CSV. Off by default so that
    /// reruns produce identical files.
    #[serde(default)]
    pub timings: bool,
}

fn default_n_test() -> usize {
    DEFAULT_N_TEST
}

impl ExperimentConfig {
    pub fn from_json_str(s: &str) -> Result<Self> {
        let config: Self = serde_json::from_str(s)?;
        config.validate()?;
        Ok(config)
    }

    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.repetitions == 0 {
            return Err(Error::InvalidConfig("repetitions must be >= 1".into()));
        }
        if self.n_test < MIN_N_TEST {
            return Err(Error::InvalidConfig(format!("n_test must be >= {MIN_N_TEST}")));
        }
        if self.estimators.is_empty() {
            return Err(Error::InvalidConfig("no estimators".into()));
        }
        if self.n_grid.is_empty() || self.n_grid.contains(&0) {
            return Err(Error::InvalidConfig("n_grid must hold positive sizes".into()));
        }
        if self.n_grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidConfig("n_grid must be strictly ascending".into()));
        }
        let mut names: Vec<String> = self.estimators.iter().map(EstimatorSpec::name).collect();
        names.sort();
        if names.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidConfig("duplicate estimator".into()));
        }
        for spec in &self.estimators {
            if let EstimatorSpec::Pbp { tau: TauRule::Fixed(t) } = spec {
                if !(t.is_finite() && *t >= 0.0) {
                    return Err(Error::InvalidConfig(format!("threshold {t} must be >= 0")));
                }
            }
        }
        self.scenario.resolve()?.validate()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub scenario: String,
    pub estimator: String,
    pub n: usize,
    pub repetition: usize,
    pub seed: u64,
    pub excess_risk: f64,
    /// Monte-Carlo standard error of `excess_risk`.
    pub std_error: f64,
    pub fit_seconds: f64,
    pub predict_seconds: f64,
}

/// `E[(f_hat(Z) - f*(Z))^2]` over a fresh test draw of `n_test` rows.
pub fn excess_risk(predictor: &dyn Predictor, scenario: &Scenario, n_test: usize, seed: u64) -> Result<McEstimate> {
    Ok(excess_risk_timed(predictor, scenario, n_test, seed)?.0)
}

fn excess_risk_timed(
    predictor: &dyn Predictor,
    scenario: &Scenario,
    n_test: usize,
    seed: u64,
) -> Result<(McEstimate, f64)> {
    if !scenario.has_closed_form() {
        return Err(Error::NoClosedForm("self-masking"));
    }
    let test = generate(scenario, n_test, seed)?;
    let bayes = test.bayes_values.expect("closed-form scenario");
    let start = Instant::now();
    let predictions = predictor.predict_dataset(&test.dataset)?;
    let elapsed = start.elapsed().as_secs_f64();
    let mut moments = RunningMoments::default();
    for (p, b) in predictions.iter().zip(&bayes) {
        let diff = p - b;
        moments.push(diff * diff);
    }
    let estimate = moments.estimate();
    if !estimate.estimate.is_finite() {
        return Err(Error::NonFinite("excess risk"));
    }
    Ok((estimate, elapsed))
}

/// Seeds for the training and test draws of one record.
pub fn record_seeds(root: u64, estimator: &str, n: usize, repetition: usize) -> (u64, u64) {
    let seed = derive_seed(root, &[label_hash(estimator), n as u64, repetition as u64]);
    (seed, derive_seed(seed, &[1]))
}

/// Thread pool sized by [`THREADS_ENV`] when set.
pub fn thread_pool() -> Result<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(value) = std::env::var(THREADS_ENV) {
        let threads: usize =
            value.trim().parse().ok().filter(|&t| t > 0).ok_or_else(|| {
                Error::InvalidConfig(format!("{THREADS_ENV} must be a positive integer, got {value:?}"))
            })?;
        builder = builder.num_threads(threads);
    }
    builder.build().map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))
}

/// Runs every (estimator, n, repetition) triple and returns the records in
/// configuration order.
pub fn run_experiment(config: &ExperimentConfig) -> Result<Vec<RunRecord>> {
    config.validate()?;
    let scenario = config.scenario.resolve()?;
    let mut jobs = Vec::new();
    for spec in &config.estimators {
        for &n in &config.n_grid {
            for repetition in 0..config.repetitions {
                jobs.push((spec, n, repetition));
            }
        }
    }
    let run = |&(spec, n, repetition): &(&EstimatorSpec, usize, usize)| -> Result<RunRecord> {
        let estimator = spec.name();
        let (seed, test_seed) = record_seeds(config.seed, &estimator, n, repetition);
        let train = generate(&scenario, n, seed)?;
        let start = Instant::now();
        let predictor = spec.fit(&train.dataset)?;
        let fit_seconds = start.elapsed().as_secs_f64();
        let (risk, predict_seconds) = excess_risk_timed(predictor.as_ref(), &scenario, config.n_test, test_seed)?;
        Ok(RunRecord {
            scenario: scenario.name.clone(),
            estimator,
            n,
            repetition,
            seed,
            excess_risk: risk.estimate,
            std_error: risk.std_error,
            fit_seconds,
            predict_seconds,
        })
    };
    // Indexed collection keeps the input order whatever the scheduling.
    thread_pool()?.install(|| jobs.par_iter().map(run).collect())
}

/// Writes records under [`RESULTS_HEADER`]. Timing columns are zero unless
/// `timings` is set.
pub fn write_results_csv<W: Write>(records: &[RunRecord], timings: bool, out: W) -> Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    writer.write_record(RESULTS_HEADER)?;
    for r in records {
        let (fit, predict) = if timings { (r.fit_seconds, r.predict_seconds) } else { (0.0, 0.0) };
        writer.write_record([
            r.scenario.clone(),
            r.estimator.clone(),
            r.n.to_string(),
            r.repetition.to_string(),
            r.seed.to_string(),
            r.excess_risk.to_string(),
            fit.to_string(),
            predict.to_string(),
        ])?;
    }
    writer.flush()?;
    Ok(())
}

/// Runs the experiment and writes the CSV to `config.output` if set.
pub fn run_and_write(config: &ExperimentConfig) -> Result<Vec<RunRecord>> {
    let records = run_experiment(config)?;
    if let Some(path) = &config.output {
        write_results_csv(&records, config.timings, std::fs::File::create(path)?)?;
    }
    Ok(records)
}

/// Median of `values` (mean of the two middle values for even lengths).
pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let k = v.len() / 2;
    Some(if v.len() % 2 == 1 { v[k] } else { 0.5 * (v[k - 1] + v[k]) })
}

/// Median excess risk per `(estimator, n)` in first-seen order.
pub fn median_risks(records: &[RunRecord]) -> Vec<(String, usize, f64)> {
    let mut keys: Vec<(String, usize)> = Vec::new();
    for r in records {
        if !keys.iter().any(|(e, n)| e == &r.estimator && *n == r.n) {
            keys.push((r.estimator.clone(), r.n));
        }
    }
    keys.into_iter()
        .map(|(e, n)| {
            let risks: Vec<f64> =
                records.iter().filter(|r| r.estimator == e && r.n == n).map(|r| r.excess_risk).collect();
            let m = median(&risks).expect("non-empty group");
            (e, n, m)
        })
        .collect()
}

/// One row of a complexity curve.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub distribution: String,
    pub tau: f64,
    pub cp_exact: f64,
    pub hartley: f64,
    pub shannon: f64,
    pub shannon_valid: bool,
    pub renyi_alpha: f64,
    pub renyi: f64,
    pub bertrand: f64,
    pub bertrand_valid: bool,
}

pub const DEFAULT_RENYI_ALPHA: f64 = 0.5;

/// Exact `C_p(tau)` and the entropy bounds for each named distribution on
/// each grid point.
pub fn cp_curve(dists: &[(String, PatternDistribution)], taus: &[f64], alpha: f64) -> Result<Vec<CurveRow>> {
    let kinds = [
        EntropyBoundKind::Hartley,
        EntropyBoundKind::Shannon,
        EntropyBoundKind::Renyi(alpha),
        EntropyBoundKind::Bertrand(alpha),
    ];
    let mut rows = Vec::with_capacity(dists.len() * taus.len());
    for (name, dist) in dists {
        for &tau in taus {
            let report = bound_report(dist, tau, &kinds)?;
            let b = |k: usize| report.bounds[k].1;
            rows.push(CurveRow {
                distribution: name.clone(),
                tau,
                cp_exact: report.cp_exact.expect("exact value"),
                hartley: b(0).value,
                shannon: b(1).value,
                shannon_valid: b(1).valid,
                renyi_alpha: alpha,
                renyi: b(2).value,
                bertrand: b(3).value,
                bertrand_valid: b(3).valid,
            });
        }
    }
    Ok(rows)
}

pub fn write_curve_csv<W: Write>(rows: &[CurveRow], out: W) -> Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    writer.write_record(COMPLEXITY_HEADER)?;
    for r in rows {
        writer.write_record([
            r.distribution.clone(),
            r.tau.to_string(),
            r.cp_exact.to_string(),
            r.hartley.to_string(),
            r.shannon.to_string(),
            r.shannon_valid.to_string(),
            r.renyi_alpha.to_string(),
            r.renyi.to_string(),
            r.bertrand.to_string(),
            r.bertrand_valid.to_string(),
        ])?;
    }
    writer.flush()?;
    Ok(())
}

/// Parses a threshold grid: `lo:hi:logK` (K log-spaced points), `lo:hi:linK`
/// (K evenly spaced points) or a comma-separated list.
pub fn parse_tau_grid(spec: &str) -> Result<Vec<f64>> {
    let bad = || Error::InvalidConfig(format!("bad tau grid {spec:?}"));
    let grid: Vec<f64> = if let [lo, hi, kind] = spec.split(':').collect::<Vec<_>>()[..] {
        let lo: f64 = lo.trim().parse().map_err(|_| bad())?;
        let hi: f64 = hi.trim().parse().map_err(|_| bad())?;
        let (log, count) = if let Some(k) = kind.strip_prefix("log") {
            (true, k)
        } else if let Some(k) = kind.strip_prefix("lin") {
            (false, k)
        } else {
            return Err(bad());
        };
        let count: usize = count.parse().map_err(|_| bad())?;
        if count < 2 || !(lo > 0.0 && lo < hi) {
            return Err(bad());
        }
        let step = |k: usize| k as f64 / (count - 1) as f64;
        (0..count)
            .map(|k| {
                if k == count - 1 {
                    hi
                } else if log {
                    (lo.ln() + step(k) * (hi.ln() - lo.ln())).exp()
                } else {
                    lo + step(k) * (hi - lo)
                }
            })
            .collect()
    } else {
        spec.split(',').map(|t| t.trim().parse::<f64>().map_err(|_| bad())).collect::<Result<_>>()?
    };
    if grid.is_empty() || grid.iter().any(|t| !(*t > 0.0 && *t <= 1.0)) {
        return Err(Error::InvalidConfig(format!("tau grid {spec:?} must lie in (0, 1]")));
    }
    Ok(grid)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulate::{scenario_preset, BayesPredictor};

    fn small_config() -> ExperimentConfig {
        ExperimentConfig {
            scenario: ScenarioRef::Preset("mcar_a".into()),
            estimators: vec![EstimatorSpec::Pbp { tau: "d_over_n".parse().unwrap() }, EstimatorSpec::CstImputeLr],
            n_grid: vec![100, 200],
            repetitions: 2,
            n_test: 500,
            seed: 3,
            output: None,
            timings: false,
        }
    }

    #[test]
    fn bayes_predictor_has_zero_risk() {
        for name in ["mcar_a", "mar_b", "gpmm_c"] {
            let s = scenario_preset(name).unwrap();
            let bayes = BayesPredictor::new(&s).unwrap();
            let risk = excess_risk(&bayes, &s, 1000, 4).unwrap();
            assert_eq!(risk.estimate, 0.0, "{name}");
        }
    }

    #[test]
    fn record_count_and_order() {
        let config = small_config();
        let records = run_experiment(&config).unwrap();
        assert_eq!(records.len(), 2 * 2 * 2);
        assert_eq!(records[0].estimator, "pbp_d_over_n");
        assert_eq!((records[1].n, records[1].repetition), (100, 1));
        assert_eq!(records[7].estimator, "cst_impute_lr");
        assert!(records.iter().all(|r| r.excess_risk >= 0.0));
    }

    #[test]
    fn csv_is_reproducible() {
        let config = small_config();
        let mut a = Vec::new();
        let mut b = Vec::new();
        write_results_csv(&run_experiment(&config).unwrap(), false, &mut a).unwrap();
        write_results_csv(&run_experiment(&config).unwrap(), false, &mut b).unwrap();
        assert_eq!(a, b);
        let text = String::from_utf8(a).unwrap();
        assert!(text.starts_with("scenario,estimator,n,repetition,seed,excess_risk,fit_seconds,predict_seconds\n"));
    }

    #[test]
    fn config_validation() {
        let mut c = small_config();
        c.n_grid = vec![200, 100];
        assert!(c.validate().is_err());
        let mut c = small_config();
        c.n_test = 10;
        assert!(c.validate().is_err());
        let mut c = small_config();
        c.repetitions = 0;
        assert!(c.validate().is_err());
        let json = r#"{"scenario": {"preset": "gpmm_c"},
            "estimators": [{"kind": "pbp", "tau": 0.01}, {"kind": "iterative_impute_lr"}],
            "n_grid": [50], "repetitions": 1, "seed": 1}"#;
        let c = ExperimentConfig::from_json_str(json).unwrap();
        assert_eq!(c.n_test, DEFAULT_N_TEST);
        assert_eq!(c.estimators[1], EstimatorSpec::IterativeImputeLr { rounds: DEFAULT_ROUNDS });
        assert_eq!(c.estimators[0].name(), "pbp_tau_0.01");
    }

    #[test]
    fn tau_grids() {
        let g = parse_tau_grid("0.001:1:log4").unwrap();
        assert_eq!(g.len(), 4);
        assert!((g[0] - 0.001).abs() < 1e-15 && (g[1] - 0.01).abs() < 1e-12 && g[3] == 1.0);
        assert_eq!(parse_tau_grid("0.5:1:lin3").unwrap(), vec![0.5, 0.75, 1.0]);
        assert_eq!(parse_tau_grid("0.1, 0.2").unwrap(), vec![0.1, 0.2]);
        assert!(parse_tau_grid("0:1:log4").is_err());
        assert!(parse_tau_grid("0.1,2").is_err());
    }

    #[test]
    fn curve_rows() {
        let dists = vec![("u".to_string(), PatternDistribution::uniform(3).unwrap())];
        let rows = cp_curve(&dists, &[0.01, 0.5], DEFAULT_RENYI_ALPHA).unwrap();
        assert_eq!(rows.len(), 2);
        assert!((rows[0].cp_exact - 0.08).abs() < 1e-15);
        assert!((rows[0].hartley - 0.08).abs() < 1e-15);
        let mut out = Vec::new();
        write_curve_csv(&rows, &mut out).unwrap();
        assert!(String::from_utf8(out).unwrap().starts_with("distribution,tau,cp_exact,hartley"));
    }

    #[test]
    fn medians() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), Some(2.0));
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), Some(2.5));
        assert_eq!(median(&[]), None);
    }
}
