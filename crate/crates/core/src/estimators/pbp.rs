use std::collections::BTreeMap;
use std::path::Path;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{MaskedDataset, PatternIndex};
use crate::error::{Error, Result};
use crate::pattern::MissingPattern;
use crate::solver::{clip, least_squares, AffineModel};

use super::Predictor;

/// `D = sqrt(gamma) * (1 + sqrt(gamma * ln n))`.
pub fn default_d(gamma: f64, n: usize) -> f64 {
    assert!(gamma > 0.0 && n >= 1);
    gamma.sqrt() * (1.0 + (gamma * (n as f64).ln()).sqrt())
}

/// How the frequency threshold is derived from the training size.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TauRule {
    Named(NamedTau),
    Fixed(f64),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NamedTau {
    /// `tau = d / n`.
    DOverN,
    /// Every pattern seen at least once. Resolves to `tau = 0`: the strict
    /// test `p̂ > tau` would otherwise drop patterns seen exactly once.
    OneOverN,
}

impl TauRule {
    pub const D_OVER_N: TauRule = TauRule::Named(NamedTau::DOverN);
    pub const ONE_OVER_N: TauRule = TauRule::Named(NamedTau::OneOverN);

    pub fn resolve(self, d: usize, n: usize) -> f64 {
        match self {
            TauRule::Named(NamedTau::DOverN) => d as f64 / n as f64,
            TauRule::Named(NamedTau::OneOverN) => 0.0,
            TauRule::Fixed(tau) => tau,
        }
    }

    pub fn label(self) -> String {
        match self {
            TauRule::Named(NamedTau::DOverN) => "d_over_n".into(),
            TauRule::Named(NamedTau::OneOverN) => "one_over_n".into(),
            TauRule::Fixed(tau) => format!("tau_{tau}"),
        }
    }
}

impl std::str::FromStr for TauRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "d_over_n" => Ok(Self::D_OVER_N),
            "one_over_n" => Ok(Self::ONE_OVER_N),
            other => other
                .parse::<f64>()
                .map(TauRule::Fixed)
                .map_err(|_| Error::InvalidConfig(format!("unknown tau rule `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimatorConfig {
    pub tau: f64,
    pub clip_level: Option<f64>,
    pub ball_radius: Option<f64>,
    pub gamma: Option<f64>,
    pub lipschitz_bound: Option<f64>,
}

impl EstimatorConfig {
    /// Threshold only; no ball filter, no clipping.
    pub fn thresholded(tau: f64) -> Self {
        Self { tau, clip_level: None, ball_radius: None, gamma: None, lipschitz_bound: None }
    }

    /// Ball filter and clipping as in the risk analysis. `gamma` is the
    /// largest per-column empirical second moment of observed entries,
    /// `D = default_d(gamma, n)`, and `L = (D + 1)(B + 1)` when a Lipschitz
    /// bound `B` is supplied (clipping stays off otherwise).
    pub fn theory_mode(data: &MaskedDataset, tau: f64, lipschitz_bound: Option<f64>) -> Result<Self> {
        let gamma = (0..data.dim())
            .map(|j| {
                let (sum, count) =
                    (0..data.n()).filter_map(|i| data.get(i, j)).fold((0.0, 0usize), |(s, c), v| (s + v * v, c + 1));
                if count == 0 {
                    0.0
                } else {
                    sum / count as f64
                }
            })
            .fold(0.0f64, f64::max);
        if gamma <= 0.0 {
            return Err(Error::InvalidConfig("no observed entry to estimate gamma".into()));
        }
        let radius = default_d(gamma, data.n());
        let config = Self {
            tau,
            clip_level: lipschitz_bound.map(|b| (radius + 1.0) * (b + 1.0)),
            ball_radius: Some(radius),
            gamma: Some(gamma),
            lipschitz_bound,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.tau) {
            return Err(Error::InvalidConfig(format!("tau must be in [0, 1], got {}", self.tau)));
        }
        let positive = |name: &str, v: Option<f64>| match v {
            Some(v) if !(v > 0.0 && v.is_finite()) => {
                Err(Error::InvalidConfig(format!("{name} must be positive, got {v}")))
            }
            _ => Ok(()),
        };
        positive("clip_level", self.clip_level)?;
        positive("ball_radius", self.ball_radius)?;
        positive("gamma", self.gamma)?;
        positive("lipschitz_bound", self.lipschitz_bound)?;
        if let (Some(radius), Some(gamma)) = (self.ball_radius, self.gamma) {
            if radius <= gamma.sqrt() {
                return Err(Error::InvalidConfig(format!(
                    "ball radius {radius} must exceed sqrt(gamma) = {}",
                    gamma.sqrt()
                )));
            }
        }
        Ok(())
    }
}

/// One affine model per sufficiently frequent pattern; zero elsewhere.
#[derive(Clone, Debug, PartialEq)]
pub struct PbPPredictor {
    models: BTreeMap<MissingPattern, AffineModel>,
    config: EstimatorConfig,
    train_frequencies: BTreeMap<MissingPattern, f64>,
}

impl PbPPredictor {
    pub fn config(&self) -> &EstimatorConfig {
        &self.config
    }

    pub fn model(&self, m: MissingPattern) -> Option<&AffineModel> {
        self.models.get(&m)
    }

    pub fn models(&self) -> impl Iterator<Item = (MissingPattern, &AffineModel)> {
        self.models.iter().map(|(m, a)| (*m, a))
    }

    pub fn n_models(&self) -> usize {
        self.models.len()
    }

    /// Empirical pattern frequencies of the training sample (empty after
    /// loading from JSON).
    pub fn train_frequencies(&self) -> &BTreeMap<MissingPattern, f64> {
        &self.train_frequencies
    }

    pub fn to_json_string(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&PbPRepr::from(self))?)
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let repr: PbPRepr = serde_json::from_str(s)?;
        repr.try_into()
    }

    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }
}

/// Fits the thresholded pattern-by-pattern least-squares predictor.
///
/// Patterns with `p̂_m > tau` get a minimum-norm least-squares model on their
/// rows (restricted to `‖x_obs‖∞ <= D` when a ball radius is set, with the
/// zero model if nothing survives the filter). Other patterns get no model.
pub fn fit_pbp(data: &MaskedDataset, config: &EstimatorConfig) -> Result<PbPPredictor> {
    config.validate()?;
    let index = PatternIndex::build(data);
    let selected: Vec<(MissingPattern, &[usize], f64)> =
        index.iter().filter(|&(_, _, freq)| freq > config.tau).collect();
    let fitted = selected
        .par_iter()
        .map(|&(m, rows, _)| Ok((m, fit_pattern(data, m, rows, config.ball_radius)?)))
        .collect::<Result<Vec<_>>>()?;
    Ok(PbPPredictor {
        models: fitted.into_iter().collect(),
        config: config.clone(),
        train_frequencies: index.iter().map(|(m, _, f)| (m, f)).collect(),
    })
}

fn fit_pattern(
    data: &MaskedDataset,
    m: MissingPattern,
    rows: &[usize],
    ball_radius: Option<f64>,
) -> Result<AffineModel> {
    let k = m.n_observed();
    let mut features = Vec::with_capacity(rows.len() * k);
    let mut targets = Vec::with_capacity(rows.len());
    let mut buf = Vec::with_capacity(k);
    for &i in rows {
        buf.clear();
        data.extend_observed(i, &mut buf);
        if let Some(radius) = ball_radius {
            if buf.iter().any(|v| v.abs() > radius) {
                continue;
            }
        }
        features.extend_from_slice(&buf);
        targets.push(data.response(i));
    }
    if targets.is_empty() {
        return Ok(AffineModel::zero(k));
    }
    let features = DMatrix::from_row_slice(targets.len(), k, &features);
    least_squares(&features, &targets)
}

/// `T_L f̂_m(x_obs)` for patterns with a model, `0` otherwise.
pub fn predict_pbp(model: &PbPPredictor, x_obs: &[f64], m: MissingPattern) -> Result<f64> {
    if x_obs.len() != m.n_observed() {
        return Err(Error::DimensionMismatch { expected: m.n_observed(), found: x_obs.len() });
    }
    let raw = model.models.get(&m).map_or(0.0, |a| a.evaluate(x_obs));
    Ok(match model.config.clip_level {
        Some(level) => clip(raw, level),
        None => raw,
    })
}

impl Predictor for PbPPredictor {
    fn predict(&self, x_obs: &[f64], m: MissingPattern) -> Result<f64> {
        predict_pbp(self, x_obs, m)
    }
}

#[derive(Serialize, Deserialize)]
struct PbPRepr {
    tau: f64,
    clip: Option<f64>,
    models: Vec<PatternModelRepr>,
}

#[derive(Serialize, Deserialize)]
struct PatternModelRepr {
    mask: MissingPattern,
    intercept: f64,
    coef: Vec<f64>,
}

impl From<&PbPPredictor> for PbPRepr {
    fn from(p: &PbPPredictor) -> Self {
        PbPRepr {
            tau: p.config.tau,
            clip: p.config.clip_level,
            models: p
                .models
                .iter()
                .map(|(m, a)| PatternModelRepr { mask: *m, intercept: a.intercept, coef: a.coefficients.clone() })
                .collect(),
        }
    }
}

impl TryFrom<PbPRepr> for PbPPredictor {
    type Error = Error;

    fn try_from(repr: PbPRepr) -> Result<Self> {
        let mut config = EstimatorConfig::thresholded(repr.tau);
        config.clip_level = repr.clip;
        config.validate()?;
        let mut models = BTreeMap::new();
        for entry in repr.models {
            if entry.coef.len() != entry.mask.n_observed() {
                return Err(Error::DimensionMismatch { expected: entry.mask.n_observed(), found: entry.coef.len() });
            }
            let model = AffineModel::new(entry.intercept, entry.coef)?;
            if models.insert(entry.mask, model).is_some() {
                return Err(Error::InvalidConfig(format!("duplicate model for {}", entry.mask)));
            }
        }
        Ok(PbPPredictor { models, config, train_frequencies: BTreeMap::new() })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pat(s: &str) -> MissingPattern {
        s.parse().unwrap()
    }

    #[test]
    fn default_d_values() {
        assert_eq!(default_d(1.0, 1), 1.0);
        let e = std::f64::consts::E;
        // n must be an integer; check the formula itself at n = e.
        let at_e = |gamma: f64| gamma.sqrt() * (1.0 + (gamma * e.ln()).sqrt());
        assert!((at_e(1.0) - 2.0).abs() < 1e-15);
        assert!((at_e(4.0) - 6.0).abs() < 1e-15);
        assert!((default_d(4.0, 3) - 2.0 * (1.0 + (4.0 * 3f64.ln()).sqrt())).abs() < 1e-15);
    }

    #[test]
    fn noiseless_full_data_recovers_coefficients() {
        let rows: Vec<Vec<f64>> =
            (0..6).map(|i| vec![i as f64, (i * i) as f64 * 0.5 - 1.0, (i as f64).sin()]).collect();
        let y: Vec<f64> = rows.iter().map(|r| 0.5 + r[0] - 2.0 * r[1] + 3.0 * r[2]).collect();
        let data = MaskedDataset::from_rows(&rows, vec![pat("000"); 6], y).unwrap();
        let fit = fit_pbp(&data, &EstimatorConfig::thresholded(3.0 / 6.0)).unwrap();
        let model = fit.model(pat("000")).unwrap();
        assert!((model.intercept - 0.5).abs() < 1e-8);
        for (c, t) in model.coefficients.iter().zip([1.0, -2.0, 3.0]) {
            assert!((c - t).abs() < 1e-8);
        }
    }

    #[test]
    fn rare_pattern_is_dropped_and_predicts_zero() {
        let rows = vec![vec![1.0, 2.0], vec![2.0, 0.0], vec![3.0, 1.0], vec![4.0, 9.0]];
        let masks = vec![pat("00"), pat("00"), pat("00"), pat("01")];
        let data = MaskedDataset::from_rows(&rows, masks, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let fit = fit_pbp(&data, &EstimatorConfig::thresholded(2.0 / 4.0)).unwrap();
        assert!(fit.model(pat("01")).is_none());
        assert_eq!(predict_pbp(&fit, &[4.0], pat("01")).unwrap(), 0.0);
        assert!(fit.model(pat("00")).is_some());
        // Tie p̂ = tau is excluded.
        let fit = fit_pbp(&data, &EstimatorConfig::thresholded(0.75)).unwrap();
        assert_eq!(fit.n_models(), 0);
    }

    #[test]
    fn fully_missing_pattern_fits_the_mean() {
        let rows = vec![vec![0.0, 0.0]; 3];
        let data = MaskedDataset::from_rows(&rows, vec![pat("11"); 3], vec![1.0, 2.0, 6.0]).unwrap();
        let fit = fit_pbp(&data, &EstimatorConfig::thresholded(0.0)).unwrap();
        let model = fit.model(pat("11")).unwrap();
        assert!((model.intercept - 3.0).abs() < 1e-12);
        assert_eq!(predict_pbp(&fit, &[], pat("11")).unwrap(), model.intercept);
    }

    fn single_model(clip_level: Option<f64>) -> PbPPredictor {
        let json = format!(
            r#"{{"tau": 0.0, "clip": {}, "models": [{{"mask": "01", "intercept": 1.0, "coef": [2.0]}}]}}"#,
            clip_level.map_or("null".to_string(), |c| c.to_string())
        );
        PbPPredictor::from_json_str(&json).unwrap()
    }

    #[test]
    fn prediction_cases() {
        let plain = single_model(None);
        assert_eq!(predict_pbp(&plain, &[3.0], pat("01")).unwrap(), 7.0);
        assert_eq!(predict_pbp(&plain, &[3.0, 1.0], pat("00")).unwrap(), 0.0);
        assert!(predict_pbp(&plain, &[3.0, 1.0], pat("01")).is_err());
        let clipped = single_model(Some(5.0));
        assert_eq!(predict_pbp(&clipped, &[3.0], pat("01")).unwrap(), 5.0);
        assert_eq!(predict_pbp(&clipped, &[-30.0], pat("01")).unwrap(), -5.0);
    }

    #[test]
    fn ball_filter_can_empty_a_pattern() {
        let rows = vec![vec![10.0], vec![20.0], vec![0.5], vec![0.1]];
        let masks = vec![pat("0"), pat("0"), pat("1"), pat("1")];
        let data = MaskedDataset::from_rows(&rows, masks, vec![1.0, 2.0, 3.0, 5.0]).unwrap();
        let mut config = EstimatorConfig::thresholded(0.0);
        config.ball_radius = Some(1.0);
        let fit = fit_pbp(&data, &config).unwrap();
        assert_eq!(fit.model(pat("0")), Some(&AffineModel::zero(1)));
        // Fully missing rows have an empty observed part: always inside the ball.
        assert!((fit.model(pat("1")).unwrap().intercept - 4.0).abs() < 1e-12);
    }

    #[test]
    fn config_validation() {
        assert!(EstimatorConfig::thresholded(1.5).validate().is_err());
        let mut c = EstimatorConfig::thresholded(0.1);
        c.gamma = Some(4.0);
        c.ball_radius = Some(1.5);
        assert!(c.validate().is_err());
        c.ball_radius = Some(2.5);
        assert!(c.validate().is_ok());
        c.clip_level = Some(0.0);
        assert!(c.validate().is_err());
    }

    #[test]
    fn theory_mode_sets_radius_and_clip() {
        let rows = vec![vec![1.0, 2.0], vec![-1.0, 0.0], vec![3.0, 1.0]];
        let data = MaskedDataset::from_rows(&rows, vec![pat("00"), pat("01"), pat("00")], vec![0.0; 3]).unwrap();
        let config = EstimatorConfig::theory_mode(&data, 0.0, Some(2.0)).unwrap();
        let gamma = (1.0 + 1.0 + 9.0) / 3.0;
        assert!((config.gamma.unwrap() - gamma).abs() < 1e-15);
        let radius = default_d(gamma, 3);
        assert!((config.ball_radius.unwrap() - radius).abs() < 1e-15);
        assert!((config.clip_level.unwrap() - (radius + 1.0) * 3.0).abs() < 1e-12);
        let unclipped = EstimatorConfig::theory_mode(&data, 0.0, None).unwrap();
        assert_eq!(unclipped.clip_level, None);
    }

    #[test]
    fn json_layout() {
        let rows = vec![vec![1.0, 2.0], vec![2.0, 1.0], vec![0.0, 5.0]];
        let data = MaskedDataset::from_rows(&rows, vec![pat("00"), pat("00"), pat("10")], vec![1.0, 2.0, 3.0]).unwrap();
        let fit = fit_pbp(&data, &EstimatorConfig::thresholded(0.0)).unwrap();
        let json = fit.to_json_string().unwrap();
        let value: serde_json::Value = serde_json::from_str(&json).unwrap();
        assert_eq!(value["tau"], 0.0);
        assert!(value["clip"].is_null());
        assert_eq!(value["models"][1]["mask"], "10");
        assert_eq!(value["models"][1]["coef"].as_array().unwrap().len(), 1);
        let back = PbPPredictor::from_json_str(&json).unwrap();
        assert_eq!(back.models().count(), 2);
        for (m, a) in fit.models() {
            assert_eq!(back.model(m), Some(a));
        }
    }

    #[test]
    fn tau_rules() {
        assert_eq!(TauRule::D_OVER_N.resolve(8, 400), 0.02);
        assert_eq!(TauRule::ONE_OVER_N.resolve(8, 400), 0.0);
        assert_eq!("0.25".parse::<TauRule>().unwrap().resolve(8, 400), 0.25);
        assert!("often".parse::<TauRule>().is_err());
        let parsed: TauRule = serde_json::from_str("\"d_over_n\"").unwrap();
        assert_eq!(parsed, TauRule::D_OVER_N);
        let parsed: TauRule = serde_json::from_str("0.1").unwrap();
        assert_eq!(parsed, TauRule::Fixed(0.1));
    }
}
