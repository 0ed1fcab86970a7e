//! Scenario generators for the missingness mechanisms, closed-form Bayes
//! predictors and a rejection-sampling oracle for `E[Y | X_obs, M = m]`.

use std::collections::HashMap;
use std::path::Path;
use std::sync::RwLock;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::complexity::{McEstimate, RunningMoments};
use crate::dataset::MaskedDataset;
use crate::error::{Error, Result};
use crate::estimators::Predictor;
use crate::pattern::{MergeModel, MissingPattern, PatternDistribution};
use crate::solver::{AffineModel, GaussianParams, GaussianSampler};

/// Rows per independently seeded chunk in [`generate`].
pub const CHUNK_ROWS: usize = 4096;

/// Probability tolerance for GPMM component weights.
const WEIGHT_TOLERANCE: f64 = 1e-12;

pub const PRESET_NAMES: [&str; 7] = ["mcar_a", "mar_b", "gpmm_c", "bern_pA", "bern_pB", "bern_pC", "bern_pD"];

/// `Y = beta0 + beta^T X + sigma * noise`, with a joint law for `(X, M)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    #[serde(default = "default_name")]
    pub name: String,
    pub d: usize,
    pub beta0: f64,
    pub beta: Vec<f64>,
    pub sigma: f64,
    #[serde(flatten)]
    pub kind: ScenarioKind,
}

fn default_name() -> String {
    "custom".into()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScenarioKind {
    /// Gaussian covariates, pattern drawn independently of `X`.
    McarGaussian { gaussian: GaussianParams, missingness: PatternDistribution },
    /// `X1 ~ N(0, I)` always observed, `M2 = 1{X1 > 0}`, `X2 | X1 ~ N(M2, cov)`.
    MarBlock { block: usize, cov: Vec<Vec<f64>> },
    /// Pattern `m` drawn first, then `X ~ N(mu_m, Sigma_m)`.
    Gpmm { components: Vec<GpmmComponent> },
    /// Gaussian covariates, `P(M_j = 1 | X_j) = peak_j exp(-(X_j - center_j)^2 / (2 width_j^2))`.
    SelfMasking {
        gaussian: GaussianParams,
        centers: Vec<f64>,
        widths: Vec<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        peaks: Option<Vec<f64>>,
    },
    /// Gaussian covariates with database-merge missingness (independent of `X`).
    Merge { gaussian: GaussianParams, merge: MergeModel },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GpmmComponent {
    pub p: f64,
    pub mask: MissingPattern,
    pub gaussian: GaussianParams,
}

/// Default self-masking probability at the center.
pub const DEFAULT_PEAK: f64 = 0.5;

/// A scenario given inline or by preset name (`{"preset": "gpmm_c"}`).
#[derive(Clone, Debug, PartialEq)]
pub enum ScenarioRef {
    Preset(String),
    Inline(Box<Scenario>),
}

impl ScenarioRef {
    pub fn resolve(&self) -> Result<Scenario> {
        match self {
            ScenarioRef::Preset(name) => scenario_preset(name),
            ScenarioRef::Inline(s) => {
                s.validate()?;
                Ok((**s).clone())
            }
        }
    }
}

impl Serialize for ScenarioRef {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            ScenarioRef::Preset(name) => {
                use serde::ser::SerializeMap;
                let mut map = serializer.serialize_map(Some(1))?;
                map.serialize_entry("preset", name)?;
                map.end()
            }
            ScenarioRef::Inline(s) => s.serialize(serializer),
        }
    }
}

impl<'de> Deserialize<'de> for ScenarioRef {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let value = serde_json::Value::deserialize(deserializer)?;
        if let Some(name) = value.get("preset") {
            let name = name.as_str().ok_or_else(|| D::Error::custom("preset must be a string"))?;
            return Ok(ScenarioRef::Preset(name.to_owned()));
        }
        let scenario = Scenario::deserialize(value).map_err(D::Error::custom)?;
        Ok(ScenarioRef::Inline(Box::new(scenario)))
    }
}

impl Scenario {
    /// Parses an inline scenario or a preset reference and validates it.
    pub fn from_json_str(s: &str) -> Result<Self> {
        let r: ScenarioRef = serde_json::from_str(s)?;
        r.resolve()
    }

    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_json_string(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn validate(&self) -> Result<()> {
        self.simulator().map(|_| ())
    }

    /// Whether [`bayes_predict`] has a closed form for this scenario.
    pub fn has_closed_form(&self) -> bool {
        !matches!(self.kind, ScenarioKind::SelfMasking { .. })
    }

    fn simulator(&self) -> Result<Simulator<'_>> {
        let d = self.d;
        if d == 0 || d > crate::pattern::MAX_DIM {
            return Err(Error::InvalidScenario(format!("dimension {d} out of range")));
        }
        if self.beta.len() != d {
            return Err(Error::DimensionMismatch { expected: d, found: self.beta.len() });
        }
        if !self.beta0.is_finite() || self.beta.iter().any(|b| !b.is_finite()) {
            return Err(Error::NonFinite("regression coefficients"));
        }
        if !(self.sigma.is_finite() && self.sigma >= 0.0) {
            return Err(Error::InvalidScenario(format!("noise sd {} must be >= 0", self.sigma)));
        }
        let check_gaussian = |g: &GaussianParams| {
            if g.dim() != d {
                return Err(Error::DimensionMismatch { expected: d, found: g.dim() });
            }
            Ok(GaussianSampler::new(g))
        };
        let law = match &self.kind {
            ScenarioKind::McarGaussian { gaussian, missingness } => {
                missingness.validate()?;
                if missingness.dim() != d {
                    return Err(Error::DimensionMismatch { expected: d, found: missingness.dim() });
                }
                Law::Independent { sampler: check_gaussian(gaussian)?, missingness: missingness.clone() }
            }
            ScenarioKind::Merge { gaussian, merge } => {
                let missingness = PatternDistribution::Merge(merge.clone());
                missingness.validate()?;
                if merge.dim() != d {
                    return Err(Error::DimensionMismatch { expected: d, found: merge.dim() });
                }
                Law::Independent { sampler: check_gaussian(gaussian)?, missingness }
            }
            ScenarioKind::MarBlock { block, cov } => {
                let params = mar_block_params(d, *block, cov)?;
                Law::MarBlock { block: *block, sampler: GaussianSampler::new(&params) }
            }
            ScenarioKind::Gpmm { components } => {
                if components.is_empty() {
                    return Err(Error::InvalidScenario("GPMM needs a component".into()));
                }
                let mut cumulative = Vec::with_capacity(components.len());
                let mut total = 0.0;
                let mut samplers = Vec::with_capacity(components.len());
                for (k, c) in components.iter().enumerate() {
                    if !(c.p.is_finite() && c.p >= 0.0) {
                        return Err(Error::InvalidScenario(format!("component weight {}", c.p)));
                    }
                    if c.mask.dim() != d {
                        return Err(Error::DimensionMismatch { expected: d, found: c.mask.dim() });
                    }
                    if components[..k].iter().any(|o| o.mask == c.mask) {
                        return Err(Error::InvalidScenario(format!("duplicate GPMM pattern {}", c.mask)));
                    }
                    total += c.p;
                    cumulative.push(total);
                    samplers.push((c.mask, check_gaussian(&c.gaussian)?));
                }
                if (total - 1.0).abs() > WEIGHT_TOLERANCE {
                    return Err(Error::InvalidScenario(format!("GPMM weights sum to {total}")));
                }
                Law::Gpmm { cumulative, components: samplers }
            }
            ScenarioKind::SelfMasking { gaussian, centers, widths, peaks } => {
                for v in [centers, widths] {
                    if v.len() != d {
                        return Err(Error::DimensionMismatch { expected: d, found: v.len() });
                    }
                }
                if centers.iter().any(|c| !c.is_finite()) {
                    return Err(Error::NonFinite("self-masking centers"));
                }
                if widths.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
                    return Err(Error::InvalidScenario("self-masking widths must be > 0".into()));
                }
                let peaks = peaks.clone().unwrap_or_else(|| vec![DEFAULT_PEAK; d]);
                if peaks.len() != d {
                    return Err(Error::DimensionMismatch { expected: d, found: peaks.len() });
                }
                if peaks.iter().any(|k| !(0.0..=1.0).contains(k)) {
                    return Err(Error::InvalidScenario("self-masking peaks must lie in [0, 1]".into()));
                }
                Law::SelfMasking {
                    sampler: check_gaussian(gaussian)?,
                    centers: centers.clone(),
                    widths: widths.clone(),
                    peaks,
                }
            }
        };
        Ok(Simulator { scenario: self, law })
    }
}

fn mar_block_params(d: usize, block: usize, cov: &[Vec<f64>]) -> Result<GaussianParams> {
    if block == 0 || 2 * block != d {
        return Err(Error::InvalidScenario(format!(
            "MAR blocks must split d = {d} into two equal halves, got block = {block}"
        )));
    }
    if cov.len() != block {
        return Err(Error::DimensionMismatch { expected: block, found: cov.len() });
    }
    if let Some(row) = cov.iter().find(|r| r.len() != block) {
        return Err(Error::DimensionMismatch { expected: block, found: row.len() });
    }
    let cov = DMatrix::from_fn(block, block, |i, j| cov[i][j]);
    GaussianParams::new(DVector::zeros(block), cov)
}

/// Index drawn with probabilities given by the cumulative weights.
fn pick<R: Rng + ?Sized>(cumulative: &[f64], rng: &mut R) -> usize {
    let u = rng.gen::<f64>() * cumulative.last().expect("non-empty");
    cumulative.partition_point(|&c| c <= u).min(cumulative.len() - 1)
}

/// Sampling state derived from a validated scenario.
struct Simulator<'a> {
    scenario: &'a Scenario,
    law: Law,
}

enum Law {
    Independent { sampler: GaussianSampler, missingness: PatternDistribution },
    MarBlock { block: usize, sampler: GaussianSampler },
    Gpmm { cumulative: Vec<f64>, components: Vec<(MissingPattern, GaussianSampler)> },
    SelfMasking { sampler: GaussianSampler, centers: Vec<f64>, widths: Vec<f64>, peaks: Vec<f64> },
}

impl Simulator<'_> {
    /// Draws `X` into `x` and returns `M`.
    fn draw<R: Rng + ?Sized>(&self, rng: &mut R, x: &mut [f64]) -> MissingPattern {
        let d = self.scenario.d;
        match &self.law {
            Law::Independent { sampler, missingness } => {
                sampler.sample_into(rng, x);
                missingness.sample(rng)
            }
            Law::MarBlock { block, sampler } => {
                let (x1, x2) = x.split_at_mut(*block);
                let mut bits = 0u64;
                for (j, v) in x1.iter_mut().enumerate() {
                    *v = rng.sample(StandardNormal);
                    // A zero coordinate counts as "not greater than 0".
                    if *v > 0.0 {
                        bits |= 1 << (block + j);
                    }
                }
                sampler.sample_into(rng, x2);
                for (j, v) in x2.iter_mut().enumerate() {
                    if bits >> (block + j) & 1 == 1 {
                        *v += 1.0;
                    }
                }
                MissingPattern::new(bits, d).expect("bits within dimension")
            }
            Law::Gpmm { cumulative, components } => {
                let k = pick(cumulative, rng);
                let (m, sampler) = &components[k];
                sampler.sample_into(rng, x);
                *m
            }
            Law::SelfMasking { sampler, centers, widths, peaks } => {
                sampler.sample_into(rng, x);
                let mut bits = 0u64;
                for j in 0..d {
                    let z = (x[j] - centers[j]) / widths[j];
                    if rng.gen::<f64>() < peaks[j] * (-0.5 * z * z).exp() {
                        bits |= 1 << j;
                    }
                }
                MissingPattern::new(bits, d).expect("bits within dimension")
            }
        }
    }

    /// Like [`Self::draw`] but stops as soon as the pattern is known to
    /// differ from `m`; returns whether `M = m` (and `x` is then filled).
    fn draw_if<R: Rng + ?Sized>(&self, rng: &mut R, x: &mut [f64], m: MissingPattern) -> bool {
        match &self.law {
            Law::Independent { sampler, missingness } => {
                if missingness.sample(rng) != m {
                    return false;
                }
                sampler.sample_into(rng, x);
                true
            }
            Law::Gpmm { cumulative, components } => {
                let k = pick(cumulative, rng);
                let (mask, sampler) = &components[k];
                if *mask != m {
                    return false;
                }
                sampler.sample_into(rng, x);
                true
            }
            Law::MarBlock { .. } | Law::SelfMasking { .. } => self.draw(rng, x) == m,
        }
    }

    fn response<R: Rng + ?Sized>(&self, rng: &mut R, x: &[f64]) -> f64 {
        let s = self.scenario;
        let noise: f64 = rng.sample(StandardNormal);
        s.beta0 + s.beta.iter().zip(x).map(|(b, v)| b * v).sum::<f64>() + s.sigma * noise
    }
}

/// A generated training or test set.
#[derive(Clone, Debug)]
pub struct LabeledSample {
    pub dataset: MaskedDataset,
    /// Row-major `n x d` covariates before masking.
    pub full_values: Vec<f64>,
    /// `f*(Z_i)` when the scenario has a closed-form Bayes predictor.
    pub bayes_values: Option<Vec<f64>>,
}

impl LabeledSample {
    pub fn full_row(&self, i: usize) -> &[f64] {
        let d = self.dataset.dim();
        &self.full_values[i * d..(i + 1) * d]
    }
}

/// Mixes `parts` into `root` with SplitMix64 finalizers.
pub fn derive_seed(root: u64, parts: &[u64]) -> u64 {
    parts.iter().fold(splitmix64(root), |h, &p| splitmix64(h ^ splitmix64(p)))
}

/// FNV-1a of a label, stable across platforms and releases.
pub fn label_hash(label: &str) -> u64 {
    label.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| (h ^ b as u64).wrapping_mul(0x0100_0000_01b3))
}

fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Draws `n` labeled rows. Rows are produced in chunks of [`CHUNK_ROWS`],
/// each with its own seed derived from `(seed, chunk)`, so the output does
/// not depend on the number of threads.
pub fn generate(scenario: &Scenario, n: usize, seed: u64) -> Result<LabeledSample> {
    if n == 0 {
        return Err(Error::InvalidConfig("sample size must be >= 1".into()));
    }
    let sim = scenario.simulator()?;
    let d = scenario.d;
    let chunks: Vec<(Vec<f64>, Vec<MissingPattern>, Vec<f64>)> = (0..n.div_ceil(CHUNK_ROWS))
        .into_par_iter()
        .map(|c| {
            let rows = CHUNK_ROWS.min(n - c * CHUNK_ROWS);
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[c as u64]));
            let mut x = vec![0.0; rows * d];
            let mut masks = Vec::with_capacity(rows);
            let mut y = Vec::with_capacity(rows);
            for row in x.chunks_mut(d) {
                masks.push(sim.draw(&mut rng, row));
                y.push(sim.response(&mut rng, row));
            }
            (x, masks, y)
        })
        .collect();
    let mut full_values = Vec::with_capacity(n * d);
    let mut patterns = Vec::with_capacity(n);
    let mut responses = Vec::with_capacity(n);
    for (x, m, y) in chunks {
        full_values.extend(x);
        patterns.extend(m);
        responses.extend(y);
    }
    let dataset = MaskedDataset::new(d, full_values.clone(), patterns, responses)?;
    let bayes_values =
        if scenario.has_closed_form() { Some(BayesPredictor::new(scenario)?.predict_dataset(&dataset)?) } else { None };
    Ok(LabeledSample { dataset, full_values, bayes_values })
}

/// `f*_m(x_obs)`, computed by conditioning the relevant Gaussian directly.
pub fn bayes_predict(scenario: &Scenario, x_obs: &[f64], m: MissingPattern) -> Result<f64> {
    scenario.validate()?;
    let d = scenario.d;
    if m.dim() != d {
        return Err(Error::DimensionMismatch { expected: d, found: m.dim() });
    }
    if x_obs.len() != m.n_observed() {
        return Err(Error::DimensionMismatch { expected: m.n_observed(), found: x_obs.len() });
    }
    let observed = m.observed_indices();
    let beta = &scenario.beta;
    let linear = |x_full: &[f64]| scenario.beta0 + beta.iter().zip(x_full).map(|(b, v)| b * v).sum::<f64>();
    let fill = |params: &GaussianParams, obs: &[usize], x: &[f64]| -> Result<Vec<f64>> {
        let mis = crate::solver::conditional_gaussian(params, obs, x)?;
        Ok(merge_coordinates(params.dim(), obs, x, &mis))
    };
    match &scenario.kind {
        ScenarioKind::McarGaussian { gaussian, .. } | ScenarioKind::Merge { gaussian, .. } => {
            Ok(linear(&fill(gaussian, &observed, x_obs)?))
        }
        ScenarioKind::Gpmm { components } => {
            let c = components.iter().find(|c| c.mask == m && c.p > 0.0).ok_or(Error::ZeroProbability(m))?;
            Ok(linear(&fill(&c.gaussian, &observed, x_obs)?))
        }
        ScenarioKind::MarBlock { block, cov } => {
            let block = *block;
            if (0..block).any(|j| m.is_missing(j)) {
                return Err(Error::ZeroProbability(m));
            }
            let base = mar_block_params(d, block, cov)?;
            let shift = DVector::from_fn(block, |j, _| if m.is_missing(block + j) { 1.0 } else { 0.0 });
            let params = GaussianParams::new(shift, base.covariance().clone())?;
            let obs2: Vec<usize> = observed[block..].iter().map(|j| j - block).collect();
            let x2 = fill(&params, &obs2, &x_obs[block..])?;
            let full: Vec<f64> = x_obs[..block].iter().copied().chain(x2).collect();
            Ok(linear(&full))
        }
        ScenarioKind::SelfMasking { .. } => Err(Error::NoClosedForm("self-masking")),
    }
}

fn merge_coordinates(d: usize, observed: &[usize], x_obs: &[f64], x_mis: &[f64]) -> Vec<f64> {
    let mut full = vec![0.0; d];
    let mut obs = observed.iter().zip(x_obs).peekable();
    let mut mis = x_mis.iter();
    for (j, slot) in full.iter_mut().enumerate() {
        *slot = match obs.peek() {
            Some((&k, &v)) if k == j => {
                obs.next();
                v
            }
            _ => *mis.next().expect("missing coordinate"),
        };
    }
    full
}

/// `f*_m` as an affine map of `x_obs`:
/// `beta0 + beta_obs^T x + beta_mis^T (mu_mis + K (x - mu_obs))`.
fn gaussian_rule(params: &GaussianParams, m: MissingPattern, beta: &[f64], beta0: f64) -> Result<AffineModel> {
    let observed = m.observed_indices();
    let missing = m.missing_indices();
    let (gain, mu_mis, mu_obs) = params.conditioning_map(&observed, &missing);
    let beta_mis = DVector::from_iterator(missing.len(), missing.iter().map(|&j| beta[j]));
    let beta_obs = DVector::from_iterator(observed.len(), observed.iter().map(|&j| beta[j]));
    let intercept = beta0 + beta_mis.dot(&(mu_mis - &gain * mu_obs));
    let coefficients = beta_obs + gain.transpose() * beta_mis;
    AffineModel::new(intercept, coefficients.as_slice().to_vec())
}

/// The Bayes predictor as a [`Predictor`], with per-pattern affine rules
/// computed once and cached.
pub struct BayesPredictor {
    scenario: Scenario,
    rules: RwLock<HashMap<MissingPattern, AffineModel>>,
}

impl BayesPredictor {
    pub fn new(scenario: &Scenario) -> Result<Self> {
        scenario.validate()?;
        if !scenario.has_closed_form() {
            return Err(Error::NoClosedForm("self-masking"));
        }
        Ok(Self { scenario: scenario.clone(), rules: RwLock::new(HashMap::new()) })
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    /// The affine rule `x_obs -> f*_m(x_obs)`.
    pub fn rule(&self, m: MissingPattern) -> Result<AffineModel> {
        if let Some(rule) = self.rules.read().expect("rule cache poisoned").get(&m) {
            return Ok(rule.clone());
        }
        let rule = bayes_rule(&self.scenario, m)?;
        self.rules.write().expect("rule cache poisoned").insert(m, rule.clone());
        Ok(rule)
    }
}

impl Predictor for BayesPredictor {
    fn predict(&self, x_obs: &[f64], m: MissingPattern) -> Result<f64> {
        if x_obs.len() != m.n_observed() {
            return Err(Error::DimensionMismatch { expected: m.n_observed(), found: x_obs.len() });
        }
        Ok(self.rule(m)?.evaluate(x_obs))
    }
}

/// `f*_m` of a closed-form scenario as an affine map of `x_obs`.
pub fn bayes_rule(scenario: &Scenario, m: MissingPattern) -> Result<AffineModel> {
    let d = scenario.d;
    if m.dim() != d {
        return Err(Error::DimensionMismatch { expected: d, found: m.dim() });
    }
    let (beta, beta0) = (&scenario.beta, scenario.beta0);
    match &scenario.kind {
        ScenarioKind::McarGaussian { gaussian, .. } | ScenarioKind::Merge { gaussian, .. } => {
            gaussian_rule(gaussian, m, beta, beta0)
        }
        ScenarioKind::Gpmm { components } => {
            let c = components.iter().find(|c| c.mask == m && c.p > 0.0).ok_or(Error::ZeroProbability(m))?;
            gaussian_rule(&c.gaussian, m, beta, beta0)
        }
        ScenarioKind::MarBlock { block, cov } => {
            let block = *block;
            if (0..block).any(|j| m.is_missing(j)) {
                return Err(Error::ZeroProbability(m));
            }
            let base = mar_block_params(d, block, cov)?;
            let shift = DVector::from_fn(block, |j, _| if m.is_missing(block + j) { 1.0 } else { 0.0 });
            let params = GaussianParams::new(shift, base.covariance().clone())?;
            let m2 = MissingPattern::new(m.bits() >> block, block)?;
            let inner = gaussian_rule(&params, m2, &beta[block..], beta0)?;
            let coefficients = beta[..block].iter().chain(&inner.coefficients).copied().collect();
            AffineModel::new(inner.intercept, coefficients)
        }
        ScenarioKind::SelfMasking { .. } => Err(Error::NoClosedForm("self-masking")),
    }
}

/// Settings of the rejection oracle.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OracleSettings {
    /// Upper limit on joint draws.
    pub max_draws: usize,
    /// Stop once this many draws are accepted.
    pub target_accepted: usize,
    /// Half-width of the sup-norm window around `x_obs`.
    pub bandwidth: f64,
}

impl Default for OracleSettings {
    fn default() -> Self {
        Self { max_draws: 20_000_000, target_accepted: 400, bandwidth: 0.1 }
    }
}

/// Fewer accepted draws than this is an error.
pub const ORACLE_MIN_ACCEPTED: usize = 50;

/// Monte-Carlo estimate of `E[Y | X_obs within bandwidth of x_obs, M = m]`
/// by rejection from the joint law. Intended as a test oracle.
pub fn bayes_oracle_mc<R: Rng + ?Sized>(
    scenario: &Scenario,
    x_obs: &[f64],
    m: MissingPattern,
    settings: OracleSettings,
    rng: &mut R,
) -> Result<McEstimate> {
    let sim = scenario.simulator()?;
    let d = scenario.d;
    if m.dim() != d {
        return Err(Error::DimensionMismatch { expected: d, found: m.dim() });
    }
    if x_obs.len() != m.n_observed() {
        return Err(Error::DimensionMismatch { expected: m.n_observed(), found: x_obs.len() });
    }
    if !(settings.bandwidth > 0.0) {
        return Err(Error::InvalidConfig("oracle bandwidth must be > 0".into()));
    }
    let observed = m.observed_indices();
    let mut x = vec![0.0; d];
    let mut moments = RunningMoments::default();
    for _ in 0..settings.max_draws {
        if !sim.draw_if(rng, &mut x, m) {
            continue;
        }
        let close = observed.iter().zip(x_obs).all(|(&j, v)| (x[j] - v).abs() <= settings.bandwidth);
        if close {
            moments.push(sim.response(rng, &x));
            if moments.count() >= settings.target_accepted {
                break;
            }
        }
    }
    if moments.count() < ORACLE_MIN_ACCEPTED {
        return Err(Error::InsufficientSamples { accepted: moments.count(), required: ORACLE_MIN_ACCEPTED });
    }
    Ok(moments.estimate())
}

/// A named scenario or pattern distribution.
#[derive(Clone, Debug, PartialEq)]
pub enum Preset {
    Scenario(Scenario),
    Distribution(PatternDistribution),
}

pub fn preset(name: &str) -> Result<Preset> {
    match name {
        "bern_pA" | "bern_pB" | "bern_pC" | "bern_pD" => distribution_preset(name).map(Preset::Distribution),
        _ => scenario_preset(name).map(Preset::Scenario),
    }
}

/// Block-diagonal matrix of `d / 2` all-ones `2 x 2` blocks.
pub fn paired_ones(d: usize) -> DMatrix<f64> {
    DMatrix::from_fn(d, d, |i, j| if i / 2 == j / 2 { 1.0 } else { 0.0 })
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

pub fn scenario_preset(name: &str) -> Result<Scenario> {
    let d = 8;
    let beta = vec![1.0; d];
    let scenario = |sigma, kind| Scenario { name: name.to_owned(), d, beta0: 0.0, beta: beta.clone(), sigma, kind };
    let s = match name {
        "mcar_a" => scenario(
            0.1,
            ScenarioKind::McarGaussian {
                gaussian: GaussianParams::from_slices(&[1.0; 8], paired_ones(d))?,
                missingness: PatternDistribution::homogeneous(d, 0.1)?,
            },
        ),
        "mar_b" => scenario(0.5, ScenarioKind::MarBlock { block: 4, cov: rows(&paired_ones(4)) }),
        "gpmm_c" => {
            let u = paired_ones(d);
            let ones = DMatrix::from_element(d, d, 1.0);
            let eye = DMatrix::identity(d, d);
            let spec: [(f64, &str, [f64; 4], &DMatrix<f64>); 7] = [
                (0.6, "01010000", [0.0, 5.0, 4.0, -1.0], &u),
                (0.3, "10110000", [1.0, 3.0, 0.0, 2.0], &ones),
                (0.02, "01110000", [0.0, 5.0, 4.0, -1.0], &eye),
                (0.02, "11010000", [0.0, 5.0, 0.0, -1.0], &eye),
                (0.02, "11000000", [0.0, -10.0, 7.0, -1.0], &eye),
                (0.02, "01000000", [0.0, 9.0, 0.0, -1.0], &eye),
                (0.02, "00100000", [3.0, 0.0, 0.0, -1.0], &eye),
            ];
            let components = spec
                .iter()
                .map(|(p, mask, head, cov)| {
                    let mut mean = [0.0; 8];
                    mean[..4].copy_from_slice(head);
                    Ok(GpmmComponent {
                        p: *p,
                        mask: mask.parse()?,
                        gaussian: GaussianParams::from_slices(&mean, (*cov).clone())?,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            scenario(1.0, ScenarioKind::Gpmm { components })
        }
        _ => return Err(Error::UnknownPreset(name.to_owned())),
    };
    s.validate()?;
    Ok(s)
}

pub fn distribution_preset(name: &str) -> Result<PatternDistribution> {
    match name {
        "bern_pA" => PatternDistribution::homogeneous(4, 0.5),
        "bern_pB" => PatternDistribution::homogeneous(4, 0.15),
        "bern_pC" => PatternDistribution::heterogeneous(vec![0.3, 0.1, 0.05, 0.05]),
        "bern_pD" => PatternDistribution::homogeneous(4, 0.1),
        _ => Err(Error::UnknownPreset(name.to_owned())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pat(s: &str) -> MissingPattern {
        s.parse().unwrap()
    }

    fn noiseless_complete(d: usize) -> Scenario {
        Scenario {
            name: "toy".into(),
            d,
            beta0: 0.5,
            beta: (1..=d).map(|j| j as f64).collect(),
            sigma: 0.0,
            kind: ScenarioKind::McarGaussian {
                gaussian: GaussianParams::standard(d),
                missingness: PatternDistribution::homogeneous(d, 0.0).unwrap(),
            },
        }
    }

    #[test]
    fn noiseless_responses_are_exact() {
        let s = noiseless_complete(3);
        let sample = generate(&s, 50, 1).unwrap();
        for i in 0..50 {
            let x = sample.full_row(i);
            let y = 0.5 + x[0] + 2.0 * x[1] + 3.0 * x[2];
            assert!((sample.dataset.response(i) - y).abs() < 1e-12);
            assert_eq!(sample.dataset.pattern(i), pat("000"));
        }
    }

    #[test]
    fn generation_is_deterministic_across_chunks() {
        let s = scenario_preset("gpmm_c").unwrap();
        let a = generate(&s, CHUNK_ROWS + 17, 5).unwrap();
        let b = generate(&s, CHUNK_ROWS + 17, 5).unwrap();
        assert_eq!(a.full_values, b.full_values);
        assert_eq!(a.dataset.responses(), b.dataset.responses());
        let c = generate(&s, CHUNK_ROWS + 17, 6).unwrap();
        assert_ne!(a.full_values, c.full_values);
    }

    #[test]
    fn mar_block_mask_follows_first_block() {
        let s = scenario_preset("mar_b").unwrap();
        let sample = generate(&s, 500, 3).unwrap();
        for i in 0..500 {
            let x = sample.full_row(i);
            let m = sample.dataset.pattern(i);
            for j in 0..4 {
                assert!(!m.is_missing(j));
                assert_eq!(m.is_missing(4 + j), x[j] > 0.0);
            }
        }
    }

    #[test]
    fn bayes_rule_matches_direct_conditioning() {
        for name in ["mcar_a", "mar_b", "gpmm_c"] {
            let s = scenario_preset(name).unwrap();
            let sample = generate(&s, 300, 11).unwrap();
            let bayes = sample.bayes_values.as_ref().unwrap();
            for i in 0..300 {
                let m = sample.dataset.pattern(i);
                let direct = bayes_predict(&s, &sample.dataset.observed_values(i), m).unwrap();
                assert!((direct - bayes[i]).abs() < 1e-9, "{name} row {i}: {direct} vs {}", bayes[i]);
            }
        }
    }

    #[test]
    fn fully_observed_bayes_is_linear_part() {
        let s = scenario_preset("mcar_a").unwrap();
        let x = [0.3, -1.0, 2.0, 0.0, 1.0, 1.5, -0.5, 4.0];
        let value = bayes_predict(&s, &x, pat("00000000")).unwrap();
        assert!((value - x.iter().sum::<f64>()).abs() < 1e-12);
    }

    #[test]
    fn identity_covariance_fills_with_component_mean() {
        let s = scenario_preset("gpmm_c").unwrap();
        // m6 misses coordinate 1 only; its mean there is 9.
        let x = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7];
        let value = bayes_predict(&s, &x, pat("01000000")).unwrap();
        assert!((value - (x.iter().sum::<f64>() + 9.0)).abs() < 1e-12);
    }

    #[test]
    fn comonotone_component_shifts_missing_means() {
        let s = scenario_preset("gpmm_c").unwrap();
        // m2 = 10110000: observed coordinates 1, 4, 5, 6, 7; all move together.
        let shift = 0.7;
        let x_obs = [3.0 + shift, shift, shift, shift, shift];
        let missing_means = 1.0 + 0.0 + 2.0 + 3.0 * shift;
        let value = bayes_predict(&s, &x_obs, pat("10110000")).unwrap();
        assert!((value - (x_obs.iter().sum::<f64>() + missing_means)).abs() < 1e-9);
    }

    #[test]
    fn unseen_gpmm_pattern_is_rejected() {
        let s = scenario_preset("gpmm_c").unwrap();
        let err = bayes_predict(&s, &[0.0; 8], pat("00000000")).unwrap_err();
        assert!(matches!(err, Error::ZeroProbability(_)));
    }

    #[test]
    fn self_masking_has_no_closed_form() {
        let s = Scenario {
            name: "sm".into(),
            d: 2,
            beta0: 0.0,
            beta: vec![1.0, 1.0],
            sigma: 0.1,
            kind: ScenarioKind::SelfMasking {
                gaussian: GaussianParams::standard(2),
                centers: vec![0.0, 0.0],
                widths: vec![1.0, 1.0],
                peaks: None,
            },
        };
        assert!(matches!(bayes_predict(&s, &[0.0], pat("01")), Err(Error::NoClosedForm(_))));
        assert!(generate(&s, 10, 0).unwrap().bayes_values.is_none());
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let settings = OracleSettings { max_draws: 2_000_000, ..OracleSettings::default() };
        let est = bayes_oracle_mc(&s, &[0.2], pat("01"), settings, &mut rng).unwrap();
        assert!(est.estimate.is_finite() && est.std_error > 0.0);
    }

    #[test]
    fn presets_and_json() {
        assert_eq!(PRESET_NAMES.len(), 7);
        for name in PRESET_NAMES {
            assert!(preset(name).is_ok(), "{name}");
        }
        assert!(matches!(preset("nope"), Err(Error::UnknownPreset(_))));
        let s = Scenario::from_json_str(r#"{"preset": "gpmm_c"}"#).unwrap();
        let ScenarioKind::Gpmm { components } = &s.kind else { panic!("expected GPMM") };
        assert_eq!(components.len(), 7);
        let back = Scenario::from_json_str(&s.to_json_string().unwrap()).unwrap();
        assert_eq!(back, s);
        let bad = r#"{"kind": "mar_block", "d": 8, "beta0": 0, "beta": [1,1,1,1,1,1,1,1], "sigma": 1, "block": 3, "cov": []}"#;
        assert!(Scenario::from_json_str(bad).is_err());
    }

    #[test]
    fn seeds_are_stable() {
        assert_eq!(label_hash(""), 0xcbf2_9ce4_8422_2325);
        assert_ne!(derive_seed(1, &[2, 3]), derive_seed(1, &[3, 2]));
        assert_eq!(derive_seed(7, &[1]), derive_seed(7, &[1]));
    }
}
