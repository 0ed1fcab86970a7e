//! Missing-value patterns and probability laws over them.
//!
//! A pattern is a `d`-bit mask stored in a `u64`: bit `j` set means
//! coordinate `j` (zero based) is missing. In text form the mask is a
//! `d`-character `0`/`1` string whose leftmost character is coordinate 0.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Largest supported dimension.
pub const MAX_DIM: usize = 63;

/// Tolerance on the total mass of an explicit distribution.
pub const MASS_TOLERANCE: f64 = 1e-12;

#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MissingPattern {
    bits: u64,
    dim: u8,
}

impl MissingPattern {
    pub fn new(bits: u64, dim: usize) -> Result<Self> {
        if dim == 0 || dim > MAX_DIM {
            return Err(Error::InvalidPattern(format!("dimension must be in 1..={MAX_DIM}, got {dim}")));
        }
        if bits >> dim != 0 {
            return Err(Error::InvalidPattern(format!("bits {bits:#x} exceed dimension {dim}")));
        }
        Ok(Self { bits, dim: dim as u8 })
    }

    /// The fully observed pattern.
    pub fn observed(dim: usize) -> Result<Self> {
        Self::new(0, dim)
    }

    /// The pattern with every coordinate missing.
    pub fn fully_missing(dim: usize) -> Result<Self> {
        Self::new(low_bits(dim), dim)
    }

    pub fn from_missing_flags(flags: &[bool]) -> Result<Self> {
        let bits = flags.iter().enumerate().filter(|(_, &f)| f).fold(0u64, |acc, (j, _)| acc | (1 << j));
        Self::new(bits, flags.len())
    }

    pub fn from_missing_indices(indices: &[usize], dim: usize) -> Result<Self> {
        let mut bits = 0u64;
        for &j in indices {
            if j >= dim {
                return Err(Error::InvalidPattern(format!("index {j} out of range for dimension {dim}")));
            }
            bits |= 1 << j;
        }
        Self::new(bits, dim)
    }

    pub fn bits(self) -> u64 {
        self.bits
    }

    pub fn dim(self) -> usize {
        self.dim as usize
    }

    pub fn is_missing(self, j: usize) -> bool {
        debug_assert!(j < self.dim());
        self.bits >> j & 1 == 1
    }

    pub fn n_missing(self) -> usize {
        self.bits.count_ones() as usize
    }

    pub fn n_observed(self) -> usize {
        self.dim() - self.n_missing()
    }

    /// `obs(m)` in ascending order.
    pub fn observed_indices(self) -> Vec<usize> {
        (0..self.dim()).filter(|&j| !self.is_missing(j)).collect()
    }

    /// `mis(m)` in ascending order.
    pub fn missing_indices(self) -> Vec<usize> {
        (0..self.dim()).filter(|&j| self.is_missing(j)).collect()
    }

    /// True when every coordinate missing in `other` is also missing here.
    pub fn covers(self, other: MissingPattern) -> bool {
        self.dim == other.dim && self.bits & other.bits == other.bits
    }

    /// Concatenation: `self` on coordinates `0..d1`, `other` after it.
    pub fn concat(self, other: MissingPattern) -> Result<Self> {
        Self::new(self.bits | other.bits << self.dim, self.dim() + other.dim())
    }

    /// Every pattern of dimension `dim`, in increasing bit order.
    pub fn all(dim: usize) -> impl Iterator<Item = MissingPattern> {
        assert!((1..=MAX_DIM).contains(&dim));
        (0..=low_bits(dim)).map(move |bits| MissingPattern { bits, dim: dim as u8 })
    }
}

fn low_bits(dim: usize) -> u64 {
    if dim >= 64 {
        u64::MAX
    } else {
        (1u64 << dim) - 1
    }
}

impl fmt::Display for MissingPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for j in 0..self.dim() {
            f.write_str(if self.is_missing(j) { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl fmt::Debug for MissingPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "MissingPattern({self})")
    }
}

impl FromStr for MissingPattern {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let flags = s
            .chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(Error::InvalidPattern(format!("unexpected character {other:?} in mask {s:?}"))),
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_missing_flags(&flags)
    }
}

impl Serialize for MissingPattern {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for MissingPattern {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Finite-support distribution, stored sparsely and sorted by pattern bits.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ExplicitRepr", into = "ExplicitRepr")]
pub struct ExplicitDistribution {
    dim: usize,
    patterns: Vec<MissingPattern>,
    probs: Vec<f64>,
    cumulative: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct ExplicitRepr {
    d: usize,
    patterns: Vec<ExplicitEntry>,
}

#[derive(Serialize, Deserialize)]
struct ExplicitEntry {
    mask: MissingPattern,
    p: f64,
}

impl TryFrom<ExplicitRepr> for ExplicitDistribution {
    type Error = Error;

    fn try_from(repr: ExplicitRepr) -> Result<Self> {
        let entries = repr.patterns.into_iter().map(|e| (e.mask, e.p));
        ExplicitDistribution::new(repr.d, entries)
    }
}

impl From<ExplicitDistribution> for ExplicitRepr {
    fn from(dist: ExplicitDistribution) -> Self {
        ExplicitRepr { d: dist.dim, patterns: dist.iter().map(|(mask, p)| ExplicitEntry { mask, p }).collect() }
    }
}

impl ExplicitDistribution {
    /// Zero-probability entries are dropped; duplicates are rejected.
    pub fn new(dim: usize, entries: impl IntoIterator<Item = (MissingPattern, f64)>) -> Result<Self> {
        if dim == 0 || dim > MAX_DIM {
            return Err(Error::InvalidDistribution(format!("bad dimension {dim}")));
        }
        let mut support: Vec<(MissingPattern, f64)> = Vec::new();
        for (m, p) in entries {
            if m.dim() != dim {
                return Err(Error::DimensionMismatch { expected: dim, found: m.dim() });
            }
            if !p.is_finite() || p < 0.0 {
                return Err(Error::InvalidDistribution(format!("probability of {m} is {p}")));
            }
            if p > 0.0 {
                support.push((m, p));
            }
        }
        support.sort_by_key(|&(m, _)| m);
        if support.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::InvalidDistribution("duplicate mask".into()));
        }
        let total: f64 = support.iter().map(|&(_, p)| p).sum();
        if (total - 1.0).abs() > MASS_TOLERANCE {
            return Err(Error::InvalidDistribution(format!("probabilities sum to {total}")));
        }
        let mut acc = 0.0;
        let cumulative = support
            .iter()
            .map(|&(_, p)| {
                acc += p;
                acc
            })
            .collect();
        let (patterns, probs) = support.into_iter().unzip();
        Ok(Self { dim, patterns, probs, cumulative })
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn support_len(&self) -> usize {
        self.patterns.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = (MissingPattern, f64)> + '_ {
        self.patterns.iter().copied().zip(self.probs.iter().copied())
    }

    pub fn probability(&self, m: MissingPattern) -> f64 {
        match self.patterns.binary_search(&m) {
            Ok(i) => self.probs[i],
            Err(_) => 0.0,
        }
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> MissingPattern {
        // Scale by the stored total so round-off never walks past the end.
        let total = *self.cumulative.last().expect("non-empty support");
        let u = rng.gen::<f64>() * total;
        let i = self.cumulative.partition_point(|&c| c <= u);
        self.patterns[i.min(self.patterns.len() - 1)]
    }
}

/// Database-merge missingness: a protocol pattern chosen with the given
/// weights, unioned with independent per-coordinate failures of rate `eta`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MergeModel {
    pub protocols: Vec<MissingPattern>,
    pub weights: Vec<f64>,
    pub eta: f64,
}

impl MergeModel {
    pub fn new(protocols: Vec<MissingPattern>, weights: Vec<f64>, eta: f64) -> Result<Self> {
        let model = Self { protocols, weights, eta };
        model.validate()?;
        Ok(model)
    }

    /// Equal weights over the protocols.
    pub fn uniform(protocols: Vec<MissingPattern>, eta: f64) -> Result<Self> {
        let h = protocols.len().max(1);
        Self::new(protocols, vec![1.0 / h as f64; h], eta)
    }

    pub fn dim(&self) -> usize {
        self.protocols.first().map_or(0, |p| p.dim())
    }

    pub fn n_protocols(&self) -> usize {
        self.protocols.len()
    }

    /// Average fraction of missing coordinates.
    pub fn missing_fraction(&self) -> f64 {
        let d = self.dim() as f64;
        self.protocols
            .iter()
            .zip(&self.weights)
            .map(|(p, w)| {
                let systematic = p.n_missing() as f64 / d;
                w * (systematic + (1.0 - systematic) * self.eta)
            })
            .sum()
    }

    fn validate(&self) -> Result<()> {
        if self.protocols.is_empty() {
            return Err(Error::InvalidDistribution("merge model needs a protocol".into()));
        }
        if self.protocols.len() != self.weights.len() {
            return Err(Error::DimensionMismatch { expected: self.protocols.len(), found: self.weights.len() });
        }
        let d = self.dim();
        if let Some(p) = self.protocols.iter().find(|p| p.dim() != d) {
            return Err(Error::DimensionMismatch { expected: d, found: p.dim() });
        }
        check_unit("eta", self.eta)?;
        if self.weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::InvalidDistribution("negative protocol weight".into()));
        }
        let total: f64 = self.weights.iter().sum();
        if (total - 1.0).abs() > MASS_TOLERANCE {
            return Err(Error::InvalidDistribution(format!("protocol weights sum to {total}")));
        }
        Ok(())
    }

    fn probability(&self, m: MissingPattern) -> f64 {
        let d = self.dim();
        self.protocols
            .iter()
            .zip(&self.weights)
            .filter(|(p, _)| m.covers(**p))
            .map(|(p, w)| {
                // Coordinates outside the protocol follow Bernoulli(eta).
                let free = d - p.n_missing();
                let failed = (m.bits() & !p.bits()).count_ones() as i32;
                w * self.eta.powi(failed) * (1.0 - self.eta).powi(free as i32 - failed)
            })
            .sum()
    }
}

fn check_unit(name: &str, value: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&value) {
        return Err(Error::InvalidDistribution(format!("{name} must lie in [0, 1], got {value}")));
    }
    Ok(())
}

/// Probability law over `{0,1}^d`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum PatternDistribution {
    Explicit(ExplicitDistribution),
    HomogeneousBernoulli { d: usize, epsilon: f64 },
    HeterogeneousBernoulli { epsilons: Vec<f64> },
    Merge(MergeModel),
    Uniform { d: usize },
}

impl PatternDistribution {
    pub fn homogeneous(d: usize, epsilon: f64) -> Result<Self> {
        let dist = Self::HomogeneousBernoulli { d, epsilon };
        dist.validate()?;
        Ok(dist)
    }

    pub fn heterogeneous(epsilons: Vec<f64>) -> Result<Self> {
        let dist = Self::HeterogeneousBernoulli { epsilons };
        dist.validate()?;
        Ok(dist)
    }

    pub fn uniform(d: usize) -> Result<Self> {
        let dist = Self::Uniform { d };
        dist.validate()?;
        Ok(dist)
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.dim();
        if d == 0 || d > MAX_DIM {
            return Err(Error::InvalidDistribution(format!("bad dimension {d}")));
        }
        match self {
            Self::HomogeneousBernoulli { epsilon, .. } => check_unit("epsilon", *epsilon),
            Self::HeterogeneousBernoulli { epsilons } => epsilons.iter().try_for_each(|&e| check_unit("epsilon", e)),
            Self::Merge(model) => model.validate(),
            Self::Explicit(_) | Self::Uniform { .. } => Ok(()),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::Explicit(e) => e.dim(),
            Self::HomogeneousBernoulli { d, .. } | Self::Uniform { d } => *d,
            Self::HeterogeneousBernoulli { epsilons } => epsilons.len(),
            Self::Merge(model) => model.dim(),
        }
    }

    /// Per-coordinate missing probabilities for the Bernoulli families.
    pub fn bernoulli_rates(&self) -> Option<Vec<f64>> {
        match self {
            Self::HomogeneousBernoulli { d, epsilon } => Some(vec![*epsilon; *d]),
            Self::HeterogeneousBernoulli { epsilons } => Some(epsilons.clone()),
            Self::Uniform { d } => Some(vec![0.5; *d]),
            _ => None,
        }
    }

    /// `P(M = m)`.
    pub fn probability(&self, m: MissingPattern) -> Result<f64> {
        if m.dim() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: m.dim() });
        }
        Ok(match self {
            Self::Explicit(e) => e.probability(m),
            Self::HomogeneousBernoulli { d, epsilon } => {
                let k = m.n_missing() as i32;
                epsilon.powi(k) * (1.0 - epsilon).powi(*d as i32 - k)
            }
            Self::HeterogeneousBernoulli { epsilons } => {
                epsilons.iter().enumerate().map(|(j, &e)| if m.is_missing(j) { e } else { 1.0 - e }).product()
            }
            Self::Merge(model) => model.probability(m),
            Self::Uniform { d } => 0.5f64.powi(*d as i32),
        })
    }

    /// Draws one pattern. Assumes the distribution is valid.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> MissingPattern {
        let d = self.dim();
        let bernoulli = |rng: &mut R, rate: &dyn Fn(usize) -> f64| {
            (0..d).fold(0u64, |acc, j| if rng.gen::<f64>() < rate(j) { acc | 1 << j } else { acc })
        };
        let bits = match self {
            Self::Explicit(e) => return e.sample(rng),
            Self::HomogeneousBernoulli { epsilon, .. } => bernoulli(rng, &|_| *epsilon),
            Self::HeterogeneousBernoulli { epsilons } => bernoulli(rng, &|j| epsilons[j]),
            Self::Merge(model) => {
                let u = rng.gen::<f64>();
                let mut acc = 0.0;
                let mut chosen = model.protocols.len() - 1;
                for (k, w) in model.weights.iter().enumerate() {
                    acc += w;
                    if u < acc {
                        chosen = k;
                        break;
                    }
                }
                model.protocols[chosen].bits() | bernoulli(rng, &|_| model.eta)
            }
            Self::Uniform { .. } => rng.gen::<u64>() & low_bits(d),
        };
        MissingPattern { bits, dim: d as u8 }
    }

    /// Every pattern with positive probability, in increasing bit order.
    /// Parametric families are enumerated, so `dim <= max_dim` is required.
    pub fn support(&self, max_dim: usize) -> Result<Vec<(MissingPattern, f64)>> {
        if let Self::Explicit(e) = self {
            return Ok(e.iter().collect());
        }
        let d = self.dim();
        if d > max_dim {
            return Err(Error::EnumerationTooLarge { dim: d, max: max_dim });
        }
        MissingPattern::all(d)
            .map(|m| Ok((m, self.probability(m)?)))
            .filter(|r| !matches!(r, Ok((_, p)) if *p <= 0.0))
            .collect()
    }
}

impl From<ExplicitDistribution> for PatternDistribution {
    fn from(e: ExplicitDistribution) -> Self {
        Self::Explicit(e)
    }
}

impl From<MergeModel> for PatternDistribution {
    fn from(m: MergeModel) -> Self {
        Self::Merge(m)
    }
}

/// Product law on `d1 + d2` coordinates of two explicit distributions.
pub fn tensor_product(left: &ExplicitDistribution, right: &ExplicitDistribution) -> Result<ExplicitDistribution> {
    let mut entries = Vec::with_capacity(left.support_len() * right.support_len());
    for (a, pa) in left.iter() {
        for (b, pb) in right.iter() {
            entries.push((a.concat(b)?, pa * pb));
        }
    }
    // Products of exactly normalised factors can drift by a few ulps.
    let total: f64 = entries.iter().map(|e| e.1).sum();
    ExplicitDistribution::new(left.dim() + right.dim(), entries.into_iter().map(|(m, p)| (m, p / total)))
}
