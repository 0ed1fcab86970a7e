//! The missing-pattern complexity `C_p(tau) = sum_m min(p_m, tau)` and the
//! bounds that control it.
//!
//! Exact values come from grouping patterns into probability levels: a
//! homogeneous Bernoulli law has `d + 1` levels (by number of missing
//! coordinates), the uniform law a single one, and the remaining parametric
//! families are enumerated up to [`MAX_ENUMERATION_DIM`].

use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pattern::PatternDistribution;

/// Largest `d` for which `2^d` patterns are enumerated.
pub const MAX_ENUMERATION_DIM: usize = 20;

/// `count` patterns sharing probability `prob > 0`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Level {
    pub count: f64,
    pub prob: f64,
}

pub fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Positive-probability levels of `dist`.
pub fn levels(dist: &PatternDistribution) -> Result<Vec<Level>> {
    dist.validate()?;
    Ok(match dist {
        PatternDistribution::HomogeneousBernoulli { d, epsilon } => (0..=*d)
            .map(|k| Level {
                count: binomial(*d, k),
                prob: epsilon.powi(k as i32) * (1.0 - epsilon).powi((d - k) as i32),
            })
            .filter(|l| l.prob > 0.0)
            .collect(),
        PatternDistribution::Uniform { d } => {
            vec![Level { count: 2f64.powi(*d as i32), prob: 0.5f64.powi(*d as i32) }]
        }
        other => other.support(MAX_ENUMERATION_DIM)?.into_iter().map(|(_, prob)| Level { count: 1.0, prob }).collect(),
    })
}

fn check_tau(tau: f64) -> Result<()> {
    if !(tau > 0.0 && tau <= 1.0) {
        return Err(Error::InvalidConfig(format!("tau must lie in (0, 1], got {tau}")));
    }
    Ok(())
}

/// `C_p(tau)`.
pub fn cp(dist: &PatternDistribution, tau: f64) -> Result<f64> {
    check_tau(tau)?;
    Ok(cp_levels(&levels(dist)?, tau))
}

pub fn cp_levels(levels: &[Level], tau: f64) -> f64 {
    // Round-off in the masses can push the sum a few ulps past 1.
    levels.iter().map(|l| l.count * l.prob.min(tau)).sum::<f64>().min(1.0)
}

/// `C_p(tau)` through the subset characterisation: with
/// `B* = {m : p_m > tau}`, the value is `|B*| tau + P(M not in B*)`.
pub fn cp_via_subsets(dist: &PatternDistribution, tau: f64) -> Result<f64> {
    check_tau(tau)?;
    let levels = levels(dist)?;
    let frequent: f64 = levels.iter().filter(|l| l.prob > tau).map(|l| l.count).sum();
    let rare_mass: f64 = levels.iter().filter(|l| l.prob <= tau).map(|l| l.count * l.prob).sum();
    Ok(frequent * tau + rare_mass)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub estimate: f64,
    pub std_error: f64,
    pub samples: usize,
}

/// Running mean and variance (Welford).
#[derive(Clone, Copy, Debug, Default)]
pub struct RunningMoments {
    count: usize,
    mean: f64,
    m2: f64,
}

impl RunningMoments {
    pub fn push(&mut self, v: f64) {
        self.count += 1;
        let delta = v - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (v - self.mean);
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Merges another accumulator (Chan et al. pairwise update).
    pub fn merge(&mut self, other: &RunningMoments) {
        if other.count == 0 {
            return;
        }
        if self.count == 0 {
            *self = *other;
            return;
        }
        let total = (self.count + other.count) as f64;
        let delta = other.mean - self.mean;
        self.mean += delta * other.count as f64 / total;
        self.m2 += other.m2 + delta * delta * self.count as f64 * other.count as f64 / total;
        self.count += other.count;
    }

    pub fn estimate(&self) -> McEstimate {
        let n = self.count as f64;
        let var = if self.count > 1 { self.m2.max(0.0) / (n - 1.0) } else { 0.0 };
        McEstimate { estimate: self.mean, std_error: (var / n).sqrt(), samples: self.count }
    }
}

/// Monte-Carlo estimate of `C_p(tau) = E[min(1, tau / p_M)]`.
pub fn cp_monte_carlo<R: Rng + ?Sized>(
    dist: &PatternDistribution,
    tau: f64,
    samples: usize,
    rng: &mut R,
) -> Result<McEstimate> {
    check_tau(tau)?;
    dist.validate()?;
    if samples == 0 {
        return Err(Error::InvalidConfig("need at least one sample".into()));
    }
    let mut moments = RunningMoments::default();
    for _ in 0..samples {
        let m = dist.sample(rng);
        let p = dist.probability(m)?;
        if p <= 0.0 {
            return Err(Error::ZeroProbability(m));
        }
        moments.push((tau / p).min(1.0));
    }
    Ok(moments.estimate())
}

/// Entropy-type upper bounds on `C_p(tau)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "alpha", rename_all = "snake_case")]
pub enum EntropyBoundKind {
    Hartley,
    Shannon,
    Renyi(f64),
    Bertrand(f64),
}

impl EntropyBoundKind {
    fn alpha(self) -> Result<Option<f64>> {
        match self {
            Self::Renyi(a) | Self::Bertrand(a) if !(a > 0.0 && a < 1.0) => {
                Err(Error::InvalidConfig(format!("alpha must lie in (0, 1), got {a}")))
            }
            Self::Renyi(a) | Self::Bertrand(a) => Ok(Some(a)),
            _ => Ok(None),
        }
    }
}

impl fmt::Display for EntropyBoundKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Hartley => f.write_str("hartley"),
            Self::Shannon => f.write_str("shannon"),
            Self::Renyi(a) => write!(f, "renyi({a})"),
            Self::Bertrand(a) => write!(f, "bertrand({a})"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundEntry {
    pub value: f64,
    /// False when the bound's domain condition fails (Shannon and Bertrand
    /// need every `p_m <= 1/e` and `tau < 1/e`).
    pub valid: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub tau: f64,
    pub cp_exact: Option<f64>,
    pub bounds: Vec<(EntropyBoundKind, BoundEntry)>,
}

/// Shannon entropy `sum_m p_m ln(1 / p_m)` (natural log).
pub fn shannon_entropy(dist: &PatternDistribution) -> Result<f64> {
    Ok(levels(dist)?.iter().map(|l| -l.count * l.prob * l.prob.ln()).sum())
}

/// Rényi entropy `ln(sum_m p_m^alpha) / (1 - alpha)`.
pub fn renyi_entropy(dist: &PatternDistribution, alpha: f64) -> Result<f64> {
    EntropyBoundKind::Renyi(alpha).alpha()?;
    let s: f64 = levels(dist)?.iter().map(|l| l.count * l.prob.powf(alpha)).sum();
    Ok(s.ln() / (1.0 - alpha))
}

pub fn entropy_bound(dist: &PatternDistribution, tau: f64, kind: EntropyBoundKind) -> Result<BoundEntry> {
    check_tau(tau)?;
    let alpha = kind.alpha()?;
    Ok(entropy_bound_levels(&levels(dist)?, tau, kind, alpha))
}

fn entropy_bound_levels(levels: &[Level], tau: f64, kind: EntropyBoundKind, alpha: Option<f64>) -> BoundEntry {
    let inv_e = (-1.0f64).exp();
    let in_p_1e = levels.iter().all(|l| l.prob <= inv_e) && tau < inv_e;
    let log_inv_tau = -tau.ln();
    match kind {
        EntropyBoundKind::Hartley => {
            BoundEntry { value: levels.iter().map(|l| l.count).sum::<f64>() * tau, valid: true }
        }
        EntropyBoundKind::Shannon => {
            let ent: f64 = levels.iter().map(|l| -l.count * l.prob * l.prob.ln()).sum();
            BoundEntry { value: ent / log_inv_tau, valid: in_p_1e }
        }
        EntropyBoundKind::Renyi(_) => {
            let a = alpha.expect("checked");
            let s: f64 = levels.iter().map(|l| l.count * l.prob.powf(a)).sum();
            // (tau * exp(Ent_a))^(1 - a) = tau^(1 - a) * sum p^a
            BoundEntry { value: tau.powf(1.0 - a) * s, valid: true }
        }
        EntropyBoundKind::Bertrand(_) => {
            let a = alpha.expect("checked");
            let s: f64 = levels.iter().map(|l| l.count * (-l.prob * l.prob.ln()).powf(a)).sum();
            BoundEntry { value: tau.powf(1.0 - a) / log_inv_tau.powf(a) * s, valid: in_p_1e }
        }
    }
}

/// Exact `C_p(tau)` together with the requested entropy bounds.
pub fn bound_report(dist: &PatternDistribution, tau: f64, kinds: &[EntropyBoundKind]) -> Result<BoundReport> {
    check_tau(tau)?;
    let levels = levels(dist)?;
    let bounds = kinds
        .iter()
        .map(|&k| Ok((k, entropy_bound_levels(&levels, tau, k, k.alpha()?))))
        .collect::<Result<Vec<_>>>()?;
    Ok(BoundReport { tau, cp_exact: Some(cp_levels(&levels, tau)), bounds })
}

fn check_bound_args(d: usize, n: usize, rate: f64) -> Result<()> {
    if d == 0 || d > n {
        return Err(Error::InvalidConfig(format!("need 1 <= d <= n, got d = {d}, n = {n}")));
    }
    if !(rate > 0.0 && rate < 1.0) {
        return Err(Error::InvalidConfig(format!("missing rate must lie strictly inside (0, 1), got {rate}")));
    }
    Ok(())
}

/// Hidden dimension `s = 1 ∨ ⌊ln(n/d) / ln(1/rate)⌋ ∧ d`.
pub fn hidden_dimension(d: usize, n: usize, rate: f64) -> Result<usize> {
    check_bound_args(d, n, rate)?;
    let ratio = (n as f64 / d as f64).ln() / (1.0 / rate).ln();
    // Exact ratios such as ln(1000)/ln(10) land one ulp below the integer.
    let s = (ratio + 1e-9).floor() as usize;
    Ok(s.clamp(1, d))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BernoulliBound {
    /// Hidden dimension `s_eps(d/n)`.
    pub s: usize,
    /// `min_{s in [d]} (d/n + eps^s) (e d / s)^s`.
    pub infimum: f64,
    /// `(e d / s)^s d / n` at the hidden dimension.
    pub plug_in: f64,
}

fn plug_in(d: usize, n: usize, s: usize) -> f64 {
    let e = std::f64::consts::E;
    (e * d as f64 / s as f64).powi(s as i32) * d as f64 / n as f64
}

/// Bounds on `C_p(d/n)` for a homogeneous Bernoulli law with rate `epsilon`.
pub fn bernoulli_cp_bound(d: usize, n: usize, epsilon: f64) -> Result<BernoulliBound> {
    let s = hidden_dimension(d, n, epsilon)?;
    let e = std::f64::consts::E;
    let tau = d as f64 / n as f64;
    let infimum = (1..=d)
        .map(|k| (tau + epsilon.powi(k as i32)) * (e * d as f64 / k as f64).powi(k as i32))
        .fold(f64::INFINITY, f64::min);
    Ok(BernoulliBound { s, infimum, plug_in: plug_in(d, n, s) })
}

/// `(e d / s_eta)^{s_eta} h d / n` for the database-merge model with `h`
/// protocols and failure rate `eta`.
pub fn merge_model_bound(d: usize, n: usize, h: usize, eta: f64) -> Result<f64> {
    if h == 0 {
        return Err(Error::InvalidConfig("need at least one protocol".into()));
    }
    let s = hidden_dimension(d, n, eta)?;
    Ok(plug_in(d, n, s) * h as f64)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HeterogeneousBound {
    pub mean_rate: f64,
    pub s: usize,
    pub bound: f64,
    /// Whether `s >= mean_rate * d`, the condition under which the bound holds.
    pub condition_holds: bool,
}

/// The homogeneous plug-in bound evaluated at the mean missing rate.
pub fn heterogeneous_cp_bound(epsilons: &[f64], n: usize) -> Result<HeterogeneousBound> {
    let d = epsilons.len();
    if d == 0 {
        return Err(Error::InvalidConfig("empty rate vector".into()));
    }
    let mean_rate = epsilons.iter().sum::<f64>() / d as f64;
    let s = hidden_dimension(d, n, mean_rate)?;
    Ok(HeterogeneousBound { mean_rate, s, bound: plug_in(d, n, s), condition_holds: s as f64 >= mean_rate * d as f64 })
}

/// `E[1/(1+B)]` (closed form) and `E[1{B>0}/B]` (exact sum) for
/// `B ~ Binomial(n, p)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BinomialInverseMoments {
    pub inv_one_plus: f64,
    pub inv_positive: f64,
}

pub fn binomial_inverse_moments(n: usize, p: f64) -> BinomialInverseMoments {
    // E[1/(1+B)] = (1 - (1-p)^(n+1)) / (p(n+1)); summing the series instead
    // loses the upper bound to rounding when (1-p)^(n+1) is below an ulp.
    let n1 = (n + 1) as f64;
    if p == 0.0 {
        return BinomialInverseMoments { inv_one_plus: 1.0, inv_positive: 0.0 };
    }
    let inv_one_plus = -(n1 * (-p).ln_1p()).exp_m1() / (p * n1);
    let inv_positive =
        (1..=n).map(|k| binomial(n, k) * p.powi(k as i32) * (1.0 - p).powi((n - k) as i32) / k as f64).sum();
    BinomialInverseMoments { inv_one_plus, inv_positive }
}

/// Checks `1/(1+np) <= E[1/(1+B)] <= 1/(p(n+1))` and
/// `E[1{B>0}/B] <= 2/(p(n+1))`.
pub fn binomial_inverse_bounds_check(n: usize, p: f64) -> bool {
    let m = binomial_inverse_moments(n, p);
    let n1 = (n + 1) as f64;
    1.0 / (1.0 + n as f64 * p) <= m.inv_one_plus && m.inv_one_plus <= 1.0 / (p * n1) && m.inv_positive <= 2.0 / (p * n1)
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::pattern::{ExplicitDistribution, MissingPattern};

    fn point_mass() -> PatternDistribution {
        ExplicitDistribution::new(3, [("010".parse().unwrap(), 1.0)]).unwrap().into()
    }

    fn brute_force(dist: &PatternDistribution, tau: f64) -> f64 {
        MissingPattern::all(dist.dim()).map(|m| dist.probability(m).unwrap().min(tau)).sum()
    }

    #[test]
    fn uniform_identity() {
        for d in 1..=10 {
            let dist = PatternDistribution::uniform(d).unwrap();
            // 2^d / n once tau = 1/n drops below every atom, 1 before that.
            for n in [1usize, 3, 1 << (d - 1), 1 << d, 3 << d, 1 << (d + 4)] {
                let value = cp(&dist, 1.0 / n as f64).unwrap();
                let expected = ((1u64 << d) as f64 / n as f64).min(1.0);
                assert_eq!(value, expected, "d = {d}, n = {n}");
            }
        }
    }

    #[test]
    fn point_mass_cases() {
        for tau in [0.01, 0.3, 1.0] {
            assert_eq!(cp(&point_mass(), tau).unwrap(), tau);
        }
        assert_eq!(cp_via_subsets(&point_mass(), 0.3).unwrap(), 0.3);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mc = cp_monte_carlo(&point_mass(), 0.3, 1000, &mut rng).unwrap();
        assert_eq!(mc.estimate, 0.3);
        assert_eq!(mc.std_error, 0.0);
    }

    #[test]
    fn all_mass_below_tau() {
        let dist = PatternDistribution::uniform(3).unwrap();
        assert_eq!(cp_via_subsets(&dist, 0.2).unwrap(), 1.0);
        assert_eq!(cp(&dist, 0.2).unwrap(), 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(cp_monte_carlo(&dist, 1.0, 100, &mut rng).unwrap().estimate, 1.0);
    }

    #[test]
    fn grouped_homogeneous_matches_enumeration() {
        let dist = PatternDistribution::homogeneous(4, 0.15).unwrap();
        let grouped = cp(&dist, 0.1).unwrap();
        let hetero = PatternDistribution::heterogeneous(vec![0.15; 4]).unwrap();
        assert!((grouped - brute_force(&dist, 0.1)).abs() < 1e-12);
        assert!((grouped - cp(&hetero, 0.1).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn tau_domain() {
        let dist = PatternDistribution::uniform(2).unwrap();
        assert!(cp(&dist, 0.0).is_err());
        assert!(cp(&dist, 1.5).is_err());
        assert!(cp(&dist, f64::NAN).is_err());
    }

    #[test]
    fn enumeration_cutoff() {
        let dist = PatternDistribution::heterogeneous(vec![0.1; 21]).unwrap();
        assert!(matches!(cp(&dist, 0.01), Err(Error::EnumerationTooLarge { dim: 21, .. })));
        // Grouped families have no cutoff.
        assert!(cp(&PatternDistribution::homogeneous(40, 0.1).unwrap(), 0.01).is_ok());
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(cp_monte_carlo(&dist, 0.01, 100, &mut rng).is_ok());
    }

    #[test]
    fn entropy_bounds_on_uniform() {
        let dist = PatternDistribution::uniform(4).unwrap();
        let hartley = entropy_bound(&dist, 0.01, EntropyBoundKind::Hartley).unwrap();
        assert_eq!(hartley.value, 16.0 * 0.01);
        let shannon = entropy_bound(&dist, 0.01, EntropyBoundKind::Shannon).unwrap();
        assert!((shannon.value - 16f64.ln() / 100f64.ln()).abs() < 1e-15);
        assert!(shannon.valid);
        assert!(entropy_bound(&dist, 0.01, EntropyBoundKind::Renyi(1.0)).is_err());
        assert!(entropy_bound(&dist, 0.01, EntropyBoundKind::Bertrand(0.0)).is_err());
    }

    #[test]
    fn shannon_flagged_outside_domain() {
        let dist = PatternDistribution::homogeneous(2, 0.1).unwrap();
        // p_00 = 0.81 > 1/e
        assert!(!entropy_bound(&dist, 0.01, EntropyBoundKind::Shannon).unwrap().valid);
        let uniform = PatternDistribution::uniform(3).unwrap();
        assert!(!entropy_bound(&uniform, 0.5, EntropyBoundKind::Bertrand(0.5)).unwrap().valid);
        assert!(entropy_bound(&uniform, 0.5, EntropyBoundKind::Renyi(0.5)).unwrap().valid);
    }

    #[test]
    fn renyi_bound_matches_entropy_form() {
        let dist = PatternDistribution::heterogeneous(vec![0.3, 0.1, 0.05]).unwrap();
        let (tau, alpha) = (0.02, 0.4);
        let ent = renyi_entropy(&dist, alpha).unwrap();
        let direct = (tau * ent.exp()).powf(1.0 - alpha);
        let bound = entropy_bound(&dist, tau, EntropyBoundKind::Renyi(alpha)).unwrap();
        assert!((bound.value - direct).abs() < 1e-12);
    }

    #[test]
    fn hidden_dimension_cases() {
        assert_eq!(hidden_dimension(8, 800, 0.1).unwrap(), 2);
        assert_eq!(hidden_dimension(4, 400, 0.01).unwrap(), 1);
        assert_eq!(hidden_dimension(2, 2000, 0.1).unwrap(), 2);
        assert_eq!(hidden_dimension(5, 5000, 0.1).unwrap(), 3);
        assert_eq!(hidden_dimension(3, 3_000_000, 0.1).unwrap(), 3);
        assert_eq!(hidden_dimension(5, 5, 0.5).unwrap(), 1);
        assert!(hidden_dimension(4, 400, 0.0).is_err());
        assert!(hidden_dimension(4, 400, 1.0).is_err());
        assert!(hidden_dimension(5, 4, 0.5).is_err());
    }

    #[test]
    fn plug_in_at_small_rate() {
        let b = bernoulli_cp_bound(4, 400, 0.01).unwrap();
        assert_eq!(b.s, 1);
        let expected = std::f64::consts::E * 16.0 / 400.0;
        assert!((b.plug_in - expected).abs() < 1e-12);
    }

    #[test]
    fn lemma_bound_dominates_exact() {
        let b = bernoulli_cp_bound(10, 1000, 0.3).unwrap();
        let exact = cp(&PatternDistribution::homogeneous(10, 0.3).unwrap(), 0.01).unwrap();
        assert!(b.infimum >= exact);
    }

    #[test]
    fn merge_bound_single_trivial_protocol() {
        let b = bernoulli_cp_bound(8, 800, 0.05).unwrap();
        assert_eq!(merge_model_bound(8, 800, 1, 0.05).unwrap(), b.plug_in);
        assert!(merge_model_bound(8, 800, 0, 0.05).is_err());
    }

    #[test]
    fn heterogeneous_condition_flag() {
        let b = heterogeneous_cp_bound(&[0.3, 0.1, 0.05, 0.05], 400).unwrap();
        assert!((b.mean_rate - 0.125).abs() < 1e-15);
        assert_eq!(b.s, hidden_dimension(4, 400, 0.125).unwrap());
        assert_eq!(b.condition_holds, b.s as f64 >= 0.5);
        let crowded = heterogeneous_cp_bound(&[0.9; 6], 12).unwrap();
        assert_eq!(crowded.s, 6);
        assert!(crowded.condition_holds);
        let starved = heterogeneous_cp_bound(&[0.6; 10], 20).unwrap();
        assert_eq!(starved.s, 1);
        assert!(!starved.condition_holds);
    }

    #[test]
    fn binomial_single_trial() {
        let m = binomial_inverse_moments(1, 0.5);
        assert!((m.inv_one_plus - 0.75).abs() < 1e-15);
        assert!((m.inv_positive - 0.5).abs() < 1e-15);
        assert!(binomial_inverse_bounds_check(1, 0.5));
        assert!(binomial_inverse_bounds_check(10, 0.3));
        assert!(binomial_inverse_bounds_check(30, 0.9));
    }

    #[test]
    fn binomial_closed_form_matches_series() {
        for n in [1usize, 5, 30] {
            for p in [0.05f64, 0.5, 0.95] {
                let series: f64 = (0..=n)
                    .map(|k| binomial(n, k) * p.powi(k as i32) * (1.0 - p).powi((n - k) as i32) / (k + 1) as f64)
                    .sum();
                let m = binomial_inverse_moments(n, p);
                assert!((m.inv_one_plus - series).abs() < 1e-13, "n = {n}, p = {p}");
            }
        }
    }

    #[test]
    fn binomial_coefficients() {
        assert_eq!(binomial(10, 3), 120.0);
        assert_eq!(binomial(4, 0), 1.0);
        assert_eq!(binomial(4, 5), 0.0);
        assert_eq!(binomial(20, 10), 184_756.0);
    }
}
