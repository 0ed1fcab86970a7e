//! Exact `C_p(tau)` for a heterogeneous Bernoulli law next to its Hartley,
//! Shannon, Renyi and Bertrand upper bounds.
//!
//! cargo run --example entropy_bounds

use patternlab::complexity::{bound_report, cp_monte_carlo, shannon_entropy, EntropyBoundKind};
use patternlab::PatternDistribution;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> patternlab::Result<()> {
    let rates: Vec<f64> = (0..10).map(|j| 0.05 + 0.04 * j as f64).collect();
    let dist = PatternDistribution::heterogeneous(rates)?;
    println!("Shannon entropy: {:.4} nats", shannon_entropy(&dist)?);

    let kinds = [
        EntropyBoundKind::Hartley,
        EntropyBoundKind::Shannon,
        EntropyBoundKind::Renyi(0.5),
        EntropyBoundKind::Bertrand(0.5),
    ];
    for tau in [1e-4, 1e-3, 1e-2, 0.1] {
        let report = bound_report(&dist, tau, &kinds)?;
        println!("tau = {tau:<7} exact = {:.5}", report.cp_exact.unwrap_or(f64::NAN));
        for (kind, entry) in &report.bounds {
            let flag = if entry.valid { "" } else { "  (outside domain)" };
            println!("    {kind:<14} {:.5}{flag}", entry.value);
        }
    }

    // Sampling estimate for a law too large to enumerate.
    let big = PatternDistribution::heterogeneous((0..40).map(|j| 0.01 * (j % 7) as f64 + 0.02).collect())?;
    let est = cp_monte_carlo(&big, 1e-3, 200_000, &mut ChaCha8Rng::seed_from_u64(5))?;
    println!("d = 40, tau = 1e-3: {:.5} +/- {:.5}", est.estimate, est.std_error);
    Ok(())
}
