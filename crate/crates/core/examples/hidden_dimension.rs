//! Closed-form complexity bounds for Bernoulli missingness and the
//! database-merge model, driven by the hidden dimension `s_eps(d/n)`.
//!
//! cargo run --example hidden_dimension

use patternlab::complexity::{bernoulli_cp_bound, cp, heterogeneous_cp_bound, merge_model_bound};
use patternlab::{MergeModel, PatternDistribution};

fn main() -> patternlab::Result<()> {
    let d = 10;
    println!("{:>6} {:>6} {:>3} {:>10} {:>10} {:>10}", "n", "eps", "s", "exact", "infimum", "plug-in");
    for n in [100, 1_000, 10_000] {
        for eps in [0.05, 0.2, 0.5] {
            let b = bernoulli_cp_bound(d, n, eps)?;
            let exact = cp(&PatternDistribution::homogeneous(d, eps)?, d as f64 / n as f64)?;
            println!("{n:>6} {eps:>6} {:>3} {exact:>10.4} {:>10.4} {:>10.4}", b.s, b.infimum, b.plug_in);
        }
    }

    let rates = vec![0.02, 0.05, 0.1, 0.1, 0.2, 0.3, 0.05, 0.01, 0.15, 0.02];
    let h = heterogeneous_cp_bound(&rates, 5_000)?;
    println!(
        "\nheterogeneous: mean rate {:.3}, s = {}, bound {:.4}, holds: {}",
        h.mean_rate, h.s, h.bound, h.condition_holds
    );

    // Two hospitals recording complementary halves of eight variables.
    let protocols = vec!["11110000".parse()?, "00001111".parse()?];
    let eta = 0.01;
    let model = MergeModel::uniform(protocols, eta)?;
    let n = 800;
    let exact = cp(&model.clone().into(), 8.0 / n as f64)?;
    println!(
        "merge: missing fraction {:.3}, exact {exact:.4}, bound {:.4}",
        model.missing_fraction(),
        merge_model_bound(8, n, 2, eta)?
    );
    Ok(())
}
