//! Missing-pattern complexity of the four Bernoulli presets over a log grid
//! of thresholds, with the entropy bounds alongside.
//!
//! cargo run --example complexity_curves

use patternlab::harness::{cp_curve, parse_tau_grid, write_curve_csv};
use patternlab::simulate::distribution_preset;

fn main() -> patternlab::Result<()> {
    let dists = ["bern_pA", "bern_pB", "bern_pC", "bern_pD"]
        .iter()
        .map(|name| Ok((name.to_string(), distribution_preset(name)?)))
        .collect::<patternlab::Result<Vec<_>>>()?;
    let rows = cp_curve(&dists, &parse_tau_grid("0.001:1:log12")?, 0.5)?;
    write_curve_csv(&rows, std::io::stdout().lock())
}
