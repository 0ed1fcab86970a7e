//! Closed-form Bayes predictions against the rejection-sampling oracle,
//! plus an oracle-only self-masking scenario.
//!
//! cargo run --release --example bayes_oracle

use patternlab::simulate::{
    bayes_oracle_mc, bayes_predict, generate, scenario_preset, OracleSettings, Scenario, ScenarioKind,
};
use patternlab::GaussianParams;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> patternlab::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let settings = OracleSettings { target_accepted: 200, ..OracleSettings::default() };

    let scenario = scenario_preset("gpmm_c")?;
    let probes = generate(&scenario, 5, 9)?;
    for i in 0..probes.dataset.n() {
        let (x, m) = (probes.dataset.observed_values(i), probes.dataset.pattern(i));
        let exact = bayes_predict(&scenario, &x, m)?;
        match bayes_oracle_mc(&scenario, &x, m, settings, &mut rng) {
            Ok(est) => println!("{m}: closed form {exact:.3}, oracle {:.3} +/- {:.3}", est.estimate, est.std_error),
            Err(e) => println!("{m}: closed form {exact:.3}, oracle unavailable ({e})"),
        }
    }

    let self_masking = Scenario {
        name: "self_masking_2d".into(),
        d: 2,
        beta0: 0.0,
        beta: vec![1.0, -1.0],
        sigma: 0.1,
        kind: ScenarioKind::SelfMasking {
            gaussian: GaussianParams::standard(2),
            centers: vec![1.0, 1.0],
            widths: vec![0.5, 0.5],
            peaks: None,
        },
    };
    let m = "10".parse()?;
    let est = bayes_oracle_mc(&self_masking, &[0.3], m, settings, &mut rng)?;
    println!("self-masking, x_2 = 0.3, x_1 missing: {:.3} +/- {:.3}", est.estimate, est.std_error);
    println!("closed form: {}", bayes_predict(&self_masking, &[0.3], m).unwrap_err());
    Ok(())
}
