use std::path::Path;
use std::process::{Command, Output};

fn patternlab(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_patternlab")).args(args).current_dir(dir).output().unwrap()
}

fn ok(out: &Output) -> String {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout.clone()).unwrap()
}

#[test]
fn gen_fit_eval_roundtrip() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    std::fs::write(p.join("s.json"), r#"{"preset": "mcar_a"}"#).unwrap();
    ok(&patternlab(&["gen", "--scenario", "s.json", "--n", "1000", "--seed", "7", "--out", "data.json"], p));
    ok(&patternlab(
        &["fit", "--data", "data.json", "--estimator", "pbp", "--tau", "d_over_n", "--out", "model.json"],
        p,
    ));
    let model = std::fs::read_to_string(p.join("model.json")).unwrap();
    assert!(model.contains("\"models\""));
    let report = ok(&patternlab(
        &["eval", "--model", "model.json", "--scenario", "s.json", "--n-test", "2000", "--seed", "9"],
        p,
    ));
    let line = report.lines().nth(1).unwrap();
    let risk: f64 = line.split(',').next().unwrap().parse().unwrap();
    assert!(risk.is_finite() && risk >= 0.0, "{report}");
}

#[test]
fn complexity_csv() {
    let dir = tempfile::tempdir().unwrap();
    let args =
        ["complexity", "--preset", "bern_pA,bern_pB,bern_pC,bern_pD", "--tau-grid", "0.001:1:log40", "--out", "cp.csv"];
    ok(&patternlab(&args, dir.path()));
    let text = std::fs::read_to_string(dir.path().join("cp.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "distribution,tau,cp_exact,hartley,shannon,shannon_valid,renyi_alpha,renyi,bertrand,bertrand_valid"
    );
    assert_eq!(lines.count(), 160);
}

#[test]
fn bench_writes_deterministic_csv() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    let config = r#"{"scenario": {"preset": "gpmm_c"},
        "estimators": [{"kind": "pbp", "tau": "d_over_n"}, {"kind": "pbp", "tau": "one_over_n"}, {"kind": "cst_impute_lr"}],
        "n_grid": [100, 300], "repetitions": 2, "n_test": 500, "seed": 42}"#;
    std::fs::write(p.join("cfg.json"), config).unwrap();
    ok(&patternlab(&["bench", "--config", "cfg.json", "--out", "a.csv"], p));
    ok(&patternlab(&["bench", "--config", "cfg.json", "--out", "b.csv"], p));
    let a = std::fs::read(p.join("a.csv")).unwrap();
    assert_eq!(a, std::fs::read(p.join("b.csv")).unwrap());
    assert_eq!(String::from_utf8(a).unwrap().lines().count(), 1 + 3 * 2 * 2);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    assert_eq!(patternlab(&["gen", "--scenario", "missing_preset", "--n", "5"], p).status.code(), Some(2));
    std::fs::write(
        p.join("cfg.json"),
        r#"{"scenario": {"preset": "mcar_a"}, "estimators": [], "n_grid": [10], "repetitions": 1, "seed": 1}"#,
    )
    .unwrap();
    assert_eq!(patternlab(&["bench", "--config", "cfg.json"], p).status.code(), Some(2));
    // 2^25 patterns is past the exact-enumeration limit.
    let rates = vec!["0.1"; 25].join(",");
    std::fs::write(p.join("wide.json"), format!(r#"{{"family": "heterogeneous_bernoulli", "epsilons": [{rates}]}}"#))
        .unwrap();
    assert_eq!(patternlab(&["complexity", "--dist", "wide.json", "--tau-grid", "0.1"], p).status.code(), Some(3));
}
