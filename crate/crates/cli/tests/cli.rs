use std::process::{Command, Output};

use serde_json::Value;

fn ssk(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ssk")).args(args).env("SSK_THREADS", "2").output().unwrap()
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap()
}

#[test]
fn theory_reports_the_fixed_point() {
    let out = ssk(&["theory"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert!((v["rs_point"]["q"].as_f64().unwrap() - 0.0814354395).abs() < 1e-9);
    assert!((v["limits"]["N_var_R12"].as_f64().unwrap() - 1.052365).abs() < 1e-6);
    assert!(v["flagged"].as_array().unwrap().is_empty());
}

#[test]
fn low_temperature_exits_with_structured_error() {
    let out = ssk(&["theory", "--beta", "10"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(json(&out)["error"]["kind"], "region");
}

#[test]
fn bad_flags_are_config_errors() {
    for args in [&["theory", "--mixture", "p2:x"][..], &["oracle1d", "--mono", "1,a"], &["verify", "--n", "2"]] {
        let out = ssk(args);
        assert_eq!(out.status.code(), Some(2), "{args:?}");
        assert!(json(&out)["error"]["kind"].is_string());
    }
}

#[test]
fn unknown_config_keys_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.json");
    std::fs::write(&path, r#"{"beta": 0.2, "bogus": 1}"#).unwrap();
    let out = ssk(&["--config", path.to_str().unwrap(), "theory"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(json(&out)["error"]["kind"], "config");
}

#[test]
fn oracle_extrapolation_matches_engine() {
    let out = ssk(&["oracle1d", "--mono", "(1,3)", "--beta", "0.25"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(json(&out)["delta"].as_f64().unwrap().abs() < 1e-6);
}

#[test]
fn report_round_trips_as_config() {
    let dir = tempfile::tempdir().unwrap();
    let first = dir.path().join("a.json");
    let second = dir.path().join("b.json");
    let base = ["--n", "24", "--n-disorder", "4", "--sweeps", "2000", "--burnin", "200", "--seed", "7"];
    let mut args = vec!["--out", first.to_str().unwrap(), "--csv", "simulate"];
    args.extend(base);
    assert_eq!(ssk(&args).status.code(), Some(0));
    let out = ssk(&["--config", first.to_str().unwrap(), "--out", second.to_str().unwrap(), "simulate"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(std::fs::read(&first).unwrap(), std::fs::read(&second).unwrap());
    let csv = std::fs::read_to_string(first.with_extension("csv")).unwrap();
    assert_eq!(csv.lines().count(), 5);
    assert!(csv.starts_with("disorder,f1"));
}

#[test]
fn simulate_writes_dump() {
    let dir = tempfile::tempdir().unwrap();
    let dump = dir.path().join("x.sskd");
    let out = ssk(&[
        "simulate", "--n", "12", "--n-disorder", "1", "--sweeps", "1000", "--burnin", "100", "--dump",
        dump.to_str().unwrap(), "--dump-every", "250",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let (n, configs) = ssk::simulator::dump::read_dump(std::fs::File::open(&dump).unwrap()).unwrap();
    assert_eq!((n, configs.len()), (12, 4));
    for c in configs {
        assert!((c.iter().map(|x| x * x).sum::<f64>() - 12.0).abs() < 1e-9);
    }
}

#[test]
fn verify_exit_codes_follow_the_table() {
    let ok = ssk(&["verify", "--n", "60", "--n-disorder", "8", "--sweeps", "4000", "--burnin", "1000"]);
    assert_eq!(ok.status.code(), Some(0));
    let v = json(&ok);
    assert_eq!(v["passed"], true);
    assert_eq!(v["table"].as_array().unwrap().len(), 9);
    assert!(v["oracle"].as_array().unwrap().iter().all(|r| r["pass"] == true));

    // at N = 6 the finite-size corrections are many standard errors wide
    let bad = ssk(&["verify", "--n", "6", "--n-disorder", "32", "--sweeps", "20000", "--burnin", "2000"]);
    assert_eq!(bad.status.code(), Some(1));
    assert_eq!(json(&bad)["passed"], false);
}
