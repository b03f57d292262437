use std::path::PathBuf;
use std::process::{Command, Output};

fn stablefee(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_stablefee")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn scenario(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(name).display().to_string()
}

#[test]
fn fee_ratio_prints_exact_ratio() {
    let o = stablefee(&["experiment", "fee-ratio", "--rate", "7.11"]);
    assert!(o.status.success(), "{o:?}");
    assert!(stdout(&o).lines().any(|l| l.split_whitespace().collect::<Vec<_>>() == ["ratio", "7.11"]), "{}", stdout(&o));
    let j = stablefee(&["experiment", "fee-ratio", "--rate", "7.2", "--json"]);
    let v: serde_json::Value = serde_json::from_slice(&j.stdout).unwrap();
    assert_eq!(v["ratio"], 7_200_000_000u64);
    assert_eq!(v["unit_receipt"]["gas_used"], 21_000);
}

#[test]
fn generated_series_feed_the_stability_experiment() {
    let dir = tempfile::tempdir().unwrap();
    let s = dir.path().join("stable.csv");
    let v = dir.path().join("volatile.csv");
    assert!(stablefee(&["experiment", "gen-series", "--kind", "stable", "--out", s.to_str().unwrap()]).status.success());
    assert!(stablefee(&["experiment", "gen-series", "--kind", "volatile", "--seed", "9", "--out", v.to_str().unwrap()]).status.success());
    let o = stablefee(&["experiment", "fee-stability", "--stable", s.to_str().unwrap(), "--volatile", v.to_str().unwrap(), "--json"]);
    assert!(o.status.success(), "{o:?}");
    let r: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(r["volatile"]["ratio"], 1_840_000_000u64);
    assert!(r["stable"]["ratio"].as_u64().unwrap() <= 1_004_000_000);
}

#[test]
fn node_run_writes_identical_reports() {
    let dir = tempfile::tempdir().unwrap();
    let mut texts = Vec::new();
    for i in 0..2 {
        let prefix = dir.path().join(format!("run{i}"));
        let o = stablefee(&["node", "run", "--scenario", &scenario("unit_tamper.toml"), "--report", prefix.to_str().unwrap()]);
        assert!(o.status.success(), "{o:?}");
        let txt = std::fs::read_to_string(prefix.with_extension("txt")).unwrap();
        let json = std::fs::read_to_string(prefix.with_extension("json")).unwrap();
        assert_eq!(txt, stdout(&o));
        texts.push((txt, json));
    }
    assert_eq!(texts[0], texts[1]);
    assert!(texts[0].0.contains("safety violations   0"));
}

#[test]
fn gov_status_shows_executed_mint() {
    let o = stablefee(&["gov", "status", "--unit", "CNY", "--scenario", &scenario("governance_and_rates.toml"), "--json"]);
    assert!(o.status.success(), "{o:?}");
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["quorum_size"], 3);
    assert_eq!(v["minted"], "500000000000000000000");
    assert_eq!(v["proposals"][0]["status"], "executed");
    let missing = stablefee(&["gov", "status", "--unit", "JPY", "--scenario", &scenario("governance_and_rates.toml")]);
    assert!(!missing.status.success());
}

#[test]
fn bad_input_fails_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "target_height = 3\n").unwrap();
    let o = stablefee(&["node", "run", "--scenario", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("seed"));
    assert!(!stablefee(&["experiment", "fee-ratio", "--rate", "0"]).status.success());
}

#[test]
fn serve_starts_and_stops() {
    let o = stablefee(&["node", "serve", "--port", "0", "--seconds", "1", "--sim-ms", "500", "--tick-ms", "20"]);
    assert!(o.status.success(), "{o:?}");
    let out = stdout(&o);
    assert!(out.contains("USD endpoint on http://127.0.0.1:"), "{out}");
    assert!(out.contains("CNY endpoint on http://127.0.0.1:"), "{out}");
    assert!(out.contains("stopped at simulated"), "{out}");
}
