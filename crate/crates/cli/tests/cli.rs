use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_ewens-mdp"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn")
}

fn json(args: &[&str]) -> Value {
    let out = run(args);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("json")
}

fn first_value(v: &Value, key: &str) -> f64 {
    v["results"][0][key].as_f64().unwrap()
}

#[test]
fn single_draw_mgf_is_t() {
    let v = json(&["mgf", "--stat", "K", "--n", "1", "--alpha", "0.5", "--t", "0.7"]);
    assert!((first_value(&v, "log_value") - 0.7).abs() < 1e-12);
    assert_eq!(v["command"], "mgf");
    assert!(v["diagnostics"]["terms_used"].as_u64().is_some());
}

#[test]
fn contour_matches_closed_form() {
    // n = 3, α = 1/2, e^t = 2: E 2^{K_3} = 17/4
    let t = std::f64::consts::LN_2.to_string();
    let v = json(&[
        "mgf", "--stat", "K", "--n", "3", "--alpha", "0.5", "--t", &t, "--method", "contour",
    ]);
    assert!((first_value(&v, "log_value") - 4.25f64.ln()).abs() < 1e-6);
    assert!(v["diagnostics"]["quadrature_nodes"].as_u64().unwrap() >= 64);
}

#[test]
fn series_and_contour_agree() {
    let a = json(&[
        "mgf", "--stat", "Ml", "--n", "40", "--l", "2", "--alpha", "0.3", "--t", "-0.4,0.9", "--tilde",
    ]);
    let b = json(&[
        "mgf", "--stat", "Ml", "--n", "40", "--l", "2", "--alpha", "0.3", "--t", "-0.4,0.9", "--method", "contour",
    ]);
    for i in 0..2 {
        let x = a["results"][i]["log_value"].as_f64().unwrap();
        let y = b["results"][i]["log_value"].as_f64().unwrap();
        assert!((x - y).abs() <= 1e-8 * x.abs().max(1.0), "{x} vs {y}");
    }
}

#[test]
fn gaussian_rate_at_half() {
    let v = json(&["rate", "--stat", "K", "--alpha", "0.5", "--x", "2"]);
    assert!((first_value(&v, "value") - 1.0).abs() < 1e-9);
    assert_eq!(v["results"][0]["infinite"], false);
}

#[test]
fn infinite_rate_is_flagged() {
    let v = json(&["rate", "--stat", "K", "--alpha", "0.5", "--x", "-1"]);
    assert!(v["results"][0]["value"].is_null());
    assert_eq!(v["results"][0]["infinite"], true);
}

#[test]
fn roots_report_both_branches() {
    let v = json(&["roots", "--l", "2", "--alpha", "0.5", "--y", "0.01"]);
    let r = &v["results"][0];
    assert!(r["outer"].as_f64().unwrap() > 1.0);
    assert!(r["residual_outer"].as_f64().unwrap().abs() < 1e-10);
    assert!(r["inner"].as_f64().is_some());
}

#[test]
fn exit_codes() {
    assert_eq!(
        run(&["mgf", "--stat", "K", "--n", "3", "--alpha", "1.5", "--t", "1"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        run(&["mgf", "--stat", "Q", "--n", "3", "--alpha", "0.5", "--t", "1"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(run(&["no-such-command"]).status.code(), Some(2));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
    let out = run(&["verify", "--suite", "identities"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn randomized_commands_need_a_seed() {
    let out = run(&["sample", "--n", "10", "--alpha", "0.5"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--seed"));
    let v = json(&["sample", "--n", "10", "--alpha", "0.5", "--ephemeral"]);
    assert!(v["seed"].as_u64().is_some());
}

#[test]
fn seeded_runs_are_byte_identical() {
    let args = [
        "mc-tail", "--stat", "K", "--n", "200", "--alpha", "0.5", "--x", "0.5", "--trials", "2000", "--seed", "11",
    ];
    let a = run(&args);
    let b = bin().args(args).env("EWENS_MDP_THREADS", "1").output().unwrap();
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let v: Value = serde_json::from_slice(&a.stdout).unwrap();
    assert_eq!(v["seed"], 11);
    assert_eq!(v["results"][0]["trials"], 2000);
}

#[test]
fn sample_and_extend_are_consistent() {
    let v = json(&["sample", "--n", "50", "--alpha", "0.4", "--theta", "1.0", "--seed", "3"]);
    let sizes: u64 = v["results"][0]["block_sizes"]
        .as_array()
        .unwrap()
        .iter()
        .map(|s| s.as_u64().unwrap())
        .sum();
    assert_eq!(sizes, 50);
    let e = json(&[
        "extend", "--base", "4,2,1", "--m", "30", "--alpha", "0.4", "--seed", "3",
    ]);
    assert_eq!(e["results"][0]["base_n"], 7);
    assert_eq!(e["results"][0]["base_blocks"], 3);
}

#[test]
fn csv_output_has_header_and_rows() {
    let out = run(&[
        "psi", "--stat", "K", "--alpha", "0.5", "--lambda", "0.5,1,2", "--format", "csv",
    ]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "lambda,value");
    assert_eq!(lines.len(), 4);
}

#[test]
fn writes_to_file() {
    let dir = std::env::temp_dir().join(format!("ewens-mdp-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("out.json");
    let out = run(&[
        "psi",
        "--stat",
        "K",
        "--alpha",
        "0.5",
        "--lambda",
        "1",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    assert!(out.stdout.is_empty());
    let v: Value = serde_json::from_slice(&std::fs::read(&path).unwrap()).unwrap();
    assert_eq!(v["command"], "psi");
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn mdp_profile_rows() {
    let v = json(&[
        "mdp-profile",
        "--stat",
        "K",
        "--n",
        "100",
        "--alpha",
        "0.5",
        "--sizes",
        "100,400",
        "--x",
        "0.5",
        "--trials",
        "500",
        "--seed",
        "5",
    ]);
    let rows = v["results"].as_array().unwrap();
    assert_eq!(rows.len(), 2);
    assert!(rows[0]["rate_value"].as_f64().unwrap() > 0.0);
}
