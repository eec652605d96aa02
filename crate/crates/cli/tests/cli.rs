use std::path::Path;
use std::process::{Command, Output};

fn halfline(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_halfline"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_preset(dir: &Path, name: &str, family: &str, alpha: &str, beta: &str) {
    let o = halfline(dir, &["presets", "--family", family, "--alpha", alpha, "--beta", beta, "--out", name]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn presets_osc1_writes_two_one_sided_branches() {
    let dir = tempfile::tempdir().unwrap();
    write_preset(dir.path(), "osc1.json", "osc1", "0.6", "0.7");
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("osc1.json")).unwrap()).unwrap();
    let branches = v["branches"].as_array().unwrap();
    assert_eq!(branches.len(), 2);
    assert!(branches.iter().all(|b| b["kind"] == "one_sided"));
    assert_eq!(v["routing"], serde_json::json!([[0.0, 1.0], [1.0, 0.0]]));
}

#[test]
fn classify_sym_preset_is_recurrent_negative() {
    let dir = tempfile::tempdir().unwrap();
    write_preset(dir.path(), "preset_sym_a1.2.json", "sym", "1.2", "1.2");
    let o = halfline(dir.path(), &["classify", "preset_sym_a1.2.json"]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["verdict"], "recurrent_negative");
    let k = v["criterion"].as_f64().unwrap();
    assert!((k - (0.6 * std::f64::consts::PI).tan().recip()).abs() < 1e-12);
    for key in ["criterion", "max_chi_alpha", "verdict", "q_prediction"] {
        assert!(v.get(key).is_some(), "missing {key}");
    }
}

#[test]
fn invalid_model_exits_two_with_every_violation() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("bad.json"),
        r#"{"branches":[{"id":"a","kind":"sideways","family":"shifted_pareto","alpha":-1}],"routing":[[0.5]]}"#,
    )
    .unwrap();
    let o = halfline(dir.path(), &["validate", "bad.json"]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("unknown kind"));
    assert!(err.contains("alpha must be positive"));
    assert!(err.contains("not stochastic"));
}

#[test]
fn unknown_flag_prints_usage_and_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let o = halfline(dir.path(), &["classify", "--no-such-flag"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("Usage"));
}

#[test]
fn stochastic_commands_require_a_seed() {
    let dir = tempfile::tempdir().unwrap();
    write_preset(dir.path(), "m.json", "sym", "1.5", "1.5");
    let o = halfline(dir.path(), &["simulate", "m.json", "--excursions", "3"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn domain_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let o = halfline(dir.path(), &["integrals", "--kind", "i1_tilde", "--nu", "0.2", "--alpha", "1.5"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn integrals_prints_csv_row() {
    let dir = tempfile::tempdir().unwrap();
    let o = halfline(dir.path(), &["integrals", "--kind", "i21", "--nu", "0.5", "--alpha", "1.5"]);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("kind,nu,alpha,closed,quad,abs_diff"));
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(row[0], "i21");
    let closed: f64 = row[3].parse().unwrap();
    let diff: f64 = row[5].parse().unwrap();
    // Γ(1.5)Γ(1)/Γ(2.5)
    assert!((closed - 2.0 / 3.0).abs() < 1e-12);
    assert!(diff < 1e-8);
}

#[test]
fn simulate_twice_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    write_preset(dir.path(), "m.json", "sym", "1.5", "1.5");
    for out in ["a.csv", "b.csv"] {
        let o = halfline(
            dir.path(),
            &["simulate", "m.json", "--excursions", "50", "--horizon", "1e4", "--seed", "5", "--out", out],
        );
        assert!(o.status.success());
    }
    let a = std::fs::read(dir.path().join("a.csv")).unwrap();
    assert_eq!(a, std::fs::read(dir.path().join("b.csv")).unwrap());
    assert!(String::from_utf8_lossy(&a).starts_with("idx,tau,censored,max_x,end_branch\n"));
}

#[test]
fn replay_reproduces_lattice_output() {
    let dir = tempfile::tempdir().unwrap();
    let o = halfline(
        dir.path(),
        &["lattice", "--variant", "example41", "--returns", "2000", "--seed", "3", "--out", "e.csv"],
    );
    assert!(o.status.success());
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("e.csv.manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["seed"], 3);
    assert!(manifest["version"].is_string());
    assert_eq!(manifest["config"]["command"], "lattice");
    let o = halfline(dir.path(), &["replay", "e.csv.manifest.json", "--out", "f.csv"]);
    assert!(o.status.success());
    assert_eq!(
        std::fs::read(dir.path().join("e.csv")).unwrap(),
        std::fs::read(dir.path().join("f.csv")).unwrap()
    );
}

#[test]
fn drift_scan_embeds_weights_file_in_manifest() {
    let dir = tempfile::tempdir().unwrap();
    write_preset(dir.path(), "m.json", "osc1", "0.6", "0.7");
    std::fs::write(dir.path().join("w.json"), "[1.0, 2.0]").unwrap();
    let o = halfline(
        dir.path(),
        &["drift-scan", "m.json", "--nu", "0.1", "--x-grid", "1e2:1e3:log:2", "--weights", "w.json", "--out", "d.csv"],
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(dir.path().join("d.csv")).unwrap();
    assert_eq!(text.lines().count(), 5);
    std::fs::remove_file(dir.path().join("w.json")).unwrap();
    std::fs::remove_file(dir.path().join("m.json")).unwrap();
    let o = halfline(dir.path(), &["replay", "d.csv.manifest.json", "--out", "e.csv"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(text, std::fs::read_to_string(dir.path().join("e.csv")).unwrap());
}
