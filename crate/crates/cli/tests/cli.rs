use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn msfbcsp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_msfbcsp"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn simulate(out: &Path, extra: &[&str]) -> Vec<String> {
    let mut args = vec![
        "simulate",
        "--subjects",
        "2",
        "--sessions",
        "3",
        "--trials",
        "12",
        "--seed",
        "42",
        "--out",
        out.to_str().unwrap(),
    ];
    args.extend_from_slice(extra);
    let o = msfbcsp(&args);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    stdout(&o).lines().map(str::to_string).collect()
}

#[test]
fn paper_check_passes() {
    let o = msfbcsp(&["paper-check"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.contains("msFBCSP median 81.3"), "{text}");
    assert!(text.trim_end().ends_with("(p < 0.001): PASS"), "{text}");
}

#[test]
fn paper_check_rejects_perturbed_tables() {
    let dir = tempfile::tempdir().unwrap();
    let mut tables = serde_json::to_value(msfbcsp::dataio::paper_tables()).unwrap();
    tables["single"][0][0] = serde_json::json!(99.0);
    let path = dir.path().join("tables.json");
    fs::write(&path, tables.to_string()).unwrap();
    let o = msfbcsp(&["paper-check", "--tables", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("FAIL"));
}

#[test]
fn simulate_is_deterministic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let paths = simulate(a.path(), &[]);
    assert_eq!(paths.len(), 6);
    assert!(paths[0].ends_with("S01/session_01/manifest.json"), "{}", paths[0]);
    simulate(b.path(), &[]);
    for rel in ["S02/session_03/manifest.json", "S02/session_03/trial_011.csv"] {
        assert_eq!(
            fs::read(a.path().join(rel)).unwrap(),
            fs::read(b.path().join(rel)).unwrap()
        );
    }
    // refuses to overwrite without the flag
    let o = msfbcsp(&["simulate", "--subjects", "1", "--sessions", "1", "--trials", "4", "--out", a.path().to_str().unwrap()]);
    assert!(!o.status.success());
}

#[test]
fn train_predict_evaluate() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    simulate(&data, &[]);
    let session = |k: u32| data.join(format!("S01/session_{k:02}/manifest.json"));
    let s = |p: &Path| p.to_str().unwrap().to_string();

    let plain = dir.path().join("plain.json");
    let o = msfbcsp(&["train", "--current", &s(&session(1)), "--out", &s(&plain)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let model: serde_json::Value = serde_json::from_str(&fs::read_to_string(&plain).unwrap()).unwrap();
    assert_eq!(model["version"], 1);
    assert_eq!(model["k"], 1);
    assert!(model["prior"].is_null());

    let ms = dir.path().join("ms.json");
    let o = msfbcsp(&[
        "train",
        "--current",
        &s(&session(3)),
        "--history",
        &s(&session(1)),
        &s(&session(2)),
        "--out",
        &s(&ms),
    ]);
    assert!(o.status.success());
    let model: serde_json::Value = serde_json::from_str(&fs::read_to_string(&ms).unwrap()).unwrap();
    assert_eq!(model["k"], 3);
    assert_eq!(model["history_sessions_used"], serde_json::json!([1, 2]));

    let probs = dir.path().join("probs.csv");
    let o = msfbcsp(&["evaluate", "--model", &s(&ms), "--session", &s(&session(2)), "--out", &s(&probs)]);
    assert!(o.status.success());
    assert!(stdout(&o).starts_with("accuracy "));
    let csv = fs::read_to_string(&probs).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "trial,label,p_walk,p_rest,predicted");
    assert_eq!(lines.len(), 13);

    let o = msfbcsp(&["predict", "--model", &s(&ms), "--session", &s(&session(2))]);
    assert!(o.status.success());
    assert_eq!(stdout(&o), csv);
}

#[test]
fn train_warns_about_long_history() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    let o = msfbcsp(&[
        "simulate", "--subjects", "1", "--sessions", "7", "--trials", "8", "--out", data.to_str().unwrap(),
    ]);
    assert!(o.status.success());
    let m = |k: u32| data.join(format!("S01/session_{k:02}/manifest.json")).to_str().unwrap().to_string();
    let out = dir.path().join("model.json");
    let mut args = vec!["train".to_string(), "--current".into(), m(7), "--history".into()];
    args.extend((1..=6).map(m));
    args.extend(["--out".into(), out.to_str().unwrap().to_string()]);
    let o = Command::new(env!("CARGO_BIN_EXE_msfbcsp")).args(&args).output().unwrap();
    assert!(o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("only the 4 most recent"));
    let model: serde_json::Value = serde_json::from_str(&fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(model["history_sessions_used"], serde_json::json!([3, 4, 5, 6]));
}

#[test]
fn compare_writes_reports() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    simulate(&data, &[]);
    let report = dir.path().join("report");
    let run = || {
        let o = msfbcsp(&[
            "compare",
            "--data",
            data.to_str().unwrap(),
            "--seed",
            "7",
            "--out",
            report.to_str().unwrap(),
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        o
    };
    let o = run();
    assert!(stdout(&o).contains("Wilcoxon signed-rank"));
    let ms = fs::read_to_string(report.join("msfbcsp.csv")).unwrap();
    let single = fs::read_to_string(report.join("single.csv")).unwrap();
    let ms_lines: Vec<&str> = ms.lines().collect();
    let single_lines: Vec<&str> = single.lines().collect();
    assert_eq!(ms_lines[0], "Session,S01,S02");
    assert_eq!(ms_lines[1], single_lines[1]);
    assert!(ms_lines[4].starts_with("Median (range),"));
    let json = fs::read_to_string(report.join("report.json")).unwrap();
    run();
    assert_eq!(fs::read_to_string(report.join("report.json")).unwrap(), json);
}

#[test]
fn bad_config_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    fs::write(&cfg, r#"{"filter_bank": {"bandz": []}}"#).unwrap();
    let o = msfbcsp(&["simulate", "--config", cfg.to_str().unwrap(), "--out", dir.path().join("d").to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("error:"));
    assert!(!dir.path().join("d").exists());
}

#[test]
fn config_overrides_filter_bank() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    simulate(&data, &[]);
    let cfg = dir.path().join("cfg.json");
    fs::write(
        &cfg,
        r#"{"filter_bank": {"bands": [[8, 14]], "windows": [[0.5, 2.5]]}, "m": 1}"#,
    )
    .unwrap();
    let out = dir.path().join("model.json");
    let current = data.join("S01/session_01/manifest.json");
    let o = msfbcsp(&[
        "train",
        "--current",
        current.to_str().unwrap(),
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success());
    let model: serde_json::Value = serde_json::from_str(&fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(model["lda"]["feature_dim"], 2);
}

#[test]
fn missing_file_fails_cleanly() {
    let o = msfbcsp(&["train", "--current", "/nonexistent/manifest.json", "--out", "/tmp/x.json"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("error:"));
}

#[test]
fn no_erd_means_chance() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    let o = msfbcsp(&[
        "simulate", "--subjects", "3", "--sessions", "6", "--trials", "40", "--erd-depth", "0", "--out",
        data.to_str().unwrap(),
    ]);
    assert!(o.status.success());
    let report = dir.path().join("report");
    let o = msfbcsp(&["compare", "--data", data.to_str().unwrap(), "--out", report.to_str().unwrap()]);
    assert!(o.status.success());
    let r: serde_json::Value = serde_json::from_str(&fs::read_to_string(report.join("report.json")).unwrap()).unwrap();
    for key in ["msfbcsp_pooled", "single_pooled"] {
        let median = r[key]["median"].as_f64().unwrap();
        assert!((35.0..=65.0).contains(&median), "{key} median {median}");
    }
}
