use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name)
}

fn rosptp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rosptp")).args(args).output().expect("spawn rosptp")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn value_of(line: &str) -> f64 {
    let v = line.split_whitespace().find_map(|t| t.strip_prefix("value=")).expect("value field");
    v.parse().unwrap()
}

#[test]
fn check_reports_exact_value() {
    let m = fixture("original_model.json");
    let o = rosptp(&["check", "--model", m.to_str().unwrap(), "--query", "Pmax=?[F<=35 \"Success\"]"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.starts_with("g=2 value=0.910000 exact=0.91 method=topological-exact"), "{out}");
}

#[test]
fn check_ladder_prints_one_line_per_granularity() {
    let m = fixture("original_model.json");
    let o = rosptp(&[
        "check",
        "--model",
        m.to_str().unwrap(),
        "--query",
        "Pmax=?[F<=35 \"Success\"]",
        "--granularity",
        "1,2,4",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = stdout(&o);
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines.len(), 3);
    assert!(lines[0].starts_with("g=1 "));
    assert!((value_of(lines[2]) - 0.91).abs() < 1e-9);
}

#[test]
fn missing_model_is_a_domain_error() {
    let o = rosptp(&["check", "--model", "missing.json", "--query", "Pmax=?[F<=35 \"Success\"]"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("cannot read missing.json"), "{}", stderr(&o));
}

#[test]
fn bad_ladder_is_a_usage_error() {
    let m = fixture("original_model.json");
    for g in ["2,2", "2,3", "0", "4,2"] {
        let o = rosptp(&["check", "--model", m.to_str().unwrap(), "--query", "Pmax=?[F<=35 \"Success\"]", "--granularity", g]);
        assert_eq!(o.status.code(), Some(2), "g={g}: {}", stderr(&o));
    }
}

#[test]
fn bad_query_is_a_usage_error() {
    let m = fixture("original_model.json");
    let o = rosptp(&["check", "--model", m.to_str().unwrap(), "--query", "Pmax=?[G \"Success\"]"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn unknown_label_is_a_domain_error() {
    let m = fixture("original_model.json");
    let o = rosptp(&["check", "--model", m.to_str().unwrap(), "--query", "Pmax=?[F<=35 \"Nope\"]"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("Nope"), "{}", stderr(&o));
}

#[test]
fn failed_compile_writes_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"start":"a","stages":[{"kind":"absorb","id":"b","label":"X"}]}"#).unwrap();
    let out = dir.path().join("model.json");
    let o = rosptp(&["compile", "--pipeline", bad.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
    assert!(!out.exists());
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
}

#[test]
fn unbound_ref_without_stats_fails() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("model.json");
    let p = fixture("original_pipeline.json");
    let o = rosptp(&["compile", "--pipeline", p.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(!out.exists());
}

#[test]
fn prism_round_trip_preserves_value() {
    let dir = tempfile::tempdir().unwrap();
    let prism = dir.path().join("m.prism");
    let back = dir.path().join("m.json");
    let m = fixture("original_model.json");
    let o = rosptp(&["export-prism", "--model", m.to_str().unwrap(), "--out", prism.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(std::fs::read_to_string(&prism).unwrap().starts_with("pta\n"));
    let o = rosptp(&["parse-prism", "--in", prism.to_str().unwrap(), "--out", back.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let o = rosptp(&["check", "--model", back.to_str().unwrap(), "--query", "Pmax=?[F<=35 \"Success\"]"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("exact=0.91 "), "{}", stdout(&o));
}

#[test]
fn parse_prism_rejects_mdp() {
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("m.prism");
    std::fs::write(&src, "mdp\nmodule M\n s : [0..1];\n [] s=0 -> (s'=1);\nendmodule\n").unwrap();
    let out = dir.path().join("m.json");
    let o = rosptp(&["parse-prism", "--in", src.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("pta"), "{}", stderr(&o));
    assert!(!out.exists());
}

#[test]
fn simulate_estimate_compile_check() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("trace.jsonl");
    let stats = dir.path().join("stats.json");
    let model = dir.path().join("model.json");
    let g = fixture("case_study_graph.json");
    let s = fixture("case_study_scenario.json");
    let o = rosptp(&["simulate", "--graph", g.to_str().unwrap(), "--scenario", s.to_str().unwrap(), "--out", trace.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));

    let o = rosptp(&[
        "estimate",
        "--traces",
        trace.to_str().unwrap(),
        "--unit",
        "0.01",
        "--min-bin-prob",
        "0.08",
        "--out",
        stats.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("images:BcastComm"), "{}", stdout(&o));
    assert!(std::fs::read_to_string(&stats).unwrap().ends_with('\n'));

    let p = fixture("original_pipeline.json");
    let o = rosptp(&[
        "compile",
        "--pipeline",
        p.to_str().unwrap(),
        "--stats",
        stats.to_str().unwrap(),
        "--out",
        model.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));

    let o = rosptp(&["check", "--model", model.to_str().unwrap(), "--query", "Pmax=?[F<=35 \"Success\"]"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v = value_of(stdout(&o).lines().next().unwrap());
    assert!((0.89..=0.93).contains(&v), "value {v}");
}

#[test]
fn simulation_is_reproducible_from_seed() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.jsonl");
    let b = dir.path().join("b.jsonl");
    let g = fixture("case_study_graph.json");
    let s = fixture("case_study_scenario.json");
    for out in [&a, &b] {
        let o = rosptp(&[
            "simulate",
            "--graph",
            g.to_str().unwrap(),
            "--scenario",
            s.to_str().unwrap(),
            "--horizon",
            "50",
            "--seed",
            "7",
            "--out",
            out.to_str().unwrap(),
        ]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}
