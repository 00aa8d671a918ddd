use rosptp::checker::{qualitative_precompute, Method};
use rosptp::pipeline::{compile_pipeline_with, CompileOptions};
use rosptp::{
    check, compile_pipeline, export_prism, granularity_ladder, parse_prism, parse_query, validate_ptp,
    CheckError, CheckOptions, Opt, PipelineSpec, Ptp,
};

fn fixture(name: &str) -> String {
    std::fs::read_to_string(format!("{}/../../fixtures/{name}", env!("CARGO_MANIFEST_DIR"))).unwrap()
}

fn original_model() -> Ptp {
    Ptp::from_json(&fixture("original_model.json")).unwrap()
}

fn improved(branch_invariant: bool) -> Ptp {
    let p = PipelineSpec::from_json(&fixture("improved_inline.json")).unwrap();
    compile_pipeline_with(&p, CompileOptions { branch_invariant }).unwrap()
}

const DEADLINE_QUERY: &str = r#"Pmax=?[F<=35 "Success"]"#;

#[test]
fn hand_written_original_model_is_valid() {
    assert_eq!(validate_ptp(&original_model()), vec![]);
    assert_eq!(rosptp::ptp::clock_ceilings(&original_model())["x"], 16);
    assert_eq!(rosptp::ptp::clock_ceilings(&improved(true))["x"], 10);
}

#[test]
fn original_model_at_g2() {
    let r = check(&original_model(), &parse_query(DEADLINE_QUERY).unwrap(), 2, &CheckOptions::default()).unwrap();
    assert!((r.value - 0.91).abs() < 1e-12);
    assert_eq!(r.method, Method::TopologicalExact);
    assert_eq!(r.exact_text().as_deref(), Some("0.91"));
}

#[test]
fn compiled_original_matches_hand_written() {
    let p = PipelineSpec::from_json(&fixture("original_inline.json")).unwrap();
    let m = compile_pipeline(&p).unwrap();
    assert_eq!(m.locations.len(), 10);
    let q = parse_query(DEADLINE_QUERY).unwrap();
    for g in [2, 4] {
        let a = check(&m, &q, g, &CheckOptions::default()).unwrap().value;
        let b = check(&original_model(), &q, g, &CheckOptions::default()).unwrap().value;
        assert!((a - b).abs() <= 1e-12, "g={g}: {a} vs {b}");
    }
}

#[test]
fn improved_design_has_seven_locations() {
    assert_eq!(improved(true).locations.len(), 7);
}

#[test]
fn improved_design_exports_the_published_program_commands() {
    let text = export_prism(&improved(false)).unwrap();
    assert!(text.contains("[] s=0 -> 0.3:(s'=1)&(x'=0) + 0.6:(s'=2)&(x'=0) + 0.1:(s'=3)&(x'=0);"));
    assert!(text.contains("[] s=4 & x>8 -> 0.7:(s'=5) + 0.3:(s'=6)&(x'=0);"));
    assert!(text.contains("(s=1 => x<4)"));
    assert!(text.contains("label \"Success\" = s=5;"));
}

#[test]
fn exported_models_are_check_equivalent() {
    let q = parse_query(DEADLINE_QUERY).unwrap();
    for m in [original_model(), improved(true), improved(false)] {
        let back = parse_prism(&export_prism(&m).unwrap()).unwrap();
        for g in [2, 4] {
            let a = check(&m, &q, g, &CheckOptions::default()).unwrap().value;
            let b = check(&back, &q, g, &CheckOptions::default()).unwrap().value;
            assert!((a - b).abs() <= 1e-12, "g={g}: {a} vs {b}");
        }
    }
}

#[test]
fn unbounded_success_is_certain() {
    let q = parse_query(r#"Pmax=?[F "Success"]"#).unwrap();
    let r = check(&original_model(), &q, 2, &CheckOptions::default()).unwrap();
    assert!((r.value - 1.0).abs() < 1e-9);
}

#[test]
fn published_program_lets_a_minimizer_idle() {
    let m = parse_prism(&fixture("improved.prism")).unwrap();
    let q = parse_query("Pmin=?[F<=35 s=5]").unwrap();
    assert_eq!(check(&m, &q, 2, &CheckOptions::default()).unwrap().value, 0.0);
    // The compiled form carries invariants, so time cannot stall the run.
    let q = parse_query(r#"Pmin=?[F<=35 "Success"]"#).unwrap();
    let v = check(&improved(true), &q, 2, &CheckOptions::default()).unwrap().value;
    assert!(v > 0.0);
}

#[test]
fn ladder_rejects_bad_granularities() {
    let q = parse_query(DEADLINE_QUERY).unwrap();
    for gs in [vec![2, 2], vec![2, 3], vec![4, 2], vec![]] {
        let e = granularity_ladder(&original_model(), &q, &gs, &CheckOptions::default()).unwrap_err();
        assert!(matches!(e, CheckError::Granularity(_)), "{gs:?}");
    }
}

#[test]
fn original_ladder_is_flat() {
    let q = parse_query(DEADLINE_QUERY).unwrap();
    let l = granularity_ladder(&original_model(), &q, &[2, 4], &CheckOptions::default()).unwrap();
    assert!(l.monotone());
    assert!(l.results.iter().all(|r| (r.value - 0.91).abs() < 1e-12));
}

#[test]
fn unknown_label_is_reported() {
    let q = parse_query(r#"Pmax=?[F "Nope"]"#).unwrap();
    let e = check(&original_model(), &q, 2, &CheckOptions::default()).unwrap_err();
    assert!(matches!(e, CheckError::UnknownLabel(l) if l == "Nope"));
}

#[test]
fn value_iteration_agrees_with_exact_pass() {
    let q = parse_query(DEADLINE_QUERY).unwrap();
    let m = improved(true);
    let exact = check(&m, &q, 4, &CheckOptions::default()).unwrap();
    let vi = CheckOptions { force_value_iteration: true, ..CheckOptions::default() };
    let approx = check(&m, &q, 4, &vi).unwrap();
    assert_eq!(approx.method, Method::ValueIteration);
    assert!((exact.value - approx.value).abs() <= 1e-10);
}

#[test]
fn state_cap_error_names_the_cap() {
    let q = parse_query(DEADLINE_QUERY).unwrap();
    let opts = CheckOptions { state_cap: 100, ..CheckOptions::default() };
    let e = check(&original_model(), &q, 2, &opts).unwrap_err();
    assert_eq!(e.to_string(), "state space exceeds the cap of 100 states");
}

#[test]
fn zero_and_one_sets_are_disjoint_on_fixtures() {
    let q = parse_query(DEADLINE_QUERY).unwrap();
    for opt in [Opt::Max, Opt::Min] {
        let q = rosptp::PctlQuery { opt, ..q.clone() };
        let mdp = rosptp::checker::digitize_query(&improved(true), &q, 2, &CheckOptions::default()).unwrap();
        let (zero, one) = qualitative_precompute(&mdp, &mdp.target, opt);
        assert!(zero.iter().zip(&one).all(|(z, o)| !(z & o)));
        assert!(mdp.target.iter().zip(&one).all(|(t, o)| !t || *o));
    }
}
