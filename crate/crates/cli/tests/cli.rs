use std::collections::BTreeSet;
use std::path::PathBuf;
use std::process::{Command, Output};

fn fixture(rel: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../fixtures")
        .join(rel)
        .to_string_lossy()
        .into_owned()
}

fn dqctx(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dqctx"))
        .args(args)
        .env("DQCTX_COLOR", "0")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

#[test]
fn empty_data_directory_is_an_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let sys = fixture("running/system.dqx");
    let o = dqctx(&["assess", "--system", &sys, "--data", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("missing relation `TempNoon`"), "{}", stderr(&o));
    assert!(!stderr(&o).contains('\x1b'));
}

#[test]
fn unknown_predicate_in_query_is_an_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let q = dir.path().join("q.dq");
    std::fs::write(&q, "Ans(p) :- Patients(p).").unwrap();
    let o = dqctx(&[
        "answer",
        "--system",
        &fixture("running/system.dqx"),
        "--data",
        &fixture("running/data"),
        "--query",
        q.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("unknown predicate `Patients`"));
}

#[test]
fn unreadable_external_table_is_a_resolver_failure() {
    let dir = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(fixture("appendix/system.dqx")).unwrap();
    let sys = dir.path().join("system.dqx");
    std::fs::write(&sys, text.replace("certs.csv", "nowhere.csv")).unwrap();
    let o = dqctx(&["assess", "--system", sys.to_str().unwrap(), "--data", &fixture("appendix/data")]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
}

#[test]
fn clean_data_has_no_distance() {
    let o = dqctx(&["metrics", "--system", &fixture("running/system.dqx"), "--data", &fixture("running/clean")]);
    assert!(o.status.success(), "{}", stderr(&o));
    let m: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(m["qm0"], 0);
    assert_eq!(m["qm1"]["decimal"], "0.0000");
    assert_eq!(m["jaccard_r"]["decimal"], "1.0000");
}

#[test]
fn metrics_against_a_given_quality_instance() {
    let o = dqctx(&[
        "metrics",
        "--system",
        &fixture("running/system.dqx"),
        "--data",
        &fixture("running/data"),
        "--quality",
        &fixture("running/clean"),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let m: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(m["qm0"], 2);
    assert_eq!(m["qm1"]["exact"], "2/5");
}

#[test]
fn rewrite_unfolds_the_quality_view() {
    let o = dqctx(&["rewrite", "--system", &fixture("running/system.dqx"), "--query", &fixture("running/query.dq")]);
    assert!(o.status.success(), "{}", stderr(&o));
    let q = dqctx_core::datalog::parse_query(&stdout(&o)).unwrap();
    let rule = &q.program.rules[0];
    assert_eq!((q.program.rules.len(), rule.head.to_string()), (1, "Ans(p, v)".to_string()));
    let atoms: BTreeSet<String> = rule.body.iter().map(|a| a.to_string()).collect();
    let expected: BTreeSet<String> = [
        "M(p, v, t, d, i)",
        "11:30 <= t",
        "t <= 12:30",
        "Valid(v)",
        "Oral(p, d, t)",
        "Certified(p, d, t)",
        "d = Sep/5",
    ]
    .map(String::from)
    .into();
    assert_eq!(atoms, expected);
}

#[test]
fn rewrite_trace_lists_every_stage() {
    let o = dqctx(&[
        "rewrite",
        "--trace",
        "--unfold-cqps",
        "--system",
        &fixture("running/system.dqx"),
        "--query",
        &fixture("running/query.dq"),
    ]);
    let text = stdout(&o);
    let stages: Vec<&str> = text.lines().filter(|l| l.starts_with("% ")).collect();
    assert_eq!(stages, vec!["% nickname-substitution", "% view-unfold", "% cqp-unfold"]);
}

#[test]
fn identity_system_echoes_the_query() {
    let dir = tempfile::tempdir().unwrap();
    let sys = dir.path().join("system.dqx");
    std::fs::write(&sys, "source { R(a: str, b: num). }\nmapping { copy R -> R. }\nquality { R: R_P(a, b) :- R(a, b). }\n").unwrap();
    let q = dir.path().join("q.dq");
    let query = "Ans(a) :- R(a, b), b > 3.\n";
    std::fs::write(&q, query).unwrap();
    let o = dqctx(&["rewrite", "--system", sys.to_str().unwrap(), "--query", q.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(stdout(&o), query);
}

#[test]
fn bindings_flag_overrides_declared_patterns() {
    let args = |b: &'static str| {
        vec![
            "rewrite".to_string(),
            "--magic".into(),
            "--system".into(),
            fixture("appendix/system.dqx"),
            "--query".into(),
            fixture("appendix/query.dq"),
            "--bindings".into(),
            b.into(),
        ]
    };
    let run = |b| {
        let a = args(b);
        dqctx(&a.iter().map(String::as_str).collect::<Vec<_>>())
    };
    assert!(run("#C=ff").status.success());
    let bad = run("#C=fb");
    assert_eq!(bad.status.code(), Some(2));
    assert!(stderr(&bad).contains("binding violation"), "{}", stderr(&bad));
}

#[test]
fn magic_answering_reports_its_calls() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("report.json");
    let o = dqctx(&[
        "answer",
        "--magic",
        "--system",
        &fixture("appendix/system.dqx"),
        "--data",
        &fixture("appendix/data"),
        "--query",
        &fixture("appendix/query.dq"),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(stdout(&o), "Tom Waits,38.2\nTom Waits,38.5\n");
    let report: serde_json::Value = serde_json::from_slice(&std::fs::read(&out).unwrap()).unwrap();
    assert_eq!(report["call_log"].as_array().unwrap().len(), 3);
}

#[test]
fn timings_are_opt_in() {
    let base = ["assess", "--system", &fixture("running/system.dqx"), "--data", &fixture("running/data")];
    let plain: serde_json::Value = serde_json::from_slice(&dqctx(&base).stdout).unwrap();
    assert!(plain.get("timings_ms").is_none());
    let mut args = base.to_vec();
    args.push("--timings");
    let timed: serde_json::Value = serde_json::from_slice(&dqctx(&args).stdout).unwrap();
    assert!(timed["timings_ms"]["quality_instance"].is_number());
}
