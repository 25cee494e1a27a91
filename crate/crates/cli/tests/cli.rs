use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn mil(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mil")).args(args).output().expect("run mil")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn error_json(o: &Output) -> serde_json::Value {
    serde_json::from_slice(&o.stderr).unwrap_or_else(|_| panic!("stderr is not JSON: {}", String::from_utf8_lossy(&o.stderr)))
}

fn gen(dir: &Path, args: &[&str]) -> String {
    let path = dir.join("problem.mil");
    let path = path.to_str().unwrap().to_string();
    let mut all = vec!["gen"];
    all.extend_from_slice(args);
    all.extend(["-o", &path]);
    let o = mil(&all);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    path
}

#[test]
fn learn_prints_the_grammar_with_an_invented_predicate() {
    let dir = tempfile::tempdir().unwrap();
    let p = gen(dir.path(), &["anbn", "--n", "3"]);
    let o = mil(&["learn", &p]);
    assert!(o.status.success());
    let text = stdout(&o);
    let clauses: Vec<&str> = text.lines().filter(|l| !l.starts_with('%')).collect();
    assert_eq!(clauses.len(), 3, "{text}");
    assert!(clauses.iter().all(|c| c.ends_with("% Chain")));
    assert!(text.contains("$1("));
    assert!(text.contains("S([a,b],[]): proved"));
}

#[test]
fn learning_without_invention_leaves_longer_strings_unproved() {
    let dir = tempfile::tempdir().unwrap();
    let p = gen(dir.path(), &["anbn", "--n", "3"]);
    let text = stdout(&mil(&["learn", &p, "--no-invention"]));
    assert!(!text.contains('$'), "{text}");
    assert!(text.contains("S([a,a,b,b],[]): no derivation"), "{text}");
}

#[test]
fn learn_metarules_recovers_chain() {
    let dir = tempfile::tempdir().unwrap();
    let p = gen(dir.path(), &["anbn", "--n", "3"]);
    for mode in ["matrix", "punch"] {
        let o = mil(&["learn-metarules", &p, "--mode", mode]);
        assert!(o.status.success());
        assert_eq!(stdout(&o).trim(), "(Chain) ∃.P,Q,R ∀.x,y,z: P(x,y)←Q(x,z),R(z,y)", "{mode}");
    }
}

#[test]
fn bounds_match_hand_counts() {
    let text = stdout(&mil(&["bounds", "--k", "2", "--a", "3", "--n", "2", "--p", "2", "--c", "2"]));
    // Two punch shapes; 3·2 ordered matrix heads and bodies over three atoms.
    assert!(text.contains("punch metarules: 2"));
    assert!(text.contains("matrix metarules (exact): 6"));
    assert!(text.contains("sort metarules per literal (bound): 4.500"));
    assert!(text.contains("metasubstitutions (bound): 16"));
    assert!(text.contains("ground substitutions (bound): 4"));
}

#[test]
fn bounds_reject_zero_parameters() {
    let o = mil(&["bounds", "--k", "0", "--a", "3", "--n", "2", "--p", "2", "--c", "2"]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(error_json(&o)["error"], "InvalidParameter");
}

#[test]
fn enumerate_lists_punch_and_sort_metarules() {
    let punch = stdout(&mil(&["enumerate", "--punch", "3"]));
    assert_eq!(punch.lines().count(), 3);
    let fc = stdout(&mil(&["enumerate", "--matrix", "meta-monadic", "--fully-connected"]));
    assert!(fc.lines().any(|l| l.ends_with("P(x,y)←Q(x,y)")), "{fc}");
    assert!(fc.lines().any(|l| l.ends_with("P(x,y)←Q(y,x)")), "{fc}");
    let o = mil(&["enumerate", "--matrix", "chain"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn generated_problems_pass_check() {
    let dir = tempfile::tempdir().unwrap();
    for args in [
        vec!["anbn", "--n", "2"],
        vec!["coloured-graph", "--nodes", "5", "--noise", "false-pos", "--rate", "0.1", "--seed", "3"],
        vec!["grid-world", "--width", "2", "--height", "2"],
        vec!["parents"],
        vec!["bounded-by"],
    ] {
        let p = gen(dir.path(), &args);
        let o = mil(&["check", &p]);
        assert!(o.status.success(), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
        let report: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
        assert_eq!(report["ok"], true, "{args:?}");
        assert!(report["positives"].as_u64().unwrap() > 0, "{args:?}");
    }
}

#[test]
fn malformed_problems_are_reported_as_json() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("bad.mil");
    fs::write(&p, "%pos\nS([a,b],[]\n").unwrap();
    let o = mil(&["learn", p.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let e = error_json(&o);
    assert!(!e["message"].as_str().unwrap().is_empty());
    assert_ne!(e["error"], "Usage");

    let o = mil(&["learn", dir.path().join("missing.mil").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(error_json(&o)["error"], "Io");
}

#[test]
fn usage_errors_exit_with_two() {
    let o = mil(&["frobnicate"]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(error_json(&o)["error"], "Usage");
}

#[test]
fn experiment_writes_a_csv() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("exp.json");
    fs::write(
        &config,
        r#"{
            "generate": {"dataset": "coloured-graph", "nodes": 4, "colours": 2},
            "metarules": ["identity", "inverse"],
            "runs": 1,
            "legs": ["no_replacement"],
            "seed": 1
        }"#,
    )
    .unwrap();
    let csv = dir.path().join("out.csv");
    let o = mil(&["experiment", config.to_str().unwrap(), "-o", csv.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(&csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("step,leg,metric,mean,stderr"));
    let rows: Vec<&str> = lines.collect();
    assert!(rows.iter().any(|r| r.contains(",accuracy,")), "{text}");
    // One step per metarule removed, including none.
    let steps: std::collections::BTreeSet<&str> = rows.iter().map(|r| r.split(',').next().unwrap()).collect();
    assert_eq!(steps.len(), 3, "{text}");
}

#[test]
fn experiment_configs_reject_unknown_fields() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("exp.json");
    fs::write(&config, r#"{"generate": {"dataset": "anbn"}, "colour": 3}"#).unwrap();
    let o = mil(&["experiment", config.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(error_json(&o)["error"], "Config");
}
