//! End-to-end tests driving the `chainflow` binary.

use std::path::Path;
use std::process::{Command, Output};

use chainflow::instance::load_instance;
use chainflow::offline::{parse_lp, verify_solution, SolveResult};

fn chainflow(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_chainflow"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn assert_success(output: &Output) -> String {
    assert!(
        output.status.success(),
        "stdout: {}\nstderr: {}",
        String::from_utf8_lossy(&output.stdout),
        String::from_utf8_lossy(&output.stderr)
    );
    String::from_utf8_lossy(&output.stdout).into_owned()
}

#[test]
fn generate_adversarial_has_expected_request_count() {
    let dir = tempfile::tempdir().unwrap();
    let out = chainflow(
        &["generate", "--type", "adversarial", "--ell", "16", "--kappa", "6", "--out", "a.json"],
        dir.path(),
    );
    let stdout = assert_success(&out);
    assert!(stdout.contains("requests=186"), "{stdout}"); // 6 · 31
    assert!(stdout.contains("chains=31"), "{stdout}");
    let instance = load_instance(&std::fs::read_to_string(dir.path().join("a.json")).unwrap()).unwrap();
    assert_eq!(instance.requests().len(), 186);
}

#[test]
fn generate_random_is_byte_identical_per_seed() {
    let dir = tempfile::tempdir().unwrap();
    let args = [
        "generate", "--type", "random", "--n", "20", "--ell", "2", "--seed", "7",
        "--requests", "12", "--out",
    ];
    assert_success(&chainflow(&[&args[..], &["r1.json"]].concat(), dir.path()));
    assert_success(&chainflow(&[&args[..], &["r2.json"]].concat(), dir.path()));
    let a = std::fs::read(dir.path().join("r1.json")).unwrap();
    let b = std::fs::read(dir.path().join("r2.json")).unwrap();
    assert_eq!(a, b);
}

#[test]
fn generate_mis_from_triangle() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("triangle.json"),
        r#"{"node_count": 3, "edges": [[0, 1], [1, 2], [0, 2]]}"#,
    )
    .unwrap();
    let out = chainflow(
        &["generate", "--type", "mis", "--input", "triangle.json", "--ell", "3", "--out", "m.json"],
        dir.path(),
    );
    let stdout = assert_success(&out);
    assert!(stdout.contains("chains=3"), "{stdout}");
    assert!(stdout.contains("requests=3"), "{stdout}");
}

#[test]
fn generate_ksp_from_set_system() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("sets.json"),
        r#"{"universe_size": 6, "sets": [[0, 1, 2], [2, 3, 4], [3, 4, 5]]}"#,
    )
    .unwrap();
    let out = chainflow(
        &["generate", "--type", "ksp", "--input", "sets.json", "--k", "3", "--out", "k.json"],
        dir.path(),
    );
    assert_success(&out);
    let instance = load_instance(&std::fs::read_to_string(dir.path().join("k.json")).unwrap()).unwrap();
    assert_eq!(chainflow::offline::brute_force(&instance).unwrap().objective, 2);
}

#[test]
fn generate_missing_flags_exit_with_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = chainflow(&["generate", "--type", "adversarial", "--out", "a.json"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--ell"));
}

#[test]
fn generate_rejected_parameters_exit_with_runtime_error() {
    let dir = tempfile::tempdir().unwrap();
    // 3 is not a power of two: the generator, not the parser, rejects it
    let out = chainflow(
        &["generate", "--type", "adversarial", "--ell", "3", "--kappa", "3", "--out", "a.json"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("power of two"));
}

fn write_small_instance(dir: &Path) {
    // two-function chain on a path; small enough for every solver
    std::fs::write(
        dir.join("small.json"),
        r#"{
  "mode": "graph",
  "nodes": [
    {"id": 0, "capacity": 3}, {"id": 1, "capacity": 3}, {"id": 2, "capacity": 3},
    {"id": 3, "capacity": 3}, {"id": 4, "capacity": 3}
  ],
  "edges": [[0, 1], [1, 2], [2, 3], [3, 4]],
  "functions": [[1, 2], [3]],
  "constraint": {"mode": "max_length", "value": 6},
  "requests": [
    {"s": 0, "t": 4}, {"s": 0, "t": 4}, {"s": 1, "t": 4}, {"s": 2, "t": 3},
    {"s": 0, "t": 2}, {"s": 4, "t": 0}
  ]
}"#,
    )
    .unwrap();
}

#[test]
fn run_writes_verified_results_and_metrics() {
    let dir = tempfile::tempdir().unwrap();
    write_small_instance(dir.path());
    let out = chainflow(
        &[
            "run", "--algo", "ace,greedy,offline-bb,offline-brute", "--instance", "small.json",
            "--out-dir", "results", "--metrics", "metrics.csv",
        ],
        dir.path(),
    );
    let stdout = assert_success(&out);
    assert!(stdout.contains("ace: objective="), "{stdout}");

    let instance =
        load_instance(&std::fs::read_to_string(dir.path().join("small.json")).unwrap()).unwrap();
    for name in ["ace", "greedy", "offline-bb", "offline-brute"] {
        let path = dir.path().join("results").join(format!("{name}.json"));
        let result: SolveResult =
            serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
        assert!(verify_solution(&instance, &result).unwrap().is_valid(), "{name}");
    }

    // the trace has one record per request and replays as JSON lines
    let trace = std::fs::read_to_string(dir.path().join("results/ace.trace.jsonl")).unwrap();
    assert_eq!(trace.lines().count(), instance.requests().len());
    for line in trace.lines() {
        let record: chainflow::ace::TraceRecord = serde_json::from_str(line).unwrap();
        assert!(record.admitted_count <= instance.requests().len());
    }

    // metrics rows carry the ratio against the exact offline objective
    let rows = {
        let mut reader = csv::Reader::from_path(dir.path().join("metrics.csv")).unwrap();
        reader
            .deserialize::<(String, String, usize, f64, Option<f64>, f64, Option<bool>)>()
            .collect::<Result<Vec<_>, _>>()
            .unwrap()
    };
    assert_eq!(rows.len(), 4);
    let ace_row = rows.iter().find(|r| r.1 == "ace").unwrap();
    let ratio = ace_row.4.expect("offline ran, so the ratio is present");
    assert!(ratio >= 1.0);
    assert_eq!(ace_row.6, Some(ratio <= ace_row.5));
}

#[test]
fn run_repeat_appends_rows_with_stable_objectives() {
    let dir = tempfile::tempdir().unwrap();
    write_small_instance(dir.path());
    assert_success(&chainflow(
        &[
            "run", "--algo", "ace,offline-bb", "--instance", "small.json", "--out-dir", "r",
            "--metrics", "m.csv", "--repeat", "3",
        ],
        dir.path(),
    ));
    let rows = chainflow_cli::metrics::read_rows(&dir.path().join("m.csv")).unwrap();
    assert_eq!(rows.len(), 6); // 2 algorithms × 3 repetitions
    for algo in ["ace", "offline-bb"] {
        let objectives: Vec<usize> = rows
            .iter()
            .filter(|r| r.algorithm == algo)
            .map(|r| r.objective)
            .collect();
        assert_eq!(objectives.len(), 3);
        assert!(objectives.windows(2).all(|w| w[0] == w[1]), "{algo}: {objectives:?}");
    }
}

#[test]
fn evaluate_rejects_mismatched_trace() {
    let dir = tempfile::tempdir().unwrap();
    write_small_instance(dir.path());
    assert_success(&chainflow(
        &["run", "--algo", "ace,offline-bb", "--instance", "small.json", "--out-dir", "r"],
        dir.path(),
    ));
    // truncate the trace to fewer records than the instance has requests
    let trace = std::fs::read_to_string(dir.path().join("r/ace.trace.jsonl")).unwrap();
    let truncated: Vec<&str> = trace.lines().take(2).collect();
    std::fs::write(dir.path().join("short.jsonl"), truncated.join("\n")).unwrap();
    let out = chainflow(
        &[
            "evaluate", "--instance", "small.json", "--online", "r/ace.json", "--offline",
            "r/offline-bb.json", "--trace", "short.jsonl",
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("mismatched-instance"));
}

#[test]
fn run_guard_error_is_named_and_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    // 30 identical unit requests: (1+1)^30 combinations exceed the cap
    let requests: Vec<String> = (0..30).map(|_| r#"{"candidates": [[0]]}"#.to_string()).collect();
    std::fs::write(
        dir.path().join("big.json"),
        format!(
            r#"{{"mode": "explicit", "nodes": [{{"id": 0, "capacity": 1}}], "edges": [], "requests": [{}]}}"#,
            requests.join(", ")
        ),
    )
    .unwrap();
    let out = chainflow(
        &["run", "--algo", "offline-brute", "--instance", "big.json"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(1));
    assert!(
        String::from_utf8_lossy(&out.stderr).contains("search-space-too-large"),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn evaluate_reports_ratio_and_bound() {
    let dir = tempfile::tempdir().unwrap();
    write_small_instance(dir.path());
    assert_success(&chainflow(
        &[
            "run", "--algo", "ace,offline-brute", "--instance", "small.json", "--out-dir", "r",
        ],
        dir.path(),
    ));
    let out = chainflow(
        &[
            "evaluate", "--instance", "small.json", "--online", "r/ace.json", "--offline",
            "r/offline-brute.json", "--trace", "r/ace.trace.jsonl", "--out", "report.json",
        ],
        dir.path(),
    );
    let stdout = assert_success(&out);
    let report: serde_json::Value = serde_json::from_str(&stdout).unwrap();
    // ℓ = 2: the admission bound is 1 + 2·log2(6)
    assert!((report["bound"].as_f64().unwrap() - 6.169925001442312).abs() < 1e-9);
    let ratio = report["ratio"].as_f64().unwrap();
    assert!(ratio >= 1.0 && ratio <= report["bound"].as_f64().unwrap());
    assert_eq!(report["bound_satisfied"], serde_json::json!(true));
    assert!(report["weight_bound_residual"].as_f64().unwrap() <= 0.0);
    assert!(report["rejection_bound_residual"].as_f64().unwrap() <= 1e-9);
    assert_eq!(
        std::fs::read_to_string(dir.path().join("report.json")).unwrap(),
        stdout
    );
}

#[test]
fn evaluate_equal_results_give_ratio_one() {
    let dir = tempfile::tempdir().unwrap();
    write_small_instance(dir.path());
    assert_success(&chainflow(
        &["run", "--algo", "offline-bb", "--instance", "small.json", "--out-dir", "r"],
        dir.path(),
    ));
    let out = chainflow(
        &[
            "evaluate", "--instance", "small.json", "--online", "r/offline-bb.json",
            "--offline", "r/offline-bb.json",
        ],
        dir.path(),
    );
    let stdout = assert_success(&out);
    let report: serde_json::Value = serde_json::from_str(&stdout).unwrap();
    assert_eq!(report["ratio"].as_f64(), Some(1.0));
}

#[test]
fn evaluate_rejects_results_from_another_instance() {
    let dir = tempfile::tempdir().unwrap();
    write_small_instance(dir.path());
    assert_success(&chainflow(
        &["run", "--algo", "ace", "--instance", "small.json", "--out-dir", "r"],
        dir.path(),
    ));
    // a different instance that cannot host the recorded assignment
    std::fs::write(
        dir.path().join("other.json"),
        r#"{"mode": "explicit", "nodes": [{"id": 0, "capacity": 1}], "edges": [], "requests": [{"candidates": [[0]]}]}"#,
    )
    .unwrap();
    let out = chainflow(
        &[
            "evaluate", "--instance", "other.json", "--online", "r/ace.json", "--offline",
            "r/ace.json",
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(1));
    assert!(
        String::from_utf8_lossy(&out.stderr).contains("mismatched-instance"),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn export_ilp_enumeration_guard_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    // 8 function types with 10 instances each: 10^8 chains exceed the cap
    let ids: Vec<String> = (0..10).map(|i| i.to_string()).collect();
    let function = format!("[{}]", ids.join(", "));
    let nodes: Vec<String> = (0..10)
        .map(|i| format!(r#"{{"id": {i}, "capacity": 3}}"#))
        .collect();
    std::fs::write(
        dir.path().join("huge.json"),
        format!(
            r#"{{"mode": "graph", "nodes": [{}], "edges": [[0, 1]],
               "functions": [{}],
               "constraint": {{"mode": "max_length", "value": 5}},
               "requests": [{{"s": 0, "t": 1}}]}}"#,
            nodes.join(", "),
            vec![function; 8].join(", ")
        ),
    )
    .unwrap();
    let out = chainflow(
        &["export-ilp", "--instance", "huge.json", "--out", "huge.lp"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(1));
    assert!(
        String::from_utf8_lossy(&out.stderr).contains("chain-enumeration-too-large"),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn export_ilp_is_deterministic_and_parses() {
    let dir = tempfile::tempdir().unwrap();
    write_small_instance(dir.path());
    assert_success(&chainflow(
        &["export-ilp", "--instance", "small.json", "--out", "m1.lp"],
        dir.path(),
    ));
    assert_success(&chainflow(
        &["export-ilp", "--instance", "small.json", "--out", "m2.lp"],
        dir.path(),
    ));
    let a = std::fs::read_to_string(dir.path().join("m1.lp")).unwrap();
    let b = std::fs::read_to_string(dir.path().join("m2.lp")).unwrap();
    assert_eq!(a, b);
    let summary = parse_lp(&a).unwrap();
    assert!(!summary.binaries.is_empty() && !summary.rows.is_empty());
}
