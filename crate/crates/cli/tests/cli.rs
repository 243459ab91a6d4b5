use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn small() -> String {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../core/fixtures/small")
        .display()
        .to_string()
}

fn redispatch(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_redispatch")).args(args).output().unwrap()
}

fn run_ok(args: &[&str]) {
    let out = redispatch(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

fn out_dir(tmp: &tempfile::TempDir, name: &str) -> (PathBuf, String) {
    let p = tmp.path().join(name);
    let s = p.display().to_string();
    (p, s)
}

fn manifest(dir: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(dir.join("MANIFEST.json")).unwrap()).unwrap()
}

#[test]
fn missing_source_is_a_config_error() {
    let out = redispatch(&["solve"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("exactly one"));
}

#[test]
fn two_sources_are_a_config_error() {
    let out = redispatch(&["solve", "--data", &small(), "--synth", "4,2,3,8"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn non_positive_time_limit_is_a_config_error() {
    let out = redispatch(&["solve", "--data", &small(), "--time-limit", "0"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn missing_data_dir_is_a_runtime_error() {
    let tmp = tempfile::tempdir().unwrap();
    let (_, out) = out_dir(&tmp, "out");
    let missing = tmp.path().join("nowhere").display().to_string();
    let res = redispatch(&["solve", "--data", &missing, "--out", &out]);
    assert_eq!(res.status.code(), Some(3));
}

#[test]
fn unknown_config_key_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("run.toml");
    fs::write(&cfg, "sede = 3\n").unwrap();
    let res = redispatch(&["solve", "--config", &cfg.display().to_string()]);
    assert_eq!(res.status.code(), Some(2));
}

#[test]
fn sampler_experiment_rejects_decomposer() {
    let res = redispatch(&["experiment", "penalty-norm", "--data", &small(), "--solver", "alpha"]);
    assert_eq!(res.status.code(), Some(2));
}

#[test]
fn config_file_overrides_flags() {
    let tmp = tempfile::tempdir().unwrap();
    let (dir, out) = out_dir(&tmp, "out");
    let cfg = tmp.path().join("run.toml");
    fs::write(&cfg, format!("data = {:?}\nseed = 9\niterations = 500\n", small())).unwrap();
    run_ok(&["solve", "--seed", "1", "--config", &cfg.display().to_string(), "--out", &out]);
    let m = manifest(&dir);
    assert_eq!(m["seeds"], serde_json::json!([9]));
    assert_eq!(m["config"]["seed"], serde_json::json!(9));
}

#[test]
fn build_then_solve_from_instance() {
    let tmp = tempfile::tempdir().unwrap();
    let (built, built_s) = out_dir(&tmp, "built");
    run_ok(&["build-instance", "--data", &small(), "--preset", "l", "--out", &built_s]);
    for f in ["instance.json", "qubo.csv", "MANIFEST.json"] {
        assert!(built.join(f).exists(), "{f} missing");
    }
    let m = manifest(&built);
    assert_eq!(m["inputs"].as_object().unwrap().len(), 5);
    assert_eq!(m["config_hash"].as_str().unwrap().len(), 64);
    let inst: serde_json::Value = serde_json::from_str(&fs::read_to_string(built.join("instance.json")).unwrap()).unwrap();
    assert_eq!((inst["timepoints"].as_u64(), inst["states"].as_u64()), (Some(8), Some(5)));

    let (solved, solved_s) = out_dir(&tmp, "solved");
    let instance = built.join("instance.json").display().to_string();
    run_ok(&["solve", "--instance", &instance, "--solver", "alpha", "--out", &solved_s]);
    for f in ["solution.csv", "summary.csv", "trace.csv", "progress.csv", "report.json"] {
        assert!(solved.join(f).exists(), "{f} missing");
    }
    let summary = fs::read_to_string(solved.join("summary.csv")).unwrap();
    assert!(summary.contains("one_hot,true"));
    assert!(summary.contains("adjacency_feasible,true"));
    assert!(!summary.to_lowercase().contains("nan"));
    let solution = fs::read_to_string(solved.join("solution.csv")).unwrap();
    assert_eq!(solution.lines().count(), 1 + 8 * 4);
}

#[test]
fn out_dir_does_not_change_config_hash() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, a_s) = out_dir(&tmp, "a");
    let (b, b_s) = out_dir(&tmp, "b");
    run_ok(&["build-instance", "--data", &small(), "--out", &a_s]);
    run_ok(&["build-instance", "--data", &small(), "--out", &b_s]);
    assert_eq!(manifest(&a)["config_hash"], manifest(&b)["config_hash"]);
    assert_eq!(manifest(&a)["inputs"], manifest(&b)["inputs"]);
}

#[test]
fn estimate_sensitivity_writes_fit_diagnostics() {
    let tmp = tempfile::tempdir().unwrap();
    let (dir, out) = out_dir(&tmp, "fit");
    run_ok(&["estimate-sensitivity", "--synth", "5,3,5,64", "--seed", "2", "--out", &out]);
    let s = fs::read_to_string(dir.join("sensitivity.csv")).unwrap();
    assert_eq!(s.lines().count(), 1 + 8);
    assert!(s.lines().next().unwrap().starts_with("element,line_0000"));
    let trace = fs::read_to_string(dir.join("loss_trace.csv")).unwrap();
    let losses: Vec<f64> = trace.lines().skip(1).map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect();
    assert!(losses.windows(2).all(|w| w[1] <= w[0]));
    let summary = fs::read_to_string(dir.join("fit_summary.csv")).unwrap();
    assert!(summary.contains("relative_error,"));
    assert!(!summary.contains("relative_error,n/a"));
}

#[test]
fn estimate_sensitivity_needs_a_network() {
    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("instance.json");
    fs::write(&path, "{}").unwrap();
    let res = redispatch(&["estimate-sensitivity", "--instance", &path.display().to_string()]);
    assert_eq!(res.status.code(), Some(2));
}

#[test]
fn experiments_write_their_tables() {
    let tmp = tempfile::tempdir().unwrap();
    let cases: [(&str, &[&str], &[&str]); 4] = [
        ("penalty-norm", &["--iterations", "1000"], &["penalty_norm_runs.csv", "penalty_norm_summary.csv"]),
        (
            "score-norm",
            &["--iterations", "1000", "--samples", "50"],
            &["score_norm_distribution.csv", "score_norm_runs.csv", "score_norm_summary.csv"],
        ),
        ("decomposers", &["--max-steps", "10"], &["decomposers_runs.csv", "decomposers_summary.csv"]),
        ("timeseries", &["--max-steps", "10"], &["timeseries.csv"]),
    ];
    let data = small();
    for (kind, extra, files) in cases {
        let (dir, out) = out_dir(&tmp, kind);
        let mut args = vec!["experiment", kind, "--data", &data, "--repetitions", "2", "--out", &out];
        args.extend_from_slice(extra);
        run_ok(&args);
        assert!(dir.join("MANIFEST.json").exists());
        assert_eq!(manifest(&dir)["seeds"], serde_json::json!([0, 1]));
        for f in files {
            let text = fs::read_to_string(dir.join(f)).unwrap_or_else(|_| panic!("{kind}: {f} missing"));
            assert!(text.lines().count() > 1, "{kind}: {f} is empty");
            assert!(!text.contains("NaN") && !text.contains("inf"), "{kind}: {f} has non-finite cells");
        }
    }
    let summary = fs::read_to_string(tmp.path().join("decomposers/decomposers_summary.csv")).unwrap();
    assert!(summary.lines().any(|l| l.starts_with("roof-dual,unavailable")));
}
