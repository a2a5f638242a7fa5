//! End-to-end CLI behavior: output formats, flag validation, exit codes.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_blindspot"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn blindspot")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

struct Workspace {
    dir: tempfile::TempDir,
}

impl Workspace {
    fn new() -> Self {
        Workspace {
            dir: tempfile::tempdir().unwrap(),
        }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn arg(&self, name: &str) -> String {
        self.path(name).to_str().unwrap().to_string()
    }

    /// Generates a small trace + metadata and returns their paths.
    fn with_trace(&self) -> (String, String) {
        std::fs::write(
            self.path("config.json"),
            r#"{"n_pois": 18, "n_cycles": 8, "n_clusters": 4,
               "shock_cycles": [5], "seed": 3}"#,
        )
        .unwrap();
        let trace = self.arg("trace.csv");
        let meta = self.arg("meta.csv");
        let out = run(&[
            "generate", "--config", &self.arg("config.json"),
            "--out", &trace, "--meta-out", &meta,
        ]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        (trace, meta)
    }
}

fn first_line(path: &Path) -> String {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .next()
        .unwrap()
        .to_string()
}

#[test]
fn generate_writes_trace_and_metadata() {
    let ws = Workspace::new();
    let (trace, meta) = ws.with_trace();
    assert_eq!(first_line(Path::new(&trace)), "poi_id,cycle,state");
    assert_eq!(first_line(Path::new(&meta)), "poi_id,cost,value");
    let rows = std::fs::read_to_string(&trace).unwrap().lines().count();
    assert_eq!(rows, 1 + 18 * 8);
}

#[test]
fn correlate_then_select_pipeline() {
    let ws = Workspace::new();
    let (trace, meta) = ws.with_trace();
    let graph = ws.arg("graph.csv");
    let out = run(&[
        "correlate", "--trace", &trace, "--metric", "kt",
        "--threshold", "0.6", "--horizon", "7", "--out", &graph,
    ]);
    assert!(out.status.success());
    let text = std::fs::read_to_string(&graph).unwrap();
    assert!(text.starts_with("# metric=kendall_tau threshold=0.6 horizon=7\n"));
    assert_eq!(text.lines().nth(1).unwrap(), "source,target,weight");

    for algorithm in ["static", "dynamic", "oracle"] {
        let sel = ws.arg(&format!("sel_{algorithm}.csv"));
        let out = run(&[
            "select", "--graph", &graph, "--meta", &meta,
            "--budget", "5", "--algorithm", algorithm, "--out", &sel,
        ]);
        assert!(out.status.success(), "{algorithm}: {}", String::from_utf8_lossy(&out.stderr));
        let text = std::fs::read_to_string(&sel).unwrap();
        assert_eq!(text.lines().next().unwrap(), "rank,poi_id,cost,weighted_value_at_pick");
        // unit costs, budget 5 -> at most 5 picks
        assert!(text.lines().count() <= 6);
    }
}

#[test]
fn predict_with_known_file() {
    let ws = Workspace::new();
    let (trace, _) = ws.with_trace();
    let known = ws.arg("known.csv");
    std::fs::write(&known, "poi_id\npoi00000\npoi00005\npoi00011\n").unwrap();
    let pred = ws.arg("pred.csv");
    let out = run(&[
        "predict", "--trace", &trace, "--cycle", "5", "--predictor", "last",
        "--known-file", &known, "--seed", "1", "--out", &pred,
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&pred).unwrap();
    assert_eq!(text.lines().next().unwrap(), "poi_id,cycle,predicted_state,mode_used");
    // 18 POIs minus 3 known
    assert_eq!(text.lines().count(), 1 + 15);
    assert!(text.lines().skip(1).all(|l| l.contains(",5,")));
}

#[test]
fn evaluate_writes_curves_and_overage() {
    let ws = Workspace::new();
    let (trace, _) = ws.with_trace();
    std::fs::write(
        ws.path("spec.json"),
        r#"{"eval_cycles": [5], "fractions": [0.25], "trials": 4,
           "predictors": [{"kind": "random"}, {"kind": "last_known_state"},
                          {"kind": "majority"}, {"kind": "best_proxy_kt"},
                          {"kind": "hybrid"}],
           "master_seed": 1}"#,
    )
    .unwrap();
    let out_dir = ws.arg("eval");
    let out = run(&[
        "evaluate", "--trace", &trace, "--spec", &ws.arg("spec.json"),
        "--out-dir", &out_dir,
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let results = std::fs::read_to_string(ws.path("eval/results.csv")).unwrap();
    assert_eq!(
        results.lines().next().unwrap(),
        "algorithm,cycle,fraction,mean_error,std_error,trials"
    );
    assert_eq!(results.lines().count(), 1 + 5);
    let overage = std::fs::read_to_string(ws.path("eval/overage.csv")).unwrap();
    assert_eq!(
        overage.lines().next().unwrap(),
        "algorithm,fraction,worst_case_overage"
    );
    // every algorithm gets an overage row; the hybrid's must be present
    assert!(overage.lines().skip(1).any(|l| l.starts_with("hybrid,")));
    assert_eq!(overage.lines().count(), 1 + 5);
}

#[test]
fn usage_errors_exit_1() {
    // unknown flag
    assert_eq!(code(&run(&["generate", "--bogus"])), 1);
    // predict requires exactly one of --known / --known-file
    let ws = Workspace::new();
    let (trace, _) = ws.with_trace();
    let out = run(&[
        "predict", "--trace", &trace, "--cycle", "5", "--predictor", "last",
        "--seed", "1", "--out", &ws.arg("p.csv"),
    ]);
    assert_eq!(code(&out), 1);
    // --adaptive conflicts with --threshold
    let out = run(&[
        "predict", "--trace", &trace, "--cycle", "5", "--predictor", "hybrid",
        "--threshold", "0.4", "--adaptive", "--known", "0.3",
        "--seed", "1", "--out", &ws.arg("p.csv"),
    ]);
    assert_eq!(code(&out), 1);
    // random selection without a seed
    let out = run(&[
        "select", "--graph", &ws.arg("missing.csv"), "--meta", &ws.arg("m.csv"),
        "--budget", "1", "--algorithm", "random", "--out", &ws.arg("s.csv"),
    ]);
    assert_eq!(code(&out), 2); // missing file reported first...
    // invalid generator config
    std::fs::write(ws.path("bad.json"), r#"{"n_pois": 0, "n_cycles": 3, "n_clusters": 1, "seed": 0}"#).unwrap();
    let out = run(&[
        "generate", "--config", &ws.arg("bad.json"), "--out", &ws.arg("t.csv"),
    ]);
    assert_eq!(code(&out), 1);
}

#[test]
fn data_errors_exit_2() {
    let ws = Workspace::new();
    // nonexistent trace
    let out = run(&[
        "correlate", "--trace", &ws.arg("nope.csv"), "--metric", "kt",
        "--threshold", "0.5", "--horizon", "3", "--out", &ws.arg("g.csv"),
    ]);
    assert_eq!(code(&out), 2);
    // malformed trace (non-binary state)
    std::fs::write(ws.path("bad.csv"), "poi_id,cycle,state\na,1,7\n").unwrap();
    let out = run(&[
        "correlate", "--trace", &ws.arg("bad.csv"), "--metric", "kt",
        "--threshold", "0.5", "--horizon", "1", "--out", &ws.arg("g.csv"),
    ]);
    assert_eq!(code(&out), 2);
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("error:"), "stderr: {stderr}");
}

#[test]
fn help_and_version_exit_0() {
    assert_eq!(code(&run(&["--help"])), 0);
    assert_eq!(code(&run(&["--version"])), 0);
    assert_eq!(code(&run(&["predict", "--help"])), 0);
}
