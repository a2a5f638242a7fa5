//! Acceptance gate: one test per criterion, each printing a single
//! PASS/FAIL line (visible with `--nocapture`) before asserting.

use std::collections::BTreeMap;
use std::process::Command;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use blindspot::correlation::{
    change_correlation, kendall_tau, CorrelationGraph, CorrelationMetric,
};
use blindspot::evaluation::{
    run_experiment, worst_case_overage, ExperimentCurve, ExperimentSpec, PredictorSpec,
    SelectorKind, OVERAGE_BASELINES,
};
use blindspot::model::{change_series, PoiId, Scenario, StateSeries};
use blindspot::prediction::misprediction_model;
use blindspot::scenario::{generate, GeneratorConfig};
use blindspot::selection::{
    coverage_objective, dynamic_greedy, exhaustive_oracle, random_selection, static_greedy,
    CreditStrategy, SelectionProblem,
};

fn verdict(number: usize, name: &str, pass: bool, detail: &str) {
    println!(
        "acceptance {number} ({name}): {} ({detail})",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(pass, "criterion {number} ({name}) failed: {detail}");
}

// ---------------------------------------------------------------------------
// criterion 1: correlation exactness against brute force
// ---------------------------------------------------------------------------

#[test]
fn criterion_1_correlation_exactness() {
    let mut rng = ChaCha8Rng::seed_from_u64(0xC0FFEE);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let len = rng.gen_range(1..=30);
        let xs: Vec<u8> = (0..len).map(|_| rng.gen_range(0..=1)).collect();
        let ys: Vec<u8> = (0..len).map(|_| rng.gen_range(0..=1)).collect();

        // brute force agreement score: 1 - (#disagreements / n)
        let matches = xs.iter().zip(&ys).filter(|(a, b)| a == b).count();
        let kt_expected = matches as f64 / len as f64;

        // brute force change agreement with the implicit all-available
        // cycle 0: numerator restricted to cycles where the proxy changed
        let delta = |states: &[u8], i: usize| -> i8 {
            let prev = if i == 0 { 1 } else { states[i - 1] };
            states[i] as i8 - prev as i8
        };
        let mut denom = 0usize;
        let mut num = 0usize;
        for i in 0..len {
            if delta(&ys, i) != 0 {
                denom += 1;
                if delta(&xs, i) == delta(&ys, i) {
                    num += 1;
                }
            }
        }
        let cc_expected = if denom == 0 {
            0.0
        } else {
            num as f64 / denom as f64
        };

        let x = StateSeries::new(xs).unwrap();
        let y = StateSeries::new(ys).unwrap();
        let kt = kendall_tau(&x, &y).unwrap();
        let cc =
            change_correlation(&change_series(&x).unwrap(), &change_series(&y).unwrap()).unwrap();
        worst = worst.max((kt - kt_expected).abs()).max((cc - cc_expected).abs());
    }
    verdict(
        1,
        "correlation exactness",
        worst <= 1e-12,
        &format!("1000 random pairs, max |metric - brute force| = {worst:.2e}"),
    );
}

// ---------------------------------------------------------------------------
// criterion 2: threshold derivation from the misprediction model
// ---------------------------------------------------------------------------

#[test]
fn criterion_2_threshold_derivation() {
    let mut worst_gap: f64 = 0.0;
    let mut identity_holds = true;
    for mi in 0..=10 {
        for fi in 0..=10 {
            let m = mi as f64 / 10.0;
            let f = fi as f64 / 10.0;
            let mut best = (f64::INFINITY, 0.0);
            for li in 0..=100 {
                let l = li as f64 / 100.0;
                let model = misprediction_model(l, m, f).unwrap();
                if model.total != model.spatial + model.temporal {
                    identity_holds = false;
                }
                if model.total < best.0 {
                    best = (model.total, l);
                }
            }
            worst_gap = worst_gap.max((best.1 - (1.0 - f)).abs());
        }
    }
    verdict(
        2,
        "threshold derivation",
        worst_gap <= 0.01 + 1e-9 && identity_holds,
        &format!(
            "max |argmin - (1 - F)| = {worst_gap:.3} over the 11x11 grid, \
             total = spatial + temporal: {identity_holds}"
        ),
    );
}

// ---------------------------------------------------------------------------
// criteria 3 and 6 share the ten calm-then-shock acceptance scenarios:
// rare background churn, a supply shock at cycle 6 that pulls roughly a
// fifth of the clusters offline, and a slow ramped recovery.
// ---------------------------------------------------------------------------

fn acceptance_scenario(seed: u64) -> Scenario {
    let cfg = GeneratorConfig {
        n_pois: 100,
        n_cycles: 10,
        n_clusters: 25,
        intra_cluster_agreement: 0.95,
        calm_change_rate: 0.01,
        shock_cycles: [6].into(),
        shock_change_rate: 0.2,
        recovery_bias: 0.0,
        seed,
    };
    generate(&cfg).unwrap()
}

fn fraction_grid() -> Vec<f64> {
    (1..=10).map(|i| i as f64 * 0.05).collect()
}

fn curve_at<'a>(curves: &'a [ExperimentCurve], algorithm: &str, cycle: usize) -> &'a ExperimentCurve {
    curves
        .iter()
        .find(|c| c.algorithm == algorithm && c.cycle == cycle)
        .unwrap_or_else(|| panic!("missing curve {algorithm}/{cycle}"))
}

#[test]
fn criterion_3_hybrid_worst_case_overage() {
    let mut passing = 0usize;
    let mut worsts = Vec::new();
    for seed in 0..10u64 {
        let scenario = acceptance_scenario(seed);
        let spec = ExperimentSpec {
            eval_cycles: (2..=10).collect(),
            fractions: fraction_grid(),
            trials: 50,
            predictors: vec![
                PredictorSpec::Random,
                PredictorSpec::LastKnownState,
                PredictorSpec::Majority,
                PredictorSpec::BestProxyKt,
                PredictorSpec::Hybrid {
                    threshold: None,
                    adaptive: false,
                },
            ],
            selectors: vec![SelectorKind::RandomMask],
            metrics: vec![CorrelationMetric::ChangeCorrelation],
            graph_threshold: 0.5,
            selection_trials: 1,
            master_seed: 1000 + seed,
        };
        let curves = run_experiment(&scenario, &spec).unwrap();
        let report = worst_case_overage(&curves, &OVERAGE_BASELINES).unwrap();
        let worst = report.overage["hybrid"]
            .iter()
            .cloned()
            .fold(f64::NEG_INFINITY, f64::max);
        if worst <= 0.02 {
            passing += 1;
        }
        worsts.push(worst);
    }
    let overall = worsts.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    verdict(
        3,
        "hybrid worst-case overage",
        passing >= 9,
        &format!("{passing}/10 seeds within 0.02, worst overage {overall:.3}"),
    );
}

// ---------------------------------------------------------------------------
// criterion 4: regime switching on a learnable outage-then-recovery trace.
// The early shock (cycle 3) teaches the change correlations; the recovery
// surge (cycle 10) is where the spatial branch must pay off.
// ---------------------------------------------------------------------------

#[test]
fn criterion_4_regime_switching() {
    let mut pass = true;
    let mut details = Vec::new();
    for seed in 0..3u64 {
        let cfg = GeneratorConfig {
            n_pois: 100,
            n_cycles: 10,
            n_clusters: 8,
            intra_cluster_agreement: 0.95,
            calm_change_rate: 0.005,
            shock_cycles: [3, 10].into(),
            shock_change_rate: 0.9,
            recovery_bias: 0.3,
            seed,
        };
        let scenario = generate(&cfg).unwrap();
        let spec = ExperimentSpec {
            eval_cycles: (2..=10).collect(),
            fractions: vec![0.3],
            trials: 50,
            predictors: vec![
                PredictorSpec::LastKnownState,
                PredictorSpec::Hybrid {
                    threshold: None,
                    adaptive: false,
                },
            ],
            selectors: vec![SelectorKind::RandomMask],
            metrics: vec![CorrelationMetric::ChangeCorrelation],
            graph_threshold: 0.5,
            selection_trials: 1,
            master_seed: 7 + seed,
        };
        let curves = run_experiment(&scenario, &spec).unwrap();
        let error_at = |algorithm: &str, cycle: usize| -> f64 {
            curve_at(&curves, algorithm, cycle).points[0].mean_error
        };

        // calm regime: on every cycle with under 5% realized change the
        // hybrid must track the temporal baseline
        let mut calm_cycles = 0usize;
        for cycle in 2..=9 {
            if scenario.realized_change_fraction(cycle) < 0.05 {
                calm_cycles += 1;
                let gap = (error_at("hybrid", cycle) - error_at("last_known_state", cycle)).abs();
                if gap > 0.01 {
                    pass = false;
                    details.push(format!("seed {seed} calm cycle {cycle} gap {gap:.3}"));
                }
            }
        }
        if calm_cycles == 0 {
            pass = false;
            details.push(format!("seed {seed} has no calm cycle"));
        }

        // shock regime: strictly better than last-known-state on the surge
        let lks = error_at("last_known_state", 10);
        let hybrid = error_at("hybrid", 10);
        if hybrid >= lks {
            pass = false;
        }
        details.push(format!("seed {seed} shock: hybrid {hybrid:.3} vs temporal {lks:.3}"));
    }
    verdict(4, "regime switching", pass, &details.join("; "));
}

// ---------------------------------------------------------------------------
// criterion 5: greedy vs the exhaustive oracle
// ---------------------------------------------------------------------------

fn random_problem(rng: &mut ChaCha8Rng) -> SelectionProblem {
    let n = rng.gen_range(4..=12usize);
    let mut edges = BTreeMap::new();
    for src in 0..n {
        for dst in 0..n {
            if src != dst && rng.gen_bool(0.35) {
                let w = rng.gen_range(0.3..1.0);
                edges.insert((PoiId(src as u32), PoiId(dst as u32)), w);
            }
        }
    }
    let labels: Vec<String> = (0..n).map(|i| format!("poi{i:05}")).collect();
    let graph =
        CorrelationGraph::new(labels, edges, CorrelationMetric::ChangeCorrelation, 0.0, 1).unwrap();
    let budget = (n / 3) as f64;
    SelectionProblem::new(graph, vec![1.0; n], vec![1.0; n], budget).unwrap()
}

/// Two mutually-predicting hub twins covering the same leaves (one at a
/// hair less weight), plus a modest standalone predictor. Ranked statically
/// the twins both look valuable — each is credited for predicting the other
/// — so static greedy double-selects them; the dynamic ranking sees the
/// second twin is nearly worthless once the first is in.
fn twin_problem(leaves: usize, twin_weight: f64, side_weight: f64) -> SelectionProblem {
    // nodes: 0, 1 = twins; 2 = side predictor; 3 = side's target; 4.. = leaves
    let n = 4 + leaves;
    let mut edges = BTreeMap::new();
    for leaf in 4..n {
        edges.insert((PoiId(0), PoiId(leaf as u32)), twin_weight);
        edges.insert((PoiId(1), PoiId(leaf as u32)), twin_weight - 0.01);
    }
    edges.insert((PoiId(0), PoiId(1)), 0.95);
    edges.insert((PoiId(1), PoiId(0)), 0.95);
    edges.insert((PoiId(2), PoiId(3)), side_weight);
    let labels: Vec<String> = (0..n).map(|i| format!("poi{i:05}")).collect();
    let graph =
        CorrelationGraph::new(labels, edges, CorrelationMetric::ChangeCorrelation, 0.0, 1).unwrap();
    SelectionProblem::new(graph, vec![1.0; n], vec![1.0; n], 2.0).unwrap()
}

#[test]
fn criterion_5_greedy_vs_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5E1EC7);
    let mut static_ratio_sum = 0.0;
    let mut dynamic_ratio_sum = 0.0;
    for _ in 0..100 {
        let problem = random_problem(&mut rng);
        let oracle = exhaustive_oracle(&problem, |s| coverage_objective(&problem, s)).unwrap();
        let oracle_obj = coverage_objective(&problem, &oracle.selected_set());
        let st = coverage_objective(
            &problem,
            &static_greedy(&problem, CreditStrategy::MaxPredictor).selected_set(),
        );
        let dy = coverage_objective(
            &problem,
            &dynamic_greedy(&problem, CreditStrategy::MaxPredictor).selected_set(),
        );
        static_ratio_sum += st / oracle_obj;
        dynamic_ratio_sum += dy / oracle_obj;
    }
    let static_avg = static_ratio_sum / 100.0;
    let dynamic_avg = dynamic_ratio_sum / 100.0;

    let mut twins_ok = true;
    let mut twin_margin: f64 = f64::INFINITY;
    for leaves in [3usize, 5, 8] {
        for (tw, sw) in [(0.9, 0.8), (0.8, 0.6), (0.95, 0.5)] {
            let problem = twin_problem(leaves, tw, sw);
            let st_result = static_greedy(&problem, CreditStrategy::MaxPredictor);
            assert_eq!(
                st_result.selected_set(),
                [PoiId(0), PoiId(1)].into(),
                "static must double-select the twins for the family to bite"
            );
            let st = coverage_objective(&problem, &st_result.selected_set());
            let dy = coverage_objective(
                &problem,
                &dynamic_greedy(&problem, CreditStrategy::MaxPredictor).selected_set(),
            );
            twins_ok &= dy >= st;
            twin_margin = twin_margin.min(dy - st);
        }
    }
    verdict(
        5,
        "greedy vs exhaustive oracle",
        static_avg >= 0.7 && dynamic_avg >= 0.7 && twins_ok,
        &format!(
            "avg objective ratio static {static_avg:.3} / dynamic {dynamic_avg:.3}, \
             twin-family min margin {twin_margin:.3}"
        ),
    );
}

// ---------------------------------------------------------------------------
// criterion 6: informed selection beats random querying
// ---------------------------------------------------------------------------

#[test]
fn criterion_6_selection_beats_random() {
    let fractions = fraction_grid();
    let mut dynamic_sum = vec![0.0; fractions.len()];
    let mut random_sum = vec![0.0; fractions.len()];
    for seed in 0..10u64 {
        let scenario = acceptance_scenario(seed);
        let spec = ExperimentSpec {
            eval_cycles: (2..=10).collect(),
            fractions: fractions.clone(),
            trials: 1,
            predictors: vec![],
            selectors: vec![SelectorKind::DynamicGreedy, SelectorKind::RandomSelection],
            metrics: vec![CorrelationMetric::KendallTau],
            graph_threshold: 0.5,
            selection_trials: 30,
            master_seed: 1000 + seed,
        };
        let curves = run_experiment(&scenario, &spec).unwrap();
        for cycle in 2..=10 {
            for i in 0..fractions.len() {
                dynamic_sum[i] += curve_at(&curves, "dynamic_greedy+kt", cycle).points[i].mean_error;
                random_sum[i] +=
                    curve_at(&curves, "random_selection+kt", cycle).points[i].mean_error;
            }
        }
    }
    let cells = 90.0; // 10 scenarios x 9 cycles
    let pass = (0..fractions.len()).all(|i| dynamic_sum[i] <= random_sum[i]);
    let worst_idx = (0..fractions.len())
        .max_by(|&a, &b| {
            (dynamic_sum[a] - random_sum[a])
                .partial_cmp(&(dynamic_sum[b] - random_sum[b]))
                .unwrap()
        })
        .unwrap();
    verdict(
        6,
        "selection beats random",
        pass,
        &format!(
            "closest fraction {:.2}: dynamic {:.4} vs random {:.4} (30 random seeds)",
            fractions[worst_idx],
            dynamic_sum[worst_idx] / cells,
            random_sum[worst_idx] / cells
        ),
    );
}

// ---------------------------------------------------------------------------
// criterion 7: budget safety under fuzzing and byte-identical CLI reruns
// ---------------------------------------------------------------------------

fn fuzz_problem(rng: &mut ChaCha8Rng) -> SelectionProblem {
    let n = rng.gen_range(2..=15usize);
    let mut edges = BTreeMap::new();
    for src in 0..n {
        for dst in 0..n {
            if src != dst && rng.gen_bool(0.4) {
                edges.insert((PoiId(src as u32), PoiId(dst as u32)), rng.gen_range(0.0..1.0));
            }
        }
    }
    let labels: Vec<String> = (0..n).map(|i| format!("poi{i:05}")).collect();
    let graph =
        CorrelationGraph::new(labels, edges, CorrelationMetric::KendallTau, 0.0, 1).unwrap();
    let costs: Vec<f64> = (0..n).map(|_| rng.gen_range(0.2..3.0)).collect();
    let values: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..2.0)).collect();
    let budget = rng.gen_range(0.0..costs.iter().sum::<f64>() * 1.2);
    SelectionProblem::new(graph, costs, values, budget).unwrap()
}

fn run_cli(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_blindspot"))
        .args(args)
        .output()
        .expect("spawn blindspot")
}

#[test]
fn criterion_7_budget_safety_and_determinism() {
    // budget safety fuzz across all selection algorithms
    let mut rng = ChaCha8Rng::seed_from_u64(0xF02B);
    let mut violations = 0usize;
    let mut runs = 0usize;
    for trial in 0..300u64 {
        let problem = fuzz_problem(&mut rng);
        let mut results = vec![
            static_greedy(&problem, CreditStrategy::MaxPredictor),
            static_greedy(&problem, CreditStrategy::FullSum),
            dynamic_greedy(&problem, CreditStrategy::MaxPredictor),
            dynamic_greedy(&problem, CreditStrategy::FullSum),
            random_selection(&problem, trial),
        ];
        if problem.n() <= 15 {
            results.push(
                exhaustive_oracle(&problem, |s| coverage_objective(&problem, s)).unwrap(),
            );
        }
        for result in results {
            runs += 1;
            let recomputed: f64 = result.selected.iter().map(|&id| problem.cost(id)).sum();
            if result.total_cost > problem.budget() || recomputed > problem.budget() {
                violations += 1;
            }
        }
    }

    // byte-identical reruns of every CLI command
    let dir = tempfile::tempdir().unwrap();
    let path = |name: &str| dir.path().join(name).to_str().unwrap().to_string();
    let config = path("config.json");
    std::fs::write(
        &config,
        r#"{"n_pois": 30, "n_cycles": 8, "n_clusters": 6,
           "shock_cycles": [5], "seed": 11}"#,
    )
    .unwrap();
    let eval_spec = path("spec.json");
    std::fs::write(
        &eval_spec,
        r#"{"eval_cycles": [5, 7], "fractions": [0.2, 0.4], "trials": 5,
           "predictors": [{"kind": "last_known_state"}, {"kind": "majority"},
                          {"kind": "hybrid"}],
           "selectors": ["random_mask", "dynamic_greedy", "random_selection"],
           "selection_trials": 5, "master_seed": 3}"#,
    )
    .unwrap();

    let trace = path("trace.csv");
    let meta = path("meta.csv");
    let commands: Vec<Vec<String>> = vec![
        vec![
            "generate".into(), "--config".into(), config.clone(),
            "--out".into(), trace.clone(), "--meta-out".into(), meta.clone(),
        ],
        vec![
            "correlate".into(), "--trace".into(), trace.clone(), "--metric".into(),
            "change".into(), "--threshold".into(), "0.5".into(),
            "--horizon".into(), "6".into(), "--out".into(), path("graph.csv"),
        ],
        vec![
            "predict".into(), "--trace".into(), trace.clone(), "--cycle".into(), "6".into(),
            "--predictor".into(), "hybrid".into(), "--known".into(), "0.3".into(),
            "--seed".into(), "9".into(), "--out".into(), path("pred.csv"),
        ],
        vec![
            "select".into(), "--graph".into(), path("graph.csv"), "--meta".into(), meta.clone(),
            "--budget".into(), "8".into(), "--algorithm".into(), "dynamic".into(),
            "--out".into(), path("sel.csv"),
        ],
        vec![
            "evaluate".into(), "--trace".into(), trace.clone(), "--spec".into(),
            eval_spec.clone(), "--out-dir".into(), path("eval"),
        ],
    ];
    let outputs = [
        "trace.csv", "meta.csv", "graph.csv", "pred.csv", "sel.csv",
        "eval/results.csv", "eval/overage.csv",
    ];
    let mut identical = true;
    let mut first_pass = Vec::new();
    for round in 0..2 {
        for args in &commands {
            let argv: Vec<&str> = args.iter().map(String::as_str).collect();
            let out = run_cli(&argv);
            assert!(
                out.status.success(),
                "{:?} failed: {}",
                args,
                String::from_utf8_lossy(&out.stderr)
            );
        }
        let bytes: Vec<Vec<u8>> = outputs
            .iter()
            .map(|name| std::fs::read(dir.path().join(name)).unwrap())
            .collect();
        if round == 0 {
            first_pass = bytes;
        } else {
            identical = bytes == first_pass;
        }
    }

    verdict(
        7,
        "budget safety and determinism",
        violations == 0 && identical,
        &format!(
            "{violations} budget violations in {runs} fuzz runs, \
             CLI reruns byte-identical: {identical}"
        ),
    );
}
