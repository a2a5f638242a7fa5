//! Experiment harness: known-fraction sweeps with multi-trial averaging,
//! selection-driven experiments, and worst-case overage reports.
//!
//! Random masks are shared across compared predictors within a trial (common
//! random numbers), and every trial seed is derived from the master seed with
//! a fixed mixing scheme, so published result CSVs reproduce bit-exactly.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::correlation::{build_graph, CorrelationMetric};
use crate::error::Error;
use crate::model::{mask_random, KnownMask, PoiId, Scenario};
use crate::prediction::{predict, PredictionResult, Predictor, ThresholdMode};
use crate::selection::{
    dynamic_greedy, random_selection, static_greedy, CreditStrategy, SelectionProblem,
};
use crate::Result;

/// Serializable predictor choice for experiment specs.
#[derive(Copy, Clone, PartialEq, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum PredictorSpec {
    Random,
    LastKnownState,
    Majority,
    BestProxyKt,
    Hybrid {
        #[serde(default)]
        threshold: Option<f64>,
        #[serde(default)]
        adaptive: bool,
    },
}

impl PredictorSpec {
    /// Materializes the predictor; `seed` is used by the random baseline only.
    pub fn instantiate(&self, seed: u64) -> Result<Predictor> {
        Ok(match *self {
            PredictorSpec::Random => Predictor::Random { seed },
            PredictorSpec::LastKnownState => Predictor::LastKnownState,
            PredictorSpec::Majority => Predictor::Majority,
            PredictorSpec::BestProxyKt => Predictor::BestProxyKt,
            PredictorSpec::Hybrid {
                threshold,
                adaptive,
            } => {
                if adaptive {
                    Predictor::Hybrid {
                        threshold: ThresholdMode::Adaptive,
                    }
                } else {
                    Predictor::hybrid_fixed(threshold.unwrap_or(0.5))?
                }
            }
        })
    }

    pub fn label(&self) -> &'static str {
        match self {
            PredictorSpec::Random => "random",
            PredictorSpec::LastKnownState => "last_known_state",
            PredictorSpec::Majority => "majority",
            PredictorSpec::BestProxyKt => "best_proxy_kt",
            PredictorSpec::Hybrid { .. } => "hybrid",
        }
    }
}

#[derive(Copy, Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectorKind {
    /// Uniform random known sets (the no-control setting).
    RandomMask,
    StaticGreedy,
    DynamicGreedy,
    RandomSelection,
}

fn default_fractions() -> Vec<f64> {
    (1..=10).map(|i| i as f64 * 0.05).collect()
}

fn default_trials() -> usize {
    50
}

fn default_selection_trials() -> usize {
    30
}

fn default_selectors() -> Vec<SelectorKind> {
    vec![SelectorKind::RandomMask]
}

fn default_metrics() -> Vec<CorrelationMetric> {
    vec![CorrelationMetric::ChangeCorrelation]
}

fn default_graph_threshold() -> f64 {
    0.5
}

/// Full experiment description; the scenario is supplied separately.
#[derive(Clone, PartialEq, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub eval_cycles: Vec<usize>,
    #[serde(default = "default_fractions")]
    pub fractions: Vec<f64>,
    #[serde(default = "default_trials")]
    pub trials: usize,
    pub predictors: Vec<PredictorSpec>,
    #[serde(default = "default_selectors")]
    pub selectors: Vec<SelectorKind>,
    /// Graph metrics for the selection experiments. Each metric is paired
    /// with its predictor: Kendall's Tau with the best-proxy copier, the
    /// change metrics with the hybrid predictor.
    #[serde(default = "default_metrics")]
    pub metrics: Vec<CorrelationMetric>,
    /// Edge-pruning threshold of the selection graphs.
    #[serde(default = "default_graph_threshold")]
    pub graph_threshold: f64,
    /// Seeds for the random-selection baseline.
    #[serde(default = "default_selection_trials")]
    pub selection_trials: usize,
    pub master_seed: u64,
}

impl ExperimentSpec {
    pub fn validate(&self, scenario: &Scenario) -> Result<()> {
        if self.eval_cycles.is_empty() {
            return Err(Error::InvalidConfig("eval_cycles is empty".into()));
        }
        for &cycle in &self.eval_cycles {
            scenario.check_cycle(cycle)?;
            if cycle < 2 {
                return Err(Error::InvalidConfig(format!(
                    "eval cycle {cycle} has no history to learn from"
                )));
            }
        }
        if self.fractions.is_empty() {
            return Err(Error::InvalidConfig("fractions is empty".into()));
        }
        for &f in &self.fractions {
            if !(f > 0.0 && f <= 1.0) {
                return Err(Error::InvalidFraction(f));
            }
        }
        if self.trials == 0 || self.selection_trials == 0 {
            return Err(Error::InvalidConfig("trial counts must be positive".into()));
        }
        if self.predictors.is_empty() && self.selectors == [SelectorKind::RandomMask] {
            return Err(Error::InvalidConfig("no predictors configured".into()));
        }
        Ok(())
    }

    pub fn load_json(path: &Path) -> Result<ExperimentSpec> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

/// One point of an error curve.
#[derive(Copy, Clone, PartialEq, Debug)]
pub struct CurvePoint {
    pub fraction: f64,
    pub mean_error: f64,
    pub std_error: f64,
    pub trials: usize,
}

/// Error rate of one algorithm as a function of known fraction, at one cycle.
#[derive(Clone, PartialEq, Debug)]
pub struct ExperimentCurve {
    pub algorithm: String,
    pub cycle: usize,
    pub points: Vec<CurvePoint>,
}

/// Worst-case overage of each algorithm per fraction: the maximum over cycles
/// of its mean error minus the best baseline's mean error that cycle.
#[derive(Clone, PartialEq, Debug)]
pub struct OverageReport {
    pub fractions: Vec<f64>,
    /// algorithm -> per-fraction worst-case overage
    pub overage: BTreeMap<String, Vec<f64>>,
}

/// Stable seed-derivation scheme: splitmix64 finalizers chained over the
/// master seed and the coordinates (cycle, fraction index, trial).
pub fn derive_seed(master: u64, cycle: u64, fraction_index: u64, trial: u64) -> u64 {
    fn mix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9e3779b97f4a7c15);
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
        z ^ (z >> 31)
    }
    let mut h = mix(master);
    h = mix(h ^ cycle);
    h = mix(h ^ fraction_index);
    mix(h ^ trial)
}

/// Error rate of `predictor` at `cycle` given the states of `known` are
/// revealed. Returns 0 when nothing is unknown.
pub fn run_trial(
    scenario: &Scenario,
    cycle: usize,
    predictor: &Predictor,
    known: &BTreeSet<PoiId>,
) -> Result<f64> {
    run_trial_with(scenario, cycle, known, |scenario, mask, known_states| {
        predict(predictor, scenario, mask, known_states)
    })
}

/// Like [`run_trial`] but with an arbitrary prediction function; the hook for
/// ground-truth stubs and plugged-in external predictors.
pub fn run_trial_with(
    scenario: &Scenario,
    cycle: usize,
    known: &BTreeSet<PoiId>,
    predict_fn: impl FnOnce(&Scenario, &KnownMask, &BTreeMap<PoiId, u8>) -> Result<PredictionResult>,
) -> Result<f64> {
    scenario.check_cycle(cycle)?;
    let mask = KnownMask {
        cycle,
        known: known.clone(),
    };
    let known_states: BTreeMap<PoiId, u8> = known
        .iter()
        .map(|&id| (id, scenario.state(id, cycle)))
        .collect();
    let result = predict_fn(scenario, &mask, &known_states)?;
    score_prediction(scenario, &result)
}

/// Fraction of predicted POIs whose predicted state differs from the ground
/// truth; 0 for an empty prediction. Accepts externally produced results.
pub fn score_prediction(scenario: &Scenario, result: &PredictionResult) -> Result<f64> {
    scenario.check_cycle(result.cycle)?;
    if result.predicted.is_empty() {
        return Ok(0.0);
    }
    let wrong = result
        .predicted
        .iter()
        .filter(|(&id, &state)| scenario.state(id, result.cycle) != state)
        .count();
    Ok(wrong as f64 / result.predicted.len() as f64)
}

fn summarize(errors: &[f64]) -> (f64, f64) {
    let n = errors.len() as f64;
    let mean = errors.iter().sum::<f64>() / n;
    if errors.len() < 2 {
        return (mean, 0.0);
    }
    let var = errors.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.max(0.0).sqrt())
}

/// Predictor paired with a selection graph metric.
fn paired_predictor(metric: CorrelationMetric) -> Predictor {
    match metric {
        CorrelationMetric::KendallTau => Predictor::BestProxyKt,
        _ => Predictor::Hybrid {
            threshold: ThresholdMode::Fixed(0.5),
        },
    }
}

fn metric_suffix(metric: CorrelationMetric) -> &'static str {
    match metric {
        CorrelationMetric::KendallTau => "kt",
        CorrelationMetric::ChangeCorrelation => "change",
        CorrelationMetric::ChangeCorrelationLiteral => "change_literal",
    }
}

/// Runs the full experiment and returns one curve per (algorithm, cycle).
pub fn run_experiment(scenario: &Scenario, spec: &ExperimentSpec) -> Result<Vec<ExperimentCurve>> {
    spec.validate(scenario)?;
    let mut curves = Vec::new();
    for &cycle in &spec.eval_cycles {
        if spec.selectors.contains(&SelectorKind::RandomMask) {
            let mut per_predictor: Vec<Vec<CurvePoint>> =
                vec![Vec::new(); spec.predictors.len()];
            for (f_idx, &fraction) in spec.fractions.iter().enumerate() {
                let mut errors: Vec<Vec<f64>> = vec![Vec::new(); spec.predictors.len()];
                for trial in 0..spec.trials {
                    let seed =
                        derive_seed(spec.master_seed, cycle as u64, f_idx as u64, trial as u64);
                    let mask = mask_random(scenario, cycle, fraction, seed)?;
                    for (p_idx, pspec) in spec.predictors.iter().enumerate() {
                        let predictor =
                            pspec.instantiate(derive_seed(seed, p_idx as u64, 0, 1))?;
                        errors[p_idx].push(run_trial(scenario, cycle, &predictor, &mask.known)?);
                    }
                }
                for (p_idx, errs) in errors.iter().enumerate() {
                    let (mean, std) = summarize(errs);
                    per_predictor[p_idx].push(CurvePoint {
                        fraction,
                        mean_error: mean,
                        std_error: std,
                        trials: errs.len(),
                    });
                }
            }
            for (p_idx, pspec) in spec.predictors.iter().enumerate() {
                curves.push(ExperimentCurve {
                    algorithm: pspec.label().to_string(),
                    cycle,
                    points: per_predictor[p_idx].clone(),
                });
            }
        }

        let selection_kinds: Vec<SelectorKind> = spec
            .selectors
            .iter()
            .copied()
            .filter(|k| *k != SelectorKind::RandomMask)
            .collect();
        if selection_kinds.is_empty() {
            continue;
        }
        for &metric in &spec.metrics {
            let graph = build_graph(scenario, cycle - 1, metric, spec.graph_threshold)?;
            let predictor = paired_predictor(metric);
            for &kind in &selection_kinds {
                let mut points = Vec::new();
                for (f_idx, &fraction) in spec.fractions.iter().enumerate() {
                    let budget = fraction * scenario.total_cost();
                    let problem =
                        SelectionProblem::from_scenario(scenario, graph.clone(), budget)?;
                    let errors: Vec<f64> = match kind {
                        SelectorKind::StaticGreedy | SelectorKind::DynamicGreedy => {
                            let result = if kind == SelectorKind::StaticGreedy {
                                static_greedy(&problem, CreditStrategy::MaxPredictor)
                            } else {
                                dynamic_greedy(&problem, CreditStrategy::MaxPredictor)
                            };
                            debug_assert!(result.total_cost <= budget + 1e-9);
                            vec![run_trial(
                                scenario,
                                cycle,
                                &predictor,
                                &result.selected_set(),
                            )?]
                        }
                        SelectorKind::RandomSelection => (0..spec.selection_trials)
                            .map(|trial| {
                                let seed = derive_seed(
                                    spec.master_seed,
                                    cycle as u64,
                                    f_idx as u64,
                                    0x5e1ec7 + trial as u64,
                                );
                                let result = random_selection(&problem, seed);
                                run_trial(scenario, cycle, &predictor, &result.selected_set())
                            })
                            .collect::<Result<_>>()?,
                        SelectorKind::RandomMask => unreachable!(),
                    };
                    let (mean, std) = summarize(&errors);
                    points.push(CurvePoint {
                        fraction,
                        mean_error: mean,
                        std_error: std,
                        trials: errors.len(),
                    });
                }
                let label = match kind {
                    SelectorKind::StaticGreedy => "static_greedy",
                    SelectorKind::DynamicGreedy => "dynamic_greedy",
                    SelectorKind::RandomSelection => "random_selection",
                    SelectorKind::RandomMask => unreachable!(),
                };
                curves.push(ExperimentCurve {
                    algorithm: format!("{label}+{}", metric_suffix(metric)),
                    cycle,
                    points,
                });
            }
        }
    }
    Ok(curves)
}

/// Baseline pool for overage computation.
pub const OVERAGE_BASELINES: [&str; 4] =
    ["random", "last_known_state", "majority", "best_proxy_kt"];

/// Computes per-algorithm worst-case overage over all cycles present in
/// `curves`, against the per-cycle best of `baselines`.
pub fn worst_case_overage(
    curves: &[ExperimentCurve],
    baselines: &[&str],
) -> Result<OverageReport> {
    if curves.is_empty() {
        return Err(Error::ShapeMismatch("no curves".into()));
    }
    let fractions: Vec<f64> = curves[0].points.iter().map(|p| p.fraction).collect();
    let cycles: BTreeSet<usize> = curves.iter().map(|c| c.cycle).collect();
    let algorithms: BTreeSet<&str> = curves.iter().map(|c| c.algorithm.as_str()).collect();
    let mut by_key: BTreeMap<(&str, usize), &ExperimentCurve> = BTreeMap::new();
    for curve in curves {
        let points: Vec<f64> = curve.points.iter().map(|p| p.fraction).collect();
        if points != fractions {
            return Err(Error::ShapeMismatch(format!(
                "curve {}@{} has different fractions",
                curve.algorithm, curve.cycle
            )));
        }
        by_key.insert((curve.algorithm.as_str(), curve.cycle), curve);
    }
    for &alg in &algorithms {
        for &cycle in &cycles {
            if !by_key.contains_key(&(alg, cycle)) {
                return Err(Error::ShapeMismatch(format!(
                    "algorithm {alg} missing at cycle {cycle}"
                )));
            }
        }
    }
    for &b in baselines {
        if !algorithms.contains(b) {
            return Err(Error::ShapeMismatch(format!("baseline {b} not present")));
        }
    }
    let mut overage = BTreeMap::new();
    for &alg in &algorithms {
        let mut per_fraction = vec![f64::NEG_INFINITY; fractions.len()];
        for &cycle in &cycles {
            let curve = by_key[&(alg, cycle)];
            for (i, point) in curve.points.iter().enumerate() {
                let best_baseline = baselines
                    .iter()
                    .map(|&b| by_key[&(b, cycle)].points[i].mean_error)
                    .fold(f64::INFINITY, f64::min);
                per_fraction[i] = per_fraction[i].max(point.mean_error - best_baseline);
            }
        }
        overage.insert(alg.to_string(), per_fraction);
    }
    Ok(OverageReport {
        fractions,
        overage,
    })
}

/// Writes `algorithm,cycle,fraction,mean_error,std_error,trials` rows.
pub fn save_curves_csv(curves: &[ExperimentCurve], path: &Path) -> Result<()> {
    let mut out = String::from("algorithm,cycle,fraction,mean_error,std_error,trials\n");
    for curve in curves {
        for p in &curve.points {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                curve.algorithm, curve.cycle, p.fraction, p.mean_error, p.std_error, p.trials
            ));
        }
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Writes `algorithm,fraction,worst_case_overage` rows.
pub fn save_overage_csv(report: &OverageReport, path: &Path) -> Result<()> {
    let mut out = String::from("algorithm,fraction,worst_case_overage\n");
    for (alg, values) in &report.overage {
        for (f, v) in report.fractions.iter().zip(values) {
            out.push_str(&format!("{alg},{f},{v}\n"));
        }
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}
