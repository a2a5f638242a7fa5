//! Predictors for the unknown POIs of a cycle: the four baselines plus the
//! hybrid predictor that switches between temporal and spatial modes, and the
//! closed-form misprediction model behind its threshold choice.
//!
//! The hybrid predictor defaults to temporal prediction (no change). For each
//! unknown target it finds the known proxy whose past state changes best
//! predict the target's (`P_best`, estimated over cycles `1..n-1`). If
//! `P_best` reaches the switching threshold `L`, the proxy changed this cycle,
//! and proxy and target agreed last cycle, the target is predicted to follow
//! the proxy's new state.

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::correlation::{best_proxy, CorrelationMetric};
use crate::error::Error;
use crate::model::{KnownMask, PoiId, Scenario};
use crate::Result;

/// Threshold mode for the hybrid predictor: a fixed `L`, or `L = 1 - F`
/// recomputed from the known set each cycle.
#[derive(Copy, Clone, PartialEq, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdMode {
    Fixed(f64),
    Adaptive,
}

#[derive(Copy, Clone, PartialEq, Debug)]
pub enum Predictor {
    /// Seeded uniform coin per unknown POI.
    Random { seed: u64 },
    /// `x_n = x_{n-1}`.
    LastKnownState,
    /// Majority state of the known POIs; ties predict 1.
    Majority,
    /// Copy the current state of the best Kendall's-Tau proxy among the known
    /// POIs.
    BestProxyKt,
    /// Switch between temporal and spatial prediction on change correlation.
    Hybrid { threshold: ThresholdMode },
}

impl Predictor {
    pub fn hybrid_fixed(threshold: f64) -> Result<Predictor> {
        if !(0.0..=1.0).contains(&threshold) {
            return Err(Error::OutOfRange {
                name: "threshold",
                value: threshold,
            });
        }
        Ok(Predictor::Hybrid {
            threshold: ThresholdMode::Fixed(threshold),
        })
    }

    pub fn label(&self) -> &'static str {
        match self {
            Predictor::Random { .. } => "random",
            Predictor::LastKnownState => "last_known_state",
            Predictor::Majority => "majority",
            Predictor::BestProxyKt => "best_proxy_kt",
            Predictor::Hybrid { .. } => "hybrid",
        }
    }
}

/// How an individual prediction was produced.
#[derive(Copy, Clone, PartialEq, Eq, Debug)]
pub enum PredictionMode {
    Spatial,
    Temporal,
    MajorityVote,
    RandomGuess,
    ProxyCopy,
}

impl PredictionMode {
    pub fn as_str(self) -> &'static str {
        match self {
            PredictionMode::Spatial => "spatial",
            PredictionMode::Temporal => "temporal",
            PredictionMode::MajorityVote => "majority_vote",
            PredictionMode::RandomGuess => "random_guess",
            PredictionMode::ProxyCopy => "proxy_copy",
        }
    }
}

impl std::str::FromStr for PredictionMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "spatial" => Ok(PredictionMode::Spatial),
            "temporal" => Ok(PredictionMode::Temporal),
            "majority_vote" => Ok(PredictionMode::MajorityVote),
            "random_guess" => Ok(PredictionMode::RandomGuess),
            "proxy_copy" => Ok(PredictionMode::ProxyCopy),
            other => Err(format!("unknown prediction mode `{other}`")),
        }
    }
}

/// Predicted states for exactly the unknown POIs of one cycle.
#[derive(Clone, PartialEq, Debug)]
pub struct PredictionResult {
    pub cycle: usize,
    pub predicted: BTreeMap<PoiId, u8>,
    pub mode_used: BTreeMap<PoiId, PredictionMode>,
}

impl PredictionResult {
    /// Writes `poi_id,cycle,predicted_state,mode_used` rows.
    pub fn save_csv(&self, scenario: &Scenario, path: &Path) -> Result<()> {
        let mut out = String::from("poi_id,cycle,predicted_state,mode_used\n");
        for (&id, &state) in &self.predicted {
            out.push_str(&format!(
                "{},{},{},{}\n",
                scenario.label(id),
                self.cycle,
                state,
                self.mode_used[&id].as_str()
            ));
        }
        std::fs::write(path, out).map_err(|e| Error::io(path, e))
    }

    /// Reads a file in the `save_csv` format, resolving labels against
    /// `scenario`. All rows must share one cycle. This is also the entry point
    /// for externally produced prediction files.
    pub fn load_csv(scenario: &Scenario, path: &Path) -> Result<PredictionResult> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let reader = BufReader::new(file);
        let mut predicted = BTreeMap::new();
        let mut mode_used = BTreeMap::new();
        let mut cycle: Option<usize> = None;
        let mut saw_header = false;
        for (idx, line) in reader.lines().enumerate() {
            let lineno = idx + 1;
            let line = line.map_err(|e| Error::io(path, e))?;
            let line = line.trim_end();
            if line.is_empty() {
                continue;
            }
            if !saw_header {
                if line != "poi_id,cycle,predicted_state,mode_used" {
                    return Err(Error::parse(
                        path,
                        lineno,
                        "expected header `poi_id,cycle,predicted_state,mode_used`",
                    ));
                }
                saw_header = true;
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 4 {
                return Err(Error::parse(path, lineno, "expected 4 fields"));
            }
            let id = scenario
                .id_of(fields[0])
                .ok_or_else(|| Error::UnknownPoi(fields[0].to_string()))?;
            let row_cycle: usize = fields[1]
                .parse()
                .map_err(|_| Error::parse(path, lineno, format!("bad cycle `{}`", fields[1])))?;
            match cycle {
                None => cycle = Some(row_cycle),
                Some(c) if c != row_cycle => {
                    return Err(Error::parse(path, lineno, "rows span multiple cycles"))
                }
                _ => {}
            }
            let state: u8 = match fields[2] {
                "0" => 0,
                "1" => 1,
                other => {
                    return Err(Error::parse(path, lineno, format!("bad state `{other}`")))
                }
            };
            let mode = fields[3]
                .parse()
                .map_err(|e: String| Error::parse(path, lineno, e))?;
            predicted.insert(id, state);
            mode_used.insert(id, mode);
        }
        if !saw_header {
            return Err(Error::parse(path, 1, "missing header"));
        }
        Ok(PredictionResult {
            cycle: cycle.ok_or_else(|| Error::parse(path, 1, "file has no data rows"))?,
            predicted,
            mode_used,
        })
    }
}

/// Fraction of known POIs whose revealed state differs from their state in
/// the previous cycle (the `F` of the misprediction model).
pub fn estimate_change_fraction(
    scenario: &Scenario,
    cycle: usize,
    known_states: &BTreeMap<PoiId, u8>,
) -> Result<f64> {
    if known_states.is_empty() {
        return Err(Error::EmptyKnownSet);
    }
    scenario.check_cycle(cycle)?;
    let changed = known_states
        .iter()
        .filter(|(&id, &state)| scenario.state(id, cycle - 1) != state)
        .count();
    Ok(changed as f64 / known_states.len() as f64)
}

/// Predicts the states of all POIs outside `mask.known` at `mask.cycle`.
///
/// The scenario supplies full history through `mask.cycle - 1`; current-cycle
/// information enters only through `known_states`, which must cover exactly
/// the mask's known set.
pub fn predict(
    predictor: &Predictor,
    scenario: &Scenario,
    mask: &KnownMask,
    known_states: &BTreeMap<PoiId, u8>,
) -> Result<PredictionResult> {
    scenario.check_cycle(mask.cycle)?;
    if let Some(&id) = mask.known.iter().find(|id| id.index() >= scenario.n()) {
        return Err(Error::MaskMismatch(format!(
            "mask references poi {id} outside the scenario"
        )));
    }
    if known_states.len() != mask.known.len()
        || !known_states.keys().all(|id| mask.known.contains(id))
    {
        return Err(Error::MaskMismatch(format!(
            "known-states covers {} POIs, mask has {}",
            known_states.len(),
            mask.known.len()
        )));
    }
    let n = mask.cycle;
    let unknowns: Vec<PoiId> = scenario
        .poi_ids()
        .filter(|id| !mask.known.contains(id))
        .collect();
    let mut predicted = BTreeMap::new();
    let mut mode_used = BTreeMap::new();
    let mut emit = |id: PoiId, state: u8, mode: PredictionMode| {
        predicted.insert(id, state);
        mode_used.insert(id, mode);
    };

    match predictor {
        Predictor::Random { seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            for id in unknowns {
                emit(id, rng.gen_range(0..=1u8), PredictionMode::RandomGuess);
            }
        }
        Predictor::LastKnownState => {
            for id in unknowns {
                emit(id, scenario.state(id, n - 1), PredictionMode::Temporal);
            }
        }
        Predictor::Majority => {
            let ones = known_states.values().filter(|&&s| s == 1).count();
            let zeros = known_states.len() - ones;
            let majority = if ones >= zeros { 1 } else { 0 };
            for id in unknowns {
                emit(id, majority, PredictionMode::MajorityVote);
            }
        }
        Predictor::BestProxyKt => {
            for id in unknowns {
                if mask.known.is_empty() || n == 1 {
                    emit(id, scenario.state(id, n - 1), PredictionMode::Temporal);
                    continue;
                }
                let (proxy, _) =
                    best_proxy(scenario, id, &mask.known, n - 1, CorrelationMetric::KendallTau)?;
                emit(id, known_states[&proxy], PredictionMode::ProxyCopy);
            }
        }
        Predictor::Hybrid { threshold } => {
            let level = match threshold {
                ThresholdMode::Fixed(l) => Some(*l),
                ThresholdMode::Adaptive => {
                    if known_states.is_empty() {
                        None
                    } else {
                        Some(optimal_threshold(estimate_change_fraction(
                            scenario,
                            n,
                            known_states,
                        )?)?)
                    }
                }
            };
            for id in unknowns {
                let last = scenario.state(id, n - 1);
                // cycle 1 has no change history; pure temporal default
                let (level, proxy) = match (level, n > 1 && !mask.known.is_empty()) {
                    (Some(l), true) => (
                        l,
                        best_proxy(
                            scenario,
                            id,
                            &mask.known,
                            n - 1,
                            CorrelationMetric::ChangeCorrelation,
                        )?,
                    ),
                    _ => {
                        emit(id, last, PredictionMode::Temporal);
                        continue;
                    }
                };
                let (best, p_best) = proxy;
                let proxy_now = known_states[&best];
                let proxy_last = scenario.state(best, n - 1);
                if p_best >= level && proxy_now != proxy_last && proxy_last == last {
                    emit(id, proxy_now, PredictionMode::Spatial);
                } else {
                    emit(id, last, PredictionMode::Temporal);
                }
            }
        }
    }
    Ok(PredictionResult {
        cycle: n,
        predicted,
        mode_used,
    })
}

/// The switching threshold minimizing the misprediction model: `L = 1 - F`.
pub fn optimal_threshold(change_fraction: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&change_fraction) {
        return Err(Error::OutOfRange {
            name: "change_fraction",
            value: change_fraction,
        });
    }
    Ok(1.0 - change_fraction)
}

/// Closed-form misprediction probabilities of the hybrid scheme for a given
/// threshold `L`, last-cycle availability fraction `M`, and change fraction
/// `F`.
#[derive(Copy, Clone, PartialEq, Debug)]
pub struct MispredictionModel {
    pub threshold: f64,
    pub availability_fraction: f64,
    pub change_fraction: f64,
    /// Probability of a wrong spatial prediction.
    pub spatial: f64,
    /// Probability of a wrong temporal prediction.
    pub temporal: f64,
    /// Total misprediction probability, `spatial + temporal`.
    pub total: f64,
}

pub fn misprediction_model(
    threshold: f64,
    availability_fraction: f64,
    change_fraction: f64,
) -> Result<MispredictionModel> {
    for (name, value) in [
        ("threshold", threshold),
        ("availability_fraction", availability_fraction),
        ("change_fraction", change_fraction),
    ] {
        if !(0.0..=1.0).contains(&value) {
            return Err(Error::OutOfRange { name, value });
        }
    }
    let (l, m, f) = (threshold, availability_fraction, change_fraction);
    let mixing = 2.0 * m * (1.0 - m);
    let spatial = (1.0 - l) * (1.0 - mixing) * (1.0 - l) / 2.0;
    let temporal = (1.0 - l) * mixing * f + l * f;
    Ok(MispredictionModel {
        threshold: l,
        availability_fraction: m,
        change_fraction: f,
        spatial,
        temporal,
        total: spatial + temporal,
    })
}
