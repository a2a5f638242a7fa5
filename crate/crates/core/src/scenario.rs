//! Synthetic disaster-scenario generation and long-form trace CSV I/O.
//!
//! The generator models cluster-level outage dynamics: POIs in a cluster share
//! suppliers or power, so a cluster-wide change event (calm-day noise or a
//! shock-day surge) pulls its members to a common state, with a per-POI
//! agreement probability controlling how tightly they follow. All POIs start
//! available.

use std::collections::{BTreeSet, HashMap};
use std::io::{BufRead, BufReader};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::model::{scenario_from_records, Scenario, StateRecord, StateSeries};
use crate::Result;

fn default_rate() -> f64 {
    0.2
}

fn default_agreement() -> f64 {
    0.95
}

fn default_shock_rate() -> f64 {
    0.9
}

fn default_recovery_bias() -> f64 {
    0.5
}

#[derive(Clone, PartialEq, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorConfig {
    pub n_pois: usize,
    pub n_cycles: usize,
    pub n_clusters: usize,
    /// Probability that a POI follows its cluster's change each cycle.
    #[serde(default = "default_agreement")]
    pub intra_cluster_agreement: f64,
    /// Per-cluster probability of a change event on a calm cycle.
    #[serde(default = "default_rate")]
    pub calm_change_rate: f64,
    #[serde(default)]
    pub shock_cycles: BTreeSet<usize>,
    /// Per-cluster change probability on a shock cycle.
    #[serde(default = "default_shock_rate")]
    pub shock_change_rate: f64,
    /// Probability that a change event targets state 1. Ramps linearly toward
    /// 1 over the final third of the horizon to emulate a recovery phase.
    #[serde(default = "default_recovery_bias")]
    pub recovery_bias: f64,
    pub seed: u64,
}

impl GeneratorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_pois == 0 || self.n_cycles == 0 {
            return Err(Error::InvalidConfig(
                "n_pois and n_cycles must be positive".into(),
            ));
        }
        if self.n_clusters == 0 || self.n_clusters > self.n_pois {
            return Err(Error::InvalidConfig(format!(
                "n_clusters {} outside 1..={}",
                self.n_clusters, self.n_pois
            )));
        }
        for (name, v) in [
            ("intra_cluster_agreement", self.intra_cluster_agreement),
            ("calm_change_rate", self.calm_change_rate),
            ("shock_change_rate", self.shock_change_rate),
            ("recovery_bias", self.recovery_bias),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidConfig(format!("{name} = {v} outside [0, 1]")));
            }
        }
        if let Some(&c) = self.shock_cycles.iter().find(|&&c| c == 0 || c > self.n_cycles) {
            return Err(Error::InvalidConfig(format!(
                "shock cycle {c} outside 1..={}",
                self.n_cycles
            )));
        }
        Ok(())
    }

    pub fn load_json(path: &Path) -> Result<GeneratorConfig> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let config: GeneratorConfig = serde_json::from_str(&text)?;
        config.validate()?;
        Ok(config)
    }

    fn bias_at(&self, cycle: usize) -> f64 {
        let ramp_start = self.n_cycles * 2 / 3;
        if cycle <= ramp_start || self.n_cycles == ramp_start {
            self.recovery_bias
        } else {
            let progress = (cycle - ramp_start) as f64 / (self.n_cycles - ramp_start) as f64;
            self.recovery_bias + (1.0 - self.recovery_bias) * progress
        }
    }
}

/// Generates a scenario from the cluster model; deterministic per seed.
/// Costs and values are uniform 1.0.
pub fn generate(config: &GeneratorConfig) -> Result<Scenario> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let n = config.n_pois;
    let cluster_of: Vec<usize> = (0..n).map(|i| i % config.n_clusters).collect();
    let mut states: Vec<Vec<u8>> = vec![Vec::with_capacity(config.n_cycles); n];
    let mut current: Vec<u8> = vec![1; n];
    for cycle in 1..=config.n_cycles {
        let rate = if config.shock_cycles.contains(&cycle) {
            config.shock_change_rate
        } else {
            config.calm_change_rate
        };
        let bias = config.bias_at(cycle);
        let cluster_events: Vec<Option<u8>> = (0..config.n_clusters)
            .map(|_| {
                let fires = rng.gen_bool(rate);
                let target = if rng.gen_bool(bias) { 1 } else { 0 };
                fires.then_some(target)
            })
            .collect();
        for poi in 0..n {
            let follows = rng.gen_bool(config.intra_cluster_agreement);
            let independent_fires = rng.gen_bool(config.calm_change_rate);
            let independent_target = if rng.gen_bool(bias) { 1 } else { 0 };
            if follows {
                if let Some(target) = cluster_events[cluster_of[poi]] {
                    current[poi] = target;
                }
            } else if independent_fires {
                current[poi] = independent_target;
            }
            states[poi].push(current[poi]);
        }
    }
    let labels: Vec<String> = (0..n).map(|i| format!("poi{i:05}")).collect();
    let series: Vec<StateSeries> = states.into_iter().map(StateSeries::new).collect::<Result<_>>()?;
    Scenario::from_parts(labels, series, vec![1.0; n], vec![1.0; n])
}

/// Writes the long-form trace CSV `poi_id,cycle,state` (header, LF endings,
/// pois in id order, cycles ascending).
pub fn save_csv(scenario: &Scenario, path: &Path) -> Result<()> {
    let mut out = String::from("poi_id,cycle,state\n");
    for id in scenario.poi_ids() {
        for cycle in 1..=scenario.cycle_count() {
            out.push_str(&format!(
                "{},{},{}\n",
                scenario.label(id),
                cycle,
                scenario.state(id, cycle)
            ));
        }
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Writes the companion `poi_id,cost,value` metadata CSV.
pub fn save_metadata_csv(scenario: &Scenario, path: &Path) -> Result<()> {
    let mut out = String::from("poi_id,cost,value\n");
    for id in scenario.poi_ids() {
        out.push_str(&format!(
            "{},{},{}\n",
            scenario.label(id),
            scenario.cost(id),
            scenario.value(id)
        ));
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Reads a trace CSV, with costs and values from an optional metadata file
/// (absent entries default to 1.0).
pub fn load_csv(path: &Path, metadata: Option<&Path>) -> Result<Scenario> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = BufReader::new(file);
    let mut records = Vec::new();
    let mut saw_header = false;
    for (idx, line) in reader.lines().enumerate() {
        let lineno = idx + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        let line = line.trim_end();
        if line.is_empty() {
            continue;
        }
        if !saw_header {
            if line != "poi_id,cycle,state" {
                return Err(Error::parse(
                    path,
                    lineno,
                    format!("expected header `poi_id,cycle,state`, got `{line}`"),
                ));
            }
            saw_header = true;
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 3 {
            return Err(Error::parse(path, lineno, "expected 3 fields"));
        }
        let cycle: usize = fields[1]
            .parse()
            .map_err(|_| Error::parse(path, lineno, format!("bad cycle `{}`", fields[1])))?;
        let state: i64 = fields[2]
            .parse()
            .map_err(|_| Error::parse(path, lineno, format!("bad state `{}`", fields[2])))?;
        if !(0..=1).contains(&state) {
            return Err(Error::parse(
                path,
                lineno,
                format!("state {state} is not binary"),
            ));
        }
        records.push(StateRecord {
            poi: fields[0].to_string(),
            cycle,
            state,
        });
    }
    if !saw_header {
        return Err(Error::parse(path, 1, "missing header `poi_id,cycle,state`"));
    }
    let meta = metadata
        .map(crate::selection::load_metadata)
        .transpose()?;
    let (costs, values) = match meta {
        Some(meta) => {
            let costs: HashMap<String, f64> =
                meta.iter().map(|(k, &(c, _))| (k.clone(), c)).collect();
            let values: HashMap<String, f64> =
                meta.iter().map(|(k, &(_, v))| (k.clone(), v)).collect();
            (Some(costs), Some(values))
        }
        None => (None, None),
    };
    scenario_from_records(&records, costs.as_ref(), values.as_ref())
}
