//! Core data model: POI identifiers, binary state series, change series,
//! scenarios, and per-cycle known masks.
//!
//! Cycles are 1-based: a scenario with `cycle_count` t holds states for
//! cycles `1..=t`. Cycle 0 is the implicit pre-disaster cycle in which every
//! POI is available (state 1).

use std::collections::{BTreeSet, HashMap};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::Error;
use crate::Result;

/// Dense identifier of a POI within a single [`Scenario`] (or a
/// [`CorrelationGraph`](crate::correlation::CorrelationGraph) built over the
/// same label set). Indices are assigned in lexicographic label order, so two
/// structures over the same labels agree on ids.
#[derive(Copy, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct PoiId(pub u32);

impl PoiId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl std::fmt::Display for PoiId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Binary availability series of one POI over cycles `1..=t`.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct StateSeries {
    states: Vec<u8>,
}

impl StateSeries {
    pub fn new(states: Vec<u8>) -> Result<Self> {
        if let Some(&bad) = states.iter().find(|&&s| s > 1) {
            return Err(Error::InvalidState {
                poi: String::new(),
                cycle: 0,
                state: bad as i64,
            });
        }
        Ok(StateSeries { states })
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// State at `cycle`; cycle 0 returns the pre-disaster state 1.
    pub fn state(&self, cycle: usize) -> u8 {
        if cycle == 0 {
            1
        } else {
            self.states[cycle - 1]
        }
    }

    pub fn states(&self) -> &[u8] {
        &self.states
    }

    /// First `horizon` cycles as a new series.
    pub fn truncated(&self, horizon: usize) -> StateSeries {
        StateSeries {
            states: self.states[..horizon.min(self.states.len())].to_vec(),
        }
    }
}

/// Cycle-to-cycle deltas of one POI: `deltas[i]` is `dx_{i+1} = x_{i+1} - x_i`
/// with `x_0 = 1`.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct ChangeSeries {
    deltas: Vec<i8>,
}

impl ChangeSeries {
    /// Builds from pre-differenced data; each delta must be -1, 0, or 1.
    pub fn from_deltas(deltas: Vec<i8>) -> Result<ChangeSeries> {
        if deltas.is_empty() {
            return Err(Error::EmptySeries);
        }
        if let Some(&d) = deltas.iter().find(|d| !(-1..=1).contains(*d)) {
            return Err(Error::OutOfRange {
                name: "change delta",
                value: d as f64,
            });
        }
        Ok(ChangeSeries { deltas })
    }

    pub fn len(&self) -> usize {
        self.deltas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.deltas.is_empty()
    }

    /// Delta at `cycle` (1-based).
    pub fn delta(&self, cycle: usize) -> i8 {
        self.deltas[cycle - 1]
    }

    pub fn deltas(&self) -> &[i8] {
        &self.deltas
    }

    /// Rebuilds the state series by partial sums from the pre-disaster state 1.
    pub fn reconstruct(&self) -> StateSeries {
        let mut prev = 1i8;
        let states = self
            .deltas
            .iter()
            .map(|&d| {
                prev += d;
                prev as u8
            })
            .collect();
        StateSeries { states }
    }

    pub fn truncated(&self, horizon: usize) -> ChangeSeries {
        ChangeSeries {
            deltas: self.deltas[..horizon.min(self.deltas.len())].to_vec(),
        }
    }
}

/// Change series of a state series: `dx_i = x_i - x_{i-1}`, `x_0 = 1`.
pub fn change_series(series: &StateSeries) -> Result<ChangeSeries> {
    if series.is_empty() {
        return Err(Error::EmptySeries);
    }
    let mut prev = 1i8;
    let deltas = series
        .states
        .iter()
        .map(|&s| {
            let d = s as i8 - prev;
            prev = s as i8;
            d
        })
        .collect();
    Ok(ChangeSeries { deltas })
}

/// Ground-truth universe for one disaster trace: the full POI x cycle binary
/// state matrix plus per-POI cost and importance metadata.
#[derive(Clone, PartialEq, Debug)]
pub struct Scenario {
    labels: Vec<String>,
    series: Vec<StateSeries>,
    costs: Vec<f64>,
    values: Vec<f64>,
    cycle_count: usize,
}

impl Scenario {
    /// Builds a scenario from dense, label-sorted parts.
    pub fn from_parts(
        labels: Vec<String>,
        series: Vec<StateSeries>,
        costs: Vec<f64>,
        values: Vec<f64>,
    ) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::InvalidConfig("scenario has no POIs".into()));
        }
        if labels.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidConfig(
                "labels must be sorted and unique".into(),
            ));
        }
        if series.len() != labels.len() || costs.len() != labels.len() || values.len() != labels.len()
        {
            return Err(Error::InvalidConfig("parallel arrays differ in length".into()));
        }
        let cycle_count = series[0].len();
        if cycle_count == 0 {
            return Err(Error::EmptySeries);
        }
        if series.iter().any(|s| s.len() != cycle_count) {
            return Err(Error::InvalidConfig("series lengths differ".into()));
        }
        if costs.iter().any(|&c| !(c > 0.0) || !c.is_finite()) {
            return Err(Error::InvalidConfig("costs must be positive".into()));
        }
        if values.iter().any(|&v| !(v >= 0.0) || !v.is_finite()) {
            return Err(Error::InvalidConfig("values must be nonnegative".into()));
        }
        Ok(Scenario {
            labels,
            series,
            costs,
            values,
            cycle_count,
        })
    }

    pub fn n(&self) -> usize {
        self.labels.len()
    }

    pub fn cycle_count(&self) -> usize {
        self.cycle_count
    }

    pub fn poi_ids(&self) -> impl Iterator<Item = PoiId> {
        (0..self.labels.len() as u32).map(PoiId)
    }

    pub fn label(&self, id: PoiId) -> &str {
        &self.labels[id.index()]
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn id_of(&self, label: &str) -> Option<PoiId> {
        self.labels
            .binary_search_by(|l| l.as_str().cmp(label))
            .ok()
            .map(|i| PoiId(i as u32))
    }

    pub fn series(&self, id: PoiId) -> &StateSeries {
        &self.series[id.index()]
    }

    /// State of `id` at `cycle`; cycle 0 is the pre-disaster state 1.
    pub fn state(&self, id: PoiId, cycle: usize) -> u8 {
        self.series[id.index()].state(cycle)
    }

    pub fn cost(&self, id: PoiId) -> f64 {
        self.costs[id.index()]
    }

    pub fn value(&self, id: PoiId) -> f64 {
        self.values[id.index()]
    }

    pub fn total_cost(&self) -> f64 {
        self.costs.iter().sum()
    }

    pub fn check_cycle(&self, cycle: usize) -> Result<()> {
        if cycle == 0 || cycle > self.cycle_count {
            return Err(Error::InvalidCycle {
                cycle,
                max: self.cycle_count,
            });
        }
        Ok(())
    }

    /// Fraction of POIs at state 1 in `cycle` (the `M` of the misprediction
    /// model when evaluated at `cycle = n-1`).
    pub fn fraction_at_one(&self, cycle: usize) -> f64 {
        let ones = self
            .poi_ids()
            .filter(|&id| self.state(id, cycle) == 1)
            .count();
        ones as f64 / self.n() as f64
    }

    /// Fraction of POIs whose state at `cycle` differs from `cycle - 1`.
    pub fn realized_change_fraction(&self, cycle: usize) -> f64 {
        let changed = self
            .poi_ids()
            .filter(|&id| self.state(id, cycle) != self.state(id, cycle - 1))
            .count();
        changed as f64 / self.n() as f64
    }
}

/// One long-form trace record, as read from a CSV row.
#[derive(Clone, Debug)]
pub struct StateRecord {
    pub poi: String,
    pub cycle: usize,
    pub state: i64,
}

/// Assembles a validated [`Scenario`] from long-form records.
///
/// Records must cover the complete rectangle of (poi, cycle) pairs for cycles
/// `1..=t`. Missing cost or value entries default to 1.0.
pub fn scenario_from_records(
    records: &[StateRecord],
    costs: Option<&HashMap<String, f64>>,
    values: Option<&HashMap<String, f64>>,
) -> Result<Scenario> {
    if records.is_empty() {
        return Err(Error::EmptySeries);
    }
    let mut labels: Vec<String> = records.iter().map(|r| r.poi.clone()).collect();
    labels.sort();
    labels.dedup();

    let max_cycle = records.iter().map(|r| r.cycle).max().unwrap();
    let mut cells: Vec<Vec<Option<u8>>> = vec![vec![None; max_cycle]; labels.len()];
    for r in records {
        if !(0..=1).contains(&r.state) {
            return Err(Error::InvalidState {
                poi: r.poi.clone(),
                cycle: r.cycle,
                state: r.state,
            });
        }
        if r.cycle == 0 || r.cycle > max_cycle {
            return Err(Error::InvalidCycle {
                cycle: r.cycle,
                max: max_cycle,
            });
        }
        let row = labels.binary_search(&r.poi).expect("label collected above");
        let cell = &mut cells[row][r.cycle - 1];
        if cell.is_some() {
            return Err(Error::DuplicateRecord {
                poi: r.poi.clone(),
                cycle: r.cycle,
            });
        }
        *cell = Some(r.state as u8);
    }
    let mut series = Vec::with_capacity(labels.len());
    for (row, label) in labels.iter().enumerate() {
        let mut states = Vec::with_capacity(max_cycle);
        for (c, cell) in cells[row].iter().enumerate() {
            match cell {
                Some(s) => states.push(*s),
                None => {
                    return Err(Error::MissingCell {
                        poi: label.clone(),
                        cycle: c + 1,
                    })
                }
            }
        }
        series.push(StateSeries::new(states)?);
    }
    let lookup = |map: Option<&HashMap<String, f64>>, label: &str| -> f64 {
        map.and_then(|m| m.get(label).copied()).unwrap_or(1.0)
    };
    let cost_vec: Vec<f64> = labels.iter().map(|l| lookup(costs, l)).collect();
    let value_vec: Vec<f64> = labels.iter().map(|l| lookup(values, l)).collect();
    Scenario::from_parts(labels, series, cost_vec, value_vec)
}

/// The set of POIs whose state at `cycle` is revealed to the predictor.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct KnownMask {
    pub cycle: usize,
    pub known: BTreeSet<PoiId>,
}

/// Draws a uniform random known set of `round(fraction * n)` POIs (half-up
/// rounding, at least 1). Deterministic for a given seed.
pub fn mask_random(
    scenario: &Scenario,
    cycle: usize,
    fraction: f64,
    seed: u64,
) -> Result<KnownMask> {
    scenario.check_cycle(cycle)?;
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::InvalidFraction(fraction));
    }
    let n = scenario.n();
    let k = ((fraction * n as f64 + 0.5).floor() as usize).clamp(1, n);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let known = rand::seq::index::sample(&mut rng, n, k)
        .into_iter()
        .map(|i| PoiId(i as u32))
        .collect();
    Ok(KnownMask { cycle, known })
}
