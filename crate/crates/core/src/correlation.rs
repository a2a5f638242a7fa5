//! Pairwise correlation metrics between POI series and the thresholded
//! correlation graph built from them.
//!
//! Two metrics are supported. The agreement form of Kendall's Tau scores two
//! binary series by `1 - mean(XOR)`. The change-correlation metric scores a
//! proxy `y` for a target `x` by the conditional probability that `x` changed
//! the same way `y` did, estimated over the cycles where `y` changed at all.
//! The literal count-ratio variant (numerator not restricted to changing
//! cycles, so the ratio may exceed 1 for mostly-static proxies) is kept as a
//! third metric for side-by-side study; the restricted form is the default.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, BufReader};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::model::{change_series, ChangeSeries, PoiId, Scenario, StateSeries};
use crate::Result;

#[derive(Copy, Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorrelationMetric {
    /// Agreement score `1 - mean(XOR)` of the raw state series.
    KendallTau,
    /// `P(change in x | same change in y)`, numerator restricted to cycles
    /// where the proxy changed.
    ChangeCorrelation,
    /// Count-ratio form with the unrestricted numerator.
    ChangeCorrelationLiteral,
}

impl CorrelationMetric {
    pub fn as_str(self) -> &'static str {
        match self {
            CorrelationMetric::KendallTau => "kendall_tau",
            CorrelationMetric::ChangeCorrelation => "change_correlation",
            CorrelationMetric::ChangeCorrelationLiteral => "change_correlation_literal",
        }
    }

    pub fn is_symmetric(self) -> bool {
        matches!(self, CorrelationMetric::KendallTau)
    }
}

impl FromStr for CorrelationMetric {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "kt" | "kendall_tau" => Ok(CorrelationMetric::KendallTau),
            "change" | "change_correlation" => Ok(CorrelationMetric::ChangeCorrelation),
            "change-literal" | "change_correlation_literal" => {
                Ok(CorrelationMetric::ChangeCorrelationLiteral)
            }
            other => Err(format!(
                "unknown metric `{other}` (expected kt, change, or change-literal)"
            )),
        }
    }
}

/// Agreement form of Kendall's Tau for binary series: `1 - (1/n) sum XOR`.
pub fn kendall_tau(x: &StateSeries, y: &StateSeries) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch {
            left: x.len(),
            right: y.len(),
        });
    }
    if x.is_empty() {
        return Err(Error::EmptySeries);
    }
    let disagreements = x
        .states()
        .iter()
        .zip(y.states())
        .filter(|(a, b)| a != b)
        .count();
    Ok(1.0 - disagreements as f64 / x.len() as f64)
}

/// `P(change in x | same change in y)` over aligned change series: the number
/// of cycles where `y` changed and `x` changed identically, divided by the
/// number of cycles where `y` changed. Returns 0 when the proxy never changed
/// (no evidence).
pub fn change_correlation(dx: &ChangeSeries, dy: &ChangeSeries) -> Result<f64> {
    if dx.len() != dy.len() {
        return Err(Error::LengthMismatch {
            left: dx.len(),
            right: dy.len(),
        });
    }
    let mut denom = 0usize;
    let mut num = 0usize;
    for (a, b) in dx.deltas().iter().zip(dy.deltas()) {
        if *b != 0 {
            denom += 1;
            if a == b {
                num += 1;
            }
        }
    }
    if denom == 0 {
        Ok(0.0)
    } else {
        Ok(num as f64 / denom as f64)
    }
}

/// Count-ratio variant with the unrestricted numerator `count(dx_i = dy_i)`.
/// Can exceed 1 when the proxy is mostly static; returns 0 for a never-
/// changing proxy.
pub fn change_correlation_literal(dx: &ChangeSeries, dy: &ChangeSeries) -> Result<f64> {
    if dx.len() != dy.len() {
        return Err(Error::LengthMismatch {
            left: dx.len(),
            right: dy.len(),
        });
    }
    let denom = dy.deltas().iter().filter(|&&d| d != 0).count();
    if denom == 0 {
        return Ok(0.0);
    }
    let num = dx
        .deltas()
        .iter()
        .zip(dy.deltas())
        .filter(|(a, b)| a == b)
        .count();
    Ok(num as f64 / denom as f64)
}

/// Directed weighted graph of prediction coefficients. An edge `(src, dst)`
/// carries the weight of using `src` to predict `dst`; only edges at or above
/// the pruning threshold are stored, and self-edges never are.
#[derive(Clone, Debug)]
pub struct CorrelationGraph {
    labels: Vec<String>,
    edges: BTreeMap<(PoiId, PoiId), f64>,
    /// Reverse adjacency `dst -> [(src, weight)]`, kept in sync with `edges`
    /// so in-edge scans cost O(in-degree) instead of O(E).
    in_index: Vec<Vec<(PoiId, f64)>>,
    metric: CorrelationMetric,
    threshold: f64,
    horizon: usize,
}

impl PartialEq for CorrelationGraph {
    fn eq(&self, other: &Self) -> bool {
        self.labels == other.labels
            && self.edges == other.edges
            && self.metric == other.metric
            && self.threshold == other.threshold
            && self.horizon == other.horizon
    }
}

impl CorrelationGraph {
    pub fn new(
        labels: Vec<String>,
        edges: BTreeMap<(PoiId, PoiId), f64>,
        metric: CorrelationMetric,
        threshold: f64,
        horizon: usize,
    ) -> Result<Self> {
        if labels.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidProblem(
                "graph labels must be sorted and unique".into(),
            ));
        }
        let n = labels.len() as u32;
        for (&(src, dst), &w) in &edges {
            if src.0 >= n || dst.0 >= n {
                return Err(Error::InvalidProblem(format!(
                    "edge ({src}, {dst}) references a node outside 0..{n}"
                )));
            }
            if src == dst {
                return Err(Error::InvalidProblem(format!("self-edge on node {src}")));
            }
            if w < threshold {
                return Err(Error::InvalidProblem(format!(
                    "edge ({src}, {dst}) weight {w} below threshold {threshold}"
                )));
            }
        }
        let mut in_index = vec![Vec::new(); labels.len()];
        for (&(src, dst), &w) in &edges {
            in_index[dst.index()].push((src, w));
        }
        Ok(CorrelationGraph {
            labels,
            edges,
            in_index,
            metric,
            threshold,
            horizon,
        })
    }

    pub fn n(&self) -> usize {
        self.labels.len()
    }

    pub fn nodes(&self) -> impl Iterator<Item = PoiId> {
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

    pub fn metric(&self) -> CorrelationMetric {
        self.metric
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn weight(&self, src: PoiId, dst: PoiId) -> Option<f64> {
        self.edges.get(&(src, dst)).copied()
    }

    pub fn edges(&self) -> impl Iterator<Item = (PoiId, PoiId, f64)> + '_ {
        self.edges.iter().map(|(&(s, d), &w)| (s, d, w))
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Edges predicting `dst`, i.e. all `(src, weight)` with an edge
    /// `src -> dst`.
    pub fn in_edges(&self, dst: PoiId) -> impl Iterator<Item = (PoiId, f64)> + '_ {
        self.in_index[dst.index()].iter().copied()
    }

    /// Edges out of `src`: all `(dst, weight)` with an edge `src -> dst`.
    pub fn out_edges(&self, src: PoiId) -> impl Iterator<Item = (PoiId, f64)> + '_ {
        self.edges
            .range((src, PoiId(0))..=(src, PoiId(u32::MAX)))
            .map(|(&(_, d), &w)| (d, w))
    }

    /// Writes the graph as `source,target,weight` CSV with a leading comment
    /// line recording metric, threshold, and horizon.
    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let mut out = String::new();
        out.push_str(&format!(
            "# metric={} threshold={} horizon={}\n",
            self.metric.as_str(),
            self.threshold,
            self.horizon
        ));
        out.push_str("source,target,weight\n");
        for (src, dst, w) in self.edges() {
            out.push_str(&format!("{},{},{}\n", self.label(src), self.label(dst), w));
        }
        std::fs::write(path, out).map_err(|e| Error::io(path, e))
    }

    /// Reads a graph written by [`save_csv`](Self::save_csv). The node set is
    /// the union of labels appearing in the edge list.
    pub fn load_csv(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let reader = BufReader::new(file);
        let mut metric = CorrelationMetric::KendallTau;
        let mut threshold = 0.0;
        let mut horizon = 1;
        let mut rows: Vec<(String, String, f64)> = Vec::new();
        let mut saw_header = false;
        for (idx, line) in reader.lines().enumerate() {
            let lineno = idx + 1;
            let line = line.map_err(|e| Error::io(path, e))?;
            let line = line.trim_end();
            if line.is_empty() {
                continue;
            }
            if let Some(comment) = line.strip_prefix('#') {
                for token in comment.split_whitespace() {
                    if let Some((key, value)) = token.split_once('=') {
                        match key {
                            "metric" => {
                                metric = value
                                    .parse()
                                    .map_err(|e: String| Error::parse(path, lineno, e))?
                            }
                            "threshold" => {
                                threshold = value.parse().map_err(|_| {
                                    Error::parse(path, lineno, format!("bad threshold `{value}`"))
                                })?
                            }
                            "horizon" => {
                                horizon = value.parse().map_err(|_| {
                                    Error::parse(path, lineno, format!("bad horizon `{value}`"))
                                })?
                            }
                            _ => {}
                        }
                    }
                }
                continue;
            }
            if !saw_header {
                if line != "source,target,weight" {
                    return Err(Error::parse(
                        path,
                        lineno,
                        format!("expected header `source,target,weight`, got `{line}`"),
                    ));
                }
                saw_header = true;
                continue;
            }
            let mut fields = line.split(',');
            let (src, dst, w) = match (fields.next(), fields.next(), fields.next(), fields.next())
            {
                (Some(s), Some(d), Some(w), None) => (s, d, w),
                _ => return Err(Error::parse(path, lineno, "expected 3 fields")),
            };
            let w: f64 = w
                .parse()
                .map_err(|_| Error::parse(path, lineno, format!("bad weight `{w}`")))?;
            rows.push((src.to_string(), dst.to_string(), w));
        }
        if !saw_header {
            return Err(Error::parse(path, 1, "missing header `source,target,weight`"));
        }
        let mut labels: Vec<String> = rows
            .iter()
            .flat_map(|(s, d, _)| [s.clone(), d.clone()])
            .collect();
        labels.sort();
        labels.dedup();
        let index = |label: &str| -> PoiId {
            PoiId(labels.binary_search_by(|l| l.as_str().cmp(label)).unwrap() as u32)
        };
        let edges = rows
            .into_iter()
            .map(|(s, d, w)| ((index(&s), index(&d)), w))
            .collect();
        CorrelationGraph::new(labels, edges, metric, threshold, horizon)
    }
}

/// Computes all pairwise weights over cycles `1..=horizon` and retains edges
/// with weight at or above `threshold`.
///
/// For the change metrics the stored edge `(j, i)` weighs proxy `j` predicting
/// target `i`; Kendall's Tau produces a symmetric edge set.
pub fn build_graph(
    scenario: &Scenario,
    horizon: usize,
    metric: CorrelationMetric,
    threshold: f64,
) -> Result<CorrelationGraph> {
    if horizon == 0 || horizon > scenario.cycle_count() {
        return Err(Error::InvalidHorizon {
            horizon,
            max: scenario.cycle_count(),
        });
    }
    if !(0.0..=1.0).contains(&threshold) {
        return Err(Error::OutOfRange {
            name: "threshold",
            value: threshold,
        });
    }
    let n = scenario.n();
    let mut edges = BTreeMap::new();
    match metric {
        CorrelationMetric::KendallTau => {
            let truncated: Vec<StateSeries> = scenario
                .poi_ids()
                .map(|id| scenario.series(id).truncated(horizon))
                .collect();
            for i in 0..n {
                for j in (i + 1)..n {
                    let w = kendall_tau(&truncated[i], &truncated[j])?;
                    if w >= threshold {
                        edges.insert((PoiId(i as u32), PoiId(j as u32)), w);
                        edges.insert((PoiId(j as u32), PoiId(i as u32)), w);
                    }
                }
            }
        }
        CorrelationMetric::ChangeCorrelation | CorrelationMetric::ChangeCorrelationLiteral => {
            let deltas: Vec<ChangeSeries> = scenario
                .poi_ids()
                .map(|id| change_series(scenario.series(id)).map(|cs| cs.truncated(horizon)))
                .collect::<Result<_>>()?;
            let score = match metric {
                CorrelationMetric::ChangeCorrelation => change_correlation,
                _ => change_correlation_literal,
            };
            for target in 0..n {
                for proxy in 0..n {
                    if target == proxy {
                        continue;
                    }
                    let w = score(&deltas[target], &deltas[proxy])?;
                    if w >= threshold {
                        edges.insert((PoiId(proxy as u32), PoiId(target as u32)), w);
                    }
                }
            }
        }
    }
    CorrelationGraph::new(
        scenario.labels().to_vec(),
        edges,
        metric,
        threshold,
        horizon,
    )
}

/// The candidate maximizing the metric against `target` over cycles
/// `1..=horizon`, with ties broken toward the smallest id. For the change
/// metrics this is the `(y_best, P_best)` pair driving the hybrid predictor's
/// spatial branch.
pub fn best_proxy(
    scenario: &Scenario,
    target: PoiId,
    candidates: &BTreeSet<PoiId>,
    horizon: usize,
    metric: CorrelationMetric,
) -> Result<(PoiId, f64)> {
    if candidates.is_empty() {
        return Err(Error::EmptyCandidates);
    }
    if candidates.contains(&target) {
        return Err(Error::InvalidProblem(format!(
            "target {target} must not be among the candidates"
        )));
    }
    if horizon == 0 || horizon > scenario.cycle_count() {
        return Err(Error::InvalidHorizon {
            horizon,
            max: scenario.cycle_count(),
        });
    }
    let target_states = scenario.series(target).truncated(horizon);
    let target_deltas = change_series(scenario.series(target))?.truncated(horizon);
    let mut best: Option<(PoiId, f64)> = None;
    for &cand in candidates {
        let score = match metric {
            CorrelationMetric::KendallTau => {
                kendall_tau(&target_states, &scenario.series(cand).truncated(horizon))?
            }
            CorrelationMetric::ChangeCorrelation => change_correlation(
                &target_deltas,
                &change_series(scenario.series(cand))?.truncated(horizon),
            )?,
            CorrelationMetric::ChangeCorrelationLiteral => change_correlation_literal(
                &target_deltas,
                &change_series(scenario.series(cand))?.truncated(horizon),
            )?,
        };
        match best {
            Some((_, s)) if score <= s => {}
            _ => best = Some((cand, score)),
        }
    }
    Ok(best.expect("candidates nonempty"))
}
