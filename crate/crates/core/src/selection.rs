//! Budgeted source selection: which POIs to query so that prediction of the
//! rest is as good as possible.
//!
//! Both greedy algorithms rank nodes by `v'_i / c_i`, where the weighted value
//! `v'_i` adds to a node's own importance the prediction credit it earns for
//! covering neighbors. The static variant computes the values once; the
//! dynamic variant recomputes them after every pick, discounting nodes that an
//! already-selected source predicts well. An exhaustive oracle over all
//! budget-feasible subsets validates both on small instances.

use std::collections::BTreeSet;
use std::io::{BufRead, BufReader};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::correlation::CorrelationGraph;
use crate::error::Error;
use crate::model::{PoiId, Scenario};
use crate::Result;

/// Maximum instance size accepted by [`exhaustive_oracle`].
pub const ORACLE_NODE_LIMIT: usize = 20;

/// How prediction credit flows to a covering node.
#[derive(Copy, Clone, PartialEq, Eq, Debug)]
pub enum CreditStrategy {
    /// Only the maximum predictor of each node is credited.
    MaxPredictor,
    /// Every in-edge credits its source (the literal weighted sum).
    FullSum,
}

impl std::str::FromStr for CreditStrategy {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "max" => Ok(CreditStrategy::MaxPredictor),
            "sum" => Ok(CreditStrategy::FullSum),
            other => Err(format!("unknown strategy `{other}` (expected max or sum)")),
        }
    }
}

/// A budgeted selection instance over a correlation graph.
#[derive(Clone, Debug)]
pub struct SelectionProblem {
    graph: CorrelationGraph,
    costs: Vec<f64>,
    values: Vec<f64>,
    budget: f64,
}

impl SelectionProblem {
    pub fn new(
        graph: CorrelationGraph,
        costs: Vec<f64>,
        values: Vec<f64>,
        budget: f64,
    ) -> Result<Self> {
        if costs.len() != graph.n() || values.len() != graph.n() {
            return Err(Error::InvalidProblem(format!(
                "costs/values cover {}/{} nodes, graph has {}",
                costs.len(),
                values.len(),
                graph.n()
            )));
        }
        if costs.iter().any(|&c| !(c > 0.0) || !c.is_finite()) {
            return Err(Error::InvalidProblem("costs must be positive".into()));
        }
        if values.iter().any(|&v| !(v >= 0.0) || !v.is_finite()) {
            return Err(Error::InvalidProblem("values must be nonnegative".into()));
        }
        if !(budget >= 0.0) || !budget.is_finite() {
            return Err(Error::InvalidProblem(format!("bad budget {budget}")));
        }
        Ok(SelectionProblem {
            graph,
            costs,
            values,
            budget,
        })
    }

    /// Instance over a scenario's costs and values.
    pub fn from_scenario(scenario: &Scenario, graph: CorrelationGraph, budget: f64) -> Result<Self> {
        let costs = scenario.poi_ids().map(|id| scenario.cost(id)).collect();
        let values = scenario.poi_ids().map(|id| scenario.value(id)).collect();
        SelectionProblem::new(graph, costs, values, budget)
    }

    pub fn graph(&self) -> &CorrelationGraph {
        &self.graph
    }

    pub fn n(&self) -> usize {
        self.graph.n()
    }

    pub fn nodes(&self) -> impl Iterator<Item = PoiId> {
        self.graph.nodes()
    }

    pub fn cost(&self, id: PoiId) -> f64 {
        self.costs[id.index()]
    }

    pub fn value(&self, id: PoiId) -> f64 {
        self.values[id.index()]
    }

    pub fn budget(&self) -> f64 {
        self.budget
    }

    pub fn total_cost(&self) -> f64 {
        self.costs.iter().sum()
    }
}

/// A chosen source subset in pick order, with each node's weighted value at
/// the moment it was evaluated.
#[derive(Clone, PartialEq, Debug)]
pub struct SelectionResult {
    pub selected: Vec<PoiId>,
    pub total_cost: f64,
    pub weighted_values: Vec<f64>,
    pub objective_estimate: f64,
}

impl SelectionResult {
    pub fn selected_set(&self) -> BTreeSet<PoiId> {
        self.selected.iter().copied().collect()
    }

    /// Writes `rank,poi_id,cost,weighted_value_at_pick` rows.
    pub fn save_csv(&self, problem: &SelectionProblem, path: &Path) -> Result<()> {
        let mut out = String::from("rank,poi_id,cost,weighted_value_at_pick\n");
        for (rank, (&id, &v)) in self.selected.iter().zip(&self.weighted_values).enumerate() {
            out.push_str(&format!(
                "{},{},{},{}\n",
                rank + 1,
                problem.graph().label(id),
                problem.cost(id),
                v
            ));
        }
        std::fs::write(path, out).map_err(|e| Error::io(path, e))
    }
}

/// Weighted values of all nodes before any selection.
///
/// Under [`CreditStrategy::MaxPredictor`], each node credits `p * v` to its
/// single strongest in-predictor (smallest id on ties); under
/// [`CreditStrategy::FullSum`], `v'_i = v_i + sum over out-edges of p_ij v_j`.
pub fn static_values(problem: &SelectionProblem, strategy: CreditStrategy) -> Vec<f64> {
    let mut weighted: Vec<f64> = problem.values.clone();
    match strategy {
        CreditStrategy::MaxPredictor => {
            for node in problem.nodes() {
                if let Some((predictor, w)) = max_in_edge(problem.graph(), node, |_| true) {
                    weighted[predictor.index()] += w * problem.value(node);
                }
            }
        }
        CreditStrategy::FullSum => {
            for src in problem.nodes() {
                for (dst, w) in problem.graph().out_edges(src) {
                    weighted[src.index()] += w * problem.value(dst);
                }
            }
        }
    }
    weighted
}

/// Weighted values of the unselected nodes given an already-selected set.
///
/// A node predicted with strength `p'` by the best selected source keeps only
/// `(1 - p') v` of its own value, and credit for covering a neighbor flows
/// only for the margin above what selected sources already provide.
pub fn dynamic_values(
    problem: &SelectionProblem,
    selected: &BTreeSet<PoiId>,
    strategy: CreditStrategy,
) -> Vec<f64> {
    let graph = problem.graph();
    // p'_i: strongest selected in-predictor of i
    let covered_by: Vec<f64> = problem
        .nodes()
        .map(|node| {
            max_in_edge(graph, node, |src| selected.contains(&src))
                .map(|(_, w)| w)
                .unwrap_or(0.0)
        })
        .collect();
    let mut weighted = vec![0.0; problem.n()];
    for node in problem.nodes() {
        if !selected.contains(&node) {
            weighted[node.index()] = (1.0 - covered_by[node.index()]) * problem.value(node);
        }
    }
    match strategy {
        CreditStrategy::MaxPredictor => {
            for node in problem.nodes() {
                if selected.contains(&node) {
                    continue;
                }
                if let Some((predictor, w)) =
                    max_in_edge(graph, node, |src| !selected.contains(&src))
                {
                    let margin = (w - covered_by[node.index()]).max(0.0);
                    weighted[predictor.index()] += margin * problem.value(node);
                }
            }
        }
        CreditStrategy::FullSum => {
            for src in problem.nodes() {
                if selected.contains(&src) {
                    continue;
                }
                for (dst, w) in graph.out_edges(src) {
                    if selected.contains(&dst) {
                        continue;
                    }
                    weighted[src.index()] += (w - covered_by[dst.index()]).max(0.0)
                        * problem.value(dst);
                }
            }
        }
    }
    weighted
}

fn max_in_edge(
    graph: &CorrelationGraph,
    dst: PoiId,
    admit: impl Fn(PoiId) -> bool,
) -> Option<(PoiId, f64)> {
    let mut best: Option<(PoiId, f64)> = None;
    for (src, w) in graph.in_edges(dst) {
        if !admit(src) {
            continue;
        }
        match best {
            Some((_, bw)) if w <= bw => {}
            _ => best = Some((src, w)),
        }
    }
    best
}

/// One pass over nodes in decreasing `v'/c` order with values computed once;
/// unaffordable nodes are skipped and the scan continues.
pub fn static_greedy(problem: &SelectionProblem, strategy: CreditStrategy) -> SelectionResult {
    let weighted = static_values(problem, strategy);
    let mut order: Vec<PoiId> = problem.nodes().collect();
    order.sort_by(|&a, &b| {
        let ra = weighted[a.index()] / problem.cost(a);
        let rb = weighted[b.index()] / problem.cost(b);
        rb.partial_cmp(&ra).unwrap().then(a.cmp(&b))
    });
    let mut result = SelectionResult {
        selected: Vec::new(),
        total_cost: 0.0,
        weighted_values: Vec::new(),
        objective_estimate: 0.0,
    };
    for id in order {
        if result.total_cost + problem.cost(id) <= problem.budget {
            result.total_cost += problem.cost(id);
            result.selected.push(id);
            result.weighted_values.push(weighted[id.index()]);
            result.objective_estimate += weighted[id.index()];
        }
    }
    result
}

/// Repeatedly picks the best `v'/c` among uncovered nodes, recomputing the
/// weighted values of all unselected nodes after every pick. Terminates once
/// every node has been considered.
pub fn dynamic_greedy(problem: &SelectionProblem, strategy: CreditStrategy) -> SelectionResult {
    let mut covered: BTreeSet<PoiId> = BTreeSet::new();
    let mut selected: BTreeSet<PoiId> = BTreeSet::new();
    let mut result = SelectionResult {
        selected: Vec::new(),
        total_cost: 0.0,
        weighted_values: Vec::new(),
        objective_estimate: 0.0,
    };
    while covered.len() < problem.n() {
        // once nothing uncovered fits the remaining budget, no further pick
        // can be selected and the recomputation loop is pure waste
        let remaining = problem.budget - result.total_cost;
        if !problem
            .nodes()
            .any(|id| !covered.contains(&id) && problem.cost(id) <= remaining)
        {
            break;
        }
        let weighted = dynamic_values(problem, &selected, strategy);
        let pick = problem
            .nodes()
            .filter(|id| !covered.contains(id))
            .max_by(|&a, &b| {
                let ra = weighted[a.index()] / problem.cost(a);
                let rb = weighted[b.index()] / problem.cost(b);
                ra.partial_cmp(&rb).unwrap().then(b.cmp(&a))
            })
            .expect("uncovered nonempty");
        covered.insert(pick);
        if result.total_cost + problem.cost(pick) <= problem.budget {
            result.total_cost += problem.cost(pick);
            selected.insert(pick);
            result.selected.push(pick);
            result.weighted_values.push(weighted[pick.index()]);
            result.objective_estimate += weighted[pick.index()];
        }
    }
    result
}

/// Shuffles the nodes with a seeded RNG and keeps every node that still fits
/// in the budget.
pub fn random_selection(problem: &SelectionProblem, seed: u64) -> SelectionResult {
    let mut order: Vec<PoiId> = problem.nodes().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);
    let mut result = SelectionResult {
        selected: Vec::new(),
        total_cost: 0.0,
        weighted_values: Vec::new(),
        objective_estimate: 0.0,
    };
    for id in order {
        if result.total_cost + problem.cost(id) <= problem.budget {
            result.total_cost += problem.cost(id);
            result.selected.push(id);
            // no weighted-value computation here; report the base value
            result.weighted_values.push(problem.value(id));
            result.objective_estimate += problem.value(id);
        }
    }
    result
}

/// The surrogate set objective both greedy algorithms climb: own value of the
/// selected nodes plus, for every unselected node, its value scaled by the
/// strongest selected predictor.
pub fn coverage_objective(problem: &SelectionProblem, subset: &BTreeSet<PoiId>) -> f64 {
    let mut total = 0.0;
    for node in problem.nodes() {
        if subset.contains(&node) {
            total += problem.value(node);
        } else if let Some((_, w)) = max_in_edge(problem.graph(), node, |src| subset.contains(&src))
        {
            total += w * problem.value(node);
        }
    }
    total
}

/// Enumerates every budget-feasible subset (instances up to
/// [`ORACLE_NODE_LIMIT`] nodes) and returns the one maximizing `objective`.
/// Ties keep the earliest subset in enumeration order.
pub fn exhaustive_oracle(
    problem: &SelectionProblem,
    objective: impl Fn(&BTreeSet<PoiId>) -> f64,
) -> Result<SelectionResult> {
    let n = problem.n();
    if n > ORACLE_NODE_LIMIT {
        return Err(Error::TooManyNodes {
            nodes: n,
            max: ORACLE_NODE_LIMIT,
        });
    }
    let mut best: Option<(BTreeSet<PoiId>, f64, f64)> = None;
    for bits in 0u32..(1u32 << n) {
        let subset: BTreeSet<PoiId> = (0..n)
            .filter(|i| bits & (1 << i) != 0)
            .map(|i| PoiId(i as u32))
            .collect();
        let cost: f64 = subset.iter().map(|&id| problem.cost(id)).sum();
        if cost > problem.budget {
            continue;
        }
        let score = objective(&subset);
        if best.as_ref().map_or(true, |(_, _, s)| score > *s) {
            best = Some((subset, cost, score));
        }
    }
    let (subset, total_cost, score) = best.expect("empty subset is always feasible");
    let selected: Vec<PoiId> = subset.into_iter().collect();
    let weighted_values = selected.iter().map(|&id| problem.value(id)).collect();
    Ok(SelectionResult {
        selected,
        total_cost,
        weighted_values,
        objective_estimate: score,
    })
}

/// Reads a `poi_id,cost,value` metadata CSV keyed by label.
pub fn load_metadata(path: &Path) -> Result<std::collections::HashMap<String, (f64, f64)>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = BufReader::new(file);
    let mut out = std::collections::HashMap::new();
    let mut saw_header = false;
    for (idx, line) in reader.lines().enumerate() {
        let lineno = idx + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        let line = line.trim_end();
        if line.is_empty() {
            continue;
        }
        if !saw_header {
            if line != "poi_id,cost,value" {
                return Err(Error::parse(
                    path,
                    lineno,
                    "expected header `poi_id,cost,value`",
                ));
            }
            saw_header = true;
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 3 {
            return Err(Error::parse(path, lineno, "expected 3 fields"));
        }
        let cost: f64 = fields[1]
            .parse()
            .map_err(|_| Error::parse(path, lineno, format!("bad cost `{}`", fields[1])))?;
        let value: f64 = fields[2]
            .parse()
            .map_err(|_| Error::parse(path, lineno, format!("bad value `{}`", fields[2])))?;
        if out.insert(fields[0].to_string(), (cost, value)).is_some() {
            return Err(Error::parse(
                path,
                lineno,
                format!("duplicate poi `{}`", fields[0]),
            ));
        }
    }
    if !saw_header {
        return Err(Error::parse(path, 1, "missing header `poi_id,cost,value`"));
    }
    Ok(out)
}
