//! Online admission control and chain embedding.
//!
//! Every node carries a cost exponential in its relative load,
//! `w_v = κ(v) · (μ^{used(v)/κ(v)} − 1)` with `μ = 2ℓ + 2`. An arriving
//! request is admitted iff some candidate chain satisfies
//! `Σ_positions w_v/κ(v) ≤ ℓ`; among admissible chains the cheapest one is
//! assigned (ties go to enumeration order). Logarithms are base 2
//! throughout; the analysis needs `κ(v) ≥ log2 μ` at every node, which
//! `ace_run` checks and reports.
//!
//! Requests cannot be delayed or preempted. Rejection is a normal outcome,
//! not an error. A first-fit [`greedy_run`] baseline admits whenever some
//! candidate chain has residual capacity.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::instance::{ChainCandidate, Instance, InstanceError, NetworkGraph, NodeId};
use crate::offline::SolveResult;

/// Slack for the admission comparison: chains are admissible at cost up to
/// the threshold plus this, so exact ties admit.
pub const ADMISSION_EPSILON: f64 = 1e-9;

/// Cost-base and admission-threshold parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AceParams {
    /// Exponential cost base; `2ℓ + 2` unless overridden for experiments.
    pub mu: f64,
    /// Chain length (the admission threshold in graph mode). For explicit
    /// instances with per-request chain lengths this is the maximum length
    /// and each request is thresholded by its own candidate length.
    pub ell: usize,
}

impl AceParams {
    pub fn standard(ell: usize) -> Self {
        AceParams { mu: (2 * ell + 2) as f64, ell }
    }

    /// Standard parameters for an instance; `ell` is the placement's chain
    /// length, or the longest candidate length in explicit mode (at least 1
    /// so the cost base stays meaningful on degenerate instances).
    pub fn for_instance(instance: &Instance) -> Self {
        AceParams::standard(instance.max_chain_length().max(1))
    }

    pub fn with_mu(self, mu: f64) -> Self {
        AceParams { mu, ..self }
    }

    /// Whether `mu` is the standard `2ℓ + 2`.
    pub fn is_standard(&self) -> bool {
        self.mu == (2 * self.ell + 2) as f64
    }

    /// Capacity floor `log2 μ` required by the analysis.
    pub fn min_capacity(&self) -> f64 {
        self.mu.log2()
    }

    /// `1 + 2·log2 μ`, the proven bound on offline/online admissions.
    pub fn competitive_bound(&self) -> f64 {
        1.0 + 2.0 * self.mu.log2()
    }
}

/// Mutable state of one online run: per-node admitted position counts, the
/// admitted request indices in arrival order, and their chains.
#[derive(Debug, Clone, PartialEq)]
pub struct OnlineState {
    used: Vec<u32>,
    admitted: Vec<usize>,
    assignment: BTreeMap<usize, ChainCandidate>,
    step: usize,
}

impl OnlineState {
    pub fn new(node_count: usize) -> Self {
        OnlineState {
            used: vec![0; node_count],
            admitted: Vec::new(),
            assignment: BTreeMap::new(),
            step: 0,
        }
    }

    /// Positions of admitted chains hosted at `v` (counted with
    /// multiplicity).
    pub fn used(&self, v: NodeId) -> u32 {
        self.used[v]
    }

    pub fn admitted(&self) -> &[usize] {
        &self.admitted
    }

    pub fn assignment(&self) -> &BTreeMap<usize, ChainCandidate> {
        &self.assignment
    }

    /// Index of the next request to be processed.
    pub fn step(&self) -> usize {
        self.step
    }

    pub fn into_result(self, node_count: usize) -> SolveResult {
        SolveResult::from_assignment(node_count, self.assignment, false)
    }
}

/// Fraction of `v`'s capacity consumed by admitted chains, in `[0, 1]`.
pub fn relative_load(state: &OnlineState, graph: &NetworkGraph, v: NodeId) -> f64 {
    f64::from(state.used(v)) / f64::from(graph.capacity(v))
}

/// Exponential node cost `κ(v) · (μ^{λ_v} − 1)`; zero at an idle node.
pub fn node_weight(state: &OnlineState, graph: &NetworkGraph, params: &AceParams, v: NodeId) -> f64 {
    f64::from(graph.capacity(v)) * (params.mu.powf(relative_load(state, graph, v)) - 1.0)
}

/// Admission cost of a chain: `Σ (μ^{λ_v} − 1)` over chain positions, a
/// node appearing at several positions contributing once per position (at
/// its current load).
pub fn chain_cost(
    state: &OnlineState,
    graph: &NetworkGraph,
    params: &AceParams,
    chain: &ChainCandidate,
) -> f64 {
    chain
        .nodes()
        .iter()
        .map(|&v| params.mu.powf(relative_load(state, graph, v)) - 1.0)
        .sum()
}

/// Why a request was admitted or rejected.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecisionReason {
    Admitted,
    /// The candidate set was empty.
    NoCandidates,
    /// Every candidate chain exceeded the cost threshold.
    AllChainsTooExpensive,
    /// Some chain met the cost threshold but lacked residual capacity at a
    /// node; only possible when the capacity assumption is violated (e.g. a
    /// non-standard `mu`, or a chain revisiting a nearly full node).
    CapacityGuard,
}

/// Outcome of one admission decision. `chain` and `cost` are present
/// exactly on admission; `cost` is the admission-condition left-hand side
/// of the chosen chain.
#[derive(Debug, Clone, PartialEq)]
pub struct Decision {
    pub reason: DecisionReason,
    pub chain: Option<ChainCandidate>,
    pub cost: Option<f64>,
}

impl Decision {
    pub fn admitted(&self) -> bool {
        self.reason == DecisionReason::Admitted
    }
}

fn chain_fits(state: &OnlineState, graph: &NetworkGraph, chain: &ChainCandidate) -> bool {
    let mut extra: BTreeMap<NodeId, u32> = BTreeMap::new();
    for &v in chain.nodes() {
        *extra.entry(v).or_insert(0) += 1;
    }
    extra
        .iter()
        .all(|(&v, &m)| state.used(v) + m <= graph.capacity(v))
}

/// Processes one request: picks the cheapest candidate whose cost is within
/// the request's threshold (its candidate length) and which has residual
/// capacity at every position; updates the state on admission.
pub fn ace_step(
    state: &mut OnlineState,
    graph: &NetworkGraph,
    params: &AceParams,
    candidates: &[ChainCandidate],
) -> Decision {
    let index = state.step;
    state.step += 1;
    if candidates.is_empty() {
        return Decision { reason: DecisionReason::NoCandidates, chain: None, cost: None };
    }
    let threshold = candidates[0].len() as f64;
    let mut chosen: Option<(usize, f64)> = None;
    let mut cheap_but_blocked = false;
    for (c, chain) in candidates.iter().enumerate() {
        let cost = chain_cost(state, graph, params, chain);
        if cost <= threshold + ADMISSION_EPSILON {
            if !chain_fits(state, graph, chain) {
                cheap_but_blocked = true;
                continue;
            }
            if chosen.is_none_or(|(_, best)| cost < best) {
                chosen = Some((c, cost));
            }
        }
    }
    match chosen {
        Some((c, cost)) => {
            let chain = candidates[c].clone();
            for &v in chain.nodes() {
                state.used[v] += 1;
            }
            state.admitted.push(index);
            state.assignment.insert(index, chain.clone());
            Decision { reason: DecisionReason::Admitted, chain: Some(chain), cost: Some(cost) }
        }
        None if cheap_but_blocked => {
            Decision { reason: DecisionReason::CapacityGuard, chain: None, cost: None }
        }
        None => Decision {
            reason: DecisionReason::AllChainsTooExpensive,
            chain: None,
            cost: None,
        },
    }
}

/// One trace record per processed request, sufficient to re-check the run's
/// invariants step by step. `total_weight` is `Σ_v w_v` after the decision;
/// `admitted_count` the number of admitted requests so far.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub index: usize,
    pub decision: DecisionReason,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub chain: Option<ChainCandidate>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cost: Option<f64>,
    pub total_weight: f64,
    pub admitted_count: usize,
}

/// Result of a full online run.
#[derive(Debug, Clone, PartialEq)]
pub struct AceRun {
    pub result: SolveResult,
    pub trace: Vec<TraceRecord>,
    pub params: AceParams,
    /// Whether `min_v κ(v) ≥ log2 μ` held; the competitive guarantee only
    /// applies when it does. Execution proceeds either way.
    pub min_cap_satisfied: bool,
}

fn total_weight(state: &OnlineState, graph: &NetworkGraph, params: &AceParams) -> f64 {
    (0..graph.node_count())
        .map(|v| node_weight(state, graph, params, v))
        .sum()
}

/// Runs the online algorithm over the whole request sequence in arrival
/// order. When the capacity assumption `min κ(v) ≥ log2 μ` fails a warning
/// is logged and flagged in the returned run.
pub fn ace_run(instance: &Instance, params: &AceParams) -> Result<AceRun, InstanceError> {
    let graph = instance.graph();
    let min_cap_satisfied = (0..graph.node_count())
        .all(|v| f64::from(graph.capacity(v)) >= params.min_capacity());
    if !min_cap_satisfied {
        log::warn!(
            "capacity assumption violated: min capacity < log2(mu) = {:.4}; \
             the competitive guarantee does not apply",
            params.min_capacity()
        );
    }
    let candidate_sets = instance.candidate_sets()?;
    let mut state = OnlineState::new(graph.node_count());
    let mut trace = Vec::with_capacity(candidate_sets.len());
    for (index, candidates) in candidate_sets.iter().enumerate() {
        let decision = ace_step(&mut state, graph, params, candidates);
        trace.push(TraceRecord {
            index,
            decision: decision.reason,
            chain: decision.chain,
            cost: decision.cost,
            total_weight: total_weight(&state, graph, params),
            admitted_count: state.admitted().len(),
        });
    }
    Ok(AceRun {
        result: state.into_result(graph.node_count()),
        trace,
        params: *params,
        min_cap_satisfied,
    })
}

/// First-fit baseline: admits a request iff some candidate chain has
/// residual capacity at every position, choosing the first such chain.
pub fn greedy_run(instance: &Instance) -> Result<SolveResult, InstanceError> {
    let graph = instance.graph();
    let candidate_sets = instance.candidate_sets()?;
    let mut state = OnlineState::new(graph.node_count());
    for candidates in &candidate_sets {
        let index = state.step;
        state.step += 1;
        if let Some(chain) = candidates.iter().find(|c| chain_fits(&state, graph, c)) {
            for &v in chain.nodes() {
                state.used[v] += 1;
            }
            state.admitted.push(index);
            state.assignment.insert(index, chain.clone());
        }
    }
    Ok(state.into_result(graph.node_count()))
}

/// Anything that consumes a request sequence one request at a time,
/// returning the assigned chain on admission. Used to drive arbitrary
/// admission policies through the adversary.
pub trait OnlineAlgorithm {
    fn decide(&mut self, candidates: &[ChainCandidate]) -> Option<ChainCandidate>;
}

/// The exponential-cost policy as a reusable [`OnlineAlgorithm`].
pub struct AcePolicy {
    graph: NetworkGraph,
    params: AceParams,
    state: OnlineState,
}

impl AcePolicy {
    pub fn new(instance: &Instance, params: AceParams) -> Self {
        AcePolicy {
            graph: instance.graph().clone(),
            params,
            state: OnlineState::new(instance.graph().node_count()),
        }
    }

    pub fn state(&self) -> &OnlineState {
        &self.state
    }
}

impl OnlineAlgorithm for AcePolicy {
    fn decide(&mut self, candidates: &[ChainCandidate]) -> Option<ChainCandidate> {
        ace_step(&mut self.state, &self.graph, &self.params, candidates).chain
    }
}

/// First-fit as a reusable [`OnlineAlgorithm`].
pub struct GreedyPolicy {
    graph: NetworkGraph,
    state: OnlineState,
}

impl GreedyPolicy {
    pub fn new(instance: &Instance) -> Self {
        GreedyPolicy {
            graph: instance.graph().clone(),
            state: OnlineState::new(instance.graph().node_count()),
        }
    }
}

impl OnlineAlgorithm for GreedyPolicy {
    fn decide(&mut self, candidates: &[ChainCandidate]) -> Option<ChainCandidate> {
        let index = self.state.step;
        self.state.step += 1;
        let chain = candidates
            .iter()
            .find(|c| chain_fits(&self.state, &self.graph, c))?
            .clone();
        for &v in chain.nodes() {
            self.state.used[v] += 1;
        }
        self.state.admitted.push(index);
        self.state.assignment.insert(index, chain.clone());
        Some(chain)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::Request;
    use crate::offline::verify_solution;

    fn single_node(capacity: u32) -> NetworkGraph {
        NetworkGraph::new(1, [], vec![capacity]).unwrap()
    }

    #[test]
    fn relative_load_basics() {
        let graph = single_node(3);
        let mut state = OnlineState::new(1);
        assert_eq!(relative_load(&state, &graph, 0), 0.0);
        state.used[0] = 2;
        assert!((relative_load(&state, &graph, 0) - 2.0 / 3.0).abs() < 1e-15);
        state.used[0] = 3;
        assert_eq!(relative_load(&state, &graph, 0), 1.0);
    }

    #[test]
    fn node_weight_formula() {
        let graph = single_node(3);
        let params = AceParams { mu: 4.0, ell: 1 };
        let mut state = OnlineState::new(1);
        assert_eq!(node_weight(&state, &graph, &params, 0), 0.0);
        state.used[0] = 2;
        // 3 · (4^(2/3) − 1)
        assert!((node_weight(&state, &graph, &params, 0) - 4.559526299369239).abs() < 1e-12);
        state.used[0] = 3;
        // full load: κ · (μ − 1)
        assert!((node_weight(&state, &graph, &params, 0) - 9.0).abs() < 1e-12);
    }

    #[test]
    fn chain_cost_counts_positions() {
        let graph = NetworkGraph::new(2, [], vec![2, 2]).unwrap();
        let params = AceParams::standard(2); // mu = 6
        let mut state = OnlineState::new(2);
        let chain = ChainCandidate::new(vec![0, 0]);
        assert_eq!(chain_cost(&state, &graph, &params, &chain), 0.0);
        state.used[0] = 1;
        let expected = 2.0 * (6f64.powf(0.5) - 1.0);
        assert!((chain_cost(&state, &graph, &params, &chain) - expected).abs() < 1e-12);
    }

    #[test]
    fn full_node_makes_any_chain_inadmissible() {
        // a node at λ = 1 contributes μ − 1 = 2ℓ + 1 > ℓ
        for ell in 1..5 {
            let params = AceParams::standard(ell);
            let graph = single_node(4);
            let mut state = OnlineState::new(1);
            state.used[0] = 4;
            let chain = ChainCandidate::new(vec![0; ell]);
            assert!(chain_cost(&state, &graph, &params, &chain) > ell as f64);
        }
    }

    #[test]
    fn three_requests_on_one_node() {
        // κ = 3, μ = 4, ℓ = 1: costs 0, 4^(1/3)−1, 4^(2/3)−1 against
        // threshold 1 admit, admit, reject
        let graph = single_node(3);
        let params = AceParams { mu: 4.0, ell: 1 };
        let mut state = OnlineState::new(1);
        let candidates = vec![ChainCandidate::new(vec![0])];

        let d1 = ace_step(&mut state, &graph, &params, &candidates);
        assert!(d1.admitted());
        assert_eq!(d1.cost, Some(0.0));

        let d2 = ace_step(&mut state, &graph, &params, &candidates);
        assert!(d2.admitted());
        assert!((d2.cost.unwrap() - 0.5874010519681994).abs() < 1e-12);

        let d3 = ace_step(&mut state, &graph, &params, &candidates);
        assert_eq!(d3.reason, DecisionReason::AllChainsTooExpensive);
        assert_eq!(d3.chain, None);
        assert_eq!(state.admitted(), &[0, 1]);
        assert_eq!(state.used(0), 2);
    }

    #[test]
    fn empty_candidates_reject() {
        let graph = single_node(3);
        let params = AceParams::standard(1);
        let mut state = OnlineState::new(1);
        let d = ace_step(&mut state, &graph, &params, &[]);
        assert_eq!(d.reason, DecisionReason::NoCandidates);
        assert_eq!(state.step(), 1);
    }

    #[test]
    fn cheapest_chain_wins_ties_by_order() {
        let graph = NetworkGraph::new(3, [], vec![2, 2, 2]).unwrap();
        let params = AceParams::standard(1);
        let mut state = OnlineState::new(3);
        state.used[0] = 1;
        let candidates = vec![
            ChainCandidate::new(vec![0]), // cost > 0
            ChainCandidate::new(vec![1]), // cost 0, first minimum
            ChainCandidate::new(vec![2]), // cost 0
        ];
        let d = ace_step(&mut state, &graph, &params, &candidates);
        assert_eq!(d.chain.unwrap().nodes(), &[1]);
    }

    #[test]
    fn capacity_guard_refuses_when_cost_would_admit() {
        // mu so small that a full node still looks cheap: the guard, not
        // the cost condition, must cause the rejection and be flagged
        let graph = single_node(1);
        let params = AceParams::standard(1).with_mu(1.5);
        assert!(!params.is_standard());
        let mut state = OnlineState::new(1);
        let candidates = vec![ChainCandidate::new(vec![0])];
        assert!(ace_step(&mut state, &graph, &params, &candidates).admitted());
        let d = ace_step(&mut state, &graph, &params, &candidates);
        assert_eq!(d.reason, DecisionReason::CapacityGuard);
        assert_eq!(state.used(0), 1); // never above capacity
    }

    #[test]
    fn guard_catches_repeated_positions_on_tight_nodes() {
        // chain visiting a unit-capacity node twice is cost-admissible at
        // load 0 but can never fit
        let graph = single_node(1);
        let params = AceParams::standard(2);
        let mut state = OnlineState::new(1);
        let candidates = vec![ChainCandidate::new(vec![0, 0])];
        let d = ace_step(&mut state, &graph, &params, &candidates);
        assert_eq!(d.reason, DecisionReason::CapacityGuard);
        assert_eq!(state.used(0), 0);
    }

    fn single_node_instance(capacity: u32, requests: usize) -> Instance {
        let graph = single_node(capacity);
        let reqs = (0..requests)
            .map(|_| Request::explicit(vec![ChainCandidate::new(vec![0])]))
            .collect();
        Instance::explicit_mode(graph, reqs).unwrap()
    }

    #[test]
    fn run_on_empty_sequence() {
        let inst = single_node_instance(3, 0);
        let run = ace_run(&inst, &AceParams::for_instance(&inst)).unwrap();
        assert_eq!(run.result.objective, 0);
        assert!(run.trace.is_empty());
    }

    #[test]
    fn run_matches_step_example() {
        let inst = single_node_instance(3, 3);
        let params = AceParams { mu: 4.0, ell: 1 };
        let run = ace_run(&inst, &params).unwrap();
        assert_eq!(run.result.objective, 2);
        assert_eq!(run.result.admitted, vec![0, 1]);
        assert!(run.min_cap_satisfied); // κ = 3 ≥ log2 4 = 2
        assert!(verify_solution(&inst, &run.result).unwrap().is_valid());
        // trace carries the running weight sum and admitted count
        assert_eq!(run.trace.len(), 3);
        assert_eq!(run.trace[2].admitted_count, 2);
        let w_final = 3.0 * (4f64.powf(2.0 / 3.0) - 1.0);
        assert!((run.trace[2].total_weight - w_final).abs() < 1e-12);
    }

    #[test]
    fn min_cap_flag_reports_violation() {
        let inst = single_node_instance(1, 1); // κ = 1 < log2 4
        let run = ace_run(&inst, &AceParams { mu: 4.0, ell: 1 }).unwrap();
        assert!(!run.min_cap_satisfied);
    }

    #[test]
    fn greedy_first_fit() {
        let inst = single_node_instance(1, 2);
        let result = greedy_run(&inst).unwrap();
        assert_eq!(result.objective, 1);
        assert_eq!(result.admitted, vec![0]);
        assert!(verify_solution(&inst, &result).unwrap().is_valid());
    }

    #[test]
    fn runs_are_deterministic() {
        let inst = single_node_instance(4, 6);
        let params = AceParams::for_instance(&inst);
        let a = ace_run(&inst, &params).unwrap();
        let b = ace_run(&inst, &params).unwrap();
        assert_eq!(a.trace, b.trace);
        assert_eq!(a.result, b.result);
    }

    #[test]
    fn trace_serializes_to_json_lines() {
        let inst = single_node_instance(3, 2);
        let run = ace_run(&inst, &AceParams { mu: 4.0, ell: 1 }).unwrap();
        let line = serde_json::to_string(&run.trace[0]).unwrap();
        let value: serde_json::Value = serde_json::from_str(&line).unwrap();
        assert_eq!(value["index"], 0);
        assert_eq!(value["decision"], "admitted");
        assert_eq!(value["chain"], serde_json::json!([0]));
        assert_eq!(value["admitted_count"], 1);
    }
}
