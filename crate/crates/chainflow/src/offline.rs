//! Exact offline solvers, a solution verifier, and an LP export of the
//! underlying 0-1 program.
//!
//! Both solvers maximize the number of admitted requests subject to: each
//! admitted request is assigned exactly one chain from its candidate set,
//! and every node serves at most `capacity` chain positions. `brute_force`
//! enumerates every admission/assignment combination below a search-space
//! cap and is the oracle; `branch_and_bound` solves larger instances and
//! must agree on the objective wherever the oracle applies.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::instance::{ChainCandidate, Instance, InstanceError, NodeId};

/// Cap on `Π (|candidates_i| + 1)` above which `brute_force` refuses to run.
pub const DEFAULT_SEARCH_SPACE_CAP: u128 = 10_000_000;

/// Default number of search nodes `branch_and_bound` may expand before it
/// gives up and returns the incumbent with `optimal = false`.
pub const DEFAULT_NODE_BUDGET: u64 = 10_000_000;

#[derive(Debug, thiserror::Error)]
pub enum SolveError {
    #[error("search-space-too-large: {size} assignment combinations exceed cap {cap}")]
    SearchSpaceTooLarge { size: u128, cap: u128 },
    #[error(transparent)]
    Instance(#[from] InstanceError),
}

/// A solved (or online-produced) admission outcome.
///
/// `objective == admitted.len() == assignment.len()`; `loads` maps every
/// node to the number of assigned chain positions it serves. `optimal` is
/// true only for results proven optimal by an exact solver.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolveResult {
    pub admitted: Vec<usize>,
    pub assignment: BTreeMap<usize, ChainCandidate>,
    pub objective: usize,
    pub loads: BTreeMap<NodeId, u32>,
    pub optimal: bool,
}

impl SolveResult {
    /// Builds a result from an assignment, deriving objective and loads.
    pub fn from_assignment(
        node_count: usize,
        assignment: BTreeMap<usize, ChainCandidate>,
        optimal: bool,
    ) -> Self {
        let mut loads: BTreeMap<NodeId, u32> = (0..node_count).map(|v| (v, 0)).collect();
        for chain in assignment.values() {
            for &v in chain.nodes() {
                *loads.get_mut(&v).expect("chain nodes are in range") += 1;
            }
        }
        SolveResult {
            admitted: assignment.keys().copied().collect(),
            objective: assignment.len(),
            assignment,
            loads,
            optimal,
        }
    }

    pub fn empty(node_count: usize, optimal: bool) -> Self {
        SolveResult::from_assignment(node_count, BTreeMap::new(), optimal)
    }
}

/// A single broken requirement found by [`verify_solution`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Violation {
    /// `objective` disagrees with the admitted/assignment counts.
    ObjectiveMismatch { objective: usize, admitted: usize, assigned: usize },
    /// An admitted index is not a request of the instance.
    UnknownRequest { request: usize },
    /// An admitted request has no assigned chain.
    AdmittedWithoutAssignment { request: usize },
    /// A chain is assigned to a request that is not admitted.
    AssignmentWithoutAdmission { request: usize },
    /// The assigned chain is not in the request's candidate set.
    ChainNotCandidate { request: usize },
    /// A node serves more chain positions than its capacity.
    CapacityExceeded { node: NodeId, load: u32, capacity: u32 },
    /// The stored load map disagrees with the loads derived from the
    /// assignment.
    LoadMismatch { node: NodeId, stored: u32, derived: u32 },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::ObjectiveMismatch { objective, admitted, assigned } => write!(
                f,
                "objective {objective} does not match {admitted} admitted / {assigned} assigned"
            ),
            Violation::UnknownRequest { request } => {
                write!(f, "admitted request {request} does not exist")
            }
            Violation::AdmittedWithoutAssignment { request } => {
                write!(f, "request {request} admitted but not assigned to a chain")
            }
            Violation::AssignmentWithoutAdmission { request } => {
                write!(f, "request {request} assigned a chain but not admitted")
            }
            Violation::ChainNotCandidate { request } => {
                write!(f, "request {request} assigned a chain outside its candidate set")
            }
            Violation::CapacityExceeded { node, load, capacity } => {
                write!(f, "node {node} serves {load} positions, capacity {capacity}")
            }
            Violation::LoadMismatch { node, stored, derived } => {
                write!(f, "node {node} stores load {stored}, assignment derives {derived}")
            }
        }
    }
}

/// Outcome of checking a [`SolveResult`] against an instance. Violations
/// are data, not errors; an empty list means the result is feasible.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct VerifyReport {
    pub violations: Vec<Violation>,
}

impl VerifyReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks feasibility of a result: admission/assignment consistency,
/// candidate-set membership, per-position capacity, and load-map
/// consistency. Loads are re-derived from the assignment rather than
/// trusted.
pub fn verify_solution(
    instance: &Instance,
    result: &SolveResult,
) -> Result<VerifyReport, InstanceError> {
    let candidate_sets = instance.candidate_sets()?;
    let mut violations = Vec::new();

    if result.objective != result.admitted.len() || result.objective != result.assignment.len() {
        violations.push(Violation::ObjectiveMismatch {
            objective: result.objective,
            admitted: result.admitted.len(),
            assigned: result.assignment.len(),
        });
    }
    for &i in &result.admitted {
        if i >= instance.requests().len() {
            violations.push(Violation::UnknownRequest { request: i });
        } else if !result.assignment.contains_key(&i) {
            violations.push(Violation::AdmittedWithoutAssignment { request: i });
        }
    }
    let mut derived: BTreeMap<NodeId, u32> =
        (0..instance.graph().node_count()).map(|v| (v, 0)).collect();
    for (&i, chain) in &result.assignment {
        if !result.admitted.contains(&i) {
            violations.push(Violation::AssignmentWithoutAdmission { request: i });
        }
        if i >= instance.requests().len() {
            violations.push(Violation::UnknownRequest { request: i });
            continue;
        }
        if !candidate_sets[i].contains(chain) {
            violations.push(Violation::ChainNotCandidate { request: i });
        }
        for &v in chain.nodes() {
            if let Some(load) = derived.get_mut(&v) {
                *load += 1;
            }
        }
    }
    for (&v, &load) in &derived {
        let capacity = instance.graph().capacity(v);
        if load > capacity {
            violations.push(Violation::CapacityExceeded { node: v, load, capacity });
        }
        let stored = result.loads.get(&v).copied().unwrap_or(0);
        if stored != load {
            violations.push(Violation::LoadMismatch { node: v, stored, derived: load });
        }
    }
    for (&v, &stored) in &result.loads {
        if v >= instance.graph().node_count() {
            violations.push(Violation::LoadMismatch { node: v, stored, derived: 0 });
        }
    }
    Ok(VerifyReport { violations })
}

fn fits(used: &[u32], capacities: &[u32], chain: &ChainCandidate) -> bool {
    let mut extra: BTreeMap<NodeId, u32> = BTreeMap::new();
    for &v in chain.nodes() {
        *extra.entry(v).or_insert(0) += 1;
    }
    extra.iter().all(|(&v, &m)| used[v] + m <= capacities[v])
}

fn apply(used: &mut [u32], chain: &ChainCandidate, sign: i64) {
    for &v in chain.nodes() {
        used[v] = (i64::from(used[v]) + sign) as u32;
    }
}

/// Candidate solution ordering for the oracle: more admissions first, then
/// lexicographically smaller admitted index set, then lexicographically
/// smaller chain choices.
fn better(
    new_admitted: &[usize],
    new_chains: &[&ChainCandidate],
    best: &Option<(Vec<usize>, Vec<ChainCandidate>)>,
) -> bool {
    match best {
        None => true,
        Some((old_admitted, old_chains)) => {
            if new_admitted.len() != old_admitted.len() {
                return new_admitted.len() > old_admitted.len();
            }
            if new_admitted != old_admitted {
                return new_admitted < old_admitted;
            }
            new_chains.iter().map(|c| c.nodes()).lt(old_chains.iter().map(|c| c.nodes()))
        }
    }
}

/// Exhaustive oracle: tries every admission/assignment combination.
///
/// Deterministic among optima: lexicographically smallest admitted index
/// set, then lexicographically smallest chain choices. Refuses instances
/// whose combination count exceeds [`DEFAULT_SEARCH_SPACE_CAP`].
pub fn brute_force(instance: &Instance) -> Result<SolveResult, SolveError> {
    let candidate_sets = instance.candidate_sets().map_err(SolveError::from)?;
    let size = candidate_sets
        .iter()
        .fold(1u128, |acc, c| acc.saturating_mul(c.len() as u128 + 1));
    if size > DEFAULT_SEARCH_SPACE_CAP {
        return Err(SolveError::SearchSpaceTooLarge { size, cap: DEFAULT_SEARCH_SPACE_CAP });
    }

    struct Search<'a> {
        candidate_sets: &'a [Vec<ChainCandidate>],
        capacities: &'a [u32],
        used: Vec<u32>,
        admitted: Vec<usize>,
        chains: Vec<&'a ChainCandidate>,
        best: Option<(Vec<usize>, Vec<ChainCandidate>)>,
    }

    impl<'a> Search<'a> {
        fn recurse(&mut self, index: usize) {
            // strict prune only: equal-cardinality ties must still be
            // explored to honor the lexicographic tie-break
            if let Some((best_admitted, _)) = &self.best {
                let remaining = self.candidate_sets.len() - index;
                if self.admitted.len() + remaining < best_admitted.len() {
                    return;
                }
            }
            if index == self.candidate_sets.len() {
                if better(&self.admitted, &self.chains, &self.best) {
                    self.best = Some((
                        self.admitted.clone(),
                        self.chains.iter().map(|&c| c.clone()).collect(),
                    ));
                }
                return;
            }
            for chain in &self.candidate_sets[index] {
                if fits(&self.used, self.capacities, chain) {
                    apply(&mut self.used, chain, 1);
                    self.admitted.push(index);
                    self.chains.push(chain);
                    self.recurse(index + 1);
                    self.chains.pop();
                    self.admitted.pop();
                    apply(&mut self.used, chain, -1);
                }
            }
            self.recurse(index + 1); // reject
        }
    }

    let mut search = Search {
        candidate_sets: &candidate_sets,
        capacities: instance.graph().capacities(),
        used: vec![0; instance.graph().node_count()],
        admitted: Vec::new(),
        chains: Vec::new(),
        best: None,
    };
    search.recurse(0);

    let (admitted, chains) = search.best.expect("the all-rejected solution always exists");
    let assignment = admitted.iter().copied().zip(chains).collect();
    Ok(SolveResult::from_assignment(instance.graph().node_count(), assignment, true))
}

/// Tuning knobs for [`branch_and_bound`].
#[derive(Debug, Clone, Copy)]
pub struct BranchAndBoundConfig {
    /// Search nodes to expand before returning the incumbent as
    /// non-optimal.
    pub node_budget: u64,
}

impl Default for BranchAndBoundConfig {
    fn default() -> Self {
        BranchAndBoundConfig { node_budget: DEFAULT_NODE_BUDGET }
    }
}

/// Depth-first branch-and-bound over requests ordered by ascending
/// candidate-set size.
///
/// The bound is `admitted so far + requests left`; a subtree is pruned when
/// it cannot beat the incumbent. Requests with identical candidate lists
/// are interchangeable, so the search also enforces that within such a run
/// admissions form a prefix with non-decreasing chain indices; this prunes
/// permutations of the same solution and is what makes the reduction
/// instances (every request shares one candidate list) tractable.
pub fn branch_and_bound(instance: &Instance) -> Result<SolveResult, SolveError> {
    branch_and_bound_with(instance, BranchAndBoundConfig::default())
}

pub fn branch_and_bound_with(
    instance: &Instance,
    config: BranchAndBoundConfig,
) -> Result<SolveResult, SolveError> {
    let candidate_sets = instance.candidate_sets().map_err(SolveError::from)?;
    let mut order: Vec<usize> = (0..candidate_sets.len()).collect();
    order.sort_by(|&a, &b| {
        (candidate_sets[a].len(), &candidate_sets[a], a)
            .cmp(&(candidate_sets[b].len(), &candidate_sets[b], b))
    });

    // same_as_previous[p]: request at position p has the same candidate
    // list as the one at position p-1
    let same_as_previous: Vec<bool> = order
        .windows(2)
        .map(|w| candidate_sets[w[0]] == candidate_sets[w[1]])
        .collect();

    struct Search<'a> {
        order: &'a [usize],
        same_as_previous: &'a [bool],
        candidate_sets: &'a [Vec<ChainCandidate>],
        capacities: &'a [u32],
        used: Vec<u32>,
        current: Vec<Option<usize>>, // chain index per position
        best: BTreeMap<usize, ChainCandidate>,
        nodes_left: u64,
        exhausted: bool,
    }

    enum Previous {
        Admitted(usize),
        Rejected,
        Unrelated,
    }

    impl<'a> Search<'a> {
        fn recurse(&mut self, position: usize, admitted: usize, previous: Previous) {
            if self.nodes_left == 0 {
                self.exhausted = true;
                return;
            }
            self.nodes_left -= 1;
            let remaining = self.order.len() - position;
            if admitted + remaining <= self.best.len() && !self.best.is_empty() {
                return;
            }
            if position == self.order.len() {
                if admitted > self.best.len() {
                    self.best = self
                        .current
                        .iter()
                        .enumerate()
                        .filter_map(|(p, choice)| {
                            choice.map(|c| {
                                (self.order[p], self.candidate_sets[self.order[p]][c].clone())
                            })
                        })
                        .collect();
                }
                return;
            }
            let request = self.order[position];
            let grouped = position > 0 && self.same_as_previous[position - 1];
            let (first_chain, may_admit) = match previous {
                Previous::Admitted(c) if grouped => (c, true),
                Previous::Rejected if grouped => (0, false),
                _ => (0, true),
            };
            if may_admit {
                for c in first_chain..self.candidate_sets[request].len() {
                    let chain = &self.candidate_sets[request][c];
                    if fits(&self.used, self.capacities, chain) {
                        apply(&mut self.used, chain, 1);
                        self.current[position] = Some(c);
                        self.recurse(position + 1, admitted + 1, Previous::Admitted(c));
                        self.current[position] = None;
                        apply(&mut self.used, chain, -1);
                        if self.exhausted {
                            return;
                        }
                    }
                }
            }
            self.recurse(position + 1, admitted, Previous::Rejected);
        }
    }

    let request_count = order.len();
    let mut search = Search {
        order: &order,
        same_as_previous: &same_as_previous,
        candidate_sets: &candidate_sets,
        capacities: instance.graph().capacities(),
        used: vec![0; instance.graph().node_count()],
        current: vec![None; request_count],
        best: BTreeMap::new(),
        nodes_left: config.node_budget,
        exhausted: false,
    };
    search.recurse(0, 0, Previous::Unrelated);

    let optimal = !search.exhausted;
    Ok(SolveResult::from_assignment(instance.graph().node_count(), search.best, optimal))
}

// ---------------------------------------------------------------------------
// LP export of the 0-1 program
// ---------------------------------------------------------------------------

/// Distinct chains of an instance in deterministic order: enumeration order
/// in graph mode, first occurrence across candidate lists in explicit mode.
fn chain_universe(
    instance: &Instance,
    candidate_sets: &[Vec<ChainCandidate>],
) -> Result<Vec<ChainCandidate>, InstanceError> {
    match instance.placement() {
        Some(placement) => placement.enumerate_chains(),
        None => {
            let mut seen = std::collections::BTreeSet::new();
            let mut chains = Vec::new();
            for set in candidate_sets {
                for chain in set {
                    if seen.insert(chain.clone()) {
                        chains.push(chain.clone());
                    }
                }
            }
            Ok(chains)
        }
    }
}

/// Writes the instance's 0-1 program in CPLEX LP format.
///
/// Binary variables: `x_<i>` (request `i` admitted), `xc_<c>` (chain `c`
/// selected), `xc_<c>_r<i>` (request `i` assigned to chain `c`; only
/// emitted when the chain is in the request's candidate set, which encodes
/// the membership restriction by omission), `xv_<v>` (node `v` used).
/// Row families: `assign_r<i>` ties admission to exactly one assignment,
/// `link_c<c>_v<v>` forces `xv` on for selected chains, `sel_v<v>` forces
/// it off for unused nodes, `cap_v<v>` bounds assigned positions by
/// capacity (a node appearing at several positions of a chain counts once
/// per position).
pub fn export_ilp(instance: &Instance) -> Result<String, SolveError> {
    use std::fmt::Write;

    let candidate_sets = instance.candidate_sets().map_err(SolveError::from)?;
    let chains = chain_universe(instance, &candidate_sets).map_err(SolveError::from)?;
    let chain_index: BTreeMap<&ChainCandidate, usize> =
        chains.iter().enumerate().map(|(i, c)| (c, i)).collect();
    let n = instance.graph().node_count();
    let k = candidate_sets.len();

    // per-request candidate chain indices, in candidate order
    let request_chains: Vec<Vec<usize>> = candidate_sets
        .iter()
        .map(|set| set.iter().map(|c| chain_index[c]).collect())
        .collect();

    let mut out = String::new();
    out.push_str("Maximize\n obj:");
    if k == 0 {
        out.push_str(" 0");
    } else {
        for i in 0..k {
            if i > 0 {
                out.push_str(" +");
            }
            write!(out, " x_{i}").unwrap();
        }
    }
    out.push_str("\nSubject To\n");

    for (i, cands) in request_chains.iter().enumerate() {
        write!(out, " assign_r{i}: x_{i}").unwrap();
        for &c in cands {
            write!(out, " - xc_{c}_r{i}").unwrap();
        }
        out.push_str(" = 0\n");
    }

    for (c, chain) in chains.iter().enumerate() {
        let distinct: std::collections::BTreeSet<NodeId> =
            chain.nodes().iter().copied().collect();
        for v in distinct {
            writeln!(out, " link_c{c}_v{v}: xc_{c} - xv_{v} <= 0").unwrap();
        }
    }

    for v in 0..n {
        write!(out, " sel_v{v}:").unwrap();
        let mut any = false;
        for (c, chain) in chains.iter().enumerate() {
            if chain.nodes().contains(&v) {
                write!(out, "{} xc_{c}", if any { " +" } else { "" }).unwrap();
                any = true;
            }
        }
        writeln!(out, " - xv_{v} >= 0").unwrap();
    }

    for v in 0..n {
        write!(out, " cap_v{v}:").unwrap();
        let mut any = false;
        for (i, cands) in request_chains.iter().enumerate() {
            for &c in cands {
                let multiplicity =
                    chains[c].nodes().iter().filter(|&&u| u == v).count();
                match multiplicity {
                    0 => {}
                    1 => {
                        write!(out, "{} xc_{c}_r{i}", if any { " +" } else { "" }).unwrap();
                        any = true;
                    }
                    m => {
                        write!(out, "{} {m} xc_{c}_r{i}", if any { " +" } else { "" }).unwrap();
                        any = true;
                    }
                }
            }
        }
        writeln!(out, " - {} xv_{v} <= 0", instance.graph().capacity(v)).unwrap();
    }

    out.push_str("Binary\n");
    for i in 0..k {
        writeln!(out, " x_{i}").unwrap();
    }
    for c in 0..chains.len() {
        writeln!(out, " xc_{c}").unwrap();
    }
    for (i, cands) in request_chains.iter().enumerate() {
        for &c in cands {
            writeln!(out, " xc_{c}_r{i}").unwrap();
        }
    }
    for v in 0..n {
        writeln!(out, " xv_{v}").unwrap();
    }
    out.push_str("End\n");
    Ok(out)
}

/// Structural summary of an LP document as emitted by [`export_ilp`]: used
/// to cross-check the export without an external solver.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LpSummary {
    pub objective_terms: usize,
    /// `(row name, term count)` in document order.
    pub rows: Vec<(String, usize)>,
    pub binaries: Vec<String>,
}

/// Minimal parser for the LP subset written by [`export_ilp`].
pub fn parse_lp(text: &str) -> Result<LpSummary, String> {
    #[derive(PartialEq)]
    enum Section {
        Preamble,
        Objective,
        Rows,
        Binaries,
        Done,
    }
    let mut section = Section::Preamble;
    let mut objective_terms = 0;
    let mut rows = Vec::new();
    let mut binaries = Vec::new();

    let count_terms = |expr: &str| -> usize {
        expr.split_whitespace()
            .filter(|tok| tok.chars().next().is_some_and(|c| c.is_ascii_alphabetic()))
            .count()
    };

    for line in text.lines() {
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        match trimmed {
            "Maximize" => {
                section = Section::Objective;
                continue;
            }
            "Subject To" => {
                section = Section::Rows;
                continue;
            }
            "Binary" => {
                section = Section::Binaries;
                continue;
            }
            "End" => {
                section = Section::Done;
                continue;
            }
            _ => {}
        }
        match section {
            Section::Preamble | Section::Done => {
                return Err(format!("unexpected line outside sections: {trimmed}"));
            }
            Section::Objective => {
                let (_, expr) = trimmed
                    .split_once(':')
                    .ok_or_else(|| format!("objective without name: {trimmed}"))?;
                objective_terms += count_terms(expr);
            }
            Section::Rows => {
                let (name, rest) = trimmed
                    .split_once(':')
                    .ok_or_else(|| format!("row without name: {trimmed}"))?;
                let relation = ["<=", ">=", "="]
                    .iter()
                    .find_map(|op| rest.find(op).map(|at| (at, op.len())))
                    .ok_or_else(|| format!("row without relation: {trimmed}"))?;
                let (lhs, rhs) = rest.split_at(relation.0);
                let rhs = &rhs[relation.1..];
                rhs.trim()
                    .parse::<f64>()
                    .map_err(|_| format!("row with non-numeric rhs: {trimmed}"))?;
                rows.push((name.trim().to_string(), count_terms(lhs)));
            }
            Section::Binaries => binaries.push(trimmed.to_string()),
        }
    }
    if section != Section::Done {
        return Err("missing End marker".to_string());
    }
    Ok(LpSummary { objective_terms, rows, binaries })
}
