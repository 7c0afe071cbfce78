//! Instance builders: a phase-based adaptive adversary against online
//! algorithms, reductions from maximum set packing and maximum independent
//! set (whose known optima make them correctness oracles), and seeded
//! random instances.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::ace::OnlineAlgorithm;
use crate::instance::{
    ChainCandidate, Instance, InstanceError, NetworkGraph, NodeId, Request, RouteConstraint,
};
use crate::offline::SolveResult;

#[derive(Debug, thiserror::Error)]
pub enum GeneratorError {
    #[error("invalid {param}: {reason}")]
    Parameter { param: &'static str, reason: String },
    #[error("online algorithm returned an illegal admission for request {request}: {reason}")]
    IllegalAdmission { request: usize, reason: String },
    #[error(transparent)]
    Instance(#[from] InstanceError),
}

impl GeneratorError {
    fn param(param: &'static str, reason: impl Into<String>) -> Self {
        GeneratorError::Parameter { param, reason: reason.into() }
    }
}

/// The adversary's request schedule over a line `L` of `ell` nodes.
///
/// Phase `i` (for `i` in `0..=log2 ell`) splits `L` into `2^i` disjoint
/// segments of `ell / 2^i` nodes; each segment is one group and receives
/// `kappa` identical requests whose sole candidate chain is the full
/// segment. Requests arrive phase by phase, groups in order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PhaseSchedule {
    pub ell: usize,
    pub kappa: u32,
    /// `phases[i][j]` is the node segment of group `j` in phase `i`.
    pub phases: Vec<Vec<Vec<NodeId>>>,
}

impl PhaseSchedule {
    pub fn phase_count(&self) -> usize {
        self.phases.len()
    }

    /// Requests issued in phase `i` (`kappa` per group).
    pub fn requests_in_phase(&self, i: usize) -> usize {
        self.phases[i].len() * self.kappa as usize
    }

    pub fn total_requests(&self) -> usize {
        (0..self.phase_count()).map(|i| self.requests_in_phase(i)).sum()
    }

    /// Phase of the request at `index` in arrival order.
    pub fn phase_of_request(&self, index: usize) -> usize {
        let mut start = 0;
        for i in 0..self.phase_count() {
            start += self.requests_in_phase(i);
            if index < start {
                return i;
            }
        }
        panic!("request index {index} out of schedule");
    }

    /// The offline play that admits exactly the phase-`phase` requests,
    /// each on its group segment. The segments are disjoint and each group
    /// has `kappa` requests, so this is always feasible.
    pub fn offline_solution(&self, phase: usize) -> SolveResult {
        let start: usize = (0..phase).map(|i| self.requests_in_phase(i)).sum();
        let mut assignment = std::collections::BTreeMap::new();
        let mut index = start;
        for segment in &self.phases[phase] {
            for _ in 0..self.kappa {
                assignment.insert(index, ChainCandidate::new(segment.clone()));
                index += 1;
            }
        }
        SolveResult::from_assignment(self.ell, assignment, false)
    }
}

fn is_power_of_two(x: usize) -> bool {
    x != 0 && x & (x - 1) == 0
}

/// Builds the adversarial instance: `ell` nodes of capacity `kappa`, no
/// edges, and the phase schedule's requests in explicit mode.
///
/// `ell` must be a power of two ≥ 2 and `kappa ≥ ceil(log2 ell)`, the
/// capacity floor the lower-bound argument relies on. Padding nodes beyond
/// `L` carry no load and are omitted.
pub fn adversarial_instance(
    ell: usize,
    kappa: u32,
) -> Result<(Instance, PhaseSchedule), GeneratorError> {
    if !is_power_of_two(ell) || ell < 2 {
        return Err(GeneratorError::param("ell", format!("{ell} is not a power of two >= 2")));
    }
    let log_ell = ell.trailing_zeros();
    if kappa < log_ell {
        return Err(GeneratorError::param(
            "kappa",
            format!("{kappa} is below ceil(log2 {ell}) = {log_ell}"),
        ));
    }
    let mut phases = Vec::with_capacity(log_ell as usize + 1);
    for i in 0..=log_ell {
        let groups = 1usize << i;
        let segment_len = ell / groups;
        phases.push(
            (0..groups)
                .map(|j| (j * segment_len..(j + 1) * segment_len).collect())
                .collect(),
        );
    }
    let schedule = PhaseSchedule { ell, kappa, phases };

    let graph = NetworkGraph::new(ell, [], vec![kappa; ell])?;
    let mut requests = Vec::with_capacity(schedule.total_requests());
    for phase in &schedule.phases {
        for segment in phase {
            for _ in 0..kappa {
                requests.push(Request::explicit(vec![ChainCandidate::new(segment.clone())]));
            }
        }
    }
    let instance = Instance::explicit_mode(graph, requests)?;
    Ok((instance, schedule))
}

/// Outcome of playing the adversary against an online algorithm.
#[derive(Debug, Clone, PartialEq)]
pub struct AdversaryOutcome {
    /// Phase after which the adversary stops (the one minimizing the
    /// online/offline quotient; ties go to the later phase).
    pub stop_phase: usize,
    /// Requests the online algorithm admitted in phases `0..=stop_phase`.
    pub online_admitted: usize,
    /// `2^stop_phase · kappa`: the offline play admits every request of the
    /// stop phase.
    pub offline_value: usize,
    /// `offline_value / online_admitted`; infinite when nothing was
    /// admitted.
    pub ratio: f64,
    /// Admissions per phase (`x_i`).
    pub admitted_per_phase: Vec<usize>,
    pub schedule: PhaseSchedule,
}

impl AdversaryOutcome {
    /// Capacity identity of the construction: phase-`i` admissions occupy
    /// `ell / 2^i` node positions each, and `L` has `ell · kappa` in total.
    pub fn weighted_occupancy(&self) -> usize {
        self.admitted_per_phase
            .iter()
            .enumerate()
            .map(|(i, &x)| (self.schedule.ell >> i) * x)
            .sum()
    }
}

/// Feeds the full schedule to an online algorithm built by `make_algorithm`
/// and picks the stop phase most unfavorable to it.
///
/// Admissions are validated against candidate sets and capacities, so a
/// malformed policy cannot fake a good ratio. Since the phases only shrink
/// the candidate chains, the online play on a prefix is unaffected by later
/// phases and the stop phase may be chosen after the fact.
pub fn adversary_run<A, F>(
    make_algorithm: F,
    ell: usize,
    kappa: u32,
) -> Result<AdversaryOutcome, GeneratorError>
where
    A: OnlineAlgorithm,
    F: FnOnce(&Instance) -> A,
{
    let (instance, schedule) = adversarial_instance(ell, kappa)?;
    let mut algorithm = make_algorithm(&instance);
    let mut used = vec![0u32; ell];
    let mut admitted_per_phase = vec![0usize; schedule.phase_count()];
    for (index, request) in instance.requests().iter().enumerate() {
        let candidates = request.candidates.as_deref().unwrap_or(&[]);
        let Some(chain) = algorithm.decide(candidates) else {
            continue;
        };
        if !candidates.contains(&chain) {
            return Err(GeneratorError::IllegalAdmission {
                request: index,
                reason: "chain not in the candidate set".into(),
            });
        }
        for &v in chain.nodes() {
            used[v] += 1;
            if used[v] > kappa {
                return Err(GeneratorError::IllegalAdmission {
                    request: index,
                    reason: format!("node {v} loaded above capacity {kappa}"),
                });
            }
        }
        admitted_per_phase[schedule.phase_of_request(index)] += 1;
    }

    // stop phase: minimize (admitted so far) / (2^j · kappa), late ties win
    let mut best = (0, f64::INFINITY);
    let mut admitted_so_far = 0;
    for (j, &x) in admitted_per_phase.iter().enumerate() {
        admitted_so_far += x;
        let offline = (1usize << j) * kappa as usize;
        let quotient = admitted_so_far as f64 / offline as f64;
        if quotient <= best.1 {
            best = (j, quotient);
        }
    }
    let stop_phase = best.0;
    let online_admitted: usize = admitted_per_phase[..=stop_phase].iter().sum();
    let offline_value = (1usize << stop_phase) * kappa as usize;
    let ratio = if online_admitted == 0 {
        f64::INFINITY
    } else {
        offline_value as f64 / online_admitted as f64
    };
    Ok(AdversaryOutcome {
        stop_phase,
        online_admitted,
        offline_value,
        ratio,
        admitted_per_phase,
        schedule,
    })
}

/// Reduction from maximum set packing: one unit-capacity node per universe
/// element, sets padded to exactly `k` elements with fresh auxiliary nodes,
/// one chain per set, and one request per set that may use any chain.
///
/// Admitted requests must occupy disjoint chains, so the optimum equals the
/// maximum number of pairwise disjoint sets.
pub fn set_packing_instance(
    universe_size: usize,
    sets: &[Vec<usize>],
    k: usize,
) -> Result<Instance, GeneratorError> {
    if k < 3 {
        return Err(GeneratorError::param("k", format!("{k} is below 3")));
    }
    for (i, set) in sets.iter().enumerate() {
        if set.len() > k {
            return Err(GeneratorError::param(
                "sets",
                format!("set {i} has {} elements, more than k = {k}", set.len()),
            ));
        }
        let mut sorted = set.clone();
        sorted.sort_unstable();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(GeneratorError::param("sets", format!("set {i} repeats an element")));
        }
        if let Some(&bad) = sorted.iter().find(|&&e| e >= universe_size) {
            return Err(GeneratorError::param(
                "sets",
                format!("set {i} references element {bad} outside the universe"),
            ));
        }
    }

    let mut node_count = universe_size;
    let mut chains = Vec::with_capacity(sets.len());
    for set in sets {
        let mut nodes: Vec<NodeId> = set.clone();
        nodes.sort_unstable();
        while nodes.len() < k {
            nodes.push(node_count);
            node_count += 1;
        }
        chains.push(ChainCandidate::new(nodes));
    }
    let graph = NetworkGraph::new(node_count, [], vec![1; node_count])?;
    let requests = (0..sets.len())
        .map(|_| Request::explicit(chains.clone()))
        .collect();
    Ok(Instance::explicit_mode(graph, requests)?)
}

/// Reduction from maximum independent set on a graph of maximum degree
/// `ell`: one unit-capacity node per input edge, one chain per input vertex
/// holding its incident edges padded to length `ell` with fresh auxiliary
/// nodes, and one request per vertex that may use any chain.
///
/// Two chains share a node iff their vertices are adjacent, so the optimum
/// equals the maximum independent set size.
pub fn independent_set_instance(graph: &NetworkGraph, ell: usize) -> Result<Instance, GeneratorError> {
    if ell < 3 {
        return Err(GeneratorError::param("ell", format!("{ell} is below 3")));
    }
    let n = graph.node_count();
    let mut incident = vec![Vec::new(); n];
    for (edge_index, &(u, v)) in graph.edges().iter().enumerate() {
        incident[u].push(edge_index);
        incident[v].push(edge_index);
    }
    if let Some(v) = (0..n).find(|&v| incident[v].len() > ell) {
        return Err(GeneratorError::param(
            "graph",
            format!("vertex {v} has degree {}, more than ell = {ell}", incident[v].len()),
        ));
    }

    let mut node_count = graph.edges().len();
    let mut chains = Vec::with_capacity(n);
    for edges in &incident {
        let mut nodes = edges.clone();
        while nodes.len() < ell {
            nodes.push(node_count);
            node_count += 1;
        }
        chains.push(ChainCandidate::new(nodes));
    }
    let chain_graph = NetworkGraph::new(node_count, [], vec![1; node_count])?;
    let requests = (0..n).map(|_| Request::explicit(chains.clone())).collect();
    Ok(Instance::explicit_mode(chain_graph, requests)?)
}

/// Parameters for [`random_instance`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RandomInstanceParams {
    pub node_count: usize,
    pub chain_length: usize,
    /// Distinct hosting nodes sampled per function type.
    pub instances_per_function: usize,
    pub request_count: usize,
    pub capacity_min: u32,
    pub capacity_max: u32,
    /// Hop budget for every request's walk.
    pub route_limit: u32,
    /// Probability of each extra edge beyond the connecting spanning tree.
    pub edge_probability: f64,
}

/// Seeded random graph-mode instance: a random spanning tree keeps the
/// graph connected, extra edges appear independently, capacities are
/// uniform in range, placements and request endpoints are uniform. The
/// same seed always yields the same instance.
pub fn random_instance(
    params: &RandomInstanceParams,
    seed: u64,
) -> Result<Instance, GeneratorError> {
    if params.node_count == 0 {
        return Err(GeneratorError::param("node_count", "must be at least 1"));
    }
    if params.chain_length == 0 {
        return Err(GeneratorError::param("chain_length", "must be at least 1"));
    }
    if params.instances_per_function == 0 || params.instances_per_function > params.node_count {
        return Err(GeneratorError::param(
            "instances_per_function",
            format!("must be in 1..={}", params.node_count),
        ));
    }
    if params.capacity_min == 0 || params.capacity_min > params.capacity_max {
        return Err(GeneratorError::param(
            "capacity_min",
            "need 1 <= capacity_min <= capacity_max",
        ));
    }
    if !(0.0..=1.0).contains(&params.edge_probability) {
        return Err(GeneratorError::param("edge_probability", "must be in [0, 1]"));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = params.node_count;

    let mut edges = Vec::new();
    for v in 1..n {
        edges.push((rng.random_range(0..v), v));
    }
    for u in 0..n {
        for v in u + 1..n {
            if !edges.contains(&(u, v)) && rng.random_bool(params.edge_probability) {
                edges.push((u, v));
            }
        }
    }
    let capacities = (0..n)
        .map(|_| rng.random_range(params.capacity_min..=params.capacity_max))
        .collect();
    let graph = NetworkGraph::new(n, edges, capacities)?;

    let instances = (0..params.chain_length)
        .map(|_| {
            sample(&mut rng, n, params.instances_per_function)
                .into_iter()
                .collect()
        })
        .collect();
    let placement = crate::instance::FunctionPlacement::new(instances, n)?;

    let requests = (0..params.request_count)
        .map(|_| Request::pair(rng.random_range(0..n), rng.random_range(0..n)))
        .collect();

    Ok(Instance::graph_mode(
        graph,
        placement,
        RouteConstraint::MaxLength { value: params.route_limit },
        requests,
    )?)
}
