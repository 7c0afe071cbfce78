//! Problem data model: network graphs, function placements, requests,
//! route constraints, hop distances, chain enumeration and candidate sets.
//!
//! An [`Instance`] comes in two modes. In *graph* mode, candidate chains are
//! derived geometrically: every combination of function instances is a chain,
//! and a chain is a candidate for a request iff the walk
//! source → chain → target fits the route constraint. In *explicit* mode,
//! every request carries its candidate chains verbatim; only node capacities
//! matter. Explicit mode is how adversarial and reduction instances are
//! expressed, since those define candidate sets combinatorially.

use std::collections::{BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

/// Nodes are dense 0-based indices into the graph.
pub type NodeId = usize;

/// Default cap on the number of chains `enumerate_chains` will materialize.
pub const DEFAULT_CHAIN_CAP: u64 = 10_000_000;

#[derive(Debug, thiserror::Error)]
pub enum InstanceError {
    #[error("parse error: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("invalid {field}: {reason}")]
    Validation { field: String, reason: String },
    #[error("chain-enumeration-too-large: {chains} chains exceed cap {cap}")]
    EnumerationTooLarge { chains: u128, cap: u64 },
}

impl InstanceError {
    fn invalid(field: impl Into<String>, reason: impl Into<String>) -> Self {
        InstanceError::Validation {
            field: field.into(),
            reason: reason.into(),
        }
    }
}

/// Undirected network with per-node capacities.
///
/// Capacity counts how many admitted chain positions a node can serve;
/// plain forwarding through a node is unlimited and not modeled.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NetworkGraph {
    node_count: usize,
    edges: Vec<(NodeId, NodeId)>,
    capacities: Vec<u32>,
}

impl NetworkGraph {
    /// Builds a graph from unordered edges. Edges are normalized to
    /// `(min, max)` and sorted; self-loops, duplicates, out-of-range
    /// endpoints and zero capacities are rejected.
    pub fn new(
        node_count: usize,
        edges: impl IntoIterator<Item = (NodeId, NodeId)>,
        capacities: Vec<u32>,
    ) -> Result<Self, InstanceError> {
        if capacities.len() != node_count {
            return Err(InstanceError::invalid(
                "nodes",
                format!(
                    "expected {node_count} capacities, got {}",
                    capacities.len()
                ),
            ));
        }
        for (v, &cap) in capacities.iter().enumerate() {
            if cap == 0 {
                return Err(InstanceError::invalid(
                    format!("nodes[{v}].capacity"),
                    "capacity must be at least 1",
                ));
            }
        }
        let mut normalized = BTreeSet::new();
        for (u, v) in edges {
            if u == v {
                return Err(InstanceError::invalid("edges", format!("self-loop at node {u}")));
            }
            if u >= node_count || v >= node_count {
                return Err(InstanceError::invalid(
                    "edges",
                    format!("edge [{u}, {v}] references a node outside 0..{node_count}"),
                ));
            }
            if !normalized.insert((u.min(v), u.max(v))) {
                return Err(InstanceError::invalid(
                    "edges",
                    format!("duplicate edge [{}, {}]", u.min(v), u.max(v)),
                ));
            }
        }
        Ok(NetworkGraph {
            node_count,
            edges: normalized.into_iter().collect(),
            capacities,
        })
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    /// Normalized `(min, max)` pairs in ascending order.
    pub fn edges(&self) -> &[(NodeId, NodeId)] {
        &self.edges
    }

    pub fn capacity(&self, v: NodeId) -> u32 {
        self.capacities[v]
    }

    pub fn capacities(&self) -> &[u32] {
        &self.capacities
    }

    pub fn has_edge(&self, u: NodeId, v: NodeId) -> bool {
        self.edges.binary_search(&(u.min(v), u.max(v))).is_ok()
    }

    /// All-pairs hop distances by breadth-first search from every node.
    pub fn hop_distances(&self) -> DistanceTable {
        let n = self.node_count;
        let mut adjacency = vec![Vec::new(); n];
        for &(u, v) in &self.edges {
            adjacency[u].push(v);
            adjacency[v].push(u);
        }
        let mut table = vec![None; n * n];
        let mut queue = VecDeque::new();
        for start in 0..n {
            let row = &mut table[start * n..(start + 1) * n];
            row[start] = Some(0);
            queue.clear();
            queue.push_back(start);
            while let Some(u) = queue.pop_front() {
                let du = row[u].expect("queued nodes have a distance");
                for &v in &adjacency[u] {
                    if row[v].is_none() {
                        row[v] = Some(du + 1);
                        queue.push_back(v);
                    }
                }
            }
        }
        DistanceTable { node_count: n, dist: table }
    }
}

/// All-pairs unweighted hop distances; disconnected pairs are `None`.
#[derive(Debug, Clone)]
pub struct DistanceTable {
    node_count: usize,
    dist: Vec<Option<u32>>,
}

impl DistanceTable {
    pub fn get(&self, u: NodeId, v: NodeId) -> Option<u32> {
        self.dist[u * self.node_count + v]
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }
}

/// Where each function type of the chain is instantiated.
///
/// Entry `i` lists the nodes hosting an instance of the `i`-th function
/// type. A node may host several function types.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FunctionPlacement {
    instances: Vec<Vec<NodeId>>,
}

impl FunctionPlacement {
    /// Each entry must be a non-empty set of node ids (duplicates rejected);
    /// entries are stored sorted.
    pub fn new(
        instances: Vec<Vec<NodeId>>,
        node_count: usize,
    ) -> Result<Self, InstanceError> {
        if instances.is_empty() {
            return Err(InstanceError::invalid("functions", "chain length must be at least 1"));
        }
        let mut sorted = Vec::with_capacity(instances.len());
        for (i, mut nodes) in instances.into_iter().enumerate() {
            if nodes.is_empty() {
                return Err(InstanceError::invalid(
                    format!("functions[{i}]"),
                    "every function type needs at least one instance",
                ));
            }
            nodes.sort_unstable();
            if nodes.windows(2).any(|w| w[0] == w[1]) {
                return Err(InstanceError::invalid(
                    format!("functions[{i}]"),
                    "duplicate node id in instance set",
                ));
            }
            if let Some(&last) = nodes.last() {
                if last >= node_count {
                    return Err(InstanceError::invalid(
                        format!("functions[{i}]"),
                        format!("node {last} outside 0..{node_count}"),
                    ));
                }
            }
            sorted.push(nodes);
        }
        Ok(FunctionPlacement { instances: sorted })
    }

    /// Chain length, i.e. the number of function types.
    pub fn chain_length(&self) -> usize {
        self.instances.len()
    }

    /// Sorted node ids hosting the `i`-th function type.
    pub fn instances(&self) -> &[Vec<NodeId>] {
        &self.instances
    }

    /// Number of chains the Cartesian product would produce.
    pub fn chain_count(&self) -> u128 {
        self.instances
            .iter()
            .fold(1u128, |acc, set| acc.saturating_mul(set.len() as u128))
    }

    /// Full Cartesian product `instances[0] × … × instances[ℓ-1]` in
    /// lexicographic node-id order. Refuses to materialize more than `cap`
    /// chains.
    pub fn enumerate_chains_capped(
        &self,
        cap: u64,
    ) -> Result<Vec<ChainCandidate>, InstanceError> {
        let count = self.chain_count();
        if count > cap as u128 {
            return Err(InstanceError::EnumerationTooLarge { chains: count, cap });
        }
        let ell = self.chain_length();
        let mut chains = Vec::with_capacity(count as usize);
        let mut cursor = vec![0usize; ell];
        loop {
            let nodes: Vec<NodeId> = cursor
                .iter()
                .enumerate()
                .map(|(i, &j)| self.instances[i][j])
                .collect();
            chains.push(ChainCandidate::new(nodes));
            // odometer increment, most significant position first
            let mut pos = ell;
            loop {
                if pos == 0 {
                    return Ok(chains);
                }
                pos -= 1;
                cursor[pos] += 1;
                if cursor[pos] < self.instances[pos].len() {
                    break;
                }
                cursor[pos] = 0;
            }
        }
    }

    pub fn enumerate_chains(&self) -> Result<Vec<ChainCandidate>, InstanceError> {
        self.enumerate_chains_capped(DEFAULT_CHAIN_CAP)
    }
}

/// An ordered pick of one hosting node per chain position.
///
/// The same node may appear at several positions when it hosts several
/// function types; each position consumes one capacity unit on assignment.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ChainCandidate {
    nodes: Vec<NodeId>,
}

impl ChainCandidate {
    pub fn new(nodes: Vec<NodeId>) -> Self {
        ChainCandidate { nodes }
    }

    pub fn nodes(&self) -> &[NodeId] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

/// A source/target pair to be routed through a service chain.
///
/// In explicit mode the geometric fields are meaningless (both default to
/// node 0) and `candidates` carries the admissible chains verbatim.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Request {
    pub source: NodeId,
    pub target: NodeId,
    pub candidates: Option<Vec<ChainCandidate>>,
}

impl Request {
    pub fn pair(source: NodeId, target: NodeId) -> Self {
        Request { source, target, candidates: None }
    }

    pub fn explicit(candidates: Vec<ChainCandidate>) -> Self {
        Request { source: 0, target: 0, candidates: Some(candidates) }
    }
}

/// Bound on how long the walk source → chain → target may be.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum RouteConstraint {
    /// Absolute hop budget for the whole walk.
    MaxLength { value: u32 },
    /// Walk may be at most `value` times the source–target hop distance
    /// (rounded up); `value >= 1`.
    Stretch { value: f64 },
}

impl RouteConstraint {
    fn validate(&self) -> Result<(), InstanceError> {
        if let RouteConstraint::Stretch { value } = self {
            if !value.is_finite() || *value < 1.0 {
                return Err(InstanceError::invalid(
                    "constraint.value",
                    "stretch factor must be a finite number >= 1",
                ));
            }
        }
        Ok(())
    }

    /// Hop budget for a request at source–target distance `d`; `None` when
    /// the pair is disconnected (no walk can exist).
    pub fn limit(&self, source_target_distance: Option<u32>) -> Option<u32> {
        match self {
            RouteConstraint::MaxLength { value } => Some(*value),
            RouteConstraint::Stretch { value } => {
                source_target_distance.map(|d| (value * f64::from(d)).ceil() as u32)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Graph,
    Explicit,
}

/// A complete problem instance: network, chain structure, and the request
/// sequence in arrival order.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    graph: NetworkGraph,
    placement: Option<FunctionPlacement>,
    constraint: Option<RouteConstraint>,
    requests: Vec<Request>,
    mode: Mode,
}

impl Instance {
    /// Graph-mode instance: candidates are derived from the placement and
    /// route constraint. No request may carry explicit candidates.
    pub fn graph_mode(
        graph: NetworkGraph,
        placement: FunctionPlacement,
        constraint: RouteConstraint,
        requests: Vec<Request>,
    ) -> Result<Self, InstanceError> {
        constraint.validate()?;
        if let Some(&last) = placement.instances.iter().flatten().max() {
            if last >= graph.node_count() {
                return Err(InstanceError::invalid(
                    "functions",
                    format!("node {last} outside 0..{}", graph.node_count()),
                ));
            }
        }
        for (i, req) in requests.iter().enumerate() {
            if req.candidates.is_some() {
                return Err(InstanceError::invalid(
                    format!("requests[{i}]"),
                    "graph-mode requests must not carry explicit candidates",
                ));
            }
            if req.source >= graph.node_count() || req.target >= graph.node_count() {
                return Err(InstanceError::invalid(
                    format!("requests[{i}]"),
                    format!(
                        "endpoint outside 0..{} (s={}, t={})",
                        graph.node_count(),
                        req.source,
                        req.target
                    ),
                ));
            }
        }
        Ok(Instance {
            graph,
            placement: Some(placement),
            constraint: Some(constraint),
            requests,
            mode: Mode::Graph,
        })
    }

    /// Explicit-mode instance: every request carries its candidate chains.
    /// All candidates of one request must share one length, and every chain
    /// node must exist in the graph.
    pub fn explicit_mode(
        graph: NetworkGraph,
        requests: Vec<Request>,
    ) -> Result<Self, InstanceError> {
        for (i, req) in requests.iter().enumerate() {
            let Some(candidates) = &req.candidates else {
                return Err(InstanceError::invalid(
                    format!("requests[{i}]"),
                    "explicit-mode requests must carry a candidates list",
                ));
            };
            let mut len = None;
            for (c, chain) in candidates.iter().enumerate() {
                if chain.is_empty() {
                    return Err(InstanceError::invalid(
                        format!("requests[{i}].candidates[{c}]"),
                        "candidate chains must be non-empty",
                    ));
                }
                match len {
                    None => len = Some(chain.len()),
                    Some(l) if l != chain.len() => {
                        return Err(InstanceError::invalid(
                            format!("requests[{i}].candidates[{c}]"),
                            format!("expected chain length {l}, got {}", chain.len()),
                        ));
                    }
                    _ => {}
                }
                if let Some(&bad) = chain.nodes().iter().find(|&&v| v >= graph.node_count()) {
                    return Err(InstanceError::invalid(
                        format!("requests[{i}].candidates[{c}]"),
                        format!("node {bad} outside 0..{}", graph.node_count()),
                    ));
                }
            }
        }
        Ok(Instance {
            graph,
            placement: None,
            constraint: None,
            requests,
            mode: Mode::Explicit,
        })
    }

    pub fn graph(&self) -> &NetworkGraph {
        &self.graph
    }

    pub fn placement(&self) -> Option<&FunctionPlacement> {
        self.placement.as_ref()
    }

    pub fn constraint(&self) -> Option<&RouteConstraint> {
        self.constraint.as_ref()
    }

    pub fn requests(&self) -> &[Request] {
        &self.requests
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    /// Chain length of a request's candidates (uniform per request). In
    /// graph mode this is the placement's chain length; in explicit mode it
    /// is the request's own candidate length, `None` when the candidate
    /// list is empty.
    pub fn request_chain_length(&self, index: usize) -> Option<usize> {
        match self.mode {
            Mode::Graph => self.placement.as_ref().map(|p| p.chain_length()),
            Mode::Explicit => self.requests[index]
                .candidates
                .as_ref()
                .and_then(|c| c.first())
                .map(|chain| chain.len()),
        }
    }

    /// Longest candidate chain across the instance (0 when no request has
    /// candidates).
    pub fn max_chain_length(&self) -> usize {
        match self.mode {
            Mode::Graph => self
                .placement
                .as_ref()
                .map(|p| p.chain_length())
                .unwrap_or(0),
            Mode::Explicit => (0..self.requests.len())
                .filter_map(|i| self.request_chain_length(i))
                .max()
                .unwrap_or(0),
        }
    }

    /// Candidate chains for one request, in deterministic order: chain
    /// enumeration order in graph mode, verbatim in explicit mode.
    pub fn candidate_set(&self, request: &Request) -> Result<Vec<ChainCandidate>, InstanceError> {
        match self.mode {
            Mode::Explicit => Ok(request.candidates.clone().unwrap_or_default()),
            Mode::Graph => {
                let placement = self.placement.as_ref().expect("graph mode has a placement");
                let chains = placement.enumerate_chains()?;
                let dist = self.graph.hop_distances();
                Ok(filter_candidates(&chains, &dist, self.constraint(), request))
            }
        }
    }

    /// Candidate sets for all requests, sharing one chain enumeration and
    /// one distance table.
    pub fn candidate_sets(&self) -> Result<Vec<Vec<ChainCandidate>>, InstanceError> {
        match self.mode {
            Mode::Explicit => Ok(self
                .requests
                .iter()
                .map(|r| r.candidates.clone().unwrap_or_default())
                .collect()),
            Mode::Graph => {
                let placement = self.placement.as_ref().expect("graph mode has a placement");
                let chains = placement.enumerate_chains()?;
                let dist = self.graph.hop_distances();
                Ok(self
                    .requests
                    .iter()
                    .map(|r| filter_candidates(&chains, &dist, self.constraint(), r))
                    .collect())
            }
        }
    }
}

fn filter_candidates(
    chains: &[ChainCandidate],
    dist: &DistanceTable,
    constraint: Option<&RouteConstraint>,
    request: &Request,
) -> Vec<ChainCandidate> {
    let constraint = constraint.expect("graph mode has a constraint");
    let Some(limit) = constraint.limit(dist.get(request.source, request.target)) else {
        return Vec::new();
    };
    chains
        .iter()
        .filter(|chain| {
            walk_length(dist, chain, request.source, request.target)
                .is_some_and(|len| len <= limit)
        })
        .cloned()
        .collect()
}

/// Hop length of the walk source → chain positions in order → target;
/// `None` when any leg is disconnected. Walks may revisit nodes and edges.
pub fn walk_length(
    dist: &DistanceTable,
    chain: &ChainCandidate,
    source: NodeId,
    target: NodeId,
) -> Option<u32> {
    let nodes = chain.nodes();
    debug_assert!(!nodes.is_empty(), "walk_length requires a non-empty chain");
    let mut total = dist.get(source, nodes[0])?;
    for pair in nodes.windows(2) {
        total += dist.get(pair[0], pair[1])?;
    }
    total += dist.get(*nodes.last().unwrap(), target)?;
    Some(total)
}

// ---------------------------------------------------------------------------
// JSON instance format
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct InstanceDoc {
    mode: Mode,
    nodes: Vec<NodeDoc>,
    edges: Vec<(usize, usize)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    functions: Option<Vec<Vec<usize>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    constraint: Option<RouteConstraint>,
    requests: Vec<RequestDoc>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NodeDoc {
    id: usize,
    capacity: u32,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PairDoc {
    s: usize,
    t: usize,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ExplicitDoc {
    candidates: Vec<Vec<usize>>,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum RequestDoc {
    Pair(PairDoc),
    Explicit(ExplicitDoc),
}

/// Parses and validates an instance document. Unknown fields and any
/// invariant violation are rejected with an error naming the offending
/// field.
pub fn load_instance(text: &str) -> Result<Instance, InstanceError> {
    let doc: InstanceDoc = serde_json::from_str(text)?;
    let node_count = doc.nodes.len();
    let mut capacities = vec![None; node_count];
    for (i, node) in doc.nodes.iter().enumerate() {
        if node.id >= node_count {
            return Err(InstanceError::invalid(
                format!("nodes[{i}].id"),
                format!("ids must form 0..{node_count}"),
            ));
        }
        if capacities[node.id].replace(node.capacity).is_some() {
            return Err(InstanceError::invalid(
                format!("nodes[{i}].id"),
                format!("duplicate node id {}", node.id),
            ));
        }
    }
    let capacities: Vec<u32> = capacities.into_iter().map(|c| c.unwrap()).collect();
    let graph = NetworkGraph::new(node_count, doc.edges, capacities)?;

    match doc.mode {
        Mode::Graph => {
            let functions = doc.functions.ok_or_else(|| {
                InstanceError::invalid("functions", "required in graph mode")
            })?;
            let constraint = doc.constraint.ok_or_else(|| {
                InstanceError::invalid("constraint", "required in graph mode")
            })?;
            let placement = FunctionPlacement::new(functions, node_count)?;
            let mut requests = Vec::with_capacity(doc.requests.len());
            for (i, req) in doc.requests.into_iter().enumerate() {
                match req {
                    RequestDoc::Pair(p) => requests.push(Request::pair(p.s, p.t)),
                    RequestDoc::Explicit(_) => {
                        return Err(InstanceError::invalid(
                            format!("requests[{i}]"),
                            "graph-mode requests must be {s, t} pairs",
                        ));
                    }
                }
            }
            Instance::graph_mode(graph, placement, constraint, requests)
        }
        Mode::Explicit => {
            if doc.functions.is_some() {
                return Err(InstanceError::invalid(
                    "functions",
                    "not allowed in explicit mode",
                ));
            }
            if doc.constraint.is_some() {
                return Err(InstanceError::invalid(
                    "constraint",
                    "not allowed in explicit mode",
                ));
            }
            let mut requests = Vec::with_capacity(doc.requests.len());
            for (i, req) in doc.requests.into_iter().enumerate() {
                match req {
                    RequestDoc::Explicit(e) => requests.push(Request::explicit(
                        e.candidates.into_iter().map(ChainCandidate::new).collect(),
                    )),
                    RequestDoc::Pair(_) => {
                        return Err(InstanceError::invalid(
                            format!("requests[{i}]"),
                            "explicit-mode requests must carry a candidates list",
                        ));
                    }
                }
            }
            Instance::explicit_mode(graph, requests)
        }
    }
}

/// Serializes an instance to its canonical JSON document. `save_instance`
/// followed by [`load_instance`] is the identity.
pub fn save_instance(instance: &Instance) -> String {
    let doc = InstanceDoc {
        mode: instance.mode,
        nodes: (0..instance.graph.node_count())
            .map(|id| NodeDoc { id, capacity: instance.graph.capacity(id) })
            .collect(),
        edges: instance.graph.edges().to_vec(),
        functions: instance
            .placement
            .as_ref()
            .map(|p| p.instances().to_vec()),
        constraint: instance.constraint,
        requests: instance
            .requests
            .iter()
            .map(|r| match (&instance.mode, &r.candidates) {
                (Mode::Explicit, Some(candidates)) => RequestDoc::Explicit(ExplicitDoc {
                    candidates: candidates.iter().map(|c| c.nodes().to_vec()).collect(),
                }),
                _ => RequestDoc::Pair(PairDoc { s: r.source, t: r.target }),
            })
            .collect(),
    };
    let mut text = serde_json::to_string_pretty(&doc).expect("instance docs always serialize");
    text.push('\n');
    text
}
