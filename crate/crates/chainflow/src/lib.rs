//! Admission control and embedding of service chains on capacitated networks.
//!
//! A request is a source/target pair that must be routed through an ordered
//! chain of network function instances, each hosted at a capacitated node.
//! The crate provides:
//!
//! - [`instance`]: the problem data model — graphs, function placements,
//!   route constraints, hop distances, chain enumeration and candidate sets,
//!   plus the JSON instance format.
//! - [`ace`]: the online admission algorithm. Nodes carry a cost exponential
//!   in their relative load and a request is admitted iff some candidate
//!   chain is cheap enough; a first-fit greedy baseline is included.
//! - [`offline`]: exact solvers for the offline problem (exhaustive search
//!   and branch-and-bound), a solution verifier, and an LP-format export of
//!   the underlying 0-1 program.
//! - [`generators`]: instance builders — a phase-based adaptive adversary
//!   that lower-bounds any online algorithm, reductions from maximum set
//!   packing and maximum independent set (used as test oracles), and seeded
//!   random instances.
//!
//! Instances and distance tables are immutable once constructed and safe to
//! share across threads. Online runs are sequential state machines; distinct
//! runs never share state.

pub mod ace;
pub mod generators;
pub mod instance;
pub mod offline;

pub use ace::{ace_run, greedy_run, AceParams, AceRun, Decision, DecisionReason, OnlineState};
pub use instance::{
    ChainCandidate, FunctionPlacement, Instance, InstanceError, Mode, NetworkGraph, NodeId,
    Request, RouteConstraint,
};
pub use offline::{branch_and_bound, brute_force, export_ilp, verify_solution, SolveResult};
