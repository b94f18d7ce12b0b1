//! Simulator, schedule compiler and property checker for HTLC-based
//! multi-party asset swaps.
//!
//! The crate models a swap instance as a strongly connected digraph whose
//! arcs are hash time-lock contracts, recognizes reuniclus digraphs and
//! decomposes them into bottleneck components, compiles the bottleneck and
//! reuniclus swap protocols into per-party timetables, executes them under
//! honest and adversarial behaviors with exact discrete-time HTLC semantics,
//! and machine-checks liveness, safety and coalition no-gain properties at
//! desk scale.

pub mod behavior;
pub mod decompose;
pub mod distance;
pub mod engine;
pub mod graph;
pub mod oracle;
pub mod outcome;
pub mod schedule;

pub use decompose::{reuniclus_decompose, validate_decomposition, ReuniclusDecomposition};
pub use distance::{compute_distances, DistanceTable};
pub use graph::{Arc, GraphError, SwapDigraph, VertexId};
pub use oracle::brute_force_reuniclus;
pub use schedule::{
    compile_bdp, compile_naive_single_hashlock, compile_rdp, validate_schedule_invariants,
    Schedule,
};
