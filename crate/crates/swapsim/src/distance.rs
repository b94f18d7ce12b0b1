//! Longest-path distances driving contract creation times and timeouts.
//!
//! All values are computed on the DAG obtained by splitting each leader
//! `b_j` into two copies: an out-copy carrying the arcs from `b_j` into its
//! home component, and a rest-copy carrying its remaining outgoing arcs and
//! all incoming arcs. On a valid decomposition this split graph is acyclic,
//! because every cycle lies inside one component and passes through that
//! component's bottleneck.
//!
//! * `d_sub` (per arc): 0 on arcs leaving a leader into its home component,
//!   otherwise one more than the maximum over the arcs entering the tail.
//!   This is the creation time of the arc's contract; `b_star` is the value
//!   at the main leader.
//! * `d_to_leader`: longest path to the main leader's rest-copy; added to
//!   `b_star` it gives every timeout and claim step.
//! * `d_from_leader` / `d_star`: longest paths from the main leader's
//!   out-copy; on a single-component graph these coincide with `d_sub` and
//!   `b_star`, and `d_star` is the maximum simple cycle length.

use crate::decompose::{validate_decomposition, ReuniclusDecomposition};
use crate::graph::{Arc, SwapDigraph, VertexId};
use serde_json::json;
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum DistanceError {
    #[error("invalid decomposition: {0}")]
    InvalidDecomposition(String),
    #[error("split graph is cyclic: {0}")]
    CyclicSplitGraph(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DistanceTable {
    /// Longest split-DAG path from the main leader, for reachable vertices.
    pub d_from_leader: BTreeMap<VertexId, u32>,
    /// Longest simple path to the main leader, per vertex.
    pub d_to_leader: Vec<u32>,
    /// Maximum simple cycle length through the main leader.
    pub d_star: u32,
    /// Contract creation step per arc.
    pub d_sub_arc: BTreeMap<Arc, u32>,
    /// Per vertex: one more than the latest incoming creation step.
    pub d_sub_vertex: Vec<u32>,
    /// Creation step at the main leader; the first claim step.
    pub b_star: u32,
}

impl DistanceTable {
    pub fn to_json(&self, g: &SwapDigraph) -> serde_json::Value {
        let named = |m: &BTreeMap<VertexId, u32>| -> BTreeMap<String, u32> {
            m.iter().map(|(&v, &d)| (g.name(v).to_owned(), d)).collect()
        };
        json!({
            "dFromLeader": named(&self.d_from_leader),
            "dToLeader": self.d_to_leader.iter().enumerate()
                .map(|(v, &d)| (g.name(v).to_owned(), d)).collect::<BTreeMap<_, _>>(),
            "dStar": self.d_star,
            "dSub": {
                "arcs": self.d_sub_arc.iter()
                    .map(|(&a, &d)| (g.arc_label(a), d)).collect::<BTreeMap<_, _>>(),
                "vertices": self.d_sub_vertex.iter().enumerate()
                    .map(|(v, &d)| (g.name(v).to_owned(), d)).collect::<BTreeMap<_, _>>(),
            },
            "bStar": self.b_star,
        })
    }
}

/// Node layout of the split graph: every vertex keeps a base node (the rest
/// copy for leaders), and each leader gains an out-copy.
struct SplitGraph {
    base: Vec<usize>,
    node_count: usize,
    /// Per arc: (tail node, head node).
    arc_nodes: Vec<(usize, usize)>,
    arcs: Vec<Arc>,
    topo: Vec<usize>,
    out_of_leader: BTreeMap<VertexId, usize>,
}

fn build_split(
    g: &SwapDigraph,
    dec: &ReuniclusDecomposition,
) -> Result<SplitGraph, DistanceError> {
    let n = g.vertex_count();
    let base: Vec<usize> = (0..n).collect();
    let mut node_count = n;
    let mut out_of_leader = BTreeMap::new();
    for &b in &dec.bottlenecks {
        out_of_leader.insert(b, node_count);
        node_count += 1;
    }
    let arcs: Vec<Arc> = g.arcs().collect();
    let arc_nodes: Vec<(usize, usize)> = arcs
        .iter()
        .map(|&a| {
            let tail = if dec.is_bottleneck_arc(a) { out_of_leader[&a.0] } else { base[a.0] };
            (tail, base[a.1])
        })
        .collect();

    let mut indeg = vec![0usize; node_count];
    let mut out_edges: Vec<Vec<usize>> = vec![Vec::new(); node_count];
    for (i, &(t, h)) in arc_nodes.iter().enumerate() {
        indeg[h] += 1;
        out_edges[t].push(i);
    }
    let mut queue: Vec<usize> = (0..node_count).filter(|&v| indeg[v] == 0).collect();
    queue.sort_unstable();
    let mut topo = Vec::with_capacity(node_count);
    let mut head = 0;
    while head < queue.len() {
        let v = queue[head];
        head += 1;
        topo.push(v);
        for &i in &out_edges[v] {
            let h = arc_nodes[i].1;
            indeg[h] -= 1;
            if indeg[h] == 0 {
                queue.push(h);
            }
        }
    }
    if topo.len() != node_count {
        return Err(DistanceError::CyclicSplitGraph(
            "a cycle avoids every component bottleneck".into(),
        ));
    }
    Ok(SplitGraph { base, node_count, arc_nodes, arcs, topo, out_of_leader })
}

pub fn compute_distances(
    g: &SwapDigraph,
    dec: &ReuniclusDecomposition,
) -> Result<DistanceTable, DistanceError> {
    validate_decomposition(g, dec).map_err(DistanceError::InvalidDecomposition)?;
    let split = build_split(g, dec)?;
    let n = g.vertex_count();
    let leader = dec.main_leader();

    let mut in_arcs: Vec<Vec<usize>> = vec![Vec::new(); split.node_count];
    let mut out_arcs: Vec<Vec<usize>> = vec![Vec::new(); split.node_count];
    for (i, &(t, h)) in split.arc_nodes.iter().enumerate() {
        in_arcs[h].push(i);
        out_arcs[t].push(i);
    }

    // d_sub per arc: 0 on arcs out of leader out-copies, else in-best + 1.
    let mut d_sub_arc_vals = vec![0u32; split.arcs.len()];
    let mut in_best = vec![0u32; split.node_count];
    for &node in &split.topo {
        if !in_arcs[node].is_empty() {
            in_best[node] = in_arcs[node].iter().map(|&i| d_sub_arc_vals[i]).max().unwrap();
        }
        let is_out_copy = split.out_of_leader.values().any(|&o| o == node);
        for &i in &out_arcs[node] {
            d_sub_arc_vals[i] = if is_out_copy { 0 } else { in_best[node] + 1 };
        }
    }
    let d_sub_vertex: Vec<u32> = (0..n).map(|v| in_best[split.base[v]] + 1).collect();
    let b_star = d_sub_vertex[leader];

    // d_from_leader: longest path from the leader's out-copy.
    let mut from: Vec<Option<u32>> = vec![None; split.node_count];
    from[split.out_of_leader[&leader]] = Some(0);
    for &node in &split.topo {
        for &i in &in_arcs[node] {
            let t = split.arc_nodes[i].0;
            if let Some(d) = from[t] {
                from[node] = Some(from[node].map_or(d + 1, |cur| cur.max(d + 1)));
            }
        }
    }
    let mut d_from_leader = BTreeMap::new();
    d_from_leader.insert(leader, 0);
    for v in 0..n {
        if v == leader {
            continue;
        }
        if let Some(d) = from[split.base[v]] {
            d_from_leader.insert(v, d);
        }
    }
    let d_star = in_arcs[split.base[leader]]
        .iter()
        .filter_map(|&i| from[split.arc_nodes[i].0])
        .map(|d| d + 1)
        .max()
        .ok_or_else(|| {
            DistanceError::CyclicSplitGraph("leader has no reachable in-neighbor".into())
        })?;

    // d_to_leader: longest path into the leader's rest copy.
    let mut to: Vec<Option<u32>> = vec![None; split.node_count];
    to[split.base[leader]] = Some(0);
    for &node in split.topo.iter().rev() {
        if node == split.base[leader] {
            continue;
        }
        for &i in &out_arcs[node] {
            let h = split.arc_nodes[i].1;
            if let Some(d) = to[h] {
                to[node] = Some(to[node].map_or(d + 1, |cur| cur.max(d + 1)));
            }
        }
    }
    let mut d_to_leader = vec![0u32; n];
    for v in 0..n {
        d_to_leader[v] = match to[split.base[v]] {
            Some(d) => d,
            None => {
                return Err(DistanceError::CyclicSplitGraph(format!(
                    "vertex {} cannot reach the main leader in the split graph",
                    g.name(v)
                )))
            }
        };
    }

    let d_sub_arc: BTreeMap<Arc, u32> = split
        .arcs
        .iter()
        .enumerate()
        .map(|(i, &a)| (a, d_sub_arc_vals[i]))
        .collect();

    Ok(DistanceTable { d_from_leader, d_to_leader, d_star, d_sub_arc, d_sub_vertex, b_star })
}
