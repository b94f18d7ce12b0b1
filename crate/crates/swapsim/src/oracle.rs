//! Brute-force definition oracle for reuniclus recognition.
//!
//! Independent of the block-based recognizer: it enumerates candidate
//! component vertex sets directly, searches for an exact arc cover with
//! pairwise overlaps of at most one vertex, and then tries every rooted
//! orientation and root-bottleneck choice, checking the definition literally.
//! Only usable on small graphs.

use crate::decompose::{validate_decomposition, ReuniclusDecomposition};
use crate::graph::{SwapDigraph, VertexId};
use std::collections::BTreeSet;
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum OracleError {
    #[error("graph has {0} vertices, oracle bound is {1}")]
    BoundExceeded(usize, usize),
}

pub const DEFAULT_ORACLE_BOUND: usize = 7;

/// True iff some choice of bottlenecks, induced components and rooted tree
/// satisfies the reuniclus definition and covers all arcs. Exhaustive.
pub fn brute_force_reuniclus(g: &SwapDigraph, bound: usize) -> Result<bool, OracleError> {
    let n = g.vertex_count();
    if n > bound {
        return Err(OracleError::BoundExceeded(n, bound));
    }
    if !strongly_connected_by_closure(g) {
        return Ok(false);
    }

    // Candidate components: vertex sets inducing a strongly connected
    // subgraph that has at least one vertex on all of its cycles.
    let mut cands: Vec<BTreeSet<VertexId>> = Vec::new();
    for mask in 1u64..(1 << n) {
        if (mask.count_ones() as usize) < 2 {
            continue;
        }
        let set: BTreeSet<VertexId> = (0..n).filter(|v| mask >> v & 1 == 1).collect();
        let keep: Vec<bool> = (0..n).map(|v| mask >> v & 1 == 1).collect();
        if !g.is_strongly_connected_within(&keep) {
            continue;
        }
        let has_bottleneck = set.iter().any(|&b| {
            let mut k = keep.clone();
            k[b] = false;
            g.is_acyclic_within(&k)
        });
        if has_bottleneck {
            cands.push(set);
        }
    }

    let arcs: Vec<_> = g.arcs().collect();
    let mut family: Vec<usize> = Vec::new();
    Ok(cover(g, &arcs, &cands, &mut vec![false; arcs.len()], &mut family))
}

/// Exact cover search: pick the first uncovered arc, try each candidate
/// containing it whose induced arcs are all uncovered and whose vertex set
/// overlaps every chosen candidate in at most one vertex.
fn cover(
    g: &SwapDigraph,
    arcs: &[(VertexId, VertexId)],
    cands: &[BTreeSet<VertexId>],
    covered: &mut Vec<bool>,
    family: &mut Vec<usize>,
) -> bool {
    let Some(next) = covered.iter().position(|&c| !c) else {
        return family_admits_tree(g, cands, family);
    };
    let (u, v) = arcs[next];
    'cand: for (ci, cand) in cands.iter().enumerate() {
        if !cand.contains(&u) || !cand.contains(&v) {
            continue;
        }
        for &fi in family.iter() {
            if cands[fi].intersection(cand).count() > 1 {
                continue 'cand;
            }
        }
        let inside: Vec<usize> = (0..arcs.len())
            .filter(|&i| cand.contains(&arcs[i].0) && cand.contains(&arcs[i].1))
            .collect();
        if inside.iter().any(|&i| covered[i]) {
            continue;
        }
        for &i in &inside {
            covered[i] = true;
        }
        family.push(ci);
        if cover(g, arcs, cands, covered, family) {
            return true;
        }
        family.pop();
        for &i in &inside {
            covered[i] = false;
        }
    }
    false
}

/// Given an arc-partitioning family, try every root component and root
/// bottleneck; child bottlenecks are forced to the shared vertices by rg2.
/// Each full assignment is checked literally against the definition.
fn family_admits_tree(g: &SwapDigraph, cands: &[BTreeSet<VertexId>], family: &[usize]) -> bool {
    let p = family.len();
    let sets: Vec<&BTreeSet<VertexId>> = family.iter().map(|&i| &cands[i]).collect();
    // Adjacency between components sharing a vertex; rg2 forces the control
    // tree's undirected shape to equal this graph, so it must be a tree.
    let mut shared = vec![vec![None; p]; p];
    let mut edges = 0;
    for i in 0..p {
        for j in i + 1..p {
            let inter: Vec<VertexId> = sets[i].intersection(sets[j]).copied().collect();
            if inter.len() == 1 {
                shared[i][j] = Some(inter[0]);
                shared[j][i] = Some(inter[0]);
                edges += 1;
            }
        }
    }
    if edges != p - 1 {
        return false;
    }
    for root in 0..p {
        // Orient away from the root.
        let mut parent = vec![None; p];
        let mut order = vec![root];
        let mut seen = vec![false; p];
        seen[root] = true;
        let mut head = 0;
        while head < order.len() {
            let i = order[head];
            head += 1;
            for j in 0..p {
                if !seen[j] && shared[i][j].is_some() {
                    seen[j] = true;
                    parent[j] = Some(i);
                    order.push(j);
                }
            }
        }
        if order.len() != p {
            continue;
        }
        let root_choices: Vec<VertexId> = sets[root].iter().copied().collect();
        for &rb in &root_choices {
            let mut bottlenecks = vec![usize::MAX; p];
            bottlenecks[root] = rb;
            for &j in &order {
                if let Some(i) = parent[j] {
                    bottlenecks[j] = shared[i][j].unwrap();
                }
            }
            // Re-index into the decomposition layout (root first).
            let dec = ReuniclusDecomposition {
                bottlenecks: order.iter().map(|&j| bottlenecks[j]).collect(),
                components: order.iter().map(|&j| sets[j].clone()).collect(),
                parent: order
                    .iter()
                    .map(|&j| parent[j].map(|i| order.iter().position(|&k| k == i).unwrap()))
                    .collect(),
            };
            if validate_decomposition(g, &dec).is_ok() {
                return true;
            }
        }
    }
    false
}

/// Strong connectivity via boolean matrix closure, kept separate from the
/// BFS used by the recognizer path.
fn strongly_connected_by_closure(g: &SwapDigraph) -> bool {
    let n = g.vertex_count();
    let mut reach = vec![vec![false; n]; n];
    for v in 0..n {
        reach[v][v] = true;
    }
    for (u, v) in g.arcs() {
        reach[u][v] = true;
    }
    for k in 0..n {
        for i in 0..n {
            if reach[i][k] {
                for j in 0..n {
                    if reach[k][j] {
                        reach[i][j] = true;
                    }
                }
            }
        }
    }
    reach.iter().all(|row| row.iter().all(|&r| r))
}
