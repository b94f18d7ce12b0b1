//! Directed-graph model of a swap instance.
//!
//! Vertices are parties, arcs are prearranged asset transfers `(seller, buyer)`.
//! Swap digraphs never contain self-loops or parallel arcs; vertices are opaque
//! strings ordered lexicographically, so vertex ids are stable across runs.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use thiserror::Error;

pub type VertexId = usize;
pub type Arc = (VertexId, VertexId);

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GraphError {
    #[error("line {line}: expected `<seller> <buyer>`, got {got:?}")]
    MalformedLine { line: usize, got: String },
    #[error("self-loop on vertex {0:?}")]
    SelfLoop(String),
    #[error("duplicate arc {0:?} -> {1:?}")]
    DuplicateArc(String, String),
    #[error("graph has no arcs")]
    Empty,
    #[error("unknown vertex {0:?}")]
    UnknownVertex(String),
    #[error("arc {0:?} -> {1:?} not in graph")]
    UnknownArc(String, String),
}

/// A swap digraph `G = (V, A)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SwapDigraph {
    names: Vec<String>,
    arcs: BTreeSet<Arc>,
    out_adj: Vec<Vec<VertexId>>,
    in_adj: Vec<Vec<VertexId>>,
}

impl SwapDigraph {
    /// Builds a digraph from `(seller, buyer)` name pairs.
    pub fn from_named_arcs<S: AsRef<str>>(pairs: &[(S, S)]) -> Result<Self, GraphError> {
        if pairs.is_empty() {
            return Err(GraphError::Empty);
        }
        let mut names: BTreeSet<&str> = BTreeSet::new();
        for (u, v) in pairs {
            if u.as_ref() == v.as_ref() {
                return Err(GraphError::SelfLoop(u.as_ref().to_owned()));
            }
            names.insert(u.as_ref());
            names.insert(v.as_ref());
        }
        let names: Vec<String> = names.into_iter().map(str::to_owned).collect();
        let index: BTreeMap<&str, VertexId> =
            names.iter().enumerate().map(|(i, n)| (n.as_str(), i)).collect();
        let mut arcs = BTreeSet::new();
        for (u, v) in pairs {
            let a = (index[u.as_ref()], index[v.as_ref()]);
            if !arcs.insert(a) {
                return Err(GraphError::DuplicateArc(
                    u.as_ref().to_owned(),
                    v.as_ref().to_owned(),
                ));
            }
        }
        let mut out_adj = vec![Vec::new(); names.len()];
        let mut in_adj = vec![Vec::new(); names.len()];
        for &(u, v) in &arcs {
            out_adj[u].push(v);
            in_adj[v].push(u);
        }
        Ok(SwapDigraph { names, arcs, out_adj, in_adj })
    }

    /// Parses the edge-list format: one `<seller> <buyer>` per line,
    /// `#`-prefixed comment lines and blank lines ignored.
    pub fn parse(text: &str) -> Result<Self, GraphError> {
        let mut pairs = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let tokens: Vec<&str> = line.split_whitespace().collect();
            if tokens.len() != 2 {
                return Err(GraphError::MalformedLine { line: i + 1, got: raw.to_owned() });
            }
            pairs.push((tokens[0], tokens[1]));
        }
        Self::from_named_arcs(&pairs)
    }

    /// Serializes back to the edge-list format, arcs in canonical order.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for &(u, v) in &self.arcs {
            out.push_str(&format!("{} {}\n", self.names[u], self.names[v]));
        }
        out
    }

    pub fn vertex_count(&self) -> usize {
        self.names.len()
    }

    pub fn vertices(&self) -> impl Iterator<Item = VertexId> {
        0..self.names.len()
    }

    pub fn name(&self, v: VertexId) -> &str {
        &self.names[v]
    }

    pub fn vertex(&self, name: &str) -> Result<VertexId, GraphError> {
        self.names
            .binary_search_by(|n| n.as_str().cmp(name))
            .map_err(|_| GraphError::UnknownVertex(name.to_owned()))
    }

    pub fn arcs(&self) -> impl Iterator<Item = Arc> + '_ {
        self.arcs.iter().copied()
    }

    pub fn arc_count(&self) -> usize {
        self.arcs.len()
    }

    pub fn has_arc(&self, a: Arc) -> bool {
        self.arcs.contains(&a)
    }

    pub fn out_neighbors(&self, v: VertexId) -> &[VertexId] {
        &self.out_adj[v]
    }

    pub fn in_neighbors(&self, v: VertexId) -> &[VertexId] {
        &self.in_adj[v]
    }

    pub fn arc_label(&self, (u, v): Arc) -> String {
        format!("{}->{}", self.names[u], self.names[v])
    }

    /// Parses an `u->v` arc label against this graph's vertex set.
    pub fn arc_from_label(&self, label: &str) -> Result<Arc, GraphError> {
        let (u, v) = label
            .split_once("->")
            .ok_or_else(|| GraphError::MalformedLine { line: 0, got: label.to_owned() })?;
        let a = (self.vertex(u.trim())?, self.vertex(v.trim())?);
        if !self.has_arc(a) {
            return Err(GraphError::UnknownArc(u.trim().to_owned(), v.trim().to_owned()));
        }
        Ok(a)
    }

    /// True iff every ordered vertex pair is connected by a directed path.
    pub fn is_strongly_connected(&self) -> bool {
        let n = self.vertex_count();
        if n == 0 {
            return false;
        }
        reachable_from(0, &self.out_adj).iter().all(|&r| r)
            && reachable_from(0, &self.in_adj).iter().all(|&r| r)
    }

    /// True iff the subgraph induced by `keep` has no directed cycle.
    pub fn is_acyclic_within(&self, keep: &[bool]) -> bool {
        // Kahn's algorithm restricted to `keep`.
        let n = self.vertex_count();
        let mut indeg = vec![0usize; n];
        let mut active = 0usize;
        for v in 0..n {
            if !keep[v] {
                continue;
            }
            active += 1;
            for &u in &self.in_adj[v] {
                if keep[u] {
                    indeg[v] += 1;
                }
            }
        }
        let mut queue: Vec<VertexId> = (0..n).filter(|&v| keep[v] && indeg[v] == 0).collect();
        let mut removed = 0usize;
        while let Some(v) = queue.pop() {
            removed += 1;
            for &w in &self.out_adj[v] {
                if keep[w] {
                    indeg[w] -= 1;
                    if indeg[w] == 0 {
                        queue.push(w);
                    }
                }
            }
        }
        removed == active
    }

    /// True iff the subgraph induced by `keep` is strongly connected.
    pub fn is_strongly_connected_within(&self, keep: &[bool]) -> bool {
        let Some(start) = keep.iter().position(|&k| k) else { return false };
        let total = keep.iter().filter(|&&k| k).count();
        let fwd = reachable_within(start, &self.out_adj, keep);
        let bwd = reachable_within(start, &self.in_adj, keep);
        fwd.iter().filter(|&&r| r).count() == total && bwd.iter().filter(|&&r| r).count() == total
    }

    /// The vertices lying on every directed cycle, i.e. `{ v : G - v is acyclic }`.
    pub fn bottleneck_vertices(&self) -> Result<BTreeSet<VertexId>, NotStronglyConnected> {
        if !self.is_strongly_connected() {
            return Err(NotStronglyConnected);
        }
        let n = self.vertex_count();
        let mut out = BTreeSet::new();
        for v in 0..n {
            let mut keep = vec![true; n];
            keep[v] = false;
            if self.is_acyclic_within(&keep) {
                out.insert(v);
            }
        }
        Ok(out)
    }

    /// Vertices whose removal increases the count of weakly connected components.
    pub fn articulation_vertices(&self) -> BTreeSet<VertexId> {
        self.block_decomposition().articulation
    }

    /// Biconnected components of the undirected structure, plus articulation vertices.
    ///
    /// Each block is reported as its vertex set; block edge sets partition the
    /// undirected edges, and two blocks share at most one vertex.
    pub fn block_decomposition(&self) -> BlockDecomposition {
        let n = self.vertex_count();
        let mut adj: Vec<BTreeSet<VertexId>> = vec![BTreeSet::new(); n];
        for &(u, v) in &self.arcs {
            adj[u].insert(v);
            adj[v].insert(u);
        }
        let adj: Vec<Vec<VertexId>> = adj.into_iter().map(|s| s.into_iter().collect()).collect();

        let mut disc = vec![usize::MAX; n];
        let mut low = vec![0usize; n];
        let mut timer = 0usize;
        let mut articulation = BTreeSet::new();
        let mut blocks: Vec<BTreeSet<VertexId>> = Vec::new();
        let mut edge_stack: Vec<(VertexId, VertexId)> = Vec::new();

        // Iterative DFS; frame = (vertex, parent, next child index).
        for root in 0..n {
            if disc[root] != usize::MAX {
                continue;
            }
            let mut stack: Vec<(VertexId, Option<VertexId>, usize)> = vec![(root, None, 0)];
            let mut root_children = 0usize;
            disc[root] = timer;
            low[root] = timer;
            timer += 1;
            while let Some(&mut (v, parent, ref mut idx)) = stack.last_mut() {
                if *idx < adj[v].len() {
                    let w = adj[v][*idx];
                    *idx += 1;
                    if Some(w) == parent {
                        continue;
                    }
                    if disc[w] == usize::MAX {
                        edge_stack.push((v, w));
                        disc[w] = timer;
                        low[w] = timer;
                        timer += 1;
                        if v == root {
                            root_children += 1;
                        }
                        stack.push((w, Some(v), 0));
                    } else if disc[w] < disc[v] {
                        edge_stack.push((v, w));
                        low[v] = low[v].min(disc[w]);
                    }
                } else {
                    stack.pop();
                    if let Some(&mut (p, _, _)) = stack.last_mut() {
                        low[p] = low[p].min(low[v]);
                        if low[v] >= disc[p] {
                            // (p, v) closes a block.
                            let mut block = BTreeSet::new();
                            while let Some(&(x, y)) = edge_stack.last() {
                                if disc[x] >= disc[v] {
                                    block.insert(x);
                                    block.insert(y);
                                    edge_stack.pop();
                                } else {
                                    break;
                                }
                            }
                            if let Some(&(x, y)) = edge_stack.last() {
                                if (x, y) == (p, v) {
                                    block.insert(x);
                                    block.insert(y);
                                    edge_stack.pop();
                                }
                            }
                            if !block.is_empty() {
                                blocks.push(block);
                            }
                            if p != root {
                                articulation.insert(p);
                            }
                        }
                    }
                }
            }
            if root_children >= 2 {
                articulation.insert(root);
            }
        }
        BlockDecomposition { blocks, articulation }
    }
}

impl fmt::Display for SwapDigraph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let labels: Vec<String> = self.arcs().map(|a| self.arc_label(a)).collect();
        write!(f, "{{{}}}", labels.join(", "))
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("graph is not strongly connected")]
pub struct NotStronglyConnected;

#[derive(Debug, Clone)]
pub struct BlockDecomposition {
    pub blocks: Vec<BTreeSet<VertexId>>,
    pub articulation: BTreeSet<VertexId>,
}

fn reachable_from(start: VertexId, adj: &[Vec<VertexId>]) -> Vec<bool> {
    let keep = vec![true; adj.len()];
    reachable_within(start, adj, &keep)
}

fn reachable_within(start: VertexId, adj: &[Vec<VertexId>], keep: &[bool]) -> Vec<bool> {
    let mut seen = vec![false; adj.len()];
    if !keep[start] {
        return seen;
    }
    seen[start] = true;
    let mut queue = vec![start];
    while let Some(v) = queue.pop() {
        for &w in &adj[v] {
            if keep[w] && !seen[w] {
                seen[w] = true;
                queue.push(w);
            }
        }
    }
    seen
}
