//! Reuniclus recognition and decomposition.
//!
//! A strongly connected digraph is reuniclus when it splits into induced
//! bottleneck components `G_1..G_p` with designated bottlenecks `b_1..b_p`
//! organized by a rooted control tree: each component is strongly connected
//! with its bottleneck on every cycle (rg1), and two components are disjoint
//! unless one is the parent of the other, in which case they share exactly
//! the child's bottleneck (rg2).
//!
//! Recognition works on the biconnected blocks of the undirected structure:
//! every component of a valid decomposition is a union of whole blocks that
//! all contain the designated bottleneck, so a decomposition is equivalent to
//! choosing, per block, a designated vertex lying on all of the block's
//! cycles, such that at every articulation vertex at most one incident block
//! is designated away from it. A deterministic backtracking search finds the
//! canonical (first-in-order) choice or proves none exists.

use crate::graph::{Arc, SwapDigraph, VertexId};
use serde_json::json;
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum DecomposeError {
    #[error("graph is not strongly connected")]
    NotStronglyConnected,
    #[error("not a reuniclus digraph: {0}")]
    NotReuniclus(String),
}

/// A reuniclus decomposition: bottlenecks `b_1..b_p`, their components, and
/// the control tree as a parent map (index 0 is the root, `b_1`).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReuniclusDecomposition {
    pub bottlenecks: Vec<VertexId>,
    pub components: Vec<BTreeSet<VertexId>>,
    pub parent: Vec<Option<usize>>,
}

impl ReuniclusDecomposition {
    /// The single-component decomposition of a bottleneck digraph.
    pub fn trivial(g: &SwapDigraph, leader: VertexId) -> Self {
        ReuniclusDecomposition {
            bottlenecks: vec![leader],
            components: vec![g.vertices().collect()],
            parent: vec![None],
        }
    }

    pub fn component_count(&self) -> usize {
        self.bottlenecks.len()
    }

    /// The main leader `b_1`.
    pub fn main_leader(&self) -> VertexId {
        self.bottlenecks[0]
    }

    pub fn is_leader(&self, v: VertexId) -> bool {
        self.bottlenecks.contains(&v)
    }

    /// Index of the component an arc belongs to. Both endpoints of an arc lie
    /// in exactly one component of a valid decomposition.
    pub fn component_of_arc(&self, (u, v): Arc) -> Option<usize> {
        self.components
            .iter()
            .position(|c| c.contains(&u) && c.contains(&v))
    }

    /// Index of the home component of a bottleneck vertex.
    pub fn home_component(&self, b: VertexId) -> Option<usize> {
        self.bottlenecks.iter().position(|&x| x == b)
    }

    /// True iff `arc` leaves a bottleneck vertex into its home component.
    pub fn is_bottleneck_arc(&self, arc: Arc) -> bool {
        match self.home_component(arc.0) {
            Some(j) => self.component_of_arc(arc) == Some(j),
            None => false,
        }
    }

    pub fn to_json(&self, g: &SwapDigraph) -> serde_json::Value {
        let parent: BTreeMap<String, String> = self
            .parent
            .iter()
            .enumerate()
            .filter_map(|(j, p)| {
                p.map(|i| {
                    (
                        g.name(self.bottlenecks[j]).to_owned(),
                        g.name(self.bottlenecks[i]).to_owned(),
                    )
                })
            })
            .collect();
        json!({
            "bottlenecks": self.bottlenecks.iter().map(|&b| g.name(b)).collect::<Vec<_>>(),
            "components": self.components.iter()
                .map(|c| c.iter().map(|&v| g.name(v)).collect::<Vec<_>>())
                .collect::<Vec<_>>(),
            "parent": parent,
        })
    }
}

/// Validates a decomposition against the definition: rg1, rg2, arc coverage,
/// distinct bottlenecks and a well-formed rooted control tree.
pub fn validate_decomposition(
    g: &SwapDigraph,
    dec: &ReuniclusDecomposition,
) -> Result<(), String> {
    let p = dec.bottlenecks.len();
    if p == 0 || dec.components.len() != p || dec.parent.len() != p {
        return Err("empty or ragged decomposition".into());
    }
    let distinct: BTreeSet<_> = dec.bottlenecks.iter().collect();
    if distinct.len() != p {
        return Err("designated bottlenecks are not distinct".into());
    }
    if dec.parent[0].is_some() || dec.parent.iter().skip(1).any(Option::is_none) {
        return Err("control tree must have exactly one root at index 0".into());
    }
    // Parent map acyclicity: walking up from any node reaches the root.
    for j in 0..p {
        let (mut cur, mut hops) = (j, 0usize);
        while let Some(i) = dec.parent[cur] {
            cur = i;
            hops += 1;
            if hops > p {
                return Err("control tree parent map contains a cycle".into());
            }
        }
        if cur != 0 {
            return Err("control tree is not connected to the root".into());
        }
    }
    let n = g.vertex_count();
    for (j, comp) in dec.components.iter().enumerate() {
        let b = dec.bottlenecks[j];
        if !comp.contains(&b) {
            return Err(format!("component {j} does not contain its bottleneck"));
        }
        if comp.len() < 2 {
            return Err(format!("component {j} has fewer than two vertices"));
        }
        let mut keep = vec![false; n];
        for &v in comp {
            keep[v] = true;
        }
        if !g.is_strongly_connected_within(&keep) {
            return Err(format!("component {j} is not strongly connected"));
        }
        keep[b] = false;
        if !g.is_acyclic_within(&keep) {
            return Err(format!(
                "bottleneck {} misses a cycle of component {j}",
                g.name(b)
            ));
        }
    }
    // rg2 over vertex sets.
    for i in 0..p {
        for j in 0..p {
            if i == j {
                continue;
            }
            let inter: BTreeSet<_> =
                dec.components[i].intersection(&dec.components[j]).collect();
            if dec.parent[j] == Some(i) {
                if inter.len() != 1 || !inter.contains(&dec.bottlenecks[j]) {
                    return Err(format!(
                        "parent/child components {i},{j} must share exactly the child bottleneck"
                    ));
                }
            } else if dec.parent[i] != Some(j) && !inter.is_empty() {
                return Err(format!("unrelated components {i},{j} overlap"));
            }
        }
    }
    // Every arc inside exactly one component.
    for arc in g.arcs() {
        let owners = dec
            .components
            .iter()
            .filter(|c| c.contains(&arc.0) && c.contains(&arc.1))
            .count();
        if owners != 1 {
            return Err(format!(
                "arc {} belongs to {owners} components",
                g.arc_label(arc)
            ));
        }
    }
    Ok(())
}

/// Recognizes a reuniclus digraph and returns its canonical decomposition.
pub fn reuniclus_decompose(
    g: &SwapDigraph,
) -> Result<ReuniclusDecomposition, DecomposeError> {
    if !g.is_strongly_connected() {
        return Err(DecomposeError::NotStronglyConnected);
    }
    let n = g.vertex_count();
    let mut blocks = g.block_decomposition().blocks;
    blocks.sort();

    // Per block, vertices lying on all of its directed cycles.
    let mut candidates: Vec<Vec<VertexId>> = Vec::with_capacity(blocks.len());
    for block in &blocks {
        let mut keep = vec![false; n];
        for &v in block {
            keep[v] = true;
        }
        let cands: Vec<VertexId> = block
            .iter()
            .copied()
            .filter(|&v| {
                let mut k = keep.clone();
                k[v] = false;
                g.is_acyclic_within(&k)
            })
            .collect();
        if cands.is_empty() {
            return Err(DecomposeError::NotReuniclus(format!(
                "block {{{}}} has no vertex on all of its cycles",
                block.iter().map(|&v| g.name(v)).collect::<Vec<_>>().join(", ")
            )));
        }
        candidates.push(cands);
    }

    let mut blocks_at: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (i, block) in blocks.iter().enumerate() {
        for &v in block {
            blocks_at[v].push(i);
        }
    }

    // Backtracking over per-block designations. At each vertex w shared by
    // several blocks, at most one incident block may be designated away from
    // w; otherwise w would sit in two components neither of which it leads.
    let mut chosen: Vec<VertexId> = Vec::new();
    if !assign(&blocks, &candidates, &blocks_at, &mut chosen) {
        return Err(DecomposeError::NotReuniclus(
            "no designation of block bottlenecks satisfies the overlap rules".into(),
        ));
    }

    // Group blocks by designated vertex.
    let mut groups: BTreeMap<VertexId, BTreeSet<VertexId>> = BTreeMap::new();
    for (i, block) in blocks.iter().enumerate() {
        groups.entry(chosen[i]).or_default().extend(block.iter().copied());
    }
    let order: Vec<VertexId> = groups.keys().copied().collect();

    // A group's parent is the group owning a block that contains the child's
    // bottleneck but is designated elsewhere.
    let mut parent_of: BTreeMap<VertexId, VertexId> = BTreeMap::new();
    for (&b, _) in &groups {
        for &i in &blocks_at[b] {
            if chosen[i] != b {
                parent_of.insert(b, chosen[i]);
            }
        }
    }
    let roots: Vec<VertexId> = order
        .iter()
        .copied()
        .filter(|b| !parent_of.contains_key(b))
        .collect();
    if roots.len() != 1 {
        return Err(DecomposeError::NotReuniclus(format!(
            "control relation has {} roots",
            roots.len()
        )));
    }

    // Order components root-first, then breadth-first by bottleneck id.
    let mut children: BTreeMap<VertexId, Vec<VertexId>> = BTreeMap::new();
    for (&c, &p) in &parent_of {
        children.entry(p).or_default().push(c);
    }
    let mut bottlenecks = Vec::with_capacity(order.len());
    let mut queue = std::collections::VecDeque::from([roots[0]]);
    while let Some(b) = queue.pop_front() {
        bottlenecks.push(b);
        if let Some(kids) = children.get(&b) {
            queue.extend(kids.iter().copied());
        }
    }
    let pos: BTreeMap<VertexId, usize> =
        bottlenecks.iter().enumerate().map(|(i, &b)| (b, i)).collect();
    let components: Vec<BTreeSet<VertexId>> =
        bottlenecks.iter().map(|b| groups[b].clone()).collect();
    let parent: Vec<Option<usize>> = bottlenecks
        .iter()
        .map(|b| parent_of.get(b).map(|p| pos[p]))
        .collect();

    let dec = ReuniclusDecomposition { bottlenecks, components, parent };
    validate_decomposition(g, &dec)
        .map_err(|e| DecomposeError::NotReuniclus(format!("internal: {e}")))?;
    Ok(dec)
}

fn assign(
    blocks: &[BTreeSet<VertexId>],
    candidates: &[Vec<VertexId>],
    blocks_at: &[Vec<usize>],
    chosen: &mut Vec<VertexId>,
) -> bool {
    let i = chosen.len();
    if i == blocks.len() {
        return true;
    }
    'cand: for &c in &candidates[i] {
        chosen.push(c);
        // Overlap rule at every vertex of this block shared with earlier blocks.
        for &w in &blocks[i] {
            if blocks_at[w].len() < 2 {
                continue;
            }
            let away = blocks_at[w]
                .iter()
                .filter(|&&b| b < chosen.len() && chosen[b] != w)
                .count();
            if away > 1 {
                chosen.pop();
                continue 'cand;
            }
        }
        if assign(blocks, candidates, blocks_at, chosen) {
            return true;
        }
        chosen.pop();
    }
    false
}

#[cfg(test)]
mod tests {
    use super::*;

    fn graph(arcs: &[(&str, &str)]) -> SwapDigraph {
        SwapDigraph::from_named_arcs(arcs).unwrap()
    }

    fn digon_chain() -> SwapDigraph {
        graph(&[("a", "b"), ("b", "a"), ("b", "c"), ("c", "b")])
    }

    #[test]
    fn digon_chain_decomposition() {
        let g = digon_chain();
        let dec = reuniclus_decompose(&g).unwrap();
        let (a, b, c) = (g.vertex("a").unwrap(), g.vertex("b").unwrap(), g.vertex("c").unwrap());
        assert_eq!(dec.bottlenecks, vec![a, b]);
        assert_eq!(dec.components, vec![BTreeSet::from([a, b]), BTreeSet::from([b, c])]);
        assert_eq!(dec.parent, vec![None, Some(0)]);
        validate_decomposition(&g, &dec).unwrap();
    }

    #[test]
    fn three_cycle_is_single_component() {
        let g = graph(&[("l", "a"), ("a", "b"), ("b", "l")]);
        let dec = reuniclus_decompose(&g).unwrap();
        assert_eq!(dec.component_count(), 1);
        assert_eq!(dec.parent, vec![None]);
        assert_eq!(dec.main_leader(), g.vertex("a").unwrap());
        validate_decomposition(&g, &dec).unwrap();
    }

    #[test]
    fn non_reuniclus_fixture_rejected() {
        let g = graph(&[("a", "b"), ("b", "c"), ("c", "d"), ("d", "a"), ("b", "a"), ("d", "c")]);
        assert!(matches!(
            reuniclus_decompose(&g),
            Err(DecomposeError::NotReuniclus(_))
        ));
    }

    #[test]
    fn rejects_not_strongly_connected() {
        let g = graph(&[("a", "b"), ("b", "c"), ("a", "c")]);
        assert_eq!(reuniclus_decompose(&g), Err(DecomposeError::NotStronglyConnected));
    }

    #[test]
    fn bowtie_decomposes() {
        // Two triangles sharing m; m is on every cycle, so this is also a
        // bottleneck digraph, but the canonical decomposition is per-block.
        let g = graph(&[("a", "b"), ("b", "m"), ("m", "a"), ("m", "c"), ("c", "d"), ("d", "m")]);
        let dec = reuniclus_decompose(&g).unwrap();
        validate_decomposition(&g, &dec).unwrap();
        assert_eq!(dec.component_count(), 2);
        assert_eq!(dec.main_leader(), g.vertex("a").unwrap());
        assert_eq!(dec.bottlenecks[1], g.vertex("m").unwrap());
    }

    #[test]
    fn glued_bottleneck_blocks_without_shared_candidate_rejected() {
        // Two biconnected pieces meeting at w; each piece's only cycle cover
        // is its interior vertex, so no designation satisfies the overlap rule.
        let g = graph(&[
            ("w", "p"), ("p", "w"), ("p", "q"), ("q", "p"), ("q", "w"),
            ("w", "r"), ("r", "w"), ("r", "s"), ("s", "r"), ("s", "w"),
        ]);
        let dec = reuniclus_decompose(&g);
        assert!(matches!(dec, Err(DecomposeError::NotReuniclus(_))), "{dec:?}");
    }

    #[test]
    fn trivial_decomposition_of_bottleneck_digraph_validates() {
        let g = digon_chain();
        let b = g.vertex("b").unwrap();
        assert!(g.bottleneck_vertices().unwrap().contains(&b));
        validate_decomposition(&g, &ReuniclusDecomposition::trivial(&g, b)).unwrap();
    }

    #[test]
    fn removing_bottlenecks_leaves_acyclic_graph() {
        for g in [digon_chain(), graph(&[("l", "a"), ("a", "b"), ("b", "l")])] {
            let dec = reuniclus_decompose(&g).unwrap();
            let mut keep = vec![true; g.vertex_count()];
            for &b in &dec.bottlenecks {
                keep[b] = false;
            }
            assert!(g.is_acyclic_within(&keep));
        }
    }

    #[test]
    fn arc_component_lookup() {
        let g = digon_chain();
        let dec = reuniclus_decompose(&g).unwrap();
        let ab = g.arc_from_label("a->b").unwrap();
        let cb = g.arc_from_label("c->b").unwrap();
        assert_eq!(dec.component_of_arc(ab), Some(0));
        assert_eq!(dec.component_of_arc(cb), Some(1));
        assert!(dec.is_bottleneck_arc(ab));
        assert!(!dec.is_bottleneck_arc(cb));
        assert!(dec.is_bottleneck_arc(g.arc_from_label("b->c").unwrap()));
        assert!(!dec.is_bottleneck_arc(g.arc_from_label("b->a").unwrap()));
    }

    #[test]
    fn json_export_shape() {
        let g = digon_chain();
        let dec = reuniclus_decompose(&g).unwrap();
        let v = dec.to_json(&g);
        assert_eq!(v["bottlenecks"], serde_json::json!(["a", "b"]));
        assert_eq!(v["parent"]["b"], "a");
        assert_eq!(v["components"][0], serde_json::json!(["a", "b"]));
    }
}
