//! Protocol compilation: per-party timetables of hashlock creations,
//! contract creations, verification checks and claims.
//!
//! The reuniclus protocol compiles as follows, with `B*` the creation step
//! at the main leader and `d(v)` the longest path from `v` to the main
//! leader. Every leader makes its secret pair at step 0 and creates its
//! home-component contracts with its own hashlock. A non-leader creates its
//! outgoing contracts one step after its last incoming contract is due,
//! copying the hashlock observed on its (uniform) incoming contracts. A
//! non-main leader does the same for its parent-component contracts, but
//! only after verifying all incoming contracts in both components, with the
//! home ones carrying its own hashlock. Every contract on arc `(u,v)` has
//! timeout `B* + d(v)`, which is exactly the step at which `v` claims it.
//! The bottleneck protocol is the single-component case with a designated
//! leader.

use crate::decompose::{validate_decomposition, ReuniclusDecomposition};
use crate::distance::{compute_distances, DistanceTable};
use crate::graph::{Arc, SwapDigraph, VertexId};
use serde_json::json;
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ScheduleError {
    #[error("graph is not strongly connected")]
    NotStronglyConnected,
    #[error("{0:?} is not a bottleneck vertex of the graph")]
    LeaderNotBottleneck(String),
    #[error("invalid decomposition: {0}")]
    InvalidDecomposition(String),
    #[error("graph too large for brute-force path computation ({0} vertices)")]
    TooLarge(usize),
}

/// Expected hashlock relation for a group of incoming contracts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum LockGroup {
    /// All contracts in the group must carry the verifier's own hashlock.
    PinnedOwn,
    /// All contracts in the group must carry one common hashlock value.
    Uniform,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IncomingCheck {
    pub arc: Arc,
    pub timeout: u32,
    pub group: LockGroup,
}

/// Where a created contract's hashlock value comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LockSource {
    /// The creator's own pair.
    Own,
    /// The uniform value observed by the creator's verification step.
    CopiedUniform,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TimedAction {
    MakeSecretPair,
    VerifyIncoming { checks: Vec<IncomingCheck> },
    CreateContract { arc: Arc, lock: LockSource, timeout: u32 },
    /// Claim all `arcs`; when `watch` is non-empty the claimer first checks
    /// that some watched outgoing contract was claimed and aborts otherwise.
    ClaimIncoming { arcs: Vec<Arc>, watch: Vec<Arc> },
}

impl TimedAction {
    fn rank(&self) -> u8 {
        match self {
            TimedAction::MakeSecretPair => 0,
            TimedAction::VerifyIncoming { .. } => 1,
            TimedAction::CreateContract { .. } => 2,
            TimedAction::ClaimIncoming { .. } => 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScheduleEntry {
    pub time: u32,
    pub action: TimedAction,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Schedule {
    pub per_party: BTreeMap<VertexId, Vec<ScheduleEntry>>,
    pub hashlock_owner: BTreeMap<Arc, VertexId>,
    pub timeout: BTreeMap<Arc, u32>,
    pub create_time: BTreeMap<Arc, u32>,
    pub leader: VertexId,
    pub distances: DistanceTable,
    /// When set, conforming parties claim their incoming assets as soon as
    /// any outgoing asset is claimed instead of waiting for the timeout step.
    pub eager_claims: bool,
}

impl Schedule {
    pub fn max_timeout(&self) -> u32 {
        self.timeout.values().copied().max().unwrap_or(0)
    }

    /// A horizon that resolves every contract, including one spare step for
    /// adversarial timeouts drawn one past the schedule maximum.
    pub fn auto_horizon(&self) -> u32 {
        self.max_timeout() + 2
    }

    pub fn with_eager_claims(mut self) -> Self {
        self.eager_claims = true;
        self
    }

    pub fn claim_step(&self, party: VertexId) -> Option<u32> {
        self.per_party.get(&party)?.iter().find_map(|e| match e.action {
            TimedAction::ClaimIncoming { .. } => Some(e.time),
            _ => None,
        })
    }

    /// Flat export: one row per action and arc, ordered by time, party, arc.
    pub fn to_json_rows(&self, g: &SwapDigraph) -> serde_json::Value {
        let mut rows: Vec<(u32, String, String, serde_json::Value)> = Vec::new();
        for (&party, entries) in &self.per_party {
            let pname = g.name(party).to_owned();
            for e in entries {
                let mut push = |action: &str, arc: Option<Arc>| {
                    let (arc_s, owner, timeout) = match arc {
                        Some(a) => (
                            Some(g.arc_label(a)),
                            Some(g.name(self.hashlock_owner[&a]).to_owned()),
                            Some(self.timeout[&a]),
                        ),
                        None => (None, None, None),
                    };
                    rows.push((
                        e.time,
                        pname.clone(),
                        arc_s.clone().unwrap_or_default(),
                        json!({
                            "party": pname,
                            "time": e.time,
                            "action": action,
                            "arc": arc_s,
                            "hashlockOwner": owner,
                            "timeout": timeout,
                        }),
                    ));
                };
                match &e.action {
                    TimedAction::MakeSecretPair => push("make_secret_pair", None),
                    TimedAction::VerifyIncoming { checks } => {
                        for c in checks {
                            push("verify_incoming", Some(c.arc));
                        }
                    }
                    TimedAction::CreateContract { arc, .. } => {
                        push("create_contract", Some(*arc))
                    }
                    TimedAction::ClaimIncoming { arcs, .. } => {
                        for &a in arcs {
                            push("claim_incoming", Some(a));
                        }
                    }
                }
            }
        }
        rows.sort_by(|a, b| (a.0, &a.1, &a.2).cmp(&(b.0, &b.1, &b.2)));
        json!(rows.into_iter().map(|r| r.3).collect::<Vec<_>>())
    }
}

/// Compiles the reuniclus-digraph protocol for a valid decomposition.
pub fn compile_rdp(
    g: &SwapDigraph,
    dec: &ReuniclusDecomposition,
) -> Result<Schedule, ScheduleError> {
    validate_decomposition(g, dec).map_err(ScheduleError::InvalidDecomposition)?;
    let distances = compute_distances(g, dec)
        .map_err(|e| ScheduleError::InvalidDecomposition(e.to_string()))?;
    Ok(compile_with(g, dec, distances))
}

/// Compiles the bottleneck-digraph protocol under a designated leader.
pub fn compile_bdp(g: &SwapDigraph, leader: VertexId) -> Result<Schedule, ScheduleError> {
    let bottlenecks = g
        .bottleneck_vertices()
        .map_err(|_| ScheduleError::NotStronglyConnected)?;
    if !bottlenecks.contains(&leader) {
        return Err(ScheduleError::LeaderNotBottleneck(g.name(leader).to_owned()));
    }
    let dec = ReuniclusDecomposition::trivial(g, leader);
    let distances = compute_distances(g, &dec)
        .map_err(|e| ScheduleError::InvalidDecomposition(e.to_string()))?;
    Ok(compile_with(g, &dec, distances))
}

fn compile_with(
    g: &SwapDigraph,
    dec: &ReuniclusDecomposition,
    distances: DistanceTable,
) -> Schedule {
    let b_star = distances.b_star;
    let mut hashlock_owner = BTreeMap::new();
    let mut timeout = BTreeMap::new();
    let mut create_time = BTreeMap::new();
    for arc in g.arcs() {
        let comp = dec.component_of_arc(arc).expect("validated decomposition");
        hashlock_owner.insert(arc, dec.bottlenecks[comp]);
        timeout.insert(arc, b_star + distances.d_to_leader[arc.1]);
        create_time.insert(arc, distances.d_sub_arc[&arc]);
    }

    let mut per_party: BTreeMap<VertexId, Vec<ScheduleEntry>> = BTreeMap::new();
    for v in g.vertices() {
        let incoming: Vec<Arc> = g.in_neighbors(v).iter().map(|&u| (u, v)).collect();
        let outgoing: Vec<Arc> = g.out_neighbors(v).iter().map(|&w| (v, w)).collect();
        let mut entries = Vec::new();
        let claim_step = b_star + distances.d_to_leader[v];
        match dec.home_component(v) {
            Some(home) => {
                entries.push(ScheduleEntry { time: 0, action: TimedAction::MakeSecretPair });
                let (home_out, parent_out): (Vec<Arc>, Vec<Arc>) = outgoing
                    .iter()
                    .partition(|&&a| dec.component_of_arc(a) == Some(home));
                for &arc in &home_out {
                    entries.push(ScheduleEntry {
                        time: 0,
                        action: TimedAction::CreateContract {
                            arc,
                            lock: LockSource::Own,
                            timeout: timeout[&arc],
                        },
                    });
                }
                let checks: Vec<IncomingCheck> = incoming
                    .iter()
                    .map(|&arc| IncomingCheck {
                        arc,
                        timeout: timeout[&arc],
                        group: if dec.component_of_arc(arc) == Some(home) {
                            LockGroup::PinnedOwn
                        } else {
                            LockGroup::Uniform
                        },
                    })
                    .collect();
                if v == dec.main_leader() {
                    entries.push(ScheduleEntry {
                        time: b_star,
                        action: TimedAction::VerifyIncoming { checks },
                    });
                    entries.push(ScheduleEntry {
                        time: b_star,
                        action: TimedAction::ClaimIncoming { arcs: incoming, watch: vec![] },
                    });
                } else {
                    let create_step = distances.d_sub_vertex[v];
                    entries.push(ScheduleEntry {
                        time: create_step,
                        action: TimedAction::VerifyIncoming { checks },
                    });
                    for &arc in &parent_out {
                        entries.push(ScheduleEntry {
                            time: create_step,
                            action: TimedAction::CreateContract {
                                arc,
                                lock: LockSource::CopiedUniform,
                                timeout: timeout[&arc],
                            },
                        });
                    }
                    entries.push(ScheduleEntry {
                        time: claim_step,
                        action: TimedAction::ClaimIncoming {
                            arcs: incoming,
                            watch: parent_out,
                        },
                    });
                }
            }
            None => {
                let create_step = distances.d_sub_vertex[v];
                let checks: Vec<IncomingCheck> = incoming
                    .iter()
                    .map(|&arc| IncomingCheck {
                        arc,
                        timeout: timeout[&arc],
                        group: LockGroup::Uniform,
                    })
                    .collect();
                entries.push(ScheduleEntry {
                    time: create_step,
                    action: TimedAction::VerifyIncoming { checks },
                });
                for &arc in &outgoing {
                    entries.push(ScheduleEntry {
                        time: create_step,
                        action: TimedAction::CreateContract {
                            arc,
                            lock: LockSource::CopiedUniform,
                            timeout: timeout[&arc],
                        },
                    });
                }
                entries.push(ScheduleEntry {
                    time: claim_step,
                    action: TimedAction::ClaimIncoming { arcs: incoming, watch: outgoing },
                });
            }
        }
        entries.sort_by_key(|e| (e.time, e.action.rank()));
        per_party.insert(v, entries);
    }

    Schedule {
        per_party,
        hashlock_owner,
        timeout,
        create_time,
        leader: dec.main_leader(),
        distances,
        eager_claims: false,
    }
}

/// Forces a bottleneck-style single-hashlock schedule onto an arbitrary
/// strongly connected digraph, using brute-force longest simple paths in
/// place of the acyclic recurrences. On a bottleneck digraph this equals the
/// bottleneck protocol; on other graphs some creation steps necessarily
/// precede incoming contracts, so verification only expects the incoming
/// contracts scheduled earlier. Used to exhibit attacks on non-reuniclus
/// graphs.
pub fn compile_naive_single_hashlock(
    g: &SwapDigraph,
    leader: VertexId,
) -> Result<Schedule, ScheduleError> {
    if !g.is_strongly_connected() {
        return Err(ScheduleError::NotStronglyConnected);
    }
    let n = g.vertex_count();
    if n > 16 {
        return Err(ScheduleError::TooLarge(n));
    }
    let d_from: Vec<u32> =
        (0..n).map(|v| longest_simple_path(g, leader, v).unwrap_or(0)).collect();
    let d_to: Vec<u32> =
        (0..n).map(|v| longest_simple_path(g, v, leader).unwrap_or(0)).collect();
    let d_star = g
        .in_neighbors(leader)
        .iter()
        .map(|&z| d_from[z] + 1)
        .max()
        .expect("strongly connected graph has in-neighbors");

    let mut hashlock_owner = BTreeMap::new();
    let mut timeout = BTreeMap::new();
    let mut create_time = BTreeMap::new();
    for (u, v) in g.arcs() {
        hashlock_owner.insert((u, v), leader);
        timeout.insert((u, v), d_star + d_to[v]);
        create_time.insert((u, v), d_from[u]);
    }

    let mut per_party = BTreeMap::new();
    for v in g.vertices() {
        let incoming: Vec<Arc> = g.in_neighbors(v).iter().map(|&u| (u, v)).collect();
        let outgoing: Vec<Arc> = g.out_neighbors(v).iter().map(|&w| (v, w)).collect();
        let mut entries = Vec::new();
        if v == leader {
            entries.push(ScheduleEntry { time: 0, action: TimedAction::MakeSecretPair });
            for &arc in &outgoing {
                entries.push(ScheduleEntry {
                    time: 0,
                    action: TimedAction::CreateContract {
                        arc,
                        lock: LockSource::Own,
                        timeout: timeout[&arc],
                    },
                });
            }
            let checks = incoming
                .iter()
                .map(|&arc| IncomingCheck {
                    arc,
                    timeout: timeout[&arc],
                    group: LockGroup::PinnedOwn,
                })
                .collect();
            entries.push(ScheduleEntry {
                time: d_star,
                action: TimedAction::VerifyIncoming { checks },
            });
            entries.push(ScheduleEntry {
                time: d_star,
                action: TimedAction::ClaimIncoming { arcs: incoming, watch: vec![] },
            });
        } else {
            let create_step = d_from[v];
            let mut expected: Vec<Arc> = incoming
                .iter()
                .copied()
                .filter(|a| create_time[a] < create_step)
                .collect();
            if expected.is_empty() {
                expected = incoming.clone();
            }
            let checks = expected
                .iter()
                .map(|&arc| IncomingCheck {
                    arc,
                    timeout: timeout[&arc],
                    group: LockGroup::Uniform,
                })
                .collect();
            entries.push(ScheduleEntry {
                time: create_step,
                action: TimedAction::VerifyIncoming { checks },
            });
            for &arc in &outgoing {
                entries.push(ScheduleEntry {
                    time: create_step,
                    action: TimedAction::CreateContract {
                        arc,
                        lock: LockSource::CopiedUniform,
                        timeout: timeout[&arc],
                    },
                });
            }
            entries.push(ScheduleEntry {
                time: d_star + d_to[v],
                action: TimedAction::ClaimIncoming { arcs: incoming, watch: outgoing },
            });
        }
        entries.sort_by_key(|e| (e.time, e.action.rank()));
        per_party.insert(v, entries);
    }

    let distances = DistanceTable {
        d_from_leader: (0..n).map(|v| (v, d_from[v])).collect(),
        d_to_leader: d_to,
        d_star,
        d_sub_arc: create_time.clone(),
        d_sub_vertex: d_from.clone(),
        b_star: d_star,
    };
    Ok(Schedule {
        per_party,
        hashlock_owner,
        timeout,
        create_time,
        leader,
        distances,
        eager_claims: false,
    })
}

fn longest_simple_path(g: &SwapDigraph, from: VertexId, to: VertexId) -> Option<u32> {
    fn dfs(
        g: &SwapDigraph,
        v: VertexId,
        to: VertexId,
        visited: &mut Vec<bool>,
        len: u32,
        best: &mut Option<u32>,
    ) {
        if v == to && len > 0 {
            *best = Some(best.map_or(len, |b: u32| b.max(len)));
            return;
        }
        for &w in g.out_neighbors(v) {
            if !visited[w] {
                visited[w] = true;
                dfs(g, w, to, visited, len + 1, best);
                visited[w] = false;
            }
        }
    }
    let mut visited = vec![false; g.vertex_count()];
    visited[from] = true;
    let mut best = None;
    dfs(g, from, to, &mut visited, 0, &mut best);
    best
}

/// One violated schedule property.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub rule: &'static str,
    pub detail: String,
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "[{}] {}", self.rule, self.detail)
    }
}

/// Statically checks a schedule against the orderings any safe HTLC schedule
/// must satisfy: along paths of contracts not protected by their sellers,
/// creation times strictly increase and timeouts strictly decrease; every
/// cycle contains a seller-protected contract; per party at most one foreign
/// protector exists, foreign-protected outgoing timeouts undercut all
/// incoming timeouts, and some self-protected incoming timeout undercuts all
/// self-protected outgoing timeouts. With a decomposition, additionally: a
/// leader's parent-component creation step exceeds every creation step in
/// its descendant components.
pub fn validate_schedule_invariants(
    g: &SwapDigraph,
    dec: Option<&ReuniclusDecomposition>,
    s: &Schedule,
) -> Vec<Violation> {
    let mut out = Vec::new();
    fn push(out: &mut Vec<Violation>, rule: &'static str, detail: String) {
        out.push(Violation { rule, detail });
    }

    for arc in g.arcs() {
        match (s.hashlock_owner.get(&arc), s.timeout.get(&arc), s.create_time.get(&arc)) {
            (Some(_), Some(&t), Some(&c)) => {
                if c >= t {
                    push(&mut out,
                        "create-before-timeout",
                        format!("{}: created at {c}, timeout {t}", g.arc_label(arc)),
                    );
                }
            }
            _ => push(
                &mut out,
                "coverage",
                format!("{} missing from schedule maps", g.arc_label(arc)),
            ),
        }
    }
    if out.iter().any(|v| v.rule == "coverage") {
        return out;
    }

    // Pairwise path orderings: for consecutive arcs whose second contract is
    // not seller-protected, creation strictly increases, timeout strictly
    // decreases.
    for (u, v) in g.arcs() {
        for &w in g.out_neighbors(v) {
            let e1 = (u, v);
            let e2 = (v, w);
            if s.hashlock_owner[&e2] == v {
                continue;
            }
            if s.create_time[&e1] >= s.create_time[&e2] {
                push(&mut out,
                    "path-creation-order",
                    format!(
                        "{} created at {} not before {} created at {}",
                        g.arc_label(e1),
                        s.create_time[&e1],
                        g.arc_label(e2),
                        s.create_time[&e2]
                    ),
                );
            }
            if s.timeout[&e1] <= s.timeout[&e2] {
                push(&mut out,
                    "path-timeout-order",
                    format!(
                        "timeout {} of {} not above timeout {} of {}",
                        s.timeout[&e1],
                        g.arc_label(e1),
                        s.timeout[&e2],
                        g.arc_label(e2)
                    ),
                );
            }
        }
    }

    // Every cycle must contain a seller-protected contract, i.e. the
    // subgraph of non-seller-protected arcs is acyclic.
    {
        let n = g.vertex_count();
        let mut indeg = vec![0usize; n];
        let foreign: Vec<Arc> =
            g.arcs().filter(|a| s.hashlock_owner[a] != a.0).collect();
        for &(_, v) in &foreign {
            indeg[v] += 1;
        }
        let mut queue: Vec<VertexId> = (0..n).filter(|&v| indeg[v] == 0).collect();
        let mut removed = vec![false; n];
        while let Some(v) = queue.pop() {
            removed[v] = true;
            for &(x, y) in &foreign {
                if x == v {
                    indeg[y] -= 1;
                    if indeg[y] == 0 {
                        queue.push(y);
                    }
                }
            }
        }
        if !removed.iter().all(|&r| r) {
            push(&mut out,
                "cycle-seller-protection",
                "a cycle has no contract protected by its seller".into(),
            );
        }
    }

    // Local per-party protection and timeout structure.
    for v in g.vertices() {
        let incoming: Vec<Arc> = g.in_neighbors(v).iter().map(|&u| (u, v)).collect();
        let outgoing: Vec<Arc> = g.out_neighbors(v).iter().map(|&w| (v, w)).collect();
        let protectors: std::collections::BTreeSet<VertexId> = incoming
            .iter()
            .chain(outgoing.iter())
            .map(|a| s.hashlock_owner[a])
            .filter(|&x| x != v)
            .collect();
        if protectors.len() > 1 {
            push(&mut out,
                "single-foreign-protector",
                format!(
                    "{} has contracts protected by {} parties other than itself",
                    g.name(v),
                    protectors.len()
                ),
            );
        }
        let min_in = incoming.iter().map(|a| s.timeout[a]).min();
        for x in protectors {
            for &a in outgoing.iter().filter(|a| s.hashlock_owner[a] == x) {
                if let Some(min_in) = min_in {
                    if s.timeout[&a] >= min_in {
                        push(&mut out,
                            "foreign-outgoing-before-incoming",
                            format!(
                                "{}: timeout {} of {} not below minimum incoming timeout {}",
                                g.name(v),
                                s.timeout[&a],
                                g.arc_label(a),
                                min_in
                            ),
                        );
                    }
                }
            }
        }
        let self_out_min = outgoing
            .iter()
            .filter(|a| s.hashlock_owner[a] == v)
            .map(|a| s.timeout[a])
            .min();
        if let Some(self_out_min) = self_out_min {
            let has_earlier_self_in = incoming
                .iter()
                .filter(|a| s.hashlock_owner[a] == v)
                .any(|a| s.timeout[a] < self_out_min);
            if !has_earlier_self_in {
                push(&mut out,
                    "self-incoming-before-outgoing",
                    format!(
                        "{}: no self-protected incoming timeout below all self-protected \
                         outgoing timeouts",
                        g.name(v)
                    ),
                );
            }
        }
    }

    // Leaders create parent-component contracts strictly after everything in
    // their descendant components.
    if let Some(dec) = dec {
        for (j, &b) in dec.bottlenecks.iter().enumerate() {
            if dec.parent[j].is_none() {
                continue;
            }
            let mut descendants = vec![j];
            let mut frontier = vec![j];
            while let Some(i) = frontier.pop() {
                for (k, &p) in dec.parent.iter().enumerate() {
                    if p == Some(i) {
                        descendants.push(k);
                        frontier.push(k);
                    }
                }
            }
            let create_step = s.distances.d_sub_vertex[b];
            for arc in g.arcs() {
                if descendants.contains(&dec.component_of_arc(arc).unwrap())
                    && s.create_time[&arc] >= create_step
                {
                    push(&mut out,
                        "descendant-creation-order",
                        format!(
                            "{} created at {} not before leader {} creates at {}",
                            g.arc_label(arc),
                            s.create_time[&arc],
                            g.name(b),
                            create_step
                        ),
                    );
                }
            }
        }
    }

    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decompose::reuniclus_decompose;

    fn graph(arcs: &[(&str, &str)]) -> SwapDigraph {
        SwapDigraph::from_named_arcs(arcs).unwrap()
    }

    fn three_cycle() -> SwapDigraph {
        graph(&[("l", "a"), ("a", "b"), ("b", "l")])
    }

    fn digon_chain() -> SwapDigraph {
        graph(&[("a", "b"), ("b", "a"), ("b", "c"), ("c", "b")])
    }

    fn timeouts(g: &SwapDigraph, s: &Schedule) -> BTreeMap<String, u32> {
        s.timeout.iter().map(|(&a, &t)| (g.arc_label(a), t)).collect()
    }

    fn create_times(g: &SwapDigraph, s: &Schedule) -> BTreeMap<String, u32> {
        s.create_time.iter().map(|(&a, &t)| (g.arc_label(a), t)).collect()
    }

    #[test]
    fn bdp_three_cycle_tables() {
        let g = three_cycle();
        let s = compile_bdp(&g, g.vertex("l").unwrap()).unwrap();
        assert_eq!(s.distances.d_star, 3);
        assert_eq!(
            timeouts(&g, &s),
            BTreeMap::from([("l->a".into(), 5), ("a->b".into(), 4), ("b->l".into(), 3)])
        );
        assert_eq!(
            create_times(&g, &s),
            BTreeMap::from([("l->a".into(), 0), ("a->b".into(), 1), ("b->l".into(), 2)])
        );
        assert_eq!(s.claim_step(g.vertex("l").unwrap()), Some(3));
        assert_eq!(s.claim_step(g.vertex("b").unwrap()), Some(4));
        assert_eq!(s.claim_step(g.vertex("a").unwrap()), Some(5));
        let l = g.vertex("l").unwrap();
        assert!(s.hashlock_owner.values().all(|&o| o == l));
    }

    #[test]
    fn bdp_digon_tables() {
        let g = graph(&[("l", "v"), ("v", "l")]);
        let s = compile_bdp(&g, g.vertex("l").unwrap()).unwrap();
        assert_eq!(s.distances.d_star, 2);
        assert_eq!(
            timeouts(&g, &s),
            BTreeMap::from([("l->v".into(), 3), ("v->l".into(), 2)])
        );
        assert_eq!(s.claim_step(g.vertex("l").unwrap()), Some(2));
        assert_eq!(s.claim_step(g.vertex("v").unwrap()), Some(3));
    }

    #[test]
    fn bdp_rejects_non_bottleneck_leader() {
        let g = graph(&[("a", "b"), ("b", "m"), ("m", "a"), ("m", "c"), ("c", "d"), ("d", "m")]);
        // a is on the left triangle only; m is the sole shared bottleneck.
        let a = g.vertex("a").unwrap();
        assert!(matches!(compile_bdp(&g, a), Err(ScheduleError::LeaderNotBottleneck(_))));
        assert!(compile_bdp(&g, g.vertex("m").unwrap()).is_ok());
    }

    #[test]
    fn rdp_digon_chain_tables() {
        let g = digon_chain();
        let dec = reuniclus_decompose(&g).unwrap();
        let s = compile_rdp(&g, &dec).unwrap();
        assert_eq!(s.distances.b_star, 3);
        let (a, b, c) = (g.vertex("a").unwrap(), g.vertex("b").unwrap(), g.vertex("c").unwrap());
        let owners: BTreeMap<String, VertexId> =
            s.hashlock_owner.iter().map(|(&x, &o)| (g.arc_label(x), o)).collect();
        assert_eq!(
            owners,
            BTreeMap::from([
                ("a->b".into(), a),
                ("b->a".into(), a),
                ("b->c".into(), b),
                ("c->b".into(), b),
            ])
        );
        assert_eq!(
            create_times(&g, &s),
            BTreeMap::from([
                ("a->b".into(), 0),
                ("b->c".into(), 0),
                ("c->b".into(), 1),
                ("b->a".into(), 2),
            ])
        );
        assert_eq!(
            timeouts(&g, &s),
            BTreeMap::from([
                ("b->a".into(), 3),
                ("a->b".into(), 4),
                ("c->b".into(), 4),
                ("b->c".into(), 5),
            ])
        );
        assert_eq!(s.claim_step(a), Some(3));
        assert_eq!(s.claim_step(b), Some(4));
        assert_eq!(s.claim_step(c), Some(5));
    }

    #[test]
    fn rdp_on_single_component_equals_bdp() {
        let g = three_cycle();
        let dec = reuniclus_decompose(&g).unwrap();
        assert_eq!(dec.component_count(), 1);
        let rdp = compile_rdp(&g, &dec).unwrap();
        let bdp = compile_bdp(&g, dec.main_leader()).unwrap();
        assert_eq!(rdp, bdp);
    }

    #[test]
    fn incoming_timeout_equals_claim_step() {
        for g in [three_cycle(), digon_chain()] {
            let dec = reuniclus_decompose(&g).unwrap();
            let s = compile_rdp(&g, &dec).unwrap();
            for (u, v) in g.arcs() {
                assert_eq!(Some(s.timeout[&(u, v)]), s.claim_step(v));
                assert!(s.create_time[&(u, v)] < s.timeout[&(u, v)]);
            }
        }
    }

    #[test]
    fn hashlock_owner_is_component_bottleneck() {
        let g = graph(&[
            ("a", "b"), ("b", "a"), ("b", "c"), ("c", "b"), ("c", "d"), ("d", "c"),
        ]);
        let dec = reuniclus_decompose(&g).unwrap();
        let s = compile_rdp(&g, &dec).unwrap();
        for arc in g.arcs() {
            let comp = dec.component_of_arc(arc).unwrap();
            assert_eq!(s.hashlock_owner[&arc], dec.bottlenecks[comp]);
        }
    }

    #[test]
    fn compiled_schedules_have_no_violations() {
        for g in [three_cycle(), digon_chain(), graph(&[("l", "v"), ("v", "l")])] {
            let dec = reuniclus_decompose(&g).unwrap();
            let s = compile_rdp(&g, &dec).unwrap();
            let report = validate_schedule_invariants(&g, Some(&dec), &s);
            assert!(report.is_empty(), "{report:?}");
        }
    }

    #[test]
    fn corrupted_timeout_is_flagged() {
        let g = digon_chain();
        let dec = reuniclus_decompose(&g).unwrap();
        let mut s = compile_rdp(&g, &dec).unwrap();
        let ba = g.arc_from_label("b->a").unwrap();
        s.timeout.insert(ba, 5);
        let report = validate_schedule_invariants(&g, Some(&dec), &s);
        assert!(
            report.iter().any(|v| v.rule == "foreign-outgoing-before-incoming"),
            "{report:?}"
        );
    }

    #[test]
    fn naive_schedule_on_non_reuniclus_fixture() {
        let g = graph(&[("a", "b"), ("b", "c"), ("c", "d"), ("d", "a"), ("b", "a"), ("d", "c")]);
        let s = compile_naive_single_hashlock(&g, g.vertex("a").unwrap()).unwrap();
        assert_eq!(s.distances.d_star, 4);
        assert_eq!(
            create_times(&g, &s),
            BTreeMap::from([
                ("a->b".into(), 0),
                ("b->a".into(), 1),
                ("b->c".into(), 1),
                ("c->d".into(), 2),
                ("d->a".into(), 3),
                ("d->c".into(), 3),
            ])
        );
        assert_eq!(
            timeouts(&g, &s),
            BTreeMap::from([
                ("a->b".into(), 7),
                ("b->a".into(), 4),
                ("b->c".into(), 6),
                ("c->d".into(), 5),
                ("d->a".into(), 4),
                ("d->c".into(), 6),
            ])
        );
        // The cycle c<->d has no seller-protected contract; the validator
        // must flag the schedule even though each arc looks locally fine.
        let report = validate_schedule_invariants(&g, None, &s);
        assert!(report.iter().any(|v| v.rule == "cycle-seller-protection"), "{report:?}");
        assert!(report.iter().any(|v| v.rule == "path-timeout-order"));
    }

    #[test]
    fn naive_equals_bdp_on_bottleneck_graph() {
        let g = three_cycle();
        let l = g.vertex("l").unwrap();
        let naive = compile_naive_single_hashlock(&g, l).unwrap();
        let bdp = compile_bdp(&g, l).unwrap();
        assert_eq!(naive.timeout, bdp.timeout);
        assert_eq!(naive.create_time, bdp.create_time);
        assert_eq!(naive.per_party, bdp.per_party);
    }

    #[test]
    fn json_rows_are_ordered() {
        let g = digon_chain();
        let dec = reuniclus_decompose(&g).unwrap();
        let s = compile_rdp(&g, &dec).unwrap();
        let rows = s.to_json_rows(&g);
        let rows = rows.as_array().unwrap();
        let keys: Vec<(u32, String)> = rows
            .iter()
            .map(|r| {
                (
                    r["time"].as_u64().unwrap() as u32,
                    r["party"].as_str().unwrap().to_owned(),
                )
            })
            .collect();
        let mut sorted = keys.clone();
        sorted.sort();
        assert_eq!(keys, sorted);
    }
}
