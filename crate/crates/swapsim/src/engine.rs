//! Deterministic discrete-time execution of parties acting on HTLCs.
//!
//! Time is a sequence of unit steps. Within step `t` the phases run in
//! order: behaviors are polled once against the state as of the start of
//! the step, then (1) secret-pair creations and secret shares, (2) contract
//! creations, (3) claims, (4) expiry of contracts whose timeout has passed.
//! A claim at step `t` succeeds iff the contract is escrowed, `t` does not
//! exceed its timeout, and the claimer acquired a matching preimage at some
//! step strictly before `t`; the successful claim hands the preimage to the
//! seller, usable from `t + 1`. A contract with timeout `tau` is claimable
//! through step `tau` and returns to its seller at `tau + 1`.
//!
//! Secrets are symbolic tokens with knowledge-set accounting: a secret
//! enters a party's knowledge only by owning it, by a claim on a contract
//! the party sold, or by an explicit share. Nothing ever inverts a hashlock.

use crate::graph::{Arc, SwapDigraph, VertexId};
use sha2::{Digest, Sha256};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

/// Opaque symbolic secret token.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct Secret(u64);

/// A hashlock value. Fresh locks minted outside any pair have no preimage.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct Hashlock(u64);

const FRESH_BIT: u64 = 1 << 63;

/// The one-way function: deterministic and injective over a run's tokens.
pub fn hash(s: Secret) -> Hashlock {
    Hashlock(s.0)
}

/// The secret a party's pair would contain. Knowing the token name grants
/// nothing: claims check the claimer's knowledge set.
pub fn pair_secret(party: VertexId) -> Secret {
    Secret(party as u64)
}

/// A hashlock with no preimage anywhere in the run.
pub fn fresh_lock(party: VertexId, tag: u32) -> Hashlock {
    Hashlock(FRESH_BIT | (party as u64) << 32 | tag as u64)
}

impl Hashlock {
    pub fn label(&self, g: &SwapDigraph) -> String {
        if self.0 & FRESH_BIT != 0 {
            format!("fresh#{:x}", self.0 & !FRESH_BIT)
        } else {
            format!("h({})", g.name(self.0 as usize))
        }
    }
}

impl Secret {
    pub fn label(&self, g: &SwapDigraph) -> String {
        format!("s({})", g.name(self.0 as usize))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ContractState {
    Escrowed { since: u32 },
    Claimed { at: u32, preimage: Secret },
    Expired { at: u32 },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Contract {
    pub arc: Arc,
    pub lock: Hashlock,
    pub timeout: u32,
    pub state: ContractState,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Holder {
    Seller,
    Escrow,
    Buyer,
}

#[derive(Debug, Clone)]
pub struct WorldState {
    pub clock: u32,
    pub contracts: BTreeMap<Arc, Contract>,
    created_ever: BTreeSet<Arc>,
    pub pairs: Vec<Option<(Secret, Hashlock)>>,
    /// Per party: secret -> step at which it was acquired.
    pub knowledge: Vec<BTreeMap<Secret, u32>>,
}

impl WorldState {
    fn new(n: usize) -> Self {
        WorldState {
            clock: 0,
            contracts: BTreeMap::new(),
            created_ever: BTreeSet::new(),
            pairs: vec![None; n],
            knowledge: vec![BTreeMap::new(); n],
        }
    }

    /// Current holder of the asset on `arc`.
    pub fn holder(&self, arc: Arc) -> Holder {
        match self.contracts.get(&arc).map(|c| &c.state) {
            None | Some(ContractState::Expired { .. }) => Holder::Seller,
            Some(ContractState::Escrowed { .. }) => Holder::Escrow,
            Some(ContractState::Claimed { .. }) => Holder::Buyer,
        }
    }

    pub fn transferred(&self, arc: Arc) -> bool {
        matches!(self.holder(arc), Holder::Buyer)
    }

    pub fn all_resolved(&self) -> bool {
        !self
            .contracts
            .values()
            .any(|c| matches!(c.state, ContractState::Escrowed { .. }))
    }
}

/// What a party may observe: its own pair and knowledge, and the contracts
/// it sells or buys.
pub struct View<'a> {
    world: &'a WorldState,
    party: VertexId,
}

impl View<'_> {
    pub fn step(&self) -> u32 {
        self.world.clock
    }

    pub fn party(&self) -> VertexId {
        self.party
    }

    pub fn contract(&self, arc: Arc) -> Option<&Contract> {
        if arc.0 != self.party && arc.1 != self.party {
            return None;
        }
        self.world.contracts.get(&arc)
    }

    pub fn own_pair(&self) -> Option<(Secret, Hashlock)> {
        self.world.pairs[self.party]
    }

    /// True iff the party holds, from a step strictly before the current
    /// one, a preimage of `lock`.
    pub fn can_open(&self, lock: Hashlock) -> bool {
        self.world.knowledge[self.party]
            .iter()
            .any(|(&s, &at)| at < self.world.clock && hash(s) == lock)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LockPick {
    /// The creator's own pair lock.
    Own,
    /// Another party's pair lock; hashlock values are publishable.
    PairOf(VertexId),
    /// A lock without preimage.
    Fresh(u32),
    /// An explicit value, e.g. copied from an observed contract.
    Value(Hashlock),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SecretPick {
    /// Any known matching preimage.
    Auto,
    /// The claimer's own pair secret.
    Own,
    /// A named pair secret; rejected unless it is in the claimer's knowledge.
    PairSecretOf(VertexId),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PartyAction {
    MakePair,
    Share { to: VertexId },
    Create { arc: Arc, lock: LockPick, timeout: u32 },
    Claim { arc: Arc, secret: SecretPick },
    Abort { reason: String },
}

/// A party strategy: polled once per step against the start-of-step state.
pub trait Behavior {
    fn actions(&mut self, step: u32, view: &View<'_>) -> Vec<PartyAction>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Phase {
    Secrets,
    Creations,
    Claims,
    Expiry,
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Phase::Secrets => "secrets",
            Phase::Creations => "creations",
            Phase::Claims => "claims",
            Phase::Expiry => "expiry",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EventKind {
    PairCreated { lock: Hashlock },
    SecretsShared { to: VertexId, count: usize },
    ContractCreated { arc: Arc, lock: Hashlock, timeout: u32 },
    CreateRejected { arc: Arc, reason: String },
    AssetClaimed { arc: Arc },
    ClaimRejected { arc: Arc, reason: String },
    ContractExpired { arc: Arc },
    Aborted { reason: String },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Event {
    pub step: u32,
    pub phase: Phase,
    pub party: Option<VertexId>,
    pub kind: EventKind,
}

#[derive(Debug, Clone)]
pub struct Trace {
    pub events: Vec<Event>,
    pub final_state: WorldState,
}

impl Trace {
    /// JSON lines export, one event per line, stable field order.
    pub fn to_jsonl(&self, g: &SwapDigraph) -> String {
        let mut out = String::new();
        for e in &self.events {
            let party = e.party.map(|p| g.name(p).to_owned());
            let (event, arc, detail) = match &e.kind {
                EventKind::PairCreated { lock } => {
                    ("pair_created", None, lock.label(g))
                }
                EventKind::SecretsShared { to, count } => (
                    "secrets_shared",
                    None,
                    format!("to={} count={}", g.name(*to), count),
                ),
                EventKind::ContractCreated { arc, lock, timeout } => (
                    "contract_created",
                    Some(*arc),
                    format!("lock={} timeout={}", lock.label(g), timeout),
                ),
                EventKind::CreateRejected { arc, reason } => {
                    ("create_rejected", Some(*arc), reason.clone())
                }
                EventKind::AssetClaimed { arc } => ("asset_claimed", Some(*arc), String::new()),
                EventKind::ClaimRejected { arc, reason } => {
                    ("claim_rejected", Some(*arc), reason.clone())
                }
                EventKind::ContractExpired { arc } => {
                    ("contract_expired", Some(*arc), String::new())
                }
                EventKind::Aborted { reason } => ("aborted", None, reason.clone()),
            };
            let line = serde_json::json!({
                "step": e.step,
                "phase": e.phase.to_string(),
                "party": party,
                "event": event,
                "arc": arc.map(|a| g.arc_label(a)),
                "detail": detail,
            });
            out.push_str(&line.to_string());
            out.push('\n');
        }
        out
    }

    /// SHA-256 over the JSON lines export.
    pub fn hash_hex(&self, g: &SwapDigraph) -> String {
        let mut hasher = Sha256::new();
        hasher.update(self.to_jsonl(g).as_bytes());
        let digest = hasher.finalize();
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn creation_steps(&self) -> Vec<u32> {
        self.events
            .iter()
            .filter(|e| matches!(e.kind, EventKind::ContractCreated { .. }))
            .map(|e| e.step)
            .collect()
    }

    pub fn claim_steps(&self) -> Vec<u32> {
        self.events
            .iter()
            .filter(|e| matches!(e.kind, EventKind::AssetClaimed { .. }))
            .map(|e| e.step)
            .collect()
    }
}

/// Runs all parties for steps `0..=horizon` and resolves every contract.
///
/// Behaviors must be indexed by vertex id. Illegal attempted actions are
/// recorded as rejected events, never failures.
pub fn run(g: &SwapDigraph, behaviors: &mut [Box<dyn Behavior>], horizon: u32) -> Trace {
    assert_eq!(behaviors.len(), g.vertex_count(), "one behavior per party");
    let n = g.vertex_count();
    let mut world = WorldState::new(n);
    let mut events: Vec<Event> = Vec::new();

    for step in 0..=horizon {
        world.clock = step;
        let mut planned: Vec<(VertexId, Vec<PartyAction>)> = Vec::with_capacity(n);
        for p in 0..n {
            let view = View { world: &world, party: p };
            planned.push((p, behaviors[p].actions(step, &view)));
        }

        // Phase 1: pairs and shares.
        for (p, actions) in &planned {
            let p = *p;
            for action in actions {
                match action {
                    PartyAction::MakePair => {
                        if world.pairs[p].is_some() {
                            events.push(Event {
                                step,
                                phase: Phase::Secrets,
                                party: Some(p),
                                kind: EventKind::Aborted {
                                    reason: "pair already created".into(),
                                },
                            });
                            continue;
                        }
                        let s = pair_secret(p);
                        let h = hash(s);
                        world.pairs[p] = Some((s, h));
                        world.knowledge[p].entry(s).or_insert(step);
                        events.push(Event {
                            step,
                            phase: Phase::Secrets,
                            party: Some(p),
                            kind: EventKind::PairCreated { lock: h },
                        });
                    }
                    PartyAction::Share { to } => {
                        let to = *to;
                        if to == p || to >= n {
                            continue;
                        }
                        let known: Vec<Secret> =
                            world.knowledge[p].keys().copied().collect();
                        let mut delivered = 0;
                        for s in known {
                            if let std::collections::btree_map::Entry::Vacant(e) =
                                world.knowledge[to].entry(s)
                            {
                                e.insert(step);
                                delivered += 1;
                            }
                        }
                        events.push(Event {
                            step,
                            phase: Phase::Secrets,
                            party: Some(p),
                            kind: EventKind::SecretsShared { to, count: delivered },
                        });
                    }
                    PartyAction::Abort { reason } => {
                        events.push(Event {
                            step,
                            phase: Phase::Secrets,
                            party: Some(p),
                            kind: EventKind::Aborted { reason: reason.clone() },
                        });
                    }
                    _ => {}
                }
            }
        }

        // Phase 2: contract creations.
        for (p, actions) in &planned {
            let p = *p;
            for action in actions {
                let PartyAction::Create { arc, lock, timeout } = action else { continue };
                let arc = *arc;
                let reject = |reason: &str| Event {
                    step,
                    phase: Phase::Creations,
                    party: Some(p),
                    kind: EventKind::CreateRejected { arc, reason: reason.to_owned() },
                };
                if !g.has_arc(arc) {
                    events.push(reject("no such arc"));
                    continue;
                }
                if arc.0 != p {
                    events.push(reject("only the seller creates a contract"));
                    continue;
                }
                if world.created_ever.contains(&arc) {
                    events.push(reject("contract already created once"));
                    continue;
                }
                let lock_value = match lock {
                    LockPick::Own => world.pairs[p].map(|(_, h)| h),
                    LockPick::PairOf(x) => world.pairs.get(*x).copied().flatten().map(|(_, h)| h),
                    LockPick::Fresh(tag) => Some(fresh_lock(p, *tag)),
                    LockPick::Value(h) => Some(*h),
                };
                let Some(lock_value) = lock_value else {
                    events.push(reject("hashlock unavailable"));
                    continue;
                };
                world.created_ever.insert(arc);
                world.contracts.insert(
                    arc,
                    Contract {
                        arc,
                        lock: lock_value,
                        timeout: *timeout,
                        state: ContractState::Escrowed { since: step },
                    },
                );
                events.push(Event {
                    step,
                    phase: Phase::Creations,
                    party: Some(p),
                    kind: EventKind::ContractCreated { arc, lock: lock_value, timeout: *timeout },
                });
            }
        }

        // Phase 3: claims.
        for (p, actions) in &planned {
            let p = *p;
            for action in actions {
                let PartyAction::Claim { arc, secret } = action else { continue };
                let arc = *arc;
                let reject = |reason: &str| Event {
                    step,
                    phase: Phase::Claims,
                    party: Some(p),
                    kind: EventKind::ClaimRejected { arc, reason: reason.to_owned() },
                };
                if arc.1 != p {
                    events.push(reject("only the buyer claims an asset"));
                    continue;
                }
                let Some(contract) = world.contracts.get(&arc) else {
                    events.push(reject("contract does not exist"));
                    continue;
                };
                if !matches!(contract.state, ContractState::Escrowed { .. }) {
                    events.push(reject("contract is not escrowed"));
                    continue;
                }
                if step > contract.timeout {
                    events.push(reject("past the timeout"));
                    continue;
                }
                let lock = contract.lock;
                let usable = |s: &Secret| {
                    world.knowledge[p].get(s).copied().is_some_and(|at| at < step)
                };
                let preimage = match secret {
                    SecretPick::Auto => world.knowledge[p]
                        .iter()
                        .filter(|(s, &at)| at < step && hash(**s) == lock)
                        .map(|(&s, _)| s)
                        .next(),
                    SecretPick::Own => match world.pairs[p] {
                        Some((s, _)) if usable(&s) && hash(s) == lock => Some(s),
                        _ => None,
                    },
                    SecretPick::PairSecretOf(x) => {
                        let s = pair_secret(*x);
                        if usable(&s) && hash(s) == lock {
                            Some(s)
                        } else {
                            None
                        }
                    }
                };
                let Some(preimage) = preimage else {
                    events.push(reject("no usable preimage for the hashlock"));
                    continue;
                };
                let seller = arc.0;
                world.contracts.get_mut(&arc).expect("checked").state =
                    ContractState::Claimed { at: step, preimage };
                world.knowledge[seller].entry(preimage).or_insert(step);
                events.push(Event {
                    step,
                    phase: Phase::Claims,
                    party: Some(p),
                    kind: EventKind::AssetClaimed { arc },
                });
            }
        }

        // Phase 4: expiry of contracts whose timeout has passed.
        let expiring: Vec<Arc> = world
            .contracts
            .values()
            .filter(|c| {
                matches!(c.state, ContractState::Escrowed { .. }) && c.timeout <= step
            })
            .map(|c| c.arc)
            .collect();
        for arc in expiring {
            let timeout = world.contracts[&arc].timeout;
            world.contracts.get_mut(&arc).expect("checked").state =
                ContractState::Expired { at: timeout + 1 };
            events.push(Event {
                step,
                phase: Phase::Expiry,
                party: None,
                kind: EventKind::ContractExpired { arc },
            });
        }
    }

    // World end: whatever is still escrowed returns to its seller.
    let leftovers: Vec<Arc> = world
        .contracts
        .values()
        .filter(|c| matches!(c.state, ContractState::Escrowed { .. }))
        .map(|c| c.arc)
        .collect();
    for arc in leftovers {
        world.contracts.get_mut(&arc).expect("checked").state =
            ContractState::Expired { at: horizon + 1 };
        events.push(Event {
            step: horizon,
            phase: Phase::Expiry,
            party: None,
            kind: EventKind::ContractExpired { arc },
        });
    }

    Trace { events, final_state: world }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn graph(arcs: &[(&str, &str)]) -> SwapDigraph {
        SwapDigraph::from_named_arcs(arcs).unwrap()
    }

    /// Minimal scripted behavior for engine-level tests.
    struct Script(BTreeMap<u32, Vec<PartyAction>>);

    impl Behavior for Script {
        fn actions(&mut self, step: u32, _view: &View<'_>) -> Vec<PartyAction> {
            self.0.get(&step).cloned().unwrap_or_default()
        }
    }

    fn boxed(scripts: Vec<BTreeMap<u32, Vec<PartyAction>>>) -> Vec<Box<dyn Behavior>> {
        scripts.into_iter().map(|s| Box::new(Script(s)) as Box<dyn Behavior>).collect()
    }

    #[test]
    fn hash_is_deterministic_and_injective() {
        assert_eq!(hash(pair_secret(3)), hash(pair_secret(3)));
        assert_ne!(hash(pair_secret(1)), hash(pair_secret(2)));
        assert_ne!(fresh_lock(0, 0), hash(pair_secret(0)));
    }

    #[test]
    fn claim_with_revealed_secret() {
        // a escrows for b with a's lock; a shares its secret at step 1; b
        // claims at step 2 (knowledge has one-step latency).
        let g = graph(&[("a", "b"), ("b", "a")]);
        let ab = (0, 1);
        let mut behaviors = boxed(vec![
            BTreeMap::from([
                (0, vec![
                    PartyAction::MakePair,
                    PartyAction::Create { arc: ab, lock: LockPick::Own, timeout: 4 },
                ]),
                (1, vec![PartyAction::Share { to: 1 }]),
            ]),
            BTreeMap::from([
                (1, vec![PartyAction::Claim { arc: ab, secret: SecretPick::Auto }]),
                (2, vec![PartyAction::Claim { arc: ab, secret: SecretPick::Auto }]),
            ]),
        ]);
        let trace = run(&g, &mut behaviors, 5);
        // The step-1 claim is too early: the share lands the same step.
        assert!(trace.events.iter().any(|e| matches!(
            &e.kind,
            EventKind::ClaimRejected { arc, .. } if *arc == ab
        ) && e.step == 1));
        assert!(trace.final_state.transferred(ab));
        match trace.final_state.contracts[&ab].state {
            ContractState::Claimed { at, preimage } => {
                assert_eq!(at, 2);
                assert_eq!(preimage, pair_secret(0));
            }
            other => panic!("unexpected state {other:?}"),
        }
    }

    #[test]
    fn claim_after_timeout_is_rejected() {
        let g = graph(&[("a", "b"), ("b", "a")]);
        let ab = (0, 1);
        let mut behaviors = boxed(vec![
            BTreeMap::from([
                (0, vec![
                    PartyAction::MakePair,
                    PartyAction::Create { arc: ab, lock: LockPick::Own, timeout: 2 },
                    PartyAction::Share { to: 1 },
                ]),
            ]),
            BTreeMap::from([
                (3, vec![PartyAction::Claim { arc: ab, secret: SecretPick::Auto }]),
            ]),
        ]);
        let trace = run(&g, &mut behaviors, 5);
        assert!(trace.events.iter().any(|e| matches!(
            &e.kind,
            EventKind::ClaimRejected { arc, reason } if *arc == ab && reason.contains("not escrowed")
        )));
        assert_eq!(
            trace.final_state.contracts[&ab].state,
            ContractState::Expired { at: 3 }
        );
        assert_eq!(trace.final_state.holder(ab), Holder::Seller);
    }

    #[test]
    fn claim_exactly_at_timeout_succeeds() {
        let g = graph(&[("a", "b"), ("b", "a")]);
        let ab = (0, 1);
        let mut behaviors = boxed(vec![
            BTreeMap::from([(0, vec![
                PartyAction::MakePair,
                PartyAction::Create { arc: ab, lock: LockPick::Own, timeout: 2 },
                PartyAction::Share { to: 1 },
            ])]),
            BTreeMap::from([(2, vec![PartyAction::Claim { arc: ab, secret: SecretPick::Auto }])]),
        ]);
        let trace = run(&g, &mut behaviors, 4);
        assert!(trace.final_state.transferred(ab));
    }

    #[test]
    fn wrong_secret_claim_rejected() {
        let g = graph(&[("a", "b"), ("b", "a")]);
        let ab = (0, 1);
        let mut behaviors = boxed(vec![
            BTreeMap::from([(0, vec![
                PartyAction::MakePair,
                PartyAction::Create { arc: ab, lock: LockPick::Own, timeout: 4 },
            ])]),
            BTreeMap::from([
                (0, vec![PartyAction::MakePair]),
                // b's own secret does not open a's lock.
                (2, vec![PartyAction::Claim { arc: ab, secret: SecretPick::Own }]),
                // And a's secret is not in b's knowledge.
                (3, vec![PartyAction::Claim { arc: ab, secret: SecretPick::PairSecretOf(0) }]),
            ]),
        ]);
        let trace = run(&g, &mut behaviors, 5);
        let rejects = trace
            .events
            .iter()
            .filter(|e| matches!(&e.kind, EventKind::ClaimRejected { .. }))
            .count();
        assert_eq!(rejects, 2);
        assert!(!trace.final_state.transferred(ab));
    }

    #[test]
    fn create_rules_enforced() {
        let g = graph(&[("a", "b"), ("b", "a")]);
        let ab = (0, 1);
        let ba = (1, 0);
        let mut behaviors = boxed(vec![
            BTreeMap::from([
                (0, vec![
                    PartyAction::MakePair,
                    // Not the seller of (b, a).
                    PartyAction::Create { arc: ba, lock: LockPick::Own, timeout: 3 },
                    PartyAction::Create { arc: ab, lock: LockPick::Own, timeout: 3 },
                    // Double creation.
                    PartyAction::Create { arc: ab, lock: LockPick::Own, timeout: 3 },
                ]),
                (1, vec![PartyAction::MakePair]),
            ]),
            BTreeMap::new(),
        ]);
        let trace = run(&g, &mut behaviors, 4);
        assert!(trace.events.iter().any(|e| matches!(
            &e.kind,
            EventKind::CreateRejected { arc, reason } if *arc == ba && reason.contains("seller")
        )));
        assert!(trace.events.iter().any(|e| matches!(
            &e.kind,
            EventKind::CreateRejected { arc, reason } if *arc == ab && reason.contains("once")
        )));
        // Second pair attempt is rejected.
        assert!(trace.events.iter().any(|e| matches!(
            &e.kind,
            EventKind::Aborted { reason } if reason.contains("pair already")
        )));
    }

    #[test]
    fn expired_contract_cannot_be_recreated() {
        let g = graph(&[("a", "b"), ("b", "a")]);
        let ab = (0, 1);
        let mut behaviors = boxed(vec![
            BTreeMap::from([
                (0, vec![
                    PartyAction::MakePair,
                    PartyAction::Create { arc: ab, lock: LockPick::Own, timeout: 1 },
                ]),
                (3, vec![PartyAction::Create { arc: ab, lock: LockPick::Own, timeout: 9 }]),
            ]),
            BTreeMap::new(),
        ]);
        let trace = run(&g, &mut behaviors, 4);
        assert!(trace.events.iter().any(|e| matches!(
            &e.kind,
            EventKind::CreateRejected { reason, .. } if reason.contains("once")
        )));
        assert_eq!(trace.final_state.holder(ab), Holder::Seller);
    }

    #[test]
    fn deterministic_traces() {
        let g = graph(&[("a", "b"), ("b", "a")]);
        let script = || {
            boxed(vec![
                BTreeMap::from([(0, vec![
                    PartyAction::MakePair,
                    PartyAction::Create { arc: (0, 1), lock: LockPick::Own, timeout: 3 },
                    PartyAction::Share { to: 1 },
                ])]),
                BTreeMap::from([(2, vec![PartyAction::Claim {
                    arc: (0, 1),
                    secret: SecretPick::Auto,
                }])]),
            ])
        };
        let t1 = run(&g, &mut script(), 5);
        let t2 = run(&g, &mut script(), 5);
        assert_eq!(t1.hash_hex(&g), t2.hash_hex(&g));
        assert_eq!(t1.events, t2.events);
    }

    #[test]
    fn fresh_lock_has_no_preimage() {
        let g = graph(&[("a", "b"), ("b", "a")]);
        let ab = (0, 1);
        let mut behaviors = boxed(vec![
            BTreeMap::from([
                (0, vec![
                    PartyAction::MakePair,
                    PartyAction::Create { arc: ab, lock: LockPick::Fresh(7), timeout: 3 },
                    PartyAction::Share { to: 1 },
                ]),
            ]),
            BTreeMap::from([(2, vec![PartyAction::Claim { arc: ab, secret: SecretPick::Auto }])]),
        ]);
        let trace = run(&g, &mut behaviors, 5);
        assert!(!trace.final_state.transferred(ab));
        assert!(trace.final_state.all_resolved());
    }

    #[test]
    fn jsonl_export_shape() {
        let g = graph(&[("a", "b"), ("b", "a")]);
        let mut behaviors = boxed(vec![
            BTreeMap::from([(0, vec![
                PartyAction::MakePair,
                PartyAction::Create { arc: (0, 1), lock: LockPick::Own, timeout: 2 },
            ])]),
            BTreeMap::new(),
        ]);
        let trace = run(&g, &mut behaviors, 3);
        let jsonl = trace.to_jsonl(&g);
        for line in jsonl.lines() {
            let v: serde_json::Value = serde_json::from_str(line).unwrap();
            assert!(v.get("step").is_some());
            assert!(v.get("phase").is_some());
            assert!(v.get("event").is_some());
        }
        assert!(jsonl.contains("\"event\":\"contract_created\""));
        assert!(jsonl.contains("\"event\":\"contract_expired\""));
    }
}
