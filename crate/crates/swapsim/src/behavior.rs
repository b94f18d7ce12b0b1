//! Party strategies: conforming protocol execution, primitive deviations,
//! scripted coalitions and seeded random adversaries.
//!
//! A conforming party replays its schedule entries, performing each
//! verification and aborting on failure. Deviations are applied to that
//! plan: rescheduled or reparameterized contract creations detach from the
//! abort gating (an adversary ignores its own checks), withheld or eager
//! claims replace the scheduled claim behavior, and shares inject secret
//! distribution at chosen steps. Everything a behavior may attempt is still
//! validated by the engine, so no deviation can forge a preimage, spend a
//! foreign asset or create a contract twice.

use crate::engine::{Behavior, Hashlock, LockPick, PartyAction, SecretPick, View};
use crate::graph::{Arc, SwapDigraph, VertexId};
use crate::schedule::{IncomingCheck, LockGroup, LockSource, Schedule, ScheduleEntry, TimedAction};
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum BehaviorError {
    #[error("behavior file: {0}")]
    Malformed(String),
    #[error(transparent)]
    Graph(#[from] crate::graph::GraphError),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Hashlock choice for a deviant contract creation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum WrongLock {
    Own,
    PairOf(VertexId),
    Fresh(u32),
}

/// The deviation primitives. `delta` offsets are relative to the scheduled
/// creation step; `at`/`step` are absolute steps.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum Deviation {
    FollowUntil { step: u32, script: Vec<(u32, ScriptAction)> },
    NeverCreate { arc: Arc },
    DelayCreate { arc: Arc, delta: u32 },
    AdvanceCreate { arc: Arc, delta: u32 },
    WrongTimeout { arc: Arc, timeout: u32 },
    WrongHashlock { arc: Arc, lock: WrongLock },
    ShareSecret { to: VertexId, at: u32 },
    ClaimEagerly { arc: Arc },
    WithholdClaim { arc: Arc },
}

/// Catalog of available deviation primitives.
pub fn deviation_primitives() -> &'static [&'static str] {
    &[
        "follow_until(step, stop | script)",
        "never_create(arc)",
        "delay_create(arc, delta)",
        "advance_create(arc, delta)",
        "wrong_timeout(arc, timeout)",
        "wrong_hashlock(arc, own | pair_of:<party> | fresh:<tag>)",
        "share_secret(to, at)",
        "claim_eagerly(arc)",
        "withhold_claim(arc)",
    ]
}

/// A directly scripted action, resolved against a graph.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum ScriptAction {
    MakePair,
    Share { to: VertexId },
    Create { arc: Arc, lock: WrongLock, timeout: u32 },
    CreatePlanned { arc: Arc },
    Claim { arc: Arc, secret: ScriptSecret },
    Abort,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum ScriptSecret {
    Auto,
    Own,
    PairSecretOf(VertexId),
}

/// Per-party behavior specification; absent parties are conforming.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PartySpec {
    Conforming,
    Deviant(Vec<Deviation>),
    Scripted(Vec<(u32, ScriptAction)>),
}

pub type BehaviorMap = BTreeMap<VertexId, PartySpec>;

pub fn all_conforming(g: &SwapDigraph) -> BehaviorMap {
    g.vertices().map(|v| (v, PartySpec::Conforming)).collect()
}

// ---------------------------------------------------------------------------
// Conforming execution.

struct ConformingParty {
    entries: Vec<ScheduleEntry>,
    eager: bool,
    aborted: bool,
    uniform_lock: Option<Hashlock>,
}

impl ConformingParty {
    fn new(schedule: &Schedule, party: VertexId) -> Self {
        ConformingParty {
            entries: schedule.per_party.get(&party).cloned().unwrap_or_default(),
            eager: schedule.eager_claims,
            aborted: false,
            uniform_lock: None,
        }
    }

    fn verify(&mut self, checks: &[IncomingCheck], view: &View<'_>) -> Result<(), String> {
        let mut uniform: Option<Hashlock> = None;
        for check in checks {
            let Some(contract) = view.contract(check.arc) else {
                return Err(format!("incoming contract {:?} missing", check.arc));
            };
            if matches!(contract.state, crate::engine::ContractState::Expired { .. }) {
                return Err(format!("incoming contract {:?} already expired", check.arc));
            }
            if contract.timeout != check.timeout {
                return Err(format!(
                    "incoming contract {:?} has timeout {} instead of {}",
                    check.arc, contract.timeout, check.timeout
                ));
            }
            match check.group {
                LockGroup::PinnedOwn => {
                    let own = view.own_pair().map(|(_, h)| h);
                    if own != Some(contract.lock) {
                        return Err(format!(
                            "incoming contract {:?} not protected by own hashlock",
                            check.arc
                        ));
                    }
                }
                LockGroup::Uniform => match uniform {
                    None => uniform = Some(contract.lock),
                    Some(h) if h == contract.lock => {}
                    Some(_) => {
                        return Err(format!(
                            "incoming contract {:?} breaks hashlock uniformity",
                            check.arc
                        ))
                    }
                },
            }
        }
        if uniform.is_some() {
            self.uniform_lock = uniform;
        }
        Ok(())
    }

    fn claim_ready(view: &View<'_>, arc: Arc) -> bool {
        match view.contract(arc) {
            Some(c) => matches!(c.state, crate::engine::ContractState::Escrowed { .. }),
            None => false,
        }
    }
}

impl Behavior for ConformingParty {
    fn actions(&mut self, step: u32, view: &View<'_>) -> Vec<PartyAction> {
        if self.aborted {
            return Vec::new();
        }
        let mut out = Vec::new();

        if self.eager {
            for entry in &self.entries {
                let TimedAction::ClaimIncoming { arcs, watch } = &entry.action else { continue };
                if entry.time <= step || watch.is_empty() {
                    continue;
                }
                let unlocked = watch.iter().any(|&a| {
                    matches!(
                        view.contract(a).map(|c| &c.state),
                        Some(crate::engine::ContractState::Claimed { .. })
                    )
                });
                if !unlocked {
                    continue;
                }
                for &arc in arcs {
                    if Self::claim_ready(view, arc)
                        && view.can_open(view.contract(arc).expect("checked").lock)
                    {
                        out.push(PartyAction::Claim { arc, secret: SecretPick::Auto });
                    }
                }
            }
        }

        let todays: Vec<ScheduleEntry> =
            self.entries.iter().filter(|e| e.time == step).cloned().collect();
        for entry in todays {
            match &entry.action {
                TimedAction::MakeSecretPair => out.push(PartyAction::MakePair),
                TimedAction::VerifyIncoming { checks } => {
                    if let Err(reason) = self.verify(checks, view) {
                        self.aborted = true;
                        out.push(PartyAction::Abort { reason });
                        return out;
                    }
                }
                TimedAction::CreateContract { arc, lock, timeout } => {
                    let pick = match lock {
                        LockSource::Own => LockPick::Own,
                        LockSource::CopiedUniform => match self.uniform_lock {
                            Some(h) => LockPick::Value(h),
                            None => {
                                self.aborted = true;
                                out.push(PartyAction::Abort {
                                    reason: "no uniform incoming hashlock to copy".into(),
                                });
                                return out;
                            }
                        },
                    };
                    out.push(PartyAction::Create { arc: *arc, lock: pick, timeout: *timeout });
                }
                TimedAction::ClaimIncoming { arcs, watch } => {
                    if !watch.is_empty() {
                        let unlocked = watch.iter().any(|&a| {
                            matches!(
                                view.contract(a).map(|c| &c.state),
                                Some(crate::engine::ContractState::Claimed { .. })
                            )
                        });
                        if !unlocked {
                            self.aborted = true;
                            out.push(PartyAction::Abort {
                                reason: "no outgoing asset was claimed".into(),
                            });
                            return out;
                        }
                    }
                    for &arc in arcs {
                        if Self::claim_ready(view, arc) {
                            out.push(PartyAction::Claim { arc, secret: SecretPick::Auto });
                        }
                    }
                }
            }
        }
        out
    }
}

/// Builds the conforming behavior of one party under a schedule.
pub fn conforming_behavior(schedule: &Schedule, party: VertexId) -> Box<dyn Behavior> {
    Box::new(ConformingParty::new(schedule, party))
}

// ---------------------------------------------------------------------------
// Deviant execution.

struct DeviantParty {
    inner: ConformingParty,
    injected: Vec<(u32, PartyAction)>,
    eager_arcs: Vec<Arc>,
    stop_after: Option<u32>,
    after_script: Vec<(u32, PartyAction)>,
}

fn wrong_lock_pick(lock: WrongLock) -> LockPick {
    match lock {
        WrongLock::Own => LockPick::Own,
        WrongLock::PairOf(x) => LockPick::PairOf(x),
        WrongLock::Fresh(tag) => LockPick::Fresh(tag),
    }
}

fn script_to_action(
    schedule: &Schedule,
    action: &ScriptAction,
) -> PartyAction {
    match action {
        ScriptAction::MakePair => PartyAction::MakePair,
        ScriptAction::Share { to } => PartyAction::Share { to: *to },
        ScriptAction::Create { arc, lock, timeout } => PartyAction::Create {
            arc: *arc,
            lock: wrong_lock_pick(*lock),
            timeout: *timeout,
        },
        ScriptAction::CreatePlanned { arc } => PartyAction::Create {
            arc: *arc,
            lock: LockPick::PairOf(schedule.hashlock_owner[arc]),
            timeout: schedule.timeout[arc],
        },
        ScriptAction::Claim { arc, secret } => PartyAction::Claim {
            arc: *arc,
            secret: match secret {
                ScriptSecret::Auto => SecretPick::Auto,
                ScriptSecret::Own => SecretPick::Own,
                ScriptSecret::PairSecretOf(x) => SecretPick::PairSecretOf(*x),
            },
        },
        ScriptAction::Abort => PartyAction::Abort { reason: "scripted".into() },
    }
}

impl DeviantParty {
    fn new(schedule: &Schedule, party: VertexId, mods: &[Deviation]) -> Self {
        let mut entries = schedule.per_party.get(&party).cloned().unwrap_or_default();
        let mut injected: Vec<(u32, PartyAction)> = Vec::new();
        let mut eager_arcs = Vec::new();
        let mut stop_after = None;
        let mut after_script = Vec::new();

        // Per-arc rewritten creations: (step, lock, timeout, suppressed).
        let mut rewrites: BTreeMap<Arc, (u32, LockPick, u32, bool)> = BTreeMap::new();

        let mut needs_own_pair = false;
        for m in mods {
            match m {
                Deviation::FollowUntil { step, script } => {
                    stop_after = Some(*step);
                    after_script = script
                        .iter()
                        .map(|(t, a)| (*t, script_to_action(schedule, a)))
                        .collect();
                }
                Deviation::NeverCreate { arc } => {
                    if let Some(r) = extract_create(&mut rewrites, &mut entries, schedule, *arc) {
                        r.3 = true;
                    }
                }
                Deviation::DelayCreate { arc, delta } => {
                    if let Some(r) = extract_create(&mut rewrites, &mut entries, schedule, *arc) {
                        r.0 += delta;
                    }
                }
                Deviation::AdvanceCreate { arc, delta } => {
                    if let Some(r) = extract_create(&mut rewrites, &mut entries, schedule, *arc) {
                        r.0 = r.0.saturating_sub(*delta);
                    }
                }
                Deviation::WrongTimeout { arc, timeout } => {
                    if let Some(r) = extract_create(&mut rewrites, &mut entries, schedule, *arc) {
                        r.2 = *timeout;
                    }
                }
                Deviation::WrongHashlock { arc, lock } => {
                    if *lock == WrongLock::Own {
                        needs_own_pair = true;
                    }
                    if let Some(r) = extract_create(&mut rewrites, &mut entries, schedule, *arc) {
                        r.1 = wrong_lock_pick(*lock);
                    }
                }
                Deviation::ShareSecret { to, at } => {
                    injected.push((*at, PartyAction::Share { to: *to }));
                }
                Deviation::ClaimEagerly { arc } => {
                    eager_arcs.push(*arc);
                    strip_claim(&mut entries, *arc);
                }
                Deviation::WithholdClaim { arc } => {
                    strip_claim(&mut entries, *arc);
                }
            }
        }
        for (arc, (step, lock, timeout, suppressed)) in rewrites {
            if !suppressed {
                injected.push((step, PartyAction::Create { arc, lock, timeout }));
            }
        }
        if needs_own_pair
            && !entries.iter().any(|e| matches!(e.action, TimedAction::MakeSecretPair))
        {
            injected.push((0, PartyAction::MakePair));
        }
        injected.sort_by(|a, b| a.0.cmp(&b.0));

        DeviantParty {
            inner: ConformingParty {
                entries,
                eager: schedule.eager_claims,
                aborted: false,
                uniform_lock: None,
            },
            injected,
            eager_arcs,
            stop_after,
            after_script,
        }
    }
}

fn strip_claim(entries: &mut [ScheduleEntry], arc: Arc) {
    for e in entries {
        if let TimedAction::ClaimIncoming { arcs, .. } = &mut e.action {
            arcs.retain(|&a| a != arc);
        }
    }
}

/// Pulls the scheduled creation of `arc` out of the conforming plan so it
/// can be reparameterized and re-injected without abort gating.
fn extract_create<'a>(
    rewrites: &'a mut BTreeMap<Arc, (u32, LockPick, u32, bool)>,
    entries: &mut Vec<ScheduleEntry>,
    schedule: &Schedule,
    arc: Arc,
) -> Option<&'a mut (u32, LockPick, u32, bool)> {
    if !rewrites.contains_key(&arc) {
        let pos = entries.iter().position(|e| {
            matches!(e.action, TimedAction::CreateContract { arc: a, .. } if a == arc)
        })?;
        let entry = entries.remove(pos);
        let TimedAction::CreateContract { lock, timeout, .. } = entry.action else {
            unreachable!()
        };
        let pick = match lock {
            LockSource::Own => LockPick::Own,
            // Outside the verify flow the planned protector's public
            // hashlock value stands in for the copied one.
            LockSource::CopiedUniform => LockPick::PairOf(schedule.hashlock_owner[&arc]),
        };
        rewrites.insert(arc, (entry.time, pick, timeout, false));
    }
    rewrites.get_mut(&arc)
}

impl Behavior for DeviantParty {
    fn actions(&mut self, step: u32, view: &View<'_>) -> Vec<PartyAction> {
        let mut out = Vec::new();
        let conforming_active = self.stop_after.is_none_or(|t| step <= t);
        if conforming_active {
            out.extend(self.inner.actions(step, view));
        } else {
            out.extend(
                self.after_script.iter().filter(|(t, _)| *t == step).map(|(_, a)| a.clone()),
            );
        }
        out.extend(self.injected.iter().filter(|(t, _)| *t == step).map(|(_, a)| a.clone()));
        for &arc in &self.eager_arcs {
            if let Some(c) = view.contract(arc) {
                if matches!(c.state, crate::engine::ContractState::Escrowed { .. })
                    && step <= c.timeout
                    && view.can_open(c.lock)
                {
                    out.push(PartyAction::Claim { arc, secret: SecretPick::Auto });
                }
            }
        }
        out
    }
}

struct ScriptedParty {
    steps: Vec<(u32, PartyAction)>,
}

impl Behavior for ScriptedParty {
    fn actions(&mut self, step: u32, _view: &View<'_>) -> Vec<PartyAction> {
        self.steps.iter().filter(|(t, _)| *t == step).map(|(_, a)| a.clone()).collect()
    }
}

/// Instantiates one behavior per party from a behavior map.
pub fn build_behaviors(
    g: &SwapDigraph,
    schedule: &Schedule,
    map: &BehaviorMap,
) -> Vec<Box<dyn Behavior>> {
    g.vertices()
        .map(|v| match map.get(&v) {
            None | Some(PartySpec::Conforming) => conforming_behavior(schedule, v),
            Some(PartySpec::Deviant(mods)) => {
                Box::new(DeviantParty::new(schedule, v, mods)) as Box<dyn Behavior>
            }
            Some(PartySpec::Scripted(steps)) => Box::new(ScriptedParty {
                steps: steps
                    .iter()
                    .map(|(t, a)| (*t, script_to_action(schedule, a)))
                    .collect(),
            }),
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Deviation instantiation and random adversaries.

/// Schedule-significant steps: creations, verifications, claims, timeouts,
/// and one step past the largest timeout.
pub fn significant_steps(schedule: &Schedule) -> Vec<u32> {
    let mut steps: BTreeSet<u32> = BTreeSet::from([0]);
    steps.extend(schedule.create_time.values().copied());
    steps.extend(schedule.timeout.values().copied());
    for entries in schedule.per_party.values() {
        steps.extend(entries.iter().map(|e| e.time));
    }
    steps.insert(schedule.max_timeout() + 1);
    steps.into_iter().collect()
}

/// Every applicable single deviation for the coalition, in a fixed order.
pub fn instantiate_deviations(
    g: &SwapDigraph,
    schedule: &Schedule,
    coalition: &BTreeSet<VertexId>,
) -> Vec<(VertexId, Deviation)> {
    let steps = significant_steps(schedule);
    let max_timeout = schedule.max_timeout();
    let timeout_values: BTreeSet<u32> = schedule
        .timeout
        .values()
        .copied()
        .chain(std::iter::once(max_timeout + 1))
        .collect();
    let pair_owners: BTreeSet<VertexId> = schedule.hashlock_owner.values().copied().collect();

    let mut out = Vec::new();
    for &p in coalition {
        for &w in g.out_neighbors(p) {
            let arc = (p, w);
            let created_at = schedule.create_time[&arc];
            out.push((p, Deviation::NeverCreate { arc }));
            let mut delays: BTreeSet<u32> = steps
                .iter()
                .copied()
                .filter(|&t| t > created_at)
                .take(2)
                .collect();
            delays.insert(max_timeout + 1);
            for t in delays {
                out.push((p, Deviation::DelayCreate { arc, delta: t - created_at }));
            }
            let advances: BTreeSet<u32> = [0, created_at.saturating_sub(1)]
                .into_iter()
                .filter(|&t| t < created_at)
                .collect();
            for t in advances {
                out.push((p, Deviation::AdvanceCreate { arc, delta: created_at - t }));
            }
            for &t in &timeout_values {
                if t != schedule.timeout[&arc] {
                    out.push((p, Deviation::WrongTimeout { arc, timeout: t }));
                }
            }
            let planned = schedule.hashlock_owner[&arc];
            let mut locks: Vec<WrongLock> = Vec::new();
            if planned != p {
                locks.push(WrongLock::Own);
            }
            locks.extend(
                pair_owners.iter().filter(|&&x| x != planned && x != p).map(|&x| WrongLock::PairOf(x)),
            );
            locks.push(WrongLock::Fresh(0));
            for lock in locks {
                out.push((p, Deviation::WrongHashlock { arc, lock }));
            }
        }
        for &u in g.in_neighbors(p) {
            let arc = (u, p);
            out.push((p, Deviation::ClaimEagerly { arc }));
            out.push((p, Deviation::WithholdClaim { arc }));
        }
        for to in g.vertices() {
            if to == p {
                continue;
            }
            for &at in &steps {
                out.push((p, Deviation::ShareSecret { to, at }));
            }
        }
        for &t in &steps {
            out.push((p, Deviation::FollowUntil { step: t, script: vec![] }));
        }
    }
    out
}

/// Samples at most `budget` deviations for the coalition; everyone else
/// conforms. Deterministic per seed.
pub fn random_adversary(
    g: &SwapDigraph,
    schedule: &Schedule,
    seed: u64,
    coalition: &BTreeSet<VertexId>,
    budget: usize,
) -> BehaviorMap {
    let pool = instantiate_deviations(g, schedule, coalition);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let take = budget.min(pool.len());
    let mut per_party: BTreeMap<VertexId, Vec<Deviation>> = BTreeMap::new();
    if take > 0 {
        let mut picks: Vec<usize> = sample(&mut rng, pool.len(), take).into_vec();
        picks.sort_unstable();
        for i in picks {
            let (p, d) = pool[i].clone();
            per_party.entry(p).or_default().push(d);
        }
    }
    let mut map = all_conforming(g);
    for (p, devs) in per_party {
        map.insert(p, PartySpec::Deviant(devs));
    }
    map
}

// ---------------------------------------------------------------------------
// Proof-scenario builders.

/// One party silently never creates one of its outgoing contracts.
pub fn never_create_scenario(g: &SwapDigraph, arc: Arc) -> BehaviorMap {
    let mut map = all_conforming(g);
    map.insert(arc.0, PartySpec::Deviant(vec![Deviation::NeverCreate { arc }]));
    map
}

/// A protector leaks its secret to a buyer who then claims early, while the
/// victim's incoming contract never appears.
pub fn leaked_secret_scenario(
    g: &SwapDigraph,
    protector: VertexId,
    buyer: VertexId,
    claimed_arc: Arc,
    missing_arc: Arc,
    share_at: u32,
) -> BehaviorMap {
    let mut map = all_conforming(g);
    map.insert(
        protector,
        PartySpec::Deviant(vec![Deviation::ShareSecret { to: buyer, at: share_at }]),
    );
    map.insert(buyer, PartySpec::Deviant(vec![Deviation::ClaimEagerly { arc: claimed_arc }]));
    map.insert(
        missing_arc.0,
        PartySpec::Deviant(vec![Deviation::NeverCreate { arc: missing_arc }]),
    );
    map
}

/// Everyone outside `active` stops after `stop_after`; a protector leaks its
/// secret to a buyer who claims one arc eagerly.
pub fn stop_and_leak_scenario(
    g: &SwapDigraph,
    active: &BTreeSet<VertexId>,
    stop_after: u32,
    protector: VertexId,
    buyer: VertexId,
    claimed_arc: Arc,
) -> BehaviorMap {
    let mut map = all_conforming(g);
    for v in g.vertices() {
        if !active.contains(&v) {
            map.insert(
                v,
                PartySpec::Deviant(vec![Deviation::FollowUntil { step: stop_after, script: vec![] }]),
            );
        }
    }
    let mut protector_mods = vec![Deviation::ShareSecret { to: buyer, at: stop_after + 1 }];
    if !active.contains(&protector) {
        protector_mods.push(Deviation::FollowUntil { step: stop_after, script: vec![] });
    }
    map.insert(protector, PartySpec::Deviant(protector_mods));
    let mut buyer_mods = vec![Deviation::ClaimEagerly { arc: claimed_arc }];
    if !active.contains(&buyer) {
        buyer_mods.push(Deviation::FollowUntil { step: stop_after, script: vec![] });
    }
    map.insert(buyer, PartySpec::Deviant(buyer_mods));
    map
}

// ---------------------------------------------------------------------------
// External JSON format.

#[derive(Debug, Serialize, Deserialize)]
pub struct BehaviorFile {
    pub parties: BTreeMap<String, PartyEntry>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
pub struct PartyEntry {
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub conforming: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub deviations: Vec<DeviationSpec>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub script: Vec<ScriptStepSpec>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum DeviationSpec {
    FollowUntil {
        step: u32,
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        script: Vec<ScriptStepSpec>,
    },
    NeverCreate { arc: String },
    DelayCreate { arc: String, delta: u32 },
    AdvanceCreate { arc: String, delta: u32 },
    WrongTimeout { arc: String, timeout: u32 },
    WrongHashlock { arc: String, lock: String },
    ShareSecret { to: String, at: u32 },
    ClaimEagerly { arc: String },
    WithholdClaim { arc: String },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScriptStepSpec {
    pub step: u32,
    pub action: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub arc: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub to: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lock: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub secret: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timeout: Option<u32>,
}

fn parse_lock(g: &SwapDigraph, s: &str) -> Result<WrongLock, BehaviorError> {
    if s == "own" {
        Ok(WrongLock::Own)
    } else if let Some(name) = s.strip_prefix("pair_of:") {
        Ok(WrongLock::PairOf(g.vertex(name)?))
    } else if let Some(tag) = s.strip_prefix("fresh:") {
        tag.parse().map(WrongLock::Fresh).map_err(|_| {
            BehaviorError::Malformed(format!("bad fresh lock tag {tag:?}"))
        })
    } else {
        Err(BehaviorError::Malformed(format!("unknown lock spec {s:?}")))
    }
}

fn lock_string(g: &SwapDigraph, lock: WrongLock) -> String {
    match lock {
        WrongLock::Own => "own".into(),
        WrongLock::PairOf(x) => format!("pair_of:{}", g.name(x)),
        WrongLock::Fresh(tag) => format!("fresh:{tag}"),
    }
}

fn parse_script_step(
    g: &SwapDigraph,
    s: &ScriptStepSpec,
) -> Result<(u32, ScriptAction), BehaviorError> {
    let arc = |field: &Option<String>| -> Result<Arc, BehaviorError> {
        field
            .as_deref()
            .ok_or_else(|| BehaviorError::Malformed(format!("action {:?} needs an arc", s.action)))
            .and_then(|a| Ok(g.arc_from_label(a)?))
    };
    let action = match s.action.as_str() {
        "make_pair" => ScriptAction::MakePair,
        "share" => ScriptAction::Share {
            to: g.vertex(s.to.as_deref().ok_or_else(|| {
                BehaviorError::Malformed("share needs `to`".into())
            })?)?,
        },
        "create" => {
            let arc = arc(&s.arc)?;
            match (&s.lock, s.timeout) {
                (Some(lock), Some(timeout)) => ScriptAction::Create {
                    arc,
                    lock: parse_lock(g, lock)?,
                    timeout,
                },
                (None, None) => ScriptAction::CreatePlanned { arc },
                _ => {
                    return Err(BehaviorError::Malformed(
                        "create needs both lock and timeout, or neither".into(),
                    ))
                }
            }
        }
        "claim" => ScriptAction::Claim {
            arc: arc(&s.arc)?,
            secret: match s.secret.as_deref().unwrap_or("auto") {
                "auto" => ScriptSecret::Auto,
                "own" => ScriptSecret::Own,
                other => match other.strip_prefix("secret_of:") {
                    Some(name) => ScriptSecret::PairSecretOf(g.vertex(name)?),
                    None => {
                        return Err(BehaviorError::Malformed(format!(
                            "unknown secret spec {other:?}"
                        )))
                    }
                },
            },
        },
        "abort" => ScriptAction::Abort,
        other => {
            return Err(BehaviorError::Malformed(format!("unknown action {other:?}")))
        }
    };
    Ok((s.step, action))
}

fn script_step_spec(g: &SwapDigraph, step: u32, action: &ScriptAction) -> ScriptStepSpec {
    let mut spec = ScriptStepSpec {
        step,
        action: String::new(),
        arc: None,
        to: None,
        lock: None,
        secret: None,
        timeout: None,
    };
    match action {
        ScriptAction::MakePair => spec.action = "make_pair".into(),
        ScriptAction::Share { to } => {
            spec.action = "share".into();
            spec.to = Some(g.name(*to).to_owned());
        }
        ScriptAction::Create { arc, lock, timeout } => {
            spec.action = "create".into();
            spec.arc = Some(g.arc_label(*arc));
            spec.lock = Some(lock_string(g, *lock));
            spec.timeout = Some(*timeout);
        }
        ScriptAction::CreatePlanned { arc } => {
            spec.action = "create".into();
            spec.arc = Some(g.arc_label(*arc));
        }
        ScriptAction::Claim { arc, secret } => {
            spec.action = "claim".into();
            spec.arc = Some(g.arc_label(*arc));
            spec.secret = Some(match secret {
                ScriptSecret::Auto => "auto".into(),
                ScriptSecret::Own => "own".into(),
                ScriptSecret::PairSecretOf(x) => format!("secret_of:{}", g.name(*x)),
            });
        }
        ScriptAction::Abort => spec.action = "abort".into(),
    }
    spec
}

fn deviation_spec(g: &SwapDigraph, d: &Deviation) -> DeviationSpec {
    match d {
        Deviation::FollowUntil { step, script } => DeviationSpec::FollowUntil {
            step: *step,
            script: script.iter().map(|(t, a)| script_step_spec(g, *t, a)).collect(),
        },
        Deviation::NeverCreate { arc } => {
            DeviationSpec::NeverCreate { arc: g.arc_label(*arc) }
        }
        Deviation::DelayCreate { arc, delta } => {
            DeviationSpec::DelayCreate { arc: g.arc_label(*arc), delta: *delta }
        }
        Deviation::AdvanceCreate { arc, delta } => {
            DeviationSpec::AdvanceCreate { arc: g.arc_label(*arc), delta: *delta }
        }
        Deviation::WrongTimeout { arc, timeout } => {
            DeviationSpec::WrongTimeout { arc: g.arc_label(*arc), timeout: *timeout }
        }
        Deviation::WrongHashlock { arc, lock } => DeviationSpec::WrongHashlock {
            arc: g.arc_label(*arc),
            lock: lock_string(g, *lock),
        },
        Deviation::ShareSecret { to, at } => {
            DeviationSpec::ShareSecret { to: g.name(*to).to_owned(), at: *at }
        }
        Deviation::ClaimEagerly { arc } => {
            DeviationSpec::ClaimEagerly { arc: g.arc_label(*arc) }
        }
        Deviation::WithholdClaim { arc } => {
            DeviationSpec::WithholdClaim { arc: g.arc_label(*arc) }
        }
    }
}

fn parse_deviation(g: &SwapDigraph, d: &DeviationSpec) -> Result<Deviation, BehaviorError> {
    Ok(match d {
        DeviationSpec::FollowUntil { step, script } => Deviation::FollowUntil {
            step: *step,
            script: script
                .iter()
                .map(|s| parse_script_step(g, s))
                .collect::<Result<_, _>>()?,
        },
        DeviationSpec::NeverCreate { arc } => {
            Deviation::NeverCreate { arc: g.arc_from_label(arc)? }
        }
        DeviationSpec::DelayCreate { arc, delta } => {
            Deviation::DelayCreate { arc: g.arc_from_label(arc)?, delta: *delta }
        }
        DeviationSpec::AdvanceCreate { arc, delta } => {
            Deviation::AdvanceCreate { arc: g.arc_from_label(arc)?, delta: *delta }
        }
        DeviationSpec::WrongTimeout { arc, timeout } => {
            Deviation::WrongTimeout { arc: g.arc_from_label(arc)?, timeout: *timeout }
        }
        DeviationSpec::WrongHashlock { arc, lock } => Deviation::WrongHashlock {
            arc: g.arc_from_label(arc)?,
            lock: parse_lock(g, lock)?,
        },
        DeviationSpec::ShareSecret { to, at } => {
            Deviation::ShareSecret { to: g.vertex(to)?, at: *at }
        }
        DeviationSpec::ClaimEagerly { arc } => {
            Deviation::ClaimEagerly { arc: g.arc_from_label(arc)? }
        }
        DeviationSpec::WithholdClaim { arc } => {
            Deviation::WithholdClaim { arc: g.arc_from_label(arc)? }
        }
    })
}

/// Serializes a behavior map to the behavior-script JSON format.
pub fn behavior_map_to_file(g: &SwapDigraph, map: &BehaviorMap) -> BehaviorFile {
    let mut parties = BTreeMap::new();
    for v in g.vertices() {
        let entry = match map.get(&v) {
            None | Some(PartySpec::Conforming) => {
                PartyEntry { conforming: true, ..Default::default() }
            }
            Some(PartySpec::Deviant(devs)) => PartyEntry {
                conforming: true,
                deviations: devs.iter().map(|d| deviation_spec(g, d)).collect(),
                ..Default::default()
            },
            Some(PartySpec::Scripted(steps)) => PartyEntry {
                script: steps.iter().map(|(t, a)| script_step_spec(g, *t, a)).collect(),
                ..Default::default()
            },
        };
        parties.insert(g.name(v).to_owned(), entry);
    }
    BehaviorFile { parties }
}

/// Parses the behavior-script JSON format against a graph.
pub fn behavior_map_from_file(
    g: &SwapDigraph,
    file: &BehaviorFile,
) -> Result<BehaviorMap, BehaviorError> {
    let mut map = BehaviorMap::new();
    for (name, entry) in &file.parties {
        let v = g.vertex(name)?;
        let spec = if !entry.script.is_empty() {
            if entry.conforming {
                return Err(BehaviorError::Malformed(format!(
                    "{name}: conforming and scripted are mutually exclusive"
                )));
            }
            PartySpec::Scripted(
                entry
                    .script
                    .iter()
                    .map(|s| parse_script_step(g, s))
                    .collect::<Result<_, _>>()?,
            )
        } else if !entry.deviations.is_empty() {
            PartySpec::Deviant(
                entry
                    .deviations
                    .iter()
                    .map(|d| parse_deviation(g, d))
                    .collect::<Result<_, _>>()?,
            )
        } else if entry.conforming {
            PartySpec::Conforming
        } else {
            PartySpec::Scripted(Vec::new())
        };
        map.insert(v, spec);
    }
    Ok(map)
}

pub fn behavior_map_to_json(g: &SwapDigraph, map: &BehaviorMap) -> serde_json::Value {
    serde_json::to_value(behavior_map_to_file(g, map)).expect("serializable")
}

pub fn behavior_map_from_json(
    g: &SwapDigraph,
    json: &str,
) -> Result<BehaviorMap, BehaviorError> {
    let file: BehaviorFile = serde_json::from_str(json)?;
    behavior_map_from_file(g, &file)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decompose::reuniclus_decompose;
    use crate::engine::{run, EventKind};
    use crate::outcome::{classify_party, OutcomeClass};
    use crate::schedule::{compile_bdp, compile_rdp};

    fn graph(arcs: &[(&str, &str)]) -> SwapDigraph {
        SwapDigraph::from_named_arcs(arcs).unwrap()
    }

    fn run_map(
        g: &SwapDigraph,
        schedule: &Schedule,
        map: &BehaviorMap,
    ) -> crate::engine::Trace {
        let mut behaviors = build_behaviors(g, schedule, map);
        run(g, &mut behaviors, schedule.auto_horizon())
    }

    fn classes(g: &SwapDigraph, trace: &crate::engine::Trace) -> Vec<OutcomeClass> {
        g.vertices()
            .map(|v| classify_party(g, &trace.final_state, v).unwrap().class)
            .collect()
    }

    #[test]
    fn conforming_bdp_three_cycle_reaches_deal() {
        let g = graph(&[("l", "a"), ("a", "b"), ("b", "l")]);
        let s = compile_bdp(&g, g.vertex("l").unwrap()).unwrap();
        let trace = run_map(&g, &s, &all_conforming(&g));
        assert!(classes(&g, &trace).iter().all(|&c| c == OutcomeClass::Deal));
        let mut claim_steps = trace.claim_steps();
        claim_steps.sort_unstable();
        assert_eq!(claim_steps, vec![3, 4, 5]);
        assert_eq!(trace.creation_steps(), vec![0, 1, 2]);
    }

    #[test]
    fn conforming_rdp_digon_chain_reaches_deal() {
        let g = graph(&[("a", "b"), ("b", "a"), ("b", "c"), ("c", "b")]);
        let dec = reuniclus_decompose(&g).unwrap();
        let s = compile_rdp(&g, &dec).unwrap();
        let trace = run_map(&g, &s, &all_conforming(&g));
        assert!(classes(&g, &trace).iter().all(|&c| c == OutcomeClass::Deal));
        let mut creations = trace.creation_steps();
        creations.sort_unstable();
        assert_eq!(creations, vec![0, 0, 1, 2]);
        let mut claims = trace.claim_steps();
        claims.sort_unstable();
        assert_eq!(claims, vec![3, 4, 4, 5]);
    }

    #[test]
    fn conforming_run_reproduces_schedule_multiset() {
        let g = graph(&[("a", "b"), ("b", "a"), ("b", "c"), ("c", "b")]);
        let dec = reuniclus_decompose(&g).unwrap();
        let s = compile_rdp(&g, &dec).unwrap();
        let trace = run_map(&g, &s, &all_conforming(&g));
        let mut created: BTreeMap<Arc, (u32, u32)> = BTreeMap::new();
        for e in &trace.events {
            if let EventKind::ContractCreated { arc, timeout, .. } = e.kind {
                created.insert(arc, (e.step, timeout));
            }
        }
        for arc in g.arcs() {
            assert_eq!(created[&arc], (s.create_time[&arc], s.timeout[&arc]));
        }
        // Each asset claimed exactly at its timeout step.
        for e in &trace.events {
            if let EventKind::AssetClaimed { arc } = e.kind {
                assert_eq!(e.step, s.timeout[&arc]);
            }
        }
    }

    #[test]
    fn digon_never_create_leads_to_nodeal() {
        let g = graph(&[("l", "v"), ("v", "l")]);
        let s = compile_bdp(&g, g.vertex("l").unwrap()).unwrap();
        let vl = g.arc_from_label("v->l").unwrap();
        let trace = run_map(&g, &s, &never_create_scenario(&g, vl));
        assert!(classes(&g, &trace).iter().all(|&c| c == OutcomeClass::NoDeal));
        // The leader aborts at its claim step.
        let l = g.vertex("l").unwrap();
        assert!(trace.events.iter().any(|e| {
            e.party == Some(l)
                && e.step == 2
                && matches!(&e.kind, EventKind::Aborted { reason } if reason.contains("missing"))
        }));
        // The leader's outgoing contract expires at its timeout.
        let lv = g.arc_from_label("l->v").unwrap();
        assert!(trace.events.iter().any(|e| {
            e.step == s.timeout[&lv] && matches!(e.kind, EventKind::ContractExpired { arc } if arc == lv)
        }));
    }

    #[test]
    fn eager_claims_still_reach_deal() {
        let g = graph(&[("a", "b"), ("b", "a"), ("b", "c"), ("c", "b")]);
        let dec = reuniclus_decompose(&g).unwrap();
        let s = compile_rdp(&g, &dec).unwrap().with_eager_claims();
        let trace = run_map(&g, &s, &all_conforming(&g));
        assert!(classes(&g, &trace).iter().all(|&c| c == OutcomeClass::Deal));
    }

    #[test]
    fn random_adversary_is_deterministic() {
        let g = graph(&[("l", "v"), ("v", "l")]);
        let s = compile_bdp(&g, g.vertex("l").unwrap()).unwrap();
        let coalition = BTreeSet::from([g.vertex("v").unwrap()]);
        let a = random_adversary(&g, &s, 42, &coalition, 2);
        let b = random_adversary(&g, &s, 42, &coalition, 2);
        assert_eq!(a, b);
        assert_ne!(a, random_adversary(&g, &s, 43, &coalition, 2));
    }

    #[test]
    fn budget_zero_is_all_conforming() {
        let g = graph(&[("l", "v"), ("v", "l")]);
        let s = compile_bdp(&g, g.vertex("l").unwrap()).unwrap();
        let coalition = BTreeSet::from([g.vertex("v").unwrap()]);
        assert_eq!(random_adversary(&g, &s, 7, &coalition, 0), all_conforming(&g));
    }

    #[test]
    fn seed_sweep_covers_never_create() {
        let g = graph(&[("l", "v"), ("v", "l")]);
        let s = compile_bdp(&g, g.vertex("l").unwrap()).unwrap();
        let v = g.vertex("v").unwrap();
        let vl = g.arc_from_label("v->l").unwrap();
        let coalition = BTreeSet::from([v]);
        let mut found = false;
        for seed in 0..100 {
            let map = random_adversary(&g, &s, seed, &coalition, 1);
            if let Some(PartySpec::Deviant(devs)) = map.get(&v) {
                if devs.contains(&Deviation::NeverCreate { arc: vl }) {
                    found = true;
                    break;
                }
            }
        }
        assert!(found, "100 seeds never sampled the withheld creation");
    }

    #[test]
    fn behavior_json_round_trip() {
        let g = graph(&[("a", "b"), ("b", "a"), ("b", "c"), ("c", "b")]);
        let b = g.vertex("b").unwrap();
        let c = g.vertex("c").unwrap();
        let cb = g.arc_from_label("c->b").unwrap();
        let mut map = all_conforming(&g);
        map.insert(
            b,
            PartySpec::Deviant(vec![
                Deviation::ShareSecret { to: c, at: 1 },
                Deviation::WrongHashlock { arc: g.arc_from_label("b->a").unwrap(), lock: WrongLock::Fresh(3) },
            ]),
        );
        map.insert(
            c,
            PartySpec::Scripted(vec![(2, ScriptAction::Claim { arc: cb, secret: ScriptSecret::Auto })]),
        );
        let json = behavior_map_to_json(&g, &map).to_string();
        let back = behavior_map_from_json(&g, &json).unwrap();
        assert_eq!(map, back);
    }

    #[test]
    fn instantiation_is_deterministic_and_nonempty() {
        let g = graph(&[("a", "b"), ("b", "a"), ("b", "c"), ("c", "b")]);
        let dec = reuniclus_decompose(&g).unwrap();
        let s = compile_rdp(&g, &dec).unwrap();
        let coalition = BTreeSet::from([g.vertex("c").unwrap()]);
        let pool = instantiate_deviations(&g, &s, &coalition);
        assert_eq!(pool, instantiate_deviations(&g, &s, &coalition));
        assert!(pool.len() > 10);
        assert!(deviation_primitives().len() >= 8);
    }

    #[test]
    fn scripted_foreign_claim_is_rejected_by_engine() {
        let g = graph(&[("l", "v"), ("v", "l")]);
        let s = compile_bdp(&g, g.vertex("l").unwrap()).unwrap();
        let v = g.vertex("v").unwrap();
        let lv = g.arc_from_label("l->v").unwrap();
        let mut map = all_conforming(&g);
        // v tries to claim with the leader's secret it never learned.
        map.insert(
            v,
            PartySpec::Scripted(vec![(1, ScriptAction::Claim {
                arc: lv,
                secret: ScriptSecret::PairSecretOf(g.vertex("l").unwrap()),
            })]),
        );
        let trace = run_map(&g, &s, &map);
        assert!(trace.events.iter().any(|e| matches!(
            &e.kind,
            EventKind::ClaimRejected { arc, .. } if *arc == lv
        )));
        assert!(!trace.final_state.transferred(lv));
    }
}
