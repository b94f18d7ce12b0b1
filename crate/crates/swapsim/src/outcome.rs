//! Outcome classification for parties and coalitions.
//!
//! An outcome pairs the incoming arcs a subject actually acquired with the
//! outgoing arcs it relinquished. The classes partition all outcomes:
//! all-in/all-out is a deal, nothing moved is no-deal, all-in with some
//! outgoing retained is a discount, something in with all outgoing retained
//! is a free ride, and anything else is underwater. Underwater is the one
//! unacceptable class: acceptability is exactly "kept everything or got all
//! incoming".

use crate::engine::WorldState;
use crate::graph::{Arc, SwapDigraph, VertexId};
use serde_json::json;
use std::collections::BTreeSet;
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum OutcomeError {
    #[error("trace has unresolved contracts at the horizon")]
    UnresolvedContracts,
    #[error("outcomes concern different subjects")]
    SubjectMismatch,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum OutcomeClass {
    Deal,
    NoDeal,
    Discount,
    FreeRide,
    Underwater,
}

impl std::fmt::Display for OutcomeClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            OutcomeClass::Deal => "Deal",
            OutcomeClass::NoDeal => "NoDeal",
            OutcomeClass::Discount => "Discount",
            OutcomeClass::FreeRide => "FreeRide",
            OutcomeClass::Underwater => "Underwater",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Outcome {
    pub subject: BTreeSet<VertexId>,
    pub incoming: BTreeSet<Arc>,
    pub outgoing: BTreeSet<Arc>,
    pub transferred_in: BTreeSet<Arc>,
    pub transferred_out: BTreeSet<Arc>,
    pub class: OutcomeClass,
}

impl Outcome {
    pub fn acceptable(&self) -> bool {
        self.class != OutcomeClass::Underwater
    }

    pub fn to_json(&self, g: &SwapDigraph) -> serde_json::Value {
        json!({
            "subject": self.subject.iter().map(|&v| g.name(v)).collect::<Vec<_>>(),
            "in": self.transferred_in.iter().map(|&a| g.arc_label(a)).collect::<Vec<_>>(),
            "out": self.transferred_out.iter().map(|&a| g.arc_label(a)).collect::<Vec<_>>(),
            "class": self.class.to_string(),
            "acceptable": self.acceptable(),
        })
    }
}

fn class_of(
    transferred_in: &BTreeSet<Arc>,
    transferred_out: &BTreeSet<Arc>,
    incoming: &BTreeSet<Arc>,
    outgoing: &BTreeSet<Arc>,
) -> OutcomeClass {
    let all_in = transferred_in == incoming;
    let all_out = transferred_out == outgoing;
    if all_in && all_out {
        OutcomeClass::Deal
    } else if transferred_in.is_empty() && transferred_out.is_empty() {
        OutcomeClass::NoDeal
    } else if all_in {
        OutcomeClass::Discount
    } else if transferred_out.is_empty() {
        OutcomeClass::FreeRide
    } else {
        OutcomeClass::Underwater
    }
}

/// Classifies the coalition `subject` in a finished world. Incoming arcs of
/// a coalition cross into it, outgoing arcs cross out; internal arcs do not
/// count.
pub fn classify(
    g: &SwapDigraph,
    world: &WorldState,
    subject: &BTreeSet<VertexId>,
) -> Result<Outcome, OutcomeError> {
    if !world.all_resolved() {
        return Err(OutcomeError::UnresolvedContracts);
    }
    let mut incoming = BTreeSet::new();
    let mut outgoing = BTreeSet::new();
    for (u, v) in g.arcs() {
        match (subject.contains(&u), subject.contains(&v)) {
            (false, true) => {
                incoming.insert((u, v));
            }
            (true, false) => {
                outgoing.insert((u, v));
            }
            _ => {}
        }
    }
    let transferred_in: BTreeSet<Arc> =
        incoming.iter().copied().filter(|&a| world.transferred(a)).collect();
    let transferred_out: BTreeSet<Arc> =
        outgoing.iter().copied().filter(|&a| world.transferred(a)).collect();
    let class = class_of(&transferred_in, &transferred_out, &incoming, &outgoing);
    Ok(Outcome {
        subject: subject.clone(),
        incoming,
        outgoing,
        transferred_in,
        transferred_out,
        class,
    })
}

pub fn classify_party(
    g: &SwapDigraph,
    world: &WorldState,
    party: VertexId,
) -> Result<Outcome, OutcomeError> {
    classify(g, world, &BTreeSet::from([party]))
}

/// The (p1) dominance order: receive at least as much, relinquish no more,
/// and differ somewhere.
pub fn dominates(a: &Outcome, b: &Outcome) -> Result<bool, OutcomeError> {
    if a.subject != b.subject {
        return Err(OutcomeError::SubjectMismatch);
    }
    Ok(a.transferred_in.is_superset(&b.transferred_in)
        && a.transferred_out.is_subset(&b.transferred_out)
        && (a.transferred_in != b.transferred_in || a.transferred_out != b.transferred_out))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn outcome(
        subject: &[VertexId],
        incoming: &[Arc],
        outgoing: &[Arc],
        tin: &[Arc],
        tout: &[Arc],
    ) -> Outcome {
        let incoming: BTreeSet<Arc> = incoming.iter().copied().collect();
        let outgoing: BTreeSet<Arc> = outgoing.iter().copied().collect();
        let transferred_in: BTreeSet<Arc> = tin.iter().copied().collect();
        let transferred_out: BTreeSet<Arc> = tout.iter().copied().collect();
        let class = class_of(&transferred_in, &transferred_out, &incoming, &outgoing);
        Outcome {
            subject: subject.iter().copied().collect(),
            incoming,
            outgoing,
            transferred_in,
            transferred_out,
            class,
        }
    }

    #[test]
    fn classification_table() {
        let inc = [(1, 0), (2, 0)];
        let out = [(0, 3)];
        let case = |tin: &[Arc], tout: &[Arc]| outcome(&[0], &inc, &out, tin, tout).class;
        assert_eq!(case(&inc, &out), OutcomeClass::Deal);
        assert_eq!(case(&[], &[]), OutcomeClass::NoDeal);
        assert_eq!(case(&inc, &[]), OutcomeClass::Discount);
        assert_eq!(case(&[(1, 0)], &[]), OutcomeClass::FreeRide);
        assert_eq!(case(&[(1, 0)], &out), OutcomeClass::Underwater);
        assert_eq!(case(&[], &out), OutcomeClass::Underwater);
    }

    #[test]
    fn acceptability_matches_definition() {
        // Acceptable iff all incoming transferred or no outgoing transferred.
        let inc = [(1, 0), (2, 0)];
        let out = [(0, 3), (0, 4)];
        let subsets = |arcs: &[Arc]| -> Vec<Vec<Arc>> {
            (0..1usize << arcs.len())
                .map(|m| {
                    arcs.iter()
                        .enumerate()
                        .filter(|(i, _)| m >> i & 1 == 1)
                        .map(|(_, &a)| a)
                        .collect()
                })
                .collect()
        };
        for tin in subsets(&inc) {
            for tout in subsets(&out) {
                let o = outcome(&[0], &inc, &out, &tin, &tout);
                let expect = tin.len() == inc.len() || tout.is_empty();
                assert_eq!(o.acceptable(), expect, "{tin:?} {tout:?}");
            }
        }
    }

    #[test]
    fn classification_is_a_partition() {
        let inc = [(1, 0), (2, 0)];
        let out = [(0, 3), (0, 4)];
        for m_in in 0..4usize {
            for m_out in 0..4usize {
                let tin: Vec<Arc> = inc
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| m_in >> i & 1 == 1)
                    .map(|(_, &a)| a)
                    .collect();
                let tout: Vec<Arc> = out
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| m_out >> i & 1 == 1)
                    .map(|(_, &a)| a)
                    .collect();
                // class_of returns exactly one class by construction; check
                // the predicates do not overlap semantically.
                let o = outcome(&[0], &inc, &out, &tin, &tout);
                let all_in = tin.len() == inc.len();
                let all_out = tout.len() == out.len();
                let matches = [
                    all_in && all_out,
                    tin.is_empty() && tout.is_empty(),
                    all_in && !all_out,
                    !tin.is_empty() && tout.is_empty() && !all_in,
                ];
                let claimed = match o.class {
                    OutcomeClass::Deal => matches[0],
                    OutcomeClass::NoDeal => matches[1],
                    OutcomeClass::Discount => matches[2],
                    OutcomeClass::FreeRide => matches[3],
                    OutcomeClass::Underwater => !matches.iter().any(|&m| m),
                };
                assert!(claimed, "{tin:?} {tout:?} -> {:?}", o.class);
            }
        }
    }

    #[test]
    fn dominance_examples() {
        let inc = [(1, 0)];
        let out = [(0, 2)];
        let deal = outcome(&[0], &inc, &out, &inc, &out);
        let discount = outcome(&[0], &inc, &out, &inc, &[]);
        let nodeal = outcome(&[0], &inc, &out, &[], &[]);
        let underwater = outcome(&[0], &inc, &out, &[], &out);
        assert!(dominates(&discount, &deal).unwrap());
        assert!(!dominates(&deal, &discount).unwrap());
        assert!(dominates(&nodeal, &underwater).unwrap());
        // Same outcome never dominates itself.
        assert!(!dominates(&deal, &deal).unwrap());
    }

    #[test]
    fn incomparable_outcomes() {
        let inc = [(1, 0), (2, 0)];
        let out = [(0, 3)];
        let deal = outcome(&[0], &inc, &out, &inc, &out);
        let partial_freeride = outcome(&[0], &inc, &out, &[(1, 0)], &[]);
        assert!(!dominates(&deal, &partial_freeride).unwrap());
        assert!(!dominates(&partial_freeride, &deal).unwrap());
    }

    #[test]
    fn subject_mismatch_is_an_error() {
        let a = outcome(&[0], &[], &[], &[], &[]);
        let b = outcome(&[1], &[], &[], &[], &[]);
        assert_eq!(dominates(&a, &b), Err(OutcomeError::SubjectMismatch));
    }
}
