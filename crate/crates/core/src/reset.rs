//! Global reset as a two-phase echo wave.
//!
//! A node that starts or hears of a reset freezes: its client and server are
//! disabled and its channels flushed. Once it has heard `Freeze(t)` (or
//! `Resume(t)`) from every live node it runs the local reset with `t` and
//! moves to resuming; once every live node has answered with `Resume(t)` or
//! a normal message it re-enables and goes idle. Larger tags win, so forged
//! concurrent waves merge into one.

use std::collections::BTreeSet;

use crate::protocol::{NodeId, Tag};

/// Declared upper bound, in asynchronous cycles, on a reset under fairness.
pub const PSI_CYCLES: u64 = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ResetSignal {
    Freeze(Tag),
    Resume(Tag),
}

impl ResetSignal {
    pub fn tag(self) -> Tag {
        match self {
            ResetSignal::Freeze(t) | ResetSignal::Resume(t) => t,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ResetPhase {
    Idle,
    Freezing { tag: Tag, acks: BTreeSet<NodeId> },
    Resuming { tag: Tag, acks: BTreeSet<NodeId> },
}

/// Side effects the host node must apply, in order.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ResetAction {
    /// Stop client and server, abort the running operation, flush channels.
    Disable(Tag),
    /// Keep only the record with this tag.
    LocalReset(Tag),
    Enable(Tag),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ResetAgent {
    pub id: NodeId,
    pub phase: ResetPhase,
}

impl ResetAgent {
    pub fn new(id: NodeId) -> ResetAgent {
        ResetAgent { id, phase: ResetPhase::Idle }
    }

    pub fn is_idle(&self) -> bool {
        self.phase == ResetPhase::Idle
    }

    pub fn flag(&self) -> &'static str {
        match self.phase {
            ResetPhase::Idle => "idle",
            ResetPhase::Freezing { .. } => "freezing",
            ResetPhase::Resuming { .. } => "resuming",
        }
    }

    /// Signal to put on outgoing gossip tokens; `None` means send normal data.
    pub fn outgoing(&self) -> Option<ResetSignal> {
        match &self.phase {
            ResetPhase::Idle => None,
            ResetPhase::Freezing { tag, .. } => Some(ResetSignal::Freeze(*tag)),
            ResetPhase::Resuming { tag, .. } => Some(ResetSignal::Resume(*tag)),
        }
    }

    fn freeze(&mut self, t: Tag, out: &mut Vec<ResetAction>) {
        self.phase = ResetPhase::Freezing { tag: t, acks: BTreeSet::from([self.id]) };
        out.push(ResetAction::Disable(t));
    }

    /// Starts (or joins) a reset with tag `t`.
    pub fn global_reset(&mut self, t: Tag, live: &BTreeSet<NodeId>) -> Vec<ResetAction> {
        let mut out = Vec::new();
        let current = match &self.phase {
            ResetPhase::Idle => None,
            ResetPhase::Freezing { tag, .. } | ResetPhase::Resuming { tag, .. } => Some(*tag),
        };
        if current.is_none_or(|c| t > c) {
            self.freeze(t, &mut out);
        }
        out.extend(self.poll(live));
        out
    }

    /// Handles what arrived from `from`: a reset signal, or `None` for a
    /// normal protocol message.
    pub fn on_message(&mut self, from: NodeId, sig: Option<ResetSignal>, live: &BTreeSet<NodeId>) -> Vec<ResetAction> {
        let mut out = Vec::new();
        match (&mut self.phase, sig) {
            (ResetPhase::Idle, Some(ResetSignal::Freeze(t))) => {
                self.freeze(t, &mut out);
                if let ResetPhase::Freezing { acks, .. } = &mut self.phase {
                    acks.insert(from);
                }
            }
            (ResetPhase::Idle, _) => {}
            (ResetPhase::Freezing { tag, acks }, Some(s)) => {
                if s.tag() > *tag {
                    *tag = s.tag();
                    *acks = BTreeSet::from([self.id, from]);
                } else if s.tag() == *tag {
                    acks.insert(from);
                }
            }
            (ResetPhase::Freezing { .. }, None) => {}
            (ResetPhase::Resuming { tag, acks }, s) => match s {
                Some(s) if s.tag() > *tag => {
                    self.freeze(s.tag(), &mut out);
                    if let ResetPhase::Freezing { acks, .. } = &mut self.phase {
                        acks.insert(from);
                    }
                }
                Some(ResetSignal::Resume(t)) if t == *tag => {
                    acks.insert(from);
                }
                None => {
                    acks.insert(from);
                }
                Some(_) => {}
            },
        }
        out.extend(self.poll(live));
        out
    }

    /// Advances when every live node has acknowledged the current phase.
    /// Also called after crashes, which can complete an ack set.
    pub fn poll(&mut self, live: &BTreeSet<NodeId>) -> Vec<ResetAction> {
        let mut out = Vec::new();
        let id = self.id;
        let all = |acks: &BTreeSet<NodeId>| live.iter().all(|n| *n == id || acks.contains(n));
        loop {
            match &self.phase {
                ResetPhase::Freezing { tag, acks } if all(acks) => {
                    let t = *tag;
                    out.push(ResetAction::LocalReset(t));
                    self.phase = ResetPhase::Resuming { tag: t, acks: BTreeSet::from([self.id]) };
                }
                ResetPhase::Resuming { tag, acks } if all(acks) => {
                    out.push(ResetAction::Enable(*tag));
                    self.phase = ResetPhase::Idle;
                }
                _ => return out,
            }
        }
    }
}
