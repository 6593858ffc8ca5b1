use std::collections::{BTreeMap, HashMap};

use crate::coding::FieldElement;
use crate::protocol::{MsgPhase, NodeId, Tag};
use crate::sim::{EventKind, FailReason, Trace};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OpKind {
    Write,
    Read,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OpStatus {
    Complete,
    Failed(FailReason),
    Incomplete,
}

/// Tags are renumbered by every global reset, so they are compared
/// together with the reset epoch they were produced in.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Version {
    pub epoch: usize,
    pub tag: Tag,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OpRecord {
    pub id: u64,
    pub node: NodeId,
    pub kind: OpKind,
    /// Input of a write, output of a read (`None` is ⊥).
    pub value: Option<FieldElement>,
    pub invoke_step: u64,
    /// Position of the invocation in the event sequence.
    pub invoke_seq: usize,
    /// Step, sequence position and cycle of the response or failure.
    pub end: Option<(u64, usize, u64)>,
    pub tag: Option<Tag>,
    pub status: OpStatus,
    pub phantom: bool,
    pub last_phase: Option<MsgPhase>,
    pub elements: usize,
    /// Resets the node had completed when the operation chose its tag.
    pub epoch: usize,
    /// Running floor of initial-state tags when the operation was invoked.
    pub floor: Tag,
    /// In flight when a global reset started.
    pub sacrificed: bool,
}

impl OpRecord {
    pub fn is_complete(&self) -> bool {
        self.status == OpStatus::Complete
    }

    pub fn response_seq(&self) -> Option<usize> {
        self.is_complete().then(|| self.end.map(|e| e.1)).flatten()
    }

    pub fn version(&self, h: &OpHistory) -> Option<Version> {
        self.tag.map(|t| h.canonical(self.epoch, t))
    }

    /// Counts towards atomicity: complete, untouched by resets, and not a ⊥ read.
    pub fn checkable(&self) -> bool {
        self.is_complete() && !self.sacrificed && (self.kind == OpKind::Write || self.value.is_some())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ResetWave {
    pub start_step: u64,
    pub start_cycle: u64,
    /// Tag kept by the local resets.
    pub tag: Option<Tag>,
    pub complete: Option<(u64, u64)>,
}

/// Operations and reset waves extracted from a trace.
#[derive(Clone, Debug, Default)]
pub struct OpHistory {
    pub ops: Vec<OpRecord>,
    pub waves: Vec<ResetWave>,
    pub v0: FieldElement,
    pub safe: bool,
    pub k: usize,
}

impl OpHistory {
    pub fn from_trace(trace: &Trace) -> OpHistory {
        let mut h = OpHistory { safe: true, ..OpHistory::default() };
        let mut index: HashMap<u64, usize> = HashMap::new();
        let mut node_epoch: BTreeMap<u32, usize> = BTreeMap::new();
        let mut floor = Tag::T0;
        let mut wave_open = false;
        for (seq, ev) in trace.events.iter().enumerate() {
            let epoch = node_epoch.get(&ev.node).copied().unwrap_or(0);
            let new_op = |id: u64, value: Option<FieldElement>, write: bool, tag: Option<Tag>, phantom: bool| OpRecord {
                id,
                node: NodeId(ev.node),
                kind: if write { OpKind::Write } else { OpKind::Read },
                value,
                invoke_step: ev.step,
                invoke_seq: seq,
                end: None,
                tag,
                status: OpStatus::Incomplete,
                phantom,
                last_phase: None,
                elements: 0,
                epoch,
                floor,
                sacrificed: false,
            };
            match &ev.kind {
                EventKind::Init(i) => {
                    h.v0 = FieldElement(i.v0);
                    h.safe = i.safe;
                    h.k = i.k;
                }
                EventKind::Floor { tag } => floor = *tag,
                EventKind::Phantom { op, value, tag } => {
                    index.insert(*op, h.ops.len());
                    h.ops.push(new_op(*op, *value, value.is_some(), *tag, true));
                }
                EventKind::Invoke { op, value } => {
                    index.insert(*op, h.ops.len());
                    h.ops.push(new_op(*op, *value, value.is_some(), None, false));
                }
                EventKind::OpPhase { op, phase, tag } => {
                    if let Some(r) = index.get(op).map(|&i| &mut h.ops[i]) {
                        r.last_phase = Some(*phase);
                        if tag.is_some() {
                            // The tag belongs to the epoch it was chosen in.
                            r.epoch = epoch;
                            if r.kind == OpKind::Write {
                                r.tag = *tag;
                            }
                        }
                    }
                }
                EventKind::Respond { op, tag, value, elements } => {
                    if let Some(r) = index.get(op).map(|&i| &mut h.ops[i]) {
                        r.status = OpStatus::Complete;
                        r.end = Some((ev.step, seq, ev.cycle));
                        r.tag = Some(*tag);
                        r.elements = *elements;
                        if r.kind == OpKind::Read {
                            r.value = *value;
                        }
                    }
                }
                EventKind::Fail { op, reason } => {
                    if let Some(r) = index.get(op).map(|&i| &mut h.ops[i]) {
                        r.status = OpStatus::Failed(*reason);
                        r.end = Some((ev.step, seq, ev.cycle));
                    }
                }
                EventKind::ResetInit { .. } | EventKind::Frozen { .. } if !wave_open => {
                    wave_open = true;
                    h.waves.push(ResetWave { start_step: ev.step, start_cycle: ev.cycle, tag: None, complete: None });
                    for r in h.ops.iter_mut().filter(|r| r.end.is_none()) {
                        r.sacrificed = true;
                    }
                }
                EventKind::LocalReset { tag } => {
                    if let Some(w) = h.waves.last_mut() {
                        w.tag = Some(*tag);
                    }
                }
                EventKind::Resumed { .. } => {
                    node_epoch.insert(ev.node, h.waves.len());
                }
                EventKind::ResetComplete { .. } => {
                    wave_open = false;
                    if let Some(w) = h.waves.last_mut() {
                        w.complete = Some((ev.step, ev.cycle));
                    }
                }
                _ => {}
            }
        }
        h
    }

    /// Maps a renumbered `(1, owner)` tag back to the tag it replaced.
    pub fn canonical(&self, mut epoch: usize, mut tag: Tag) -> Version {
        while epoch > 0 {
            match (tag, self.waves.get(epoch - 1).and_then(|w| w.tag)) {
                (Tag::At { z: 1, owner }, Some(kept)) if kept.owner() == Some(owner) => {
                    tag = kept;
                    epoch -= 1;
                }
                _ => break,
            }
        }
        Version { epoch, tag }
    }

    pub fn get(&self, id: u64) -> Option<&OpRecord> {
        self.ops.iter().find(|r| r.id == id)
    }

    /// The first complete write whose tag exceeds every initial-state tag
    /// still present at its invocation.
    pub fn recovery_write(&self) -> Option<&OpRecord> {
        self.ops
            .iter()
            .filter(|r| r.kind == OpKind::Write && r.is_complete() && !r.phantom && !r.sacrificed)
            .filter(|r| r.tag.is_some_and(|t| t > r.floor))
            .min_by_key(|r| r.response_seq())
    }

    /// Indices of the operations in the legal suffix: everything for a safe
    /// start, otherwise the recovery write and all operations invoked after it
    /// responded.
    pub fn legal_suffix(&self) -> Option<Vec<usize>> {
        if self.safe {
            return Some((0..self.ops.len()).collect());
        }
        let rw = self.recovery_write()?;
        let cut = rw.response_seq()?;
        Some(
            self.ops
                .iter()
                .enumerate()
                .filter(|(_, r)| r.id == rw.id || r.invoke_seq > cut)
                .map(|(i, _)| i)
                .collect(),
        )
    }
}
