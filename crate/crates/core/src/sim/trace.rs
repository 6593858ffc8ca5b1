use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use crate::coding::FieldElement;
use crate::protocol::{Msg, MsgPhase, NodeId, Ping, Tag, TagTriple};

use super::scenario::SchedulerKind;

/// Scenario parameters recorded at the head of every trace.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct InitInfo {
    pub n: usize,
    pub f: usize,
    pub e: usize,
    pub k: usize,
    pub p: u64,
    pub maxint: u64,
    pub delta: usize,
    pub bounded: bool,
    pub v0: u64,
    pub sched: SchedulerKind,
    /// The run starts from the safe initial state (no corruption).
    pub safe: bool,
    pub seed: u64,
}

impl InitInfo {
    pub fn t_top(&self) -> Option<Tag> {
        self.bounded.then(|| Tag::new(self.maxint, NodeId(self.n as u32)))
    }

    pub fn storage_bound(&self) -> Option<usize> {
        self.bounded.then_some(self.n + self.delta + 3)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum FailReason {
    Crash,
    Reset,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum EventKind {
    Init(InitInfo),
    /// Running minimum over all states so far of the largest initial tag
    /// still present in the state.
    Floor { tag: Tag },
    /// An operation present in the corrupted initial state.
    /// `value` is `Some` for writes; `tag` is the tag the operation already holds.
    Phantom { op: u64, value: Option<FieldElement>, tag: Option<Tag> },
    /// `value` is `Some` for writes.
    Invoke { op: u64, value: Option<FieldElement> },
    OpPhase { op: u64, phase: MsgPhase, tag: Option<Tag> },
    /// `value` is the read result; always `None` for writes.
    Respond { op: u64, tag: Tag, value: Option<FieldElement>, elements: usize },
    Fail { op: u64, reason: FailReason },
    /// The node's client starts or stops needing rounds.
    Active { on: bool },
    /// A request phase returned with a quorum of replies.
    Qrm { phase: MsgPhase, quorum: Vec<NodeId>, genuine: bool, hygiene: bool },
    Handler { from: NodeId, req: Ping, reply: Option<Msg>, size: usize, digest: u64 },
    Gossip { from: NodeId, recv: TagTriple, emit: TagTriple, authentic: bool, size: usize },
    /// Storage snapshot outside handlers (initial state, reset, crash-resume).
    Store { size: usize, digest: u64 },
    /// A token round trip that departed at `dep` completed.
    Rtt { peer: NodeId, dep: u64, client: bool },
    Crash,
    Resume,
    ResetInit { tag: Tag },
    Frozen { tag: Tag },
    LocalReset { tag: Tag },
    Resumed { tag: Tag },
    ResetComplete { tag: Tag },
    Cycle { index: u64 },
    End { complete: bool, steps: u64 },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Event {
    pub step: u64,
    pub cycle: u64,
    /// 0 for system-wide events.
    pub node: u32,
    pub kind: EventKind,
}

impl Event {
    pub fn node_id(&self) -> Option<NodeId> {
        (self.node > 0).then_some(NodeId(self.node))
    }
}

/// Ordered event log of one run.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Trace {
    pub events: Vec<Event>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("trace line {line}: {msg}")]
pub struct TraceParseError {
    pub line: usize,
    pub msg: String,
}

impl Trace {
    pub fn init(&self) -> Option<&InitInfo> {
        self.events.iter().find_map(|e| match &e.kind {
            EventKind::Init(i) => Some(i),
            _ => None,
        })
    }

    pub fn is_complete(&self) -> bool {
        self.events
            .iter()
            .rev()
            .any(|e| matches!(e.kind, EventKind::End { complete: true, .. }))
    }

    /// Recorded cycle boundaries as `(index, step)`.
    pub fn cycle_marks(&self) -> Vec<(u64, u64)> {
        self.events
            .iter()
            .filter_map(|e| match e.kind {
                EventKind::Cycle { index } => Some((index, e.step)),
                _ => None,
            })
            .collect()
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for e in &self.events {
            s.push_str(&e.to_string());
            s.push('\n');
        }
        s
    }

    pub fn parse(text: &str) -> Result<Trace, TraceParseError> {
        let mut events = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let ev = line
                .parse::<Event>()
                .map_err(|msg| TraceParseError { line: i + 1, msg })?;
            events.push(ev);
        }
        Ok(Trace { events })
    }
}

fn b(v: bool) -> u8 {
    v as u8
}

fn opt<T: fmt::Display>(v: &Option<T>) -> String {
    v.as_ref().map_or_else(|| "_".to_string(), |v| v.to_string())
}

impl EventKind {
    pub fn name(&self) -> &'static str {
        match self {
            EventKind::Init(_) => "init",
            EventKind::Floor { .. } => "floor",
            EventKind::Phantom { .. } => "phantom",
            EventKind::Invoke { .. } => "invoke",
            EventKind::OpPhase { .. } => "phase",
            EventKind::Respond { .. } => "respond",
            EventKind::Fail { .. } => "fail",
            EventKind::Active { .. } => "active",
            EventKind::Qrm { .. } => "qrm",
            EventKind::Handler { .. } => "handler",
            EventKind::Gossip { .. } => "gossip",
            EventKind::Store { .. } => "store",
            EventKind::Rtt { .. } => "rtt",
            EventKind::Crash => "crash",
            EventKind::Resume => "resume",
            EventKind::ResetInit { .. } => "reset-init",
            EventKind::Frozen { .. } => "frozen",
            EventKind::LocalReset { .. } => "local-reset",
            EventKind::Resumed { .. } => "resumed",
            EventKind::ResetComplete { .. } => "reset-complete",
            EventKind::Cycle { .. } => "cycle",
            EventKind::End { .. } => "end",
        }
    }

    fn payload(&self) -> String {
        match self {
            EventKind::Init(i) => format!(
                "n={} f={} e={} k={} p={} maxint={} delta={} bounded={} v0={} sched={} safe={} seed={}",
                i.n,
                i.f,
                i.e,
                i.k,
                i.p,
                i.maxint,
                i.delta,
                b(i.bounded),
                i.v0,
                i.sched,
                b(i.safe),
                i.seed
            ),
            EventKind::Floor { tag } => format!("tag={tag}"),
            EventKind::Phantom { op, value: Some(v), tag } => format!("op={op} kind=write value={v} tag={}", opt(tag)),
            EventKind::Phantom { op, value: None, tag } => format!("op={op} kind=read tag={}", opt(tag)),
            EventKind::Invoke { op, value: Some(v) } => format!("op={op} kind=write value={v}"),
            EventKind::Invoke { op, value: None } => format!("op={op} kind=read"),
            EventKind::OpPhase { op, phase, tag } => format!("op={op} phase={phase} tag={}", opt(tag)),
            EventKind::Respond { op, tag, value, elements } => {
                format!("op={op} tag={tag} value={} elements={elements}", opt(value))
            }
            EventKind::Fail { op, reason } => format!(
                "op={op} reason={}",
                match reason {
                    FailReason::Crash => "crash",
                    FailReason::Reset => "reset",
                }
            ),
            EventKind::Active { on } => format!("on={}", b(*on)),
            EventKind::Qrm { phase, quorum, genuine, hygiene } => {
                let q: Vec<String> = quorum.iter().map(|n| n.to_string()).collect();
                format!("phase={phase} quorum={} genuine={} hygiene={}", q.join(","), b(*genuine), b(*hygiene))
            }
            EventKind::Handler { from, req, reply, size, digest } => {
                format!("from={from} req={req} reply={} size={size} digest={digest:016x}", opt(reply))
            }
            EventKind::Gossip { from, recv, emit, authentic, size } => {
                format!("from={from} recv={recv} emit={emit} authentic={} size={size}", b(*authentic))
            }
            EventKind::Store { size, digest } => format!("size={size} digest={digest:016x}"),
            EventKind::Rtt { peer, dep, client } => {
                format!("peer={peer} dep={dep} via={}", if *client { "ping" } else { "gossip" })
            }
            EventKind::Crash | EventKind::Resume => String::new(),
            EventKind::ResetInit { tag }
            | EventKind::Frozen { tag }
            | EventKind::LocalReset { tag }
            | EventKind::Resumed { tag }
            | EventKind::ResetComplete { tag } => format!("tag={tag}"),
            EventKind::Cycle { index } => format!("index={index}"),
            EventKind::End { complete, steps } => format!("complete={} steps={steps}", b(*complete)),
        }
    }
}

impl fmt::Display for Event {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}\t{}\t{}\t{}\t{}", self.step, self.cycle, self.node, self.kind.name(), self.kind.payload())
    }
}

struct Fields<'a>(HashMap<&'a str, &'a str>);

impl<'a> Fields<'a> {
    fn new(payload: &'a str) -> Result<Fields<'a>, String> {
        let mut m = HashMap::new();
        for tok in payload.split_whitespace() {
            let (k, v) = tok.split_once('=').ok_or_else(|| format!("expected key=value, got {tok:?}"))?;
            m.insert(k, v);
        }
        Ok(Fields(m))
    }

    fn raw(&self, key: &str) -> Result<&'a str, String> {
        self.0.get(key).copied().ok_or_else(|| format!("missing field {key}"))
    }

    fn get<T: FromStr>(&self, key: &str) -> Result<T, String> {
        let v = self.raw(key)?;
        v.parse().map_err(|_| format!("bad value for {key}: {v:?}"))
    }

    fn opt<T: FromStr>(&self, key: &str) -> Result<Option<T>, String> {
        match self.raw(key)? {
            "_" => Ok(None),
            _ => self.get(key).map(Some),
        }
    }

    fn flag(&self, key: &str) -> Result<bool, String> {
        match self.raw(key)? {
            "0" => Ok(false),
            "1" => Ok(true),
            v => Err(format!("bad flag for {key}: {v:?}")),
        }
    }

    fn elem(&self, key: &str) -> Result<Option<FieldElement>, String> {
        Ok(self.opt::<u64>(key)?.map(FieldElement))
    }

    fn hex(&self, key: &str) -> Result<u64, String> {
        let v = self.raw(key)?;
        u64::from_str_radix(v, 16).map_err(|_| format!("bad hex for {key}: {v:?}"))
    }
}

impl FromStr for Event {
    type Err = String;

    fn from_str(line: &str) -> Result<Event, String> {
        let cols: Vec<&str> = line.splitn(5, '\t').collect();
        if cols.len() < 4 {
            return Err("expected tab-separated step, cycle, node, kind, payload".into());
        }
        let num = |s: &str, what: &str| s.parse::<u64>().map_err(|_| format!("bad {what}: {s:?}"));
        let step = num(cols[0], "step")?;
        let cycle = num(cols[1], "cycle")?;
        let node = num(cols[2], "node")? as u32;
        let f = Fields::new(cols.get(4).copied().unwrap_or(""))?;
        let kind = match cols[3] {
            "init" => EventKind::Init(InitInfo {
                n: f.get("n")?,
                f: f.get("f")?,
                e: f.get("e")?,
                k: f.get("k")?,
                p: f.get("p")?,
                maxint: f.get("maxint")?,
                delta: f.get("delta")?,
                bounded: f.flag("bounded")?,
                v0: f.get("v0")?,
                sched: f.get("sched")?,
                safe: f.flag("safe")?,
                seed: f.get("seed")?,
            }),
            "floor" => EventKind::Floor { tag: f.get("tag")? },
            "phantom" => EventKind::Phantom {
                op: f.get("op")?,
                value: match f.raw("kind")? {
                    "write" => Some(FieldElement(f.get("value")?)),
                    "read" => None,
                    k => return Err(format!("bad kind {k:?}")),
                },
                tag: f.opt("tag")?,
            },
            "invoke" => EventKind::Invoke {
                op: f.get("op")?,
                value: match f.raw("kind")? {
                    "write" => Some(FieldElement(f.get("value")?)),
                    "read" => None,
                    k => return Err(format!("bad kind {k:?}")),
                },
            },
            "phase" => EventKind::OpPhase { op: f.get("op")?, phase: f.get("phase")?, tag: f.opt("tag")? },
            "respond" => EventKind::Respond {
                op: f.get("op")?,
                tag: f.get("tag")?,
                value: f.elem("value")?,
                elements: f.get("elements")?,
            },
            "fail" => EventKind::Fail {
                op: f.get("op")?,
                reason: match f.raw("reason")? {
                    "crash" => FailReason::Crash,
                    "reset" => FailReason::Reset,
                    r => return Err(format!("bad reason {r:?}")),
                },
            },
            "active" => EventKind::Active { on: f.flag("on")? },
            "qrm" => EventKind::Qrm {
                phase: f.get("phase")?,
                quorum: f
                    .raw("quorum")?
                    .split(',')
                    .filter(|s| !s.is_empty())
                    .map(|s| s.parse().map_err(|_| format!("bad node {s:?}")))
                    .collect::<Result<_, _>>()?,
                genuine: f.flag("genuine")?,
                hygiene: f.flag("hygiene")?,
            },
            "handler" => EventKind::Handler {
                from: f.get("from")?,
                req: f.get("req")?,
                reply: f.opt("reply")?,
                size: f.get("size")?,
                digest: f.hex("digest")?,
            },
            "gossip" => EventKind::Gossip {
                from: f.get("from")?,
                recv: f.get("recv")?,
                emit: f.get("emit")?,
                authentic: f.flag("authentic")?,
                size: f.get("size")?,
            },
            "store" => EventKind::Store { size: f.get("size")?, digest: f.hex("digest")? },
            "rtt" => EventKind::Rtt {
                peer: f.get("peer")?,
                dep: f.get("dep")?,
                client: match f.raw("via")? {
                    "ping" => true,
                    "gossip" => false,
                    v => return Err(format!("bad via {v:?}")),
                },
            },
            "crash" => EventKind::Crash,
            "resume" => EventKind::Resume,
            "reset-init" => EventKind::ResetInit { tag: f.get("tag")? },
            "frozen" => EventKind::Frozen { tag: f.get("tag")? },
            "local-reset" => EventKind::LocalReset { tag: f.get("tag")? },
            "resumed" => EventKind::Resumed { tag: f.get("tag")? },
            "reset-complete" => EventKind::ResetComplete { tag: f.get("tag")? },
            "cycle" => EventKind::Cycle { index: f.get("index")? },
            "end" => EventKind::End { complete: f.flag("complete")?, steps: f.get("steps")? },
            k => return Err(format!("unknown event kind {k:?}")),
        };
        Ok(Event { step, cycle, node, kind })
    }
}
