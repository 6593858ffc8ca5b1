use std::collections::BTreeMap;
use std::fmt;

use crate::protocol::{MsgPhase, Role, Tag, TagTriple};
use crate::reset::PSI_CYCLES;
use crate::sim::{EventKind, SchedulerKind, Trace};

use super::atomicity::check_atomicity;
use super::history::{OpHistory, OpKind, OpStatus};
use super::linearize::{check_linearizable, LinResult};

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Verdict {
    Pass,
    Fail(String),
    /// The check does not apply to this trace.
    Skip(String),
}

impl Verdict {
    pub fn is_fail(&self) -> bool {
        matches!(self, Verdict::Fail(_))
    }

    pub fn label(&self) -> &'static str {
        match self {
            Verdict::Pass => "PASS",
            Verdict::Fail(_) => "FAIL",
            Verdict::Skip(_) => "SKIP",
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Verdict::Pass => f.write_str("PASS"),
            Verdict::Fail(m) => write!(f, "FAIL ({m})"),
            Verdict::Skip(m) => write!(f, "SKIP ({m})"),
        }
    }
}

pub const CHECK_NAMES: [&str; 8] =
    ["atomicity", "linearizable", "liveness", "storage", "recovery", "comm", "overflow", "reset"];

/// Runs a check by name. `delta` overrides the trace's δ for the storage bound.
pub fn run_check(name: &str, trace: &Trace, delta: Option<usize>) -> Option<Verdict> {
    Some(match name {
        "atomicity" => atomicity(trace),
        "linearizable" => linearization(trace, 2_000_000),
        "liveness" => liveness(trace),
        "storage" => storage_bound(trace, delta),
        "recovery" => match measure_recovery(trace) {
            Ok(_) => Verdict::Pass,
            Err(m) => Verdict::Fail(m),
        },
        "comm" => comm(trace, 3),
        "overflow" => overflow(trace),
        "reset" => resets(trace, PSI_CYCLES),
        _ => return None,
    })
}

/// Tag-based atomicity on the legal suffix.
pub fn atomicity(trace: &Trace) -> Verdict {
    let h = OpHistory::from_trace(trace);
    let Some(scope) = h.legal_suffix() else {
        return Verdict::Fail("no complete valid write, so no legal suffix".into());
    };
    match check_atomicity(&h, &scope) {
        Ok(()) => Verdict::Pass,
        Err(w) => Verdict::Fail(w.to_string()),
    }
}

/// Brute-force linearization search on the legal suffix.
pub fn linearization(trace: &Trace, budget: usize) -> Verdict {
    let h = OpHistory::from_trace(trace);
    match check_linearizable(&h, budget) {
        None => Verdict::Fail("no legal suffix".into()),
        Some(LinResult::Linearizable) => Verdict::Pass,
        Some(LinResult::NotLinearizable) => Verdict::Fail("no linearization exists".into()),
        Some(LinResult::Unknown) => Verdict::Skip("search budget exceeded".into()),
    }
}

/// Every operation that was not aborted completes, and every read that
/// returned a value gathered at least k elements. Only meaningful on fair runs.
pub fn liveness(trace: &Trace) -> Verdict {
    let Some(init) = trace.init() else { return Verdict::Fail("trace has no init event".into()) };
    if init.sched != SchedulerKind::Fair {
        return Verdict::Skip(format!("{} schedule", init.sched));
    }
    let h = OpHistory::from_trace(trace);
    let stuck: Vec<String> = h
        .ops
        .iter()
        .filter(|r| r.status == OpStatus::Incomplete)
        .map(|r| format!("op {} at node {} stuck in {}", r.id, r.node, r.last_phase.map_or("start".into(), |p| p.to_string())))
        .collect();
    if !stuck.is_empty() {
        return Verdict::Fail(stuck.join("; "));
    }
    if !trace.is_complete() {
        return Verdict::Fail("run did not finish within its budget".into());
    }
    if let Some(r) = h
        .ops
        .iter()
        .find(|r| r.kind == OpKind::Read && r.is_complete() && r.value.is_some() && r.elements < init.k)
    {
        return Verdict::Fail(format!("read {} decoded from {} elements", r.id, r.elements));
    }
    Verdict::Pass
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct StorageReport {
    /// Largest snapshot at a server after its first handler.
    pub max_checked: usize,
    /// Largest snapshot anywhere, the initial state included.
    pub max_overall: usize,
    /// First breach as `(step, node, size)`.
    pub breach: Option<(u64, u32, usize)>,
}

pub fn storage_report(trace: &Trace, bound: usize) -> StorageReport {
    let mut rep = StorageReport::default();
    let mut armed: BTreeMap<u32, bool> = BTreeMap::new();
    for ev in &trace.events {
        let size = match ev.kind {
            EventKind::Handler { size, .. } | EventKind::Gossip { size, .. } => {
                armed.insert(ev.node, true);
                size
            }
            EventKind::Store { size, .. } => size,
            _ => continue,
        };
        rep.max_overall = rep.max_overall.max(size);
        if armed.get(&ev.node).copied().unwrap_or(false) {
            rep.max_checked = rep.max_checked.max(size);
            if size > bound && rep.breach.is_none() {
                rep.breach = Some((ev.step, ev.node, size));
            }
        }
    }
    rep
}

/// `|S| ≤ N + δ + 3` at every snapshot from a server's first handler on.
pub fn storage_bound(trace: &Trace, delta: Option<usize>) -> Verdict {
    let Some(init) = trace.init() else { return Verdict::Fail("trace has no init event".into()) };
    if !init.bounded {
        return Verdict::Skip("unbounded mode".into());
    }
    let bound = init.n + delta.unwrap_or(init.delta) + 3;
    match storage_report(trace, bound).breach {
        None => Verdict::Pass,
        Some((step, node, size)) => Verdict::Fail(format!("server {node} holds {size} > {bound} records at step {step}")),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Recovery {
    pub op: u64,
    pub tag: Tag,
    pub step: u64,
    /// Cycle index at the write's response.
    pub cycle: u64,
}

/// Locates the end of the first complete write whose tag exceeds every
/// initial-state tag present when it was invoked.
pub fn measure_recovery(trace: &Trace) -> Result<Recovery, String> {
    let h = OpHistory::from_trace(trace);
    let w = h.recovery_write().ok_or("no complete valid write")?;
    let (step, _, cycle) = w.end.ok_or("recovery write has no response")?;
    Ok(Recovery { op: w.id, tag: w.tag.unwrap_or(Tag::T0), step, cycle })
}

/// From cycle `from` on: every quorum access saw only replies to pings of
/// its own phase over clean buffers, every delivered gossip triple was sent
/// by the gossip handler, and each server's gossiped tags never decrease
/// (outside local resets and crash-resumes).
pub fn comm(trace: &Trace, from: u64) -> Verdict {
    let mut last: BTreeMap<u32, TagTriple> = BTreeMap::new();
    for ev in trace.events.iter() {
        match &ev.kind {
            EventKind::LocalReset { .. } | EventKind::Resume => {
                last.remove(&ev.node);
            }
            _ if ev.cycle < from => {}
            EventKind::Qrm { phase, genuine, hygiene, .. } => {
                if !genuine || !hygiene {
                    return Verdict::Fail(format!(
                        "node {} {} quorum at step {} (genuine={genuine} hygiene={hygiene})",
                        ev.node, phase, ev.step
                    ));
                }
            }
            EventKind::Gossip { from: src, authentic, emit, .. } => {
                if !authentic {
                    return Verdict::Fail(format!("server {} accepted a stale triple from {src} at step {}", ev.node, ev.step));
                }
                if let Some(prev) = last.insert(ev.node, *emit) {
                    if !emit.dominates(&prev) {
                        return Verdict::Fail(format!("server {} gossip went from {prev} to {emit} at step {}", ev.node, ev.step));
                    }
                }
            }
            _ => {}
        }
    }
    Verdict::Pass
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct OverflowReport {
    /// Writer queries left unanswered.
    pub suspended: usize,
    /// Writer queries answered with a tag above `t_top`.
    pub leaked: usize,
}

pub fn overflow_report(trace: &Trace) -> Option<OverflowReport> {
    let top = trace.init()?.t_top()?;
    let mut rep = OverflowReport::default();
    for ev in &trace.events {
        if let EventKind::Handler { req, reply, .. } = &ev.kind {
            if req.role != Role::Writer || req.msg.phase != MsgPhase::Qry {
                continue;
            }
            match reply {
                None => rep.suspended += 1,
                Some(m) if m.tag.is_some_and(|t| t > top) => rep.leaked += 1,
                Some(_) => {}
            }
        }
    }
    Some(rep)
}

/// Writer queries are never answered with a tag above `t_top`.
pub fn overflow(trace: &Trace) -> Verdict {
    match overflow_report(trace) {
        None => Verdict::Skip("unbounded mode".into()),
        Some(r) if r.leaked > 0 => Verdict::Fail(format!("{} writer queries answered above t_top", r.leaked)),
        Some(_) => Verdict::Pass,
    }
}

/// Every global reset completes within `psi` cycles of its start.
pub fn resets(trace: &Trace, psi: u64) -> Verdict {
    let h = OpHistory::from_trace(trace);
    for (i, w) in h.waves.iter().enumerate() {
        match w.complete {
            None => return Verdict::Fail(format!("reset {} starting at step {} never completed", i + 1, w.start_step)),
            Some((_, c)) if c - w.start_cycle > psi => {
                return Verdict::Fail(format!("reset {} took {} cycles", i + 1, c - w.start_cycle));
            }
            Some(_) => {}
        }
    }
    Verdict::Pass
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ReadStats {
    pub reads: usize,
    pub valued: usize,
    /// Reads overlapping no write.
    pub quiescent: usize,
    pub quiescent_valued: usize,
}

pub fn read_stats(trace: &Trace) -> ReadStats {
    let h = OpHistory::from_trace(trace);
    let writes: Vec<(usize, usize)> = h
        .ops
        .iter()
        .filter(|r| r.kind == OpKind::Write)
        .map(|r| (if r.phantom { 0 } else { r.invoke_seq }, r.end.map_or(usize::MAX, |e| e.1)))
        .collect();
    let mut s = ReadStats::default();
    for r in h.ops.iter().filter(|r| r.kind == OpKind::Read && r.is_complete() && !r.phantom) {
        let (a, b) = (r.invoke_seq, r.end.map_or(usize::MAX, |e| e.1));
        s.reads += 1;
        s.valued += r.value.is_some() as usize;
        if writes.iter().all(|&(wa, wb)| wb < a || wa > b) {
            s.quiescent += 1;
            s.quiescent_valued += r.value.is_some() as usize;
        }
    }
    s
}
