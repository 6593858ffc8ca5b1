use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use crate::coding::{Field, FieldElement};
use crate::protocol::{NodeId, Phase, QuorumConfig, Record, Tag};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SchedulerKind {
    /// Round-robin over enabled steps.
    Fair,
    /// Seeded weighted choice; nodes listed in `starve` never get a step.
    WeightedUnfair,
    /// Weighted until an overflow or reset shows up, then round-robin for a window.
    SeldomFair,
}

impl fmt::Display for SchedulerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SchedulerKind::Fair => "fair",
            SchedulerKind::WeightedUnfair => "weighted-unfair",
            SchedulerKind::SeldomFair => "seldom-fair",
        })
    }
}

impl FromStr for SchedulerKind {
    type Err = String;
    fn from_str(s: &str) -> Result<SchedulerKind, String> {
        match s {
            "fair" => Ok(SchedulerKind::Fair),
            "weighted-unfair" => Ok(SchedulerKind::WeightedUnfair),
            "seldom-fair" => Ok(SchedulerKind::SeldomFair),
            _ => Err(format!("unknown scheduler {s:?}")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ScriptOp {
    Write(u64),
    Read,
    /// Idle for this many steps before the next operation.
    Sleep(u64),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TimedFault {
    Crash { node: NodeId, at: u64 },
    Resume { node: NodeId, at: u64 },
}

impl TimedFault {
    pub fn at(&self) -> u64 {
        match self {
            TimedFault::Crash { at, .. } | TimedFault::Resume { at, .. } => *at,
        }
    }
}

/// Which parts of the state a transient fault overwrites.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CorruptScope {
    pub storage: bool,
    pub gossip: bool,
    pub buffers: bool,
    pub tokens: bool,
    pub clients: bool,
    pub reset: bool,
}

impl CorruptScope {
    /// Everything except reset-protocol state.
    pub const ALL: CorruptScope = CorruptScope {
        storage: true,
        gossip: true,
        buffers: true,
        tokens: true,
        clients: true,
        reset: false,
    };

    pub const NONE: CorruptScope = CorruptScope {
        storage: false,
        gossip: false,
        buffers: false,
        tokens: false,
        clients: false,
        reset: false,
    };

    fn names(&self) -> Vec<&'static str> {
        let mut v = Vec::new();
        for (on, name) in [
            (self.storage, "storage"),
            (self.gossip, "gossip"),
            (self.buffers, "buffers"),
            (self.tokens, "tokens"),
            (self.clients, "clients"),
            (self.reset, "reset"),
        ] {
            if on {
                v.push(name);
            }
        }
        v
    }
}

impl FromStr for CorruptScope {
    type Err = String;
    fn from_str(s: &str) -> Result<CorruptScope, String> {
        let mut sc = CorruptScope::NONE;
        for part in s.split(',') {
            match part {
                "none" => {}
                "all" => {
                    let reset = sc.reset;
                    sc = CorruptScope { reset, ..CorruptScope::ALL };
                }
                "storage" => sc.storage = true,
                "gossip" => sc.gossip = true,
                "buffers" => sc.buffers = true,
                "tokens" => sc.tokens = true,
                "clients" => sc.clients = true,
                "reset" => sc.reset = true,
                _ => return Err(format!("unknown corruption scope {part:?}")),
            }
        }
        Ok(sc)
    }
}

/// A one-time corruption of the initial state.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TransientSpec {
    /// Largest counter used in forged tags.
    pub ceiling: u64,
    /// Records per storage: exactly this many when `exact`, otherwise up to it.
    pub records: usize,
    pub exact: bool,
    pub scope: CorruptScope,
}

impl Default for TransientSpec {
    fn default() -> TransientSpec {
        TransientSpec { ceiling: 16, records: 6, exact: false, scope: CorruptScope::ALL }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct FaultScript {
    pub timed: Vec<TimedFault>,
    pub malicious: BTreeSet<NodeId>,
    pub transient: Option<TransientSpec>,
    /// Records added to a server's initial storage.
    pub plants: Vec<(NodeId, Record)>,
}

impl FaultScript {
    pub fn is_safe_start(&self) -> bool {
        self.transient.is_none() && self.plants.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Scenario {
    pub n: usize,
    pub f: usize,
    pub e: usize,
    pub k: usize,
    pub p: u64,
    pub maxint: u64,
    pub delta: usize,
    pub bounded: bool,
    pub v0: u64,
    pub seed: u64,
    pub sched: SchedulerKind,
    pub budget: u64,
    /// Fair steps granted after an overflow or reset under `SeldomFair`.
    pub window: u64,
    pub starve: BTreeSet<NodeId>,
    /// Per node, indexed by `NodeId::index`.
    pub scripts: Vec<Vec<ScriptOp>>,
    pub faults: FaultScript,
}

pub const DEFAULT_BUDGET: u64 = 1_000_000;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("line {line}: {msg}")]
pub struct ParseError {
    pub line: usize,
    pub msg: String,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ScenarioError {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("invalid scenario: {0}")]
    Invalid(String),
}

impl Scenario {
    /// A scenario with no scripts and no faults.
    pub fn new(n: usize, f: usize, e: usize, k: usize) -> Scenario {
        Scenario {
            n,
            f,
            e,
            k,
            p: 257,
            maxint: u64::MAX,
            delta: 2,
            bounded: false,
            v0: 0,
            seed: 0,
            sched: SchedulerKind::Fair,
            budget: DEFAULT_BUDGET,
            window: 20_000,
            starve: BTreeSet::new(),
            scripts: vec![Vec::new(); n],
            faults: FaultScript::default(),
        }
    }

    pub fn quorum_config(&self) -> QuorumConfig {
        QuorumConfig { n: self.n, f: self.f, e: self.e, k: self.k }
    }

    pub fn script(&mut self, node: u32) -> &mut Vec<ScriptOp> {
        &mut self.scripts[node as usize - 1]
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        let bad = |m: String| Err(ScenarioError::Invalid(m));
        self.quorum_config().validate().map_err(|e| ScenarioError::Invalid(e.to_string()))?;
        if self.n > 64 {
            return bad("at most 64 nodes are supported".into());
        }
        Field::new(self.p).map_err(|e| ScenarioError::Invalid(e.to_string()))?;
        if self.n as u64 >= self.p {
            return bad(format!("need N < p, got N={} p={}", self.n, self.p));
        }
        if self.v0 >= self.p {
            return bad(format!("v0={} is not below p={}", self.v0, self.p));
        }
        if self.bounded && self.maxint == 0 {
            return bad("maxint must be positive".into());
        }
        if self.scripts.len() != self.n {
            return bad("one script per node required".into());
        }
        for (i, s) in self.scripts.iter().enumerate() {
            for op in s {
                if let ScriptOp::Write(v) = op {
                    if *v >= self.p {
                        return bad(format!("client {} writes {v}, not below p={}", i + 1, self.p));
                    }
                }
            }
        }
        let in_range = |id: NodeId| (1..=self.n as u32).contains(&id.0);
        if let Some(id) = self.starve.iter().find(|id| !in_range(**id)) {
            return bad(format!("starved node {id} out of range"));
        }
        if self.faults.malicious.len() > self.e {
            return bad(format!("{} malicious servers exceed e={}", self.faults.malicious.len(), self.e));
        }
        if let Some(id) = self.faults.malicious.iter().find(|id| !in_range(**id)) {
            return bad(format!("malicious node {id} out of range"));
        }
        for (id, r) in &self.faults.plants {
            if !in_range(*id) || r.tag.owner().is_some_and(|o| !in_range(o)) {
                return bad(format!("planted record at {id} out of range"));
            }
            if r.element.is_some_and(|w| w.0 >= self.p) {
                return bad("planted element not below p".into());
            }
        }
        let mut timed = self.faults.timed.clone();
        timed.sort_by_key(|t| t.at());
        let mut down: BTreeSet<NodeId> = BTreeSet::new();
        let mut ever: BTreeSet<NodeId> = BTreeSet::new();
        for t in timed {
            match t {
                TimedFault::Crash { node, .. } => {
                    if !in_range(node) || !down.insert(node) {
                        return bad(format!("crash of node {node} is out of range or repeated"));
                    }
                    ever.insert(node);
                    if down.len() > self.f {
                        return bad(format!("more than f={} servers crashed at once", self.f));
                    }
                }
                TimedFault::Resume { node, .. } => {
                    if !down.remove(&node) {
                        return bad(format!("resume of node {node} which is not crashed"));
                    }
                }
            }
        }
        if let Some(tr) = &self.faults.transient {
            if tr.ceiling == 0 {
                return bad("corruption ceiling must be positive".into());
            }
        }
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Scenario, ScenarioError> {
        let mut sc = Scenario::new(5, 1, 1, 1);
        let mut header: Vec<(usize, String, String)> = Vec::new();
        let mut body: Vec<(usize, Vec<&str>)> = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let toks: Vec<&str> = line.split_whitespace().collect();
            if body.is_empty() && toks.iter().all(|t| t.contains('=')) {
                for t in toks {
                    let (k, v) = t.split_once('=').expect("checked above");
                    header.push((i + 1, k.to_string(), v.to_string()));
                }
            } else {
                body.push((i + 1, toks));
            }
        }
        let perr = |line: usize, msg: String| ScenarioError::Parse(ParseError { line, msg });
        let mut explicit_bounded = None;
        let mut maxint_given = false;
        for (line, k, v) in &header {
            let line = *line;
            let num = |v: &str| v.parse::<u64>().map_err(|_| perr(line, format!("bad value for {k}: {v:?}")));
            match k.as_str() {
                "n" => sc.n = num(v)? as usize,
                "f" => sc.f = num(v)? as usize,
                "e" => sc.e = num(v)? as usize,
                "k" => sc.k = num(v)? as usize,
                "p" => sc.p = num(v)?,
                "maxint" => {
                    sc.maxint = num(v)?;
                    maxint_given = true;
                }
                "delta" => sc.delta = num(v)? as usize,
                "v0" => sc.v0 = num(v)?,
                "seed" => sc.seed = num(v)?,
                "budget" => sc.budget = num(v)?,
                "window" => sc.window = num(v)?,
                "sched" => sc.sched = v.parse().map_err(|m| perr(line, m))?,
                "bounded" => {
                    explicit_bounded = Some(match v.as_str() {
                        "1" | "true" => true,
                        "0" | "false" => false,
                        _ => return Err(perr(line, format!("bad value for bounded: {v:?}"))),
                    })
                }
                "starve" => {
                    for s in v.split(',').filter(|s| !s.is_empty()) {
                        sc.starve
                            .insert(s.parse().map_err(|_| perr(line, format!("bad node id {s:?}")))?);
                    }
                }
                _ => return Err(perr(line, format!("unknown header key {k:?}"))),
            }
        }
        sc.bounded = explicit_bounded.unwrap_or(maxint_given);
        if sc.n == 0 || sc.n > 64 {
            return Err(perr(header.first().map_or(1, |h| h.0), format!("n={} out of range 1..=64", sc.n)));
        }
        sc.scripts = vec![Vec::new(); sc.n];
        for (line, toks) in body {
            parse_body_line(&mut sc, &toks).map_err(|m| perr(line, m))?;
        }
        sc.validate()?;
        Ok(sc)
    }

    /// Stable 64-bit digest of the canonical text form.
    pub fn digest(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for b in self.to_string().bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x100_0000_01b3);
        }
        h
    }
}

fn node(s: &str, n: usize) -> Result<NodeId, String> {
    let id: NodeId = s.parse().map_err(|_| format!("bad node id {s:?}"))?;
    if id.0 as usize > n {
        return Err(format!("node {id} out of range 1..={n}"));
    }
    Ok(id)
}

fn num(s: &str) -> Result<u64, String> {
    s.parse().map_err(|_| format!("bad number {s:?}"))
}

fn parse_body_line(sc: &mut Scenario, t: &[&str]) -> Result<(), String> {
    match t {
        ["client", id, rest @ ..] => {
            let id = node(id, sc.n)?;
            let op = match rest {
                ["write", v] => ScriptOp::Write(num(v)?),
                ["read"] => ScriptOp::Read,
                ["sleep", s] => ScriptOp::Sleep(num(s)?),
                _ => return Err(format!("bad client line: {}", t.join(" "))),
            };
            sc.scripts[id.index()].push(op);
        }
        ["fault", "crash", id, "at", s] => {
            sc.faults.timed.push(TimedFault::Crash { node: node(id, sc.n)?, at: num(s)? });
        }
        ["fault", "resume", id, "at", s] => {
            sc.faults.timed.push(TimedFault::Resume { node: node(id, sc.n)?, at: num(s)? });
        }
        ["fault", "malicious", id] => {
            sc.faults.malicious.insert(node(id, sc.n)?);
        }
        ["fault", "transient", opts @ ..] => {
            let mut tr = TransientSpec::default();
            for o in opts {
                let (k, v) = o.split_once('=').ok_or_else(|| format!("expected key=value, got {o:?}"))?;
                match k {
                    "ceiling" => tr.ceiling = num(v)?,
                    "records" => tr.records = num(v)? as usize,
                    "exact" => tr.exact = matches!(v, "1" | "true"),
                    "scope" => tr.scope = v.parse()?,
                    _ => return Err(format!("unknown transient option {k:?}")),
                }
            }
            sc.faults.transient = Some(tr);
        }
        ["fault", "plant", id, tag, phase, rest @ ..] => {
            let tag: Tag = tag.parse().map_err(|e: crate::protocol::ParseValueError| e.to_string())?;
            let phase: Phase = phase.parse().map_err(|e: crate::protocol::ParseValueError| e.to_string())?;
            let element = match rest {
                [] => None,
                [w] => Some(FieldElement(num(w)?)),
                _ => return Err(format!("bad plant line: {}", t.join(" "))),
            };
            sc.faults.plants.push((node(id, sc.n)?, Record { tag, element, phase }));
        }
        _ => return Err(format!("unrecognized line: {}", t.join(" "))),
    }
    Ok(())
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "n={} f={} e={} k={} p={} maxint={} delta={} bounded={} v0={} seed={} sched={} budget={} window={}",
            self.n,
            self.f,
            self.e,
            self.k,
            self.p,
            self.maxint,
            self.delta,
            self.bounded as u8,
            self.v0,
            self.seed,
            self.sched,
            self.budget,
            self.window
        )?;
        if !self.starve.is_empty() {
            let s: Vec<String> = self.starve.iter().map(|n| n.to_string()).collect();
            write!(f, " starve={}", s.join(","))?;
        }
        writeln!(f)?;
        for (i, script) in self.scripts.iter().enumerate() {
            for op in script {
                match op {
                    ScriptOp::Write(v) => writeln!(f, "client {} write {v}", i + 1)?,
                    ScriptOp::Read => writeln!(f, "client {} read", i + 1)?,
                    ScriptOp::Sleep(s) => writeln!(f, "client {} sleep {s}", i + 1)?,
                }
            }
        }
        for t in &self.faults.timed {
            match t {
                TimedFault::Crash { node, at } => writeln!(f, "fault crash {node} at {at}")?,
                TimedFault::Resume { node, at } => writeln!(f, "fault resume {node} at {at}")?,
            }
        }
        for m in &self.faults.malicious {
            writeln!(f, "fault malicious {m}")?;
        }
        if let Some(tr) = &self.faults.transient {
            let scope = tr.scope.names();
            writeln!(
                f,
                "fault transient ceiling={} records={} exact={} scope={}",
                tr.ceiling,
                tr.records,
                tr.exact as u8,
                if scope.is_empty() { "none".to_string() } else { scope.join(",") }
            )?;
        }
        for (id, r) in &self.faults.plants {
            write!(f, "fault plant {id} {} {}", r.tag, r.phase)?;
            if let Some(w) = r.element {
                write!(f, " {w}")?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}
