use std::collections::{BTreeSet, VecDeque};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::client::{default_share, ClientCtx, ClientOp, Outcome, Progress};
use crate::coding::{Field, FieldElement};
use crate::comm::{
    ChannelKind, ClientBuffers, GossipBuffers, GossipPayload, Outgoing, PongArrival, Request, ServerBuffers, Token,
    TokenChannel,
};
use crate::protocol::{Msg, MsgPhase, NodeId, Ping, Phase, QuorumConfig, Tag, TagTriple};
use crate::reset::{ResetAction, ResetAgent, ResetSignal};
use crate::server::{Bounds, ServerConfig, ServerState};

use super::cycles::CycleCounter;
use super::faults::{inject_transient, malicious_reply_filter};
use super::scenario::{Scenario, ScenarioError, ScriptOp, TimedFault};
use super::sched::Scheduler;
use super::trace::{Event, EventKind, FailReason, InitInfo, Trace};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RunningOp {
    pub id: u64,
    pub op: ClientOp,
    /// Present in the initial state rather than invoked.
    pub phantom: bool,
}

#[derive(Clone, Debug)]
pub struct NodeState {
    pub id: NodeId,
    pub crashed: bool,
    /// A crashed node's client never comes back, even after the server resumes.
    pub client_dead: bool,
    pub server: ServerState,
    pub gossip_out: GossipBuffers,
    pub sbuf: ServerBuffers,
    pub cbuf: ClientBuffers,
    pub op: Option<RunningOp>,
    pub reset: ResetAgent,
    pub malicious: bool,
    pub script: VecDeque<ScriptOp>,
    pub sleep_until: u64,
    // Monitor metadata, invisible to the protocol.
    /// `gossip_out.tx` was produced by the gossip handler.
    pub tx_genuine: bool,
    /// Step at which each accepted pong was produced by the server's handler.
    pub reply_step: Vec<Option<u64>>,
    /// Step of the current request phase's start.
    pub phase_init: Option<u64>,
}

#[derive(Clone, Debug)]
pub struct SystemState {
    pub nodes: Vec<NodeState>,
    pub channels: Vec<TokenChannel>,
}

impl SystemState {
    /// The safe initial state: empty storage, blank buffers, `(t0,t0,t0)` in flight.
    pub fn safe(sconf: ServerConfig) -> SystemState {
        let n = sconf.cfg.n;
        let nodes = sconf
            .cfg
            .nodes()
            .map(|id| NodeState {
                id,
                crashed: false,
                client_dead: false,
                server: ServerState::new(id, sconf),
                gossip_out: GossipBuffers::default(),
                sbuf: ServerBuffers::new(n),
                cbuf: ClientBuffers::new(n),
                op: None,
                reset: ResetAgent::new(id),
                malicious: false,
                script: VecDeque::new(),
                sleep_until: 0,
                tx_genuine: true,
                reply_step: vec![None; n],
                phase_init: None,
            })
            .collect();
        let mut channels = Vec::new();
        for from in sconf.cfg.nodes() {
            for to in sconf.cfg.nodes().filter(|&to| to != from) {
                channels.push(TokenChannel {
                    kind: ChannelKind::Gossip { from, to },
                    token: Token::GossipFwd { payload: GossipPayload::Triple(TagTriple::default()), sent: Some(0) },
                });
            }
        }
        for client in sconf.cfg.nodes() {
            for server in sconf.cfg.nodes() {
                channels.push(TokenChannel {
                    kind: ChannelKind::PingPong { client, server },
                    token: Token::Ping { ping: None, sent: Some(0) },
                });
            }
        }
        SystemState { nodes, channels }
    }

    pub fn node(&self, id: NodeId) -> &NodeState {
        &self.nodes[id.index()]
    }

    pub fn live(&self) -> BTreeSet<NodeId> {
        self.nodes.iter().filter(|n| !n.crashed).map(|n| n.id).collect()
    }

    /// Every tag occurring anywhere in the state.
    pub fn tags(&self) -> Vec<Tag> {
        let mut v = Vec::new();
        let msg = |v: &mut Vec<Tag>, m: &Msg| v.extend(m.tag);
        let ping = |v: &mut Vec<Tag>, p: &Option<Ping>| v.extend(p.and_then(|p| p.msg.tag));
        let triple = |v: &mut Vec<Tag>, t: &TagTriple| v.extend([t.pre, t.fin, t.finalized]);
        for nd in &self.nodes {
            v.extend(nd.server.records().map(|r| r.tag));
            nd.server.gossip.iter().for_each(|t| triple(&mut v, t));
            triple(&mut v, &nd.gossip_out.tx);
            nd.sbuf.ping_rx.iter().for_each(|p| ping(&mut v, p));
            nd.sbuf.pong_tx.iter().flatten().for_each(|m| msg(&mut v, m));
            nd.cbuf.pong_rx.iter().flatten().for_each(|m| msg(&mut v, m));
            nd.cbuf.aggregated.iter().for_each(|(_, m)| msg(&mut v, m));
            match nd.cbuf.ping_tx.as_ref().map(|o| &o.req) {
                Some(Request::Broadcast(m)) => msg(&mut v, m),
                Some(Request::PerServer(ms)) => ms.iter().for_each(|m| msg(&mut v, m)),
                None => {}
            }
            v.extend(nd.op.as_ref().and_then(|o| o.op.tag()));
            v.extend(nd.reset.outgoing().map(|s| s.tag()));
        }
        for ch in &self.channels {
            match &ch.token {
                Token::GossipFwd { payload: GossipPayload::Triple(t), .. } => triple(&mut v, t),
                Token::GossipFwd { payload: GossipPayload::Reset(s), .. } => v.push(s.tag()),
                Token::GossipFwd { .. } | Token::GossipBack { .. } => {}
                Token::Ping { ping: p, .. } => ping(&mut v, p),
                Token::Pong { ping: p, pong, .. } => {
                    ping(&mut v, p);
                    v.extend(pong.and_then(|m| m.tag));
                }
            }
        }
        v
    }
}

/// Deterministic discrete-event simulator. One step delivers one token (or
/// starts one client operation) and runs the resulting handlers atomically.
pub struct Simulator {
    sc: Scenario,
    field: Field,
    cfg: QuorumConfig,
    sconf: ServerConfig,
    st: SystemState,
    sched: Scheduler,
    proto_rng: ChaCha8Rng,
    fault_rng: ChaCha8Rng,
    step: u64,
    next_op: u64,
    events: Vec<Event>,
    cycles: CycleCounter,
    initial_tags: Option<BTreeSet<Tag>>,
    floor: Tag,
    reset_active: bool,
    last_reset_tag: Tag,
    timed: Vec<TimedFault>,
    timed_pos: usize,
    finished: bool,
}

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

/// Runs a scenario to completion or budget exhaustion.
pub fn run(sc: &Scenario) -> Result<Trace, ScenarioError> {
    let mut sim = Simulator::new(sc)?;
    while sim.advance() {}
    Ok(sim.into_trace())
}

impl Simulator {
    pub fn new(sc: &Scenario) -> Result<Simulator, ScenarioError> {
        sc.validate()?;
        let field = Field::new(sc.p).map_err(|e| ScenarioError::Invalid(e.to_string()))?;
        let cfg = sc.quorum_config();
        let sconf = ServerConfig {
            cfg,
            bounds: sc.bounded.then_some(Bounds { maxint: sc.maxint, delta: sc.delta }),
            default_element: default_share(&field, FieldElement(sc.v0)),
        };
        let mut st = SystemState::safe(sconf);
        for nd in st.nodes.iter_mut() {
            nd.script = sc.scripts[nd.id.index()].iter().copied().collect();
            nd.malicious = sc.faults.malicious.contains(&nd.id);
        }
        let mut timed = sc.faults.timed.clone();
        timed.sort_by_key(|t| t.at());
        let mut sim = Simulator {
            sched: Scheduler::new(sc.sched, sc.n, &sc.starve, sc.window, rng_for(sc.seed, 1)),
            proto_rng: rng_for(sc.seed, 2),
            fault_rng: rng_for(sc.seed, 3),
            sc: sc.clone(),
            field,
            cfg,
            sconf,
            st,
            step: 0,
            next_op: 1,
            events: Vec::new(),
            cycles: CycleCounter::new(sc.n),
            initial_tags: None,
            floor: Tag::T0,
            reset_active: false,
            last_reset_tag: Tag::T0,
            timed,
            timed_pos: 0,
            finished: false,
        };
        sim.initialize();
        Ok(sim)
    }

    fn initialize(&mut self) {
        let safe = self.sc.faults.is_safe_start();
        self.emit(
            0,
            EventKind::Init(InitInfo {
                n: self.sc.n,
                f: self.sc.f,
                e: self.sc.e,
                k: self.sc.k,
                p: self.sc.p,
                maxint: self.sc.maxint,
                delta: self.sc.delta,
                bounded: self.sc.bounded,
                v0: self.sc.v0,
                sched: self.sc.sched,
                safe,
                seed: self.sc.seed,
            }),
        );
        let mut phantoms = Vec::new();
        if let Some(spec) = self.sc.faults.transient {
            phantoms = inject_transient(&mut self.st, &spec, self.sc.p, &mut self.fault_rng, &mut self.next_op);
        }
        for (id, r) in self.sc.faults.plants.clone() {
            let srv = &mut self.st.nodes[id.index()].server;
            let mut recs: Vec<_> = srv.records().filter(|x| x.tag != r.tag).collect();
            recs.push(r);
            srv.set_records(recs);
        }
        for i in 0..self.sc.n {
            let (size, digest) = (self.st.nodes[i].server.len(), self.st.nodes[i].server.digest());
            self.emit(i as u32 + 1, EventKind::Store { size, digest });
        }
        for (id, op) in phantoms {
            let run = self.st.node(id).op.as_ref().map(|r| &r.op);
            let value = match run {
                Some(ClientOp::Write(w)) => Some(w.secret),
                _ => None,
            };
            let tag = run.and_then(ClientOp::tag);
            self.emit(id.0, EventKind::Phantom { op, value, tag });
            self.emit(id.0, EventKind::Active { on: true });
        }
        if !safe {
            let t0: BTreeSet<Tag> = self.st.tags().into_iter().collect();
            self.floor = t0.iter().next_back().copied().unwrap_or(Tag::T0);
            self.initial_tags = Some(t0);
            self.emit(0, EventKind::Floor { tag: self.floor });
        }
        self.reset_active = self.reset_in_progress();
    }

    pub fn state(&self) -> &SystemState {
        &self.st
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn step_index(&self) -> u64 {
        self.step
    }

    /// Replaces the remaining script of a client.
    pub fn set_script(&mut self, node: NodeId, ops: impl IntoIterator<Item = ScriptOp>) {
        if let Some(nd) = self.st.nodes.get_mut(node.index()) {
            nd.script = ops.into_iter().collect();
        }
    }

    pub fn into_trace(self) -> Trace {
        Trace { events: self.events }
    }

    fn emit(&mut self, node: u32, kind: EventKind) {
        let ev = Event { step: self.step, cycle: self.cycles.index(), node, kind };
        let boundary = self.cycles.observe(&ev);
        self.events.push(ev);
        if let Some(index) = boundary {
            self.events.push(Event { step: self.step, cycle: index, node: 0, kind: EventKind::Cycle { index } });
        }
    }

    fn reset_in_progress(&self) -> bool {
        let live = self.st.live();
        self.st.nodes.iter().any(|n| !n.crashed && !n.reset.is_idle())
            || self.st.channels.iter().any(|ch| {
                matches!(ch.token, Token::GossipFwd { payload: GossipPayload::Reset(_), .. })
                    && live.contains(&ch.receiver())
            })
    }

    fn overflow_present(&self) -> bool {
        let Some(top) = self.sconf.t_top() else { return false };
        self.st
            .nodes
            .iter()
            .any(|n| !n.crashed && n.server.max_phase(&Phase::ALL) >= top)
    }

    fn all_done(&self) -> bool {
        self.timed_pos == self.timed.len()
            && !self.reset_active
            && self
                .st
                .nodes
                .iter()
                .all(|n| n.crashed || n.client_dead || (n.op.is_none() && n.script.is_empty()))
    }

    fn client_enabled(&self, nd: &NodeState) -> bool {
        if nd.crashed || nd.client_dead || !nd.reset.is_idle() {
            return false;
        }
        match &nd.op {
            Some(_) => nd.cbuf.ping_tx.is_none(),
            None => !nd.script.is_empty() && self.step >= nd.sleep_until,
        }
    }

    /// Executes one step. Returns `false` once the run is over.
    pub fn advance(&mut self) -> bool {
        if self.finished {
            return false;
        }
        while self.timed_pos < self.timed.len() && self.timed[self.timed_pos].at() <= self.step {
            let t = self.timed[self.timed_pos];
            self.timed_pos += 1;
            match t {
                TimedFault::Crash { node, .. } => self.crash(node),
                TimedFault::Resume { node, .. } => self.resume(node),
            }
        }
        if self.all_done() {
            return self.finish(true);
        }
        if self.step >= self.sc.budget {
            return self.finish(false);
        }
        let nch = self.st.channels.len();
        let mut enabled: Vec<(usize, NodeId)> = Vec::with_capacity(nch + self.sc.n);
        for (c, ch) in self.st.channels.iter().enumerate() {
            let r = ch.receiver();
            if !self.st.node(r).crashed {
                enabled.push((c, r));
            }
        }
        for nd in &self.st.nodes {
            if self.client_enabled(nd) {
                enabled.push((nch + nd.id.index(), nd.id));
            }
        }
        let trigger = self.sc.sched == super::scenario::SchedulerKind::SeldomFair
            && (self.reset_active || self.overflow_present());
        let Some(actor) = self.sched.pick(&enabled, self.step, trigger) else {
            return self.finish(false);
        };
        if actor < nch {
            self.exec_channel(actor);
        } else {
            self.exec_client(NodeId::from_index(actor - nch));
        }
        if self.reset_active && !self.reset_in_progress() {
            self.reset_active = false;
            let tag = self.last_reset_tag;
            self.emit(0, EventKind::ResetComplete { tag });
        }
        self.track_floor();
        self.step += 1;
        true
    }

    fn finish(&mut self, complete: bool) -> bool {
        let steps = self.step;
        self.emit(0, EventKind::End { complete, steps });
        self.finished = true;
        false
    }

    fn track_floor(&mut self) {
        let Some(t0) = &self.initial_tags else { return };
        if self.floor == Tag::T0 {
            return;
        }
        let m = self
            .st
            .tags()
            .into_iter()
            .filter(|t| t0.contains(t))
            .max()
            .unwrap_or(Tag::T0);
        if m < self.floor {
            self.floor = m;
            self.emit(0, EventKind::Floor { tag: m });
        }
    }

    fn exec_channel(&mut self, c: usize) {
        let kind = self.st.channels[c].kind;
        let token = std::mem::replace(&mut self.st.channels[c].token, Token::GossipBack { sent: None });
        let next = match (kind, token) {
            (ChannelKind::Gossip { from, to }, Token::GossipFwd { payload, sent }) => {
                self.gossip_arrival(from, to, payload, sent);
                Token::GossipBack { sent }
            }
            (ChannelKind::Gossip { from, to }, Token::GossipBack { sent }) => {
                if let Some(dep) = sent {
                    self.emit(from.0, EventKind::Rtt { peer: to, dep, client: false });
                }
                self.gossip_departure(from)
            }
            (ChannelKind::PingPong { client, server }, Token::Ping { ping, sent }) => {
                let (ping, pong) = self.ping_arrival(client, server, ping);
                let replied = pong.is_some().then_some(self.step);
                Token::Pong { ping, pong, ping_sent: sent, replied }
            }
            (ChannelKind::PingPong { client, server }, Token::Pong { ping, pong, ping_sent, replied }) => {
                if let Some(dep) = ping_sent {
                    self.emit(client.0, EventKind::Rtt { peer: server, dep, client: true });
                }
                self.pong_arrival(client, server, ping, pong, replied);
                let nd = self.st.node(client);
                let ping = if nd.reset.is_idle() { nd.cbuf.departure(server) } else { None };
                Token::Ping { ping, sent: Some(self.step) }
            }
            (_, t) => t,
        };
        self.st.channels[c].token = next;
    }

    fn gossip_departure(&mut self, from: NodeId) -> Token {
        let nd = self.st.node(from);
        match nd.reset.outgoing() {
            Some(sig) => Token::GossipFwd { payload: GossipPayload::Reset(sig), sent: Some(self.step) },
            None => Token::GossipFwd {
                payload: GossipPayload::Triple(nd.gossip_out.tx),
                sent: nd.tx_genuine.then_some(self.step),
            },
        }
    }

    fn gossip_arrival(&mut self, from: NodeId, to: NodeId, payload: GossipPayload, sent: Option<u64>) {
        match payload {
            GossipPayload::Empty => {}
            GossipPayload::Reset(sig) => self.reset_message(to, from, Some(sig)),
            GossipPayload::Triple(recv) => {
                if !self.st.node(to).reset.is_idle() {
                    self.reset_message(to, from, None);
                    return;
                }
                let nd = &mut self.st.nodes[to.index()];
                nd.server.receive_gossip(from, recv);
                let Some(out) = nd.server.on_gossip() else { return };
                nd.gossip_out.gossip(out.emit);
                nd.tx_genuine = true;
                let size = nd.server.len();
                self.emit(to.0, EventKind::Gossip { from, recv, emit: out.emit, authentic: sent.is_some(), size });
                if let Some(t) = out.reset {
                    self.start_reset(to, t);
                }
            }
        }
    }

    fn ping_arrival(&mut self, client: NodeId, server: NodeId, ping: Option<Ping>) -> (Option<Ping>, Option<Msg>) {
        let nd = &mut self.st.nodes[server.index()];
        if !nd.reset.is_idle() || !nd.server.enabled {
            nd.sbuf.arrival(client, None);
            return (None, None);
        }
        if let Some(req) = nd.sbuf.arrival(client, ping) {
            if let Some(m) = nd.server.handle(&req) {
                nd.sbuf.reply(client, m);
            }
            let reply = nd.sbuf.pong_tx[client.index()];
            let (size, digest) = (nd.server.len(), nd.server.digest());
            self.emit(server.0, EventKind::Handler { from: client, req, reply, size, digest });
        }
        let nd = &self.st.nodes[server.index()];
        let (ping, pong) = nd.sbuf.departure(client);
        let pong = match pong {
            Some(m) if nd.malicious => Some(malicious_reply_filter(&self.field, m, &mut self.fault_rng)),
            p => p,
        };
        (ping, pong)
    }

    fn pong_arrival(&mut self, client: NodeId, server: NodeId, ping: Option<Ping>, pong: Option<Msg>, replied: Option<u64>) {
        let cfg = self.cfg;
        let nd = &mut self.st.nodes[client.index()];
        if !nd.reset.is_idle() {
            return;
        }
        if nd.op.is_none() {
            // No request can be outstanding without an operation.
            nd.cbuf.clear();
            nd.cbuf.aggregated.clear();
            return;
        }
        let had = nd.cbuf.ping_tx.clone();
        let res = nd.cbuf.arrival(server, ping, pong, &cfg);
        if res != PongArrival::Ignored {
            nd.reply_step[server.index()] = replied;
        }
        let PongArrival::Quorum(agg) = res else { return };
        if let Some(out) = had {
            let genuine = nd.phase_init.is_some_and(|pi| {
                agg.iter()
                    .all(|(j, _)| nd.reply_step[j.index()].is_some_and(|d| d >= pi))
            });
            let hygiene = nd.cbuf.is_clean();
            let quorum = agg.iter().map(|(j, _)| *j).collect();
            let phase = out.phase().unwrap_or(MsgPhase::Qry);
            self.emit(client.0, EventKind::Qrm { phase, quorum, genuine, hygiene });
        }
        let nd = &mut self.st.nodes[client.index()];
        nd.reply_step.iter_mut().for_each(|s| *s = None);
        nd.phase_init = None;
        let agg = nd.cbuf.take_aggregated();
        if nd.op.is_some() {
            self.advance_op(client, agg);
        }
    }

    fn advance_op(&mut self, id: NodeId, agg: Vec<(NodeId, Msg)>) {
        let ctx = ClientCtx { field: &self.field, cfg: &self.cfg };
        let nd = &mut self.st.nodes[id.index()];
        let Some(run) = nd.op.as_mut() else { return };
        let op_id = run.id;
        match run.op.advance(&agg, &ctx, &mut self.proto_rng) {
            Progress::Next(out) => {
                let tag = run.op.tag();
                self.start_phase(id, out);
                let phase = self.st.node(id).cbuf.ping_tx.as_ref().and_then(Outgoing::phase).unwrap_or(MsgPhase::Qry);
                self.emit(id.0, EventKind::OpPhase { op: op_id, phase, tag });
            }
            Progress::Done(outcome) => {
                nd.op = None;
                let kind = match outcome {
                    Outcome::Wrote { tag } => EventKind::Respond { op: op_id, tag, value: None, elements: 0 },
                    Outcome::Read { tag, value, elements } => EventKind::Respond { op: op_id, tag, value, elements },
                };
                self.emit(id.0, kind);
                self.emit(id.0, EventKind::Active { on: false });
            }
        }
    }

    fn start_phase(&mut self, id: NodeId, out: Outgoing) {
        let step = self.step;
        let nd = &mut self.st.nodes[id.index()];
        nd.cbuf.phase_init(out);
        nd.phase_init = Some(step);
        nd.reply_step.iter_mut().for_each(|s| *s = None);
    }

    fn exec_client(&mut self, id: NodeId) {
        let nd = &mut self.st.nodes[id.index()];
        if nd.op.is_some() {
            let agg = nd.cbuf.take_aggregated();
            self.advance_op(id, agg);
            return;
        }
        let Some(next) = nd.script.pop_front() else { return };
        let op = match next {
            ScriptOp::Sleep(s) => {
                nd.sleep_until = self.step.saturating_add(s);
                return;
            }
            ScriptOp::Write(v) => ClientOp::write(id, FieldElement(v)),
            ScriptOp::Read => ClientOp::read(id),
        };
        let op_id = self.next_op;
        self.next_op += 1;
        let out = op.start();
        let value = match &op {
            ClientOp::Write(w) => Some(w.secret),
            ClientOp::Read(_) => None,
        };
        nd.op = Some(RunningOp { id: op_id, op, phantom: false });
        self.emit(id.0, EventKind::Invoke { op: op_id, value });
        self.emit(id.0, EventKind::Active { on: true });
        self.start_phase(id, out);
        self.emit(id.0, EventKind::OpPhase { op: op_id, phase: MsgPhase::Qry, tag: None });
    }

    fn abort_op(&mut self, id: NodeId, reason: FailReason) {
        if let Some(run) = self.st.nodes[id.index()].op.take() {
            self.emit(id.0, EventKind::Fail { op: run.id, reason });
            self.emit(id.0, EventKind::Active { on: false });
        }
    }

    fn crash(&mut self, id: NodeId) {
        if self.st.node(id).crashed {
            return;
        }
        self.abort_op(id, FailReason::Crash);
        let nd = &mut self.st.nodes[id.index()];
        nd.crashed = true;
        nd.client_dead = true;
        nd.script.clear();
        nd.cbuf.clear();
        self.emit(id.0, EventKind::Crash);
        self.poll_resets();
    }

    fn resume(&mut self, id: NodeId) {
        let nd = &mut self.st.nodes[id.index()];
        if !nd.crashed {
            return;
        }
        nd.crashed = false;
        nd.server.wipe();
        nd.server.enabled = true;
        nd.sbuf.clear();
        nd.gossip_out = GossipBuffers::default();
        nd.tx_genuine = true;
        nd.reset = ResetAgent::new(id);
        let digest = nd.server.digest();
        self.emit(id.0, EventKind::Resume);
        self.emit(id.0, EventKind::Store { size: 0, digest });
    }

    fn poll_resets(&mut self) {
        let live = self.st.live();
        for i in 0..self.st.nodes.len() {
            if self.st.nodes[i].crashed {
                continue;
            }
            let acts = self.st.nodes[i].reset.poll(&live);
            self.apply_reset(NodeId::from_index(i), acts);
        }
    }

    fn start_reset(&mut self, id: NodeId, t: Tag) {
        self.emit(id.0, EventKind::ResetInit { tag: t });
        self.reset_active = true;
        let live = self.st.live();
        let acts = self.st.nodes[id.index()].reset.global_reset(t, &live);
        self.apply_reset(id, acts);
    }

    fn reset_message(&mut self, id: NodeId, from: NodeId, sig: Option<ResetSignal>) {
        let live = self.st.live();
        let acts = self.st.nodes[id.index()].reset.on_message(from, sig, &live);
        if !acts.is_empty() {
            self.reset_active = true;
        }
        self.apply_reset(id, acts);
    }

    fn apply_reset(&mut self, id: NodeId, acts: Vec<ResetAction>) {
        for a in acts {
            match a {
                ResetAction::Disable(tag) => {
                    self.abort_op(id, FailReason::Reset);
                    let nd = &mut self.st.nodes[id.index()];
                    nd.server.enabled = false;
                    nd.cbuf.clear();
                    nd.cbuf.aggregated.clear();
                    nd.sbuf.clear();
                    nd.phase_init = None;
                    for ch in self.st.channels.iter_mut() {
                        let touches = match ch.kind {
                            ChannelKind::Gossip { from, to } => from == id || to == id,
                            ChannelKind::PingPong { client, server } => client == id || server == id,
                        };
                        if touches {
                            ch.flush();
                        }
                    }
                    self.emit(id.0, EventKind::Frozen { tag });
                }
                ResetAction::LocalReset(tag) => {
                    let nd = &mut self.st.nodes[id.index()];
                    nd.server.local_reset(tag);
                    nd.gossip_out = GossipBuffers::default();
                    nd.tx_genuine = true;
                    let (size, digest) = (nd.server.len(), nd.server.digest());
                    self.last_reset_tag = tag;
                    self.emit(id.0, EventKind::LocalReset { tag });
                    self.emit(id.0, EventKind::Store { size, digest });
                }
                ResetAction::Enable(tag) => {
                    self.st.nodes[id.index()].server.enabled = true;
                    self.emit(id.0, EventKind::Resumed { tag });
                }
            }
        }
    }
}
