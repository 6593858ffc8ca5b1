use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::client::{ClientOp, ReadCursor, ReaderOp, WriteCursor, WriterOp};
use crate::coding::{Field, FieldElement};
use crate::comm::{ChannelKind, GossipPayload, Outgoing, Request, Token};
use crate::protocol::{Msg, MsgPhase, NodeId, Phase, Ping, Record, Role, Tag, TagTriple};
use crate::reset::{ResetPhase, ResetSignal};

use super::engine::{RunningOp, SystemState};
use super::scenario::TransientSpec;

/// Replaces the data field of an element-bearing reply with a different
/// field value. Tags, phases and element-free replies pass through.
pub fn malicious_reply_filter<R: Rng + ?Sized>(field: &Field, reply: Msg, rng: &mut R) -> Msg {
    match reply.word {
        Some(w) => {
            let p = field.modulus();
            let shift = rng.gen_range(1..p);
            Msg { word: Some(FieldElement((w.0 + shift) % p)), ..reply }
        }
        None => reply,
    }
}

/// Draws arbitrary well-typed values with tag counters up to `ceiling`.
struct Forge<'a, R: Rng> {
    rng: &'a mut R,
    n: usize,
    p: u64,
    ceiling: u64,
}

impl<R: Rng> Forge<'_, R> {
    fn node(&mut self) -> NodeId {
        NodeId(self.rng.gen_range(1..=self.n as u32))
    }

    fn tag(&mut self) -> Tag {
        if self.rng.gen_ratio(1, 8) {
            Tag::T0
        } else {
            Tag::new(self.rng.gen_range(1..=self.ceiling), self.node())
        }
    }

    fn opt_tag(&mut self) -> Option<Tag> {
        (!self.rng.gen_ratio(1, 6)).then(|| self.tag())
    }

    fn elem(&mut self) -> FieldElement {
        FieldElement(self.rng.gen_range(0..self.p))
    }

    fn opt_elem(&mut self) -> Option<FieldElement> {
        (!self.rng.gen_ratio(1, 4)).then(|| self.elem())
    }

    fn phase(&mut self) -> Phase {
        *Phase::ALL.choose(self.rng).expect("nonempty")
    }

    fn msg_phase(&mut self) -> MsgPhase {
        *[MsgPhase::Qry, MsgPhase::Pre, MsgPhase::Fin, MsgPhase::Finalized]
            .choose(self.rng)
            .expect("nonempty")
    }

    fn role(&mut self) -> Role {
        if self.rng.gen() {
            Role::Writer
        } else {
            Role::Reader
        }
    }

    fn msg(&mut self) -> Msg {
        Msg::new(self.opt_tag(), self.opt_elem(), self.msg_phase())
    }

    fn opt_msg(&mut self) -> Option<Msg> {
        self.rng.gen::<bool>().then(|| self.msg())
    }

    fn opt_ping(&mut self) -> Option<Ping> {
        self.rng.gen::<bool>().then(|| Ping { role: self.role(), msg: self.msg() })
    }

    fn triple(&mut self) -> TagTriple {
        TagTriple::new(self.tag(), self.tag(), self.tag())
    }

    fn outgoing(&mut self) -> Option<Outgoing> {
        if self.rng.gen_ratio(1, 3) {
            return None;
        }
        let role = self.role();
        let req = if self.rng.gen() {
            Request::Broadcast(self.msg())
        } else {
            Request::PerServer((0..self.n).map(|_| self.msg()).collect())
        };
        Some(Outgoing { role, req })
    }

    fn records(&mut self, spec: &TransientSpec) -> Vec<Record> {
        let distinct = (self.ceiling as u128 * self.n as u128).min(usize::MAX as u128) as usize;
        let want = if spec.exact { spec.records } else { self.rng.gen_range(0..=spec.records) };
        let want = want.min(distinct);
        let mut tags = BTreeSet::new();
        while tags.len() < want {
            tags.insert(Tag::new(self.rng.gen_range(1..=self.ceiling), self.node()));
        }
        tags.into_iter()
            .map(|tag| Record { tag, element: self.opt_elem(), phase: self.phase() })
            .collect()
    }

    fn op(&mut self, node: NodeId) -> ClientOp {
        if self.rng.gen() {
            let cursor = *[WriteCursor::Query, WriteCursor::Pre, WriteCursor::Fin, WriteCursor::Finalized]
                .choose(self.rng)
                .expect("nonempty");
            let tag = (cursor != WriteCursor::Query).then(|| self.tag());
            ClientOp::Write(WriterOp { writer: node, secret: self.elem(), cursor, tag })
        } else {
            let cursor = *[ReadCursor::Query, ReadCursor::Fin].choose(self.rng).expect("nonempty");
            let tag = (cursor == ReadCursor::Fin).then(|| self.tag());
            ClientOp::Read(ReaderOp { reader: node, cursor, tag })
        }
    }

    fn reset_phase(&mut self) -> ResetPhase {
        let acks: BTreeSet<NodeId> = (0..self.rng.gen_range(0..=self.n)).map(|_| self.node()).collect();
        match self.rng.gen_range(0..3) {
            0 => ResetPhase::Idle,
            1 => ResetPhase::Freezing { tag: self.tag(), acks },
            _ => ResetPhase::Resuming { tag: self.tag(), acks },
        }
    }

    fn token(&mut self, kind: ChannelKind, reset: bool) -> Token {
        match kind {
            ChannelKind::Gossip { .. } => {
                if self.rng.gen() {
                    return Token::GossipBack { sent: None };
                }
                let payload = match self.rng.gen_range(0..if reset { 3 } else { 2 }) {
                    0 => GossipPayload::Triple(self.triple()),
                    1 => GossipPayload::Empty,
                    _ if self.rng.gen() => GossipPayload::Reset(ResetSignal::Freeze(self.tag())),
                    _ => GossipPayload::Reset(ResetSignal::Resume(self.tag())),
                };
                Token::GossipFwd { payload, sent: None }
            }
            ChannelKind::PingPong { .. } => {
                if self.rng.gen() {
                    Token::Ping { ping: self.opt_ping(), sent: None }
                } else {
                    Token::Pong { ping: self.opt_ping(), pong: self.opt_msg(), ping_sent: None, replied: None }
                }
            }
        }
    }
}

/// Overwrites the parts of `state` selected by `spec` with arbitrary
/// well-typed values. Returns the ids given to phantom operations.
pub fn inject_transient<R: Rng>(state: &mut SystemState, spec: &TransientSpec, p: u64, rng: &mut R, next_op: &mut u64) -> Vec<(NodeId, u64)> {
    let n = state.nodes.len();
    let sc = spec.scope;
    let mut f = Forge { rng, n, p, ceiling: spec.ceiling };
    let mut phantoms = Vec::new();
    for node in state.nodes.iter_mut() {
        if sc.storage {
            let recs = f.records(spec);
            node.server.set_records(recs);
        }
        if sc.gossip {
            for g in node.server.gossip.iter_mut() {
                *g = f.triple();
            }
            node.gossip_out.tx = f.triple();
            node.tx_genuine = false;
        }
        if sc.buffers {
            for j in 0..n {
                node.sbuf.ping_rx[j] = f.opt_ping();
                node.sbuf.pong_tx[j] = f.opt_msg();
                node.cbuf.pong_rx[j] = f.opt_msg();
            }
            node.cbuf.ping_tx = f.outgoing();
            node.cbuf.aggregated = (0..f.rng.gen_range(0..=n)).map(|_| (f.node(), f.msg())).collect();
        }
        if sc.clients && f.rng.gen() {
            let id = *next_op;
            *next_op += 1;
            node.op = Some(RunningOp { id, op: f.op(node.id), phantom: true });
            phantoms.push((node.id, id));
        }
        if sc.reset {
            node.reset.phase = f.reset_phase();
        }
        node.server.enabled = node.reset.is_idle();
    }
    if sc.tokens {
        for ch in state.channels.iter_mut() {
            ch.token = f.token(ch.kind, sc.reset);
        }
    }
    phantoms
}
