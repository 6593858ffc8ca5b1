//! Gossip and quorum-based request/reply services over single-token channels.
//!
//! Every directed pair of nodes shares one channel holding exactly one token.
//! The token alternates between the endpoints; each arrival runs a handler
//! and the token immediately departs the other way carrying fresh contents.

use crate::protocol::{Msg, MsgPhase, NodeId, Ping, QuorumConfig, Role, TagTriple};
use crate::reset::ResetSignal;

/// Contents of a client's `pingTx`: one message for everyone, or one per server.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Request {
    Broadcast(Msg),
    PerServer(Vec<Msg>),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Outgoing {
    pub role: Role,
    pub req: Request,
}

impl Outgoing {
    pub fn broadcast(role: Role, msg: Msg) -> Outgoing {
        Outgoing { role, req: Request::Broadcast(msg) }
    }

    pub fn phase(&self) -> Option<MsgPhase> {
        match &self.req {
            Request::Broadcast(m) => Some(m.phase),
            Request::PerServer(v) => v.first().map(|m| m.phase),
        }
    }
}

/// Server `j`'s view of `ping_tx`.
pub fn load(j: NodeId, ping_tx: &Option<Outgoing>) -> Option<Ping> {
    let out = ping_tx.as_ref()?;
    let msg = match &out.req {
        Request::Broadcast(m) => *m,
        Request::PerServer(v) => *v.get(j.index())?,
    };
    Some(Ping { role: out.role, msg })
}

/// Whether a returning `(ping, pong)` pair answers the current request.
/// Query replies are exempt from the tag comparison.
pub fn pong_matches(expected: Option<Ping>, ping: Option<Ping>, pong: Option<Msg>) -> bool {
    if expected != ping {
        return false;
    }
    let Some(pong) = pong else { return true };
    let Some(pt) = pong.tag else { return true };
    match ping {
        Some(p) if p.msg.phase != MsgPhase::Qry => p.msg.tag == Some(pt),
        _ => true,
    }
}

/// Server-side gossip output buffer. The input side is the server's gossip view.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct GossipBuffers {
    pub tx: TagTriple,
}

impl GossipBuffers {
    /// Overwrites whatever was pending.
    pub fn gossip(&mut self, msg: TagTriple) {
        self.tx = msg;
    }
}

/// What a pong arrival did at the client.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum PongArrival {
    Ignored,
    Stored,
    /// A quorum answered; buffers were cleared and these replies aggregated.
    Quorum(Vec<(NodeId, Msg)>),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ClientBuffers {
    pub ping_tx: Option<Outgoing>,
    pub pong_rx: Vec<Option<Msg>>,
    pub aggregated: Vec<(NodeId, Msg)>,
}

impl ClientBuffers {
    pub fn new(n: usize) -> ClientBuffers {
        ClientBuffers { ping_tx: None, pong_rx: vec![None; n], aggregated: Vec::new() }
    }

    /// Starts a request phase.
    pub fn phase_init(&mut self, out: Outgoing) {
        self.ping_tx = Some(out);
        self.pong_rx.iter_mut().for_each(|p| *p = None);
    }

    pub fn clear(&mut self) {
        self.ping_tx = None;
        self.pong_rx.iter_mut().for_each(|p| *p = None);
    }

    /// Payload of the next token departure towards server `j`.
    pub fn departure(&self, j: NodeId) -> Option<Ping> {
        load(j, &self.ping_tx)
    }

    pub fn arrival(&mut self, j: NodeId, ping: Option<Ping>, pong: Option<Msg>, cfg: &QuorumConfig) -> PongArrival {
        if !pong_matches(self.departure(j), ping, pong) {
            return PongArrival::Ignored;
        }
        self.pong_rx[j.index()] = pong;
        let got = self.pong_rx.iter().filter(|p| p.is_some()).count();
        if !cfg.is_quorum_size(got) {
            return PongArrival::Stored;
        }
        self.aggregated = self
            .pong_rx
            .iter()
            .enumerate()
            .filter_map(|(i, p)| p.map(|m| (NodeId::from_index(i), m)))
            .collect();
        self.clear();
        PongArrival::Quorum(self.aggregated.clone())
    }

    /// Hands the aggregate to the waiting operation.
    pub fn take_aggregated(&mut self) -> Vec<(NodeId, Msg)> {
        std::mem::take(&mut self.aggregated)
    }

    pub fn is_clean(&self) -> bool {
        self.ping_tx.is_none() && self.pong_rx.iter().all(|p| p.is_none())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ServerBuffers {
    pub ping_rx: Vec<Option<Ping>>,
    pub pong_tx: Vec<Option<Msg>>,
}

impl ServerBuffers {
    pub fn new(n: usize) -> ServerBuffers {
        ServerBuffers { ping_rx: vec![None; n], pong_tx: vec![None; n] }
    }

    /// Stores a ping from client `j` and returns the request to handle, if
    /// any. The previous reply is dropped so that a request left unanswered
    /// does not carry a stale pong back.
    pub fn arrival(&mut self, j: NodeId, ping: Option<Ping>) -> Option<Ping> {
        self.ping_rx[j.index()] = ping;
        self.pong_tx[j.index()] = None;
        ping
    }

    pub fn reply(&mut self, j: NodeId, m: Msg) {
        let Some(req) = self.ping_rx[j.index()] else { return };
        self.pong_tx[j.index()] = Some(if req.msg.phase == MsgPhase::Qry {
            Msg::new(m.tag, None, MsgPhase::Qry)
        } else {
            Msg::new(req.msg.tag, m.word, req.msg.phase)
        });
    }

    pub fn departure(&self, j: NodeId) -> (Option<Ping>, Option<Msg>) {
        match self.ping_rx[j.index()] {
            None => (None, None),
            ping => (ping, self.pong_tx[j.index()]),
        }
    }

    pub fn clear(&mut self) {
        self.ping_rx.iter_mut().for_each(|p| *p = None);
        self.pong_tx.iter_mut().for_each(|p| *p = None);
    }
}

/// Forward payload of a gossip channel.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GossipPayload {
    Triple(TagTriple),
    Reset(ResetSignal),
    /// Flushed by a reset.
    Empty,
}

/// The single token of a channel together with its direction. `sent` is the
/// step of the departure that produced the payload; `None` marks payloads
/// that were never sent by the protocol (initial corruption).
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Token {
    /// Travelling from the gossip sender to the receiver.
    GossipFwd { payload: GossipPayload, sent: Option<u64> },
    /// Travelling back to the gossip sender; carries no data.
    GossipBack { sent: Option<u64> },
    /// Travelling from client to server.
    Ping { ping: Option<Ping>, sent: Option<u64> },
    /// Travelling from server to client; `ping_sent` is when the echoed ping
    /// left the client, `replied` when the server's handler produced `pong`.
    Pong { ping: Option<Ping>, pong: Option<Msg>, ping_sent: Option<u64>, replied: Option<u64> },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ChannelKind {
    Gossip { from: NodeId, to: NodeId },
    PingPong { client: NodeId, server: NodeId },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TokenChannel {
    pub kind: ChannelKind,
    pub token: Token,
}

impl TokenChannel {
    /// Node at which the token arrives next.
    pub fn receiver(&self) -> NodeId {
        match (self.kind, &self.token) {
            (ChannelKind::Gossip { to, .. }, Token::GossipFwd { .. }) => to,
            (ChannelKind::Gossip { from, .. }, _) => from,
            (ChannelKind::PingPong { server, .. }, Token::Ping { .. }) => server,
            (ChannelKind::PingPong { client, .. }, _) => client,
        }
    }

    /// Whether the token kind fits the channel kind.
    pub fn well_formed(&self) -> bool {
        matches!(
            (self.kind, &self.token),
            (ChannelKind::Gossip { .. }, Token::GossipFwd { .. } | Token::GossipBack { .. })
                | (ChannelKind::PingPong { .. }, Token::Ping { .. } | Token::Pong { .. })
        )
    }

    /// Reset flush: drop protocol data, keep direction and reset signals.
    pub fn flush(&mut self) {
        match &mut self.token {
            Token::GossipFwd { payload, .. } => {
                if let GossipPayload::Triple(_) = payload {
                    *payload = GossipPayload::Empty;
                }
            }
            Token::GossipBack { .. } => {}
            Token::Ping { ping, .. } => *ping = None,
            Token::Pong { ping, pong, .. } => {
                *ping = None;
                *pong = None;
            }
        }
    }
}
