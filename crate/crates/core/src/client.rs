//! Writer and reader state machines, advanced each time the comm layer
//! returns a quorum of replies.

use rand::Rng;

use crate::coding::{rs_decode, share_secret, Field, FieldElement, ShareVector};
use crate::comm::{Outgoing, Request};
use crate::protocol::{tag_successor, Msg, MsgPhase, NodeId, QuorumConfig, Role, Tag};

/// Element-bearing replies a reader needs before decoding.
pub fn k_threshold(cfg: &QuorumConfig) -> usize {
    cfg.k_threshold()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum WriteCursor {
    Query,
    Pre,
    Fin,
    Finalized,
    Done,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ReadCursor {
    Query,
    Fin,
    Done,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WriterOp {
    pub writer: NodeId,
    pub secret: FieldElement,
    pub cursor: WriteCursor,
    pub tag: Option<Tag>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ReaderOp {
    pub reader: NodeId,
    pub cursor: ReadCursor,
    pub tag: Option<Tag>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ClientOp {
    Write(WriterOp),
    Read(ReaderOp),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Outcome {
    Wrote { tag: Tag },
    /// `value` is `None` when too few elements arrived or decoding failed.
    Read { tag: Tag, value: Option<FieldElement>, elements: usize },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Progress {
    Next(Outgoing),
    Done(Outcome),
}

pub struct ClientCtx<'a> {
    pub field: &'a Field,
    pub cfg: &'a QuorumConfig,
}

fn max_tag(replies: &[(NodeId, Msg)]) -> Tag {
    replies.iter().filter_map(|(_, m)| m.tag).max().unwrap_or(Tag::T0)
}

impl ClientOp {
    pub fn write(writer: NodeId, secret: FieldElement) -> ClientOp {
        ClientOp::Write(WriterOp { writer, secret, cursor: WriteCursor::Query, tag: None })
    }

    pub fn read(reader: NodeId) -> ClientOp {
        ClientOp::Read(ReaderOp { reader, cursor: ReadCursor::Query, tag: None })
    }

    pub fn role(&self) -> Role {
        match self {
            ClientOp::Write(_) => Role::Writer,
            ClientOp::Read(_) => Role::Reader,
        }
    }

    /// Tag once known: the chosen tag of a write, the target tag of a read.
    pub fn tag(&self) -> Option<Tag> {
        match self {
            ClientOp::Write(w) => w.tag,
            ClientOp::Read(r) => r.tag,
        }
    }

    pub fn phase_name(&self) -> &'static str {
        match self {
            ClientOp::Write(w) => match w.cursor {
                WriteCursor::Query => "qry",
                WriteCursor::Pre => "pre",
                WriteCursor::Fin => "fin",
                WriteCursor::Finalized => "FIN",
                WriteCursor::Done => "done",
            },
            ClientOp::Read(r) => match r.cursor {
                ReadCursor::Query => "qry",
                ReadCursor::Fin => "fin",
                ReadCursor::Done => "done",
            },
        }
    }

    /// The first request of the operation.
    pub fn start(&self) -> Outgoing {
        Outgoing::broadcast(self.role(), Msg::query())
    }

    /// Consumes one quorum of replies and yields the next request or the result.
    pub fn advance<R: Rng + ?Sized>(&mut self, replies: &[(NodeId, Msg)], ctx: &ClientCtx<'_>, rng: &mut R) -> Progress {
        match self {
            ClientOp::Write(w) => w.advance(replies, ctx, rng),
            ClientOp::Read(r) => r.advance(replies, ctx),
        }
    }
}

impl WriterOp {
    fn advance<R: Rng + ?Sized>(&mut self, replies: &[(NodeId, Msg)], ctx: &ClientCtx<'_>, rng: &mut R) -> Progress {
        let n = ctx.cfg.n;
        match self.cursor {
            WriteCursor::Query => {
                let tag = tag_successor(max_tag(replies), self.writer);
                self.tag = Some(tag);
                self.cursor = WriteCursor::Pre;
                let secret = ctx.field.elem(self.secret.0);
                let (_, shares) = share_secret(ctx.field, secret, ctx.cfg.k, n, rng)
                    .expect("scenario validation guarantees k <= N < p");
                let msgs = (1..=n)
                    .map(|j| Msg::new(Some(tag), shares.get(j), MsgPhase::Pre))
                    .collect();
                Progress::Next(Outgoing { role: Role::Writer, req: Request::PerServer(msgs) })
            }
            WriteCursor::Pre => {
                self.cursor = WriteCursor::Fin;
                Progress::Next(Outgoing::broadcast(Role::Writer, Msg::new(self.tag, None, MsgPhase::Fin)))
            }
            WriteCursor::Fin => {
                self.cursor = WriteCursor::Finalized;
                Progress::Next(Outgoing::broadcast(Role::Writer, Msg::new(self.tag, None, MsgPhase::Finalized)))
            }
            WriteCursor::Finalized | WriteCursor::Done => {
                self.cursor = WriteCursor::Done;
                Progress::Done(Outcome::Wrote { tag: self.tag.unwrap_or_default() })
            }
        }
    }
}

impl ReaderOp {
    fn advance(&mut self, replies: &[(NodeId, Msg)], ctx: &ClientCtx<'_>) -> Progress {
        match self.cursor {
            ReadCursor::Query => {
                let t = max_tag(replies);
                self.tag = Some(t);
                self.cursor = ReadCursor::Fin;
                Progress::Next(Outgoing::broadcast(Role::Reader, Msg::new(Some(t), None, MsgPhase::Fin)))
            }
            ReadCursor::Fin | ReadCursor::Done => {
                self.cursor = ReadCursor::Done;
                let t = self.tag.unwrap_or_default();
                let mut shares = ShareVector::erased(ctx.cfg.n);
                for (j, m) in replies {
                    if let (Some(w), Some(mt)) = (m.word, m.tag) {
                        if mt == t && j.index() < ctx.cfg.n && ctx.field.contains(w) {
                            shares.set(j.0 as usize, w);
                        }
                    }
                }
                let elements = shares.n_avail();
                let value = if elements < k_threshold(ctx.cfg) {
                    None
                } else {
                    rs_decode(ctx.field, &shares, ctx.cfg.k).map(|p| p.secret())
                };
                Progress::Done(Outcome::Read { tag: t, value, elements })
            }
        }
    }
}

/// The share every server holds for the initial value: the initial value
/// encoded with all-zero randomness, so each share equals it.
pub fn default_share(field: &Field, v0: FieldElement) -> FieldElement {
    field.elem(v0.0)
}
