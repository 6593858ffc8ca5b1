//! Tags, phases, records, messages and quorum arithmetic.

mod quorum;
mod tag;

use std::fmt;
use std::str::FromStr;

pub use quorum::{ConfigError, QuorumConfig};
pub use tag::{tag_less, tag_successor, NodeId, Tag};

use crate::coding::FieldElement;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid {what}: {text:?}")]
pub struct ParseValueError {
    pub what: &'static str,
    pub text: String,
}

impl ParseValueError {
    pub fn new(what: &'static str, text: &str) -> ParseValueError {
        ParseValueError { what, text: text.to_string() }
    }
}

/// Life-cycle phase of a stored record: prewritten, finalized, FINALIZED.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Phase {
    Pre,
    Fin,
    Finalized,
}

impl Phase {
    pub const ALL: [Phase; 3] = [Phase::Pre, Phase::Fin, Phase::Finalized];
}

/// Phase field of a request or reply; `Qry` never reaches storage.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum MsgPhase {
    Qry,
    Pre,
    Fin,
    Finalized,
}

impl MsgPhase {
    pub fn stored(self) -> Option<Phase> {
        match self {
            MsgPhase::Qry => None,
            MsgPhase::Pre => Some(Phase::Pre),
            MsgPhase::Fin => Some(Phase::Fin),
            MsgPhase::Finalized => Some(Phase::Finalized),
        }
    }
}

impl From<Phase> for MsgPhase {
    fn from(p: Phase) -> MsgPhase {
        match p {
            Phase::Pre => MsgPhase::Pre,
            Phase::Fin => MsgPhase::Fin,
            Phase::Finalized => MsgPhase::Finalized,
        }
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        MsgPhase::from(*self).fmt(f)
    }
}

impl fmt::Display for MsgPhase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MsgPhase::Qry => "qry",
            MsgPhase::Pre => "pre",
            MsgPhase::Fin => "fin",
            MsgPhase::Finalized => "FIN",
        })
    }
}

impl FromStr for MsgPhase {
    type Err = ParseValueError;
    fn from_str(s: &str) -> Result<MsgPhase, ParseValueError> {
        Ok(match s {
            "qry" => MsgPhase::Qry,
            "pre" => MsgPhase::Pre,
            "fin" => MsgPhase::Fin,
            "FIN" => MsgPhase::Finalized,
            _ => return Err(ParseValueError::new("phase", s)),
        })
    }
}

impl FromStr for Phase {
    type Err = ParseValueError;
    fn from_str(s: &str) -> Result<Phase, ParseValueError> {
        s.parse::<MsgPhase>()?.stored().ok_or_else(|| ParseValueError::new("phase", s))
    }
}

/// A stored record. `element` is this server's coded element, if it has one.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Record {
    pub tag: Tag,
    pub element: Option<FieldElement>,
    pub phase: Phase,
}

/// Maximal tags of the pre/fin/FIN record sets, as gossiped between servers.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default)]
pub struct TagTriple {
    pub pre: Tag,
    pub fin: Tag,
    pub finalized: Tag,
}

impl TagTriple {
    pub fn new(pre: Tag, fin: Tag, finalized: Tag) -> TagTriple {
        TagTriple { pre, fin, finalized }
    }

    /// Componentwise comparison.
    pub fn dominates(&self, other: &TagTriple) -> bool {
        self.pre >= other.pre && self.fin >= other.fin && self.finalized >= other.finalized
    }
}

impl fmt::Display for TagTriple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}/{}", self.pre, self.fin, self.finalized)
    }
}

impl FromStr for TagTriple {
    type Err = ParseValueError;
    fn from_str(s: &str) -> Result<TagTriple, ParseValueError> {
        let parts: Vec<&str> = s.split('/').collect();
        if parts.len() != 3 {
            return Err(ParseValueError::new("tag triple", s));
        }
        Ok(TagTriple::new(parts[0].parse()?, parts[1].parse()?, parts[2].parse()?))
    }
}

/// Whether a request comes from a writer or a reader client.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Role {
    Writer,
    Reader,
}

/// A request or reply triple; `None` fields are the bottom value.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Msg {
    pub tag: Option<Tag>,
    pub word: Option<FieldElement>,
    pub phase: MsgPhase,
}

impl Msg {
    pub fn new(tag: Option<Tag>, word: Option<FieldElement>, phase: MsgPhase) -> Msg {
        Msg { tag, word, phase }
    }

    pub fn query() -> Msg {
        Msg::new(None, None, MsgPhase::Qry)
    }
}

fn opt_str<T: fmt::Display>(v: &Option<T>) -> String {
    v.as_ref().map_or_else(|| "_".to_string(), |v| v.to_string())
}

impl fmt::Display for Msg {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}/{}", opt_str(&self.tag), opt_str(&self.word), self.phase)
    }
}

impl FromStr for Msg {
    type Err = ParseValueError;
    fn from_str(s: &str) -> Result<Msg, ParseValueError> {
        let parts: Vec<&str> = s.split('/').collect();
        if parts.len() != 3 {
            return Err(ParseValueError::new("message", s));
        }
        let tag = match parts[0] {
            "_" => None,
            t => Some(t.parse()?),
        };
        let word = match parts[1] {
            "_" => None,
            w => Some(FieldElement(w.parse().map_err(|_| ParseValueError::new("element", w))?)),
        };
        Ok(Msg::new(tag, word, parts[2].parse()?))
    }
}

/// A request as delivered to one server.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Ping {
    pub role: Role,
    pub msg: Msg,
}

impl fmt::Display for Ping {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let r = match self.role {
            Role::Writer => 'W',
            Role::Reader => 'R',
        };
        write!(f, "{r}:{}", self.msg)
    }
}

impl FromStr for Ping {
    type Err = ParseValueError;
    fn from_str(s: &str) -> Result<Ping, ParseValueError> {
        let role = match s.get(..2) {
            Some("W:") => Role::Writer,
            Some("R:") => Role::Reader,
            _ => return Err(ParseValueError::new("ping", s)),
        };
        Ok(Ping { role, msg: s[2..].parse()? })
    }
}
