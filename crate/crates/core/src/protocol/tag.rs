use std::fmt;
use std::str::FromStr;

use super::ParseValueError;

/// Identifier of a node; ids run 1..=N. Every node hosts one server and one client.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(pub u32);

impl NodeId {
    pub fn index(self) -> usize {
        self.0 as usize - 1
    }

    pub fn from_index(i: usize) -> NodeId {
        NodeId(i as u32 + 1)
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl FromStr for NodeId {
    type Err = ParseValueError;
    fn from_str(s: &str) -> Result<NodeId, ParseValueError> {
        match s.parse::<u32>() {
            Ok(v) if v > 0 => Ok(NodeId(v)),
            _ => Err(ParseValueError::new("node id", s)),
        }
    }
}

/// Write version. `T0` is below every `(z, owner)` pair; pairs compare by
/// counter, then owner. The derived order relies on the variant order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub enum Tag {
    #[default]
    T0,
    At { z: u64, owner: NodeId },
}

impl Tag {
    pub fn new(z: u64, owner: NodeId) -> Tag {
        Tag::At { z, owner }
    }

    /// Counter, with 0 for `T0`.
    pub fn z(self) -> u64 {
        match self {
            Tag::T0 => 0,
            Tag::At { z, .. } => z,
        }
    }

    pub fn owner(self) -> Option<NodeId> {
        match self {
            Tag::T0 => None,
            Tag::At { owner, .. } => Some(owner),
        }
    }

    pub fn is_t0(self) -> bool {
        self == Tag::T0
    }
}

pub fn tag_less(a: Tag, b: Tag) -> bool {
    a < b
}

/// The tag a writer picks after learning `t` as the maximum.
pub fn tag_successor(t: Tag, writer: NodeId) -> Tag {
    Tag::At { z: t.z().saturating_add(1), owner: writer }
}

impl fmt::Display for Tag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tag::T0 => f.write_str("t0"),
            Tag::At { z, owner } => write!(f, "{z}.{owner}"),
        }
    }
}

impl FromStr for Tag {
    type Err = ParseValueError;
    fn from_str(s: &str) -> Result<Tag, ParseValueError> {
        if s == "t0" {
            return Ok(Tag::T0);
        }
        let err = || ParseValueError::new("tag", s);
        let (z, o) = s.split_once('.').ok_or_else(err)?;
        let z: u64 = z.parse().map_err(|_| err())?;
        if z == 0 {
            return Err(err());
        }
        Ok(Tag::At { z, owner: o.parse().map_err(|_| err())? })
    }
}
