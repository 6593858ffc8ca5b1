use std::collections::HashMap;
use std::fmt;

use crate::coding::FieldElement;
use crate::protocol::Tag;

use super::history::{OpHistory, OpKind, OpRecord, Version};

/// A pair of operations (or a single one) breaking atomicity.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Witness {
    pub first: u64,
    pub second: Option<u64>,
    pub reason: String,
}

impl fmt::Display for Witness {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.second {
            Some(b) => write!(f, "ops {} and {}: {}", self.first, b, self.reason),
            None => write!(f, "op {}: {}", self.first, self.reason),
        }
    }
}

fn version(h: &OpHistory, r: &OpRecord) -> Result<Version, Witness> {
    r.version(h).ok_or_else(|| Witness { first: r.id, second: None, reason: "complete operation without a tag".into() })
}

/// Value a read must return for `v`, looked up among all writes of the history.
fn expected_value(h: &OpHistory, writes: &HashMap<Version, &OpRecord>, v: Version) -> Option<FieldElement> {
    if v.tag == Tag::T0 {
        return Some(h.v0);
    }
    writes.get(&v).and_then(|w| w.value)
}

/// Tag-order atomicity check over the operations at `scope` (indices into
/// `h.ops`). Operations that are not `checkable` are ignored, though every
/// write with a tag can still be the source of a read's value.
///
/// Checks that real-time order is never inverted by the tag order, that
/// writes carry pairwise distinct tags, and that every read returns the value
/// of the write whose tag it reports.
pub fn check_atomicity(h: &OpHistory, scope: &[usize]) -> Result<(), Witness> {
    let mut all_writes: HashMap<Version, &OpRecord> = HashMap::new();
    for w in h.ops.iter().filter(|r| r.kind == OpKind::Write) {
        if let Some(v) = w.version(h) {
            all_writes.entry(v).or_insert(w);
        }
    }
    let ops: Vec<(&OpRecord, Version)> = scope
        .iter()
        .map(|&i| &h.ops[i])
        .filter(|r| r.checkable())
        .map(|r| version(h, r).map(|v| (r, v)))
        .collect::<Result<_, _>>()?;

    let mut seen: HashMap<Version, u64> = HashMap::new();
    for (r, v) in ops.iter().filter(|(r, _)| r.kind == OpKind::Write) {
        if let Some(prev) = seen.insert(*v, r.id) {
            return Err(Witness { first: prev, second: Some(r.id), reason: format!("writes share tag {}", v.tag) });
        }
    }

    for (r, v) in ops.iter().filter(|(r, _)| r.kind == OpKind::Read) {
        let want = expected_value(h, &all_writes, *v);
        if want.is_none() {
            return Err(Witness { first: r.id, second: None, reason: format!("read tag {} matches no write", v.tag) });
        }
        if r.value != want {
            let src = all_writes.get(v).map(|w| w.id);
            return Err(Witness {
                first: r.id,
                second: src,
                reason: format!("read returned {:?} but tag {} carries {:?}", r.value.map(|x| x.0), v.tag, want.map(|x| x.0)),
            });
        }
    }

    // Real-time order: sorting by response lets each operation be compared
    // against the largest version among operations that finished before it.
    let mut by_resp: Vec<(usize, Version, u64)> =
        ops.iter().map(|(r, v)| (r.response_seq().unwrap_or(usize::MAX), *v, r.id)).collect();
    by_resp.sort_unstable();
    let mut by_inv: Vec<&(&OpRecord, Version)> = ops.iter().collect();
    by_inv.sort_unstable_by_key(|(r, _)| r.invoke_seq);
    let mut best: Option<(Version, u64)> = None;
    let mut j = 0;
    for (r, v) in by_inv {
        while j < by_resp.len() && by_resp[j].0 < r.invoke_seq {
            let (_, pv, pid) = by_resp[j];
            if best.is_none_or(|(bv, _)| pv > bv) {
                best = Some((pv, pid));
            }
            j += 1;
        }
        let Some((bv, bid)) = best else { continue };
        let bad = match r.kind {
            OpKind::Write => *v <= bv,
            OpKind::Read => *v < bv,
        };
        if bad {
            return Err(Witness {
                first: bid,
                second: Some(r.id),
                reason: format!("op {} precedes op {} in real time but tag {} is not below {}", bid, r.id, bv.tag, v.tag),
            });
        }
    }
    Ok(())
}
