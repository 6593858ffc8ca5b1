//! Server state machine: query, prewrite, finalize and gossip handlers,
//! relevance-based garbage collection and overflow detection.

use std::collections::{BTreeMap, BTreeSet};

use crate::coding::FieldElement;
use crate::protocol::{Msg, MsgPhase, NodeId, Phase, Ping, QuorumConfig, Record, Role, Tag, TagTriple};

/// Tag bound for the bounded-counter extension.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Bounds {
    pub maxint: u64,
    pub delta: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ServerConfig {
    pub cfg: QuorumConfig,
    /// `None` runs the unbounded algorithm: no suspension, no gc, no reset.
    pub bounds: Option<Bounds>,
    /// This server's share of the initial value under the `t0` tag.
    pub default_element: FieldElement,
}

impl ServerConfig {
    /// Largest tag whose writer queries are still answered.
    pub fn t_top(&self) -> Option<Tag> {
        self.bounds.map(|b| Tag::new(b.maxint, NodeId(self.cfg.n as u32)))
    }

    /// N + delta + 3
    pub fn storage_bound(&self) -> Option<usize> {
        self.bounds.map(|b| self.cfg.n + b.delta + 3)
    }
}

/// What the gossip handler produced.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GossipOutcome {
    pub emit: TagTriple,
    pub reset: Option<Tag>,
}

/// Monotone phase ladder pre -> fin -> FIN. Any other pair keeps `old`.
pub fn upgrade_phase(old: Phase, new: Phase) -> Phase {
    match (old, new) {
        (Phase::Pre, Phase::Fin) => Phase::Fin,
        (Phase::Fin, Phase::Finalized) => Phase::Finalized,
        _ => old,
    }
}

#[derive(Clone, Debug)]
pub struct ServerState {
    pub id: NodeId,
    store: BTreeMap<Tag, (Option<FieldElement>, Phase)>,
    /// Latest triple from every server; slot `id` holds this server's own maxima.
    pub gossip: Vec<TagTriple>,
    pub enabled: bool,
    conf: ServerConfig,
}

impl ServerState {
    pub fn new(id: NodeId, conf: ServerConfig) -> ServerState {
        ServerState {
            id,
            store: BTreeMap::new(),
            gossip: vec![TagTriple::default(); conf.cfg.n],
            enabled: true,
            conf,
        }
    }

    pub fn config(&self) -> &ServerConfig {
        &self.conf
    }

    pub fn len(&self) -> usize {
        self.store.len()
    }

    pub fn is_empty(&self) -> bool {
        self.store.is_empty()
    }

    pub fn records(&self) -> impl Iterator<Item = Record> + '_ {
        self.store
            .iter()
            .map(|(&tag, &(element, phase))| Record { tag, element, phase })
    }

    pub fn get(&self, t: Tag) -> Option<Record> {
        self.store.get(&t).map(|&(element, phase)| Record { tag: t, element, phase })
    }

    /// Overwrites storage. Used by fault injection and tests.
    pub fn set_records(&mut self, records: impl IntoIterator<Item = Record>) {
        self.store = records
            .into_iter()
            .filter(|r| !r.tag.is_t0())
            .map(|r| (r.tag, (r.element, r.phase)))
            .collect();
    }

    /// Maximum tag among records in the given phases. The virtual default
    /// record `(t0, fin)` always takes part.
    pub fn max_phase(&self, phases: &[Phase]) -> Tag {
        self.store
            .iter()
            .rev()
            .find(|(_, (_, p))| phases.contains(p))
            .map_or(Tag::T0, |(t, _)| *t)
    }

    pub fn tag_tuple(&self) -> TagTriple {
        TagTriple::new(
            self.max_phase(&Phase::ALL),
            self.max_phase(&[Phase::Fin, Phase::Finalized]),
            self.max_phase(&[Phase::Finalized]),
        )
    }

    /// Inserts or merges a record. The phase only climbs; a stored element is
    /// kept when the update carries none. Updates for `t0` are ignored since
    /// the default record is virtual.
    pub fn update_phase(&mut self, t: Tag, w: Option<FieldElement>, u: Phase) {
        if t.is_t0() {
            return;
        }
        match self.store.get_mut(&t) {
            Some((elem, phase)) => {
                *phase = upgrade_phase(*phase, u);
                if w.is_some() {
                    *elem = w;
                }
            }
            None => {
                self.store.insert(t, (w, u));
            }
        }
    }

    fn suspended(&self) -> bool {
        self.conf
            .t_top()
            .is_some_and(|top| self.max_phase(&Phase::ALL) > top)
    }

    /// `None` means no reply: either disabled or a suspended writer query.
    pub fn on_query(&mut self, role: Role) -> Option<Msg> {
        if !self.enabled {
            return None;
        }
        let reply = match role {
            Role::Reader => Some(self.max_phase(&[Phase::Fin, Phase::Finalized])),
            Role::Writer if self.suspended() => None,
            Role::Writer => Some(self.max_phase(&Phase::ALL)),
        };
        self.gc();
        reply.map(|t| Msg::new(Some(t), None, MsgPhase::Qry))
    }

    pub fn on_prewrite(&mut self, t: Tag, w: Option<FieldElement>) -> Option<Msg> {
        if !self.enabled {
            return None;
        }
        self.update_phase(t, w, Phase::Pre);
        self.gc();
        Some(Msg::new(Some(t), None, MsgPhase::Pre))
    }

    pub fn on_finalize(&mut self, t: Tag, d: Phase, role: Role) -> Option<Msg> {
        if !self.enabled {
            return None;
        }
        self.update_phase(t, None, d);
        let word = match role {
            Role::Writer => None,
            Role::Reader if t.is_t0() => Some(self.conf.default_element),
            Role::Reader => self.store.get(&t).and_then(|(w, _)| *w),
        };
        self.gc();
        Some(Msg::new(Some(t), word, d.into()))
    }

    /// Dispatches a request. Requests without a tag (only possible after
    /// corruption) are acknowledged without touching storage.
    pub fn handle(&mut self, ping: &Ping) -> Option<Msg> {
        let m = ping.msg;
        match (m.phase, m.tag) {
            (MsgPhase::Qry, _) => self.on_query(ping.role),
            (ph, None) => self.enabled.then(|| Msg::new(None, None, ph)),
            (MsgPhase::Pre, Some(t)) => self.on_prewrite(t, m.word),
            (MsgPhase::Fin, Some(t)) => self.on_finalize(t, Phase::Fin, ping.role),
            (MsgPhase::Finalized, Some(t)) => self.on_finalize(t, Phase::Finalized, ping.role),
        }
    }

    /// Stores the latest triple heard from `from`.
    pub fn receive_gossip(&mut self, from: NodeId, triple: TagTriple) {
        if let Some(slot) = self.gossip.get_mut(from.index()) {
            *slot = triple;
        }
    }

    /// Recomputes the pre/fin/FIN maxima from the gossip view and storage,
    /// then returns the triple to gossip and a possible reset trigger.
    pub fn on_gossip(&mut self) -> Option<GossipOutcome> {
        if !self.enabled {
            return None;
        }
        let me = self.id.index();

        let mut pre = self.max_phase(&Phase::ALL);
        for g in &self.gossip {
            pre = pre.max(g.pre).max(g.fin).max(g.finalized);
        }
        self.gossip[me].pre = pre;
        self.update_phase(pre, None, Phase::Pre);

        let mut fin = self.max_phase(&[Phase::Fin, Phase::Finalized]);
        for g in &self.gossip {
            fin = fin.max(g.fin).max(g.finalized);
        }
        self.gossip[me].fin = fin;
        self.update_phase(fin, None, Phase::Fin);

        let mut finalized = self.max_phase(&[Phase::Finalized]);
        for g in &self.gossip {
            finalized = finalized.max(g.finalized);
        }
        let mut votes: BTreeMap<Tag, usize> = BTreeMap::new();
        for g in &self.gossip {
            *votes.entry(g.fin).or_default() += 1;
        }
        for (t, c) in votes {
            if self.conf.cfg.is_quorum_size(c) {
                finalized = finalized.max(t);
            }
        }
        self.gossip[me].finalized = finalized;
        self.update_phase(finalized, None, Phase::Finalized);

        let reset = self.overflow_check();
        self.gc();
        Some(GossipOutcome { emit: self.tag_tuple(), reset })
    }

    /// Condition for a global reset: a tag at or above `t_top` exists and
    /// every gossip view agrees on a triple `(t, t', t')` with `t >= t'`.
    pub fn overflow_check(&self) -> Option<Tag> {
        let top = self.conf.t_top()?;
        let tuple = self.tag_tuple();
        let trigger = tuple.pre >= top
            && self.gossip.iter().all(|g| *g == tuple)
            && tuple.fin == tuple.finalized
            && tuple.pre >= tuple.fin;
        trigger.then_some(tuple.fin)
    }

    /// Relevance filter; no-op in unbounded mode.
    pub fn gc(&mut self) {
        let Some(b) = self.conf.bounds else { return };
        let recs: Vec<Record> = self.records().collect();
        let keep: BTreeSet<Tag> = relevant(&recs, b.delta).into_iter().map(|r| r.tag).collect();
        self.store.retain(|t, _| keep.contains(t));
    }

    /// Keeps only the record tagged `t`, renumbered to `(1, owner)` and FIN.
    pub fn local_reset(&mut self, t: Tag) {
        let kept = match t {
            Tag::T0 => None,
            Tag::At { owner, .. } => self.store.get(&t).map(|&(w, _)| (Tag::new(1, owner), (w, Phase::Finalized))),
        };
        self.store.clear();
        self.store.extend(kept);
        self.gossip.iter_mut().for_each(|g| *g = TagTriple::default());
    }

    /// State after a crash-resume: empty storage, blank gossip view.
    pub fn wipe(&mut self) {
        self.store.clear();
        self.gossip.iter_mut().for_each(|g| *g = TagTriple::default());
    }

    /// FNV-1a over the record set, for trace snapshots.
    pub fn digest(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        let mut eat = |v: u64| {
            for b in v.to_le_bytes() {
                h ^= b as u64;
                h = h.wrapping_mul(0x100_0000_01b3);
            }
        };
        for r in self.records() {
            eat(r.tag.z());
            eat(r.tag.owner().map_or(0, |o| o.0 as u64));
            eat(r.element.map_or(u64::MAX, |w| w.0));
            eat(r.phase as u64);
        }
        h
    }
}

/// Records worth keeping: the write-query and read-query maxima, the maximal
/// FIN tag, every tag not yet (explicitly or implicitly) FINALIZED, and the
/// `delta + 1` largest FINALIZED ones. A tag is implicitly FINALIZED when
/// its owner also wrote a larger counter.
pub fn relevant(records: &[Record], delta: usize) -> Vec<Record> {
    let mut top_z: BTreeMap<NodeId, u64> = BTreeMap::new();
    for r in records {
        if let Some(o) = r.tag.owner() {
            let z = top_z.entry(o).or_default();
            *z = (*z).max(r.tag.z());
        }
    }
    let finalized = |r: &Record| {
        r.phase == Phase::Finalized || r.tag.owner().is_some_and(|o| top_z[&o] > r.tag.z())
    };
    let mut keep: BTreeSet<Tag> = BTreeSet::new();
    let mut done: Vec<Tag> = Vec::new();
    for r in records {
        if finalized(r) {
            done.push(r.tag);
        } else {
            keep.insert(r.tag);
        }
    }
    done.sort_unstable_by(|a, b| b.cmp(a));
    keep.extend(done.into_iter().take(delta + 1));
    let max_of = |f: &dyn Fn(&Record) -> bool| records.iter().filter(|r| f(r)).map(|r| r.tag).max();
    keep.extend(max_of(&|_| true));
    keep.extend(max_of(&|r| r.phase != Phase::Pre));
    keep.extend(max_of(&|r| r.phase == Phase::Finalized));
    records.iter().filter(|r| keep.contains(&r.tag)).copied().collect()
}
