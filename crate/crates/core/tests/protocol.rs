use proptest::prelude::*;

use cas_core::client::k_threshold;
use cas_core::coding::FieldElement;
use cas_core::protocol::{tag_less, tag_successor, NodeId, Phase, QuorumConfig, Record, Tag, TagTriple};
use cas_core::server::{relevant, upgrade_phase, Bounds, ServerConfig, ServerState};
use cas_core::protocol::{Msg, MsgPhase, Role};

fn t(z: u64, o: u32) -> Tag {
    Tag::new(z, NodeId(o))
}

fn rec(tag: Tag, w: Option<u64>, phase: Phase) -> Record {
    Record { tag, element: w.map(FieldElement), phase }
}

fn server(maxint: Option<u64>, delta: usize) -> ServerState {
    let cfg = QuorumConfig::new(5, 1, 1, 1).unwrap();
    let conf = ServerConfig {
        cfg,
        bounds: maxint.map(|maxint| Bounds { maxint, delta }),
        default_element: FieldElement(0),
    };
    ServerState::new(NodeId(1), conf)
}

fn records(s: &ServerState) -> Vec<Record> {
    s.records().collect()
}

#[test]
fn tag_order() {
    assert!(tag_less(t(1, 2), t(2, 1)));
    assert!(tag_less(t(2, 1), t(2, 3)));
    assert!(tag_less(Tag::T0, t(1, 1)));
    assert!(!tag_less(t(2, 3), t(2, 3)));
}

#[test]
fn tag_successor_examples() {
    assert_eq!(tag_successor(t(3, 5), NodeId(2)), t(4, 2));
    assert_eq!(tag_successor(Tag::T0, NodeId(1)), t(1, 1));
    for j in 1..=7 {
        assert!(tag_successor(t(4, j), NodeId(1)) > t(4, j));
    }
}

#[test]
fn tag_text_round_trip() {
    for tag in [Tag::T0, t(1, 1), t(12, 5)] {
        assert_eq!(tag.to_string().parse::<Tag>().unwrap(), tag);
    }
    assert!("0.1".parse::<Tag>().is_err());
    assert!("3.0".parse::<Tag>().is_err());
    assert!("x".parse::<Tag>().is_err());
}

#[test]
fn quorum_sizes() {
    let q = |n, e, k| QuorumConfig { n, f: 0, e, k }.quorum_size();
    assert_eq!(q(5, 1, 1), 4);
    assert_eq!(q(7, 1, 2), 6);
    assert_eq!(q(5, 0, 1), 3);
}

#[test]
fn quorum_membership() {
    let cfg = QuorumConfig::new(5, 1, 1, 1).unwrap();
    let ids = |v: &[u32]| v.iter().map(|&i| NodeId(i)).collect::<Vec<_>>();
    assert!(cfg.is_quorum(&ids(&[1, 2, 3, 4])));
    assert!(!cfg.is_quorum(&ids(&[1, 2, 3])));
    assert!(!cfg.is_quorum(&ids(&[1, 1, 2, 3])));
    assert!(!cfg.is_quorum(&ids(&[1, 2, 3, 9])));
}

#[test]
fn config_validation() {
    assert!(QuorumConfig::new(5, 1, 1, 1).is_ok());
    assert!(QuorumConfig::new(5, 1, 1, 2).is_err());
    assert!(QuorumConfig::new(5, 3, 0, 1).is_err());
    assert!(QuorumConfig::new(0, 0, 0, 1).is_err());
    assert!(QuorumConfig::new(4, 0, 0, 0).is_err());
}

#[test]
fn reader_threshold() {
    let th = |e, k| k_threshold(&QuorumConfig { n: 9, f: 0, e, k });
    assert_eq!(th(1, 1), 3);
    assert_eq!(th(0, 2), 2);
    assert_eq!(th(0, 1), 1);
}

/// Smallest pairwise intersection of quorum-sized subsets, by enumeration.
fn min_intersection(n: usize, q: usize) -> usize {
    let sets: Vec<u32> = (0u32..1 << n).filter(|m| m.count_ones() as usize == q).collect();
    let mut best = n;
    for a in &sets {
        for b in &sets {
            best = best.min((a & b).count_ones() as usize);
        }
    }
    best
}

#[test]
fn quorums_intersect_exhaustively() {
    for n in 1..=7 {
        for f in 0..n {
            for e in 0..n {
                for k in 1..=n {
                    let Ok(cfg) = QuorumConfig::new(n, f, e, k) else { continue };
                    let q = cfg.quorum_size();
                    assert!(min_intersection(n, q) >= k + 2 * e, "{cfg:?}");
                    assert!(n - f >= q, "{cfg:?}");
                }
            }
        }
    }
}

#[test]
fn max_phase_examples() {
    let mut s = server(None, 2);
    assert_eq!(s.max_phase(&[Phase::Fin, Phase::Finalized]), Tag::T0);
    s.set_records([rec(t(2, 1), Some(4), Phase::Pre)]);
    assert_eq!(s.max_phase(&[Phase::Fin, Phase::Finalized]), Tag::T0);
    s.set_records([rec(t(2, 1), Some(4), Phase::Pre), rec(t(1, 3), None, Phase::Finalized)]);
    assert_eq!(s.max_phase(&Phase::ALL), t(2, 1));
    assert_eq!(s.max_phase(&[Phase::Finalized]), t(1, 3));
}

#[test]
fn phase_ladder() {
    assert_eq!(upgrade_phase(Phase::Pre, Phase::Fin), Phase::Fin);
    assert_eq!(upgrade_phase(Phase::Finalized, Phase::Pre), Phase::Finalized);
    assert_eq!(upgrade_phase(Phase::Fin, Phase::Finalized), Phase::Finalized);
    assert_eq!(upgrade_phase(Phase::Pre, Phase::Finalized), Phase::Pre);
    assert_eq!(upgrade_phase(Phase::Fin, Phase::Pre), Phase::Fin);
}

#[test]
fn update_phase_examples() {
    let mut s = server(None, 2);
    s.set_records([rec(t(2, 1), Some(7), Phase::Pre)]);
    s.update_phase(t(2, 1), None, Phase::Fin);
    assert_eq!(records(&s), vec![rec(t(2, 1), Some(7), Phase::Fin)]);

    let mut s = server(None, 2);
    s.update_phase(t(2, 1), None, Phase::Fin);
    assert_eq!(records(&s), vec![rec(t(2, 1), None, Phase::Fin)]);

    let mut s = server(None, 2);
    s.set_records([rec(t(2, 1), Some(7), Phase::Finalized)]);
    s.update_phase(t(2, 1), None, Phase::Pre);
    assert_eq!(records(&s), vec![rec(t(2, 1), Some(7), Phase::Finalized)]);

    s.update_phase(Tag::T0, Some(FieldElement(1)), Phase::Pre);
    assert_eq!(s.len(), 1);
}

#[test]
fn query_replies() {
    let mut s = server(None, 2);
    s.set_records([rec(t(2, 1), Some(7), Phase::Pre)]);
    assert_eq!(s.on_query(Role::Reader), Some(Msg::new(Some(Tag::T0), None, MsgPhase::Qry)));
    assert_eq!(s.on_query(Role::Writer), Some(Msg::new(Some(t(2, 1)), None, MsgPhase::Qry)));
}

#[test]
fn writer_query_suspended_above_top() {
    let mut s = server(Some(4), 2);
    s.set_records([rec(t(4, 5), None, Phase::Finalized)]);
    assert!(s.on_query(Role::Writer).is_some());
    s.set_records([rec(t(5, 1), None, Phase::Pre)]);
    assert_eq!(s.on_query(Role::Writer), None);
    assert!(s.on_query(Role::Reader).is_some());
}

#[test]
fn prewrite_examples() {
    let mut s = server(None, 2);
    let w = Some(FieldElement(9));
    assert_eq!(s.on_prewrite(t(1, 2), w), Some(Msg::new(Some(t(1, 2)), None, MsgPhase::Pre)));
    assert_eq!(records(&s), vec![rec(t(1, 2), Some(9), Phase::Pre)]);
    s.on_prewrite(t(1, 2), w);
    assert_eq!(records(&s), vec![rec(t(1, 2), Some(9), Phase::Pre)]);

    let mut s = server(None, 2);
    s.on_finalize(t(3, 1), Phase::Fin, Role::Writer);
    s.on_prewrite(t(3, 1), Some(FieldElement(5)));
    assert_eq!(records(&s), vec![rec(t(3, 1), Some(5), Phase::Fin)]);
}

#[test]
fn finalize_examples() {
    let mut s = server(None, 2);
    s.set_records([rec(t(2, 1), Some(7), Phase::Pre)]);
    let r = s.on_finalize(t(2, 1), Phase::Fin, Role::Reader);
    assert_eq!(r, Some(Msg::new(Some(t(2, 1)), Some(FieldElement(7)), MsgPhase::Fin)));
    assert_eq!(records(&s), vec![rec(t(2, 1), Some(7), Phase::Fin)]);

    let mut s = server(None, 2);
    let r = s.on_finalize(t(2, 1), Phase::Fin, Role::Reader);
    assert_eq!(r, Some(Msg::new(Some(t(2, 1)), None, MsgPhase::Fin)));
    assert_eq!(records(&s), vec![rec(t(2, 1), None, Phase::Fin)]);

    let mut s = server(None, 2);
    s.on_prewrite(t(1, 4), Some(FieldElement(3)));
    s.on_finalize(t(1, 4), Phase::Fin, Role::Writer);
    let r = s.on_finalize(t(1, 4), Phase::Finalized, Role::Writer);
    assert_eq!(r, Some(Msg::new(Some(t(1, 4)), None, MsgPhase::Finalized)));
    assert_eq!(s.get(t(1, 4)).unwrap().phase, Phase::Finalized);

    // t0 reads return the default element.
    let mut s = server(None, 2);
    let r = s.on_finalize(Tag::T0, Phase::Fin, Role::Reader);
    assert_eq!(r, Some(Msg::new(Some(Tag::T0), Some(FieldElement(0)), MsgPhase::Fin)));
}

#[test]
fn disabled_server_is_silent() {
    let mut s = server(None, 2);
    s.enabled = false;
    assert_eq!(s.on_query(Role::Reader), None);
    assert_eq!(s.on_prewrite(t(1, 1), None), None);
    assert_eq!(s.on_gossip(), None);
}

#[test]
fn gossip_from_safe_start() {
    let mut s = server(None, 2);
    let out = s.on_gossip().unwrap();
    assert_eq!(out.emit, TagTriple::default());
    assert_eq!(out.reset, None);
}

#[test]
fn gossip_finalizes_quorum_fin() {
    let mut s = server(None, 2);
    for j in 2..=5 {
        s.receive_gossip(NodeId(j), TagTriple::new(t(3, 2), t(3, 2), Tag::T0));
    }
    let out = s.on_gossip().unwrap();
    assert_eq!(out.emit.finalized, t(3, 2));
    assert_eq!(s.get(t(3, 2)).unwrap().phase, Phase::Finalized);
}

#[test]
fn gossip_below_quorum_does_not_finalize() {
    let mut s = server(None, 2);
    for j in 2..=3 {
        s.receive_gossip(NodeId(j), TagTriple::new(t(3, 2), t(3, 2), Tag::T0));
    }
    let out = s.on_gossip().unwrap();
    assert_eq!(out.emit.fin, t(3, 2));
    assert_eq!(out.emit.finalized, Tag::T0);
}

#[test]
fn gossip_absorbs_larger_pre() {
    let mut s = server(None, 2);
    s.receive_gossip(NodeId(3), TagTriple::new(t(9, 1), Tag::T0, Tag::T0));
    let out = s.on_gossip().unwrap();
    assert_eq!(out.emit.pre, t(9, 1));
    assert_eq!(s.get(t(9, 1)), Some(rec(t(9, 1), None, Phase::Pre)));
}

#[test]
fn overflow_condition() {
    let mut s = server(Some(4), 2);
    assert_eq!(s.overflow_check(), None);

    s.set_records([rec(t(6, 1), None, Phase::Pre), rec(t(4, 2), Some(3), Phase::Finalized)]);
    let tuple = s.tag_tuple();
    assert_eq!(tuple, TagTriple::new(t(6, 1), t(4, 2), t(4, 2)));
    assert_eq!(s.overflow_check(), None, "views still blank");
    for j in 1..=5 {
        s.receive_gossip(NodeId(j), tuple);
    }
    assert_eq!(s.overflow_check(), Some(t(4, 2)));

    s.receive_gossip(NodeId(4), TagTriple::new(t(6, 1), t(6, 1), t(4, 2)));
    assert_eq!(s.overflow_check(), None, "views unequal");

    let mut s = server(None, 2);
    s.set_records([rec(t(1000, 1), None, Phase::Finalized)]);
    assert_eq!(s.overflow_check(), None, "unbounded");
}

#[test]
fn local_reset_examples() {
    let mut s = server(Some(8), 2);
    s.set_records([
        rec(t(7, 3), Some(9), Phase::Fin),
        rec(t(8, 1), None, Phase::Pre),
        rec(t(2, 2), Some(1), Phase::Finalized),
    ]);
    s.local_reset(t(7, 3));
    assert_eq!(records(&s), vec![rec(t(1, 3), Some(9), Phase::Finalized)]);
    s.local_reset(t(1, 3));
    assert_eq!(records(&s), vec![rec(t(1, 3), Some(9), Phase::Finalized)]);
    s.local_reset(Tag::T0);
    assert!(s.is_empty());
}

#[test]
fn relevant_examples() {
    let one = vec![rec(t(3, 2), Some(1), Phase::Pre)];
    assert_eq!(relevant(&one, 0), one);

    // One not-yet-FINALIZED tag per owner: all kept.
    let spread: Vec<Record> = (1..=5).map(|j| rec(t(4, j), Some(j as u64), Phase::Fin)).collect();
    assert_eq!(relevant(&spread, 0), spread);

    // Chain by one owner: all but the top are implicitly FINALIZED; only the
    // delta + 1 largest of those survive, plus the top.
    let chain: Vec<Record> = (1..=8).map(|z| rec(t(z, 2), None, Phase::Fin)).collect();
    let kept: Vec<Tag> = relevant(&chain, 2).into_iter().map(|r| r.tag).collect();
    assert_eq!(kept, vec![t(5, 2), t(6, 2), t(7, 2), t(8, 2)]);
}

#[test]
fn gc_restores_bound_on_stuffed_storage() {
    let mut s = server(Some(1000), 2);
    let junk = (1..=100u64).map(|i| rec(t(i, (i % 5) as u32 + 1), Some(i % 257), if i % 3 == 0 { Phase::Finalized } else { Phase::Fin }));
    s.set_records(junk);
    assert_eq!(s.len(), 100);
    s.gc();
    assert!(s.len() <= 5 + 2 + 3, "{}", s.len());
}

fn arb_record() -> impl Strategy<Value = Record> {
    (1u64..30, 1u32..=5, prop::option::of(0u64..257), 0usize..3).prop_map(|(z, o, w, p)| rec(t(z, o), w, Phase::ALL[p]))
}

proptest! {
    #[test]
    fn relevant_is_bounded_and_idempotent(rs in prop::collection::vec(arb_record(), 0..80), delta in 0usize..4) {
        let mut s = server(Some(1000), delta);
        s.set_records(rs);
        s.gc();
        let once = records(&s);
        prop_assert!(once.len() <= 5 + delta + 3);
        s.gc();
        prop_assert_eq!(records(&s), once.clone());
        prop_assert_eq!(relevant(&once, delta), once);
    }

    #[test]
    fn relevant_keeps_the_maxima(rs in prop::collection::vec(arb_record(), 1..60), delta in 0usize..4) {
        let mut s = server(None, delta);
        s.set_records(rs);
        let before = s.tag_tuple();
        let recs = records(&s);
        let kept = relevant(&recs, delta);
        s.set_records(kept);
        prop_assert_eq!(s.tag_tuple(), before);
    }

    #[test]
    fn phases_only_climb(ops in prop::collection::vec((1u64..4, 0usize..3), 1..40)) {
        let mut s = server(None, 2);
        let mut seen = std::collections::BTreeMap::new();
        for (z, p) in ops {
            let tag = t(z, 1);
            s.update_phase(tag, None, Phase::ALL[p]);
            let now = s.get(tag).unwrap().phase;
            if let Some(prev) = seen.insert(tag, now) {
                prop_assert!(now >= prev);
            }
        }
    }

    #[test]
    fn successor_exceeds_every_input(z in 0u64..1000, o in 1u32..8, w in 1u32..8) {
        let base = if z == 0 { Tag::T0 } else { t(z, o) };
        prop_assert!(tag_successor(base, NodeId(w)) > base);
    }
}
