//! Acceptance suite: one PASS/FAIL line per criterion. Thresholds are fixed
//! here; wall-clock limits assume the optimized test profile.

use std::collections::{BTreeMap, HashMap};
use std::time::{Duration, Instant};

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use cas_core::checker::{
    self, check_atomicity, check_linearizable, measure_recovery, overflow_report, read_stats, storage_report, LinResult,
    OpHistory, OpKind, ReadStats, Verdict,
};
use cas_core::coding::{privacy_census, rs_decode, share_secret, Field, FieldElement, ShareVector};
use cas_core::protocol::{NodeId, Phase, QuorumConfig, Tag};
use cas_core::reset::PSI_CYCLES;
use cas_core::sim::{run, EventKind, Scenario, ScriptOp, Simulator, Trace};

struct Line {
    id: u32,
    pass: bool,
    detail: String,
}

fn line(id: u32, pass: bool, detail: impl Into<String>) -> Line {
    Line { id, pass, detail: detail.into() }
}

fn within(t: Instant, limit_s: u64) -> (bool, Duration) {
    let d = t.elapsed();
    (d < Duration::from_secs(limit_s), d)
}

fn k_subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    (0u32..1 << n)
        .filter(|m| m.count_ones() as usize == k)
        .map(|m| (0..n).filter(|i| m >> i & 1 == 1).map(|i| i + 1).collect())
        .collect()
}

fn c1_mds_round_trip() -> Line {
    const RUNTIME_S: u64 = 10;
    let t = Instant::now();
    let field = Field::new(257).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (mut trials, mut failures) = (0u64, 0u64);
    for k in 1..=3 {
        let subsets = k_subsets(7, k);
        for _ in 0..1000 {
            let secret = FieldElement(rng.gen_range(0..257));
            let (poly, shares) = share_secret(&field, secret, k, 7, &mut rng).unwrap();
            for s in &subsets {
                let mut sv = ShareVector::erased(7);
                for &j in s {
                    sv.set(j, shares.get(j).unwrap());
                }
                trials += 1;
                if rs_decode(&field, &sv, k).as_ref() != Some(&poly) {
                    failures += 1;
                }
            }
        }
    }
    let (fast, d) = within(t, RUNTIME_S);
    line(1, failures == 0 && fast, format!("{trials} decodes, {failures} failures, {d:.2?} (limit {RUNTIME_S}s)"))
}

fn c2_robust_decode() -> Line {
    const RUNTIME_S: u64 = 30;
    const PATTERNS: usize = 500;
    let t = Instant::now();
    let (n, k) = (7, 2);
    let field = Field::new(257).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (mut cases, mut failures) = (0, 0);
    for errors in 0..=2usize {
        for erasures in 0..(n - k + 1 - 2 * errors) {
            cases += 1;
            for _ in 0..PATTERNS {
                let secret = FieldElement(rng.gen_range(0..257));
                let (poly, mut sv) = share_secret(&field, secret, k, n, &mut rng).unwrap();
                let picked = sample(&mut rng, n, errors + erasures).into_vec();
                for &i in &picked[..errors] {
                    let w = sv.get(i + 1).unwrap();
                    sv.set(i + 1, FieldElement((w.0 + rng.gen_range(1..257)) % 257));
                }
                for &i in &picked[errors..] {
                    sv.erase(i + 1);
                }
                if rs_decode(&field, &sv, k).as_ref() != Some(&poly) {
                    failures += 1;
                }
            }
        }
    }
    let (fast, d) = within(t, RUNTIME_S);
    line(
        2,
        failures == 0 && fast,
        format!("{cases} (e',f') pairs x {PATTERNS} patterns, {failures} failures, {d:.2?} (limit {RUNTIME_S}s)"),
    )
}

fn c3_privacy_census() -> Line {
    const RUNTIME_S: u64 = 5;
    let t = Instant::now();
    let mut checked = 0;
    let mut bad = Vec::new();
    for (p, k) in [(11u64, 2usize), (5, 3)] {
        let field = Field::new(p).unwrap();
        let n = (p - 1) as usize;
        for positions in k_subsets(n, k - 1) {
            for code in 0..p.pow((k - 1) as u32) {
                let mut sv = ShareVector::erased(n);
                let mut c = code;
                for &j in &positions {
                    sv.set(j, FieldElement(c % p));
                    c /= p;
                }
                let census = privacy_census(&field, &sv, k).unwrap();
                checked += 1;
                // k-1 constraints leave exactly one polynomial per secret.
                if census.len() != p as usize || census.values().any(|&c| c != 1) {
                    bad.push(format!("p={p} k={k} shares={sv}"));
                }
            }
        }
    }
    let (fast, d) = within(t, RUNTIME_S);
    line(3, bad.is_empty() && fast, format!("{checked} share sets, {} non-uniform, {d:.2?} (limit {RUNTIME_S}s)", bad.len()))
}

fn c4_quorum_intersection() -> Line {
    let mut configs = 0;
    let mut bad = Vec::new();
    for n in 5..=7usize {
        for k in 1..=n {
            for e in 0..=n {
                for f in 0..=n {
                    let Ok(cfg) = QuorumConfig::new(n, f, e, k) else { continue };
                    configs += 1;
                    let q = cfg.quorum_size();
                    if q != (n + k + 2 * e).div_ceil(2) || n - f < q {
                        bad.push(format!("N={n} f={f} e={e} k={k}: size {q}"));
                    }
                    let sets: Vec<u32> = (0u32..1 << n).filter(|m| m.count_ones() as usize == q).collect();
                    let min = sets
                        .iter()
                        .flat_map(|a| sets.iter().map(move |b| (a & b).count_ones() as usize))
                        .min()
                        .unwrap();
                    if min < k + 2 * e {
                        bad.push(format!("N={n} f={f} e={e} k={k}: intersection {min}"));
                    }
                }
            }
        }
    }
    line(4, bad.is_empty() && configs > 0, format!("{configs} valid (N,f,e,k) configurations, {} violations {bad:?}", bad.len()))
}

fn adversity_scenario(seed: u64) -> Scenario {
    let mut text = String::from("n=5 f=1 e=1 k=1 sched=weighted-unfair\n");
    let mut v = 1;
    for w in 1..=3 {
        for _ in 0..10 {
            text += &format!("client {w} write {v}\nclient {w} sleep {}\n", 900 + 300 * w);
            v += 1;
        }
    }
    for _ in 0..10 {
        text += "client 4 read\nclient 5 read\n";
    }
    text += "fault crash 3 at 4000\nfault resume 3 at 8000\nfault malicious 4\n";
    let mut sc = Scenario::parse(&text).unwrap();
    sc.seed = seed;
    sc
}

/// Every read that returned a value matches the write holding its tag.
fn reads_match_writes(h: &OpHistory) -> (usize, usize) {
    let writes: HashMap<_, _> = h
        .ops
        .iter()
        .filter(|r| r.kind == OpKind::Write)
        .filter_map(|w| w.version(h).map(|v| (v, w.value)))
        .collect();
    let mut checked = 0;
    let mut bad = 0;
    for r in h.ops.iter().filter(|r| r.kind == OpKind::Read && r.is_complete() && r.value.is_some()) {
        let Some(v) = r.version(h) else { continue };
        checked += 1;
        let want = if v.tag == Tag::T0 { Some(h.v0) } else { writes.get(&v).copied().flatten() };
        if want != r.value {
            bad += 1;
        }
    }
    (checked, bad)
}

fn c5_c6_adversity() -> (Line, Line) {
    const RUNTIME_S: u64 = 60;
    const SEEDS: u64 = 100;
    const LIN_BUDGET: usize = 2_000_000;
    const QUIESCENT_MIN: f64 = 0.95;
    let t = Instant::now();
    let mut atom_fail = Vec::new();
    let mut disagree = Vec::new();
    let mut largest = 0;
    let mut stats = ReadStats::default();
    let (mut checked, mut wrong) = (0, 0);
    for seed in 0..SEEDS {
        let trace = run(&adversity_scenario(seed)).unwrap();
        let h = OpHistory::from_trace(&trace);
        let scope = h.legal_suffix().unwrap_or_default();
        let tag_ok = !scope.is_empty() && check_atomicity(&h, &scope).is_ok();
        if !tag_ok {
            atom_fail.push(seed);
        }
        largest = largest.max(scope.len());
        let lin = check_linearizable(&h, LIN_BUDGET);
        if (lin == Some(LinResult::Linearizable)) != tag_ok {
            disagree.push((seed, lin));
        }
        let s = read_stats(&trace);
        stats.reads += s.reads;
        stats.valued += s.valued;
        stats.quiescent += s.quiescent;
        stats.quiescent_valued += s.quiescent_valued;
        let (c, b) = reads_match_writes(&h);
        checked += c;
        wrong += b;
    }
    let (fast, d) = within(t, RUNTIME_S);
    let c5 = line(
        5,
        atom_fail.is_empty() && disagree.is_empty() && fast,
        format!(
            "{SEEDS} seeds, atomicity failures {atom_fail:?}, oracle disagreements {disagree:?}, largest history {largest} ops, {d:.2?} (limit {RUNTIME_S}s)"
        ),
    );
    let ratio = stats.quiescent_valued as f64 / stats.quiescent.max(1) as f64;
    let c6 = line(
        6,
        wrong == 0 && stats.quiescent > 0 && ratio >= QUIESCENT_MIN,
        format!(
            "{checked} valued reads, {wrong} mismatched; quiescent reads {}/{} non-bottom ({:.1}%, need {:.0}%)",
            stats.quiescent_valued,
            stats.quiescent,
            100.0 * ratio,
            100.0 * QUIESCENT_MIN
        ),
    );
    (c5, c6)
}

fn stabilization_scenario(seed: u64, scope: &str) -> Scenario {
    let text = format!(
        "n=5 f=1 e=1 k=1 sched=fair seed={seed}
client 1 write 1
client 1 write 2
client 1 write 3
client 2 write 4
client 2 write 5
client 3 read
client 3 read
client 3 read
client 4 read
client 4 read
fault transient ceiling=16 scope={scope}
"
    );
    Scenario::parse(&text).unwrap()
}

fn c7_stabilization() -> Line {
    const RUNTIME_S: u64 = 60;
    const SEEDS: u64 = 50;
    const MAX_CYCLES: u64 = 8;
    let t = Instant::now();
    let mut worst = 0;
    let mut bad = Vec::new();
    for seed in 0..SEEDS {
        let trace = run(&stabilization_scenario(seed, "all")).unwrap();
        match measure_recovery(&trace) {
            Ok(r) => {
                worst = worst.max(r.cycle);
                if r.cycle > MAX_CYCLES {
                    bad.push(format!("seed {seed}: {} cycles", r.cycle));
                }
            }
            Err(m) => bad.push(format!("seed {seed}: {m}")),
        }
        if let Verdict::Fail(m) = checker::atomicity(&trace) {
            bad.push(format!("seed {seed}: {m}"));
        }
    }
    let (fast, d) = within(t, RUNTIME_S);
    line(
        7,
        bad.is_empty() && fast,
        format!("{SEEDS} seeds, worst recovery {worst} cycles (limit {MAX_CYCLES}), problems {bad:?}, {d:.2?} (limit {RUNTIME_S}s)"),
    )
}

fn c8_storage_bound() -> Line {
    const SEEDS: u64 = 20;
    const STUFFED: usize = 100;
    let mut report = Vec::new();
    let mut pass = true;
    for delta in [0usize, 2] {
        let clients = if delta == 0 {
            // One client, strictly sequential operations.
            "client 1 write 1\nclient 1 read\nclient 1 write 2\nclient 1 read\nclient 1 write 3\nclient 1 read\n".to_string()
        } else {
            // Two writers concurrent with each read.
            "client 1 write 1\nclient 1 write 2\nclient 1 write 3\nclient 2 write 4\nclient 2 write 5\nclient 2 write 6\n\
             client 3 read\nclient 3 read\nclient 3 read\nclient 3 read\n"
                .to_string()
        };
        let bound = 5 + delta + 3;
        let (mut worst, mut stuffed) = (0, 0);
        for seed in 0..SEEDS {
            let text = format!(
                "n=5 f=1 e=1 k=1 maxint=1000 delta={delta} sched=fair seed={seed}\n{clients}\
                 fault transient ceiling=40 records={STUFFED} exact=1 scope=storage\n"
            );
            let trace = run(&Scenario::parse(&text).unwrap()).unwrap();
            let rep = storage_report(&trace, bound);
            worst = worst.max(rep.max_checked);
            stuffed = stuffed.max(rep.max_overall);
            pass &= rep.breach.is_none() && rep.max_overall == STUFFED && trace.is_complete();
        }
        report.push(format!("delta={delta}: max {worst} <= {bound} after first handler (initial {stuffed})"));
    }
    line(8, pass, format!("{SEEDS} seeds each; {}", report.join("; ")))
}

fn overflow_scenario(seed: u64) -> Scenario {
    let mut text = format!("n=5 f=1 e=1 k=1 maxint=4 delta=2 sched=seldom-fair seed={seed}\n");
    // Two writers race past maxint; the driver below takes over once a reset starts.
    for v in 11..=20 {
        text += &format!("client 1 write {v}\n");
    }
    for v in 31..=40 {
        text += &format!("client 3 write {v}\n");
    }
    text += "client 2 read\nclient 2 read\n";
    Scenario::parse(&text).unwrap()
}

/// Runs one overflow scenario as a client driver:
/// - once a tag above `t_top` exists, idle node 4 starts a write whose query must be suspended;
/// - clients stop issuing operations when the first reset starts;
/// - once it completes the storages are inspected and node 1 reads, then
///   issues `2 * ZMAX` writes.
///
/// The kept record has counter 1, so only counters `2..=ZMAX` fit below
/// `t_top`: those `ZMAX - 1` writes must all succeed, and at least `ZMAX`
/// must succeed in total, across the next overflow.
fn overflow_run(seed: u64) -> Result<(), String> {
    const ZMAX: u64 = 4;
    let sc = overflow_scenario(seed);
    let field = Field::new(sc.p).unwrap();
    let top = Tag::new(ZMAX, NodeId(sc.n as u32));
    let mut sim = Simulator::new(&sc).map_err(|e| e.to_string())?;
    let mut kept: Option<(Tag, Option<FieldElement>)> = None;
    let (mut probed, mut started, mut seen) = (false, false, 0);
    while sim.advance() {
        let fresh = sim.events()[seen..].to_vec();
        seen = sim.events().len();
        if !probed && sim.state().nodes.iter().any(|n| n.server.max_phase(&Phase::ALL) > top) {
            probed = true;
            sim.set_script(NodeId(4), [ScriptOp::Write(41)]);
        }
        if !started && fresh.iter().any(|e| matches!(e.kind, EventKind::ResetInit { .. })) {
            started = true;
            for id in 1..=sc.n as u32 {
                sim.set_script(NodeId(id), []);
            }
        }
        let Some(tag) = fresh.iter().find_map(|e| match e.kind {
            EventKind::ResetComplete { tag } => Some(tag),
            _ => None,
        }) else {
            continue;
        };
        if kept.is_some() {
            continue;
        }
        let owner = tag.owner().ok_or("reset with t0")?;
        let mut sv = ShareVector::erased(sc.n);
        for nd in sim.state().nodes.iter().filter(|n| !n.crashed) {
            let recs: Vec<_> = nd.server.records().collect();
            match recs.as_slice() {
                [r] if r.tag == Tag::new(1, owner) && r.phase == Phase::Finalized => {
                    if let Some(w) = r.element {
                        sv.set(nd.id.0 as usize, w);
                    }
                }
                _ => return Err(format!("server {} holds {recs:?} after reset", nd.id)),
            }
        }
        kept = Some((tag, rs_decode(&field, &sv, sc.k).map(|p| p.secret())));
        let after = std::iter::once(ScriptOp::Read).chain((0..2 * ZMAX).map(|i| ScriptOp::Write(51 + i)));
        sim.set_script(NodeId(1), after);
    }
    let trace: Trace = sim.into_trace();
    let (tag, value) = kept.ok_or("no reset completed")?;
    let h = OpHistory::from_trace(&trace);
    let done_seq = trace
        .events
        .iter()
        .position(|e| matches!(e.kind, EventKind::ResetComplete { .. }))
        .ok_or("no reset-complete event")?;
    let last_done = h
        .ops
        .iter()
        .filter(|r| r.kind == OpKind::Write && r.is_complete() && r.epoch == 0)
        .filter_map(|r| r.tag)
        .max()
        .ok_or("no write completed before the reset")?;
    if tag < last_done {
        return Err(format!("reset kept {tag}, below completed write {last_done}"));
    }
    let source = h.ops.iter().find(|r| r.kind == OpKind::Write && r.epoch == 0 && r.tag == Some(tag));
    if source.map(|w| w.value) != Some(value) {
        return Err(format!("kept value {value:?} is not the value written with {tag}"));
    }
    let rep = overflow_report(&trace).ok_or("not bounded")?;
    if rep.leaked > 0 || rep.suspended == 0 {
        return Err(format!("writer queries: {} suspended, {} answered above t_top", rep.suspended, rep.leaked));
    }
    if let Verdict::Fail(m) = checker::resets(&trace, PSI_CYCLES) {
        return Err(m);
    }
    let post: Vec<_> = h.ops.iter().filter(|r| r.invoke_seq > done_seq).collect();
    match post.first() {
        Some(r) if r.kind == OpKind::Read && r.is_complete() && r.value == value => {}
        other => return Err(format!("first operation after the reset: {other:?}, kept {value:?}")),
    }
    let writes: Vec<bool> = post.iter().filter(|r| r.kind == OpKind::Write).map(|r| r.is_complete()).collect();
    let total = writes.iter().filter(|&&ok| ok).count() as u64;
    if writes.len() as u64 != 2 * ZMAX || !writes[..ZMAX as usize - 1].iter().all(|&ok| ok) || total < ZMAX {
        return Err(format!("writes after the reset: {writes:?}"));
    }
    if let Verdict::Fail(m) = checker::atomicity(&trace) {
        return Err(m);
    }
    Ok(())
}

fn c9_overflow_reset() -> Line {
    const SEEDS: u64 = 20;
    let errs: BTreeMap<u64, String> = (0..SEEDS).filter_map(|s| overflow_run(s).err().map(|e| (s, e))).collect();
    line(9, errs.is_empty(), format!("{SEEDS} seeds, maxint=4, psi={PSI_CYCLES}; failures {errs:?}"))
}

fn c10_comm_stabilization() -> Line {
    const SEEDS: u64 = 50;
    const FROM_CYCLE: u64 = 3;
    let mut bad = Vec::new();
    for seed in 0..SEEDS {
        let trace = run(&stabilization_scenario(seed, "buffers,tokens,gossip")).unwrap();
        if let Verdict::Fail(m) = checker::comm(&trace, FROM_CYCLE) {
            bad.push(format!("seed {seed}: {m}"));
        }
        if let Verdict::Fail(m) = checker::liveness(&trace) {
            bad.push(format!("seed {seed}: {m}"));
        }
    }
    line(10, bad.is_empty(), format!("{SEEDS} seeds, contract checked from cycle {FROM_CYCLE}; problems {bad:?}"))
}

fn main() {
    let mut lines = vec![c1_mds_round_trip(), c2_robust_decode(), c3_privacy_census(), c4_quorum_intersection()];
    let (c5, c6) = c5_c6_adversity();
    lines.extend([c5, c6, c7_stabilization(), c8_storage_bound(), c9_overflow_reset(), c10_comm_stabilization()]);
    let mut failed = 0;
    for l in &lines {
        println!("criterion {:>2}: {} {}", l.id, if l.pass { "PASS" } else { "FAIL" }, l.detail);
        failed += !l.pass as usize;
    }
    println!("acceptance: {} passed, {failed} failed", lines.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
