use super::trace::{Event, EventKind, Trace};

/// Online asynchronous-cycle detector fed with trace events.
///
/// A cycle ends once every live server has completed a gossip round trip
/// with every live peer, and every active client has either finished a
/// request phase or completed a ping round trip with every live server,
/// counting only round trips that departed after the cycle began.
#[derive(Clone, Debug)]
pub struct CycleCounter {
    n: usize,
    index: u64,
    start: u64,
    crashed: Vec<bool>,
    active: Vec<bool>,
    round_done: Vec<bool>,
    server_rtt: Vec<u64>,
    client_rtt: Vec<u64>,
    progressed: bool,
}

fn bit(i: usize) -> u64 {
    1u64 << i
}

impl CycleCounter {
    pub fn new(n: usize) -> CycleCounter {
        assert!(n <= 64, "cycle counter supports at most 64 nodes");
        CycleCounter {
            n,
            index: 0,
            start: 0,
            crashed: vec![false; n],
            active: vec![false; n],
            round_done: vec![false; n],
            server_rtt: vec![0; n],
            client_rtt: vec![0; n],
            progressed: false,
        }
    }

    pub fn index(&self) -> u64 {
        self.index
    }

    fn live_mask(&self) -> u64 {
        (0..self.n).filter(|&i| !self.crashed[i]).fold(0, |m, i| m | bit(i))
    }

    fn complete(&self) -> bool {
        if !self.progressed {
            return false;
        }
        let live = self.live_mask();
        (0..self.n).filter(|&i| !self.crashed[i]).all(|i| {
            let peers = live & !bit(i);
            let server_ok = self.server_rtt[i] & peers == peers;
            let client_ok = !self.active[i] || self.round_done[i] || self.client_rtt[i] & live == live;
            server_ok && client_ok
        })
    }

    /// Feeds one event; returns the new cycle index when a boundary is crossed.
    pub fn observe(&mut self, ev: &Event) -> Option<u64> {
        let Some(i) = ev.node_id().map(|n| n.index()).filter(|&i| i < self.n) else {
            return None;
        };
        match &ev.kind {
            EventKind::Rtt { peer, dep, client } => {
                if *dep < self.start || peer.index() >= self.n {
                    return None;
                }
                self.progressed = true;
                if *client {
                    self.client_rtt[i] |= bit(peer.index());
                } else {
                    self.server_rtt[i] |= bit(peer.index());
                }
            }
            EventKind::Active { on } => {
                self.active[i] = *on;
                if *on {
                    self.round_done[i] = false;
                    self.client_rtt[i] = 0;
                }
            }
            EventKind::Qrm { .. } => self.round_done[i] = true,
            EventKind::Crash => self.crashed[i] = true,
            EventKind::Resume => {
                self.crashed[i] = false;
                self.server_rtt[i] = 0;
            }
            _ => return None,
        }
        if !self.complete() {
            return None;
        }
        self.index += 1;
        self.start = ev.step;
        self.progressed = false;
        self.server_rtt.iter_mut().for_each(|m| *m = 0);
        self.client_rtt.iter_mut().for_each(|m| *m = 0);
        self.round_done.iter_mut().for_each(|d| *d = false);
        Some(self.index)
    }
}

/// Recomputes cycle boundaries `(index, step)` from a trace's progress events.
pub fn count_cycles(trace: &Trace) -> Vec<(u64, u64)> {
    let Some(init) = trace.init() else { return Vec::new() };
    let mut c = CycleCounter::new(init.n);
    trace
        .events
        .iter()
        .filter_map(|e| c.observe(e).map(|i| (i, e.step)))
        .collect()
}
