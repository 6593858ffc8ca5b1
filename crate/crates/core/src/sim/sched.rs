use std::collections::BTreeSet;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::protocol::NodeId;

use super::scenario::SchedulerKind;

/// Picks the next step among the enabled ones. Each candidate is an actor
/// index paired with the node that would execute the step.
#[derive(Clone, Debug)]
pub struct Scheduler {
    kind: SchedulerKind,
    next: usize,
    weights: Vec<u32>,
    window: u64,
    fair_until: u64,
    rng: ChaCha8Rng,
}

impl Scheduler {
    pub fn new(kind: SchedulerKind, n: usize, starve: &BTreeSet<NodeId>, window: u64, mut rng: ChaCha8Rng) -> Scheduler {
        let weights = (1..=n as u32)
            .map(|i| if starve.contains(&NodeId(i)) { 0 } else { rng.gen_range(1..=8) })
            .collect();
        Scheduler { kind, next: 0, weights, window, fair_until: 0, rng }
    }

    /// Whether the next pick is round-robin.
    pub fn is_fair(&self, step: u64) -> bool {
        match self.kind {
            SchedulerKind::Fair => true,
            SchedulerKind::WeightedUnfair => false,
            SchedulerKind::SeldomFair => step < self.fair_until,
        }
    }

    /// `trigger` reports an overflow or reset in progress; under seldom
    /// fairness it (re)opens the fair window.
    pub fn pick(&mut self, enabled: &[(usize, NodeId)], step: u64, trigger: bool) -> Option<usize> {
        if trigger {
            self.fair_until = self.fair_until.max(step.saturating_add(self.window));
        }
        if enabled.is_empty() {
            return None;
        }
        if self.is_fair(step) {
            let chosen = enabled
                .iter()
                .find(|(a, _)| *a >= self.next)
                .or_else(|| enabled.first())
                .map(|(a, _)| *a)?;
            self.next = chosen + 1;
            return Some(chosen);
        }
        let total: u64 = enabled.iter().map(|(_, n)| self.weights[n.index()] as u64).sum();
        if total == 0 {
            return None;
        }
        let mut r = self.rng.gen_range(0..total);
        for (a, n) in enabled {
            let w = self.weights[n.index()] as u64;
            if r < w {
                return Some(*a);
            }
            r -= w;
        }
        unreachable!("weighted pick stays below the total")
    }
}
