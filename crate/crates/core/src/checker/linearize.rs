use std::collections::HashSet;

use crate::coding::FieldElement;

use super::history::{OpHistory, OpKind};

/// One register operation for the linearization search. Positions are
/// indices into a global event order.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LinOp {
    pub write: bool,
    pub value: FieldElement,
    pub invoke: usize,
    pub response: Option<usize>,
    /// Optional operations may take effect or be dropped.
    pub required: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LinResult {
    Linearizable,
    NotLinearizable,
    /// The search exceeded its state budget.
    Unknown,
}

pub const MAX_LIN_OPS: usize = 128;

/// Memoized depth-first search for a sequential register order that
/// respects real time. `init` is the register's initial value; `None`
/// means no read may return it.
pub fn linearizable(ops: &[LinOp], init: Option<FieldElement>, budget: usize) -> LinResult {
    if ops.len() > MAX_LIN_OPS {
        return LinResult::Unknown;
    }
    let required: u128 = ops.iter().enumerate().filter(|(_, o)| o.required).fold(0, |m, (i, _)| m | 1 << i);
    let mut seen: HashSet<(u128, Option<FieldElement>)> = HashSet::new();
    let mut stack = vec![(0u128, init)];
    while let Some((mask, cur)) = stack.pop() {
        if mask & required == required {
            return LinResult::Linearizable;
        }
        if !seen.insert((mask, cur)) {
            continue;
        }
        if seen.len() > budget {
            return LinResult::Unknown;
        }
        let pending = |i: usize| mask & (1 << i) == 0;
        let horizon = ops
            .iter()
            .enumerate()
            .filter(|&(i, o)| pending(i) && o.required)
            .filter_map(|(_, o)| o.response)
            .min()
            .unwrap_or(usize::MAX);
        for (i, o) in ops.iter().enumerate() {
            if !pending(i) || o.invoke >= horizon {
                continue;
            }
            if !o.write && Some(o.value) != cur {
                continue;
            }
            // Optional operations that finished before `o` began can no
            // longer take effect.
            let dropped = ops
                .iter()
                .enumerate()
                .filter(|&(j, p)| pending(j) && !p.required && p.response.is_some_and(|r| r < o.invoke))
                .fold(0u128, |m, (j, _)| m | 1 << j);
            let next = if o.write { Some(o.value) } else { cur };
            stack.push((mask | 1 << i | dropped, next));
        }
    }
    LinResult::NotLinearizable
}

/// Builds the search input from a history: checkable operations at `scope`
/// are required, other writes are optional.
pub fn lin_ops(h: &OpHistory, scope: &[usize]) -> Vec<LinOp> {
    let in_scope: HashSet<usize> = scope.iter().copied().collect();
    let mut out = Vec::new();
    for (i, r) in h.ops.iter().enumerate() {
        let required = in_scope.contains(&i) && r.checkable();
        let Some(value) = r.value else { continue };
        if !required && r.kind == OpKind::Read {
            continue;
        }
        if !required && r.tag.is_none() {
            // Never reached the pre-write phase.
            continue;
        }
        out.push(LinOp {
            write: r.kind == OpKind::Write,
            value,
            invoke: if r.phantom { 0 } else { r.invoke_seq },
            response: if r.is_complete() { r.response_seq() } else { None },
            required,
        });
    }
    out
}

/// Runs the search on a history's legal suffix. `None` when no suffix exists.
pub fn check_linearizable(h: &OpHistory, budget: usize) -> Option<LinResult> {
    let scope = h.legal_suffix()?;
    let ops = lin_ops(h, &scope);
    let init = h.safe.then_some(h.v0);
    Some(linearizable(&ops, init, budget))
}
