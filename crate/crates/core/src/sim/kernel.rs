use std::ops::Range;
use std::sync::atomic::Ordering;

use smallvec::SmallVec;

use super::{BadGate, NodeState};
use crate::fault::{FaultEntry, FaultId};
use crate::netlist::{mask, NodeId, NodeKind, RtlNode};

/// Result of evaluating one node for one cycle.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EvalDelta {
    pub node: NodeId,
    pub new_good: u64,
    pub new_bads: Vec<BadGate>,
    pub changed: bool,
}

#[inline]
fn eval_value(node: &RtlNode, args: &[u64]) -> u64 {
    match node.kind {
        NodeKind::Comb(op) => op.apply(node.width, args),
        NodeKind::Output | NodeKind::Virtual => args[0] & mask(node.width),
        NodeKind::Const(v) => v,
        // sources: the stored value is passed through
        NodeKind::Input | NodeKind::Reg { .. } => args.first().copied().unwrap_or(0) & mask(node.width),
    }
}

/// Good-gate evaluation. `fanin_goods` follows `node.fanin` order.
#[inline]
pub fn eval_good(node: &RtlNode, fanin_goods: &[u64]) -> u64 {
    eval_value(node, fanin_goods)
}

/// Candidate fids for this pass: fanin bad gates, active injections here,
/// and the node's own previous bad gates (so convergence is observed).
pub fn affected_fids(
    fanins: &[&NodeState],
    own: &NodeState,
    injected: &[FaultEntry],
    cycle: u32,
    out: &mut Vec<FaultId>,
) {
    out.clear();
    let mut lists: SmallVec<[&[BadGate]; 4]> = fanins.iter().map(|s| s.bads.as_slice()).collect();
    lists.push(&own.bads);
    let mut heads: SmallVec<[usize; 4]> = SmallVec::from_elem(0, lists.len());
    let mut inj = 0;
    loop {
        while inj < injected.len() && !injected[inj].is_active(cycle) {
            inj += 1;
        }
        let mut min: Option<FaultId> = injected.get(inj).map(|e| e.fid);
        for (list, &h) in lists.iter().zip(heads.iter()) {
            if let Some(b) = list.get(h) {
                if min.is_none_or(|m| b.fid < m) {
                    min = Some(b.fid);
                }
            }
        }
        let Some(fid) = min else { break };
        out.push(fid);
        for (list, h) in lists.iter().zip(heads.iter_mut()) {
            if list.get(*h).is_some_and(|b| b.fid == fid) {
                *h += 1;
            }
        }
        if injected.get(inj).is_some_and(|e| e.fid == fid) {
            inj += 1;
        }
    }
}

/// Bad-gate evaluation over `affected[range]`. Appends surviving
/// `(fid, value)` pairs to `out` in ascending fid order; values equal to
/// `new_good` are dropped.
#[allow(clippy::too_many_arguments)]
pub fn eval_bad_set_into(
    node: &RtlNode,
    fanins: &[&NodeState],
    injected: &[FaultEntry],
    new_good: u64,
    cycle: u32,
    affected: &[FaultId],
    range: Range<usize>,
    out: &mut Vec<BadGate>,
) {
    let fids = &affected[range];
    let Some(&first) = fids.first() else { return };
    let mut cursors: SmallVec<[usize; 3]> =
        fanins.iter().map(|s| s.bads.partition_point(|b| b.fid < first)).collect();
    let mut ic = injected.partition_point(|e| e.fid < first);
    let mut args: SmallVec<[u64; 3]> = SmallVec::new();
    for &fid in fids {
        args.clear();
        for (s, c) in fanins.iter().zip(cursors.iter_mut()) {
            let bads = &s.bads;
            while *c < bads.len() && bads[*c].fid < fid {
                *c += 1;
            }
            args.push(match bads.get(*c) {
                Some(b) if b.fid == fid => b.value,
                _ => s.good,
            });
        }
        let mut value = eval_value(node, &args);
        while ic < injected.len() && injected[ic].fid < fid {
            ic += 1;
        }
        if let Some(entry) = injected.get(ic) {
            if entry.fid == fid && entry.is_active(cycle) {
                value = entry.rule.apply(value, cycle);
                entry.fval.store(value, Ordering::Relaxed);
            }
        }
        if value != new_good {
            out.push(BadGate { fid, value });
        }
    }
}

pub fn eval_bad_set(
    node: &RtlNode,
    fanins: &[&NodeState],
    injected: &[FaultEntry],
    new_good: u64,
    cycle: u32,
    affected: &[FaultId],
    range: Range<usize>,
) -> Vec<BadGate> {
    let mut out = Vec::new();
    eval_bad_set_into(node, fanins, injected, new_good, cycle, affected, range, &mut out);
    out
}

/// Whether the node needs evaluation this cycle.
pub fn check_dependence_changed(fanins: &[&NodeState], injected: &[FaultEntry], cycle: u32, cold_start: bool) -> bool {
    cold_start
        || fanins.iter().any(|s| s.changed())
        || injected.iter().any(|e| !e.is_retired() && e.rule.kind.window_edge(cycle))
}

/// Full evaluation of a node: good gate first, then the whole bad set.
pub fn evaluate(
    node: &RtlNode,
    fanins: &[&NodeState],
    own: &NodeState,
    injected: &[FaultEntry],
    cycle: u32,
) -> EvalDelta {
    let goods: SmallVec<[u64; 3]> = fanins.iter().map(|s| s.good).collect();
    let new_good = eval_good(node, &goods);
    let mut affected = Vec::new();
    affected_fids(fanins, own, injected, cycle, &mut affected);
    let new_bads = eval_bad_set(node, fanins, injected, new_good, cycle, &affected, 0..affected.len());
    let changed = new_good != own.good || new_bads != own.bads;
    EvalDelta { node: node.id, new_good, new_bads, changed }
}

/// Register update at the cycle boundary. `cycle` is the cycle in which the
/// new value becomes visible; injections at the register are applied to the
/// incoming value.
pub fn sync_register(
    reg: &RtlNode,
    current: &NodeState,
    next: &NodeState,
    injected: &[FaultEntry],
    cycle: u32,
) -> NodeState {
    let m = mask(reg.width);
    let good = next.good & m;
    let mut bads = Vec::with_capacity(next.bads.len());
    let (mut i, mut j) = (0, 0);
    loop {
        while j < injected.len() && !injected[j].is_active(cycle) {
            j += 1;
        }
        let from_next = next.bads.get(i).map(|b| b.fid);
        let from_inj = injected.get(j).map(|e| e.fid);
        let fid = match (from_next, from_inj) {
            (None, None) => break,
            (Some(a), None) => a,
            (None, Some(b)) => b,
            (Some(a), Some(b)) => a.min(b),
        };
        let mut value = if from_next == Some(fid) {
            i += 1;
            next.bads[i - 1].value & m
        } else {
            good
        };
        if from_inj == Some(fid) {
            value = injected[j].rule.apply(value, cycle);
            injected[j].fval.store(value, Ordering::Relaxed);
            j += 1;
        }
        if value != good {
            bads.push(BadGate { fid, value });
        }
    }
    NodeState {
        good_changed: good != current.good,
        bads_changed: bads != current.bads,
        good,
        bads,
        last_eval_pass: current.last_eval_pass,
    }
}

/// State of a register at cycle 0.
pub fn initial_register(reg: &RtlNode, injected: &[FaultEntry]) -> NodeState {
    let init = match reg.kind {
        NodeKind::Reg { init } => init,
        _ => 0,
    };
    let mut s = sync_register(reg, &NodeState::default(), &NodeState::with_good(init), injected, 0);
    s.good_changed = true;
    s.bads_changed = true;
    s
}
