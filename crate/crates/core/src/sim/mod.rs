//! Concurrent-fault evaluation kernels: good value, bad-gate set with
//! divergence/convergence pruning, the dependence check, and register sync.
//!
//! Every kernel is a pure function of its inputs except for the `fval`
//! bookkeeping on injection entries, so they can run on any worker.

mod kernel;

pub use kernel::{
    affected_fids, check_dependence_changed, eval_bad_set, eval_bad_set_into, eval_good, evaluate, initial_register,
    sync_register, EvalDelta,
};

use crate::fault::FaultId;

/// A divergent faulty value carried alongside the good value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct BadGate {
    pub fid: FaultId,
    pub value: u64,
}

impl BadGate {
    pub fn new(fid: u32, value: u64) -> Self {
        BadGate { fid: FaultId(fid), value }
    }
}

/// Good value plus bad gates (strictly ascending fid, every value differs
/// from `good`) and change flags relative to the previous cycle.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct NodeState {
    pub good: u64,
    pub bads: Vec<BadGate>,
    pub good_changed: bool,
    pub bads_changed: bool,
    pub last_eval_pass: u64,
}

impl NodeState {
    pub fn with_good(good: u64) -> Self {
        NodeState { good, ..Default::default() }
    }

    #[inline]
    pub fn changed(&self) -> bool {
        self.good_changed || self.bads_changed
    }

    /// Value of this node under fault `fid`.
    pub fn value_under(&self, fid: FaultId) -> u64 {
        match self.bads.binary_search_by_key(&fid, |b| b.fid) {
            Ok(i) => self.bads[i].value,
            Err(_) => self.good,
        }
    }

    /// Holds the bad-gate invariants.
    pub fn is_well_formed(&self) -> bool {
        self.bads.windows(2).all(|w| w[0].fid < w[1].fid) && self.bads.iter().all(|b| b.value != self.good)
    }
}
