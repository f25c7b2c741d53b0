use std::ops::Range;
use std::sync::atomic::{AtomicBool, AtomicU32, AtomicU64, Ordering};

use parking_lot::{Mutex, RwLock};

use crate::fault::FaultId;
use crate::sim::BadGate;

/// Split `[0, len)` into `k` contiguous ranges whose sizes differ by at most
/// one, larger ranges first.
pub fn publish_ranges(len: usize, k: usize) -> Vec<Range<usize>> {
    assert!(k > 0, "publish_ranges needs at least one slave");
    let (base, extra) = (len / k, len % k);
    let mut begin = 0;
    (0..k)
        .map(|i| {
            let size = base + usize::from(i < extra);
            let r = begin..begin + size;
            begin += size;
            r
        })
        .collect()
}

/// Per-master scratch shared with its slaves during one cycle.
#[derive(Debug)]
pub struct RangeBoard {
    pub(crate) affected: RwLock<Vec<FaultId>>,
    pub(crate) ranges: RwLock<Vec<Range<usize>>>,
    pub(crate) segments: Vec<Mutex<Vec<BadGate>>>,
    pub(crate) remaining: AtomicU32,
    pub(crate) active: AtomicBool,
    pub(crate) new_good: AtomicU64,
}

impl RangeBoard {
    pub(crate) fn new(k: usize) -> Self {
        RangeBoard {
            affected: RwLock::new(Vec::new()),
            ranges: RwLock::new(vec![0..0; k]),
            segments: (0..k).map(|_| Mutex::new(Vec::new())).collect(),
            remaining: AtomicU32::new(0),
            active: AtomicBool::new(false),
            new_good: AtomicU64::new(0),
        }
    }

    pub fn slaves(&self) -> usize {
        self.segments.len()
    }

    /// Ranges published by the master this cycle.
    pub fn ranges(&self) -> Vec<Range<usize>> {
        self.ranges.read().clone()
    }

    /// Called by the master before any slave runs.
    pub(crate) fn publish(&self, affected: Vec<FaultId>, new_good: u64, active: bool) {
        let k = self.segments.len();
        *self.ranges.write() = publish_ranges(if active { affected.len() } else { 0 }, k);
        *self.affected.write() = affected;
        self.new_good.store(new_good, Ordering::Relaxed);
        self.active.store(active, Ordering::Release);
        self.remaining.store(k as u32, Ordering::Release);
    }

    /// Marks one slave done; true for the last one.
    pub(crate) fn finish_slave(&self) -> bool {
        self.remaining.fetch_sub(1, Ordering::AcqRel) == 1
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ceil_first_partition() {
        assert_eq!(publish_ranges(10, 3), vec![0..4, 4..7, 7..10]);
        assert_eq!(publish_ranges(0, 4), vec![0..0; 4]);
        assert_eq!(publish_ranges(7, 7), (0..7).map(|i| i..i + 1).collect::<Vec<_>>());
        assert_eq!(publish_ranges(5, 1), vec![0..5]);
    }
}
