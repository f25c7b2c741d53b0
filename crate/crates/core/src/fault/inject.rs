use std::collections::BTreeMap;
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};

use super::{check_bit, FaultDescriptor, FaultError, FaultId, FaultLocation, ForcedRule};
use crate::netlist::{NodeId, NodeKind, RtlGraph};

/// Injection record at one node: the fault is injected here and `rule`
/// produces its forced value.
#[derive(Debug)]
pub struct FaultEntry {
    pub fid: FaultId,
    pub rule: ForcedRule,
    /// Last forced value produced at this node.
    pub fval: AtomicU64,
    retired: AtomicBool,
}

impl FaultEntry {
    fn new(fid: FaultId, rule: ForcedRule) -> Self {
        FaultEntry { fid, rule, fval: AtomicU64::new(0), retired: AtomicBool::new(false) }
    }

    /// Active at `cycle` and not dropped.
    #[inline]
    pub fn is_active(&self, cycle: u32) -> bool {
        self.rule.kind.is_active(cycle) && !self.is_retired()
    }

    #[inline]
    pub fn is_retired(&self) -> bool {
        self.retired.load(Ordering::Relaxed)
    }
}

/// Per-node injection tables, each sorted by fid.
#[derive(Debug, Default)]
pub struct FaultTable {
    entries: Vec<Vec<FaultEntry>>,
    sites: BTreeMap<FaultId, NodeId>,
}

impl FaultTable {
    /// Injection entries at `node`, ascending fid.
    #[inline]
    pub fn at(&self, node: NodeId) -> &[FaultEntry] {
        self.entries.get(node.index()).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn site(&self, fid: FaultId) -> Option<NodeId> {
        self.sites.get(&fid).copied()
    }

    pub fn fault_count(&self) -> usize {
        self.sites.len()
    }

    /// Stop applying `fid` (drop-on-detect).
    pub(crate) fn retire(&self, fid: FaultId) {
        if let Some(site) = self.site(fid) {
            if let Ok(i) = self.at(site).binary_search_by_key(&fid, |e| e.fid) {
                self.at(site)[i].retired.store(true, Ordering::Relaxed);
            }
        }
    }
}

/// Node that carries `fault`. Wires inject at their driver, registers at
/// themselves, ports at a virtual node spliced in front of the input. Output
/// ports follow the wire rule on their driving operand; drivers without a
/// compute step of their own (inputs, constants) get a virtual carrier.
pub fn resolve_injection_site(graph: &mut RtlGraph, fault: &FaultDescriptor) -> Result<NodeId, FaultError> {
    check_bit(graph, fault)?;
    let dangling = || FaultError::Dangling {
        fid: fault.fid,
        location: format!("{:?}", fault.location),
        kind: fault.location.kind_str(),
    };
    match &fault.location {
        FaultLocation::Wire(n) => Ok(wire_site(graph, *n)),
        FaultLocation::Reg(n) => match graph.node(*n).kind {
            NodeKind::Reg { .. } => Ok(*n),
            _ => Err(dangling()),
        },
        FaultLocation::Port(name) => {
            let id = graph.lookup(name).ok_or_else(dangling)?;
            match graph.node(id).kind {
                NodeKind::Input => Ok(graph.splice_virtual(id)),
                NodeKind::Output => {
                    let driver = graph.node(id).fanin[0];
                    Ok(wire_site(graph, driver))
                }
                _ => Err(dangling()),
            }
        }
    }
}

fn wire_site(graph: &mut RtlGraph, n: NodeId) -> NodeId {
    match graph.node(n).kind {
        NodeKind::Input | NodeKind::Const(_) => graph.splice_virtual(n),
        _ => n,
    }
}

/// Resolve every fault and build the per-node tables.
pub fn inject(graph: &mut RtlGraph, faults: &[FaultDescriptor]) -> Result<FaultTable, FaultError> {
    let mut sites = BTreeMap::new();
    let mut placed = Vec::with_capacity(faults.len());
    for f in faults {
        if sites.contains_key(&f.fid) {
            return Err(FaultError::DuplicateFid(f.fid));
        }
        let site = resolve_injection_site(graph, f)?;
        sites.insert(f.fid, site);
        placed.push((site, FaultEntry::new(f.fid, f.rule())));
    }
    let mut entries: Vec<Vec<FaultEntry>> = (0..graph.len()).map(|_| Vec::new()).collect();
    for (site, entry) in placed {
        entries[site.index()].push(entry);
    }
    for list in &mut entries {
        list.sort_by_key(|e| e.fid);
    }
    Ok(FaultTable { entries, sites })
}
