//! Fault descriptors, fault-list generation, unified injection into per-node
//! fault tables, and the forced-value rules applied at injection sites.

mod csv_io;
mod inject;

pub use csv_io::{parse_fault_csv, write_fault_csv};
pub use inject::{inject, resolve_injection_site, FaultEntry, FaultTable};

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::netlist::{NodeId, NodeKind, RtlGraph};

/// Global fault identifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FaultId(pub u32);

impl fmt::Display for FaultId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum FaultKind {
    Sa0,
    Sa1,
    /// Bit flip active on cycles `start..=end`.
    Transient { start: u32, end: u32 },
}

impl FaultKind {
    #[inline]
    pub fn is_active(self, cycle: u32) -> bool {
        match self {
            FaultKind::Sa0 | FaultKind::Sa1 => true,
            FaultKind::Transient { start, end } => start <= cycle && cycle <= end,
        }
    }

    /// True when the active window opens or closes at `cycle`.
    #[inline]
    pub fn window_edge(self, cycle: u32) -> bool {
        match self {
            FaultKind::Sa0 | FaultKind::Sa1 => false,
            FaultKind::Transient { start, end } => cycle == start || Some(cycle) == end.checked_add(1),
        }
    }
}

impl fmt::Display for FaultKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FaultKind::Sa0 => f.write_str("sa0"),
            FaultKind::Sa1 => f.write_str("sa1"),
            FaultKind::Transient { start, end } => write!(f, "transient:{start}:{end}"),
        }
    }
}

impl FromStr for FaultKind {
    type Err = FaultError;

    /// Accepts `sa0`, `sa1` and `transient:<start>:<end>`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || FaultError::BadKind(s.to_string());
        match s.trim().to_ascii_lowercase().as_str() {
            "sa0" => Ok(FaultKind::Sa0),
            "sa1" => Ok(FaultKind::Sa1),
            other => {
                let rest = other.strip_prefix("transient:").ok_or_else(bad)?;
                let (a, b) = rest.split_once(':').ok_or_else(bad)?;
                let start = a.parse().map_err(|_| bad())?;
                let end = b.parse().map_err(|_| bad())?;
                transient(start, end).ok_or_else(bad)
            }
        }
    }
}

fn transient(start: u32, end: u32) -> Option<FaultKind> {
    (start <= end).then_some(FaultKind::Transient { start, end })
}

/// Parse a comma-separated kind list such as `sa0,sa1`.
pub fn parse_kind_list(s: &str) -> Result<Vec<FaultKind>, FaultError> {
    s.split(',').filter(|t| !t.trim().is_empty()).map(str::parse).collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum FaultLocation {
    Wire(NodeId),
    Reg(NodeId),
    Port(String),
}

impl FaultLocation {
    pub fn kind_str(&self) -> &'static str {
        match self {
            FaultLocation::Wire(_) => "wire",
            FaultLocation::Reg(_) => "reg",
            FaultLocation::Port(_) => "port",
        }
    }

    pub fn name<'g>(&'g self, graph: &'g RtlGraph) -> &'g str {
        match self {
            FaultLocation::Wire(n) | FaultLocation::Reg(n) => &graph.node(*n).name,
            FaultLocation::Port(p) => p,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct FaultDescriptor {
    pub fid: FaultId,
    pub location: FaultLocation,
    pub bit: u32,
    pub kind: FaultKind,
}

impl FaultDescriptor {
    pub fn rule(&self) -> ForcedRule {
        ForcedRule { kind: self.kind, bit: self.bit }
    }
}

/// Fault kind plus the bit it acts on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ForcedRule {
    pub kind: FaultKind,
    pub bit: u32,
}

impl ForcedRule {
    #[inline]
    pub fn apply(self, computed: u64, cycle: u32) -> u64 {
        faulty_val(self, computed, cycle)
    }
}

/// Final faulty value at an injection site given the value computed from
/// (possibly faulty) inputs.
#[inline]
pub fn faulty_val(rule: ForcedRule, computed: u64, cycle: u32) -> u64 {
    let bit = 1u64 << rule.bit;
    match rule.kind {
        FaultKind::Sa0 => computed & !bit,
        FaultKind::Sa1 => computed | bit,
        FaultKind::Transient { .. } if rule.kind.is_active(cycle) => computed ^ bit,
        FaultKind::Transient { .. } => computed,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FaultError {
    #[error("empty fault kind set")]
    EmptyKinds,
    #[error("unknown fault kind `{0}`")]
    BadKind(String),
    #[error("fault {fid}: location `{location}` does not exist or cannot carry a {kind} fault")]
    Dangling { fid: FaultId, location: String, kind: &'static str },
    #[error("fault {fid}: bit {bit} out of range for {width}-bit `{location}`")]
    BitRange { fid: FaultId, location: String, bit: u32, width: u32 },
    #[error("duplicate fault id {0}")]
    DuplicateFid(FaultId),
    #[error("fault list line {line}: {msg}")]
    Csv { line: u64, msg: String },
}

/// One descriptor per (eligible node, bit, kind), fids assigned in that
/// lexicographic order. Eligible: combinational outputs (wires), registers,
/// and inputs (ports).
pub fn generate_fault_list(graph: &RtlGraph, kinds: &[FaultKind]) -> Result<Vec<FaultDescriptor>, FaultError> {
    let kinds: BTreeSet<FaultKind> = kinds.iter().copied().collect();
    if kinds.is_empty() {
        return Err(FaultError::EmptyKinds);
    }
    let mut faults = Vec::new();
    for node in &graph.nodes {
        let location = match node.kind {
            NodeKind::Comb(_) => FaultLocation::Wire(node.id),
            NodeKind::Reg { .. } => FaultLocation::Reg(node.id),
            NodeKind::Input => FaultLocation::Port(node.name.clone()),
            _ => continue,
        };
        for bit in 0..node.width {
            for &kind in &kinds {
                faults.push(FaultDescriptor {
                    fid: FaultId(faults.len() as u32),
                    location: location.clone(),
                    bit,
                    kind,
                });
            }
        }
    }
    Ok(faults)
}

/// Width of the net a location refers to, if it resolves.
pub(crate) fn location_width(graph: &RtlGraph, loc: &FaultLocation) -> Option<u32> {
    match loc {
        FaultLocation::Wire(n) | FaultLocation::Reg(n) => graph.nodes.get(n.index()).map(|n| n.width),
        FaultLocation::Port(p) => graph.lookup(p).map(|n| graph.node(n).width),
    }
}

pub(crate) fn check_bit(graph: &RtlGraph, f: &FaultDescriptor) -> Result<(), FaultError> {
    let width = location_width(graph, &f.location).ok_or_else(|| FaultError::Dangling {
        fid: f.fid,
        location: format!("{:?}", f.location),
        kind: f.location.kind_str(),
    })?;
    if f.bit >= width {
        return Err(FaultError::BitRange {
            fid: f.fid,
            location: f.location.name(graph).to_string(),
            bit: f.bit,
            width,
        });
    }
    Ok(())
}
