use std::fmt::Write;

use super::{Phase, TaskGraph, TaskKind};
use crate::netlist::RtlGraph;

impl TaskGraph {
    /// Graphviz rendering: one vertex per task labelled with its kind and
    /// node, edges in task order.
    pub fn to_dot(&self, graph: &RtlGraph) -> String {
        let mut out = String::from("digraph tasks {\n");
        for t in self.tasks() {
            let shape = match t.kind {
                TaskKind::Default(_) => "box",
                TaskKind::Master(_) => "doubleoctagon",
                TaskKind::Slave { .. } => "ellipse",
                TaskKind::LocalSync(_) => "diamond",
            };
            let phase = match t.phase {
                Phase::Compute => "",
                Phase::Sync => ", style=dashed",
            };
            writeln!(out, "  {} [label=\"{}\", shape={shape}{phase}];", t.id, self.label(t.id, graph)).unwrap();
        }
        for t in self.tasks() {
            for s in &t.succ {
                writeln!(out, "  {} -> {};", t.id, s).unwrap();
            }
        }
        out.push_str("}\n");
        out
    }
}
