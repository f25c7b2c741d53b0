use std::fmt::Write;

use super::{NodeId, NodeKind, RtlGraph};

/// Render a graph back into netlist text. Virtual port carriers are
/// transparent: consumers print the original port name.
pub fn print_netlist(graph: &RtlGraph) -> String {
    let mut out = String::new();
    if let Some(name) = &graph.name {
        let _ = writeln!(out, "module {name}");
    }
    let operand = |id: NodeId| -> &str {
        let mut id = id;
        while graph.node(id).kind == NodeKind::Virtual {
            id = graph.node(id).fanin[0];
        }
        &graph.node(id).name
    };
    for node in &graph.nodes {
        match &node.kind {
            NodeKind::Input => {
                let _ = writeln!(out, "input {} {}", node.name, node.width);
            }
            NodeKind::Reg { init } => {
                let _ = writeln!(out, "reg {} {} = {:x}", node.name, node.width, init);
            }
            NodeKind::Output => {
                let _ = writeln!(out, "output {} {} = {}", node.name, node.width, operand(node.fanin[0]));
            }
            NodeKind::Comb(op) => {
                let _ = write!(out, "assign {} {} = {}", node.name, node.width, op.opcode().mnemonic());
                if let super::CombOp::Slice { hi, lo } = op {
                    let _ = write!(out, " {hi} {lo}");
                }
                for &f in &node.fanin {
                    let _ = write!(out, " {}", operand(f));
                }
                out.push('\n');
            }
            NodeKind::Const(_) | NodeKind::Virtual => {}
        }
    }
    for &r in &graph.regs {
        let node = graph.node(r);
        if let Some(src) = node.next_src {
            let _ = writeln!(out, "next {} = {}", node.name, operand(src));
        }
    }
    if graph.name.is_some() {
        out.push_str("end\n");
    }
    out
}
