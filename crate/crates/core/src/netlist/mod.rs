//! Line-based netlist format, elaboration into an [`RtlGraph`], and the
//! printer used for round-trip checks.

mod graph;
mod parser;
mod printer;

pub use graph::{elaborate, topo_positions, CombOp, NodeKind, RtlGraph, RtlNode};
pub use parser::parse_netlist;
pub use printer::print_netlist;

use std::fmt;

use thiserror::Error;

/// Widest supported net, so any value fits in one machine word.
pub const MAX_WIDTH: u32 = 64;

/// Dense node index into [`RtlGraph::nodes`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(pub u32);

impl NodeId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "n{}", self.0)
    }
}

/// Mask with the low `width` bits set.
#[inline]
pub fn mask(width: u32) -> u64 {
    if width >= 64 {
        u64::MAX
    } else {
        (1u64 << width) - 1
    }
}

/// Operator mnemonics as written in the netlist.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum OpCode {
    Not,
    And,
    Or,
    Xor,
    Add,
    Sub,
    Mul,
    Eq,
    Lt,
    Mux,
    Shl,
    Shr,
    Slice { hi: u32, lo: u32 },
    Concat,
}

impl OpCode {
    pub fn arity(self) -> usize {
        match self {
            OpCode::Not | OpCode::Slice { .. } => 1,
            OpCode::Mux => 3,
            _ => 2,
        }
    }

    pub fn mnemonic(self) -> &'static str {
        match self {
            OpCode::Not => "NOT",
            OpCode::And => "AND",
            OpCode::Or => "OR",
            OpCode::Xor => "XOR",
            OpCode::Add => "ADD",
            OpCode::Sub => "SUB",
            OpCode::Mul => "MUL",
            OpCode::Eq => "EQ",
            OpCode::Lt => "LT",
            OpCode::Mux => "MUX",
            OpCode::Shl => "SHL",
            OpCode::Shr => "SHR",
            OpCode::Slice { .. } => "SLICE",
            OpCode::Concat => "CONCAT",
        }
    }
}

/// An operand reference: a named net or a sized literal `#<hex>:<width>`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Operand {
    Name(String),
    Literal { value: u64, width: u32 },
}

impl fmt::Display for Operand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Operand::Name(n) => f.write_str(n),
            Operand::Literal { value, width } => write!(f, "#{value:x}:{width}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DeclKind {
    Input,
    Output { source: Operand },
    Reg { init: u64 },
    Assign { op: OpCode, operands: Vec<Operand> },
    Next { source: Operand },
}

/// One parsed statement. `width` is 0 for `next` statements, which
/// inherit the register's width.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NetlistDecl {
    pub line: usize,
    pub name: String,
    pub width: u32,
    pub kind: DeclKind,
}

/// A parsed document: optional module name plus statements in file order.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Netlist {
    pub name: Option<String>,
    pub decls: Vec<NetlistDecl>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("line {line}: syntax error: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("line {line}: width {width} out of range 1..=64")]
    Width { line: usize, width: u64 },
    #[error("line {line}: unknown operator `{op}`")]
    UnknownOp { line: usize, op: String },
    #[error("line {line}: {op} takes {expected} operand(s), got {got}")]
    Arity { line: usize, op: &'static str, expected: usize, got: usize },
    #[error("line {line}: duplicate declaration of `{name}`")]
    Duplicate { line: usize, name: String },
    #[error("line {line}: value {value:#x} does not fit in {width} bit(s)")]
    ValueRange { line: usize, value: u64, width: u32 },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ElabError {
    #[error("line {line}: undeclared identifier `{name}`")]
    Undeclared { line: usize, name: String },
    #[error("combinational cycle through: {}", .names.join(" -> "))]
    CombCycle { names: Vec<String> },
    #[error("register `{name}` has no `next` statement")]
    MissingNext { name: String },
    #[error("line {line}: `next` target `{name}` is not a register")]
    NextTarget { line: usize, name: String },
    #[error("line {line}: width error on `{name}`: {msg}")]
    Width { line: usize, name: String, msg: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum NetlistError {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Elab(#[from] ElabError),
}

/// Parse and elaborate in one step, keeping the module name.
pub fn load_netlist(text: &str) -> Result<RtlGraph, NetlistError> {
    let netlist = parse_netlist(text)?;
    Ok(graph::elaborate_named(netlist.name, &netlist.decls)?)
}
