//! Per-cycle input vectors.
//!
//! Text form: a header `cycle <in1> <in2> ...` followed by one row per cycle,
//! `t v1 v2 ...`, where `t` is the decimal cycle index (rows in order,
//! starting at 0) and each value is hex with an optional `0x` prefix.
//! Blank lines and lines starting with `#` are ignored.

use std::collections::HashSet;
use std::fmt::Write;

use thiserror::Error;

use crate::netlist::{mask, NodeKind, RtlGraph};

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Stimulus {
    pub inputs: Vec<String>,
    pub rows: Vec<Vec<u64>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum StimulusError {
    #[error("stimulus is empty or lacks the `cycle` header")]
    Header,
    #[error("stimulus line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("stimulus line {line}: expected cycle {expected}, found {got}")]
    Cycle { line: usize, expected: usize, got: String },
    #[error("stimulus line {line}: expected {expected} values, found {got}")]
    RowWidth { line: usize, expected: usize, got: usize },
    #[error("stimulus column `{0}` is not a circuit input")]
    UnknownInput(String),
    #[error("circuit input `{0}` has no stimulus column")]
    MissingInput(String),
    #[error("stimulus column `{0}` appears twice")]
    DuplicateInput(String),
    #[error("stimulus cycle {cycle}: value {value:#x} does not fit {width}-bit input `{input}`")]
    ValueRange { cycle: usize, input: String, width: u32, value: u64 },
}

pub fn parse_stimulus(text: &str) -> Result<Stimulus, StimulusError> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
    let (_, header) = lines.next().ok_or(StimulusError::Header)?;
    let mut cols = header.split_whitespace();
    if cols.next() != Some("cycle") {
        return Err(StimulusError::Header);
    }
    let inputs: Vec<String> = cols.map(str::to_string).collect();
    let mut seen = HashSet::new();
    for name in &inputs {
        if !seen.insert(name.as_str()) {
            return Err(StimulusError::DuplicateInput(name.clone()));
        }
    }
    let mut rows = Vec::new();
    for (line, text) in lines {
        let fields: Vec<&str> = text.split_whitespace().collect();
        if fields.len() != inputs.len() + 1 {
            return Err(StimulusError::RowWidth { line, expected: inputs.len() + 1, got: fields.len() });
        }
        if fields[0].parse::<usize>().ok() != Some(rows.len()) {
            return Err(StimulusError::Cycle { line, expected: rows.len(), got: fields[0].to_string() });
        }
        let row = fields[1..]
            .iter()
            .map(|f| {
                let digits = f.strip_prefix("0x").or_else(|| f.strip_prefix("0X")).unwrap_or(f);
                u64::from_str_radix(digits, 16)
                    .map_err(|_| StimulusError::Syntax { line, msg: format!("bad hex value `{f}`") })
            })
            .collect::<Result<Vec<u64>, _>>()?;
        rows.push(row);
    }
    Ok(Stimulus { inputs, rows })
}

impl Stimulus {
    /// The same input row repeated for `cycles` cycles, columns in circuit
    /// input order.
    pub fn constant(graph: &RtlGraph, row: &[u64], cycles: usize) -> Self {
        Stimulus {
            inputs: graph.inputs.iter().map(|&i| graph.node(i).name.clone()).collect(),
            rows: vec![row.to_vec(); cycles],
        }
    }

    pub fn cycles(&self) -> usize {
        self.rows.len()
    }

    pub fn to_text(&self) -> String {
        let mut out = String::from("cycle");
        for name in &self.inputs {
            out.push(' ');
            out.push_str(name);
        }
        out.push('\n');
        for (t, row) in self.rows.iter().enumerate() {
            write!(out, "{t}").unwrap();
            for v in row {
                write!(out, " {v:x}").unwrap();
            }
            out.push('\n');
        }
        out
    }

    /// Rows reordered to the circuit's input order, checked against input
    /// names and widths.
    pub fn bind(&self, graph: &RtlGraph) -> Result<Vec<Vec<u64>>, StimulusError> {
        let mut column = Vec::with_capacity(graph.inputs.len());
        for name in &self.inputs {
            match graph.lookup(name) {
                Some(id) if graph.node(id).kind == NodeKind::Input => {}
                _ => return Err(StimulusError::UnknownInput(name.clone())),
            }
        }
        for &id in &graph.inputs {
            let name = &graph.node(id).name;
            let col = self.inputs.iter().position(|n| n == name).ok_or_else(|| StimulusError::MissingInput(name.clone()))?;
            column.push((col, graph.node(id).width, name));
        }
        self.rows
            .iter()
            .enumerate()
            .map(|(cycle, row)| {
                column
                    .iter()
                    .map(|&(col, width, name)| {
                        let value = row[col];
                        if value & !mask(width) != 0 {
                            return Err(StimulusError::ValueRange { cycle, input: name.clone(), width, value });
                        }
                        Ok(value)
                    })
                    .collect()
            })
            .collect()
    }
}
