//! Fault verdict reports and run statistics.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fault::{FaultId, FaultKind};
use crate::sched::{CycleStats, UtilWindow};

pub const REPORT_HEADER: [&str; 8] =
    ["fid", "location_kind", "location_name", "bit", "fault_kind", "verdict", "detect_cycle", "observing_output"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Verdict {
    Detected,
    Undetected,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Detected => "detected",
            Verdict::Undetected => "undetected",
        })
    }
}

impl FromStr for Verdict {
    type Err = ReportError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "detected" => Ok(Verdict::Detected),
            "undetected" => Ok(Verdict::Undetected),
            _ => Err(ReportError::Field { line: 0, msg: format!("bad verdict `{s}`") }),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct FaultRecord {
    pub fid: FaultId,
    pub location_kind: String,
    pub location_name: String,
    pub bit: u32,
    pub fault_kind: FaultKind,
    pub verdict: Verdict,
    pub detect_cycle: Option<u32>,
    pub observing_output: Option<String>,
}

/// Per-fault outcome plus run metadata.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SimulationReport {
    pub records: Vec<FaultRecord>,
    pub cycles: u32,
    pub config: BTreeMap<String, String>,
    pub cycle_stats: Vec<CycleStats>,
    pub utilization: Vec<UtilWindow>,
    pub audit_violations: u64,
    pub expanded_nodes: Vec<String>,
    pub wall_ns: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ReportError {
    #[error("report line {line}: {msg}")]
    Field { line: u64, msg: String },
}

impl SimulationReport {
    pub fn detected(&self) -> usize {
        self.records.iter().filter(|r| r.verdict == Verdict::Detected).count()
    }

    /// Detected fraction; 0 for an empty fault list.
    pub fn coverage(&self) -> f64 {
        if self.records.is_empty() {
            0.0
        } else {
            self.detected() as f64 / self.records.len() as f64
        }
    }

    /// (fid, first detection cycle, observing output) per fault.
    pub fn verdicts(&self) -> Vec<(FaultId, Option<u32>, Option<String>)> {
        self.records.iter().map(|r| (r.fid, r.detect_cycle, r.observing_output.clone())).collect()
    }

    pub fn to_csv(&self) -> String {
        write_report_csv(&self.records)
    }

    /// Skipped share of evaluation decisions over cycles `from..`.
    pub fn skipped_ratio_from(&self, from: u32) -> f64 {
        let (mut skipped, mut total) = (0u64, 0u64);
        for c in self.cycle_stats.iter().filter(|c| c.cycle >= from) {
            skipped += c.skipped;
            total += c.skipped + c.evaluated;
        }
        if total == 0 {
            0.0
        } else {
            skipped as f64 / total as f64
        }
    }

    /// Statistics as TOML: `[summary]`, `[config]`, `[[cycles]]` and
    /// `[[utilization]]`.
    pub fn stats_toml(&self) -> String {
        #[derive(Serialize)]
        struct Summary<'a> {
            faults: usize,
            detected: usize,
            coverage: f64,
            cycles: u32,
            wall_ns: u64,
            audit_violations: u64,
            expanded_nodes: &'a [String],
        }
        #[derive(Serialize)]
        struct Doc<'a> {
            summary: Summary<'a>,
            config: &'a BTreeMap<String, String>,
            cycles: &'a [CycleStats],
            utilization: &'a [UtilWindow],
        }
        let doc = Doc {
            summary: Summary {
                faults: self.records.len(),
                detected: self.detected(),
                coverage: self.coverage(),
                cycles: self.cycles,
                wall_ns: self.wall_ns,
                audit_violations: self.audit_violations,
                expanded_nodes: &self.expanded_nodes,
            },
            config: &self.config,
            cycles: &self.cycle_stats,
            utilization: &self.utilization,
        };
        toml::to_string(&doc).expect("stats serialize")
    }
}

/// Typed view of a stats document written by [`SimulationReport::stats_toml`].
#[derive(Debug, Clone, Deserialize)]
pub struct StatsDoc {
    pub summary: StatsSummary,
    #[serde(default)]
    pub config: BTreeMap<String, String>,
    #[serde(default)]
    pub cycles: Vec<CycleStats>,
    #[serde(default)]
    pub utilization: Vec<UtilWindow>,
}

#[derive(Debug, Clone, Deserialize)]
pub struct StatsSummary {
    pub faults: usize,
    pub detected: usize,
    pub coverage: f64,
    pub cycles: u32,
    pub wall_ns: u64,
    pub audit_violations: u64,
    #[serde(default)]
    pub expanded_nodes: Vec<String>,
}

pub fn parse_stats(text: &str) -> Result<StatsDoc, toml::de::Error> {
    toml::from_str(text)
}

pub fn write_report_csv(records: &[FaultRecord]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(REPORT_HEADER).expect("in-memory write");
    for r in records {
        w.write_record([
            r.fid.to_string(),
            r.location_kind.clone(),
            r.location_name.clone(),
            r.bit.to_string(),
            r.fault_kind.to_string(),
            r.verdict.to_string(),
            r.detect_cycle.map(|c| c.to_string()).unwrap_or_default(),
            r.observing_output.clone().unwrap_or_default(),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("flush")).expect("utf8")
}

pub fn parse_report_csv(text: &str) -> Result<Vec<FaultRecord>, ReportError> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
    let headers = reader.headers().map_err(|e| ReportError::Field { line: 1, msg: e.to_string() })?;
    if headers.iter().ne(REPORT_HEADER) {
        return Err(ReportError::Field { line: 1, msg: "unexpected header".into() });
    }
    let mut out = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| ReportError::Field {
            line: e.position().map(|p| p.line()).unwrap_or(0),
            msg: e.to_string(),
        })?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let err = |msg: String| ReportError::Field { line, msg };
        let num = |i: usize| record[i].parse::<u32>().map_err(|_| err(format!("bad number `{}`", &record[i])));
        let verdict: Verdict = record[5].parse().map_err(|_| err(format!("bad verdict `{}`", &record[5])))?;
        let detect_cycle = if record[6].is_empty() { None } else { Some(num(6)?) };
        let observing_output = (!record[7].is_empty()).then(|| record[7].to_string());
        if (verdict == Verdict::Detected) != detect_cycle.is_some() || detect_cycle.is_some() != observing_output.is_some() {
            return Err(err("verdict disagrees with detection fields".into()));
        }
        out.push(FaultRecord {
            fid: FaultId(num(0)?),
            location_kind: record[1].to_string(),
            location_name: record[2].to_string(),
            bit: num(3)?,
            fault_kind: record[4].parse().map_err(|_| err(format!("bad fault kind `{}`", &record[4])))?,
            verdict,
            detect_cycle,
            observing_output,
        });
    }
    Ok(out)
}
