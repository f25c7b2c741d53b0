//! C interface. Objects cross the boundary as opaque pointers created and
//! released by this library; every call returns an [`FsimStatus`], and the
//! text of the last error on the calling thread is available from
//! [`fsim_last_error`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use rtl_fsim::fault::{generate_fault_list, parse_fault_csv, parse_kind_list, FaultDescriptor};
use rtl_fsim::netlist::{load_netlist, RtlGraph};
use rtl_fsim::report::{SimulationReport, Verdict};
use rtl_fsim::sched::{run_simulation, Mode, SimConfig, SimError};
use rtl_fsim::stimulus::parse_stimulus;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FsimStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    Parse = 3,
    Config = 4,
    Invariant = 5,
    OutOfRange = 6,
    Panic = 7,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FsimMode {
    Serial = 0,
    Structural = 1,
    StructuralFault = 2,
    Full = 3,
}

impl From<FsimMode> for Mode {
    fn from(m: FsimMode) -> Self {
        match m {
            FsimMode::Serial => Mode::Serial,
            FsimMode::Structural => Mode::Structural,
            FsimMode::StructuralFault => Mode::StructuralFault,
            FsimMode::Full => Mode::Full,
        }
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FsimConfig {
    pub workers: u32,
    pub mode: FsimMode,
    pub threshold: f64,
    /// 0 selects the worker count.
    pub slaves: u32,
    pub max_expansions_per_cycle: u32,
    pub drop_on_detect: bool,
    pub audit: bool,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FsimFaultResult {
    pub fid: u32,
    pub detected: bool,
    /// Meaningful only when `detected`.
    pub detect_cycle: u32,
}

/// Elaborated circuit.
pub struct FsimNetlist {
    graph: RtlGraph,
}

/// Finished simulation.
pub struct FsimReport {
    report: SimulationReport,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let msg = CString::new(msg.into().replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn guard(f: impl FnOnce() -> Result<(), (FsimStatus, String)>) -> FsimStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            FsimStatus::Ok
        }
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            FsimStatus::Panic
        }
    }
}

type Fail = (FsimStatus, String);

fn null(what: &str) -> Fail {
    (FsimStatus::NullArgument, format!("{what} is null"))
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|_| (FsimStatus::InvalidUtf8, format!("{what} is not UTF-8")))
}

fn sim_error(e: SimError) -> Fail {
    let status = match e {
        SimError::Invariant { .. } | SimError::Deadlock { .. } => FsimStatus::Invariant,
        SimError::Config(_) | SimError::TaskGraph(_) => FsimStatus::Config,
        SimError::Stimulus(_) | SimError::Fault(_) | SimError::RowWidth { .. } => FsimStatus::Parse,
    };
    (status, e.to_string())
}

/// Message for the last failed call on this thread; empty after success.
/// Valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn fsim_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn fsim_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Fill `out` with the engine defaults (full mode, one worker).
///
/// # Safety
/// `out` must be null or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn fsim_config_default(out: *mut FsimConfig) -> FsimStatus {
    guard(|| {
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let d = SimConfig::default();
        *out = FsimConfig {
            workers: d.workers as u32,
            mode: FsimMode::Full,
            threshold: d.threshold,
            slaves: 0,
            max_expansions_per_cycle: d.max_expansions_per_cycle as u32,
            drop_on_detect: d.drop_on_detect,
            audit: d.audit,
        };
        Ok(())
    })
}

/// Parse and elaborate netlist text.
///
/// # Safety
/// `text` must be null or a NUL-terminated string; `out` must be null or
/// valid for writes. Release the result with [`fsim_netlist_free`].
#[no_mangle]
pub unsafe extern "C" fn fsim_netlist_load(text_ptr: *const c_char, out: *mut *mut FsimNetlist) -> FsimStatus {
    guard(|| {
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = ptr::null_mut();
        let graph = load_netlist(text(text_ptr, "netlist text")?).map_err(|e| (FsimStatus::Parse, e.to_string()))?;
        *out = Box::into_raw(Box::new(FsimNetlist { graph }));
        Ok(())
    })
}

/// # Safety
/// `netlist` must be null or a pointer from [`fsim_netlist_load`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn fsim_netlist_free(netlist: *mut FsimNetlist) {
    if !netlist.is_null() {
        drop(Box::from_raw(netlist));
    }
}

/// Counts of nodes, inputs, outputs and registers.
///
/// # Safety
/// `netlist` must be null or live; each out pointer null or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn fsim_netlist_counts(
    netlist: *const FsimNetlist,
    nodes: *mut usize,
    inputs: *mut usize,
    outputs: *mut usize,
    regs: *mut usize,
) -> FsimStatus {
    guard(|| {
        let g = &netlist.as_ref().ok_or_else(|| null("netlist"))?.graph;
        for (p, v) in [(nodes, g.len()), (inputs, g.inputs.len()), (outputs, g.outputs.len()), (regs, g.regs.len())] {
            if let Some(p) = p.as_mut() {
                *p = v;
            }
        }
        Ok(())
    })
}

/// Simulate `stimulus` on `netlist`. Faults come from `faults_csv` when it
/// is non-null, otherwise from enumerating `fault_kinds` (e.g. "sa0,sa1").
///
/// # Safety
/// Strings must be null or NUL-terminated; `netlist` live; `config` null
/// (defaults) or readable; `out` valid for writes. Release the result
/// with [`fsim_report_free`].
#[no_mangle]
pub unsafe extern "C" fn fsim_run(
    netlist: *const FsimNetlist,
    stimulus: *const c_char,
    faults_csv: *const c_char,
    fault_kinds: *const c_char,
    config: *const FsimConfig,
    out: *mut *mut FsimReport,
) -> FsimStatus {
    guard(|| {
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = ptr::null_mut();
        let g = &netlist.as_ref().ok_or_else(|| null("netlist"))?.graph;
        let stim = parse_stimulus(text(stimulus, "stimulus")?).map_err(|e| (FsimStatus::Parse, e.to_string()))?;
        let faults: Vec<FaultDescriptor> = if !faults_csv.is_null() {
            parse_fault_csv(text(faults_csv, "fault list")?, g).map_err(|e| (FsimStatus::Parse, e.to_string()))?
        } else if !fault_kinds.is_null() {
            let kinds = parse_kind_list(text(fault_kinds, "fault kinds")?).map_err(|e| (FsimStatus::Config, e.to_string()))?;
            generate_fault_list(g, &kinds).map_err(|e| (FsimStatus::Config, e.to_string()))?
        } else {
            Vec::new()
        };
        let cfg = match config.as_ref() {
            None => SimConfig::default(),
            Some(c) => SimConfig {
                workers: c.workers as usize,
                mode: c.mode.into(),
                threshold: c.threshold,
                slaves: (c.slaves > 0).then_some(c.slaves as usize),
                max_expansions_per_cycle: c.max_expansions_per_cycle as usize,
                drop_on_detect: c.drop_on_detect,
                audit: c.audit,
                ..SimConfig::default()
            },
        };
        let report = run_simulation(g, &faults, &stim, &cfg).map_err(sim_error)?;
        *out = Box::into_raw(Box::new(FsimReport { report }));
        Ok(())
    })
}

/// # Safety
/// `report` must be null or a pointer from [`fsim_run`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn fsim_report_free(report: *mut FsimReport) {
    if !report.is_null() {
        drop(Box::from_raw(report));
    }
}

/// Fault count, detected count and simulated cycles.
///
/// # Safety
/// `report` must be null or live; out pointers null or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn fsim_report_summary(
    report: *const FsimReport,
    faults: *mut usize,
    detected: *mut usize,
    cycles: *mut u32,
) -> FsimStatus {
    guard(|| {
        let r = &report.as_ref().ok_or_else(|| null("report"))?.report;
        if let Some(p) = faults.as_mut() {
            *p = r.records.len();
        }
        if let Some(p) = detected.as_mut() {
            *p = r.detected();
        }
        if let Some(p) = cycles.as_mut() {
            *p = r.cycles;
        }
        Ok(())
    })
}

/// # Safety
/// `report` must be null or live; `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn fsim_report_coverage(report: *const FsimReport, out: *mut f64) -> FsimStatus {
    guard(|| {
        let r = &report.as_ref().ok_or_else(|| null("report"))?.report;
        *out.as_mut().ok_or_else(|| null("out"))? = r.coverage();
        Ok(())
    })
}

/// Result for the `index`-th fault in report order.
///
/// # Safety
/// `report` must be null or live; `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn fsim_report_fault(report: *const FsimReport, index: usize, out: *mut FsimFaultResult) -> FsimStatus {
    guard(|| {
        let r = &report.as_ref().ok_or_else(|| null("report"))?.report;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let rec = r
            .records
            .get(index)
            .ok_or_else(|| (FsimStatus::OutOfRange, format!("fault index {index} of {}", r.records.len())))?;
        *out = FsimFaultResult {
            fid: rec.fid.0,
            detected: rec.verdict == Verdict::Detected,
            detect_cycle: rec.detect_cycle.unwrap_or(0),
        };
        Ok(())
    })
}

/// Report as CSV text. Release with [`fsim_string_free`].
///
/// # Safety
/// `report` must be null or live; `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn fsim_report_csv(report: *const FsimReport, out: *mut *mut c_char) -> FsimStatus {
    guard(|| {
        let r = &report.as_ref().ok_or_else(|| null("report"))?.report;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = CString::new(r.to_csv()).map_err(|e| (FsimStatus::Parse, e.to_string()))?.into_raw();
        Ok(())
    })
}

/// # Safety
/// `s` must be null or a string returned by this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn fsim_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
