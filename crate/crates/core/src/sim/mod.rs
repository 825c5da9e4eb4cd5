//! Experiment orchestration: one trace through the execution units, register
//! files and cache hierarchy, with each mitigation toggled independently.
//!
//! Cycle accounting is an in-order charge model. Each event issues at its
//! trace cycle plus the delay accumulated so far; dispatch stalls and data
//! access latencies add to that delay, as does any instruction fetch that
//! misses the L1-I. Rotation and swap-shift remaps are charged zero cycles.

mod config;
mod report;

use std::fs::File;
use std::io::BufReader;
use std::path::Path;

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::cache::{Access, CacheError, Hierarchy};
use crate::exec::{ExecError, ExecModel};
use crate::regfile::{RegFileError, RegisterFiles};
use crate::splitmix64;
use crate::stress::{word_histogram, StressError};
use crate::trace::{
    write_event, OpKind, SyntheticTrace, TraceError, TraceEvent, TraceReader, CODE_BASE,
};

pub use config::{
    ExperimentConfig, Mitigations, OutputConfig, RegFileConfig, RotationConfig, TraceSource,
};
pub use report::{
    compare, Comparison, CycleBreakdown, Delta, RegClassReport, StressReport, TraceIdentity,
};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("config: {0}")]
    Config(String),
    #[error("trace: {0}")]
    Trace(#[from] TraceError),
    #[error("trace event {seq}: {msg}")]
    Event { seq: u64, msg: String },
    #[error("reports are not comparable: {0}")]
    Mismatch(String),
    #[error("internal: {0}")]
    Internal(String),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

impl SimError {
    /// Process exit code: 1 for configuration, 2 for trace, 3 for internal
    /// failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            SimError::Config(_) => 1,
            SimError::Trace(_) | SimError::Event { .. } | SimError::Mismatch(_) => 2,
            SimError::Internal(_) | SimError::Io(_) => 3,
        }
    }
}

macro_rules! internal_from {
    ($($t:ty),*) => {$(
        impl From<$t> for SimError {
            fn from(e: $t) -> Self {
                SimError::Internal(e.to_string())
            }
        }
    )*};
}
internal_from!(CacheError, ExecError, StressError);

const NOTES: [&str; 4] = [
    "execution units: only the operand-register side (64 bits per unit) is tracked",
    "caches: per-bit tracking covers the first 64-bit word of each line in the tracked way; static-line counts cover every line",
    "static means written at most once over the observation window",
    "rotation and swap-shift remaps are charged zero cycles",
];

/// Trace-driven simulator state for one experiment.
pub struct Simulator {
    cfg: ExperimentConfig,
    exec: ExecModel,
    regs: RegisterFiles,
    cache: Hierarchy,
    hasher: Sha256,
    scratch: Vec<u8>,
    events: u64,
    last_cycle: u64,
    delay: u64,
    end: u64,
    data_access_cycles: u64,
    fetch_miss_cycles: u64,
}

impl Simulator {
    pub fn new(cfg: &ExperimentConfig) -> Result<Self, SimError> {
        cfg.validate()?;
        let m = &cfg.mitigations;
        let exec = ExecModel::new(&cfg.core, m.injection, cfg.seed)
            .map_err(|e| SimError::Config(e.to_string()))?;
        let regs = RegisterFiles::new(cfg.regfile.sizes(), m.rotation.period, m.rotation.enabled)
            .map_err(|e| SimError::Config(e.to_string()))?;
        let cache = Hierarchy::new(&cfg.cache, m.swap_shift, cfg.seed)
            .map_err(|e| SimError::Config(e.to_string()))?;
        Ok(Self {
            cfg: cfg.clone(),
            exec,
            regs,
            cache,
            hasher: Sha256::new(),
            scratch: Vec::with_capacity(256),
            events: 0,
            last_cycle: 0,
            delay: 0,
            end: 0,
            data_access_cycles: 0,
            fetch_miss_cycles: 0,
        })
    }

    fn reg_error(seq: u64, e: RegFileError) -> SimError {
        match e {
            RegFileError::OutOfRange { .. } => SimError::Event {
                seq,
                msg: e.to_string(),
            },
            other => SimError::Internal(other.to_string()),
        }
    }

    pub fn step(&mut self, ev: &TraceEvent) -> Result<(), SimError> {
        self.scratch.clear();
        write_event(&mut self.scratch, ev)?;
        self.hasher.update(&self.scratch);
        self.events += 1;
        self.last_cycle = ev.cycle;

        let l1i_latency = self.cfg.cache.l1i.latency;
        let pc = CODE_BASE + (ev.seq.wrapping_mul(4) % self.cfg.code_footprint_bytes);
        let fetch = self
            .cache
            .access(pc, Access::Fetch, ev.cycle + self.delay)?;
        let penalty = fetch.latency.saturating_sub(l1i_latency);
        self.fetch_miss_cycles += penalty;
        self.delay += penalty;

        let issue = ev.cycle + self.delay;
        self.regs
            .advance_to(issue)
            .map_err(|e| Self::reg_error(ev.seq, e))?;
        self.exec.advance_to(issue)?;
        for &src in &ev.srcs {
            self.regs
                .read(src)
                .map_err(|e| Self::reg_error(ev.seq, e))?;
        }
        let d = self.exec.dispatch(ev, issue)?;
        self.delay += d.stall;
        let start = d.start;

        let mut result = ev.data;
        match ev.kind {
            OpKind::Load | OpKind::Store => {
                let addr = ev.addr.ok_or(SimError::Event {
                    seq: ev.seq,
                    msg: "memory operation without an address".into(),
                })?;
                let access = if ev.kind == OpKind::Store {
                    Access::Write(ev.data.unwrap_or_else(|| self.exec.operand_pattern(ev)))
                } else {
                    Access::Read
                };
                let out = self.cache.access(addr, access, start)?;
                self.data_access_cycles += out.latency;
                self.delay += out.latency;
                if ev.kind == OpKind::Load {
                    result = Some(out.value);
                }
            }
            _ => {}
        }
        if let Some(dst) = ev.dst {
            let value =
                result.unwrap_or_else(|| splitmix64(self.cfg.seed.rotate_left(17) ^ ev.seq));
            self.regs
                .write(dst, value, start)
                .map_err(|e| Self::reg_error(ev.seq, e))?;
        }
        self.end = self.end.max(ev.cycle + self.delay).max(start + 1);
        Ok(())
    }

    pub fn finish(mut self) -> Result<StressReport, SimError> {
        let end = self.end.max(self.exec.drain_cycle());
        let bins = self.cfg.histogram_bins;
        self.regs
            .advance_to(end)
            .map_err(|e| Self::reg_error(0, e))?;
        self.exec.advance_to(end)?;
        self.regs.finalize(end).map_err(|e| Self::reg_error(0, e))?;
        self.exec.finalize(end)?;
        let cache = self.cache.stress_report(end, bins)?;
        let registers = self
            .regs
            .iter()
            .map(|(class, file)| {
                Ok(RegClassReport {
                    class,
                    entries: file.len(),
                    static_entries: file.static_slots(),
                    rotations: file.rotations(),
                    histogram: word_histogram(file.slot_stress(), bins)?,
                })
            })
            .collect::<Result<Vec<_>, StressError>>()?;
        let mut notes: Vec<String> = NOTES.iter().map(|s| s.to_string()).collect();
        let m = &self.cfg.mitigations;
        if m.rotation.enabled && m.rotation.period < 10_000_000
            || m.swap_shift.enabled && m.swap_shift.period < 10_000_000
        {
            notes.push(
                "mitigation periods are scaled down from the 10M-cycle / 10M-access defaults to fit the trace length"
                    .into(),
            );
        }
        Ok(StressReport {
            trace: TraceIdentity {
                events: self.events,
                sha256: format!("{:x}", self.hasher.finalize()),
                last_cycle: self.last_cycle,
            },
            cycles: CycleBreakdown {
                total: end,
                dispatch_stalls: self.exec.stall_cycles(),
                data_access: self.data_access_cycles,
                fetch_misses: self.fetch_miss_cycles,
            },
            units: self.exec.unit_stress_table(),
            exec_operand_histogram: self.exec.operand_histogram(bins)?,
            injection_ticks: self.exec.injection_ticks(),
            registers,
            cache,
            notes,
            config: self.cfg,
        })
    }

    pub fn cache(&self) -> &Hierarchy {
        &self.cache
    }
}

/// Runs an experiment over an explicit event stream.
pub fn run_events<I>(cfg: &ExperimentConfig, events: I) -> Result<StressReport, SimError>
where
    I: IntoIterator<Item = Result<TraceEvent, TraceError>>,
{
    let mut sim = Simulator::new(cfg)?;
    for ev in events {
        sim.step(&ev?)?;
    }
    sim.finish()
}

/// Runs the experiment described by `cfg`, reading or generating its trace.
pub fn run(cfg: &ExperimentConfig) -> Result<StressReport, SimError> {
    cfg.validate()?;
    match &cfg.trace {
        TraceSource::File(path) => {
            let f = File::open(path).map_err(|e| {
                SimError::Trace(TraceError::Malformed {
                    line: 0,
                    msg: format!("{}: {e}", path.display()),
                })
            })?;
            run_events(cfg, TraceReader::new(BufReader::new(f)))
        }
        src => {
            let profile = src.profile().expect("synthetic source");
            let trace =
                SyntheticTrace::new(&profile).map_err(|e| SimError::Config(e.to_string()))?;
            run_events(cfg, trace.map(Ok))
        }
    }
}

/// Writes the report and histogram CSVs to the configured locations.
pub fn write_outputs(report: &StressReport, out: &OutputConfig) -> Result<(), SimError> {
    if let Some(path) = &out.report {
        std::fs::write(path, report.to_json())?;
    }
    if let Some(dir) = &out.histogram_dir {
        write_histograms(report, dir)?;
    }
    Ok(())
}

pub fn write_histograms(report: &StressReport, dir: &Path) -> Result<(), SimError> {
    std::fs::create_dir_all(dir)?;
    let csv_err = |e: csv::Error| SimError::Io(std::io::Error::other(e));
    let emit = |name: String, h: &crate::stress::Histogram| -> Result<(), SimError> {
        let f = File::create(dir.join(format!("{name}.csv")))?;
        h.write_csv(f).map_err(csv_err)
    };
    emit("exec_operands".into(), &report.exec_operand_histogram)?;
    for r in &report.registers {
        emit(format!("regfile_{}", r.class.name()), &r.histogram)?;
    }
    for l in &report.cache.levels {
        if let Some(h) = &l.tracked_histogram {
            emit(format!("cache_{}", l.name), h)?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trace::{write_trace, ProfileKind, RegClass, RegId, WorkloadProfile};

    fn preset(profile: ProfileKind, length: u64) -> ExperimentConfig {
        ExperimentConfig {
            trace: TraceSource::Preset {
                profile,
                length,
                seed: 5,
            },
            ..ExperimentConfig::default()
        }
    }

    #[test]
    fn int_only_fp_units_static() {
        let r = run(&preset(ProfileKind::IntOnly, 20_000)).unwrap();
        for u in &r.units {
            assert_eq!(u.is_static, u.kind.is_fp(), "{}", u.unit);
        }
        assert_eq!(r.trace.events, 20_000);
        assert!(r.cycles.total >= r.trace.last_cycle);
    }

    #[test]
    fn deterministic_bytes() {
        let cfg = preset(ProfileKind::FpMixed, 10_000);
        assert_eq!(run(&cfg).unwrap().to_json(), run(&cfg).unwrap().to_json());
    }

    #[test]
    fn file_and_synthetic_agree() {
        let profile = WorkloadProfile::preset(ProfileKind::SmallFootprint, 5_000, 9);
        let mut buf = Vec::new();
        write_trace(&mut buf, SyntheticTrace::new(&profile).unwrap()).unwrap();
        let dir = std::env::temp_dir().join(format!("aging-sim-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("t.trace");
        std::fs::write(&path, &buf).unwrap();
        let a = run(&ExperimentConfig {
            trace: TraceSource::Synthetic(profile),
            ..ExperimentConfig::default()
        })
        .unwrap();
        let b = run(&ExperimentConfig {
            trace: TraceSource::File(path),
            ..ExperimentConfig::default()
        })
        .unwrap();
        assert_eq!(a.trace, b.trace);
        assert_eq!(a.cycles, b.cycles);
        assert_eq!(a.cache, b.cache);
        std::fs::remove_dir_all(dir).ok();
    }

    #[test]
    fn identical_reports_compare_to_zero() {
        let r = run(&preset(ProfileKind::IntOnly, 5_000)).unwrap();
        let c = compare(&r, &r).unwrap();
        assert!(c.deltas.iter().all(|d| d.percent == Some(0.0)));
    }

    #[test]
    fn rotation_costs_no_cycles() {
        let base = preset(ProfileKind::IntOnly, 50_000);
        let mut rot = base.clone();
        rot.mitigations.rotation = RotationConfig {
            enabled: true,
            period: 100,
        };
        let (a, b) = (run(&base).unwrap(), run(&rot).unwrap());
        let c = compare(&a, &b).unwrap();
        assert_eq!(c.get("total_cycles").unwrap().percent, Some(0.0));
        assert!(b.registers.iter().all(|r| r.rotations > 0));
        assert!(b.static_registers() < a.static_registers());
    }

    #[test]
    fn injection_costs_no_cycles() {
        let base = preset(ProfileKind::IntOnly, 50_000);
        let mut inj = base.clone();
        inj.mitigations.injection.enabled = true;
        inj.mitigations.injection.period = 64;
        let (a, b) = (run(&base).unwrap(), run(&inj).unwrap());
        assert_eq!(a.cycles, b.cycles);
        assert_eq!(a.cache, b.cache);
        assert_eq!(a.static_units(), b.static_units());
        assert_eq!(a.static_operand_bits(), 128);
        assert_eq!(b.static_operand_bits(), 0);
    }

    #[test]
    fn compare_rejects_other_traces() {
        let a = run(&preset(ProfileKind::IntOnly, 1_000)).unwrap();
        let b = run(&preset(ProfileKind::IntOnly, 1_001)).unwrap();
        let e = compare(&a, &b).unwrap_err();
        assert_eq!(e.exit_code(), 2);
    }

    #[test]
    fn register_out_of_range_is_a_trace_error() {
        let ev = TraceEvent {
            seq: 0,
            cycle: 0,
            kind: OpKind::IntAlu,
            dst: Some(RegId::new(RegClass::Mask, 9)),
            srcs: vec![],
            addr: None,
            data: None,
        };
        let e = run_events(&ExperimentConfig::default(), [Ok(ev)]).unwrap_err();
        assert!(matches!(e, SimError::Event { seq: 0, .. }));
        assert_eq!(e.exit_code(), 2);
    }

    #[test]
    fn empty_trace() {
        let r = run_events(&ExperimentConfig::default(), std::iter::empty()).unwrap();
        assert_eq!(r.cycles.total, 0);
        assert_eq!(r.static_units(), r.units.len());
        assert_eq!(r.static_registers(), 16 + 32 + 16 + 8 + 8 + 16);
    }

    #[test]
    fn histogram_files() {
        let r = run(&preset(ProfileKind::IntOnly, 2_000)).unwrap();
        let dir = std::env::temp_dir().join(format!("aging-hist-{}", std::process::id()));
        write_histograms(&r, &dir).unwrap();
        let text = std::fs::read_to_string(dir.join("regfile_gpr.csv")).unwrap();
        assert!(text.starts_with("bin_lo,bin_hi,count\n"));
        assert!(dir.join("cache_l3.csv").exists());
        std::fs::remove_dir_all(dir).ok();
    }
}
