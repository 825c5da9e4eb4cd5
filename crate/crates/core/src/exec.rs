//! Execution-unit occupancy with low-rate PRBS injection into idle units.
//!
//! Each unit is non-pipelined: a dispatched operation holds it for the unit's
//! latency. Only the operand-register side of a unit is tracked (64 bits per
//! unit). Injection writes a fresh PRBS word onto the operand bus of every
//! unit that is idle at the tick; it never touches occupancy or counters of
//! real work.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::prbs::LfsrState;
use crate::splitmix64;
use crate::stress::{is_static, word_histogram, Histogram, StressError, WordStress};
use crate::trace::{OpKind, TraceEvent};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ExecError {
    #[error("no execution unit configured for {0:?}")]
    NoUnit(OpKind),
    #[error("{0}")]
    Config(String),
    #[error(transparent)]
    Stress(#[from] StressError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct UnitLatencies {
    pub int_alu: u64,
    pub fp_add_sub: u64,
    pub fp_mul_div: u64,
    pub branch: u64,
    pub load: u64,
    pub store: u64,
}

impl Default for UnitLatencies {
    fn default() -> Self {
        Self {
            int_alu: 1,
            fp_add_sub: 3,
            fp_mul_div: 5,
            branch: 1,
            load: 1,
            store: 1,
        }
    }
}

impl UnitLatencies {
    pub fn of(&self, kind: OpKind) -> u64 {
        match kind {
            OpKind::IntAlu => self.int_alu,
            OpKind::FpAddSub => self.fp_add_sub,
            OpKind::FpMulDiv => self.fp_mul_div,
            OpKind::Branch => self.branch,
            OpKind::Load => self.load,
            OpKind::Store => self.store,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct UnitCounts {
    pub int_alu: usize,
    pub fp_add_sub: usize,
    pub fp_mul_div: usize,
    pub branch: usize,
    pub load: usize,
    pub store: usize,
}

impl Default for UnitCounts {
    fn default() -> Self {
        Self {
            int_alu: 3,
            fp_add_sub: 1,
            fp_mul_div: 1,
            branch: 1,
            load: 1,
            store: 1,
        }
    }
}

impl UnitCounts {
    pub fn of(&self, kind: OpKind) -> usize {
        match kind {
            OpKind::IntAlu => self.int_alu,
            OpKind::FpAddSub => self.fp_add_sub,
            OpKind::FpMulDiv => self.fp_mul_div,
            OpKind::Branch => self.branch,
            OpKind::Load => self.load,
            OpKind::Store => self.store,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExecConfig {
    pub dispatch_width: usize,
    pub units: UnitCounts,
    pub latencies: UnitLatencies,
}

impl Default for ExecConfig {
    fn default() -> Self {
        Self {
            dispatch_width: 4,
            units: UnitCounts::default(),
            latencies: UnitLatencies::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InjectionConfig {
    pub enabled: bool,
    /// Core cycles between two injection ticks.
    pub period: u64,
}

impl Default for InjectionConfig {
    fn default() -> Self {
        Self {
            enabled: false,
            period: 4096,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ExecUnit {
    pub kind: OpKind,
    pub name: String,
    pub latency: u64,
    pub busy_until: u64,
    pub op_count: u64,
    pub injection_writes: u64,
    bus: WordStress,
}

impl ExecUnit {
    pub fn operand_bus(&self) -> &WordStress {
        &self.bus
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DispatchOutcome {
    pub unit: usize,
    pub start: u64,
    pub stall: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UnitStressRow {
    pub unit: String,
    pub kind: OpKind,
    pub op_count: u64,
    pub injection_writes: u64,
    pub is_static: bool,
    pub static_operand_bits: usize,
    pub max_static_interval: u64,
    pub bit_max_static_intervals: Vec<u64>,
}

#[derive(Debug, Clone)]
pub struct ExecModel {
    units: Vec<ExecUnit>,
    by_kind: [Vec<usize>; 6],
    dispatch_width: usize,
    injection: InjectionConfig,
    next_tick: u64,
    lfsr: LfsrState,
    seed: u64,
    slot_cycle: u64,
    slot_used: usize,
    stall_cycles: u64,
    ticks: u64,
}

fn kind_slot(kind: OpKind) -> usize {
    OpKind::ALL.iter().position(|&k| k == kind).expect("listed")
}

fn unit_label(kind: OpKind) -> &'static str {
    match kind {
        OpKind::IntAlu => "alu",
        OpKind::FpAddSub => "fp_add_sub",
        OpKind::FpMulDiv => "fp_mul_div",
        OpKind::Branch => "branch",
        OpKind::Load => "load",
        OpKind::Store => "store",
    }
}

impl ExecModel {
    pub fn new(cfg: &ExecConfig, injection: InjectionConfig, seed: u64) -> Result<Self, ExecError> {
        if cfg.dispatch_width == 0 {
            return Err(ExecError::Config("dispatch width must be >= 1".into()));
        }
        if injection.period == 0 {
            return Err(ExecError::Config("injection period must be >= 1".into()));
        }
        let mut units = Vec::new();
        let mut by_kind: [Vec<usize>; 6] = Default::default();
        for kind in OpKind::ALL {
            let n = cfg.units.of(kind);
            for i in 0..n {
                let name = if n > 1 || kind == OpKind::IntAlu {
                    format!("{}{i}", unit_label(kind))
                } else {
                    unit_label(kind).to_string()
                };
                by_kind[kind_slot(kind)].push(units.len());
                units.push(ExecUnit {
                    kind,
                    name,
                    latency: cfg.latencies.of(kind).max(1),
                    busy_until: 0,
                    op_count: 0,
                    injection_writes: 0,
                    bus: WordStress::default(),
                });
            }
        }
        Ok(Self {
            units,
            by_kind,
            dispatch_width: cfg.dispatch_width,
            injection,
            next_tick: injection.period,
            lfsr: LfsrState::prbs23(seed ^ 0x2545_f491_4f6c_dd1d),
            seed,
            slot_cycle: 0,
            slot_used: 0,
            stall_cycles: 0,
            ticks: 0,
        })
    }

    pub fn units(&self) -> &[ExecUnit] {
        &self.units
    }

    pub fn stall_cycles(&self) -> u64 {
        self.stall_cycles
    }

    pub fn injection_ticks(&self) -> u64 {
        self.ticks
    }

    /// Latest cycle at which any unit is still busy.
    pub fn drain_cycle(&self) -> u64 {
        self.units.iter().map(|u| u.busy_until).max().unwrap_or(0)
    }

    /// Operand pattern used when an event carries no data payload.
    pub fn operand_pattern(&self, ev: &TraceEvent) -> u64 {
        ev.data.unwrap_or_else(|| splitmix64(self.seed ^ ev.seq))
    }

    /// In-order dispatch: respects the dispatch-width cap, then picks the
    /// earliest-free unit of the class (lowest index on ties).
    pub fn dispatch(&mut self, ev: &TraceEvent, cycle: u64) -> Result<DispatchOutcome, ExecError> {
        let candidates = &self.by_kind[kind_slot(ev.kind)];
        let &unit = candidates
            .iter()
            .min_by_key(|&&u| (self.units[u].busy_until, u))
            .ok_or(ExecError::NoUnit(ev.kind))?;

        let mut t = cycle.max(self.slot_cycle);
        if t == self.slot_cycle && self.slot_used >= self.dispatch_width {
            t += 1;
        }
        let start = t.max(self.units[unit].busy_until);
        if start != self.slot_cycle {
            self.slot_cycle = start;
            self.slot_used = 0;
        }
        self.slot_used += 1;

        let pattern = self.operand_pattern(ev);
        let u = &mut self.units[unit];
        u.busy_until = start + u.latency;
        u.op_count += 1;
        u.bus.observe(start, pattern)?;
        let stall = start - cycle;
        self.stall_cycles += stall;
        Ok(DispatchOutcome { unit, start, stall })
    }

    /// One injection tick at `cycle`: idle units get a PRBS word.
    pub fn inject_tick(&mut self, cycle: u64) -> Result<(), ExecError> {
        for u in &mut self.units {
            if u.busy_until <= cycle {
                let word = self.lfsr.next_u64();
                u.bus.observe(cycle, word)?;
                u.injection_writes += 1;
            }
        }
        self.ticks += 1;
        Ok(())
    }

    /// Fires every injection tick due at or before `cycle`.
    pub fn advance_to(&mut self, cycle: u64) -> Result<(), ExecError> {
        if !self.injection.enabled {
            return Ok(());
        }
        while self.next_tick <= cycle {
            let at = self.next_tick;
            self.inject_tick(at)?;
            self.next_tick += self.injection.period;
        }
        Ok(())
    }

    pub fn finalize(&mut self, end_cycle: u64) -> Result<(), ExecError> {
        for u in &mut self.units {
            u.bus.finalize(end_cycle)?;
        }
        Ok(())
    }

    /// Per-unit table; call after [`ExecModel::finalize`]. A unit is static when
    /// it dispatched nothing, whatever injection did to its operand bits.
    pub fn unit_stress_table(&self) -> Vec<UnitStressRow> {
        self.units
            .iter()
            .map(|u| {
                let bits: Vec<u64> = (0..64).map(|i| u.bus.max_static_interval(i)).collect();
                UnitStressRow {
                    unit: u.name.clone(),
                    kind: u.kind,
                    op_count: u.op_count,
                    injection_writes: u.injection_writes,
                    is_static: u.op_count == 0,
                    static_operand_bits: if is_static(u.bus.write_count()) {
                        64
                    } else {
                        0
                    },
                    max_static_interval: bits.iter().copied().max().unwrap_or(0),
                    bit_max_static_intervals: bits,
                }
            })
            .collect()
    }

    pub fn operand_histogram(&self, bins: usize) -> Result<Histogram, StressError> {
        word_histogram(self.units.iter().map(|u| &u.bus), bins)
    }
}
