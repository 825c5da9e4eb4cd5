//! Seeded synthetic workloads standing in for benchmark runs.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{OpKind, RegClass, RegId, TraceError, TraceEvent};
use crate::prbs::LfsrState;
use crate::LINE_BYTES;

/// Base of the synthetic data region.
pub const DATA_BASE: u64 = 0x1000_0000;
/// Base of the synthetic code region used for instruction fetch.
pub const CODE_BASE: u64 = 0x0040_0000;
/// Control registers addressed by `ControlWrites`.
pub const CONTROL_REGS: u16 = 16;

const GPRS: u16 = 16;
/// Only the lower half of the FP/vector file is used by generated code.
const FP_REGS_USED: u16 = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProfileKind {
    IntOnly,
    FpMixed,
    SmallFootprint,
    LargeFootprint,
}

impl ProfileKind {
    pub const ALL: [ProfileKind; 4] = [
        ProfileKind::IntOnly,
        ProfileKind::FpMixed,
        ProfileKind::SmallFootprint,
        ProfileKind::LargeFootprint,
    ];
}

impl std::str::FromStr for ProfileKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "int-only" => Ok(ProfileKind::IntOnly),
            "fp-mixed" => Ok(ProfileKind::FpMixed),
            "small-footprint" => Ok(ProfileKind::SmallFootprint),
            "large-footprint" => Ok(ProfileKind::LargeFootprint),
            _ => Err(format!("unknown profile `{s}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControlWrites {
    None,
    /// Each control register written once at the start of the trace.
    Once,
    /// One control-register write every `n` events, round-robin.
    Periodic(u64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StoreData {
    Prbs,
    Constant(u64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorkloadProfile {
    pub name: ProfileKind,
    pub length: u64,
    pub seed: u64,
    pub footprint_bytes: u64,
    pub fp_fraction: f64,
    pub mem_fraction: f64,
    pub branch_fraction: f64,
    pub control_reg_writes: ControlWrites,
    /// Mean events dispatched per cycle, at most 4.
    pub dispatch_rate: f64,
    pub store_data: StoreData,
}

impl WorkloadProfile {
    pub fn preset(name: ProfileKind, length: u64, seed: u64) -> Self {
        let (footprint_bytes, fp_fraction) = match name {
            ProfileKind::IntOnly => (2 << 20, 0.0),
            ProfileKind::FpMixed => (2 << 20, 0.3),
            ProfileKind::SmallFootprint => (16 << 10, 0.0),
            ProfileKind::LargeFootprint => (64 << 20, 0.2),
        };
        Self {
            name,
            length,
            seed,
            footprint_bytes,
            fp_fraction,
            mem_fraction: 0.35,
            branch_fraction: 0.12,
            control_reg_writes: ControlWrites::None,
            dispatch_rate: 2.5,
            store_data: StoreData::Prbs,
        }
    }

    pub fn validate(&self) -> Result<(), TraceError> {
        let bad = |m: String| Err(TraceError::Profile(m));
        if self.footprint_bytes < LINE_BYTES {
            return bad(format!(
                "footprint {} bytes is smaller than one {LINE_BYTES}-byte line",
                self.footprint_bytes
            ));
        }
        for (name, f) in [
            ("fp_fraction", self.fp_fraction),
            ("mem_fraction", self.mem_fraction),
            ("branch_fraction", self.branch_fraction),
        ] {
            if !(0.0..=1.0).contains(&f) {
                return bad(format!("{name} {f} outside [0, 1]"));
            }
        }
        if self.name == ProfileKind::IntOnly && self.fp_fraction != 0.0 {
            return bad("int-only profile must have fp_fraction = 0".into());
        }
        if self.fp_fraction + self.mem_fraction + self.branch_fraction > 1.0 + 1e-12 {
            return bad("fp, mem and branch fractions sum above 1".into());
        }
        if !(self.dispatch_rate > 0.0 && self.dispatch_rate <= 4.0) {
            return bad(format!(
                "dispatch_rate {} outside (0, 4]",
                self.dispatch_rate
            ));
        }
        if let ControlWrites::Periodic(0) = self.control_reg_writes {
            return bad("periodic control writes need a period >= 1".into());
        }
        Ok(())
    }
}

/// Deterministic event stream for a profile.
#[derive(Debug, Clone)]
pub struct SyntheticTrace {
    profile: WorkloadProfile,
    rng: ChaCha8Rng,
    data: LfsrState,
    lines: u64,
    seq: u64,
}

impl SyntheticTrace {
    pub fn new(profile: &WorkloadProfile) -> Result<Self, TraceError> {
        profile.validate()?;
        Ok(Self {
            profile: profile.clone(),
            rng: ChaCha8Rng::seed_from_u64(profile.seed),
            data: LfsrState::prbs23(profile.seed ^ 0x5bd1_e995),
            lines: profile.footprint_bytes / LINE_BYTES,
            seq: 0,
        })
    }

    fn control_target(&self) -> Option<u16> {
        let seq = self.seq;
        match self.profile.control_reg_writes {
            ControlWrites::None => None,
            ControlWrites::Once => (seq < u64::from(CONTROL_REGS)).then_some(seq as u16),
            ControlWrites::Periodic(p) => seq
                .is_multiple_of(p)
                .then(|| ((seq / p) % u64::from(CONTROL_REGS)) as u16),
        }
    }

    fn pick_kind(&mut self) -> OpKind {
        let p = &self.profile;
        let x: f64 = self.rng.gen();
        let load = p.mem_fraction * 5.0 / 7.0;
        let mut edge = 0.0;
        for (kind, share) in [
            (OpKind::Load, load),
            (OpKind::Store, p.mem_fraction - load),
            (OpKind::Branch, p.branch_fraction),
            (OpKind::FpAddSub, p.fp_fraction / 2.0),
            (OpKind::FpMulDiv, p.fp_fraction / 2.0),
        ] {
            edge += share;
            if x < edge {
                return kind;
            }
        }
        OpKind::IntAlu
    }

    fn gpr(&mut self) -> RegId {
        RegId::new(RegClass::Gpr, self.rng.gen_range(0..GPRS))
    }

    fn fpr(&mut self) -> RegId {
        RegId::new(RegClass::FpVec, self.rng.gen_range(0..FP_REGS_USED))
    }

    fn address(&mut self) -> u64 {
        let line = self.rng.gen_range(0..self.lines);
        let word = self.rng.gen_range(0..LINE_BYTES / 8);
        DATA_BASE + line * LINE_BYTES + word * 8
    }
}

impl Iterator for SyntheticTrace {
    type Item = TraceEvent;

    fn next(&mut self) -> Option<TraceEvent> {
        if self.seq >= self.profile.length {
            return None;
        }
        let seq = self.seq;
        let cycle = (seq as f64 / self.profile.dispatch_rate) as u64;
        let ev = if let Some(ctl) = self.control_target() {
            let src = self.gpr();
            TraceEvent {
                seq,
                cycle,
                kind: OpKind::IntAlu,
                dst: Some(RegId::new(RegClass::Control, ctl)),
                srcs: vec![src],
                addr: None,
                data: Some(self.rng.gen()),
            }
        } else {
            let kind = self.pick_kind();
            let (dst, srcs, addr, data) = match kind {
                OpKind::IntAlu => (Some(self.gpr()), vec![self.gpr(), self.gpr()], None, None),
                OpKind::FpAddSub | OpKind::FpMulDiv => {
                    (Some(self.fpr()), vec![self.fpr(), self.fpr()], None, None)
                }
                OpKind::Branch => (None, vec![self.gpr()], None, None),
                OpKind::Load => (
                    Some(self.gpr()),
                    vec![self.gpr()],
                    Some(self.address()),
                    None,
                ),
                OpKind::Store => {
                    let srcs = vec![self.gpr(), self.gpr()];
                    let addr = self.address();
                    let data = match self.profile.store_data {
                        StoreData::Prbs => self.data.next_u64(),
                        StoreData::Constant(v) => v,
                    };
                    (None, srcs, Some(addr), Some(data))
                }
            };
            TraceEvent {
                seq,
                cycle,
                kind,
                dst,
                srcs,
                addr,
                data,
            }
        };
        self.seq += 1;
        Some(ev)
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let left = (self.profile.length - self.seq) as usize;
        (left, Some(left))
    }
}
