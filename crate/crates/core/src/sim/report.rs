use serde::{Deserialize, Serialize};

use super::{ExperimentConfig, SimError};
use crate::cache::HierarchyReport;
use crate::exec::UnitStressRow;
use crate::stress::Histogram;
use crate::trace::RegClass;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceIdentity {
    pub events: u64,
    /// SHA-256 of the canonical text encoding of every event.
    pub sha256: String,
    pub last_cycle: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegClassReport {
    pub class: RegClass,
    pub entries: usize,
    pub static_entries: usize,
    pub rotations: u64,
    pub histogram: Histogram,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CycleBreakdown {
    pub total: u64,
    pub dispatch_stalls: u64,
    pub data_access: u64,
    pub fetch_misses: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StressReport {
    pub config: ExperimentConfig,
    pub trace: TraceIdentity,
    pub cycles: CycleBreakdown,
    pub units: Vec<UnitStressRow>,
    pub exec_operand_histogram: Histogram,
    pub injection_ticks: u64,
    pub registers: Vec<RegClassReport>,
    pub cache: HierarchyReport,
    pub notes: Vec<String>,
}

impl StressReport {
    pub fn static_units(&self) -> usize {
        self.units.iter().filter(|u| u.is_static).count()
    }

    pub fn static_operand_bits(&self) -> usize {
        self.units.iter().map(|u| u.static_operand_bits).sum()
    }

    pub fn static_registers(&self) -> usize {
        self.registers.iter().map(|r| r.static_entries).sum()
    }

    pub fn static_cache_lines(&self) -> usize {
        self.cache.levels.iter().map(|l| l.static_lines).sum()
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Delta {
    pub metric: String,
    pub a: u64,
    pub b: u64,
    /// `(b - a) / a * 100`; absent when `a` is zero and `b` is not.
    pub percent: Option<f64>,
}

impl Delta {
    fn new(metric: impl Into<String>, a: u64, b: u64) -> Self {
        let percent = match (a, b) {
            (0, 0) => Some(0.0),
            (0, _) => None,
            _ => Some((b as f64 - a as f64) / a as f64 * 100.0),
        };
        Self {
            metric: metric.into(),
            a,
            b,
            percent,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub trace_sha256: String,
    pub deltas: Vec<Delta>,
}

impl Comparison {
    pub fn get(&self, metric: &str) -> Option<&Delta> {
        self.deltas.iter().find(|d| d.metric == metric)
    }

    pub fn cycle_delta_percent(&self) -> Option<f64> {
        self.get("total_cycles").and_then(|d| d.percent)
    }
}

/// A/B deltas of two runs over the same trace and core.
pub fn compare(a: &StressReport, b: &StressReport) -> Result<Comparison, SimError> {
    if a.trace != b.trace {
        return Err(SimError::Mismatch(format!(
            "trace identity differs ({} vs {})",
            a.trace.sha256, b.trace.sha256
        )));
    }
    if a.config.core != b.config.core
        || a.config.cache != b.config.cache
        || a.config.regfile != b.config.regfile
    {
        return Err(SimError::Mismatch(
            "core or memory configuration differs".into(),
        ));
    }
    let mut deltas = vec![Delta::new("total_cycles", a.cycles.total, b.cycles.total)];
    for (la, lb) in a.cache.levels.iter().zip(&b.cache.levels) {
        deltas.push(Delta::new(
            format!("{}.misses", la.name),
            la.stats.misses,
            lb.stats.misses,
        ));
        deltas.push(Delta::new(
            format!("{}.static_lines", la.name),
            la.static_lines as u64,
            lb.static_lines as u64,
        ));
    }
    for (ta, tb) in a.cache.tlbs.iter().zip(&b.cache.tlbs) {
        deltas.push(Delta::new(
            format!("{}.static_entries", ta.name),
            ta.static_entries as u64,
            tb.static_entries as u64,
        ));
    }
    deltas.push(Delta::new(
        "static_registers",
        a.static_registers() as u64,
        b.static_registers() as u64,
    ));
    deltas.push(Delta::new(
        "static_units",
        a.static_units() as u64,
        b.static_units() as u64,
    ));
    deltas.push(Delta::new(
        "static_operand_bits",
        a.static_operand_bits() as u64,
        b.static_operand_bits() as u64,
    ));
    Ok(Comparison {
        trace_sha256: a.trace.sha256.clone(),
        deltas,
    })
}
