use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use super::SimError;
use crate::cache::{CacheConfig, SwapShiftConfig};
use crate::exec::{ExecConfig, InjectionConfig};
use crate::trace::{ProfileKind, RegClass, WorkloadProfile};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum TraceSource {
    /// A trace file in the text format.
    File(PathBuf),
    /// A preset synthetic profile.
    Preset {
        profile: ProfileKind,
        length: u64,
        #[serde(default)]
        seed: u64,
    },
    /// A fully specified synthetic profile.
    Synthetic(WorkloadProfile),
}

impl TraceSource {
    pub fn profile(&self) -> Option<WorkloadProfile> {
        match self {
            TraceSource::File(_) => None,
            TraceSource::Preset {
                profile,
                length,
                seed,
            } => Some(WorkloadProfile::preset(*profile, *length, *seed)),
            TraceSource::Synthetic(p) => Some(p.clone()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RegFileConfig {
    pub gpr: usize,
    pub fp_vec: usize,
    pub control: usize,
    pub mask: usize,
    pub segment: usize,
    pub temp: usize,
}

impl Default for RegFileConfig {
    fn default() -> Self {
        Self {
            gpr: 16,
            fp_vec: 32,
            control: 16,
            mask: 8,
            segment: 8,
            temp: 16,
        }
    }
}

impl RegFileConfig {
    /// Sizes in `RegClass::ALL` order.
    pub fn sizes(&self) -> [usize; 6] {
        let mut out = [0; 6];
        for class in RegClass::ALL {
            out[class.index()] = match class {
                RegClass::Gpr => self.gpr,
                RegClass::FpVec => self.fp_vec,
                RegClass::Control => self.control,
                RegClass::Mask => self.mask,
                RegClass::Segment => self.segment,
                RegClass::Temp => self.temp,
            };
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RotationConfig {
    pub enabled: bool,
    /// Cycles between two register-map rotations.
    pub period: u64,
}

impl Default for RotationConfig {
    fn default() -> Self {
        Self {
            enabled: false,
            period: 10_000_000,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Mitigations {
    pub injection: InjectionConfig,
    pub rotation: RotationConfig,
    pub swap_shift: SwapShiftConfig,
}

impl Mitigations {
    pub fn all(injection_period: u64, rotation_period: u64, swap_period: u64) -> Self {
        Self {
            injection: InjectionConfig {
                enabled: true,
                period: injection_period,
            },
            rotation: RotationConfig {
                enabled: true,
                period: rotation_period,
            },
            swap_shift: SwapShiftConfig {
                enabled: true,
                period: swap_period,
            },
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    /// Where `run` writes the JSON report.
    pub report: Option<PathBuf>,
    /// Directory for per-structure histogram CSVs.
    pub histogram_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub trace: TraceSource,
    pub seed: u64,
    pub core: ExecConfig,
    pub cache: CacheConfig,
    pub regfile: RegFileConfig,
    pub mitigations: Mitigations,
    /// Size of the synthetic instruction-fetch region.
    pub code_footprint_bytes: u64,
    pub histogram_bins: usize,
    pub output: OutputConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            trace: TraceSource::Preset {
                profile: ProfileKind::IntOnly,
                length: 1_000_000,
                seed: 0,
            },
            seed: 1,
            core: ExecConfig::default(),
            cache: CacheConfig::default(),
            regfile: RegFileConfig::default(),
            mitigations: Mitigations::default(),
            code_footprint_bytes: 8 << 10,
            histogram_bins: 10,
            output: OutputConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, SimError> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| SimError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: &str| Err(SimError::Config(m.to_string()));
        let m = &self.mitigations;
        if m.injection.period == 0 || m.rotation.period == 0 || m.swap_shift.period == 0 {
            return bad("mitigation periods must be >= 1");
        }
        if self.core.dispatch_width == 0 {
            return bad("dispatch width must be >= 1");
        }
        if self.histogram_bins < 2 {
            return bad("histogram_bins must be >= 2");
        }
        if self.code_footprint_bytes < 4 || !self.code_footprint_bytes.is_multiple_of(4) {
            return bad("code_footprint_bytes must be a positive multiple of 4");
        }
        if self.cache.page_bytes == 0 {
            return bad("page_bytes must be >= 1");
        }
        if self.regfile.sizes().contains(&0) {
            return bad("every register class needs at least one register");
        }
        if let Some(p) = self.trace.profile() {
            p.validate().map_err(|e| SimError::Config(e.to_string()))?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_baseline_table() {
        let c = ExperimentConfig::default();
        assert_eq!(c.core.dispatch_width, 4);
        assert_eq!(c.core.units.int_alu, 3);
        assert_eq!(c.core.latencies.fp_add_sub, 3);
        assert_eq!(c.core.latencies.fp_mul_div, 5);
        assert_eq!(
            (
                c.cache.l1d.size_bytes,
                c.cache.l1d.ways,
                c.cache.l1d.latency
            ),
            (32 << 10, 8, 4)
        );
        assert_eq!(
            (
                c.cache.l1i.size_bytes,
                c.cache.l1i.ways,
                c.cache.l1i.latency
            ),
            (32 << 10, 4, 4)
        );
        assert_eq!(
            (c.cache.l2.size_bytes, c.cache.l2.ways, c.cache.l2.latency),
            (256 << 10, 8, 8)
        );
        assert_eq!(
            (c.cache.l3.size_bytes, c.cache.l3.ways, c.cache.l3.latency),
            (8 << 20, 16, 30)
        );
        assert_eq!(
            (
                c.cache.dtlb.entries,
                c.cache.itlb.entries,
                c.cache.stlb.entries
            ),
            (64, 128, 512)
        );
        assert_eq!(c.regfile.sizes(), [16, 32, 16, 8, 8, 16]);
        assert_eq!(c.mitigations.injection.period, 4096);
        assert_eq!(c.mitigations.rotation.period, 10_000_000);
        assert_eq!(c.mitigations.swap_shift.period, 10_000_000);
        c.validate().unwrap();
    }

    #[test]
    fn json_roundtrip_and_partial() {
        let c = ExperimentConfig::default();
        let text = serde_json::to_string(&c).unwrap();
        assert_eq!(ExperimentConfig::from_json(&text).unwrap(), c);
        let partial =
            r#"{"trace": {"file": "t.trace"}, "mitigations": {"rotation": {"enabled": true}}}"#;
        let p = ExperimentConfig::from_json(partial).unwrap();
        assert_eq!(p.trace, TraceSource::File("t.trace".into()));
        assert!(p.mitigations.rotation.enabled);
        assert_eq!(p.mitigations.rotation.period, 10_000_000);
    }

    #[test]
    fn rejects_bad_configs() {
        for text in [
            r#"{"mitigations": {"swap_shift": {"period": 0}}}"#,
            r#"{"histogram_bins": 1}"#,
            r#"{"bogus": 1}"#,
            r#"{"regfile": {"gpr": 0}}"#,
            r#"{"trace": {"preset": {"profile": "int-only", "length": 10, "seed": 0}}, "code_footprint_bytes": 6}"#,
        ] {
            assert!(
                matches!(ExperimentConfig::from_json(text), Err(SimError::Config(_))),
                "{text}"
            );
        }
    }
}
