//! Three-level cache hierarchy with split L1, TLB stress observation and
//! swap-shift remapping with PRBS fill.
//!
//! Policy: write-back, write-allocate at every level. A miss fills every level
//! above the one that hit (memory when none did); there is no back-invalidation,
//! so a dirty victim written back to a level that lost the line re-allocates it
//! there. Swaps write back dirty lines before invalidating them, keeping the
//! data path exact. Remapping itself costs no access latency.

mod level;
mod swap;
mod tlb;

pub use level::{CacheGeometry, CacheLevel, LevelStats, LineData, WORDS_PER_LINE};
pub use swap::{physical_set, SwapShiftState};
pub use tlb::{Tlb, TlbGeometry};

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::stress::{word_histogram, Histogram, StressError};
use crate::LINE_BYTES;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CacheError {
    #[error("invalid geometry: {0}")]
    Geometry(String),
    #[error("swap-shift parameters out of range: s={s} k={k} c={c} sets={sets}")]
    SwapRange {
        s: usize,
        k: usize,
        c: usize,
        sets: usize,
    },
    #[error(transparent)]
    Stress(#[from] StressError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Level {
    L1d,
    L1i,
    L2,
    L3,
}

impl Level {
    pub const ALL: [Level; 4] = [Level::L1d, Level::L1i, Level::L2, Level::L3];

    fn below(self) -> Option<Level> {
        match self {
            Level::L1d | Level::L1i => Some(Level::L2),
            Level::L2 => Some(Level::L3),
            Level::L3 => None,
        }
    }

    fn name(self) -> &'static str {
        match self {
            Level::L1d => "l1d",
            Level::L1i => "l1i",
            Level::L2 => "l2",
            Level::L3 => "l3",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HitLevel {
    L1,
    L2,
    L3,
    Memory,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Access {
    Read,
    Write(u64),
    Fetch,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AccessOutcome {
    pub hit: HitLevel,
    pub latency: u64,
    /// Loaded (or stored) 64-bit word.
    pub value: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CacheConfig {
    pub l1d: CacheGeometry,
    pub l1i: CacheGeometry,
    pub l2: CacheGeometry,
    pub l3: CacheGeometry,
    pub dtlb: TlbGeometry,
    pub itlb: TlbGeometry,
    pub stlb: TlbGeometry,
    pub page_bytes: u64,
    pub memory_latency: u64,
    /// Way whose first word per line gets per-bit tracking, per level.
    pub tracked_way: Option<usize>,
}

impl Default for CacheConfig {
    fn default() -> Self {
        Self {
            l1d: CacheGeometry::new(32 << 10, 8, 4),
            l1i: CacheGeometry::new(32 << 10, 4, 4),
            l2: CacheGeometry::new(256 << 10, 8, 8),
            l3: CacheGeometry::new(8 << 20, 16, 30),
            dtlb: TlbGeometry {
                entries: 64,
                ways: 4,
            },
            itlb: TlbGeometry {
                entries: 128,
                ways: 4,
            },
            stlb: TlbGeometry {
                entries: 512,
                ways: 4,
            },
            page_bytes: 4096,
            memory_latency: 200,
            tracked_way: Some(0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SwapShiftConfig {
    pub enabled: bool,
    /// Demand accesses to a level between two triggers on that level.
    pub period: u64,
}

impl Default for SwapShiftConfig {
    fn default() -> Self {
        Self {
            enabled: false,
            period: 10_000_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelReport {
    pub name: String,
    pub sets: usize,
    pub ways: usize,
    pub total_lines: usize,
    pub static_lines: usize,
    pub stats: LevelStats,
    pub swap_enabled: bool,
    pub swap_period: u64,
    pub set_shift: usize,
    pub swapped_sets: usize,
    pub tracked_way: Option<usize>,
    pub tracked_histogram: Option<Histogram>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TlbReport {
    pub name: String,
    pub entries: usize,
    pub static_entries: usize,
    pub hits: u64,
    pub misses: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HierarchyReport {
    pub levels: Vec<LevelReport>,
    pub tlbs: Vec<TlbReport>,
}

#[derive(Debug, Clone)]
pub struct Hierarchy {
    levels: [CacheLevel; 4],
    dtlb: Tlb,
    itlb: Tlb,
    stlb: Tlb,
    page_bytes: u64,
    memory_latency: u64,
    memory: HashMap<u64, LineData>,
    fill_log: Option<Vec<(Level, u64)>>,
}

impl Hierarchy {
    pub fn new(cfg: &CacheConfig, swap: SwapShiftConfig, seed: u64) -> Result<Self, CacheError> {
        if cfg.page_bytes == 0 {
            return Err(CacheError::Geometry("page size must be nonzero".into()));
        }
        let mk = |level: Level, g: CacheGeometry| {
            CacheLevel::new(
                level.name(),
                g,
                cfg.tracked_way,
                swap.period,
                swap.enabled,
                seed ^ (0xc3a5_c85c_97cb_3127u64.wrapping_mul(level as u64 + 1)),
            )
        };
        Ok(Self {
            levels: [
                mk(Level::L1d, cfg.l1d)?,
                mk(Level::L1i, cfg.l1i)?,
                mk(Level::L2, cfg.l2)?,
                mk(Level::L3, cfg.l3)?,
            ],
            dtlb: Tlb::new("dtlb", cfg.dtlb)?,
            itlb: Tlb::new("itlb", cfg.itlb)?,
            stlb: Tlb::new("stlb", cfg.stlb)?,
            page_bytes: cfg.page_bytes,
            memory_latency: cfg.memory_latency,
            memory: HashMap::new(),
            fill_log: None,
        })
    }

    /// Records every line allocation from now on (see [`Hierarchy::fill_log`]).
    pub fn enable_fill_log(&mut self) {
        self.fill_log = Some(Vec::new());
    }

    pub fn fill_log(&self) -> Option<&[(Level, u64)]> {
        self.fill_log.as_deref()
    }

    pub fn level(&self, level: Level) -> &CacheLevel {
        &self.levels[level as usize]
    }

    /// Demand accesses seen by a level; writebacks are not counted.
    pub fn accesses(&self, level: Level) -> u64 {
        self.levels[level as usize].stats.accesses
    }

    pub fn access(
        &mut self,
        addr: u64,
        kind: Access,
        cycle: u64,
    ) -> Result<AccessOutcome, CacheError> {
        let line = addr / LINE_BYTES;
        let word = ((addr % LINE_BYTES) / 8) as usize;
        let page = addr / self.page_bytes;
        let first = if kind == Access::Fetch {
            if !self.itlb.access(page) {
                self.stlb.access(page);
            }
            Level::L1i
        } else {
            if !self.dtlb.access(page) {
                self.stlb.access(page);
            }
            Level::L1d
        };
        let path = [first, Level::L2, Level::L3];

        let mut due = [false; 4];
        let mut found = None;
        for (depth, &lvl) in path.iter().enumerate() {
            let c = &mut self.levels[lvl as usize];
            due[lvl as usize] = c.count_access();
            if let Some(idx) = c.probe(line) {
                c.touch(idx);
                c.stats.hits += 1;
                found = Some((depth, idx, c.line(idx).data));
                break;
            }
            c.stats.misses += 1;
        }

        let (depth, data, latency) = match found {
            Some((d, _, data)) => (d, data, self.levels[path[d] as usize].geometry().latency),
            None => (
                path.len(),
                self.memory
                    .get(&line)
                    .copied()
                    .unwrap_or([0; WORDS_PER_LINE]),
                self.memory_latency,
            ),
        };
        let mut l1_idx = found.filter(|f| f.0 == 0).map(|f| f.1);
        for d in (0..depth).rev() {
            let lvl = path[d];
            let evicted = self.levels[lvl as usize].install(line, data, false, cycle)?;
            if let Some(log) = &mut self.fill_log {
                log.push((lvl, line));
            }
            if let Some((victim, vdata)) = evicted {
                self.write_back(lvl.below(), victim, vdata, cycle)?;
            }
            if d == 0 {
                l1_idx = self.levels[lvl as usize].probe(line);
            }
        }

        let value = match kind {
            Access::Write(v) => {
                let idx = l1_idx.expect("line resident in L1 after fill");
                self.levels[first as usize].write_word(idx, word, v, cycle)?;
                v
            }
            Access::Read | Access::Fetch => data[word],
        };

        for lvl in Level::ALL {
            if due[lvl as usize] {
                for (victim, vdata) in self.levels[lvl as usize].swap_trigger(cycle)? {
                    self.write_back(lvl.below(), victim, vdata, cycle)?;
                }
            }
        }

        let hit = match depth {
            0 => HitLevel::L1,
            1 => HitLevel::L2,
            2 => HitLevel::L3,
            _ => HitLevel::Memory,
        };
        Ok(AccessOutcome {
            hit,
            latency,
            value,
        })
    }

    fn write_back(
        &mut self,
        target: Option<Level>,
        line: u64,
        data: LineData,
        cycle: u64,
    ) -> Result<(), CacheError> {
        let Some(lvl) = target else {
            self.memory.insert(line, data);
            return Ok(());
        };
        let c = &mut self.levels[lvl as usize];
        if let Some(idx) = c.probe(line) {
            c.overwrite(idx, data, cycle)?;
            return Ok(());
        }
        let evicted = c.install(line, data, true, cycle)?;
        if let Some(log) = &mut self.fill_log {
            log.push((lvl, line));
        }
        if let Some((victim, vdata)) = evicted {
            self.write_back(lvl.below(), victim, vdata, cycle)?;
        }
        Ok(())
    }

    /// Finalizes the tracked-way trackers and summarizes every structure.
    pub fn stress_report(
        &mut self,
        end_cycle: u64,
        bins: usize,
    ) -> Result<HierarchyReport, CacheError> {
        let mut levels = Vec::new();
        for c in &mut self.levels {
            c.finalize(end_cycle)?;
            let swap = c.swap_state();
            levels.push(LevelReport {
                name: c.name().to_string(),
                sets: c.sets(),
                ways: c.ways(),
                total_lines: c.total_lines(),
                static_lines: c.static_lines(),
                stats: c.stats(),
                swap_enabled: swap.enabled(),
                swap_period: swap.period(),
                set_shift: swap.set_shift(),
                swapped_sets: swap.swapped_sets(),
                tracked_way: c.tracked_way(),
                tracked_histogram: c
                    .tracked_way()
                    .map(|_| word_histogram(c.tracked_words(), bins))
                    .transpose()?,
            });
        }
        let tlbs = [&self.dtlb, &self.itlb, &self.stlb]
            .into_iter()
            .map(|t| TlbReport {
                name: t.name().to_string(),
                entries: t.entries(),
                static_entries: t.static_entries(),
                hits: t.hits,
                misses: t.misses,
            })
            .collect();
        Ok(HierarchyReport { levels, tlbs })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::collections::VecDeque;

    fn small_config() -> CacheConfig {
        CacheConfig {
            l1d: CacheGeometry::new(1 << 10, 2, 4),
            l1i: CacheGeometry::new(1 << 10, 2, 4),
            l2: CacheGeometry::new(4 << 10, 4, 8),
            l3: CacheGeometry::new(16 << 10, 4, 30),
            tracked_way: Some(0),
            ..CacheConfig::default()
        }
    }

    /// Textbook LRU set-associative cache: per set, tags ordered by recency.
    struct LruOracle {
        sets: Vec<VecDeque<u64>>,
        ways: usize,
    }

    impl LruOracle {
        fn new(g: CacheGeometry) -> Self {
            Self {
                sets: vec![VecDeque::new(); g.n_sets().unwrap()],
                ways: g.ways,
            }
        }

        fn access(&mut self, line: u64) -> bool {
            let n = self.sets.len() as u64;
            let set = &mut self.sets[(line % n) as usize];
            if let Some(pos) = set.iter().position(|&t| t == line / n) {
                let t = set.remove(pos).unwrap();
                set.push_front(t);
                return true;
            }
            if set.len() == self.ways {
                set.pop_back();
            }
            set.push_front(line / n);
            false
        }
    }

    #[test]
    fn table_geometries() {
        let cfg = CacheConfig::default();
        assert_eq!(cfg.l1d.n_sets().unwrap(), 64);
        assert_eq!(cfg.l1i.n_sets().unwrap(), 128);
        assert_eq!(cfg.l2.n_sets().unwrap(), 512);
        assert_eq!(cfg.l3.n_sets().unwrap(), 8192);
        assert!(CacheGeometry::new(1000, 8, 1).n_sets().is_err());
    }

    #[test]
    fn repeated_load_hits_l1() {
        let mut h = Hierarchy::new(&CacheConfig::default(), SwapShiftConfig::default(), 1).unwrap();
        let a = h.access(0x1000, Access::Read, 0).unwrap();
        assert_eq!(a.hit, HitLevel::Memory);
        assert_eq!(a.latency, 200);
        let b = h.access(0x1000, Access::Read, 1).unwrap();
        assert_eq!(b.hit, HitLevel::L1);
        assert_eq!(b.latency, 4);
    }

    #[test]
    fn untouched_cache_is_all_static() {
        let mut h = Hierarchy::new(&CacheConfig::default(), SwapShiftConfig::default(), 1).unwrap();
        let r = h.stress_report(100, 10).unwrap();
        for l in &r.levels {
            assert_eq!(l.static_lines, l.total_lines);
        }
        for t in &r.tlbs {
            assert_eq!(t.static_entries, t.entries);
        }
    }

    #[test]
    fn matches_textbook_lru_without_swaps() {
        let cfg = small_config();
        let mut h = Hierarchy::new(&cfg, SwapShiftConfig::default(), 1).unwrap();
        let mut l1 = LruOracle::new(cfg.l1d);
        let mut l2 = LruOracle::new(cfg.l2);
        let mut l3 = LruOracle::new(cfg.l3);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for t in 0..100_000u64 {
            let line = rng.gen_range(0..2048u64);
            let expect = if l1.access(line) {
                HitLevel::L1
            } else if l2.access(line) {
                HitLevel::L2
            } else if l3.access(line) {
                HitLevel::L3
            } else {
                HitLevel::Memory
            };
            // misses at a level allocate there; oracle levels below a hit are untouched
            let got = h.access(line * 64, Access::Read, t).unwrap().hit;
            assert_eq!(got, expect, "access {t}");
        }
    }

    #[test]
    fn l1_matches_lru_with_stores() {
        let cfg = small_config();
        let mut h = Hierarchy::new(&cfg, SwapShiftConfig::default(), 1).unwrap();
        let mut l1 = LruOracle::new(cfg.l1d);
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for t in 0..50_000u64 {
            let line = rng.gen_range(0..512u64);
            let kind = if rng.gen_bool(0.4) {
                Access::Write(rng.gen())
            } else {
                Access::Read
            };
            let hit = h.access(line * 64, kind, t).unwrap().hit == HitLevel::L1;
            assert_eq!(hit, l1.access(line));
        }
    }

    fn check_flat_memory(swap: SwapShiftConfig, seed: u64, n: u64) {
        let cfg = small_config();
        let mut h = Hierarchy::new(&cfg, swap, seed).unwrap();
        let mut flat: HashMap<u64, u64> = HashMap::new();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for t in 0..n {
            let addr = rng.gen_range(0..4096u64) * 8;
            if rng.gen_bool(0.5) {
                let v = rng.gen();
                h.access(addr, Access::Write(v), t).unwrap();
                flat.insert(addr, v);
            } else {
                let got = h.access(addr, Access::Read, t).unwrap().value;
                assert_eq!(got, flat.get(&addr).copied().unwrap_or(0), "access {t}");
            }
        }
    }

    #[test]
    fn loads_match_flat_memory() {
        check_flat_memory(SwapShiftConfig::default(), 3, 100_000);
        check_flat_memory(
            SwapShiftConfig {
                enabled: true,
                period: 7,
            },
            4,
            100_000,
        );
        check_flat_memory(
            SwapShiftConfig {
                enabled: true,
                period: 1,
            },
            5,
            20_000,
        );
    }

    #[test]
    fn load_after_swap_misses_but_is_correct() {
        let cfg = small_config();
        let period = 4;
        let mut h = Hierarchy::new(
            &cfg,
            SwapShiftConfig {
                enabled: true,
                period,
            },
            1,
        )
        .unwrap();
        // logical L1 set 0 is the first one swapped; its line lives at address 0
        h.access(0, Access::Write(0xabc), 0).unwrap();
        for t in 1..period {
            h.access(0, Access::Read, t).unwrap();
        }
        assert_eq!(h.level(Level::L1d).stats().swap_triggers, 1);
        let after = h.access(0, Access::Read, period).unwrap();
        assert_ne!(after.hit, HitLevel::L1);
        assert_eq!(after.value, 0xabc);
    }

    #[test]
    fn trigger_invalidates_two_sets() {
        let cfg = small_config();
        let ways = cfg.l1d.ways;
        let mut h = Hierarchy::new(
            &cfg,
            SwapShiftConfig {
                enabled: true,
                period: 1000,
            },
            1,
        )
        .unwrap();
        // fill every L1 line first so the swapped sets hold valid data
        for t in 0..1000u64 {
            h.access((t % 64) * 64, Access::Read, t).unwrap();
        }
        let l1 = h.level(Level::L1d);
        let valid = l1.valid_lines().count();
        assert_eq!(l1.stats().swap_triggers, 1);
        assert_eq!(l1.stats().prbs_line_writes, 2 * ways as u64);
        assert_eq!(valid, l1.total_lines() - 2 * ways);
    }

    #[test]
    fn empty_sets_swap_without_writebacks() {
        let cfg = small_config();
        let mut h = Hierarchy::new(
            &cfg,
            SwapShiftConfig {
                enabled: true,
                period: 1,
            },
            1,
        )
        .unwrap();
        // one access to logical set 5 triggers a swap of logical sets 0 and 1 (empty)
        h.access(5 * 64, Access::Read, 0).unwrap();
        let s = h.level(Level::L1d).stats();
        assert_eq!(s.writebacks, 0);
        assert_eq!(s.prbs_line_writes, 2 * cfg.l1d.ways as u64);
    }

    #[test]
    fn swap_round_is_rotation() {
        let cfg = small_config();
        let sets = cfg.l1d.n_sets().unwrap();
        let mut h = Hierarchy::new(
            &cfg,
            SwapShiftConfig {
                enabled: true,
                period: 1,
            },
            1,
        )
        .unwrap();
        for t in 0..(sets - 1) as u64 {
            h.access(0, Access::Read, t).unwrap();
        }
        let st = h.level(Level::L1d).swap_state();
        assert_eq!((st.set_shift(), st.swapped_sets()), (1, 0));
        assert_eq!(
            st.mapping(),
            (0..sets).map(|s| (s + 1) % sets).collect::<Vec<_>>()
        );
    }

    #[test]
    fn mitigation_write_bound() {
        let cfg = small_config();
        let period = 5;
        let mut h = Hierarchy::new(
            &cfg,
            SwapShiftConfig {
                enabled: true,
                period,
            },
            2,
        )
        .unwrap();
        // hammer a single line: the workload alone would leave nearly every line static
        let sets = cfg.l1d.n_sets().unwrap() as u64;
        let accesses = 2 * period * (sets - 1);
        for t in 0..accesses {
            h.access(0, Access::Read, t).unwrap();
        }
        let l1 = h.level(Level::L1d);
        let rounds = accesses / (period * (sets - 1));
        assert!(l1.write_counts().iter().all(|&w| w >= rounds));
        assert_eq!(l1.static_lines(), 0);
    }

    #[test]
    fn fills_are_inclusive() {
        let cfg = small_config();
        let mut h = Hierarchy::new(
            &cfg,
            SwapShiftConfig {
                enabled: true,
                period: 13,
            },
            1,
        )
        .unwrap();
        h.enable_fill_log();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for t in 0..20_000u64 {
            let addr = rng.gen_range(0..8192u64) * 8;
            let kind = if rng.gen_bool(0.3) {
                Access::Write(t)
            } else {
                Access::Read
            };
            h.access(addr, kind, t).unwrap();
        }
        let log = h.fill_log().unwrap();
        let filled = |lvl: Level, line: u64| log.iter().any(|&(l, x)| l == lvl && x == line);
        for line in h.level(Level::L1d).valid_lines() {
            assert!(
                filled(Level::L2, line) && filled(Level::L3, line),
                "line {line:#x}"
            );
        }
    }

    #[test]
    fn tlbs_observe_pages() {
        let mut h = Hierarchy::new(&CacheConfig::default(), SwapShiftConfig::default(), 1).unwrap();
        for p in 0..8u64 {
            h.access(p * 4096, Access::Read, p).unwrap();
            h.access(0x40_0000 + p * 4096, Access::Fetch, p).unwrap();
        }
        let r = h.stress_report(100, 10).unwrap();
        let by = |n: &str| r.tlbs.iter().find(|t| t.name == n).unwrap().clone();
        assert_eq!(by("dtlb").misses, 8);
        assert_eq!(by("itlb").misses, 8);
        assert_eq!(by("stlb").misses, 16);
        assert_eq!(by("dtlb").static_entries, 64);
    }
}
