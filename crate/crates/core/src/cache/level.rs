use serde::{Deserialize, Serialize};

use super::swap::SwapShiftState;
use super::CacheError;
use crate::prbs::LfsrState;
use crate::stress::{is_static, StressError, WordStress};
use crate::LINE_BYTES;

pub const WORDS_PER_LINE: usize = (LINE_BYTES / 8) as usize;

pub type LineData = [u64; WORDS_PER_LINE];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CacheGeometry {
    pub size_bytes: u64,
    pub ways: usize,
    pub latency: u64,
}

impl CacheGeometry {
    pub const fn new(size_bytes: u64, ways: usize, latency: u64) -> Self {
        Self {
            size_bytes,
            ways,
            latency,
        }
    }

    pub fn line_bytes(&self) -> u64 {
        LINE_BYTES
    }

    pub fn n_sets(&self) -> Result<usize, CacheError> {
        let per_set = self.ways as u64 * LINE_BYTES;
        if self.ways == 0 || self.size_bytes == 0 || !self.size_bytes.is_multiple_of(per_set) {
            return Err(CacheError::Geometry(format!(
                "{} bytes is not a whole number of {}-way sets of {LINE_BYTES}-byte lines",
                self.size_bytes, self.ways
            )));
        }
        Ok((self.size_bytes / per_set) as usize)
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct Line {
    pub valid: bool,
    pub dirty: bool,
    /// Full line address (byte address / 64); the tag proper is `line / sets`.
    pub line: u64,
    pub stamp: u64,
    pub data: LineData,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LevelStats {
    pub accesses: u64,
    pub hits: u64,
    pub misses: u64,
    pub writebacks: u64,
    pub swap_triggers: u64,
    pub prbs_line_writes: u64,
}

/// One set-associative LRU cache level. Lines are stored by physical set.
#[derive(Debug, Clone)]
pub struct CacheLevel {
    name: &'static str,
    geometry: CacheGeometry,
    sets: usize,
    ways: usize,
    lines: Vec<Line>,
    write_counts: Vec<u64>,
    tracked_way: Option<usize>,
    tracked: Vec<WordStress>,
    swap: SwapShiftState,
    prbs: LfsrState,
    clock: u64,
    pub(crate) stats: LevelStats,
}

impl CacheLevel {
    pub fn new(
        name: &'static str,
        geometry: CacheGeometry,
        tracked_way: Option<usize>,
        swap_period: u64,
        swap_enabled: bool,
        prbs_seed: u64,
    ) -> Result<Self, CacheError> {
        let sets = geometry.n_sets()?;
        let ways = geometry.ways;
        if let Some(w) = tracked_way {
            if w >= ways {
                return Err(CacheError::Geometry(format!(
                    "{name}: tracked way {w} but only {ways} ways"
                )));
            }
        }
        Ok(Self {
            name,
            geometry,
            sets,
            ways,
            lines: vec![Line::default(); sets * ways],
            write_counts: vec![0; sets * ways],
            tracked_way,
            tracked: if tracked_way.is_some() {
                (0..sets).map(|_| WordStress::default()).collect()
            } else {
                Vec::new()
            },
            swap: SwapShiftState::new(sets, swap_period, swap_enabled)?,
            prbs: LfsrState::prbs23(prbs_seed),
            clock: 0,
            stats: LevelStats::default(),
        })
    }

    pub fn name(&self) -> &'static str {
        self.name
    }

    pub fn geometry(&self) -> CacheGeometry {
        self.geometry
    }

    pub fn sets(&self) -> usize {
        self.sets
    }

    pub fn ways(&self) -> usize {
        self.ways
    }

    pub fn stats(&self) -> LevelStats {
        self.stats
    }

    pub fn swap_state(&self) -> &SwapShiftState {
        &self.swap
    }

    pub fn logical_set(&self, line: u64) -> usize {
        (line % self.sets as u64) as usize
    }

    pub fn physical_set_of(&self, line: u64) -> usize {
        self.swap.physical(self.logical_set(line))
    }

    /// Counts a demand access; true when this access completes a trigger period.
    pub(crate) fn count_access(&mut self) -> bool {
        self.stats.accesses += 1;
        self.swap.enabled() && self.stats.accesses.is_multiple_of(self.swap.period())
    }

    pub(crate) fn probe(&self, line: u64) -> Option<usize> {
        let base = self.physical_set_of(line) * self.ways;
        (base..base + self.ways).find(|&i| self.lines[i].valid && self.lines[i].line == line)
    }

    pub(crate) fn touch(&mut self, idx: usize) {
        self.clock += 1;
        self.lines[idx].stamp = self.clock;
    }

    pub(crate) fn line(&self, idx: usize) -> &Line {
        &self.lines[idx]
    }

    fn record_write(&mut self, idx: usize, cycle: u64) -> Result<(), StressError> {
        self.write_counts[idx] += 1;
        if Some(idx % self.ways) == self.tracked_way {
            let set = idx / self.ways;
            self.tracked[set].observe(cycle, self.lines[idx].data[0])?;
        }
        Ok(())
    }

    pub(crate) fn write_word(
        &mut self,
        idx: usize,
        word: usize,
        value: u64,
        cycle: u64,
    ) -> Result<(), StressError> {
        let l = &mut self.lines[idx];
        l.data[word] = value;
        l.dirty = true;
        self.record_write(idx, cycle)
    }

    pub(crate) fn overwrite(
        &mut self,
        idx: usize,
        data: LineData,
        cycle: u64,
    ) -> Result<(), StressError> {
        let l = &mut self.lines[idx];
        l.data = data;
        l.dirty = true;
        self.record_write(idx, cycle)
    }

    /// Allocates `line` in its set (invalid way first, else LRU). Returns the
    /// evicted line when it was dirty.
    pub(crate) fn install(
        &mut self,
        line: u64,
        data: LineData,
        dirty: bool,
        cycle: u64,
    ) -> Result<Option<(u64, LineData)>, StressError> {
        let base = self.physical_set_of(line) * self.ways;
        let victim = (base..base + self.ways)
            .find(|&i| !self.lines[i].valid)
            .unwrap_or_else(|| {
                (base..base + self.ways)
                    .min_by_key(|&i| self.lines[i].stamp)
                    .expect("ways >= 1")
            });
        let old = self.lines[victim];
        let evicted = (old.valid && old.dirty).then_some((old.line, old.data));
        if evicted.is_some() {
            self.stats.writebacks += 1;
        }
        self.clock += 1;
        self.lines[victim] = Line {
            valid: true,
            dirty,
            line,
            stamp: self.clock,
            data,
        };
        self.record_write(victim, cycle)?;
        Ok(evicted)
    }

    /// Performs the pending swap: the two physical sets of the swapped logical
    /// pair lose their lines (dirty ones are returned for write-back) and are
    /// refilled with PRBS data.
    pub(crate) fn swap_trigger(&mut self, cycle: u64) -> Result<Vec<(u64, LineData)>, StressError> {
        let (a, b) = self.swap.next_pair();
        let mut dirty = Vec::new();
        for set in [a, b] {
            for idx in set * self.ways..(set + 1) * self.ways {
                let old = self.lines[idx];
                if old.valid && old.dirty {
                    dirty.push((old.line, old.data));
                    self.stats.writebacks += 1;
                }
                let mut data = [0u64; WORDS_PER_LINE];
                for w in &mut data {
                    *w = self.prbs.next_u64();
                }
                self.lines[idx] = Line {
                    data,
                    ..Line::default()
                };
                self.record_write(idx, cycle)?;
                self.stats.prbs_line_writes += 1;
            }
        }
        self.swap.advance();
        self.stats.swap_triggers += 1;
        Ok(dirty)
    }

    pub fn total_lines(&self) -> usize {
        self.lines.len()
    }

    pub fn write_counts(&self) -> &[u64] {
        &self.write_counts
    }

    pub fn static_lines(&self) -> usize {
        self.write_counts.iter().filter(|&&w| is_static(w)).count()
    }

    pub fn valid_lines(&self) -> impl Iterator<Item = u64> + '_ {
        self.lines.iter().filter(|l| l.valid).map(|l| l.line)
    }

    pub fn tracked_way(&self) -> Option<usize> {
        self.tracked_way
    }

    pub fn tracked_words(&self) -> &[WordStress] {
        &self.tracked
    }

    pub(crate) fn finalize(&mut self, end_cycle: u64) -> Result<(), StressError> {
        self.tracked
            .iter_mut()
            .try_for_each(|w| w.finalize(end_cycle))
    }
}
