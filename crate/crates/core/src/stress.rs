//! Static-stress bookkeeping.
//!
//! A value written at cycle `t` holds from `t` (inclusive) up to the next
//! change (exclusive). Elapsed time is credited lazily when the value changes
//! and once more at [`CellStress::finalize`], so `time_at_one + time_at_zero`
//! always equals the observation span exactly.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum StressError {
    #[error("observation at cycle {cycle} precedes last write at cycle {last}")]
    NonMonotonic { cycle: u64, last: u64 },
    #[error("tracker already finalized")]
    AlreadyFinalized,
    #[error("tracker not finalized")]
    NotFinalized,
    #[error("histogram needs at least 2 bins (got {0})")]
    Bins(usize),
}

/// A cell is under static stress when it was written at most once.
#[inline]
pub fn is_static(write_count: u64) -> bool {
    write_count <= 1
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CellStress {
    pub current_value: bool,
    pub start_cycle: u64,
    pub last_change_cycle: u64,
    pub last_write_cycle: u64,
    pub time_at_one: u64,
    pub time_at_zero: u64,
    pub toggle_count: u64,
    pub write_count: u64,
    pub max_static_interval: u64,
    /// Written at least once.
    pub initialized: bool,
    pub end_cycle: Option<u64>,
}

impl Default for CellStress {
    fn default() -> Self {
        Self::new(0, false)
    }
}

impl CellStress {
    /// A cell holding `reset` from `start_cycle` on, never written.
    pub fn new(start_cycle: u64, reset: bool) -> Self {
        Self {
            current_value: reset,
            start_cycle,
            last_change_cycle: start_cycle,
            last_write_cycle: start_cycle,
            time_at_one: 0,
            time_at_zero: 0,
            toggle_count: 0,
            write_count: 0,
            max_static_interval: 0,
            initialized: false,
            end_cycle: None,
        }
    }

    pub fn observe(&mut self, cycle: u64, value: bool) -> Result<(), StressError> {
        if self.end_cycle.is_some() {
            return Err(StressError::AlreadyFinalized);
        }
        if cycle < self.last_write_cycle {
            return Err(StressError::NonMonotonic {
                cycle,
                last: self.last_write_cycle,
            });
        }
        if value != self.current_value {
            let held = cycle - self.last_change_cycle;
            self.credit(held);
            self.current_value = value;
            self.last_change_cycle = cycle;
            self.toggle_count += 1;
        }
        self.last_write_cycle = cycle;
        self.write_count += 1;
        self.initialized = true;
        Ok(())
    }

    pub fn finalize(&mut self, end_cycle: u64) -> Result<(), StressError> {
        if self.end_cycle.is_some() {
            return Err(StressError::AlreadyFinalized);
        }
        if end_cycle < self.last_write_cycle {
            return Err(StressError::NonMonotonic {
                cycle: end_cycle,
                last: self.last_write_cycle,
            });
        }
        self.credit(end_cycle - self.last_change_cycle);
        self.end_cycle = Some(end_cycle);
        Ok(())
    }

    fn credit(&mut self, held: u64) {
        if self.current_value {
            self.time_at_one += held;
        } else {
            self.time_at_zero += held;
        }
        self.max_static_interval = self.max_static_interval.max(held);
    }

    pub fn span(&self) -> Option<u64> {
        self.end_cycle.map(|e| e - self.start_cycle)
    }

    /// Fraction of the span spent at logic one. Zero-length spans report the
    /// held value.
    pub fn signal_probability(&self) -> Option<f64> {
        let span = self.span()?;
        Some(if span == 0 {
            f64::from(u8::from(self.current_value))
        } else {
            self.time_at_one as f64 / span as f64
        })
    }

    pub fn is_static(&self) -> bool {
        is_static(self.write_count)
    }
}

/// Sixty-four bit cells that are always written together (a register, an
/// operand bus, a cache word). Equivalent to 64 [`CellStress`] trackers but
/// only touches bits that actually change.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WordStress {
    value: u64,
    start_cycle: u64,
    last_write_cycle: u64,
    write_count: u64,
    end_cycle: Option<u64>,
    bits: Box<[BitState; 64]>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
struct BitState {
    last_change: u64,
    time_at_one: u64,
    toggles: u64,
    max_static: u64,
}

impl Default for WordStress {
    fn default() -> Self {
        Self::new(0, 0)
    }
}

impl WordStress {
    pub fn new(start_cycle: u64, reset: u64) -> Self {
        let bit = BitState {
            last_change: start_cycle,
            ..BitState::default()
        };
        Self {
            value: reset,
            start_cycle,
            last_write_cycle: start_cycle,
            write_count: 0,
            end_cycle: None,
            bits: Box::new([bit; 64]),
        }
    }

    pub fn value(&self) -> u64 {
        self.value
    }

    pub fn write_count(&self) -> u64 {
        self.write_count
    }

    pub fn is_finalized(&self) -> bool {
        self.end_cycle.is_some()
    }

    pub fn observe(&mut self, cycle: u64, value: u64) -> Result<(), StressError> {
        if self.end_cycle.is_some() {
            return Err(StressError::AlreadyFinalized);
        }
        if cycle < self.last_write_cycle {
            return Err(StressError::NonMonotonic {
                cycle,
                last: self.last_write_cycle,
            });
        }
        let mut changed = self.value ^ value;
        while changed != 0 {
            let i = changed.trailing_zeros() as usize;
            changed &= changed - 1;
            let was_one = (self.value >> i) & 1 == 1;
            let b = &mut self.bits[i];
            let held = cycle - b.last_change;
            if was_one {
                b.time_at_one += held;
            }
            b.max_static = b.max_static.max(held);
            b.last_change = cycle;
            b.toggles += 1;
        }
        self.value = value;
        self.last_write_cycle = cycle;
        self.write_count += 1;
        Ok(())
    }

    pub fn finalize(&mut self, end_cycle: u64) -> Result<(), StressError> {
        if self.end_cycle.is_some() {
            return Err(StressError::AlreadyFinalized);
        }
        if end_cycle < self.last_write_cycle {
            return Err(StressError::NonMonotonic {
                cycle: end_cycle,
                last: self.last_write_cycle,
            });
        }
        for (i, b) in self.bits.iter_mut().enumerate() {
            let held = end_cycle - b.last_change;
            if (self.value >> i) & 1 == 1 {
                b.time_at_one += held;
            }
            b.max_static = b.max_static.max(held);
        }
        self.end_cycle = Some(end_cycle);
        Ok(())
    }

    /// Per-bit view as a standalone [`CellStress`].
    pub fn cell(&self, bit: usize) -> CellStress {
        let b = &self.bits[bit];
        let current_value = (self.value >> bit) & 1 == 1;
        let credited_until = self.end_cycle.unwrap_or(b.last_change);
        let time_at_zero = credited_until - self.start_cycle - b.time_at_one;
        CellStress {
            current_value,
            start_cycle: self.start_cycle,
            last_change_cycle: b.last_change,
            last_write_cycle: self.last_write_cycle,
            time_at_one: b.time_at_one,
            time_at_zero,
            toggle_count: b.toggles,
            write_count: self.write_count,
            max_static_interval: b.max_static,
            initialized: self.write_count > 0,
            end_cycle: self.end_cycle,
        }
    }

    pub fn cells(&self) -> impl Iterator<Item = CellStress> + '_ {
        (0..64).map(|i| self.cell(i))
    }

    pub fn max_static_interval(&self, bit: usize) -> u64 {
        self.bits[bit].max_static
    }

    pub fn toggle_count(&self, bit: usize) -> u64 {
        self.bits[bit].toggles
    }
}

/// Uniform histogram of signal probabilities over `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Histogram {
    pub counts: Vec<u64>,
}

impl Histogram {
    pub fn bins(&self) -> usize {
        self.counts.len()
    }

    pub fn edges(&self, bin: usize) -> (f64, f64) {
        let n = self.counts.len() as f64;
        (bin as f64 / n, (bin + 1) as f64 / n)
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn merge(&mut self, other: &Histogram) {
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
    }

    pub fn write_csv<W: std::io::Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["bin_lo", "bin_hi", "count"])?;
        for (i, c) in self.counts.iter().enumerate() {
            let (lo, hi) = self.edges(i);
            w.write_record([format!("{lo}"), format!("{hi}"), c.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Bin of a finalized cell. Bins are inclusive-left; the last bin is closed.
/// Uses integer arithmetic so boundary probabilities land deterministically.
fn bin_of(cell: &CellStress, bins: usize) -> Result<usize, StressError> {
    let span = cell.span().ok_or(StressError::NotFinalized)?;
    let idx = if span == 0 {
        if cell.current_value {
            bins - 1
        } else {
            0
        }
    } else {
        ((u128::from(cell.time_at_one) * bins as u128) / u128::from(span)) as usize
    };
    Ok(idx.min(bins - 1))
}

pub fn signal_probability_histogram<'a, I>(cells: I, bins: usize) -> Result<Histogram, StressError>
where
    I: IntoIterator<Item = &'a CellStress>,
{
    if bins < 2 {
        return Err(StressError::Bins(bins));
    }
    let mut counts = vec![0u64; bins];
    for c in cells {
        counts[bin_of(c, bins)?] += 1;
    }
    Ok(Histogram { counts })
}

/// Histogram over every bit of a set of finalized words.
pub fn word_histogram<'a, I>(words: I, bins: usize) -> Result<Histogram, StressError>
where
    I: IntoIterator<Item = &'a WordStress>,
{
    if bins < 2 {
        return Err(StressError::Bins(bins));
    }
    let mut counts = vec![0u64; bins];
    for w in words {
        if !w.is_finalized() {
            return Err(StressError::NotFinalized);
        }
        for cell in w.cells() {
            counts[bin_of(&cell, bins)?] += 1;
        }
    }
    Ok(Histogram { counts })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Granularity {
    PerBit,
    PerEntry,
}

/// Aggregated stress of one hardware structure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StructStress {
    pub name: String,
    pub granularity: Granularity,
    pub cells: Vec<CellStress>,
    pub entry_write_counts: Vec<u64>,
}

impl StructStress {
    pub fn per_entry(name: impl Into<String>, entry_write_counts: Vec<u64>) -> Self {
        Self {
            name: name.into(),
            granularity: Granularity::PerEntry,
            cells: Vec::new(),
            entry_write_counts,
        }
    }

    pub fn per_bit<'a>(
        name: impl Into<String>,
        words: impl IntoIterator<Item = &'a WordStress>,
    ) -> Self {
        let mut cells = Vec::new();
        let mut entry_write_counts = Vec::new();
        for w in words {
            entry_write_counts.push(w.write_count());
            cells.extend(w.cells());
        }
        Self {
            name: name.into(),
            granularity: Granularity::PerBit,
            cells,
            entry_write_counts,
        }
    }

    pub fn static_entries(&self) -> usize {
        self.entry_write_counts
            .iter()
            .filter(|&&w| is_static(w))
            .count()
    }

    pub fn histogram(&self, bins: usize) -> Result<Histogram, StressError> {
        signal_probability_histogram(&self.cells, bins)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn constant_zero_writes() {
        let mut c = CellStress::default();
        c.observe(0, false).unwrap();
        c.observe(100, false).unwrap();
        c.finalize(200).unwrap();
        assert_eq!(c.write_count, 2);
        assert_eq!(c.toggle_count, 0);
        assert_eq!(c.time_at_zero, 200);
        assert_eq!(c.signal_probability(), Some(0.0));
    }

    #[test]
    fn half_duty() {
        let mut c = CellStress::default();
        c.observe(0, false).unwrap();
        c.observe(100, true).unwrap();
        c.finalize(200).unwrap();
        assert_eq!((c.time_at_zero, c.time_at_one), (100, 100));
        assert_eq!(c.signal_probability(), Some(0.5));
        assert_eq!(c.toggle_count, 1);
    }

    #[test]
    fn alternating_every_cycle() {
        let n = 50;
        let mut c = CellStress::default();
        for t in 0..2 * n {
            c.observe(t, t % 2 == 1).unwrap();
        }
        c.finalize(2 * n).unwrap();
        assert_eq!(c.max_static_interval, 1);
    }

    #[test]
    fn never_written() {
        let mut c = CellStress::default();
        c.finalize(1000).unwrap();
        assert_eq!(c.write_count, 0);
        assert_eq!(c.max_static_interval, 1000);
        assert!(c.is_static());
    }

    #[test]
    fn single_write_of_one() {
        let mut c = CellStress::default();
        c.observe(0, true).unwrap();
        c.finalize(500).unwrap();
        assert_eq!(c.signal_probability(), Some(1.0));
    }

    #[test]
    fn empty_trailing_interval() {
        let mut c = CellStress::default();
        c.observe(10, true).unwrap();
        c.finalize(10).unwrap();
        assert_eq!(c.time_at_one, 0);
        assert_eq!(c.time_at_zero, 10);
    }

    #[test]
    fn order_errors() {
        let mut c = CellStress::default();
        c.observe(10, true).unwrap();
        assert_eq!(
            c.observe(5, false),
            Err(StressError::NonMonotonic { cycle: 5, last: 10 })
        );
        c.finalize(20).unwrap();
        assert_eq!(c.finalize(30), Err(StressError::AlreadyFinalized));
        assert_eq!(c.observe(40, true), Err(StressError::AlreadyFinalized));
    }

    #[test]
    fn static_criterion() {
        assert!(is_static(0));
        assert!(is_static(1));
        assert!(!is_static(2));
    }

    #[test]
    fn histogram_edges() {
        let mut zeros: Vec<CellStress> = (0..5).map(|_| CellStress::default()).collect();
        for c in &mut zeros {
            c.finalize(10).unwrap();
        }
        let h = signal_probability_histogram(&zeros, 4).unwrap();
        assert_eq!(h.counts, vec![5, 0, 0, 0]);

        let mut half = CellStress::default();
        half.observe(5, true).unwrap();
        half.finalize(10).unwrap();
        let h = signal_probability_histogram([&half], 10).unwrap();
        assert_eq!(h.counts[5], 1);

        let mut one = CellStress::default();
        one.observe(0, true).unwrap();
        one.finalize(10).unwrap();
        let h = signal_probability_histogram([&one], 10).unwrap();
        assert_eq!(h.counts[9], 1);
    }

    #[test]
    fn histogram_errors() {
        let c = CellStress::default();
        assert_eq!(
            signal_probability_histogram([&c], 10),
            Err(StressError::NotFinalized)
        );
        assert_eq!(
            signal_probability_histogram([&c], 1),
            Err(StressError::Bins(1))
        );
    }

    #[test]
    fn prbs_register_is_balanced() {
        let mut lfsr = crate::prbs::LfsrState::prbs23(crate::prbs::DEFAULT_SEED);
        let mut cells: Vec<CellStress> = (0..8).map(|_| CellStress::default()).collect();
        for t in 0..10_000u64 {
            let w = lfsr.next_word(8).unwrap();
            for (i, c) in cells.iter_mut().enumerate() {
                c.observe(t, (w >> i) & 1 == 1).unwrap();
            }
        }
        for c in &mut cells {
            c.finalize(10_000).unwrap();
            let p = c.signal_probability().unwrap();
            assert!((0.45..=0.55).contains(&p), "p = {p}");
        }
    }

    fn events() -> impl Strategy<Value = Vec<(u64, u64)>> {
        prop::collection::vec((0u64..50, any::<u64>()), 0..60).prop_map(|v| {
            let mut t = 0;
            v.into_iter()
                .map(|(dt, val)| {
                    t += dt;
                    (t, val)
                })
                .collect()
        })
    }

    proptest! {
        #[test]
        fn conservation_and_bounds(ev in events(), tail in 0u64..100) {
            let mut c = CellStress::default();
            for &(t, v) in &ev {
                c.observe(t, v & 1 == 1).unwrap();
            }
            let end = ev.last().map_or(0, |e| e.0) + tail;
            c.finalize(end).unwrap();
            prop_assert_eq!(c.time_at_one + c.time_at_zero, end);
            prop_assert!(c.toggle_count <= c.write_count);
            prop_assert!(c.max_static_interval <= end);
        }

        #[test]
        fn split_passes_match(ev in events(), split in 0usize..60) {
            let mut whole = CellStress::default();
            for &(t, v) in &ev {
                whole.observe(t, v & 1 == 1).unwrap();
            }
            let split = split.min(ev.len());
            let mut first = CellStress::default();
            for &(t, v) in &ev[..split] {
                first.observe(t, v & 1 == 1).unwrap();
            }
            let mut second = first.clone();
            for &(t, v) in &ev[split..] {
                second.observe(t, v & 1 == 1).unwrap();
            }
            prop_assert_eq!(whole, second);
        }

        #[test]
        fn word_matches_scalar_cells(ev in events(), tail in 0u64..100) {
            let mut word = WordStress::default();
            let mut cells: Vec<CellStress> = (0..64).map(|_| CellStress::default()).collect();
            for &(t, v) in &ev {
                word.observe(t, v).unwrap();
                for (i, c) in cells.iter_mut().enumerate() {
                    c.observe(t, (v >> i) & 1 == 1).unwrap();
                }
            }
            let end = ev.last().map_or(0, |e| e.0) + tail;
            word.finalize(end).unwrap();
            for (i, c) in cells.iter_mut().enumerate() {
                c.finalize(end).unwrap();
                let w = word.cell(i);
                prop_assert_eq!(w.time_at_one, c.time_at_one);
                prop_assert_eq!(w.time_at_zero, c.time_at_zero);
                prop_assert_eq!(w.toggle_count, c.toggle_count);
                prop_assert_eq!(w.write_count, c.write_count);
                prop_assert_eq!(w.max_static_interval, c.max_static_interval);
                prop_assert_eq!(w.current_value, c.current_value);
            }
        }

        #[test]
        fn histogram_mass(ev in events(), bins in 2usize..20) {
            let mut word = WordStress::default();
            for &(t, v) in &ev {
                word.observe(t, v).unwrap();
            }
            word.finalize(ev.last().map_or(0, |e| e.0) + 1).unwrap();
            let h = word_histogram([&word], bins).unwrap();
            prop_assert_eq!(h.total(), 64);
        }
    }
}
