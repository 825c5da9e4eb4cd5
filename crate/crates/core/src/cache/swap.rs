//! Swap-shift set remapping.
//!
//! The logical-to-physical set map is a rotation by the set-shift counter `k`
//! followed by the adjacent swaps `(0,1), (1,2), ..., (c-1,c)`, where `c` is
//! the swapped-set counter. Each trigger performs the next swap; after `S - 1`
//! swaps the map equals a rotation by `k + 1`, so `c` wraps and `k` advances.

use super::CacheError;

/// Closed form of the current permutation.
pub fn physical_set(s: usize, k: usize, c: usize, sets: usize) -> Result<usize, CacheError> {
    if sets < 2 || s >= sets || k >= sets || c >= sets - 1 {
        return Err(CacheError::SwapRange { s, k, c, sets });
    }
    Ok(if s < c {
        (s + k + 1) % sets
    } else if s == c {
        k
    } else {
        (s + k) % sets
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SwapShiftState {
    set_shift: usize,
    swapped: usize,
    sets: usize,
    period: u64,
    enabled: bool,
}

impl SwapShiftState {
    pub fn new(sets: usize, period: u64, enabled: bool) -> Result<Self, CacheError> {
        if sets < 2 {
            return Err(CacheError::Geometry(format!(
                "swap-shift needs at least 2 sets (got {sets})"
            )));
        }
        if period == 0 {
            return Err(CacheError::Geometry(
                "swap-shift period must be >= 1".into(),
            ));
        }
        Ok(Self {
            set_shift: 0,
            swapped: 0,
            sets,
            period,
            enabled,
        })
    }

    pub fn set_shift(&self) -> usize {
        self.set_shift
    }

    pub fn swapped_sets(&self) -> usize {
        self.swapped
    }

    pub fn period(&self) -> u64 {
        self.period
    }

    pub fn enabled(&self) -> bool {
        self.enabled
    }

    #[inline]
    pub fn physical(&self, logical: usize) -> usize {
        let (s, k, c, n) = (logical, self.set_shift, self.swapped, self.sets);
        if s < c {
            (s + k + 1) % n
        } else if s == c {
            k
        } else {
            (s + k) % n
        }
    }

    /// Physical sets owned by the logical pair swapped by the next trigger.
    pub fn next_pair(&self) -> (usize, usize) {
        (self.physical(self.swapped), self.physical(self.swapped + 1))
    }

    pub fn advance(&mut self) {
        self.swapped += 1;
        if self.swapped == self.sets - 1 {
            self.swapped = 0;
            self.set_shift = (self.set_shift + 1) % self.sets;
        }
    }

    pub fn mapping(&self) -> Vec<usize> {
        (0..self.sets).map(|s| self.physical(s)).collect()
    }
}
