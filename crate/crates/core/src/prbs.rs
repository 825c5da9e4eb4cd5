//! Maximal-length Fibonacci LFSR used as the PRBS source everywhere in the
//! simulator: execution-unit injection, cache set fill, synthetic store data
//! and netlist stimulus.
//!
//! Tap masks use one bit per polynomial term: the term `x^e` sets bit `e - 1`,
//! so `x^7 + x^6 + 1` is `0b110_0000`. The register shifts left; the feedback
//! bit (parity of the tapped positions) enters at bit 0, and the bit emitted by
//! a step is bit 0 *before* the shift.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PrbsError {
    #[error("LFSR width {0} outside 3..=64")]
    Width(u32),
    #[error("tap mask {taps:#x} must have its top bit at position {} and fit in {width} bits", width - 1)]
    Taps { width: u32, taps: u64 },
    #[error("LFSR state must be nonzero and below 2^{width} (got {state:#x})")]
    State { width: u32, state: u64 },
    #[error("word length {0} outside 1..=64")]
    WordLength(u32),
}

/// Tap mask for `x^7 + x^6 + 1`.
pub const PRBS7_TAPS: u64 = (1 << 6) | (1 << 5);
/// Tap mask for `x^15 + x^14 + 1`.
pub const PRBS15_TAPS: u64 = (1 << 14) | (1 << 13);
/// Tap mask for `x^23 + x^18 + 1`.
pub const PRBS23_TAPS: u64 = (1 << 22) | (1 << 17);

/// Default seed for the shipped generators.
pub const DEFAULT_SEED: u64 = 1;

/// Builds a tap mask from polynomial exponents, e.g. `&[7, 6]` for
/// `x^7 + x^6 + 1`. The constant term is implicit; exponent 0 is ignored.
pub fn taps_from_exponents(exponents: &[u32]) -> u64 {
    exponents
        .iter()
        .filter(|&&e| (1..=64).contains(&e))
        .fold(0u64, |mask, &e| mask | (1u64 << (e - 1)))
}

#[inline]
fn width_mask(width: u32) -> u64 {
    if width == 64 {
        u64::MAX
    } else {
        (1u64 << width) - 1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "LfsrParams", into = "LfsrParams")]
pub struct LfsrState {
    width: u32,
    taps: u64,
    state: u64,
}

#[derive(Serialize, Deserialize)]
struct LfsrParams {
    width: u32,
    taps: u64,
    state: u64,
}

impl TryFrom<LfsrParams> for LfsrState {
    type Error = PrbsError;
    fn try_from(p: LfsrParams) -> Result<Self, Self::Error> {
        LfsrState::new(p.width, p.taps, p.state)
    }
}

impl From<LfsrState> for LfsrParams {
    fn from(s: LfsrState) -> Self {
        LfsrParams {
            width: s.width,
            taps: s.taps,
            state: s.state,
        }
    }
}

impl LfsrState {
    pub fn new(width: u32, taps: u64, seed: u64) -> Result<Self, PrbsError> {
        if !(3..=64).contains(&width) {
            return Err(PrbsError::Width(width));
        }
        let mask = width_mask(width);
        if taps == 0 || taps & !mask != 0 || taps >> (width - 1) != 1 {
            return Err(PrbsError::Taps { width, taps });
        }
        if seed == 0 || seed & !mask != 0 {
            return Err(PrbsError::State { width, state: seed });
        }
        Ok(Self {
            width,
            taps,
            state: seed,
        })
    }

    /// PRBS7 (`x^7 + x^6 + 1`). The seed is folded into the register width and
    /// forced nonzero, so any `u64` is accepted.
    pub fn prbs7(seed: u64) -> Self {
        Self::folded(7, PRBS7_TAPS, seed)
    }

    /// PRBS15 (`x^15 + x^14 + 1`).
    pub fn prbs15(seed: u64) -> Self {
        Self::folded(15, PRBS15_TAPS, seed)
    }

    /// PRBS23 (`x^23 + x^18 + 1`).
    pub fn prbs23(seed: u64) -> Self {
        Self::folded(23, PRBS23_TAPS, seed)
    }

    fn folded(width: u32, taps: u64, seed: u64) -> Self {
        let mask = width_mask(width);
        let mut state = 0;
        let mut s = seed;
        while s != 0 {
            state ^= s & mask;
            s >>= width;
        }
        if state == 0 {
            state = 1;
        }
        Self { width, taps, state }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn taps(&self) -> u64 {
        self.taps
    }

    pub fn state(&self) -> u64 {
        self.state
    }

    /// Advances one step, returning the emitted bit and the successor state.
    pub fn step(&self) -> (bool, Self) {
        let bit = self.state & 1 == 1;
        let feedback = u64::from((self.state & self.taps).count_ones() & 1);
        let state = ((self.state << 1) | feedback) & width_mask(self.width);
        (bit, Self { state, ..*self })
    }

    /// Packs `k` consecutive emitted bits into a word, first bit in bit 0.
    pub fn word(&self, k: u32) -> Result<(u64, Self), PrbsError> {
        if !(1..=64).contains(&k) {
            return Err(PrbsError::WordLength(k));
        }
        let mut next = *self;
        let mut word = 0u64;
        for i in 0..k {
            let (bit, s) = next.step();
            word |= u64::from(bit) << i;
            next = s;
        }
        Ok((word, next))
    }

    pub fn next_bit(&mut self) -> bool {
        let (bit, s) = self.step();
        *self = s;
        bit
    }

    pub fn next_word(&mut self, k: u32) -> Result<u64, PrbsError> {
        let (word, s) = self.word(k)?;
        *self = s;
        Ok(word)
    }

    /// Full 64-bit word; never fails.
    pub fn next_u64(&mut self) -> u64 {
        let mut word = 0u64;
        for i in 0..64 {
            word |= u64::from(self.next_bit()) << i;
        }
        word
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn period(start: LfsrState) -> u64 {
        let mut s = start.step().1;
        let mut n = 1;
        while s != start {
            s = s.step().1;
            n += 1;
        }
        n
    }

    #[test]
    fn shipped_polynomials_are_maximal() {
        assert_eq!(period(LfsrState::prbs7(DEFAULT_SEED)), 127);
        assert_eq!(period(LfsrState::prbs15(DEFAULT_SEED)), 32_767);
        assert_eq!(period(LfsrState::prbs23(DEFAULT_SEED)), (1 << 23) - 1);
    }

    #[test]
    fn width3_visits_every_nonzero_state() {
        let mut s = LfsrState::new(3, taps_from_exponents(&[3, 2]), 0b001).unwrap();
        let mut seen = std::collections::BTreeSet::new();
        for _ in 0..7 {
            assert!(seen.insert(s.state()));
            s = s.step().1;
        }
        assert_eq!(seen.len(), 7);
        assert_eq!(s.state(), 0b001);
    }

    #[test]
    fn prbs7_period_from_every_seed() {
        for seed in 1..128 {
            let s = LfsrState::new(7, PRBS7_TAPS, seed).unwrap();
            let (_, back) = s.word(64).unwrap().1.word(63).unwrap();
            assert_eq!(back, s, "seed {seed}");
        }
    }

    #[test]
    fn balance_over_one_period() {
        for (s, width) in [(LfsrState::prbs7(5), 7u32), (LfsrState::prbs15(77), 15)] {
            let mut s = s;
            let mut ones = 0u64;
            for _ in 0..((1u64 << width) - 1) {
                ones += u64::from(s.next_bit());
            }
            assert_eq!(ones, 1 << (width - 1));
        }
    }

    #[test]
    fn word_of_one_is_step() {
        let s = LfsrState::prbs15(99);
        let (bit, a) = s.step();
        let (w, b) = s.word(1).unwrap();
        assert_eq!(u64::from(bit), w);
        assert_eq!(a, b);
    }

    #[test]
    fn words_compose() {
        let s = LfsrState::prbs23(1234);
        let (lo, s1) = s.word(4).unwrap();
        let (hi, s2) = s1.word(4).unwrap();
        let (byte, s3) = s.word(8).unwrap();
        assert_eq!(byte, lo | (hi << 4));
        assert_eq!(s2, s3);
    }

    #[test]
    fn construction_errors() {
        assert!(matches!(
            LfsrState::new(7, PRBS7_TAPS, 0),
            Err(PrbsError::State { .. })
        ));
        assert!(matches!(
            LfsrState::new(7, 0, 1),
            Err(PrbsError::Taps { .. })
        ));
        // top tap below width-1
        assert!(matches!(
            LfsrState::new(7, 0b11, 1),
            Err(PrbsError::Taps { .. })
        ));
        assert!(matches!(
            LfsrState::new(7, PRBS7_TAPS, 1 << 7),
            Err(PrbsError::State { .. })
        ));
        assert!(matches!(
            LfsrState::new(2, 0b10, 1),
            Err(PrbsError::Width(2))
        ));
        let s = LfsrState::prbs7(1);
        assert_eq!(s.word(0), Err(PrbsError::WordLength(0)));
        assert_eq!(s.word(65), Err(PrbsError::WordLength(65)));
    }

    #[test]
    fn width64_register() {
        let taps = taps_from_exponents(&[64, 63, 61, 60]);
        let mut s = LfsrState::new(64, taps, u64::MAX).unwrap();
        assert_ne!(s.next_u64(), 0);
        assert_ne!(s.state(), 0);
    }

    #[test]
    fn folded_seed_never_zero() {
        assert_ne!(LfsrState::prbs7(0).state(), 0);
        assert_ne!(LfsrState::prbs7(0x7f | (0x7f << 7)).state(), 0);
    }

    proptest::proptest! {
        #[test]
        fn deterministic_streams(seed in 1u64..(1 << 23)) {
            let mut a = LfsrState::prbs23(seed);
            let mut b = LfsrState::new(23, PRBS23_TAPS, seed).unwrap();
            for _ in 0..8 {
                proptest::prop_assert_eq!(a.next_u64(), b.next_u64());
            }
        }

        #[test]
        fn state_never_zero(seed in 1u64..128, steps in 0usize..500) {
            let mut s = LfsrState::new(7, PRBS7_TAPS, seed).unwrap();
            for _ in 0..steps {
                s.next_bit();
                proptest::prop_assert_ne!(s.state(), 0);
            }
        }
    }
}
