//! Register file with periodic modulo rotation of the architectural-to-physical
//! mapping. Architectural register `a` lives in physical slot `(a + r) mod N`;
//! every trigger increments `r` and shifts all values one slot up, so each
//! physical slot sees a write even when the program never touches it.

use thiserror::Error;

use crate::stress::{is_static, StressError, WordStress};
use crate::trace::{RegClass, RegId};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RegFileError {
    #[error("register index {index} out of range for a file of {n}")]
    OutOfRange { index: usize, n: usize },
    #[error("register file needs at least one register")]
    Empty,
    #[error("rotation period must be >= 1")]
    Period,
    #[error("rotation is disabled")]
    Disabled,
    #[error(transparent)]
    Stress(#[from] StressError),
}

/// Physical slot of `arch_id` under rotation `r`.
pub fn map(arch_id: usize, r: usize, n: usize) -> Result<usize, RegFileError> {
    if arch_id >= n {
        return Err(RegFileError::OutOfRange { index: arch_id, n });
    }
    if r >= n {
        return Err(RegFileError::OutOfRange { index: r, n });
    }
    Ok((arch_id + r) % n)
}

#[derive(Debug, Clone)]
pub struct RotatingRegFile {
    n: usize,
    rotation: usize,
    trigger_period: u64,
    enabled: bool,
    next_trigger: u64,
    rotations: u64,
    slots: Vec<u64>,
    stress: Vec<WordStress>,
}

impl RotatingRegFile {
    pub fn new(n: usize, trigger_period: u64, enabled: bool) -> Result<Self, RegFileError> {
        if n == 0 {
            return Err(RegFileError::Empty);
        }
        if trigger_period == 0 {
            return Err(RegFileError::Period);
        }
        Ok(Self {
            n,
            rotation: 0,
            trigger_period,
            enabled,
            next_trigger: trigger_period,
            rotations: 0,
            slots: vec![0; n],
            stress: (0..n).map(|_| WordStress::default()).collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn rotation(&self) -> usize {
        self.rotation
    }

    pub fn rotations(&self) -> u64 {
        self.rotations
    }

    pub fn rotation_enabled(&self) -> bool {
        self.enabled
    }

    pub fn physical(&self, arch_id: usize) -> Result<usize, RegFileError> {
        map(arch_id, self.rotation, self.n)
    }

    pub fn read(&self, arch_id: usize) -> Result<u64, RegFileError> {
        Ok(self.slots[self.physical(arch_id)?])
    }

    pub fn write(&mut self, arch_id: usize, value: u64, cycle: u64) -> Result<(), RegFileError> {
        let p = self.physical(arch_id)?;
        self.slots[p] = value;
        self.stress[p].observe(cycle, value)?;
        Ok(())
    }

    /// Advances the mapping by one and moves every value to its new slot.
    pub fn rotate(&mut self, cycle: u64) -> Result<(), RegFileError> {
        if !self.enabled {
            return Err(RegFileError::Disabled);
        }
        self.rotation = (self.rotation + 1) % self.n;
        self.slots.rotate_right(1);
        for (slot, tracker) in self.slots.iter().zip(&mut self.stress) {
            tracker.observe(cycle, *slot)?;
        }
        self.rotations += 1;
        Ok(())
    }

    /// Fires every periodic trigger due at or before `cycle`.
    pub fn advance_to(&mut self, cycle: u64) -> Result<(), RegFileError> {
        if !self.enabled {
            return Ok(());
        }
        while self.next_trigger <= cycle {
            let at = self.next_trigger;
            self.rotate(at)?;
            self.next_trigger += self.trigger_period;
        }
        Ok(())
    }

    pub fn finalize(&mut self, end_cycle: u64) -> Result<(), RegFileError> {
        for s in &mut self.stress {
            s.finalize(end_cycle)?;
        }
        Ok(())
    }

    pub fn slot_stress(&self) -> &[WordStress] {
        &self.stress
    }

    pub fn static_slots(&self) -> usize {
        self.stress
            .iter()
            .filter(|s| is_static(s.write_count()))
            .count()
    }
}

/// One rotating pool per register class, each with its own size and counter.
#[derive(Debug, Clone)]
pub struct RegisterFiles {
    files: Vec<RotatingRegFile>,
}

impl RegisterFiles {
    pub fn new(
        sizes: [usize; 6],
        trigger_period: u64,
        enabled: bool,
    ) -> Result<Self, RegFileError> {
        let files = sizes
            .iter()
            .map(|&n| RotatingRegFile::new(n, trigger_period, enabled))
            .collect::<Result<_, _>>()?;
        Ok(Self { files })
    }

    pub fn class(&self, class: RegClass) -> &RotatingRegFile {
        &self.files[class.index()]
    }

    pub fn read(&self, reg: RegId) -> Result<u64, RegFileError> {
        self.files[reg.class.index()].read(usize::from(reg.index))
    }

    pub fn write(&mut self, reg: RegId, value: u64, cycle: u64) -> Result<(), RegFileError> {
        self.files[reg.class.index()].write(usize::from(reg.index), value, cycle)
    }

    pub fn advance_to(&mut self, cycle: u64) -> Result<(), RegFileError> {
        self.files.iter_mut().try_for_each(|f| f.advance_to(cycle))
    }

    pub fn finalize(&mut self, end_cycle: u64) -> Result<(), RegFileError> {
        self.files
            .iter_mut()
            .try_for_each(|f| f.finalize(end_cycle))
    }

    pub fn iter(&self) -> impl Iterator<Item = (RegClass, &RotatingRegFile)> {
        RegClass::ALL.into_iter().zip(&self.files)
    }
}
