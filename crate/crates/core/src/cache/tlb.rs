use serde::{Deserialize, Serialize};

use super::CacheError;
use crate::stress::is_static;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TlbGeometry {
    pub entries: usize,
    pub ways: usize,
}

#[derive(Debug, Clone, Copy, Default)]
struct Entry {
    valid: bool,
    page: u64,
    stamp: u64,
}

/// Set-associative LRU translation buffer, modeled only to count how often
/// each entry is written.
#[derive(Debug, Clone)]
pub struct Tlb {
    name: &'static str,
    sets: usize,
    ways: usize,
    entries: Vec<Entry>,
    write_counts: Vec<u64>,
    clock: u64,
    pub(crate) hits: u64,
    pub(crate) misses: u64,
}

impl Tlb {
    pub fn new(name: &'static str, g: TlbGeometry) -> Result<Self, CacheError> {
        if g.ways == 0 || g.entries == 0 || !g.entries.is_multiple_of(g.ways) {
            return Err(CacheError::Geometry(format!(
                "{name}: {} entries not divisible into {}-way sets",
                g.entries, g.ways
            )));
        }
        Ok(Self {
            name,
            sets: g.entries / g.ways,
            ways: g.ways,
            entries: vec![Entry::default(); g.entries],
            write_counts: vec![0; g.entries],
            clock: 0,
            hits: 0,
            misses: 0,
        })
    }

    pub fn name(&self) -> &'static str {
        self.name
    }

    /// Looks up `page`; on a miss the translation is installed. Returns hit.
    pub fn access(&mut self, page: u64) -> bool {
        self.clock += 1;
        let base = (page % self.sets as u64) as usize * self.ways;
        let set = base..base + self.ways;
        if let Some(i) = set
            .clone()
            .find(|&i| self.entries[i].valid && self.entries[i].page == page)
        {
            self.entries[i].stamp = self.clock;
            self.hits += 1;
            return true;
        }
        self.misses += 1;
        let victim = set
            .clone()
            .find(|&i| !self.entries[i].valid)
            .unwrap_or_else(|| {
                set.min_by_key(|&i| self.entries[i].stamp)
                    .expect("ways >= 1")
            });
        self.entries[victim] = Entry {
            valid: true,
            page,
            stamp: self.clock,
        };
        self.write_counts[victim] += 1;
        false
    }

    pub fn entries(&self) -> usize {
        self.entries.len()
    }

    pub fn write_counts(&self) -> &[u64] {
        &self.write_counts
    }

    pub fn static_entries(&self) -> usize {
        self.write_counts.iter().filter(|&&w| is_static(w)).count()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lru_within_set() {
        let mut t = Tlb::new(
            "t",
            TlbGeometry {
                entries: 8,
                ways: 2,
            },
        )
        .unwrap();
        // pages 0, 4, 8 share set 0
        assert!(!t.access(0));
        assert!(!t.access(4));
        assert!(t.access(0));
        assert!(!t.access(8)); // evicts 4
        assert!(t.access(0));
        assert!(!t.access(4));
        // the entry holding page 0 was written once, so it is still static
        assert_eq!(t.write_counts()[..2], [1, 3]);
        assert_eq!(t.static_entries(), 7);
    }

    #[test]
    fn untouched_is_static() {
        let t = Tlb::new(
            "t",
            TlbGeometry {
                entries: 64,
                ways: 4,
            },
        )
        .unwrap();
        assert_eq!(t.static_entries(), 64);
        assert!(Tlb::new(
            "t",
            TlbGeometry {
                entries: 6,
                ways: 4
            }
        )
        .is_err());
    }
}
