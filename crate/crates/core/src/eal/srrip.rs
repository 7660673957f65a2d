use serde::{Deserialize, Serialize};

use super::{EalError, FeistelKeys, HotSet};
use crate::seed;
use crate::trace::{SparseAccess, TableSpec};

const ROW_BITS: u32 = 48;
const ROW_MASK: u64 = (1 << ROW_BITS) - 1;

/// Packs an access as `(table_id << 48) | row_index`.
pub fn pack_key(access: SparseAccess) -> Result<u64, EalError> {
    if access.table_id >= 1 << 16 || access.row_index > ROW_MASK {
        return Err(EalError::PackingRange {
            table: access.table_id,
            row: access.row_index,
        });
    }
    Ok(((access.table_id as u64) << ROW_BITS) | access.row_index)
}

pub fn unpack_key(key: u64) -> SparseAccess {
    SparseAccess::new((key >> ROW_BITS) as u32, key & ROW_MASK)
}

/// Randomized logger key of an access.
pub fn key_of(access: SparseAccess, keys: &FeistelKeys) -> Result<u64, EalError> {
    pack_key(access).map(|k| keys.permute(k))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EalConfig {
    /// Total tracker entries across all sets.
    pub num_blocks: usize,
    pub ways: usize,
    pub rrpv_bits: u8,
    /// Insertion RRPV; `None` means `max_rrpv - 1`.
    pub insertion_rrpv: Option<u8>,
    pub banks: usize,
    pub queue_size: usize,
    pub feistel_rounds: usize,
    pub seed: u64,
}

impl Default for EalConfig {
    fn default() -> Self {
        EalConfig {
            num_blocks: 2_097_152,
            ways: 4,
            rrpv_bits: 2,
            insertion_rrpv: None,
            banks: 64,
            queue_size: 512,
            feistel_rounds: 4,
            seed: 0,
        }
    }
}

impl EalConfig {
    pub fn max_rrpv(&self) -> u8 {
        ((1u16 << self.rrpv_bits) - 1) as u8
    }

    pub fn insertion_rrpv(&self) -> u8 {
        self.insertion_rrpv
            .unwrap_or_else(|| self.max_rrpv().saturating_sub(1))
    }

    pub fn num_sets(&self) -> usize {
        self.num_blocks / self.ways
    }

    /// Round keys of the randomizer for this config's seed.
    pub fn feistel_keys(&self) -> FeistelKeys {
        FeistelKeys::from_seed(seed::derive(self.seed, seed::FEISTEL), self.feistel_rounds)
    }

    pub fn validate(&self) -> Result<(), EalError> {
        let bad = |m: String| Err(EalError::InvalidConfig(m));
        if self.ways == 0 || self.num_blocks == 0 {
            return bad("num_blocks and ways must be >= 1".into());
        }
        if !self.num_blocks.is_multiple_of(self.ways) {
            return bad(format!(
                "num_blocks {} not divisible by ways {}",
                self.num_blocks, self.ways
            ));
        }
        if !self.num_sets().is_power_of_two() {
            return bad(format!(
                "set count {} is not a power of two",
                self.num_sets()
            ));
        }
        if !(1..=7).contains(&self.rrpv_bits) {
            return bad(format!("rrpv_bits {} outside 1..=7", self.rrpv_bits));
        }
        if self.insertion_rrpv() > self.max_rrpv() {
            return bad(format!(
                "insertion_rrpv {} above max_rrpv {}",
                self.insertion_rrpv(),
                self.max_rrpv()
            ));
        }
        if self.banks == 0 || self.queue_size == 0 {
            return bad("banks and queue_size must be >= 1".into());
        }
        if self.feistel_rounds == 0 {
            return bad("feistel_rounds must be >= 1".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct EalEntry {
    pub tag: u64,
    pub rrpv: u8,
    pub valid: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AccessOutcome {
    Hit,
    MissInserted,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AccessResult {
    pub outcome: AccessOutcome,
    /// Tag of the evicted entry, if the miss replaced a valid entry.
    pub victim: Option<u64>,
    /// Victim-search scans performed (0 for hits and fills of empty ways).
    pub scans: u32,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct EalStats {
    pub accesses: u64,
    pub hits: u64,
    pub evictions: u64,
}

/// How a frozen logger re-enters learning.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decay {
    /// Keep members, reset every RRPV to the insertion value.
    ResetRrpv,
    /// Invalidate everything.
    Clear,
}

/// Set-associative SRRIP tracker.
///
/// The low `log2(sets)` bits of a permuted key select the set and the
/// remaining bits are stored whole as the tag, so every entry maps back to
/// exactly one `(table, row)`.
#[derive(Debug, Clone, PartialEq)]
pub struct EalState {
    config: EalConfig,
    keys: FeistelKeys,
    set_bits: u32,
    max_rrpv: u8,
    insertion_rrpv: u8,
    entries: Vec<EalEntry>,
    frozen: bool,
    stats: EalStats,
}

impl EalState {
    pub fn new(config: EalConfig) -> Result<Self, EalError> {
        config.validate()?;
        let sets = config.num_sets();
        Ok(EalState {
            keys: config.feistel_keys(),
            set_bits: sets.trailing_zeros(),
            max_rrpv: config.max_rrpv(),
            insertion_rrpv: config.insertion_rrpv(),
            entries: vec![EalEntry::default(); config.num_blocks],
            frozen: false,
            stats: EalStats::default(),
            config,
        })
    }

    pub fn config(&self) -> &EalConfig {
        &self.config
    }

    pub fn keys(&self) -> &FeistelKeys {
        &self.keys
    }

    pub fn stats(&self) -> EalStats {
        self.stats
    }

    pub fn is_frozen(&self) -> bool {
        self.frozen
    }

    pub fn num_sets(&self) -> usize {
        1 << self.set_bits
    }

    /// Splits a permuted key into `(set index, tag)`.
    pub fn locate(&self, key: u64) -> (usize, u64) {
        let set = (key & ((1u64 << self.set_bits) - 1)) as usize;
        let tag = if self.set_bits == 0 {
            key
        } else {
            key >> self.set_bits
        };
        (set, tag)
    }

    pub fn set_entries(&self, set: usize) -> &[EalEntry] {
        let w = self.config.ways;
        &self.entries[set * w..(set + 1) * w]
    }

    pub fn valid_entries(&self) -> usize {
        self.entries.iter().filter(|e| e.valid).count()
    }

    /// Records one access by permuted key.
    pub fn access(&mut self, key: u64) -> Result<AccessResult, EalError> {
        if self.frozen {
            return Err(EalError::Frozen);
        }
        let (set, tag) = self.locate(key);
        let ways = self.config.ways;
        let (max, ins) = (self.max_rrpv, self.insertion_rrpv);
        let slots = &mut self.entries[set * ways..(set + 1) * ways];
        self.stats.accesses += 1;

        if let Some(e) = slots.iter_mut().find(|e| e.valid && e.tag == tag) {
            e.rrpv = 0;
            self.stats.hits += 1;
            return Ok(AccessResult {
                outcome: AccessOutcome::Hit,
                victim: None,
                scans: 0,
            });
        }

        let fresh = EalEntry {
            tag,
            rrpv: ins,
            valid: true,
        };
        if let Some(e) = slots.iter_mut().find(|e| !e.valid) {
            *e = fresh;
            return Ok(AccessResult {
                outcome: AccessOutcome::MissInserted,
                victim: None,
                scans: 0,
            });
        }

        let mut scans = 0;
        loop {
            scans += 1;
            if let Some(e) = slots.iter_mut().find(|e| e.rrpv == max) {
                let victim = e.tag;
                *e = fresh;
                self.stats.evictions += 1;
                debug_assert!(scans <= max as u32 + 1);
                return Ok(AccessResult {
                    outcome: AccessOutcome::MissInserted,
                    victim: Some(victim),
                    scans,
                });
            }
            for e in slots.iter_mut() {
                e.rrpv += 1;
            }
        }
    }

    /// Records one `(table, row)` access through the randomizer.
    pub fn observe(&mut self, access: SparseAccess) -> Result<AccessResult, EalError> {
        let key = key_of(access, &self.keys)?;
        self.access(key)
    }

    /// Pure membership query by permuted key.
    pub fn contains(&self, key: u64) -> bool {
        let (set, tag) = self.locate(key);
        self.set_entries(set)
            .iter()
            .any(|e| e.valid && e.tag == tag)
    }

    pub fn contains_access(&self, access: SparseAccess) -> bool {
        key_of(access, &self.keys).is_ok_and(|k| self.contains(k))
    }

    /// Makes the tracker read-only and returns its members.
    ///
    /// The hot set's byte capacity is `num_blocks` rows of the widest table.
    pub fn freeze(&mut self, tables: &[TableSpec]) -> HotSet {
        if self.stats.accesses == 0 {
            log::warn!("freezing an access logger that has seen no accesses");
        }
        self.frozen = true;
        let ways = self.config.ways;
        let members = self
            .entries
            .iter()
            .enumerate()
            .filter(|(_, e)| e.valid)
            .map(|(i, e)| {
                let set = (i / ways) as u64;
                let key = if self.set_bits == 0 {
                    e.tag
                } else {
                    (e.tag << self.set_bits) | set
                };
                unpack_key(self.keys.invert(key))
            });
        let row_bytes = tables.iter().map(|t| t.row_bytes()).max().unwrap_or(0);
        HotSet::new(members, self.config.num_blocks as u64 * row_bytes)
    }

    /// Re-opens a frozen tracker for another learning window.
    pub fn unfreeze_for_recalibration(&mut self, decay: Decay) {
        self.frozen = false;
        for e in &mut self.entries {
            match decay {
                Decay::ResetRrpv if e.valid => e.rrpv = self.insertion_rrpv,
                Decay::ResetRrpv => {}
                Decay::Clear => *e = EalEntry::default(),
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(num_blocks: usize) -> EalState {
        EalState::new(EalConfig {
            num_blocks,
            ..EalConfig::default()
        })
        .unwrap()
    }

    /// Keys that all land in set 0 of a 2-set logger.
    fn set0_key(i: u64) -> u64 {
        i << 1
    }

    #[test]
    fn first_access_inserts_at_distant_rrpv() {
        let mut eal = small(8);
        let r = eal.access(set0_key(1)).unwrap();
        assert_eq!(r.outcome, AccessOutcome::MissInserted);
        assert_eq!(eal.set_entries(0)[0].rrpv, 2);
        let r = eal.access(set0_key(1)).unwrap();
        assert_eq!(r.outcome, AccessOutcome::Hit);
        assert_eq!(eal.set_entries(0)[0].rrpv, 0);
    }

    #[test]
    fn full_set_ages_then_evicts_first_slot() {
        let mut eal = small(8);
        for i in 0..4 {
            eal.access(set0_key(i)).unwrap();
        }
        let r = eal.access(set0_key(4)).unwrap();
        assert_eq!(r.victim, Some(0));
        assert_eq!(r.scans, 2);
        let set: Vec<_> = eal.set_entries(0).iter().map(|e| (e.tag, e.rrpv)).collect();
        assert_eq!(set, vec![(4, 2), (1, 3), (2, 3), (3, 3)]);
        assert_eq!(eal.stats().evictions, 1);
    }

    #[test]
    fn aging_bound_when_all_recently_hit() {
        let mut eal = small(8);
        for i in 0..4 {
            eal.access(set0_key(i)).unwrap();
            eal.access(set0_key(i)).unwrap();
        }
        let r = eal.access(set0_key(9)).unwrap();
        assert_eq!(r.scans, 4);
    }

    #[test]
    fn frozen_rejects_access() {
        let mut eal = small(8);
        eal.access(1).unwrap();
        eal.freeze(&[]);
        assert_eq!(eal.access(1), Err(EalError::Frozen));
        assert!(eal.contains(1));
    }

    #[test]
    fn freeze_recovers_accesses() {
        let mut eal = small(64);
        let accesses = [
            SparseAccess::new(0, 5),
            SparseAccess::new(3, 77),
            SparseAccess::new(1, 1 << 40),
        ];
        for a in accesses {
            eal.observe(a).unwrap();
        }
        let tables = [TableSpec::new(0, 10, 64, 1)];
        let hot = eal.freeze(&tables);
        assert_eq!(hot.len(), 3);
        for a in accesses {
            assert!(hot.contains(&a));
        }
        assert_eq!(eal.freeze(&tables), hot);
    }

    #[test]
    fn default_capacity_is_512_mib_at_dim_64() {
        let mut eal = EalState::new(EalConfig::default()).unwrap();
        eal.observe(SparseAccess::new(0, 1)).unwrap();
        let hot = eal.freeze(&[TableSpec::new(0, 10, 64, 1)]);
        assert_eq!(hot.capacity_bytes(), 512 * 1024 * 1024);
    }

    #[test]
    fn empty_freeze_is_empty() {
        let mut eal = small(8);
        assert!(eal.freeze(&[]).is_empty());
    }

    #[test]
    fn recalibration_modes() {
        let mut eal = small(8);
        for i in 0..3 {
            eal.access(set0_key(i)).unwrap();
            eal.access(set0_key(i)).unwrap();
        }
        let before = eal.freeze(&[]);
        eal.unfreeze_for_recalibration(Decay::ResetRrpv);
        assert!(!eal.is_frozen());
        assert!(eal
            .set_entries(0)
            .iter()
            .filter(|e| e.valid)
            .all(|e| e.rrpv == 2));
        assert_eq!(eal.freeze(&[]), before);
        eal.unfreeze_for_recalibration(Decay::Clear);
        assert!(eal.freeze(&[]).is_empty());
    }

    #[test]
    fn packing_range() {
        let keys = FeistelKeys::from_seed(0, 4);
        assert!(key_of(SparseAccess::new(1 << 16, 0), &keys).is_err());
        assert!(key_of(SparseAccess::new(0, 1 << 48), &keys).is_err());
        assert!(key_of(SparseAccess::new(65_535, (1 << 48) - 1), &keys).is_ok());
        let a = SparseAccess::new(3, 9);
        assert_eq!(key_of(a, &keys), key_of(a, &keys));
    }

    #[test]
    fn config_validation() {
        let bad = |c: EalConfig| EalState::new(c).is_err();
        assert!(bad(EalConfig {
            num_blocks: 10,
            ..Default::default()
        }));
        assert!(bad(EalConfig {
            num_blocks: 12,
            ..Default::default()
        }));
        assert!(bad(EalConfig {
            insertion_rrpv: Some(4),
            ..Default::default()
        }));
        assert!(bad(EalConfig {
            banks: 0,
            ..Default::default()
        }));
        assert!(!bad(EalConfig {
            num_blocks: 4,
            ..Default::default()
        }));
    }
}
