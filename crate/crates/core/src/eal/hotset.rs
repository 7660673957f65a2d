use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::trace::{SparseAccess, TableSpec};

/// Frozen set of hot `(table, row)` indices.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct HotSet {
    members: HashSet<SparseAccess>,
    capacity_bytes: u64,
}

/// On-disk form: `{"capacity_bytes":..,"members":[[table,row],...]}`,
/// members sorted ascending.
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct HotSetFile {
    capacity_bytes: u64,
    members: Vec<(u32, u64)>,
}

impl HotSet {
    pub fn new(members: impl IntoIterator<Item = SparseAccess>, capacity_bytes: u64) -> Self {
        HotSet {
            members: members.into_iter().collect(),
            capacity_bytes,
        }
    }

    pub fn contains(&self, access: &SparseAccess) -> bool {
        self.members.contains(access)
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn capacity_bytes(&self) -> u64 {
        self.capacity_bytes
    }

    /// Bytes the members occupy, each at its own table's row size.
    /// Members of unknown tables count zero.
    pub fn bytes_used(&self, tables: &[TableSpec]) -> u64 {
        let row_bytes: HashMap<u32, u64> =
            tables.iter().map(|t| (t.table_id, t.row_bytes())).collect();
        self.members
            .iter()
            .map(|a| row_bytes.get(&a.table_id).copied().unwrap_or(0))
            .sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = &SparseAccess> {
        self.members.iter()
    }

    pub fn sorted(&self) -> Vec<SparseAccess> {
        let mut v: Vec<_> = self.members.iter().copied().collect();
        v.sort_unstable();
        v
    }

    pub fn intersection_len(&self, other: &HotSet) -> usize {
        let (small, large) = if self.len() <= other.len() {
            (self, other)
        } else {
            (other, self)
        };
        small.members.iter().filter(|a| large.contains(a)).count()
    }

    pub fn to_json(&self) -> String {
        let file = HotSetFile {
            capacity_bytes: self.capacity_bytes,
            members: self
                .sorted()
                .into_iter()
                .map(|a| (a.table_id, a.row_index))
                .collect(),
        };
        serde_json::to_string(&file).expect("hot set serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        let file: HotSetFile = serde_json::from_str(text)?;
        Ok(HotSet::new(
            file.members
                .into_iter()
                .map(|(t, r)| SparseAccess::new(t, r)),
            file.capacity_bytes,
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_is_sorted_and_round_trips() {
        let hot = HotSet::new(
            [
                SparseAccess::new(1, 2),
                SparseAccess::new(0, 9),
                SparseAccess::new(0, 3),
            ],
            128,
        );
        let json = hot.to_json();
        assert_eq!(
            json,
            r#"{"capacity_bytes":128,"members":[[0,3],[0,9],[1,2]]}"#
        );
        assert_eq!(HotSet::from_json(&json).unwrap(), hot);
    }

    #[test]
    fn bytes_per_owning_table() {
        let hot = HotSet::new([SparseAccess::new(0, 1), SparseAccess::new(1, 1)], 0);
        let tables = [TableSpec::new(0, 4, 16, 1), TableSpec::new(1, 4, 64, 1)];
        assert_eq!(hot.bytes_used(&tables), 64 + 256);
    }
}
