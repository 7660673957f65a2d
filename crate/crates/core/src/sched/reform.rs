use std::collections::BTreeMap;

use super::{classify_input, Popularity};
use crate::eal::HotSet;
use crate::trace::{MiniBatch, TrainingInput};

/// A working set after reformation. Popular batches run first.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassifiedWorkingSet {
    pub popular_batches: Vec<MiniBatch>,
    pub mixed_batches: Vec<MiniBatch>,
    /// `input_id -> (source batch id, class)`.
    pub provenance: BTreeMap<u64, (u64, Popularity)>,
}

impl ClassifiedWorkingSet {
    /// Batches in dispatch order.
    pub fn batches(&self) -> impl Iterator<Item = &MiniBatch> {
        self.popular_batches.iter().chain(&self.mixed_batches)
    }

    pub fn num_batches(&self) -> usize {
        self.popular_batches.len() + self.mixed_batches.len()
    }

    pub fn num_inputs(&self) -> usize {
        self.batches().map(|b| b.len()).sum()
    }

    pub fn popular_inputs(&self) -> usize {
        self.provenance
            .values()
            .filter(|(_, c)| *c == Popularity::Popular)
            .count()
    }
}

/// Regroups a working set into full popular batches followed by mixed
/// batches.
///
/// Popular inputs fill batches of `batch_size` in arrival order. Whatever is
/// left (non-popular inputs and the popular remainder that cannot fill a
/// batch) is packed, again in arrival order, into mixed batches of at most
/// `batch_size`. If no input is non-popular the remainder becomes a short
/// popular batch instead. New batch ids count up from the first source
/// batch's id.
pub fn reform(working_set: &[MiniBatch], hot: &HotSet, batch_size: usize) -> ClassifiedWorkingSet {
    let batch_size = batch_size.max(1);
    let mut provenance = BTreeMap::new();
    let mut popular: Vec<(usize, &TrainingInput)> = Vec::new();
    let mut non_popular: Vec<(usize, &TrainingInput)> = Vec::new();
    let mut position = 0;
    for b in working_set {
        for input in &b.inputs {
            let class = classify_input(input, hot);
            provenance.insert(input.input_id, (b.batch_id, class));
            match class {
                Popularity::Popular => popular.push((position, input)),
                Popularity::NonPopular => non_popular.push((position, input)),
            }
            position += 1;
        }
    }

    let mut next_id = working_set.first().map_or(0, |b| b.batch_id);
    let mut make = |inputs: Vec<TrainingInput>| {
        let b = MiniBatch {
            batch_id: next_id,
            inputs,
            nominal_size: batch_size,
        };
        next_id += 1;
        b
    };

    let full = if non_popular.is_empty() {
        popular.len()
    } else {
        popular.len() / batch_size * batch_size
    };
    let popular_batches: Vec<MiniBatch> = popular[..full]
        .chunks(batch_size)
        .map(|c| make(c.iter().map(|(_, i)| (*i).clone()).collect()))
        .collect();

    let mut rest: Vec<(usize, &TrainingInput)> = popular[full..].to_vec();
    rest.extend(non_popular);
    rest.sort_unstable_by_key(|(pos, _)| *pos);
    let mixed_batches = rest
        .chunks(batch_size)
        .map(|c| make(c.iter().map(|(_, i)| (*i).clone()).collect()))
        .collect();

    ClassifiedWorkingSet {
        popular_batches,
        mixed_batches,
        provenance,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trace::SparseAccess;

    /// Inputs with row 0 are popular, row 1 non-popular.
    fn working_set(pattern: &[bool], b: usize) -> Vec<MiniBatch> {
        let inputs: Vec<_> = pattern
            .iter()
            .enumerate()
            .map(|(i, &pop)| TrainingInput {
                input_id: i as u64,
                accesses: vec![SparseAccess::new(0, if pop { 0 } else { 1 })],
            })
            .collect();
        inputs
            .chunks(b)
            .enumerate()
            .map(|(i, c)| MiniBatch {
                batch_id: i as u64,
                inputs: c.to_vec(),
                nominal_size: b,
            })
            .collect()
    }

    fn hot() -> HotSet {
        HotSet::new([SparseAccess::new(0, 0)], 0)
    }

    fn ids(b: &MiniBatch) -> Vec<u64> {
        b.inputs.iter().map(|i| i.input_id).collect()
    }

    #[test]
    fn three_popular_one_mixed() {
        let mut pattern = vec![true; 16];
        for i in [1, 6, 11, 15] {
            pattern[i] = false;
        }
        let ws = reform(&working_set(&pattern, 4), &hot(), 4);
        assert_eq!(ws.popular_batches.len(), 3);
        assert_eq!(ws.mixed_batches.len(), 1);
        assert_eq!(ids(&ws.mixed_batches[0]), vec![1, 6, 11, 15]);
    }

    #[test]
    fn all_popular() {
        let ws = reform(&working_set(&[true; 16], 4), &hot(), 4);
        assert_eq!(ws.popular_batches.len(), 4);
        assert!(ws.mixed_batches.is_empty());
    }

    #[test]
    fn popular_remainder_joins_mixed() {
        // W=2, B=4: 5 popular, 3 non-popular.
        let pattern = [true, false, true, true, false, true, false, true];
        let ws = reform(&working_set(&pattern, 4), &hot(), 4);
        assert_eq!(ws.popular_batches.len(), 1);
        assert_eq!(ids(&ws.popular_batches[0]), vec![0, 2, 3, 5]);
        assert_eq!(ws.mixed_batches.len(), 1);
        assert_eq!(ids(&ws.mixed_batches[0]), vec![1, 4, 6, 7]);
        assert_eq!(ws.num_batches(), 2);
        let batch_ids: Vec<_> = ws.batches().map(|b| b.batch_id).collect();
        assert_eq!(batch_ids, vec![0, 1]);
    }

    #[test]
    fn short_all_popular_tail_stays_popular() {
        let ws = reform(&working_set(&[true; 6], 4), &hot(), 4);
        assert_eq!(ws.popular_batches.len(), 2);
        assert!(ws.mixed_batches.is_empty());
    }
}
