use std::collections::{HashSet, VecDeque};

/// Mean number of requests issued per iteration by a multi-banked logger fed
/// through an `queue_size`-entry request queue.
///
/// Each iteration scans the queue front to back and issues the first request
/// seen for every idle bank (`bank = key % n_banks`). Queued requests for a
/// key issued in the same iteration are merged into that request, since they
/// update the same tracker entry. Issued and merged entries leave the queue,
/// which is then refilled from `keys`. The run stops after `iterations`
/// iterations or when the queue drains.
///
/// Without merging, a Zipf stream parks its hottest key's bank behind a
/// growing backlog and the queue degenerates to roughly one bank's worth of
/// work per iteration.
pub fn bank_throughput_sim<I>(keys: I, n_banks: usize, queue_size: usize, iterations: usize) -> f64
where
    I: IntoIterator<Item = u64>,
{
    assert!(
        n_banks >= 1 && queue_size >= 1,
        "banks and queue size must be >= 1"
    );
    let mut stream = keys.into_iter();
    let mut queue: VecDeque<u64> = stream.by_ref().take(queue_size).collect();
    let mut busy = vec![false; n_banks];
    let mut issued_keys: HashSet<u64> = HashSet::new();
    let mut issued_total = 0u64;
    let mut ran = 0u64;

    for _ in 0..iterations {
        if queue.is_empty() {
            break;
        }
        busy.iter_mut().for_each(|b| *b = false);
        issued_keys.clear();
        let mut issued = 0u64;
        queue.retain(|&key| {
            if issued_keys.contains(&key) {
                return false;
            }
            let bank = (key % n_banks as u64) as usize;
            if busy[bank] {
                true
            } else {
                busy[bank] = true;
                issued_keys.insert(key);
                issued += 1;
                false
            }
        });
        issued_total += issued;
        ran += 1;
        let missing = queue_size - queue.len();
        queue.extend(stream.by_ref().take(missing));
    }

    if ran == 0 {
        0.0
    } else {
        issued_total as f64 / ran as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_bank_issues_one() {
        let keys = (0..10_000u64).map(|k| k * 7919);
        assert_eq!(bank_throughput_sim(keys, 1, 64, 100), 1.0);
    }

    #[test]
    fn single_entry_queue_issues_one() {
        let keys = 0..10_000u64;
        assert_eq!(bank_throughput_sim(keys, 64, 1, 100), 1.0);
    }

    #[test]
    fn distinct_round_robin_keys_fill_every_bank() {
        let keys = 0..100_000u64;
        assert_eq!(bank_throughput_sim(keys, 8, 64, 100), 8.0);
    }

    #[test]
    fn duplicate_keys_merge() {
        // One key repeated: every iteration drains the whole queue in one issue.
        let keys = std::iter::repeat_n(5u64, 1000);
        assert_eq!(bank_throughput_sim(keys, 4, 10, 10), 1.0);
    }
}
