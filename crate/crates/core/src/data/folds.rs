use std::collections::BTreeMap;

use super::DataError;
use crate::rng::SplitMix64;

/// Splits sample indices into `k` stratified folds.
///
/// Each class (ascending label) is shuffled with a generator seeded by
/// `seed`, then dealt round-robin; the starting fold carries over from one
/// class to the next so overall fold sizes also differ by at most one.
/// Indices inside each fold are sorted.
pub fn stratified_kfold(labels: &[u32], k: usize, seed: u64) -> Result<Vec<Vec<usize>>, DataError> {
    if k < 2 {
        return Err(DataError::FoldCount(k));
    }
    let mut by_class: BTreeMap<u32, Vec<usize>> = BTreeMap::new();
    for (i, &l) in labels.iter().enumerate() {
        by_class.entry(l).or_default().push(i);
    }
    if let Some((&label, members)) = by_class.iter().find(|(_, m)| m.len() < k) {
        return Err(DataError::TooFewForFolds {
            label,
            count: members.len(),
            k,
        });
    }
    let mut rng = SplitMix64::new(seed);
    let mut folds = vec![Vec::new(); k];
    let mut offset = 0;
    for members in by_class.values_mut() {
        rng.shuffle(members);
        for (j, &idx) in members.iter().enumerate() {
            folds[(offset + j) % k].push(idx);
        }
        offset = (offset + members.len()) % k;
    }
    for f in &mut folds {
        f.sort_unstable();
    }
    Ok(folds)
}
