use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::util::derive_rng;
use crate::{Error, Result};

const FOLD_STREAM: u64 = 0xF01D;

/// Record-level fold assignment.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub seed: u64,
    pub folds: Vec<Vec<String>>,
}

impl FoldPlan {
    pub fn k(&self) -> usize {
        self.folds.len()
    }

    /// Records outside fold `k`.
    pub fn train_ids(&self, k: usize) -> Vec<String> {
        self.folds
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != k)
            .flat_map(|(_, f)| f.iter().cloned())
            .collect()
    }

    /// Checks that the folds partition the given record set.
    pub fn check_partition<'a>(&self, ids: impl IntoIterator<Item = &'a str>) -> Result<()> {
        let expected: BTreeSet<&str> = ids.into_iter().collect();
        let mut seen = BTreeSet::new();
        for id in self.folds.iter().flatten() {
            if !seen.insert(id.as_str()) {
                return Err(Error::Leakage(format!("record {id} assigned to more than one fold")));
            }
        }
        if seen != expected {
            return Err(Error::Leakage("folds do not partition the record set".into()));
        }
        Ok(())
    }
}

/// Grouped K-fold over records. Records are ordered by descending segment
/// count (seeded shuffle within equal counts) and dealt round-robin, so
/// fold sizes differ by at most one record.
pub fn group_kfold(segment_counts: &BTreeMap<String, usize>, k: usize, seed: u64) -> Result<FoldPlan> {
    if k < 2 {
        return Err(Error::Config(format!("need at least 2 folds, got {k}")));
    }
    if segment_counts.len() < k {
        return Err(Error::Config(format!(
            "{k} folds requested for {} records",
            segment_counts.len()
        )));
    }
    let mut rng = derive_rng(seed, FOLD_STREAM);
    let mut by_count: BTreeMap<std::cmp::Reverse<usize>, Vec<&String>> = BTreeMap::new();
    for (id, &c) in segment_counts {
        by_count.entry(std::cmp::Reverse(c)).or_default().push(id);
    }
    let mut folds = vec![Vec::new(); k];
    let mut slot = 0;
    for (_, mut ids) in by_count {
        ids.shuffle(&mut rng);
        for id in ids {
            folds[slot % k].push(id.clone());
            slot += 1;
        }
    }
    Ok(FoldPlan { seed, folds })
}
