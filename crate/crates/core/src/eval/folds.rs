//! Stratified k-fold partitioning.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::rng::{derive_seed, rng};

/// Record indices of each of `k` folds.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldSplit {
    pub folds: Vec<Vec<usize>>,
}

impl FoldSplit {
    pub fn k(&self) -> usize {
        self.folds.len()
    }

    /// `(train, test)` indices for fold `f`, each sorted.
    pub fn train_test(&self, f: usize) -> (Vec<usize>, Vec<usize>) {
        let mut train: Vec<usize> = self
            .folds
            .iter()
            .enumerate()
            .filter(|(g, _)| *g != f)
            .flat_map(|(_, v)| v.iter().copied())
            .collect();
        train.sort_unstable();
        (train, self.folds[f].clone())
    }
}

/// Shuffle each device's records (seeded per device) and deal them
/// round-robin into `k` folds. With `k = 1` the single fold is everything.
pub fn kfold_split(device_ids: &[u16], k: usize, seed: u64) -> Result<FoldSplit> {
    if k == 0 {
        return Err(Error::validation("fold count must be positive"));
    }
    let mut by_device: BTreeMap<u16, Vec<usize>> = BTreeMap::new();
    for (i, &d) in device_ids.iter().enumerate() {
        by_device.entry(d).or_default().push(i);
    }
    let mut folds = vec![Vec::new(); k];
    for (dev, mut idx) in by_device {
        if idx.len() < k {
            return Err(Error::validation(format!(
                "device {dev} has {} records, fewer than the {k} folds",
                idx.len()
            )));
        }
        idx.shuffle(&mut rng(derive_seed(seed, &[dev as u64])));
        for (j, i) in idx.into_iter().enumerate() {
            folds[j % k].push(i);
        }
    }
    for f in &mut folds {
        f.sort_unstable();
    }
    Ok(FoldSplit { folds })
}
