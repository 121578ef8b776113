use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::rng;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fold {
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
    pub test: Vec<usize>,
}

/// Stratified k-fold split. Fold `i` tests on chunk `i`, validates on chunk
/// `i + 1 (mod k)` and trains on the remaining `k - 2` chunks.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub k: usize,
    pub seed: u64,
    pub folds: Vec<Fold>,
}

impl FoldPlan {
    pub fn fold(&self, i: usize) -> Result<&Fold> {
        self.folds
            .get(i)
            .ok_or_else(|| Error::Invalid(format!("fold {i} out of range for a {}-fold plan", self.k)))
    }
}

/// Shuffles each class (members in original index order, then a seeded
/// shuffle) and deals the members round-robin over `k` chunks, carrying the
/// dealing position from one class to the next.
pub fn stratified_kfold(labels: &[usize], k: usize, seed: u64) -> Result<FoldPlan> {
    if k < 3 {
        return Err(Error::Config(format!("need at least 3 folds for train/validation/test, got {k}")));
    }
    let classes = labels.iter().map(|&l| l + 1).max().unwrap_or(0);
    let mut by_class = vec![Vec::new(); classes];
    for (i, &l) in labels.iter().enumerate() {
        by_class[l].push(i);
    }
    for (c, members) in by_class.iter().enumerate() {
        if !members.is_empty() && members.len() < k {
            return Err(Error::Invalid(format!(
                "class {c} has {} graphs, fewer than the {k} folds",
                members.len()
            )));
        }
    }

    let mut rng = rng(seed);
    let mut chunks = vec![Vec::new(); k];
    let mut position = 0;
    for members in &mut by_class {
        members.shuffle(&mut rng);
        for &idx in members.iter() {
            chunks[position % k].push(idx);
            position += 1;
        }
    }
    for chunk in &mut chunks {
        chunk.sort_unstable();
    }

    let folds = (0..k)
        .map(|i| {
            let val = (i + 1) % k;
            let mut train: Vec<usize> = (0..k)
                .filter(|&c| c != i && c != val)
                .flat_map(|c| chunks[c].iter().copied())
                .collect();
            train.sort_unstable();
            Fold {
                train,
                validation: chunks[val].clone(),
                test: chunks[i].clone(),
            }
        })
        .collect();
    Ok(FoldPlan { k, seed, folds })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn class_counts(idx: &[usize], labels: &[usize]) -> Vec<usize> {
        let mut c = vec![0; 2];
        for &i in idx {
            c[labels[i]] += 1;
        }
        c
    }

    #[test]
    fn balanced_classes_give_five_and_five() {
        let labels: Vec<usize> = (0..100).map(|i| i % 2).collect();
        let plan = stratified_kfold(&labels, 10, 3).unwrap();
        for f in &plan.folds {
            assert_eq!(class_counts(&f.test, &labels), vec![5, 5]);
            assert_eq!(f.train.len(), 80);
            assert_eq!(f.validation.len(), 10);
        }
    }

    #[test]
    fn sixty_forty_split_is_proportional() {
        let labels: Vec<usize> = (0..100).map(|i| usize::from(i >= 60)).collect();
        let plan = stratified_kfold(&labels, 10, 11).unwrap();
        for f in &plan.folds {
            assert_eq!(class_counts(&f.test, &labels), vec![6, 4]);
        }
    }

    #[test]
    fn same_seed_same_plan() {
        let labels: Vec<usize> = (0..57).map(|i| (i * 7) % 3).collect();
        let a = serde_json::to_string(&stratified_kfold(&labels, 10, 5).unwrap()).unwrap();
        let b = serde_json::to_string(&stratified_kfold(&labels, 10, 5).unwrap()).unwrap();
        assert_eq!(a, b);
        let c = serde_json::to_string(&stratified_kfold(&labels, 10, 6).unwrap()).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn small_class_is_named() {
        let mut labels = vec![0; 30];
        labels.extend([1; 4]);
        let err = stratified_kfold(&labels, 10, 0).unwrap_err().to_string();
        assert!(err.contains("class 1"), "{err}");
    }
}
