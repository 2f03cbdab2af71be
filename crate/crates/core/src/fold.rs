use serde::{Deserialize, Serialize};

use crate::report::Warning;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitScheme {
    /// `k` balanced test folds.
    KFold,
    /// Two parts: fold 0 is train, fold 1 is test. No balance requirement.
    Holdout,
}

/// Assignment of each sample index to exactly one test fold.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldAssignment {
    pub n: usize,
    pub k: usize,
    pub fold_of: Vec<usize>,
    pub seed: u64,
    pub stratified: bool,
    pub scheme: SplitScheme,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<Warning>,
}

impl FoldAssignment {
    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &f in &self.fold_of {
            sizes[f] += 1;
        }
        sizes
    }

    /// Sample indices held out in `fold`, ascending.
    pub fn test_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.n).filter(|&i| self.fold_of[i] == fold).collect()
    }

    /// Sample indices used for training when `fold` is held out, ascending.
    pub fn train_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.n).filter(|&i| self.fold_of[i] != fold).collect()
    }

    /// The `(train, test)` pairs to evaluate: every fold for k-fold, only the
    /// test part for a hold-out split.
    pub fn evaluation_folds(&self) -> Vec<(Vec<usize>, Vec<usize>)> {
        let folds: Vec<usize> = match self.scheme {
            SplitScheme::KFold => (0..self.k).collect(),
            SplitScheme::Holdout => vec![1],
        };
        folds
            .into_iter()
            .map(|f| (self.train_indices(f), self.test_indices(f)))
            .collect()
    }
}
