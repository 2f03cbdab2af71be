//! Hold-out and k-fold split generation, and the cross-validation driver.
//!
//! Every split shuffles with a ChaCha8 stream seeded from the caller's seed,
//! then deals indices round-robin into folds.

use std::collections::BTreeMap;

use indexmap::IndexMap;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::fold::{FoldAssignment, SplitScheme};
use crate::metrics::{MetricSpec, PredictionSet};
use crate::report::{
    DataFingerprint, DiagnosticFlag, EvaluationReport, FlagCode, MetricReport, Provenance,
    Severity, Warning, AGGREGATION_CONVENTION,
};

pub const DEFAULT_K: usize = 5;

pub(crate) fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Groups sample indices by label, in ascending label order.
fn groups<L: Ord>(labels: &[L]) -> Vec<Vec<usize>> {
    let mut by_label: BTreeMap<&L, Vec<usize>> = BTreeMap::new();
    for (i, l) in labels.iter().enumerate() {
        by_label.entry(l).or_default().push(i);
    }
    by_label.into_values().collect()
}

/// Splits `n` samples into train (fold 0) and test (fold 1).
///
/// The test size is `round(n · test_ratio)` clamped so both parts are
/// non-empty. With `stratify_labels`, each class contributes its
/// proportional share (largest-remainder rounding).
pub fn holdout_split<L: Ord>(
    n: usize,
    test_ratio: f64,
    seed: u64,
    stratify_labels: Option<&[L]>,
) -> Result<FoldAssignment> {
    if !(test_ratio > 0.0 && test_ratio < 1.0) {
        return Err(Error::RatioOutOfRange(test_ratio));
    }
    if n < 2 {
        return Err(Error::TooFewSamples { needed: 2, found: n });
    }
    let n_test = ((n as f64 * test_ratio).round() as usize).clamp(1, n - 1);
    let mut rng = rng(seed);
    let mut fold_of = vec![0; n];

    let classes = match stratify_labels {
        Some(labels) => {
            if labels.len() != n {
                return Err(Error::LengthMismatch {
                    what: "stratify labels",
                    expected: n,
                    found: labels.len(),
                });
            }
            groups(labels)
        }
        None => vec![(0..n).collect()],
    };

    // Largest-remainder allocation of n_test across classes.
    let quotas: Vec<f64> = classes
        .iter()
        .map(|g| g.len() as f64 * n_test as f64 / n as f64)
        .collect();
    let mut alloc: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
    let mut remaining = n_test - alloc.iter().sum::<usize>();
    let mut order: Vec<usize> = (0..classes.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = quotas[a] - quotas[a].floor();
        let rb = quotas[b] - quotas[b].floor();
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    for &c in order.iter().cycle() {
        if remaining == 0 {
            break;
        }
        if alloc[c] < classes[c].len() {
            alloc[c] += 1;
            remaining -= 1;
        }
    }

    for (mut members, take) in classes.into_iter().zip(alloc) {
        members.shuffle(&mut rng);
        for &i in &members[..take] {
            fold_of[i] = 1;
        }
    }
    Ok(FoldAssignment {
        n,
        k: 2,
        fold_of,
        seed,
        stratified: stratify_labels.is_some(),
        scheme: SplitScheme::Holdout,
        warnings: Vec::new(),
    })
}

/// Seeded shuffle of `0..n` dealt round-robin into `k` folds.
pub fn kfold(n: usize, k: usize, seed: u64) -> Result<FoldAssignment> {
    if k < 2 || k > n {
        return Err(Error::KOutOfRange { k, n });
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng(seed));
    let mut fold_of = vec![0; n];
    for (pos, &i) in order.iter().enumerate() {
        fold_of[i] = pos % k;
    }
    Ok(FoldAssignment {
        n,
        k,
        fold_of,
        seed,
        stratified: false,
        scheme: SplitScheme::KFold,
        warnings: Vec::new(),
    })
}

/// Per-class seeded shuffle dealt round-robin into `k` folds.
///
/// Dealing continues across classes from the fold where the previous class
/// stopped, so overall fold sizes also stay within one of each other.
pub fn stratified_kfold<L: Ord>(labels: &[L], k: usize, seed: u64) -> Result<FoldAssignment> {
    let n = labels.len();
    if k < 2 || k > n {
        return Err(Error::KOutOfRange { k, n });
    }
    let mut rng = rng(seed);
    let mut fold_of = vec![0; n];
    let mut warnings = Vec::new();
    let mut next = 0;
    for mut members in groups(labels) {
        if members.len() < k {
            warnings.push(Warning::SparseClass);
        }
        members.shuffle(&mut rng);
        for i in members {
            fold_of[i] = next;
            next = (next + 1) % k;
        }
    }
    warnings.dedup();
    Ok(FoldAssignment {
        n,
        k,
        fold_of,
        seed,
        stratified: true,
        scheme: SplitScheme::KFold,
        warnings,
    })
}

/// Regime summary of all evaluated rows.
pub fn fingerprint(folds: &[PredictionSet]) -> DataFingerprint {
    let rows = folds.iter().map(PredictionSet::len).sum();
    match &folds[0] {
        PredictionSet::Classification(first) => {
            let labels = first.labels();
            let mut counts = vec![0usize; labels.len()];
            for f in folds {
                if let PredictionSet::Classification(d) = f {
                    for &t in d.y_true() {
                        counts[t] += 1;
                    }
                }
            }
            let prevalences: IndexMap<String, f64> = labels
                .classes()
                .iter()
                .zip(&counts)
                .map(|(c, &m)| (c.clone(), m as f64 / rows as f64))
                .collect();
            DataFingerprint::Classification {
                rows,
                positive_class: labels.positive_index().map(|i| labels.name(i).to_string()),
                prevalences,
            }
        }
        PredictionSet::Regression(_) => {
            let ys: Vec<f64> = folds
                .iter()
                .flat_map(|f| match f {
                    PredictionSet::Regression(d) => d.y_true().to_vec(),
                    PredictionSet::Classification(_) => Vec::new(),
                })
                .collect();
            let m = ys.len() as f64;
            let mean = ys.iter().sum::<f64>() / m;
            let std = if ys.len() > 1 {
                (ys.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / (m - 1.0)).sqrt()
            } else {
                0.0
            };
            DataFingerprint::Regression {
                rows,
                target_mean: mean,
                target_std: std,
                target_min: ys.iter().copied().fold(f64::INFINITY, f64::min),
                target_max: ys.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            }
        }
    }
}

/// Computes each metric on every fold and aggregates across folds.
///
/// Degeneracy warnings from any fold are kept on the metric and surfaced as
/// report flags.
pub fn cross_validate(
    folds: &[PredictionSet],
    suite: &[MetricSpec],
    seed: u64,
) -> Result<EvaluationReport> {
    let first = folds.first().ok_or(Error::EmptyFoldSet)?;
    let task = first.task();
    if folds.iter().any(|f| f.task() != task) {
        return Err(Error::MixedTaskTypes);
    }
    let mut metrics = IndexMap::new();
    let mut flags = Vec::new();
    for spec in suite {
        let name = spec.to_string();
        let mut values = Vec::with_capacity(folds.len());
        let mut warnings = Vec::new();
        let mut affected: BTreeMap<Warning, usize> = BTreeMap::new();
        for fold in folds {
            let v = spec.evaluate(fold)?;
            for &w in &v.warnings {
                *affected.entry(w).or_default() += 1;
            }
            warnings.extend(v.warnings);
            values.push(v.value);
        }
        for (w, count) in affected {
            if let Some(code) = w.flag_code() {
                flags.push(
                    DiagnosticFlag::new(
                        code,
                        Severity::Warn,
                        format!("{name}: {w} in {count} of {} folds; value set to 0", folds.len()),
                    )
                    .with("folds_affected", count as f64),
                );
            }
        }
        metrics.insert(name.clone(), MetricReport::from_folds(name, values, warnings)?);
    }
    if folds.len() == 1 {
        flags.push(DiagnosticFlag::new(
            FlagCode::SingleFold,
            Severity::Info,
            "single evaluation fold; dispersion is not estimable and std is reported as 0",
        ));
    }
    Ok(EvaluationReport {
        task,
        provenance: Provenance {
            seed,
            k: folds.len(),
            aggregation: AGGREGATION_CONVENTION.to_string(),
            data: fingerprint(folds),
            failed_metrics: Vec::new(),
        },
        metrics,
        flags,
    })
}
