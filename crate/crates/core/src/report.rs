//! Metric summaries, diagnostic flags and the evaluation report.

use std::collections::BTreeMap;
use std::fmt;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Metric-level warning codes attached to a [`MetricReport`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Warning {
    SingleFold,
    PrecisionUndefined,
    RecallUndefined,
    FScoreUndefined,
    MccUndefined,
    /// A class with no support was left out of a macro average.
    ZeroSupportClass,
    /// MAPE dropped rows whose target was below the near-zero threshold.
    TargetsExcluded,
    SparseClass,
    /// Calibration bins were merged to reach the minimum bin size.
    BinsMerged,
}

impl Warning {
    pub fn as_str(self) -> &'static str {
        match self {
            Warning::SingleFold => "SingleFold",
            Warning::PrecisionUndefined => "PrecisionUndefined",
            Warning::RecallUndefined => "RecallUndefined",
            Warning::FScoreUndefined => "FScoreUndefined",
            Warning::MccUndefined => "MccUndefined",
            Warning::ZeroSupportClass => "ZeroSupportClass",
            Warning::TargetsExcluded => "TargetsExcluded",
            Warning::SparseClass => "SparseClass",
            Warning::BinsMerged => "BinsMerged",
        }
    }

    /// Registered flag code this warning surfaces as in a report, if any.
    pub fn flag_code(self) -> Option<FlagCode> {
        match self {
            Warning::SingleFold => Some(FlagCode::SingleFold),
            Warning::PrecisionUndefined => Some(FlagCode::PrecisionUndefined),
            Warning::RecallUndefined => Some(FlagCode::RecallUndefined),
            Warning::MccUndefined => Some(FlagCode::MccUndefined),
            Warning::SparseClass => Some(FlagCode::SparseClass),
            _ => None,
        }
    }
}

impl fmt::Display for Warning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// The registered set of diagnostic flag codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum FlagCode {
    AccuracyTrap,
    SevereImbalance,
    CalibrationInversion,
    MapeUnstable,
    MacroMicroGap,
    ResidualTrend,
    ResidualHeteroscedastic,
    SparseClass,
    SingleFold,
    PrecisionUndefined,
    RecallUndefined,
    MccUndefined,
}

impl FlagCode {
    pub const ALL: [FlagCode; 12] = [
        FlagCode::AccuracyTrap,
        FlagCode::SevereImbalance,
        FlagCode::CalibrationInversion,
        FlagCode::MapeUnstable,
        FlagCode::MacroMicroGap,
        FlagCode::ResidualTrend,
        FlagCode::ResidualHeteroscedastic,
        FlagCode::SparseClass,
        FlagCode::SingleFold,
        FlagCode::PrecisionUndefined,
        FlagCode::RecallUndefined,
        FlagCode::MccUndefined,
    ];
}

impl fmt::Display for FlagCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Info,
    Warn,
    Critical,
}

impl fmt::Display for Severity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Severity::Info => "info",
            Severity::Warn => "warn",
            Severity::Critical => "critical",
        })
    }
}

/// A diagnostic finding with the numbers that triggered it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticFlag {
    pub code: FlagCode,
    pub severity: Severity,
    pub message: String,
    pub evidence: BTreeMap<String, f64>,
}

impl DiagnosticFlag {
    pub fn new(code: FlagCode, severity: Severity, message: impl Into<String>) -> Self {
        Self {
            code,
            severity,
            message: message.into(),
            evidence: BTreeMap::new(),
        }
    }

    pub fn with(mut self, key: impl Into<String>, value: f64) -> Self {
        self.evidence.insert(key.into(), value);
        self
    }
}

/// A metric value together with the degeneracy warnings raised computing it.
#[derive(Debug, Clone, PartialEq)]
pub struct Flagged {
    pub value: f64,
    pub warnings: Vec<Warning>,
}

impl Flagged {
    pub fn clean(value: f64) -> Self {
        Self {
            value,
            warnings: Vec::new(),
        }
    }

    pub fn degenerate(value: f64, warning: Warning) -> Self {
        Self {
            value,
            warnings: vec![warning],
        }
    }

    pub fn is_clean(&self) -> bool {
        self.warnings.is_empty()
    }
}

/// Summary statistics of one metric across folds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FoldStats {
    pub mean: f64,
    pub sample_std: f64,
    pub min: f64,
    pub max: f64,
    /// Set when only one value was aggregated; `sample_std` is then 0.
    pub single_fold: bool,
}

/// Mean, sample standard deviation (m − 1 denominator), min and max.
///
/// Accumulates over a sorted copy, so the result is bit-identical for any
/// permutation of `values`.
pub fn aggregate_folds(values: &[f64]) -> Result<FoldStats> {
    if values.is_empty() {
        return Err(Error::EmptyInput);
    }
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFiniteValue(i));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let (min, max) = (sorted[0], sorted[sorted.len() - 1]);
    let m = sorted.len() as f64;
    let mean = if min == max {
        min
    } else {
        sorted.iter().sum::<f64>() / m
    };
    let sample_std = if sorted.len() < 2 || min == max {
        0.0
    } else {
        (sorted.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1.0)).sqrt()
    };
    Ok(FoldStats {
        mean,
        sample_std,
        min,
        max,
        single_fold: sorted.len() == 1,
    })
}

/// Per-fold values of one metric and their summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    #[serde(skip)]
    pub metric_name: String,
    pub per_fold: Vec<f64>,
    pub mean: f64,
    #[serde(rename = "std")]
    pub sample_std: f64,
    pub min: f64,
    pub max: f64,
    pub warnings: Vec<Warning>,
}

impl MetricReport {
    /// Aggregates `per_fold` and records `warnings` (deduplicated, sorted).
    pub fn from_folds(
        name: impl Into<String>,
        per_fold: Vec<f64>,
        warnings: impl IntoIterator<Item = Warning>,
    ) -> Result<Self> {
        let stats = aggregate_folds(&per_fold)?;
        let mut warnings: Vec<Warning> = warnings.into_iter().collect();
        if stats.single_fold {
            warnings.push(Warning::SingleFold);
        }
        warnings.sort();
        warnings.dedup();
        Ok(Self {
            metric_name: name.into(),
            per_fold,
            mean: stats.mean,
            sample_std: stats.sample_std,
            min: stats.min,
            max: stats.max,
            warnings,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Classification,
    Regression,
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Task::Classification => "classification",
            Task::Regression => "regression",
        })
    }
}

/// Summary of the evaluated data, recorded so a score is never reported
/// without its regime context.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DataFingerprint {
    Classification {
        rows: usize,
        positive_class: Option<String>,
        prevalences: IndexMap<String, f64>,
    },
    Regression {
        rows: usize,
        target_mean: f64,
        target_std: f64,
        target_min: f64,
        target_max: f64,
    },
}

/// A metric that could not be computed, kept when running permissively.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricFailure {
    pub metric: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub seed: u64,
    pub k: usize,
    /// How fold values are combined: always the mean of per-fold metrics.
    pub aggregation: String,
    pub data: DataFingerprint,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub failed_metrics: Vec<MetricFailure>,
}

pub const AGGREGATION_CONVENTION: &str = "mean_of_fold_metrics";

/// Per-fold and aggregated metric values plus diagnostic flags.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvaluationReport {
    pub task: Task,
    pub provenance: Provenance,
    pub metrics: IndexMap<String, MetricReport>,
    pub flags: Vec<DiagnosticFlag>,
}

impl<'de> Deserialize<'de> for EvaluationReport {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Wire {
            task: Task,
            provenance: Provenance,
            metrics: IndexMap<String, MetricReport>,
            flags: Vec<DiagnosticFlag>,
        }
        let mut wire = Wire::deserialize(deserializer)?;
        for (name, metric) in wire.metrics.iter_mut() {
            metric.metric_name = name.clone();
        }
        Ok(Self {
            task: wire.task,
            provenance: wire.provenance,
            metrics: wire.metrics,
            flags: wire.flags,
        })
    }
}

impl EvaluationReport {
    pub fn metric(&self, name: &str) -> Option<&MetricReport> {
        self.metrics.get(name)
    }

    pub fn mean(&self, name: &str) -> Option<f64> {
        self.metric(name).map(|m| m.mean)
    }

    /// Appends a flag unless one with the same code and message exists.
    pub fn push_flag(&mut self, flag: DiagnosticFlag) {
        if !self
            .flags
            .iter()
            .any(|f| f.code == flag.code && f.message == flag.message)
        {
            self.flags.push(flag);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_point_aggregate() {
        let s = aggregate_folds(&[0.8, 0.9]).unwrap();
        assert!((s.mean - 0.85).abs() < 1e-12);
        // sqrt(((0.05)^2 * 2) / 1) = 0.05 * sqrt(2)
        assert!((s.sample_std - 0.070_710_678_118_654_75).abs() < 1e-9);
        assert_eq!((s.min, s.max), (0.8, 0.9));
    }

    #[test]
    fn single_value_flags_single_fold() {
        let s = aggregate_folds(&[0.5]).unwrap();
        assert_eq!(s.sample_std, 0.0);
        assert!(s.single_fold);
        let r = MetricReport::from_folds("accuracy", vec![0.5], []).unwrap();
        assert_eq!(r.warnings, vec![Warning::SingleFold]);
    }

    #[test]
    fn constant_sequence_has_zero_std() {
        let s = aggregate_folds(&[0.3; 5]).unwrap();
        assert_eq!(s.sample_std, 0.0);
        assert_eq!(s.mean, 0.3);
    }

    #[test]
    fn aggregate_rejects_bad_input() {
        assert_eq!(aggregate_folds(&[]), Err(Error::EmptyInput));
        assert_eq!(
            aggregate_folds(&[1.0, f64::INFINITY]),
            Err(Error::NonFiniteValue(1))
        );
    }
}
