//! Regime detection and metric-disagreement analytics.
//!
//! Every check is a pure function of its inputs and the registered
//! [`Thresholds`]; the evidence that tripped a flag travels with it.

use std::collections::BTreeMap;
use std::fmt::Display;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::classify::{averaged_f_beta, per_class_f_beta, Averaging, ConfusionMatrix};
use crate::data::{argmax, ClassificationData, RegressionData};
use crate::error::{Error, Result};
use crate::regress::DEFAULT_MAPE_EPSILON;
use crate::report::{DiagnosticFlag, EvaluationReport, FlagCode, Severity, Warning};

pub const DEFAULT_CALIBRATION_BINS: usize = 10;

/// Registered decision thresholds for every diagnostic. All configurable.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Thresholds {
    /// Accuracy must beat the majority baseline by at least this much.
    pub accuracy_lift: f64,
    pub trap_mcc: f64,
    pub trap_minority_recall: f64,
    pub macro_micro_gap: f64,
    /// Targets below `mape_epsilon_scale · median(|y|)` count as near zero.
    pub mape_epsilon_scale: f64,
    pub near_zero_fraction: f64,
    pub mape_epsilon: f64,
    pub heteroscedastic_ratio: f64,
    pub trend_fraction: f64,
    pub min_trend_bins: usize,
    /// Majority-to-minority prevalence ratio at which imbalance is severe.
    pub severe_imbalance_ratio: f64,
    pub min_calibration_bin: usize,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            accuracy_lift: 0.05,
            trap_mcc: 0.3,
            trap_minority_recall: 0.5,
            macro_micro_gap: 0.03,
            mape_epsilon_scale: 0.01,
            near_zero_fraction: 0.05,
            mape_epsilon: DEFAULT_MAPE_EPSILON,
            heteroscedastic_ratio: 3.0,
            trend_fraction: 0.8,
            min_trend_bins: crate::regress::DEFAULT_MIN_TREND_BINS,
            severe_imbalance_ratio: 4.0,
            min_calibration_bin: 10,
        }
    }
}

impl Thresholds {
    pub fn residual(&self) -> crate::regress::ResidualThresholds {
        crate::regress::ResidualThresholds {
            trend_fraction: self.trend_fraction,
            heteroscedastic_ratio: self.heteroscedastic_ratio,
            min_trend_bins: self.min_trend_bins,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImbalanceProfile {
    /// Class → share of samples, in ascending class order.
    pub prevalences: IndexMap<String, f64>,
    pub imbalance_ratio: f64,
    pub majority_baseline_accuracy: f64,
    pub majority_class: String,
    pub minority_class: String,
}

/// Class shares, max/min prevalence ratio and majority-vote accuracy.
pub fn imbalance_profile<L: Ord + Display>(labels: &[L]) -> Result<ImbalanceProfile> {
    let mut counts: BTreeMap<&L, usize> = BTreeMap::new();
    for l in labels {
        *counts.entry(l).or_default() += 1;
    }
    if counts.len() < 2 {
        return Err(Error::SingleClassInput);
    }
    let n = labels.len() as f64;
    let prevalences: IndexMap<String, f64> = counts
        .iter()
        .map(|(l, &c)| (l.to_string(), c as f64 / n))
        .collect();
    // First maximum and first minimum in class order.
    let (mut maj, mut min) = (0, 0);
    let values: Vec<f64> = prevalences.values().copied().collect();
    for (i, &v) in values.iter().enumerate() {
        if v > values[maj] {
            maj = i;
        }
        if v < values[min] {
            min = i;
        }
    }
    Ok(ImbalanceProfile {
        imbalance_ratio: values[maj] / values[min],
        majority_baseline_accuracy: values[maj],
        majority_class: prevalences.get_index(maj).unwrap().0.clone(),
        minority_class: prevalences.get_index(min).unwrap().0.clone(),
        prevalences,
    })
}

pub fn severe_imbalance_check(
    profile: &ImbalanceProfile,
    thresholds: &Thresholds,
) -> Option<DiagnosticFlag> {
    (profile.imbalance_ratio >= thresholds.severe_imbalance_ratio).then(|| {
        DiagnosticFlag::new(
            FlagCode::SevereImbalance,
            Severity::Warn,
            format!(
                "class `{}` is {:.3} times as frequent as class `{}`; a majority vote already scores {:.4} accuracy",
                profile.majority_class,
                profile.imbalance_ratio,
                profile.minority_class,
                profile.majority_baseline_accuracy
            ),
        )
        .with("imbalance_ratio", profile.imbalance_ratio)
        .with("majority_baseline_accuracy", profile.majority_baseline_accuracy)
        .with("threshold", thresholds.severe_imbalance_ratio)
    })
}

/// Minority-class recall as recorded in `report`: either `recall@<minority>`
/// or plain `recall` when the positive class is the minority.
fn minority_recall(report: &EvaluationReport, profile: &ImbalanceProfile) -> Option<f64> {
    if let Some(v) = report.mean(&format!("recall@{}", profile.minority_class)) {
        return Some(v);
    }
    match &report.provenance.data {
        crate::report::DataFingerprint::Classification {
            positive_class: Some(p),
            ..
        } if *p == profile.minority_class => report.mean("recall"),
        _ => None,
    }
}

/// Raises `AccuracyTrap` when accuracy barely beats the majority vote while
/// MCC or minority recall shows the minority class is being missed.
pub fn accuracy_trap_check(
    report: &EvaluationReport,
    profile: &ImbalanceProfile,
    thresholds: &Thresholds,
) -> Result<Option<DiagnosticFlag>> {
    let accuracy = report.mean("accuracy").ok_or(Error::MissingAccuracy)?;
    let baseline = profile.majority_baseline_accuracy;
    let lift = accuracy - baseline;
    let mcc = report.mean("mcc");
    let recall = minority_recall(report, profile);
    let weak_mcc = mcc.is_some_and(|m| m < thresholds.trap_mcc);
    let weak_recall = recall.is_some_and(|r| r < thresholds.trap_minority_recall);
    if !(lift < thresholds.accuracy_lift && (weak_mcc || weak_recall)) {
        return Ok(None);
    }
    let mut flag = DiagnosticFlag::new(
        FlagCode::AccuracyTrap,
        Severity::Critical,
        format!(
            "accuracy {accuracy:.4} is within {:.2} of the majority baseline {baseline:.4} while the minority class `{}` is poorly served",
            thresholds.accuracy_lift, profile.minority_class
        ),
    )
    .with("accuracy", accuracy)
    .with("majority_baseline_accuracy", baseline)
    .with("lift", lift)
    .with("lift_threshold", thresholds.accuracy_lift);
    if let Some(m) = mcc {
        flag = flag.with("mcc", m);
    }
    if let Some(r) = recall {
        flag = flag.with("minority_recall", r);
    }
    Ok(Some(flag))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    HigherBetter,
    LowerBetter,
}

impl Direction {
    pub fn flipped(self) -> Self {
        match self {
            Direction::HigherBetter => Direction::LowerBetter,
            Direction::LowerBetter => Direction::HigherBetter,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankingComparison {
    pub metric_a: String,
    pub metric_b: String,
    /// Best model first.
    pub model_order_a: Vec<String>,
    pub model_order_b: Vec<String>,
    pub kendall_tau: f64,
    /// Model pairs ordered differently by the two metrics.
    pub inversions: usize,
    /// Set when equal metric means had to be ordered by model id.
    pub ties_broken: bool,
    /// `CalibrationInversion` when one metric is log loss and the orders disagree.
    pub flag: Option<DiagnosticFlag>,
}

fn order_models(
    models: &IndexMap<String, EvaluationReport>,
    metric: &str,
    direction: Direction,
) -> Result<(Vec<String>, bool)> {
    let mut scored = Vec::with_capacity(models.len());
    for (id, report) in models {
        let mean = report.mean(metric).ok_or_else(|| Error::MissingMetric {
            model: id.clone(),
            metric: metric.to_string(),
        })?;
        scored.push((id.clone(), mean));
    }
    scored.sort_by(|(ia, a), (ib, b)| {
        let by_value = match direction {
            Direction::HigherBetter => b.total_cmp(a),
            Direction::LowerBetter => a.total_cmp(b),
        };
        by_value.then_with(|| ia.cmp(ib))
    });
    let ties = scored.windows(2).any(|w| w[0].1 == w[1].1);
    Ok((scored.into_iter().map(|(id, _)| id).collect(), ties))
}

/// Orders models by two metrics and counts the pairs they disagree on.
pub fn ranking_comparison(
    models: &IndexMap<String, EvaluationReport>,
    metric_a: &str,
    direction_a: Direction,
    metric_b: &str,
    direction_b: Direction,
) -> Result<RankingComparison> {
    let m = models.len();
    if m < 2 {
        return Err(Error::TooFewSamples { needed: 2, found: m });
    }
    let (order_a, ties_a) = order_models(models, metric_a, direction_a)?;
    let (order_b, ties_b) = order_models(models, metric_b, direction_b)?;
    let rank_b: BTreeMap<&str, usize> = order_b
        .iter()
        .enumerate()
        .map(|(i, id)| (id.as_str(), i))
        .collect();
    let positions: Vec<usize> = order_a.iter().map(|id| rank_b[id.as_str()]).collect();
    let mut inversions = 0;
    for i in 0..m {
        for j in i + 1..m {
            if positions[i] > positions[j] {
                inversions += 1;
            }
        }
    }
    let pairs = m * (m - 1) / 2;
    let kendall_tau = 1.0 - 2.0 * inversions as f64 / pairs as f64;

    let involves_log_loss = metric_a == "log_loss" || metric_b == "log_loss";
    let flag = (involves_log_loss && inversions > 0).then(|| {
        let (other, other_order, ll_order) = if metric_a == "log_loss" {
            (metric_b, &order_b, &order_a)
        } else {
            (metric_a, &order_a, &order_b)
        };
        let top = |i: usize| models[&other_order[i]].mean(other);
        let tied = top(0) == top(1);
        let lead = if tied {
            format!("{other} ties `{}` with `{}` (ordered by id)", other_order[0], other_order[1])
        } else {
            format!("{other} prefers `{}`", other_order[0])
        };
        let mut flag = DiagnosticFlag::new(
            FlagCode::CalibrationInversion,
            Severity::Warn,
            format!(
                "{lead} but log_loss prefers `{}`; probability quality reverses the ranking",
                ll_order[0]
            ),
        )
        .with("inversions", inversions as f64)
        .with("kendall_tau", kendall_tau);
        for (id, report) in models {
            if let Some(gap) = report.mean("calibration_gap") {
                flag = flag.with(format!("calibration_gap[{id}]"), gap);
            }
        }
        flag
    });

    Ok(RankingComparison {
        metric_a: metric_a.to_string(),
        metric_b: metric_b.to_string(),
        model_order_a: order_a,
        model_order_b: order_b,
        kendall_tau,
        inversions,
        ties_broken: ties_a || ties_b,
        flag,
    })
}

/// Raises `MacroMicroGap` when pooled and per-class F-beta diverge.
pub fn macro_micro_gap(
    cm: &ConfusionMatrix,
    beta: f64,
    thresholds: &Thresholds,
) -> Result<Option<DiagnosticFlag>> {
    let micro = averaged_f_beta(cm, beta, Averaging::Micro)?.value;
    let macro_ = averaged_f_beta(cm, beta, Averaging::Macro)?.value;
    let gap = (micro - macro_).abs();
    if gap <= thresholds.macro_micro_gap {
        return Ok(None);
    }
    let weaker = if macro_ < micro {
        "minority classes score worse than the pooled decisions suggest"
    } else {
        "minority classes score better than the pooled decisions suggest"
    };
    let mut flag = DiagnosticFlag::new(
        FlagCode::MacroMicroGap,
        Severity::Warn,
        format!("micro-F {micro:.4} vs macro-F {macro_:.4}: {weaker}"),
    )
    .with("micro", micro)
    .with("macro", macro_)
    .with("gap", gap)
    .with("threshold", thresholds.macro_micro_gap);
    for (c, f) in per_class_f_beta(cm, beta)?.into_iter().enumerate() {
        if let Some(f) = f {
            flag = flag.with(format!("f[{}]", cm.labels().name(c)), f.value);
        }
    }
    Ok(Some(flag))
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let m = v.len();
    if m % 2 == 1 {
        v[m / 2]
    } else {
        (v[m / 2 - 1] + v[m / 2]) / 2.0
    }
}

/// Raises `MapeUnstable` when too many targets sit near zero relative to the
/// median target magnitude. Critical when MAPE would have no rows left.
pub fn mape_stability_check(data: &RegressionData, thresholds: &Thresholds) -> Option<DiagnosticFlag> {
    let abs: Vec<f64> = data.y_true().iter().map(|y| y.abs()).collect();
    let n = abs.len() as f64;
    let cutoff = thresholds.mape_epsilon_scale * median(abs.clone());
    let near_zero = abs.iter().filter(|&&a| a < cutoff || a == 0.0).count() as f64 / n;
    let excluded = abs.iter().filter(|&&a| a < thresholds.mape_epsilon).count() as f64 / n;

    let severity = if excluded == 1.0 {
        Severity::Critical
    } else if near_zero > thresholds.near_zero_fraction {
        Severity::Warn
    } else {
        return None;
    };
    let message = if severity == Severity::Critical {
        "every target is below the MAPE cut-off; MAPE is undefined, report MAE instead".to_string()
    } else {
        format!(
            "{:.1}% of targets are near zero; percentage errors will be dominated by them, prefer MAE",
            100.0 * near_zero
        )
    };
    Some(
        DiagnosticFlag::new(FlagCode::MapeUnstable, severity, message)
            .with("near_zero_fraction", near_zero)
            .with("excluded_fraction", excluded)
            .with("near_zero_cutoff", cutoff)
            .with("threshold", thresholds.near_zero_fraction),
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationBin {
    pub lower: f64,
    pub upper: f64,
    pub mean_confidence: f64,
    pub empirical_accuracy: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationAudit {
    pub bins: Vec<CalibrationBin>,
    /// Count-weighted mean of `|mean_confidence − empirical_accuracy|`.
    pub expected_gap: f64,
    /// Mean confidence minus accuracy over all samples; positive means
    /// overconfident.
    pub overconfidence: f64,
    pub warnings: Vec<Warning>,
}

/// Confidence-versus-accuracy audit over equal-width bins of the top-class
/// probability. Adjacent bins are merged until each holds at least
/// `min_calibration_bin` samples.
pub fn calibration_audit(data: &ClassificationData, bins: usize) -> Result<CalibrationAudit> {
    calibration_audit_with(data, bins, Thresholds::default().min_calibration_bin)
}

pub fn calibration_audit_with(
    data: &ClassificationData,
    bins: usize,
    min_bin: usize,
) -> Result<CalibrationAudit> {
    if !data.has_scores() {
        return Err(Error::MissingScores);
    }
    if bins < 2 {
        return Err(Error::TooFewSamples { needed: 2, found: bins });
    }
    // (sum confidence, correct count, count) per raw bin
    let mut raw = vec![(0.0f64, 0usize, 0usize); bins];
    for (row, &t) in data.score_rows().zip(data.y_true()) {
        let top = argmax(row);
        let conf = row[top];
        let idx = ((conf * bins as f64) as usize).min(bins - 1);
        raw[idx].0 += conf;
        raw[idx].1 += usize::from(top == t);
        raw[idx].2 += 1;
    }

    let width = 1.0 / bins as f64;
    let mut merged: Vec<(usize, usize, f64, usize, usize)> = Vec::new();
    let mut open: Option<(usize, usize, f64, usize, usize)> = None;
    let mut merged_any = false;
    for (i, &(s, c, m)) in raw.iter().enumerate() {
        if m == 0 {
            continue;
        }
        let cur = match open.take() {
            Some((lo, _, s0, c0, m0)) => {
                merged_any = true;
                (lo, i, s0 + s, c0 + c, m0 + m)
            }
            None => (i, i, s, c, m),
        };
        if cur.4 >= min_bin {
            merged.push(cur);
        } else {
            open = Some(cur);
        }
    }
    if let Some(tail) = open {
        match merged.last_mut() {
            Some(last) => {
                merged_any = true;
                *last = (last.0, tail.1, last.2 + tail.2, last.3 + tail.3, last.4 + tail.4);
            }
            None => {
                merged_any |= tail.4 < min_bin;
                merged.push(tail);
            }
        }
    }

    let n = data.len() as f64;
    let mut expected_gap = 0.0;
    let mut conf_total = 0.0;
    let mut correct_total = 0;
    let out: Vec<CalibrationBin> = merged
        .into_iter()
        .map(|(lo, hi, s, c, m)| {
            let mean_confidence = s / m as f64;
            let empirical_accuracy = c as f64 / m as f64;
            expected_gap += m as f64 / n * (mean_confidence - empirical_accuracy).abs();
            conf_total += s;
            correct_total += c;
            CalibrationBin {
                lower: lo as f64 * width,
                upper: (hi + 1) as f64 * width,
                mean_confidence,
                empirical_accuracy,
                count: m,
            }
        })
        .collect();
    Ok(CalibrationAudit {
        bins: out,
        expected_gap,
        overconfidence: (conf_total - correct_total as f64) / n,
        warnings: if merged_any {
            vec![Warning::BinsMerged]
        } else {
            Vec::new()
        },
    })
}
