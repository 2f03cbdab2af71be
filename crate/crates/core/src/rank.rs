//! Threshold sweeps: ROC and precision–recall curves, their areas, and
//! operating-point selection.
//!
//! A sample is predicted positive when `score >= threshold`. Thresholds are
//! the distinct observed scores, preceded by a `+∞` sentinel at which
//! nothing is predicted positive. Tied scores enter the sweep together, so a
//! tie block is a single diagonal step of the ROC curve.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::classify::{f_beta, rates_from_counts, BinaryCounts};
use crate::data::ClassificationData;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CurveKind {
    Roc,
    Pr,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    /// FPR for ROC, recall for PR.
    pub x: f64,
    /// TPR for ROC, precision for PR.
    pub y: f64,
    pub threshold: f64,
}

/// Curve points in descending-threshold order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoints {
    pub kind: CurveKind,
    pub points: Vec<CurvePoint>,
}

/// Cumulative counts after admitting every score `>= threshold`.
#[derive(Debug, Clone, Copy)]
struct Step {
    threshold: f64,
    tp: u64,
    fp: u64,
}

struct Sweep {
    steps: Vec<Step>,
    positives: u64,
    negatives: u64,
}

fn sweep(is_positive: &[bool], scores: &[f64]) -> Result<Sweep> {
    if is_positive.len() != scores.len() {
        return Err(Error::LengthMismatch {
            what: "scores",
            expected: is_positive.len(),
            found: scores.len(),
        });
    }
    if let Some(i) = scores.iter().position(|s| !s.is_finite()) {
        return Err(Error::NonFiniteValue(i));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));

    let positives = is_positive.iter().filter(|&&p| p).count() as u64;
    let negatives = is_positive.len() as u64 - positives;
    let mut steps = vec![Step {
        threshold: f64::INFINITY,
        tp: 0,
        fp: 0,
    }];
    let (mut tp, mut fp) = (0, 0);
    let mut i = 0;
    while i < order.len() {
        let threshold = scores[order[i]];
        while i < order.len() && scores[order[i]] == threshold {
            if is_positive[order[i]] {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        steps.push(Step { threshold, tp, fp });
    }
    Ok(Sweep {
        steps,
        positives,
        negatives,
    })
}

fn positive_mask<L: PartialEq>(y_true: &[L], positive: &L) -> Vec<bool> {
    y_true.iter().map(|l| l == positive).collect()
}

/// ROC curve: one point per distinct score plus the `(0, 0)` sentinel.
pub fn roc_curve<L: PartialEq>(y_true: &[L], scores: &[f64], positive: &L) -> Result<CurvePoints> {
    let sw = sweep(&positive_mask(y_true, positive), scores)?;
    if sw.positives == 0 || sw.negatives == 0 {
        return Err(Error::SingleClassInput);
    }
    let (p, n) = (sw.positives as f64, sw.negatives as f64);
    let points = sw
        .steps
        .iter()
        .map(|s| CurvePoint {
            x: s.fp as f64 / n,
            y: s.tp as f64 / p,
            threshold: s.threshold,
        })
        .collect();
    Ok(CurvePoints {
        kind: CurveKind::Roc,
        points,
    })
}

/// Trapezoidal area under a ROC curve.
pub fn roc_auc(curve: &CurvePoints) -> Result<f64> {
    if curve.kind != CurveKind::Roc {
        return Err(Error::WrongCurveKind { expected: "roc" });
    }
    Ok(curve
        .points
        .windows(2)
        .map(|w| (w[1].x - w[0].x) * (w[1].y + w[0].y) / 2.0)
        .sum())
}

/// Precision–recall curve. The sentinel point has recall 0 and precision 1.
pub fn pr_curve<L: PartialEq>(y_true: &[L], scores: &[f64], positive: &L) -> Result<CurvePoints> {
    let sw = sweep(&positive_mask(y_true, positive), scores)?;
    if sw.positives == 0 {
        return Err(Error::NoPositives);
    }
    let p = sw.positives as f64;
    let points = sw
        .steps
        .iter()
        .map(|s| {
            let predicted = s.tp + s.fp;
            CurvePoint {
                x: s.tp as f64 / p,
                y: if predicted == 0 {
                    1.0
                } else {
                    s.tp as f64 / predicted as f64
                },
                threshold: s.threshold,
            }
        })
        .collect();
    Ok(CurvePoints {
        kind: CurveKind::Pr,
        points,
    })
}

/// Average precision: `Σ (R_i − R_{i−1}) · P_i` without interpolation.
pub fn pr_auc(curve: &CurvePoints) -> Result<f64> {
    if curve.kind != CurveKind::Pr {
        return Err(Error::WrongCurveKind { expected: "pr" });
    }
    Ok(curve
        .points
        .windows(2)
        .map(|w| (w[1].x - w[0].x) * w[1].y)
        .sum())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TuningObjective {
    /// Maximize F-beta over candidate thresholds.
    MaxFBeta(f64),
    /// Best precision among thresholds whose recall reaches the target.
    MinRecall(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OperatingPoint {
    pub threshold: f64,
    pub precision: f64,
    pub recall: f64,
    /// F-beta at this point when the objective was `MaxFBeta`.
    pub f_beta: Option<f64>,
    pub counts: BinaryCounts,
}

/// Picks a decision threshold among the observed scores.
///
/// `MaxFBeta` breaks ties toward higher recall, then lower threshold.
/// `MinRecall` maximizes precision subject to the recall floor and breaks
/// ties toward the higher threshold.
pub fn tune_threshold<L: PartialEq>(
    y_true: &[L],
    scores: &[f64],
    positive: &L,
    objective: TuningObjective,
) -> Result<OperatingPoint> {
    let sw = sweep(&positive_mask(y_true, positive), scores)?;
    if sw.positives == 0 || sw.negatives == 0 {
        return Err(Error::SingleClassInput);
    }
    match objective {
        TuningObjective::MaxFBeta(beta) => {
            if !(beta > 0.0) || !beta.is_finite() {
                return Err(Error::NonPositiveBeta(beta));
            }
        }
        TuningObjective::MinRecall(target) => {
            if target.is_nan() || target <= 0.0 {
                return Err(Error::ParameterOutOfRange {
                    name: "target",
                    reason: format!("recall target must lie in (0, 1], got {target}"),
                });
            }
            if target > 1.0 {
                return Err(Error::UnreachableTarget(target));
            }
        }
    }

    let mut best: Option<(OperatingPoint, f64)> = None;
    // Skip the +∞ sentinel: it never predicts a positive.
    for s in &sw.steps[1..] {
        let counts = BinaryCounts {
            tp: s.tp,
            fp: s.fp,
            fn_: sw.positives - s.tp,
            tn: sw.negatives - s.fp,
        };
        let rates = rates_from_counts(counts);
        let (score, f) = match objective {
            TuningObjective::MaxFBeta(beta) => {
                let f = f_beta(rates.precision, rates.recall, beta)?.value;
                (f, Some(f))
            }
            TuningObjective::MinRecall(target) => {
                if rates.recall < target {
                    continue;
                }
                (rates.precision, None)
            }
        };
        let point = OperatingPoint {
            threshold: s.threshold,
            precision: rates.precision,
            recall: rates.recall,
            f_beta: f,
            counts,
        };
        let better = match &best {
            None => true,
            Some((incumbent, best_score)) => match score.total_cmp(best_score) {
                Ordering::Greater => true,
                Ordering::Less => false,
                // Steps arrive in descending threshold order.
                Ordering::Equal => match objective {
                    TuningObjective::MaxFBeta(_) => point.recall >= incumbent.recall,
                    TuningObjective::MinRecall(_) => false,
                },
            },
        };
        if better {
            best = Some((point, score));
        }
    }
    best.map(|(p, _)| p).ok_or(match objective {
        TuningObjective::MinRecall(t) => Error::UnreachableTarget(t),
        TuningObjective::MaxFBeta(_) => Error::SingleClassInput,
    })
}

/// Positive-class indicator and positive-class score column of a binary
/// prediction set.
pub fn binary_scores(data: &ClassificationData) -> Result<(Vec<bool>, Vec<f64>)> {
    if !data.labels().is_binary() {
        return Err(Error::NotBinary(data.n_classes()));
    }
    let pos = data.labels().positive_index().expect("binary");
    let scores = data.class_scores(pos).ok_or(Error::MissingScores)?;
    let mask = data.y_true().iter().map(|&t| t == pos).collect();
    Ok((mask, scores))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_separation() {
        let y = [1, 1, 0, 0];
        let s = [0.9, 0.8, 0.3, 0.1];
        let roc = roc_curve(&y, &s, &1).unwrap();
        assert!(roc.points.iter().any(|p| p.x == 0.0 && p.y == 1.0));
        assert_eq!(roc_auc(&roc).unwrap(), 1.0);
        assert_eq!(pr_auc(&pr_curve(&y, &s, &1).unwrap()).unwrap(), 1.0);
    }

    #[test]
    fn constant_scores_give_diagonal() {
        let y = [1, 0, 0, 0, 1];
        let s = [0.5; 5];
        let roc = roc_curve(&y, &s, &1).unwrap();
        let xy: Vec<(f64, f64)> = roc.points.iter().map(|p| (p.x, p.y)).collect();
        assert_eq!(xy, vec![(0.0, 0.0), (1.0, 1.0)]);
        assert_eq!(roc_auc(&roc).unwrap(), 0.5);
        // Single PR step to recall 1 at precision = prevalence.
        assert!((pr_auc(&pr_curve(&y, &s, &1).unwrap()).unwrap() - 0.4).abs() < 1e-12);
    }

    #[test]
    fn tie_block_hand_sweep() {
        let y = [1, 1, 0, 0];
        let s = [0.8, 0.4, 0.4, 0.2];
        let roc = roc_curve(&y, &s, &1).unwrap();
        let expected = [
            (0.0, 0.0, f64::INFINITY),
            (0.0, 0.5, 0.8),
            (0.5, 1.0, 0.4),
            (1.0, 1.0, 0.2),
        ];
        let got: Vec<(f64, f64, f64)> = roc.points.iter().map(|p| (p.x, p.y, p.threshold)).collect();
        assert_eq!(got, expected);
        // 3 correctly ordered pairs + one tie at ½ over 4 pairs.
        assert!((roc_auc(&roc).unwrap() - 0.875).abs() < 1e-12);
    }

    #[test]
    fn negated_scores_complement_auc() {
        let y = [1, 1, 0, 0];
        let s = [0.8, 0.4, 0.4, 0.2];
        let neg: Vec<f64> = s.iter().map(|v| -v).collect();
        let a = roc_auc(&roc_curve(&y, &s, &1).unwrap()).unwrap();
        let b = roc_auc(&roc_curve(&y, &neg, &1).unwrap()).unwrap();
        assert!((a + b - 1.0).abs() < 1e-12);
    }

    #[test]
    fn pr_hand_step_integration() {
        let y = [1, 0, 1, 0];
        let s = [0.9, 0.8, 0.7, 0.1];
        let area = pr_auc(&pr_curve(&y, &s, &1).unwrap()).unwrap();
        assert!((area - (0.5 + 0.5 * 2.0 / 3.0)).abs() < 1e-12);
        assert!((area - 0.833_333_333_3).abs() < 1e-9);
    }

    #[test]
    fn error_paths() {
        assert_eq!(
            roc_curve(&[1, 1], &[0.2, 0.3], &1),
            Err(Error::SingleClassInput)
        );
        assert_eq!(pr_curve(&[0, 0], &[0.2, 0.3], &1), Err(Error::NoPositives));
        let roc = roc_curve(&[1, 0], &[0.2, 0.1], &1).unwrap();
        assert_eq!(pr_auc(&roc), Err(Error::WrongCurveKind { expected: "pr" }));
        assert!(roc_curve(&[1, 0], &[f64::NAN, 0.1], &1).is_err());
    }

    #[test]
    fn max_f1_exhaustive_example() {
        let y = [1, 0, 1, 0];
        let s = [0.9, 0.8, 0.7, 0.1];
        let op = tune_threshold(&y, &s, &1, TuningObjective::MaxFBeta(1.0)).unwrap();
        assert_eq!(op.threshold, 0.7);
        assert!((op.f_beta.unwrap() - 0.8).abs() < 1e-12);
    }

    #[test]
    fn recall_floor_of_one() {
        let y = [1, 1, 0, 0, 1];
        let s = [0.9, 0.7, 0.3, 0.2, 0.6];
        let op = tune_threshold(&y, &s, &1, TuningObjective::MinRecall(1.0)).unwrap();
        assert_eq!(op.recall, 1.0);
        assert_eq!(op.precision, 1.0);
        assert_eq!(op.threshold, 0.6);

        let y = [1, 0, 1, 0, 1, 0];
        let s = [0.2, 0.9, 0.8, 0.4, 0.1, 0.05];
        let op = tune_threshold(&y, &s, &1, TuningObjective::MinRecall(1.0)).unwrap();
        assert_eq!(op.recall, 1.0);
        assert_eq!(op.threshold, 0.1);
    }

    #[test]
    fn recall_target_validation() {
        let y = [1, 0];
        let s = [0.9, 0.1];
        assert_eq!(
            tune_threshold(&y, &s, &1, TuningObjective::MinRecall(1.5)),
            Err(Error::UnreachableTarget(1.5))
        );
        assert!(tune_threshold(&y, &s, &1, TuningObjective::MinRecall(0.0)).is_err());
    }
}
