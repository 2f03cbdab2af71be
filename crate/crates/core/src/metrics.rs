//! Metric specifiers: the textual names used in configs and reports, and
//! their evaluation against a single prediction set.

use std::fmt;
use std::str::FromStr;

use crate::classify::{
    accuracy, averaged_f_beta, build_confusion, f_beta, log_loss, mcc, rates_from_counts,
    Averaging,
};
use crate::data::{ClassificationData, RegressionData};
use crate::diagnose::{calibration_audit, DEFAULT_CALIBRATION_BINS};
use crate::error::{Error, Result};
use crate::rank::{binary_scores, pr_auc, pr_curve, roc_auc, roc_curve};
use crate::regress::{mae, mape, r_squared, rmse, DEFAULT_MAPE_EPSILON};
use crate::report::{Flagged, Task};

/// A prediction set of either task.
#[derive(Debug, Clone, PartialEq)]
pub enum PredictionSet {
    Classification(ClassificationData),
    Regression(RegressionData),
}

impl PredictionSet {
    pub fn task(&self) -> Task {
        match self {
            PredictionSet::Classification(_) => Task::Classification,
            PredictionSet::Regression(_) => Task::Regression,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            PredictionSet::Classification(d) => d.len(),
            PredictionSet::Regression(d) => d.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        Ok(match self {
            PredictionSet::Classification(d) => PredictionSet::Classification(d.subset(indices)?),
            PredictionSet::Regression(d) => PredictionSet::Regression(d.subset(indices)?),
        })
    }
}

/// Which class a per-class metric refers to.
#[derive(Debug, Clone, PartialEq)]
pub enum ClassSelector {
    /// The designated positive class (or the second class of a binary space).
    Positive,
    Named(String),
}

#[derive(Debug, Clone, PartialEq)]
pub enum MetricSpec {
    Accuracy,
    Precision(ClassSelector),
    Recall(ClassSelector),
    FBeta { beta: f64, class: ClassSelector },
    AveragedFBeta { beta: f64, mode: Averaging },
    Mcc,
    RocAuc,
    PrAuc,
    LogLoss,
    /// Expected gap between confidence and accuracy over calibration bins.
    CalibrationGap,
    Mae,
    Rmse,
    RSquared,
    Mape { epsilon: f64 },
}

impl MetricSpec {
    pub fn task(&self) -> Task {
        match self {
            MetricSpec::Mae | MetricSpec::Rmse | MetricSpec::RSquared | MetricSpec::Mape { .. } => {
                Task::Regression
            }
            _ => Task::Classification,
        }
    }

    /// Whether larger values indicate a better model.
    pub fn higher_is_better(&self) -> bool {
        !matches!(
            self,
            MetricSpec::LogLoss
                | MetricSpec::CalibrationGap
                | MetricSpec::Mae
                | MetricSpec::Rmse
                | MetricSpec::Mape { .. }
        )
    }

    pub fn requires_scores(&self) -> bool {
        matches!(
            self,
            MetricSpec::RocAuc | MetricSpec::PrAuc | MetricSpec::LogLoss | MetricSpec::CalibrationGap
        )
    }

    pub fn evaluate(&self, data: &PredictionSet) -> Result<Flagged> {
        match (self.task(), data) {
            (Task::Classification, PredictionSet::Classification(d)) => self.classification(d),
            (Task::Regression, PredictionSet::Regression(d)) => self.regression(d),
            (task, _) => Err(self.infeasible(format!("a {task} metric cannot score this data"))),
        }
    }

    fn infeasible(&self, reason: impl Into<String>) -> Error {
        Error::MetricInfeasible {
            metric: self.to_string(),
            reason: reason.into(),
        }
    }

    fn class_index(&self, d: &ClassificationData, sel: &ClassSelector) -> Result<usize> {
        match sel {
            ClassSelector::Positive => d.labels().positive_index().ok_or_else(|| {
                self.infeasible("no positive class designated for a multiclass label space")
            }),
            ClassSelector::Named(c) => d
                .labels()
                .index_of(c)
                .ok_or_else(|| Error::UnknownLabel(c.clone())),
        }
    }

    fn classification(&self, d: &ClassificationData) -> Result<Flagged> {
        if self.requires_scores() && !d.has_scores() {
            return Err(self.infeasible("probability scores are required"));
        }
        let cm = build_confusion(d);
        match self {
            MetricSpec::Accuracy => Ok(Flagged::clean(accuracy(&cm))),
            MetricSpec::Precision(sel) => {
                let c = self.class_index(d, sel)?;
                Ok(rates_from_counts(cm.binary_counts(c)).precision())
            }
            MetricSpec::Recall(sel) => {
                let c = self.class_index(d, sel)?;
                Ok(rates_from_counts(cm.binary_counts(c)).recall())
            }
            MetricSpec::FBeta { beta, class } => {
                let c = self.class_index(d, class)?;
                let rates = rates_from_counts(cm.binary_counts(c));
                let mut f = f_beta(rates.precision, rates.recall, *beta)?;
                f.warnings.extend(rates.warnings());
                Ok(f)
            }
            MetricSpec::AveragedFBeta { beta, mode } => averaged_f_beta(&cm, *beta, *mode),
            MetricSpec::Mcc => mcc(&cm).map_err(|_| self.infeasible("MCC requires a binary task")),
            MetricSpec::RocAuc | MetricSpec::PrAuc => {
                let (mask, scores) = binary_scores(d)
                    .map_err(|e| self.infeasible(format!("needs binary scores: {e}")))?;
                let area = if *self == MetricSpec::RocAuc {
                    roc_curve(&mask, &scores, &true).and_then(|c| roc_auc(&c))
                } else {
                    pr_curve(&mask, &scores, &true).and_then(|c| pr_auc(&c))
                };
                area.map(Flagged::clean)
                    .map_err(|e| self.infeasible(e.to_string()))
            }
            MetricSpec::LogLoss => log_loss(d).map(Flagged::clean),
            MetricSpec::CalibrationGap => {
                let audit = calibration_audit(d, DEFAULT_CALIBRATION_BINS)?;
                Ok(Flagged {
                    value: audit.expected_gap,
                    warnings: audit.warnings,
                })
            }
            _ => unreachable!("regression metric routed to classification"),
        }
    }

    fn regression(&self, d: &RegressionData) -> Result<Flagged> {
        match self {
            MetricSpec::Mae => Ok(Flagged::clean(mae(d))),
            MetricSpec::Rmse => Ok(Flagged::clean(rmse(d))),
            MetricSpec::RSquared => r_squared(d)
                .map(Flagged::clean)
                .map_err(|e| self.infeasible(e.to_string())),
            MetricSpec::Mape { epsilon } => mape(d, *epsilon)
                .map(|m| Flagged {
                    value: m.value_percent,
                    warnings: m.warnings,
                })
                .map_err(|e| self.infeasible(e.to_string())),
            _ => unreachable!("classification metric routed to regression"),
        }
    }
}

fn fmt_beta(beta: f64) -> String {
    if beta.fract() == 0.0 && (1.0..=9.0).contains(&beta) {
        format!("{}", beta as u32)
    } else {
        format!("_beta({beta})")
    }
}

impl fmt::Display for MetricSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let class = |sel: &ClassSelector| match sel {
            ClassSelector::Positive => String::new(),
            ClassSelector::Named(c) => format!("@{c}"),
        };
        match self {
            MetricSpec::Accuracy => write!(f, "accuracy"),
            MetricSpec::Precision(sel) => write!(f, "precision{}", class(sel)),
            MetricSpec::Recall(sel) => write!(f, "recall{}", class(sel)),
            MetricSpec::FBeta { beta, class: sel } => write!(f, "f{}{}", fmt_beta(*beta), class(sel)),
            MetricSpec::AveragedFBeta { beta, mode } => {
                let m = match mode {
                    Averaging::Micro => "micro",
                    Averaging::Macro => "macro",
                };
                write!(f, "{m}_f{}", fmt_beta(*beta))
            }
            MetricSpec::Mcc => write!(f, "mcc"),
            MetricSpec::RocAuc => write!(f, "roc_auc"),
            MetricSpec::PrAuc => write!(f, "pr_auc"),
            MetricSpec::LogLoss => write!(f, "log_loss"),
            MetricSpec::CalibrationGap => write!(f, "calibration_gap"),
            MetricSpec::Mae => write!(f, "mae"),
            MetricSpec::Rmse => write!(f, "rmse"),
            MetricSpec::RSquared => write!(f, "r2"),
            MetricSpec::Mape { epsilon } if *epsilon == DEFAULT_MAPE_EPSILON => write!(f, "mape"),
            MetricSpec::Mape { epsilon } => write!(f, "mape({epsilon})"),
        }
    }
}

impl FromStr for MetricSpec {
    type Err = Error;

    /// Accepts `accuracy`, `precision[@c]`, `recall[@c]`, `f1[@c]`, `f2[@c]`,
    /// `f_beta(b)[@c]`, `micro_f1`, `macro_f1`, `micro_f_beta(b)`,
    /// `macro_f_beta(b)`, `mcc`, `roc_auc`, `pr_auc`, `log_loss`,
    /// `calibration_gap`, `mae`, `rmse`, `r2`, `mape`, `mape(eps)`.
    fn from_str(s: &str) -> Result<Self> {
        let unknown = || Error::UnknownMetric(s.to_string());
        let s = s.trim();
        let (head, class) = match s.split_once('@') {
            Some((h, c)) if !c.is_empty() => (h, ClassSelector::Named(c.to_string())),
            Some(_) => return Err(unknown()),
            None => (s, ClassSelector::Positive),
        };
        let per_class = !matches!(class, ClassSelector::Positive);
        let arg = |name: &str| -> Option<Result<f64>> {
            let inner = head.strip_prefix(name)?.strip_prefix('(')?.strip_suffix(')')?;
            Some(inner.trim().parse::<f64>().map_err(|_| unknown()))
        };
        let f_shorthand = |h: &str| -> Option<f64> {
            let digits = h.strip_prefix('f')?;
            let b: u32 = digits.parse().ok()?;
            (1..=9).contains(&b).then_some(b as f64)
        };
        let positive_beta = |b: f64| {
            if b > 0.0 && b.is_finite() {
                Ok(b)
            } else {
                Err(Error::NonPositiveBeta(b))
            }
        };

        let spec = match head {
            "accuracy" => MetricSpec::Accuracy,
            "precision" => MetricSpec::Precision(class.clone()),
            "recall" => MetricSpec::Recall(class.clone()),
            "mcc" => MetricSpec::Mcc,
            "roc_auc" => MetricSpec::RocAuc,
            "pr_auc" => MetricSpec::PrAuc,
            "log_loss" => MetricSpec::LogLoss,
            "calibration_gap" => MetricSpec::CalibrationGap,
            "mae" => MetricSpec::Mae,
            "rmse" => MetricSpec::Rmse,
            "r2" | "r_squared" => MetricSpec::RSquared,
            "mape" => MetricSpec::Mape {
                epsilon: DEFAULT_MAPE_EPSILON,
            },
            _ => {
                if let Some(eps) = arg("mape") {
                    let epsilon = eps?;
                    if !(epsilon > 0.0) {
                        return Err(unknown());
                    }
                    MetricSpec::Mape { epsilon }
                } else if let Some(b) = arg("f_beta") {
                    MetricSpec::FBeta {
                        beta: positive_beta(b?)?,
                        class: class.clone(),
                    }
                } else if let Some(b) = f_shorthand(head) {
                    MetricSpec::FBeta {
                        beta: b,
                        class: class.clone(),
                    }
                } else if let Some((mode, rest)) = head
                    .strip_prefix("micro_")
                    .map(|r| (Averaging::Micro, r))
                    .or_else(|| head.strip_prefix("macro_").map(|r| (Averaging::Macro, r)))
                {
                    let beta = if let Some(b) = f_shorthand(rest) {
                        b
                    } else if let Some(inner) = rest
                        .strip_prefix("f_beta(")
                        .and_then(|r| r.strip_suffix(')'))
                    {
                        positive_beta(inner.trim().parse().map_err(|_| unknown())?)?
                    } else {
                        return Err(unknown());
                    };
                    MetricSpec::AveragedFBeta { beta, mode }
                } else {
                    return Err(unknown());
                }
            }
        };
        let takes_class = matches!(
            spec,
            MetricSpec::Precision(_) | MetricSpec::Recall(_) | MetricSpec::FBeta { .. }
        );
        if per_class && !takes_class {
            return Err(unknown());
        }
        Ok(spec)
    }
}
