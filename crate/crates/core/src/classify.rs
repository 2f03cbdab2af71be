//! Confusion matrix and threshold-fixed classification metrics.

use serde::{Deserialize, Serialize};

use crate::data::{ClassificationData, LabelSpace};
use crate::error::{Error, Result};
use crate::report::{Flagged, Warning};

/// Probability clip bound for log loss.
pub const LOG_LOSS_EPSILON: f64 = 1e-15;

/// `K × K` count table; entry `(i, j)` counts samples of true class `i`
/// predicted as class `j`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    labels: LabelSpace,
    counts: Vec<u64>,
    n: u64,
}

/// One-vs-rest outcome counts for a single class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct BinaryCounts {
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
    pub tn: u64,
}

impl BinaryCounts {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.fn_ + self.tn
    }
}

impl ConfusionMatrix {
    /// Tabulates `(true, predicted)` index pairs.
    pub fn from_pairs(labels: LabelSpace, y_true: &[usize], y_pred: &[usize]) -> Result<Self> {
        if y_true.len() != y_pred.len() {
            return Err(Error::LengthMismatch {
                what: "y_pred",
                expected: y_true.len(),
                found: y_pred.len(),
            });
        }
        let k = labels.len();
        let mut counts = vec![0u64; k * k];
        for (&t, &p) in y_true.iter().zip(y_pred) {
            if t >= k || p >= k {
                return Err(Error::UnknownLabel(t.max(p).to_string()));
            }
            counts[t * k + p] += 1;
        }
        Ok(Self {
            labels,
            counts,
            n: y_true.len() as u64,
        })
    }

    /// Builds from a row-major count table.
    pub fn from_counts(labels: LabelSpace, counts: Vec<u64>) -> Result<Self> {
        let k = labels.len();
        if counts.len() != k * k {
            return Err(Error::LengthMismatch {
                what: "counts",
                expected: k * k,
                found: counts.len(),
            });
        }
        let n = counts.iter().sum();
        Ok(Self { labels, counts, n })
    }

    /// 2×2 table for a binary space whose positive class is designated.
    pub fn from_binary_counts(labels: LabelSpace, counts: BinaryCounts) -> Result<Self> {
        if !labels.is_binary() {
            return Err(Error::NotBinary(labels.len()));
        }
        let pos = labels.positive_index().expect("binary space has a positive index");
        let neg = 1 - pos;
        let mut table = vec![0; 4];
        table[pos * 2 + pos] = counts.tp;
        table[pos * 2 + neg] = counts.fn_;
        table[neg * 2 + pos] = counts.fp;
        table[neg * 2 + neg] = counts.tn;
        Self::from_counts(labels, table)
    }

    pub fn labels(&self) -> &LabelSpace {
        &self.labels
    }

    pub fn n_classes(&self) -> usize {
        self.labels.len()
    }

    pub fn total(&self) -> u64 {
        self.n
    }

    pub fn get(&self, actual: usize, predicted: usize) -> u64 {
        self.counts[actual * self.n_classes() + predicted]
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn trace(&self) -> u64 {
        (0..self.n_classes()).map(|i| self.get(i, i)).sum()
    }

    /// Number of samples whose true class is `class`.
    pub fn support(&self, class: usize) -> u64 {
        (0..self.n_classes()).map(|j| self.get(class, j)).sum()
    }

    /// One-vs-rest reduction for `class`.
    pub fn binary_counts(&self, class: usize) -> BinaryCounts {
        let k = self.n_classes();
        let tp = self.get(class, class);
        let col: u64 = (0..k).map(|i| self.get(i, class)).sum();
        let row = self.support(class);
        let fp = col - tp;
        let fn_ = row - tp;
        BinaryCounts {
            tp,
            fp,
            fn_,
            tn: self.n - tp - fp - fn_,
        }
    }
}

/// Tabulates every `(true, predicted)` pair; predictions fall back to the
/// score argmax when no hard labels are present.
pub fn build_confusion(data: &ClassificationData) -> ConfusionMatrix {
    let pred = data.predictions();
    ConfusionMatrix::from_pairs(data.labels().clone(), data.y_true(), &pred)
        .expect("validated data has aligned in-range labels")
}

pub fn accuracy(cm: &ConfusionMatrix) -> f64 {
    if cm.total() == 0 {
        return 0.0;
    }
    cm.trace() as f64 / cm.total() as f64
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassRates {
    pub precision: f64,
    pub recall: f64,
    pub precision_undefined: bool,
    pub recall_undefined: bool,
}

impl ClassRates {
    pub fn warnings(&self) -> Vec<Warning> {
        let mut w = Vec::new();
        if self.precision_undefined {
            w.push(Warning::PrecisionUndefined);
        }
        if self.recall_undefined {
            w.push(Warning::RecallUndefined);
        }
        w
    }

    pub fn precision(&self) -> Flagged {
        flagged(
            self.precision,
            self.precision_undefined,
            Warning::PrecisionUndefined,
        )
    }

    pub fn recall(&self) -> Flagged {
        flagged(self.recall, self.recall_undefined, Warning::RecallUndefined)
    }
}

fn flagged(value: f64, undefined: bool, warning: Warning) -> Flagged {
    if undefined {
        Flagged::degenerate(value, warning)
    } else {
        Flagged::clean(value)
    }
}

fn ratio_or_zero(num: u64, den: u64) -> (f64, bool) {
    if den == 0 {
        (0.0, true)
    } else {
        (num as f64 / den as f64, false)
    }
}

pub fn rates_from_counts(c: BinaryCounts) -> ClassRates {
    let (precision, precision_undefined) = ratio_or_zero(c.tp, c.tp + c.fp);
    let (recall, recall_undefined) = ratio_or_zero(c.tp, c.tp + c.fn_);
    ClassRates {
        precision,
        recall,
        precision_undefined,
        recall_undefined,
    }
}

/// Precision and recall of `class` against the rest.
pub fn class_rates(cm: &ConfusionMatrix, class: &str) -> Result<ClassRates> {
    let idx = cm
        .labels()
        .index_of(class)
        .ok_or_else(|| Error::UnknownLabel(class.to_string()))?;
    Ok(rates_from_counts(cm.binary_counts(idx)))
}

/// Weighted harmonic mean of precision and recall, recall weighted by β².
pub fn f_beta(precision: f64, recall: f64, beta: f64) -> Result<Flagged> {
    if !(beta > 0.0) || !beta.is_finite() {
        return Err(Error::NonPositiveBeta(beta));
    }
    let b2 = beta * beta;
    let den = b2 * precision + recall;
    if den == 0.0 {
        return Ok(Flagged::degenerate(0.0, Warning::FScoreUndefined));
    }
    Ok(Flagged::clean((1.0 + b2) * precision * recall / den))
}

/// Matthews correlation of a binary confusion matrix.
pub fn mcc(cm: &ConfusionMatrix) -> Result<Flagged> {
    if !cm.labels().is_binary() {
        return Err(Error::NotBinary(cm.n_classes()));
    }
    let pos = cm.labels().positive_index().expect("binary");
    Ok(mcc_from_counts(cm.binary_counts(pos)))
}

pub fn mcc_from_counts(c: BinaryCounts) -> Flagged {
    let (tp, fp, fn_, tn) = (c.tp as f64, c.fp as f64, c.fn_ as f64, c.tn as f64);
    let factors = [tp + fp, tp + fn_, tn + fp, tn + fn_];
    if factors.contains(&0.0) {
        return Flagged::degenerate(0.0, Warning::MccUndefined);
    }
    let den = factors.iter().map(|f| f.sqrt()).product::<f64>();
    let value = (tp * tn - fp * fn_) / den;
    Flagged::clean(value.clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Averaging {
    Micro,
    Macro,
}

/// Multiclass F-beta by pooled (micro) or per-class-then-mean (macro)
/// aggregation. Macro skips classes with no true samples and flags them.
pub fn averaged_f_beta(cm: &ConfusionMatrix, beta: f64, mode: Averaging) -> Result<Flagged> {
    let k = cm.n_classes();
    match mode {
        Averaging::Micro => {
            let pooled = (0..k).fold(BinaryCounts::default(), |acc, c| {
                let b = cm.binary_counts(c);
                BinaryCounts {
                    tp: acc.tp + b.tp,
                    fp: acc.fp + b.fp,
                    fn_: acc.fn_ + b.fn_,
                    tn: acc.tn + b.tn,
                }
            });
            let rates = rates_from_counts(pooled);
            f_beta(rates.precision, rates.recall, beta)
        }
        Averaging::Macro => {
            let mut warnings = Vec::new();
            let mut total = 0.0;
            let mut used = 0usize;
            for f in per_class_f_beta(cm, beta)? {
                match f {
                    Some(score) => {
                        total += score.value;
                        used += 1;
                        warnings.extend(score.warnings);
                    }
                    None => warnings.push(Warning::ZeroSupportClass),
                }
            }
            warnings.sort();
            warnings.dedup();
            let value = if used == 0 { 0.0 } else { total / used as f64 };
            Ok(Flagged { value, warnings })
        }
    }
}

/// Per-class one-vs-rest F-beta; `None` for classes with zero support.
pub fn per_class_f_beta(cm: &ConfusionMatrix, beta: f64) -> Result<Vec<Option<Flagged>>> {
    (0..cm.n_classes())
        .map(|c| {
            if cm.support(c) == 0 {
                return Ok(None);
            }
            let rates = rates_from_counts(cm.binary_counts(c));
            let mut f = f_beta(rates.precision, rates.recall, beta)?;
            // Zero support is handled above; only a missing prediction column
            // can leave precision undefined here.
            if rates.precision_undefined {
                f.warnings.push(Warning::PrecisionUndefined);
            }
            Ok(Some(f))
        })
        .collect()
}

/// Mean negative natural log of the probability assigned to the true class,
/// with probabilities clipped into `[ε, 1 − ε]`.
pub fn log_loss(data: &ClassificationData) -> Result<f64> {
    if !data.has_scores() {
        return Err(Error::MissingScores);
    }
    let total: f64 = data
        .score_rows()
        .zip(data.y_true())
        .map(|(row, &t)| -row[t].clamp(LOG_LOSS_EPSILON, 1.0 - LOG_LOSS_EPSILON).ln())
        .sum();
    Ok(total / data.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{validate_classification, RawClassification};

    fn binary_cm(tp: u64, fp: u64, fn_: u64, tn: u64) -> ConfusionMatrix {
        ConfusionMatrix::from_binary_counts(
            LabelSpace::binary("0", "1").unwrap(),
            BinaryCounts { tp, fp, fn_, tn },
        )
        .unwrap()
    }

    fn data(classes: &[&str], y_true: &[&str], y_pred: &[&str]) -> ClassificationData {
        validate_classification(
            LabelSpace::new(classes.iter().copied()).unwrap(),
            RawClassification {
                y_true: y_true.iter().map(|s| s.to_string()).collect(),
                y_pred: Some(y_pred.iter().map(|s| s.to_string()).collect()),
                y_score: None,
            },
        )
        .unwrap()
    }

    #[test]
    fn confusion_from_four_pairs() {
        let d = validate_classification(
            LabelSpace::binary("0", "1").unwrap(),
            RawClassification {
                y_true: ["1", "0", "1", "0"].map(String::from).to_vec(),
                y_pred: Some(["1", "0", "0", "0"].map(String::from).to_vec()),
                y_score: None,
            },
        )
        .unwrap();
        let c = build_confusion(&d).binary_counts(1);
        assert_eq!(
            c,
            BinaryCounts {
                tp: 1,
                fp: 0,
                fn_: 1,
                tn: 2
            }
        );
    }

    #[test]
    fn identity_predictions_are_diagonal() {
        let d = data(&["a", "b", "c"], &["a", "b", "c", "a"], &["a", "b", "c", "a"]);
        let cm = build_confusion(&d);
        for i in 0..3 {
            for j in 0..3 {
                if i != j {
                    assert_eq!(cm.get(i, j), 0);
                }
            }
        }
        assert_eq!(accuracy(&cm), 1.0);
    }

    #[test]
    fn absent_class_keeps_zero_row_and_column() {
        let d = data(&["a", "b", "c"], &["a", "b", "a"], &["a", "a", "b"]);
        let cm = build_confusion(&d);
        assert!((0..3).all(|j| cm.get(2, j) == 0));
        assert!((0..3).all(|i| cm.get(i, 2) == 0));
    }

    #[test]
    fn hand_values_for_small_table() {
        let cm = binary_cm(2, 1, 1, 6);
        assert!((accuracy(&cm) - 0.8).abs() < 1e-12);
        let r = class_rates(&cm, "1").unwrap();
        assert!((r.precision - 2.0 / 3.0).abs() < 1e-12);
        assert!((r.recall - 2.0 / 3.0).abs() < 1e-12);
        // (12 - 1) / sqrt(3 * 3 * 7 * 7) = 11/21
        assert!((mcc(&cm).unwrap().value - 11.0 / 21.0).abs() < 1e-12);
    }

    #[test]
    fn degenerate_rates_are_zero_and_flagged() {
        let cm = binary_cm(0, 0, 3, 7);
        let r = class_rates(&cm, "1").unwrap();
        assert_eq!(r.precision, 0.0);
        assert!(r.precision_undefined);
        assert_eq!(r.warnings(), vec![Warning::PrecisionUndefined]);
        let m = mcc(&cm).unwrap();
        assert_eq!(m.value, 0.0);
        assert_eq!(m.warnings, vec![Warning::MccUndefined]);
        assert_eq!(class_rates(&cm, "z"), Err(Error::UnknownLabel("z".into())));
    }

    #[test]
    fn perfect_binary_is_one_everywhere() {
        let cm = binary_cm(4, 0, 0, 6);
        let r = class_rates(&cm, "1").unwrap();
        assert_eq!((r.precision, r.recall), (1.0, 1.0));
        assert_eq!(mcc(&cm).unwrap().value, 1.0);
    }

    #[test]
    fn f_beta_values() {
        let third = 2.0 / 3.0;
        assert!((f_beta(third, third, 1.0).unwrap().value - third).abs() < 1e-12);
        // Independent evaluation of (1+b²)PR/(b²P+R)
        let (p, r) = (0.9580f64, 0.9481f64);
        let f1 = 2.0 * p * r / (p + r);
        let f2 = 5.0 * p * r / (4.0 * p + r);
        assert!((f1 - 0.953_024_5).abs() < 1e-6);
        assert!((f2 - 0.950_063_6).abs() < 1e-6);
        assert!((f_beta(p, r, 1.0).unwrap().value - f1).abs() < 1e-12);
        assert!((f_beta(p, r, 2.0).unwrap().value - f2).abs() < 1e-12);
        assert!(f2 < f1);
        assert_eq!(f_beta(1.0, 0.0, 1.0).unwrap().value, 0.0);
        let zero = f_beta(0.0, 0.0, 1.0).unwrap();
        assert_eq!(zero.value, 0.0);
        assert_eq!(zero.warnings, vec![Warning::FScoreUndefined]);
        assert_eq!(f_beta(0.5, 0.5, 0.0), Err(Error::NonPositiveBeta(0.0)));
    }

    #[test]
    fn micro_and_macro_hand_example() {
        let d = data(
            &["a", "b", "c"],
            &["a", "a", "a", "b", "c"],
            &["a", "a", "b", "b", "c"],
        );
        let cm = build_confusion(&d);
        let micro = averaged_f_beta(&cm, 1.0, Averaging::Micro).unwrap();
        assert!((micro.value - 0.8).abs() < 1e-12);
        assert!((micro.value - accuracy(&cm)).abs() < 1e-12);
        let macro_ = averaged_f_beta(&cm, 1.0, Averaging::Macro).unwrap();
        let expected = (0.8 + 2.0 / 3.0 + 1.0) / 3.0;
        assert!((macro_.value - expected).abs() < 1e-9);
        assert!((macro_.value - 0.822_222_222).abs() < 1e-9);
    }

    #[test]
    fn macro_skips_zero_support_class() {
        let d = data(&["a", "b", "c"], &["a", "b", "a", "b"], &["a", "b", "a", "b"]);
        let cm = build_confusion(&d);
        let m = averaged_f_beta(&cm, 1.0, Averaging::Macro).unwrap();
        assert_eq!(m.value, 1.0);
        assert_eq!(m.warnings, vec![Warning::ZeroSupportClass]);
    }

    #[test]
    fn mcc_requires_binary() {
        let d = data(&["a", "b", "c"], &["a"], &["a"]);
        assert_eq!(mcc(&build_confusion(&d)), Err(Error::NotBinary(3)));
    }

    fn scored(k: usize, y_true: Vec<usize>, scores: Vec<f64>) -> ClassificationData {
        let labels = LabelSpace::new((0..k).map(|i| i.to_string())).unwrap();
        ClassificationData::from_indices(labels, y_true, None, Some(scores)).unwrap()
    }

    #[test]
    fn log_loss_values() {
        let eps = LOG_LOSS_EPSILON;
        let d = scored(2, vec![0, 1], vec![1.0 - eps, eps, eps, 1.0 - eps]);
        assert!(log_loss(&d).unwrap() < 1e-14);

        let d = scored(4, vec![0, 3, 2], vec![0.25; 12]);
        assert!((log_loss(&d).unwrap() - 4f64.ln()).abs() < 1e-12);
        assert!((4f64.ln() - 1.386_294_361).abs() < 1e-9);

        let d = scored(2, vec![1], vec![1.0, 0.0]);
        let loss = log_loss(&d).unwrap();
        assert!((loss - (-(1e-15f64).ln())).abs() < 1e-9);
        assert!((loss - 34.538_776_394_910_684).abs() < 1e-9);

        let hard = data(&["a", "b"], &["a"], &["a"]);
        assert_eq!(log_loss(&hard), Err(Error::MissingScores));
    }
}
