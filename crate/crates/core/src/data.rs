//! Labels and prediction sets.
//!
//! Class identifiers are text tokens. Internally every label is stored as an
//! index into the owning [`LabelSpace`], so metric code never compares strings.

use std::borrow::Cow;
use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Maximum deviation of a probability row sum from 1 that is accepted.
pub const ROW_SUM_TOLERANCE: f64 = 1e-6;

/// Ordered set of class identifiers, with an optional designated positive class.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelSpace {
    classes: Vec<String>,
    positive_class: Option<String>,
}

impl LabelSpace {
    pub fn new<S: Into<String>>(classes: impl IntoIterator<Item = S>) -> Result<Self> {
        let classes: Vec<String> = classes.into_iter().map(Into::into).collect();
        if classes.len() < 2 {
            return Err(Error::InvalidLabelSpace(format!(
                "need at least 2 classes, found {}",
                classes.len()
            )));
        }
        let mut seen = std::collections::HashSet::with_capacity(classes.len());
        for c in &classes {
            if !seen.insert(c.as_str()) {
                return Err(Error::InvalidLabelSpace(format!("duplicate class `{c}`")));
            }
        }
        Ok(Self {
            classes,
            positive_class: None,
        })
    }

    /// Two-class space `[negative, positive]` with the positive class designated.
    pub fn binary(negative: impl Into<String>, positive: impl Into<String>) -> Result<Self> {
        let positive = positive.into();
        Self::new([negative.into(), positive.clone()])?.with_positive(positive)
    }

    pub fn with_positive(mut self, positive: impl Into<String>) -> Result<Self> {
        let positive = positive.into();
        if self.index_of(&positive).is_none() {
            return Err(Error::UnknownLabel(positive));
        }
        self.positive_class = Some(positive);
        Ok(self)
    }

    pub fn classes(&self) -> &[String] {
        &self.classes
    }

    pub fn len(&self) -> usize {
        self.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }

    pub fn is_binary(&self) -> bool {
        self.classes.len() == 2
    }

    pub fn positive_class(&self) -> Option<&str> {
        self.positive_class.as_deref()
    }

    pub fn index_of(&self, class: &str) -> Option<usize> {
        self.classes.iter().position(|c| c == class)
    }

    pub fn name(&self, index: usize) -> &str {
        &self.classes[index]
    }

    /// Index of the class treated as positive.
    ///
    /// The designated positive class when set; otherwise the second class of
    /// a binary space. `None` for multiclass spaces without a designation.
    pub fn positive_index(&self) -> Option<usize> {
        match &self.positive_class {
            Some(p) => self.index_of(p),
            None if self.is_binary() => Some(1),
            None => None,
        }
    }
}

/// Unvalidated classification input as it arrives from a file or caller.
#[derive(Debug, Clone, Default)]
pub struct RawClassification {
    pub y_true: Vec<String>,
    pub y_pred: Option<Vec<String>>,
    pub y_score: Option<Vec<Vec<f64>>>,
}

/// Validated classification prediction set. Immutable once constructed.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassificationData {
    labels: LabelSpace,
    y_true: Vec<usize>,
    y_pred: Option<Vec<usize>>,
    /// Row-major `n × K`.
    y_score: Option<Vec<f64>>,
}

/// Checks every invariant of a classification prediction set and returns the
/// validated form. Score rows within tolerance are renormalized.
pub fn validate_classification(
    labels: LabelSpace,
    raw: RawClassification,
) -> Result<ClassificationData> {
    let lookup: HashMap<&str, usize> = labels
        .classes()
        .iter()
        .enumerate()
        .map(|(i, c)| (c.as_str(), i))
        .collect();
    let encode = |seq: &[String]| -> Result<Vec<usize>> {
        seq.iter()
            .map(|s| {
                lookup
                    .get(s.as_str())
                    .copied()
                    .ok_or_else(|| Error::UnknownLabel(s.clone()))
            })
            .collect()
    };
    let y_true = encode(&raw.y_true)?;
    let y_pred = raw.y_pred.as_deref().map(encode).transpose()?;
    let y_score = raw
        .y_score
        .map(|rows| {
            let k = labels.len();
            let mut flat = Vec::with_capacity(rows.len() * k);
            for row in &rows {
                if row.len() != k {
                    return Err(Error::LengthMismatch {
                        what: "score row",
                        expected: k,
                        found: row.len(),
                    });
                }
                flat.extend_from_slice(row);
            }
            Ok(flat)
        })
        .transpose()?;
    ClassificationData::from_indices(labels, y_true, y_pred, y_score)
}

impl ClassificationData {
    /// Builds a prediction set from class indices and a flat row-major score
    /// matrix, enforcing the same invariants as [`validate_classification`].
    pub fn from_indices(
        labels: LabelSpace,
        y_true: Vec<usize>,
        y_pred: Option<Vec<usize>>,
        y_score: Option<Vec<f64>>,
    ) -> Result<Self> {
        let n = y_true.len();
        let k = labels.len();
        if n == 0 {
            return Err(Error::EmptyInput);
        }
        if y_pred.is_none() && y_score.is_none() {
            return Err(Error::NoPredictions);
        }
        let check_range = |seq: &[usize]| -> Result<()> {
            match seq.iter().find(|&&c| c >= k) {
                Some(c) => Err(Error::UnknownLabel(c.to_string())),
                None => Ok(()),
            }
        };
        check_range(&y_true)?;
        if let Some(pred) = &y_pred {
            if pred.len() != n {
                return Err(Error::LengthMismatch {
                    what: "y_pred",
                    expected: n,
                    found: pred.len(),
                });
            }
            check_range(pred)?;
        }
        let y_score = match y_score {
            Some(mut scores) => {
                if scores.len() != n * k {
                    return Err(Error::LengthMismatch {
                        what: "y_score",
                        expected: n * k,
                        found: scores.len(),
                    });
                }
                for (row, chunk) in scores.chunks_exact_mut(k).enumerate() {
                    normalize_row(row, chunk)?;
                }
                Some(scores)
            }
            None => None,
        };
        Ok(Self {
            labels,
            y_true,
            y_pred,
            y_score,
        })
    }

    pub fn labels(&self) -> &LabelSpace {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.y_true.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y_true.is_empty()
    }

    pub fn n_classes(&self) -> usize {
        self.labels.len()
    }

    pub fn y_true(&self) -> &[usize] {
        &self.y_true
    }

    /// Explicit hard predictions, if they were supplied.
    pub fn explicit_predictions(&self) -> Option<&[usize]> {
        self.y_pred.as_deref()
    }

    pub fn has_scores(&self) -> bool {
        self.y_score.is_some()
    }

    /// Hard predictions: the explicit ones when present, otherwise the
    /// per-row argmax of the scores (ties go to the lowest class index).
    pub fn predictions(&self) -> Cow<'_, [usize]> {
        match (&self.y_pred, &self.y_score) {
            (Some(p), _) => Cow::Borrowed(p),
            (None, Some(_)) => Cow::Owned(self.score_rows().map(argmax).collect()),
            (None, None) => unreachable!("validated data always carries predictions"),
        }
    }

    pub fn score_row(&self, i: usize) -> Option<&[f64]> {
        let k = self.n_classes();
        self.y_score.as_ref().map(|s| &s[i * k..(i + 1) * k])
    }

    /// Iterates score rows. Empty when no scores are present.
    pub fn score_rows(&self) -> impl Iterator<Item = &[f64]> {
        self.y_score
            .as_deref()
            .unwrap_or(&[])
            .chunks_exact(self.n_classes())
    }

    /// Flat row-major score matrix.
    pub fn scores(&self) -> Option<&[f64]> {
        self.y_score.as_deref()
    }

    /// Scores of a single class column.
    pub fn class_scores(&self, class: usize) -> Option<Vec<f64>> {
        self.y_score.as_ref()?;
        Some(self.score_rows().map(|row| row[class]).collect())
    }

    /// Rows at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        let k = self.n_classes();
        let y_true = indices.iter().map(|&i| self.y_true[i]).collect();
        let y_pred = self
            .y_pred
            .as_ref()
            .map(|p| indices.iter().map(|&i| p[i]).collect());
        let y_score = self.y_score.as_ref().map(|s| {
            indices
                .iter()
                .flat_map(|&i| s[i * k..(i + 1) * k].iter().copied())
                .collect()
        });
        Self::from_indices(self.labels.clone(), y_true, y_pred, y_score)
    }

    /// Copy with hard predictions and scores replaced.
    pub fn with_predictions(
        &self,
        y_pred: Option<Vec<usize>>,
        y_score: Option<Vec<f64>>,
    ) -> Result<Self> {
        Self::from_indices(self.labels.clone(), self.y_true.clone(), y_pred, y_score)
    }

    pub fn true_names(&self) -> impl Iterator<Item = &str> {
        self.y_true.iter().map(|&i| self.labels.name(i))
    }
}

/// Lowest index of the largest entry.
pub fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate().skip(1) {
        if v > row[best] {
            best = i;
        }
    }
    best
}

fn normalize_row(row: usize, chunk: &mut [f64]) -> Result<()> {
    let mut sum = 0.0;
    for &v in chunk.iter() {
        if !v.is_finite() || !(0.0..=1.0).contains(&v) {
            return Err(Error::ScoreOutOfRange { row, value: v });
        }
        sum += v;
    }
    let deviation = (sum - 1.0).abs();
    if deviation > ROW_SUM_TOLERANCE {
        return Err(Error::ScoreRowNotNormalized { row, sum });
    }
    // Rows already equal to 1 up to summation rounding stay bit-identical.
    if deviation > chunk.len() as f64 * f64::EPSILON {
        chunk.iter_mut().for_each(|v| *v /= sum);
    }
    Ok(())
}

/// Validated regression prediction set.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionData {
    y_true: Vec<f64>,
    y_pred: Vec<f64>,
}

impl RegressionData {
    pub fn new(y_true: Vec<f64>, y_pred: Vec<f64>) -> Result<Self> {
        if y_true.is_empty() {
            return Err(Error::EmptyInput);
        }
        if y_true.len() != y_pred.len() {
            return Err(Error::LengthMismatch {
                what: "y_pred",
                expected: y_true.len(),
                found: y_pred.len(),
            });
        }
        if let Some(i) = y_true
            .iter()
            .zip(&y_pred)
            .position(|(a, b)| !a.is_finite() || !b.is_finite())
        {
            return Err(Error::NonFiniteValue(i));
        }
        Ok(Self { y_true, y_pred })
    }

    pub fn y_true(&self) -> &[f64] {
        &self.y_true
    }

    pub fn y_pred(&self) -> &[f64] {
        &self.y_pred
    }

    pub fn len(&self) -> usize {
        self.y_true.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y_true.is_empty()
    }

    /// Residuals `y_true − y_pred`; positive means underprediction.
    pub fn residuals(&self) -> impl Iterator<Item = f64> + '_ {
        self.y_true.iter().zip(&self.y_pred).map(|(y, p)| y - p)
    }

    pub fn mean_target(&self) -> f64 {
        self.y_true.iter().sum::<f64>() / self.len() as f64
    }

    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        Self::new(
            indices.iter().map(|&i| self.y_true[i]).collect(),
            indices.iter().map(|&i| self.y_pred[i]).collect(),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ab() -> LabelSpace {
        LabelSpace::new(["a", "b"]).unwrap()
    }

    fn strings(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn accepts_well_formed() {
        let raw = RawClassification {
            y_true: strings(&["a", "b"]),
            y_pred: Some(strings(&["a", "b"])),
            y_score: None,
        };
        let data = validate_classification(ab(), raw).unwrap();
        assert_eq!(data.y_true(), &[0, 1]);
        assert_eq!(&*data.predictions(), &[0, 1]);
    }

    #[test]
    fn rejects_unnormalized_row() {
        let raw = RawClassification {
            y_true: strings(&["a"]),
            y_pred: None,
            y_score: Some(vec![vec![0.7, 0.7]]),
        };
        assert!(matches!(
            validate_classification(ab(), raw),
            Err(Error::ScoreRowNotNormalized { row: 0, .. })
        ));
    }

    #[test]
    fn rejects_unknown_label() {
        let raw = RawClassification {
            y_true: strings(&["a", "c"]),
            y_pred: Some(strings(&["a", "b"])),
            y_score: None,
        };
        assert_eq!(
            validate_classification(ab(), raw),
            Err(Error::UnknownLabel("c".into()))
        );
    }

    #[test]
    fn rejects_missing_predictions_and_mismatched_lengths() {
        let raw = RawClassification {
            y_true: strings(&["a"]),
            ..Default::default()
        };
        assert_eq!(validate_classification(ab(), raw), Err(Error::NoPredictions));
        let raw = RawClassification {
            y_true: strings(&["a", "b"]),
            y_pred: Some(strings(&["a"])),
            y_score: None,
        };
        assert!(matches!(
            validate_classification(ab(), raw),
            Err(Error::LengthMismatch { .. })
        ));
    }

    #[test]
    fn renormalizes_rows_within_tolerance() {
        let raw = RawClassification {
            y_true: strings(&["a"]),
            y_pred: None,
            y_score: Some(vec![vec![0.6, 0.4000005]]),
        };
        let data = validate_classification(ab(), raw).unwrap();
        let row = data.score_row(0).unwrap();
        assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn argmax_ties_go_low() {
        assert_eq!(argmax(&[0.4, 0.4, 0.2]), 0);
        assert_eq!(argmax(&[0.2, 0.4, 0.4]), 1);
    }

    #[test]
    fn label_space_invariants() {
        assert!(LabelSpace::new(["a"]).is_err());
        assert!(LabelSpace::new(["a", "a"]).is_err());
        assert!(ab().with_positive("z").is_err());
        let bin = LabelSpace::binary("0", "1").unwrap();
        assert_eq!(bin.positive_index(), Some(1));
        let multi = LabelSpace::new(["x", "y", "z"]).unwrap();
        assert_eq!(multi.positive_index(), None);
    }

    #[test]
    fn regression_rejects_non_finite() {
        assert_eq!(
            RegressionData::new(vec![1.0, f64::NAN], vec![1.0, 2.0]),
            Err(Error::NonFiniteValue(1))
        );
        assert_eq!(RegressionData::new(vec![], vec![]), Err(Error::EmptyInput));
    }
}
