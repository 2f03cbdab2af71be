//! Synthetic prediction populations for the pitfall regimes, and the
//! reference baseline predictors they are compared against.
//!
//! Generators are pure functions of their parameters and seed.

use rand::Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::{ClassificationData, LabelSpace, RegressionData};
use crate::error::{Error, Result};
use crate::validate::rng;

const STOCHASTIC_TOLERANCE: f64 = 1e-9;

fn out_of_range(name: &'static str, reason: impl Into<String>) -> Error {
    Error::ParameterOutOfRange {
        name,
        reason: reason.into(),
    }
}

fn check_n(n: usize) -> Result<()> {
    if n == 0 {
        return Err(out_of_range("n", "at least one sample is required"));
    }
    Ok(())
}

fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Binary labels with calibrated positive-class probabilities.
///
/// Negatives draw a latent `z ~ N(0, 1)`, positives `z ~ N(d, 1)`. The
/// emitted probability is the exact posterior
/// `logistic(d·z + logit(π) − d²/2)`, so the scores are calibrated and the
/// population ROC AUC is `Φ(d/√2)`. Classes are `["0", "1"]`, positive `"1"`.
pub fn gen_binary_scores(
    n: usize,
    prevalence: f64,
    separation: f64,
    seed: u64,
) -> Result<ClassificationData> {
    check_n(n)?;
    if !(prevalence > 0.0 && prevalence < 1.0) {
        return Err(out_of_range("prevalence", format!("must lie in (0, 1), got {prevalence}")));
    }
    if !(separation >= 0.0) || !separation.is_finite() {
        return Err(out_of_range("separation", format!("must be ≥ 0, got {separation}")));
    }
    let mut rng = rng(seed);
    let slope = separation;
    let intercept = (prevalence / (1.0 - prevalence)).ln() - separation * separation / 2.0;
    let mut y_true = Vec::with_capacity(n);
    let mut scores = Vec::with_capacity(2 * n);
    for _ in 0..n {
        let positive = rng.random::<f64>() < prevalence;
        let noise: f64 = rng.sample(StandardNormal);
        let z = if positive { separation + noise } else { noise };
        let p = logistic(slope * z + intercept);
        y_true.push(usize::from(positive));
        scores.push(1.0 - p);
        scores.push(p);
    }
    ClassificationData::from_indices(LabelSpace::binary("0", "1")?, y_true, None, Some(scores))
}

/// Replaces each probability row by `softmax(ln p / t)`.
///
/// `t < 1` sharpens, `t > 1` flattens; the row argmax never changes. `t = 1`
/// returns the input unchanged.
pub fn apply_temperature(data: &ClassificationData, t: f64) -> Result<ClassificationData> {
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::NonPositiveTemperature(t));
    }
    let scores = data.scores().ok_or(Error::MissingScores)?;
    if t == 1.0 {
        return Ok(data.clone());
    }
    let k = data.n_classes();
    let mut out = Vec::with_capacity(scores.len());
    for row in scores.chunks_exact(k) {
        let max = row.iter().copied().fold(0.0, f64::max);
        let weights: Vec<f64> = row
            .iter()
            .map(|&p| if p == 0.0 { 0.0 } else { ((p.ln() - max.ln()) / t).exp() })
            .collect();
        let total: f64 = weights.iter().sum();
        out.extend(weights.iter().map(|w| w / total));
    }
    data.with_predictions(data.explicit_predictions().map(<[usize]>::to_vec), Some(out))
}

fn check_stochastic(v: &[f64], what: &'static str) -> Result<()> {
    let sum: f64 = v.iter().sum();
    if v.iter().any(|&x| !(x >= 0.0) || !x.is_finite()) || (sum - 1.0).abs() > STOCHASTIC_TOLERANCE
    {
        return Err(Error::NotStochastic(what));
    }
    Ok(())
}

fn sample_index<R: Rng>(rng: &mut R, weights: &[f64]) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, &w) in weights.iter().enumerate() {
        acc += w;
        if u < acc {
            return i;
        }
    }
    // Rounding can leave the cumulative sum just below 1.
    weights.iter().rposition(|&w| w > 0.0).unwrap_or(0)
}

/// Multiclass hard predictions through a noisy channel.
///
/// The true class is drawn from `prevalences`; the prediction from the
/// `confusion` row of the true class (row-major `K × K`, row-stochastic).
/// Classes are `"0".."K-1"`.
pub fn gen_multiclass(
    n: usize,
    prevalences: &[f64],
    confusion: &[f64],
    seed: u64,
) -> Result<ClassificationData> {
    check_n(n)?;
    let k = prevalences.len();
    if k < 2 {
        return Err(out_of_range("prevalences", "need at least two classes"));
    }
    if confusion.len() != k * k {
        return Err(Error::LengthMismatch {
            what: "confusion",
            expected: k * k,
            found: confusion.len(),
        });
    }
    check_stochastic(prevalences, "prevalences")?;
    for row in confusion.chunks_exact(k) {
        check_stochastic(row, "confusion row")?;
    }
    let mut rng = rng(seed);
    let mut y_true = Vec::with_capacity(n);
    let mut y_pred = Vec::with_capacity(n);
    for _ in 0..n {
        let t = sample_index(&mut rng, prevalences);
        let p = sample_index(&mut rng, &confusion[t * k..(t + 1) * k]);
        y_true.push(t);
        y_pred.push(p);
    }
    let labels = LabelSpace::new((0..k).map(|i| i.to_string()))?;
    ClassificationData::from_indices(labels, y_true, Some(y_pred), None)
}

/// Population micro-F1 and macro-F1 of the [`gen_multiclass`] channel,
/// computed from expected counts `π_i · C_ij`.
pub fn expected_f1(prevalences: &[f64], confusion: &[f64]) -> (f64, f64) {
    let k = prevalences.len();
    let cell = |i: usize, j: usize| prevalences[i] * confusion[i * k + j];
    let micro: f64 = (0..k).map(|i| cell(i, i)).sum();
    let mut macro_sum = 0.0;
    let mut used = 0;
    for (c, &actual) in prevalences.iter().enumerate() {
        if actual == 0.0 {
            continue;
        }
        let tp = cell(c, c);
        let predicted: f64 = (0..k).map(|i| cell(i, c)).sum();
        macro_sum += if predicted + actual == 0.0 {
            0.0
        } else {
            2.0 * tp / (predicted + actual)
        };
        used += 1;
    }
    (micro, macro_sum / used as f64)
}

/// Zero predictions against a Gaussian scale mixture of targets.
///
/// Each residual is `N(0, 1)` with probability `1 − φ` and `N(0, s²)` with
/// probability `φ`; it is written into `y_true` while `y_pred ≡ 0`.
pub fn gen_heavy_tail_regression(
    n: usize,
    outlier_fraction: f64,
    outlier_scale: f64,
    seed: u64,
) -> Result<RegressionData> {
    check_n(n)?;
    if !(0.0..1.0).contains(&outlier_fraction) {
        return Err(out_of_range(
            "outlier_fraction",
            format!("must lie in [0, 1), got {outlier_fraction}"),
        ));
    }
    if !(outlier_scale > 1.0) || !outlier_scale.is_finite() {
        return Err(out_of_range(
            "outlier_scale",
            format!("must exceed 1, got {outlier_scale}"),
        ));
    }
    let mut rng = rng(seed);
    let y_true = (0..n)
        .map(|_| {
            let outlier = rng.random::<f64>() < outlier_fraction;
            let z: f64 = rng.sample(StandardNormal);
            if outlier {
                z * outlier_scale
            } else {
                z
            }
        })
        .collect();
    RegressionData::new(y_true, vec![0.0; n])
}

/// Count targets from a two-rate Poisson mixture with unit Gaussian
/// prediction noise.
///
/// `y ~ Poisson(low_rate)` with probability `ρ`, else `Poisson(high_rate)`;
/// `ŷ = y + N(0, 1)`.
pub fn gen_low_baseline_counts(
    n: usize,
    low_rate: f64,
    high_rate: f64,
    low_mix: f64,
    seed: u64,
) -> Result<RegressionData> {
    check_n(n)?;
    if !(low_rate >= 0.0 && low_rate < high_rate) || !high_rate.is_finite() {
        return Err(out_of_range(
            "low_rate",
            format!("need 0 ≤ low_rate < high_rate, got {low_rate} and {high_rate}"),
        ));
    }
    if !(low_mix > 0.0 && low_mix < 1.0) {
        return Err(out_of_range("low_mix", format!("must lie in (0, 1), got {low_mix}")));
    }
    let poisson = |rate: f64| -> Result<Option<Poisson<f64>>> {
        if rate == 0.0 {
            Ok(None)
        } else {
            Poisson::new(rate)
                .map(Some)
                .map_err(|e| out_of_range("rate", e.to_string()))
        }
    };
    let low = poisson(low_rate)?;
    let high = poisson(high_rate)?;
    let mut rng = rng(seed);
    let mut y_true = Vec::with_capacity(n);
    let mut y_pred = Vec::with_capacity(n);
    for _ in 0..n {
        let dist = if rng.random::<f64>() < low_mix { &low } else { &high };
        let y = dist.as_ref().map_or(0.0, |d| d.sample(&mut rng));
        let noise: f64 = rng.sample(StandardNormal);
        y_true.push(y);
        y_pred.push(y + noise);
    }
    RegressionData::new(y_true, y_pred)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineKind {
    MajorityClass,
    PriorSampler,
    MeanRegressor,
}

fn training_prevalences(train: &ClassificationData) -> Vec<f64> {
    let mut counts = vec![0usize; train.n_classes()];
    for &t in train.y_true() {
        counts[t] += 1;
    }
    counts
        .iter()
        .map(|&c| c as f64 / train.len() as f64)
        .collect()
}

/// Classification baselines fitted on `train` and applied to `eval`.
///
/// Both baselines emit the training prevalences as their score rows;
/// `MajorityClass` predicts the modal training class (lowest index on ties)
/// and `PriorSampler` draws labels from the prevalences with `seed`.
pub fn baseline_classify(
    kind: BaselineKind,
    train: &ClassificationData,
    eval: &ClassificationData,
    seed: u64,
) -> Result<ClassificationData> {
    if train.is_empty() {
        return Err(Error::EmptyTraining);
    }
    if train.labels() != eval.labels() {
        return Err(Error::InvalidLabelSpace(
            "training and evaluation label spaces differ".into(),
        ));
    }
    let prev = training_prevalences(train);
    let n = eval.len();
    let y_pred = match kind {
        BaselineKind::MajorityClass => vec![crate::data::argmax(&prev); n],
        BaselineKind::PriorSampler => {
            let mut rng = rng(seed);
            (0..n).map(|_| sample_index(&mut rng, &prev)).collect()
        }
        BaselineKind::MeanRegressor => {
            return Err(out_of_range("kind", "mean_regressor needs regression data"))
        }
    };
    let scores = prev.iter().copied().cycle().take(n * prev.len()).collect();
    eval.with_predictions(Some(y_pred), Some(scores))
}

/// Predicts the training-target mean for every evaluation row.
pub fn baseline_regress(train: &RegressionData, eval: &RegressionData) -> Result<RegressionData> {
    if train.is_empty() {
        return Err(Error::EmptyTraining);
    }
    let mean = train.mean_target();
    RegressionData::new(eval.y_true().to_vec(), vec![mean; eval.len()])
}

/// Parameters of a synthetic regime. `n` and `seed` live on [`RegimeSpec`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RegimeKind {
    ImbalancedBinary {
        prevalence: f64,
        separation: f64,
    },
    /// Calibrated binary scores sharpened or flattened by `temperature`.
    Miscalibrated {
        prevalence: f64,
        separation: f64,
        temperature: f64,
    },
    MulticlassSkew {
        prevalences: Vec<f64>,
        /// Row-stochastic, one row per true class.
        confusion: Vec<Vec<f64>>,
    },
    HeavyTailRegression {
        outlier_fraction: f64,
        outlier_scale: f64,
    },
    LowBaselineCounts {
        low_rate: f64,
        high_rate: f64,
        low_mix: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegimeSpec {
    #[serde(flatten)]
    pub kind: RegimeKind,
    pub n: usize,
    #[serde(default)]
    pub seed: u64,
}

/// Generated data of either task.
#[derive(Debug, Clone, PartialEq)]
pub enum Generated {
    Classification(ClassificationData),
    Regression(RegressionData),
}

impl RegimeSpec {
    pub fn generate(&self) -> Result<Generated> {
        let (n, seed) = (self.n, self.seed);
        Ok(match &self.kind {
            RegimeKind::ImbalancedBinary {
                prevalence,
                separation,
            } => Generated::Classification(gen_binary_scores(n, *prevalence, *separation, seed)?),
            RegimeKind::Miscalibrated {
                prevalence,
                separation,
                temperature,
            } => {
                let base = gen_binary_scores(n, *prevalence, *separation, seed)?;
                Generated::Classification(apply_temperature(&base, *temperature)?)
            }
            RegimeKind::MulticlassSkew {
                prevalences,
                confusion,
            } => {
                if confusion.iter().any(|r| r.len() != prevalences.len()) {
                    return Err(Error::NotStochastic("confusion matrix shape"));
                }
                let flat: Vec<f64> = confusion.iter().flatten().copied().collect();
                Generated::Classification(gen_multiclass(n, prevalences, &flat, seed)?)
            }
            RegimeKind::HeavyTailRegression {
                outlier_fraction,
                outlier_scale,
            } => Generated::Regression(gen_heavy_tail_regression(
                n,
                *outlier_fraction,
                *outlier_scale,
                seed,
            )?),
            RegimeKind::LowBaselineCounts {
                low_rate,
                high_rate,
                low_mix,
            } => Generated::Regression(gen_low_baseline_counts(
                n, *low_rate, *high_rate, *low_mix, seed,
            )?),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classify::{accuracy, build_confusion, log_loss, mcc};
    use crate::rank::{binary_scores, roc_auc, roc_curve};
    use crate::regress::{mae, r_squared, rmse};

    fn auc(data: &ClassificationData) -> f64 {
        let (mask, scores) = binary_scores(data).unwrap();
        roc_auc(&roc_curve(&mask, &scores, &true).unwrap()).unwrap()
    }

    #[test]
    fn no_separation_is_chance() {
        let d = gen_binary_scores(10_000, 0.5, 0.0, 11).unwrap();
        assert!((auc(&d) - 0.5).abs() < 0.02);
    }

    #[test]
    fn prevalence_concentration() {
        let n = 10_000.0;
        let d = gen_binary_scores(10_000, 0.05, 1.0, 5).unwrap();
        let pos = d.y_true().iter().filter(|&&t| t == 1).count() as f64;
        assert!((pos - 500.0).abs() <= 3.0 * (n * 0.05 * 0.95f64).sqrt());
    }

    #[test]
    fn generators_are_deterministic() {
        assert_eq!(
            gen_binary_scores(500, 0.2, 1.0, 4).unwrap(),
            gen_binary_scores(500, 0.2, 1.0, 4).unwrap()
        );
        assert_ne!(
            gen_binary_scores(500, 0.2, 1.0, 4).unwrap(),
            gen_binary_scores(500, 0.2, 1.0, 5).unwrap()
        );
        assert_eq!(
            gen_heavy_tail_regression(300, 0.1, 5.0, 2).unwrap(),
            gen_heavy_tail_regression(300, 0.1, 5.0, 2).unwrap()
        );
    }

    #[test]
    fn generator_parameter_checks() {
        assert!(gen_binary_scores(10, 0.0, 1.0, 0).is_err());
        assert!(gen_binary_scores(10, 0.5, -1.0, 0).is_err());
        assert!(gen_heavy_tail_regression(10, 1.0, 5.0, 0).is_err());
        assert!(gen_heavy_tail_regression(10, 0.1, 1.0, 0).is_err());
        assert!(gen_low_baseline_counts(10, 2.0, 1.0, 0.5, 0).is_err());
        assert!(gen_low_baseline_counts(10, 0.1, 1.0, 1.0, 0).is_err());
        assert_eq!(
            gen_multiclass(10, &[0.5, 0.6], &[1.0, 0.0, 0.0, 1.0], 0),
            Err(Error::NotStochastic("prevalences"))
        );
        assert_eq!(
            gen_multiclass(10, &[0.5, 0.5], &[0.9, 0.0, 0.0, 1.0], 0),
            Err(Error::NotStochastic("confusion row"))
        );
    }

    #[test]
    fn temperature_identity_and_argmax() {
        let d = gen_binary_scores(2_000, 0.3, 1.0, 8).unwrap();
        assert_eq!(apply_temperature(&d, 1.0).unwrap(), d);
        for t in [0.1, 0.25, 2.0, 10.0] {
            let s = apply_temperature(&d, t).unwrap();
            assert_eq!(s.predictions(), d.predictions());
        }
        assert_eq!(
            apply_temperature(&d, 0.0),
            Err(Error::NonPositiveTemperature(0.0))
        );
    }

    #[test]
    fn sharpening_increases_log_loss() {
        let d = gen_binary_scores(10_000, 0.3, 1.0, 21).unwrap();
        let sharp = apply_temperature(&d, 0.25).unwrap();
        assert!(log_loss(&sharp).unwrap() > log_loss(&d).unwrap());
    }

    #[test]
    fn identity_channel_is_perfect() {
        let d = gen_multiclass(1_000, &[0.5, 0.3, 0.2], &[1., 0., 0., 0., 1., 0., 0., 0., 1.], 1)
            .unwrap();
        assert_eq!(accuracy(&build_confusion(&d)), 1.0);
        assert_eq!(expected_f1(&[0.5, 0.3, 0.2], &[1., 0., 0., 0., 1., 0., 0., 0., 1.]), (1.0, 1.0));
    }

    #[test]
    fn expected_f1_skewed_direction() {
        let prev = [0.9, 0.05, 0.05];
        let conf = [0.95, 0.025, 0.025, 0.5, 0.5, 0.0, 0.5, 0.0, 0.5];
        let (micro, macro_) = expected_f1(&prev, &conf);
        // micro = 0.855 + 0.025 + 0.025
        assert!((micro - 0.905).abs() < 1e-12);
        assert!(macro_ < micro);
    }

    #[test]
    fn majority_baseline_on_skewed_data() {
        let d = gen_binary_scores(10_000, 0.05, 1.0, 3).unwrap();
        let base = baseline_classify(BaselineKind::MajorityClass, &d, &d, 0).unwrap();
        let cm = build_confusion(&base);
        let prevalence0 = d.y_true().iter().filter(|&&t| t == 0).count() as f64 / 10_000.0;
        assert_eq!(accuracy(&cm), prevalence0);
        let m = mcc(&cm).unwrap();
        assert_eq!(m.value, 0.0);
        assert!(!m.is_clean());
    }

    #[test]
    fn prior_sampler_matching_probability() {
        let d = gen_binary_scores(20_000, 0.5, 1.0, 13).unwrap();
        let base = baseline_classify(BaselineKind::PriorSampler, &d, &d, 99).unwrap();
        assert!((accuracy(&build_confusion(&base)) - 0.5).abs() < 0.02);
    }

    #[test]
    fn mean_regressor_on_its_training_set() {
        let d = gen_heavy_tail_regression(1_000, 0.05, 4.0, 6).unwrap();
        let shifted =
            RegressionData::new(d.y_true().to_vec(), d.y_true().iter().map(|y| y + 1.0).collect())
                .unwrap();
        let base = baseline_regress(&shifted, &shifted).unwrap();
        assert!(r_squared(&base).unwrap().abs() < 1e-12);
        assert!(rmse(&base) >= mae(&base));
    }

    #[test]
    fn poisson_zero_mass() {
        let n = 100_000;
        let d = gen_low_baseline_counts(n, 0.1, 20.0, 0.3, 17).unwrap();
        let zeros = d.y_true().iter().filter(|&&y| y == 0.0).count() as f64 / n as f64;
        let expected = 0.3 * (-0.1f64).exp();
        let se = (expected * (1.0 - expected) / n as f64).sqrt();
        assert!((zeros - expected).abs() < 3.0 * se, "{zeros} vs {expected}");
    }

    #[test]
    fn regime_spec_round_trips_through_serde_shape() {
        let spec = RegimeSpec {
            kind: RegimeKind::ImbalancedBinary {
                prevalence: 0.05,
                separation: 1.5,
            },
            n: 100,
            seed: 1,
        };
        assert!(matches!(spec.generate().unwrap(), Generated::Classification(_)));
    }
}
