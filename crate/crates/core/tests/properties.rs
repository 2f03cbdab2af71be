use metricsmith_core::classify::{
    accuracy, averaged_f_beta, build_confusion, class_rates, f_beta, log_loss, mcc,
    mcc_from_counts, Averaging, BinaryCounts, ConfusionMatrix,
};
use metricsmith_core::data::{validate_classification, RawClassification};
use metricsmith_core::rank::{pr_auc, pr_curve, roc_auc, roc_curve, tune_threshold, TuningObjective};
use metricsmith_core::regress::{mae, r_squared, rmse};
use metricsmith_core::validate::{holdout_split, kfold, stratified_kfold};
use metricsmith_core::{aggregate_folds, ClassificationData, Error, LabelSpace, RegressionData};
use proptest::prelude::*;

/// Brute-force pair statistic: positives ranked above negatives, ties count ½.
fn mann_whitney(labels: &[bool], scores: &[f64]) -> f64 {
    let mut wins = 0.0;
    let mut pairs = 0.0;
    for (i, &li) in labels.iter().enumerate() {
        if !li {
            continue;
        }
        for (j, &lj) in labels.iter().enumerate() {
            if lj {
                continue;
            }
            pairs += 1.0;
            if scores[i] > scores[j] {
                wins += 1.0;
            } else if scores[i] == scores[j] {
                wins += 0.5;
            }
        }
    }
    wins / pairs
}

fn both_classes(labels: &[bool]) -> bool {
    labels.iter().any(|&l| l) && labels.iter().any(|&l| !l)
}

fn labelled_scores(max: usize) -> impl Strategy<Value = (Vec<bool>, Vec<f64>)> {
    (2..=max)
        .prop_flat_map(|n| {
            (
                prop::collection::vec(any::<bool>(), n),
                // Coarse grid so ties are frequent.
                prop::collection::vec((0u32..20).prop_map(|v| v as f64 / 20.0), n),
            )
        })
        .prop_filter("both classes", |(l, _)| both_classes(l))
}

fn multiclass(max_k: usize, max_n: usize) -> impl Strategy<Value = ClassificationData> {
    (2..=max_k, 1..=max_n).prop_flat_map(|(k, n)| {
        (
            prop::collection::vec(0..k, n),
            prop::collection::vec(0..k, n),
        )
            .prop_map(move |(t, p)| {
                let labels = LabelSpace::new((0..k).map(|i| format!("c{i}"))).unwrap();
                ClassificationData::from_indices(labels, t, Some(p), None).unwrap()
            })
    })
}

fn binary_counts() -> impl Strategy<Value = BinaryCounts> {
    (0u64..50, 0u64..50, 0u64..50, 0u64..50).prop_map(|(tp, fp, fn_, tn)| BinaryCounts {
        tp,
        fp,
        fn_,
        tn,
    })
}

fn regression(max: usize) -> impl Strategy<Value = RegressionData> {
    (1..=max).prop_flat_map(|n| {
        (
            prop::collection::vec(-100.0f64..100.0, n),
            prop::collection::vec(-100.0f64..100.0, n),
        )
            .prop_map(|(y, p)| RegressionData::new(y, p).unwrap())
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn roc_auc_matches_pair_statistic((labels, scores) in labelled_scores(200)) {
        let auc = roc_auc(&roc_curve(&labels, &scores, &true).unwrap()).unwrap();
        prop_assert!((auc - mann_whitney(&labels, &scores)).abs() < 1e-12);
    }

    #[test]
    fn roc_auc_invariant_under_increasing_maps((labels, scores) in labelled_scores(100)) {
        let base = roc_auc(&roc_curve(&labels, &scores, &true).unwrap()).unwrap();
        let transforms: [fn(f64) -> f64; 3] = [f64::exp, |x| 3.0 * x - 7.0, |x| x * x * x];
        for t in transforms {
            let mapped: Vec<f64> = scores.iter().map(|&s| t(s)).collect();
            let auc = roc_auc(&roc_curve(&labels, &mapped, &true).unwrap()).unwrap();
            prop_assert!((auc - base).abs() < 1e-12);
        }
    }

    #[test]
    fn roc_curve_shape((labels, scores) in labelled_scores(60)) {
        let c = roc_curve(&labels, &scores, &true).unwrap();
        let first = c.points[0];
        let last = *c.points.last().unwrap();
        prop_assert_eq!((first.x, first.y), (0.0, 0.0));
        prop_assert!(first.threshold.is_infinite());
        prop_assert_eq!((last.x, last.y), (1.0, 1.0));
        for w in c.points.windows(2) {
            prop_assert!(w[1].x >= w[0].x && w[1].y >= w[0].y);
            prop_assert!(w[1].threshold < w[0].threshold);
        }
    }

    #[test]
    fn pr_auc_bounds_and_perfection((labels, scores) in labelled_scores(60)) {
        let area = pr_auc(&pr_curve(&labels, &scores, &true).unwrap()).unwrap();
        prop_assert!((0.0..=1.0 + 1e-12).contains(&area));
        let min_pos = labels.iter().zip(&scores).filter(|(l, _)| **l).map(|(_, s)| *s).fold(f64::INFINITY, f64::min);
        let max_neg = labels.iter().zip(&scores).filter(|(l, _)| !**l).map(|(_, s)| *s).fold(f64::NEG_INFINITY, f64::max);
        let perfect = min_pos > max_neg;
        prop_assert_eq!((area - 1.0).abs() < 1e-12, perfect);
    }

    #[test]
    fn pr_auc_of_constant_scores_is_prevalence(labels in prop::collection::vec(any::<bool>(), 1..80)) {
        prop_assume!(labels.iter().any(|&l| l));
        let scores = vec![0.3; labels.len()];
        let prevalence = labels.iter().filter(|&&l| l).count() as f64 / labels.len() as f64;
        let area = pr_auc(&pr_curve(&labels, &scores, &true).unwrap()).unwrap();
        prop_assert!((area - prevalence).abs() < 1e-15);
    }

    #[test]
    fn tuned_f_beta_dominates_every_candidate((labels, scores) in labelled_scores(100), beta in 0.25f64..4.0) {
        let op = tune_threshold(&labels, &scores, &true, TuningObjective::MaxFBeta(beta)).unwrap();
        let best = op.f_beta.unwrap();
        for &t in &scores {
            let tp = labels.iter().zip(&scores).filter(|(l, s)| **l && **s >= t).count() as f64;
            let pred = scores.iter().filter(|&&s| s >= t).count() as f64;
            let pos = labels.iter().filter(|&&l| l).count() as f64;
            let (p, r) = (tp / pred, tp / pos);
            let f = if p + r == 0.0 { 0.0 } else { (1.0 + beta * beta) * p * r / (beta * beta * p + r) };
            prop_assert!(best >= f - 1e-12);
        }
    }

    #[test]
    fn recall_floor_is_met((labels, scores) in labelled_scores(100), target in 0.05f64..=1.0) {
        let op = tune_threshold(&labels, &scores, &true, TuningObjective::MinRecall(target)).unwrap();
        prop_assert!(op.recall >= target);
    }

    #[test]
    fn classification_metric_ranges(data in multiclass(5, 60)) {
        let cm = build_confusion(&data);
        let acc = accuracy(&cm);
        prop_assert!((0.0..=1.0).contains(&acc));
        for c in data.labels().classes() {
            let r = class_rates(&cm, c).unwrap();
            prop_assert!((0.0..=1.0).contains(&r.precision) && (0.0..=1.0).contains(&r.recall));
        }
        for mode in [Averaging::Micro, Averaging::Macro] {
            let v = averaged_f_beta(&cm, 1.0, mode).unwrap().value;
            prop_assert!((0.0..=1.0).contains(&v));
        }
    }

    #[test]
    fn micro_f1_is_accuracy(data in multiclass(8, 80)) {
        let cm = build_confusion(&data);
        let micro = averaged_f_beta(&cm, 1.0, Averaging::Micro).unwrap().value;
        prop_assert!((micro - accuracy(&cm)).abs() < 1e-12);
    }

    #[test]
    fn f_beta_shape(p in 0.0f64..=1.0, r in 0.0f64..=1.0, dp in 0.0f64..0.5, beta in 0.1f64..5.0) {
        let f = |p, r, b| f_beta(p, r, b).unwrap().value;
        prop_assert!((f(p, r, 1.0) - f(r, p, 1.0)).abs() < 1e-15);
        let v = f(p, r, beta);
        prop_assert!((0.0..=1.0).contains(&v));
        prop_assert!(f((p + dp).min(1.0), r, beta) >= v - 1e-15);
        prop_assert!(f(p, (r + dp).min(1.0), beta) >= v - 1e-15);
    }

    #[test]
    fn f_beta_moves_toward_recall(p in 0.01f64..=1.0, r in 0.01f64..=1.0, b in 0.1f64..4.0, db in 0.1f64..2.0) {
        prop_assume!((p - r).abs() > 1e-6);
        let lo = f_beta(p, r, b).unwrap().value;
        let hi = f_beta(p, r, b + db).unwrap().value;
        if r < p {
            prop_assert!(hi < lo);
        } else {
            prop_assert!(hi > lo);
        }
    }

    #[test]
    fn mcc_range_and_label_swap(c in binary_counts()) {
        let m = mcc_from_counts(c);
        prop_assert!((-1.0..=1.0).contains(&m.value));
        let swapped = mcc_from_counts(BinaryCounts { tp: c.tn, tn: c.tp, fp: c.fn_, fn_: c.fp });
        prop_assert!((m.value - swapped.value).abs() < 1e-12);
        prop_assert_eq!(m.warnings, swapped.warnings);
    }

    #[test]
    fn mcc_zero_for_independent_tables(a in 1u64..20, b in 1u64..20, c in 1u64..20, d in 1u64..20) {
        // Outer product of margins gives TP·TN = FP·FN.
        let counts = BinaryCounts { tp: a * c, fp: b * c, fn_: a * d, tn: b * d };
        let cm = ConfusionMatrix::from_binary_counts(LabelSpace::binary("n", "p").unwrap(), counts).unwrap();
        prop_assert!(mcc(&cm).unwrap().value.abs() < 1e-12);
    }

    #[test]
    fn log_loss_nonnegative(rows in prop::collection::vec(prop::collection::vec(0.0f64..1.0, 3), 1..40), seed in 0usize..3) {
        let mut flat = Vec::new();
        for row in &rows {
            let s: f64 = row.iter().sum::<f64>() + 1e-9;
            flat.extend(row.iter().map(|v| (v + 1e-9 / 3.0) / s));
        }
        let y: Vec<usize> = (0..rows.len()).map(|i| (i + seed) % 3).collect();
        let labels = LabelSpace::new(["a", "b", "c"]).unwrap();
        let d = ClassificationData::from_indices(labels, y, None, Some(flat)).unwrap();
        prop_assert!(log_loss(&d).unwrap() >= 0.0);
    }

    #[test]
    fn rmse_dominates_mae(d in regression(60)) {
        prop_assert!(rmse(&d) >= mae(&d) - 1e-12);
        let negated = RegressionData::new(d.y_pred().to_vec(), d.y_true().to_vec()).unwrap();
        prop_assert!((rmse(&d) - rmse(&negated)).abs() < 1e-12);
        prop_assert!((mae(&d) - mae(&negated)).abs() < 1e-12);
    }

    #[test]
    fn equal_absolute_residuals_give_equal_errors(y in prop::collection::vec(-50.0f64..50.0, 1..40), c in 0.0f64..10.0) {
        let p: Vec<f64> = y.iter().enumerate().map(|(i, v)| if i % 2 == 0 { v + c } else { v - c }).collect();
        let d = RegressionData::new(y, p).unwrap();
        prop_assert!((rmse(&d) - mae(&d)).abs() <= 1e-9 * (1.0 + c));
    }

    #[test]
    fn mae_shift_recomputation(d in regression(40), c in -5.0f64..5.0) {
        let shifted: Vec<f64> = d.y_pred().iter().map(|p| p + c).collect();
        let s = RegressionData::new(d.y_true().to_vec(), shifted).unwrap();
        let oracle = d.residuals().map(|r| (r - c).abs()).sum::<f64>() / d.len() as f64;
        prop_assert!((mae(&s) - oracle).abs() < 1e-9);
    }

    #[test]
    fn mean_predictor_r2_is_zero(y in prop::collection::vec(-100.0f64..100.0, 2..60)) {
        let mean = y.iter().sum::<f64>() / y.len() as f64;
        prop_assume!(y.iter().any(|v| (v - mean).abs() > 1e-6));
        let d = RegressionData::new(y.clone(), vec![mean; y.len()]).unwrap();
        prop_assert!(r_squared(&d).unwrap().abs() < 1e-12);
    }

    #[test]
    fn aggregate_is_permutation_invariant(values in prop::collection::vec(-10.0f64..10.0, 1..30), seed in any::<u64>()) {
        let mut shuffled = values.clone();
        // Deterministic Fisher–Yates with a xorshift stream.
        let mut s = seed | 1;
        for i in (1..shuffled.len()).rev() {
            s ^= s << 13; s ^= s >> 7; s ^= s << 17;
            shuffled.swap(i, (s % (i as u64 + 1)) as usize);
        }
        prop_assert_eq!(aggregate_folds(&values).unwrap(), aggregate_folds(&shuffled).unwrap());
    }

    #[test]
    fn kfold_partitions(n in 10usize..200, k in 2usize..=10, seed in any::<u64>()) {
        let fa = kfold(n, k, seed).unwrap();
        let sizes = fa.fold_sizes();
        prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
        prop_assert!(sizes.iter().all(|&s| s >= 1));
        check_partitions(&fa)?;
    }

    #[test]
    fn stratified_partitions(labels in prop::collection::vec(0u8..4, 10..200), k in 2usize..=10, seed in any::<u64>()) {
        let fa = stratified_kfold(&labels, k, seed).unwrap();
        check_partitions(&fa)?;
        for class in 0u8..4 {
            let per_fold: Vec<usize> = (0..k)
                .map(|f| fa.test_indices(f).iter().filter(|&&i| labels[i] == class).count())
                .collect();
            prop_assert!(per_fold.iter().max().unwrap() - per_fold.iter().min().unwrap() <= 1);
        }
        let sizes = fa.fold_sizes();
        prop_assert!(sizes.iter().all(|&s| s >= 1));
    }

    #[test]
    fn stratified_sizes_ignore_input_order(labels in prop::collection::vec(0u8..3, 10..100), k in 2usize..=5, seed in any::<u64>()) {
        let mut reversed = labels.clone();
        reversed.reverse();
        let multiset = |l: &[u8]| {
            let fa = stratified_kfold(l, k, seed).unwrap();
            let mut per_class: Vec<Vec<usize>> = (0u8..3)
                .map(|c| {
                    let mut v: Vec<usize> = (0..k).map(|f| fa.test_indices(f).iter().filter(|&&i| l[i] == c).count()).collect();
                    v.sort_unstable();
                    v
                })
                .collect();
            per_class.sort();
            per_class
        };
        prop_assert_eq!(multiset(&labels), multiset(&reversed));
    }

    #[test]
    fn holdout_partitions(n in 2usize..300, ratio in 0.01f64..0.99, seed in any::<u64>()) {
        let fa = holdout_split::<u8>(n, ratio, seed, None).unwrap();
        let sizes = fa.fold_sizes();
        prop_assert!(sizes[0] >= 1 && sizes[1] >= 1);
        check_partitions(&fa)?;
    }

    #[test]
    fn validation_accepts_exactly_valid_inputs(
        n in 1usize..20,
        mutation in 0usize..6,
        seed in any::<u64>(),
    ) {
        let classes = ["a", "b", "c"];
        let pick = |i: usize| classes[(seed as usize).wrapping_add(i * 7) % 3].to_string();
        let y_true: Vec<String> = (0..n).map(pick).collect();
        let y_pred: Vec<String> = (0..n).map(|i| pick(i + 1)).collect();
        let scores: Vec<Vec<f64>> = (0..n).map(|_| vec![0.2, 0.3, 0.5]).collect();
        let mut raw = RawClassification { y_true, y_pred: Some(y_pred), y_score: Some(scores) };
        let expect = match mutation {
            0 => None,
            1 => { raw.y_true[n - 1] = "z".into(); Some("unknown") }
            2 => { raw.y_pred.as_mut().unwrap().pop(); Some("length") }
            3 => { raw.y_score.as_mut().unwrap()[0][2] = 0.6; Some("norm") }
            4 => { raw.y_pred = None; raw.y_score = None; Some("none") }
            _ => { raw.y_score.as_mut().unwrap()[0][0] = 0.2 + 5e-7; None }
        };
        let result = validate_classification(LabelSpace::new(classes).unwrap(), raw);
        let ok = match expect {
            None => result.is_ok(),
            Some("unknown") => matches!(result, Err(Error::UnknownLabel(_))),
            Some("length") => matches!(result, Err(Error::LengthMismatch { .. })),
            Some("norm") => matches!(result, Err(Error::ScoreRowNotNormalized { .. })),
            Some(_) => matches!(result, Err(Error::NoPredictions)),
        };
        prop_assert!(ok, "mutation {} gave {:?}", mutation, result.err());
    }
}

fn check_partitions(fa: &metricsmith_core::FoldAssignment) -> Result<(), TestCaseError> {
    for f in 0..fa.k {
        let train = fa.train_indices(f);
        let test = fa.test_indices(f);
        prop_assert_eq!(train.len() + test.len(), fa.n);
        let mut all: Vec<usize> = train.iter().chain(&test).copied().collect();
        all.sort_unstable();
        prop_assert_eq!(all, (0..fa.n).collect::<Vec<_>>());
    }
    Ok(())
}

#[test]
fn distinct_seeds_change_assignments() {
    let labels: Vec<u8> = (0..50).map(|i| (i % 3) as u8).collect();
    let base = stratified_kfold(&labels, 5, 0).unwrap();
    let changed = (1..200u64)
        .filter(|&s| stratified_kfold(&labels, 5, s).unwrap().fold_of != base.fold_of)
        .count();
    assert!(changed >= 198);
}

#[test]
fn confusion_matches_direct_count() {
    let labels = LabelSpace::new(["x", "y", "z"]).unwrap();
    let t = vec![0, 1, 2, 2, 1, 0, 0];
    let p = vec![0, 2, 2, 1, 1, 0, 1];
    let cm = ConfusionMatrix::from_pairs(labels, &t, &p).unwrap();
    for i in 0..3 {
        for j in 0..3 {
            let direct = t.iter().zip(&p).filter(|(a, b)| **a == i && **b == j).count() as u64;
            assert_eq!(cm.get(i, j), direct);
        }
    }
    assert_eq!(cm.counts().iter().sum::<u64>(), 7);
}
