//! The evaluation pipeline behind `evaluate` and `scenario`.

use indexmap::IndexMap;
use metricsmith_core::classify::build_confusion;
use metricsmith_core::diagnose::{
    accuracy_trap_check, imbalance_profile, macro_micro_gap, mape_stability_check,
    ranking_comparison, severe_imbalance_check, Direction, RankingComparison,
};
use metricsmith_core::rank::{binary_scores, pr_curve, roc_curve};
use metricsmith_core::regimes::{
    baseline_classify, baseline_regress, gen_binary_scores, BaselineKind, Generated, RegimeKind,
};
use metricsmith_core::regress::residual_table;
use metricsmith_core::report::MetricFailure;
use metricsmith_core::validate::{cross_validate, holdout_split, kfold, stratified_kfold};
use metricsmith_core::{
    ClassificationData, DiagnosticFlag, EvaluationReport, FlagCode, FoldAssignment, MetricSpec,
    PredictionSet, Severity, Task, Warning,
};
use serde::Serialize;

use crate::config::{baseline_name, Input, ResolvedConfig, Validation};
use crate::error::{CliError, CliResult};
use crate::ingest::parse_predictions;

pub const DEFAULT_K: usize = 5;
pub const RESIDUAL_BINS: usize = 10;

/// Everything a run produces, before emission.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub primary: String,
    /// Primary model first, then reference models, then baselines.
    pub reports: IndexMap<String, EvaluationReport>,
    pub comparisons: Vec<RankingComparison>,
    /// Curve tables of the primary model: file stem → CSV text.
    pub curves: Vec<(String, String)>,
    /// Set in permissive mode when metrics had to be dropped.
    pub infeasible: Option<CliError>,
}

/// The combined document written when a run has more than one model.
#[derive(Debug, Serialize)]
pub struct RunDocument<'a> {
    pub primary: &'a str,
    pub reports: &'a IndexMap<String, EvaluationReport>,
    pub comparisons: &'a [RankingComparison],
}

impl RunOutput {
    pub fn primary_report(&self) -> &EvaluationReport {
        &self.reports[&self.primary]
    }

    pub fn document(&self) -> RunDocument<'_> {
        RunDocument {
            primary: &self.primary,
            reports: &self.reports,
            comparisons: &self.comparisons,
        }
    }
}

type Plan = Vec<(Vec<usize>, Vec<usize>)>;

fn set_positive(data: ClassificationData, positive: Option<&str>) -> CliResult<ClassificationData> {
    let Some(p) = positive else { return Ok(data) };
    let labels = data.labels().clone().with_positive(p).map_err(|_| {
        CliError::usage(format!("positive class `{p}` is not one of the labels"))
    })?;
    let n = data.len();
    let y_pred = data.explicit_predictions().map(<[usize]>::to_vec);
    let scores = data.scores().map(<[f64]>::to_vec);
    ClassificationData::from_indices(labels, data.y_true().to_vec(), y_pred, scores)
        .map_err(|e| CliError::data(format!("{n} rows: {e}")))
}

/// Prediction sets by model id, plus fold ids from the input file.
type Loaded = (IndexMap<String, PredictionSet>, Option<Vec<usize>>);

/// Loads the primary predictions and any reference models.
fn load(cfg: &ResolvedConfig) -> CliResult<Loaded> {
    let mut models = IndexMap::new();
    let positive = cfg.positive_class.as_deref();
    match &cfg.input {
        Input::Path(path) => {
            let ing = parse_predictions(path, cfg.task, positive)?;
            models.insert(cfg.model_id.clone(), ing.data);
            Ok((models, ing.folds))
        }
        Input::Regime(spec) => {
            let bad = |e: metricsmith_core::Error| CliError::usage(format!("regime: {e}"));
            let data = match spec.generate().map_err(bad)? {
                Generated::Classification(d) => PredictionSet::Classification(set_positive(d, positive)?),
                Generated::Regression(d) => PredictionSet::Regression(d),
            };
            models.insert(cfg.model_id.clone(), data);
            if let RegimeKind::Miscalibrated {
                prevalence,
                separation,
                temperature,
            } = spec.kind
            {
                // The untempered scores the miscalibrated model started from.
                if temperature != 1.0 && cfg.model_id != "t=1" {
                    let base = gen_binary_scores(spec.n, prevalence, separation, spec.seed).map_err(bad)?;
                    models.insert(
                        "t=1".to_string(),
                        PredictionSet::Classification(set_positive(base, positive)?),
                    );
                }
            }
            Ok((models, None))
        }
    }
}

fn fold_plan(
    cfg: &ResolvedConfig,
    data: &PredictionSet,
    fold_column: Option<&[usize]>,
) -> CliResult<(Plan, Option<FoldAssignment>)> {
    let n = data.len();
    let split_err = |e: metricsmith_core::Error| CliError::data(format!("cannot split {n} rows: {e}"));
    let class_labels = match data {
        PredictionSet::Classification(d) => Some(d.y_true().to_vec()),
        PredictionSet::Regression(_) => None,
    };
    let validation = cfg.validation.unwrap_or(match (fold_column, cfg.task) {
        (Some(_), _) => Validation::None,
        (None, Task::Classification) => Validation::StratifiedKfold { k: DEFAULT_K },
        (None, Task::Regression) => Validation::Kfold { k: DEFAULT_K },
    });
    let assignment = match validation {
        Validation::None => {
            let plan = match fold_column {
                Some(folds) => {
                    let k = folds.iter().max().map_or(0, |m| m + 1);
                    (0..k)
                        .map(|f| {
                            let (test, train): (Vec<usize>, Vec<usize>) =
                                (0..n).partition(|&i| folds[i] == f);
                            (train, test)
                        })
                        .collect()
                }
                // Baselines are then fitted on the evaluated rows themselves.
                None => vec![((0..n).collect(), (0..n).collect())],
            };
            return Ok((plan, None));
        }
        Validation::Holdout { ratio } => {
            holdout_split(n, ratio, cfg.seed, class_labels.as_deref()).map_err(split_err)?
        }
        Validation::Kfold { k } => kfold(n, k, cfg.seed).map_err(split_err)?,
        Validation::StratifiedKfold { k } => {
            let labels = class_labels.ok_or_else(|| CliError::usage("stratified_kfold needs class labels"))?;
            stratified_kfold(&labels, k, cfg.seed).map_err(split_err)?
        }
    };
    Ok((assignment.evaluation_folds(), Some(assignment)))
}

fn fold_sets(
    data: &PredictionSet,
    plan: &Plan,
    baseline: Option<BaselineKind>,
    seed: u64,
) -> CliResult<Vec<PredictionSet>> {
    let sub = |idx: &[usize]| data.subset(idx).map_err(|e| CliError::data(e.to_string()));
    plan.iter()
        .enumerate()
        .map(|(f, (train, test))| {
            let eval = sub(test)?;
            let Some(kind) = baseline else { return Ok(eval) };
            let fit = sub(train)?;
            let fitted = match (&fit, &eval) {
                (PredictionSet::Classification(tr), PredictionSet::Classification(ev)) => {
                    baseline_classify(kind, tr, ev, seed.wrapping_add(f as u64))
                        .map(PredictionSet::Classification)
                }
                (PredictionSet::Regression(tr), PredictionSet::Regression(ev)) => {
                    baseline_regress(tr, ev).map(PredictionSet::Regression)
                }
                _ => unreachable!("train and test come from one data set"),
            };
            fitted.map_err(|e| CliError::data(format!("baseline {}: {e}", baseline_name(kind))))
        })
        .collect()
}

pub fn default_suite(data: &PredictionSet) -> Vec<MetricSpec> {
    let names: &[&str] = match data {
        PredictionSet::Regression(_) => &["mae", "rmse", "r2", "mape"],
        PredictionSet::Classification(d) => match (d.labels().is_binary(), d.has_scores()) {
            (true, true) => &[
                "accuracy", "precision", "recall", "f1", "mcc", "macro_f1", "roc_auc", "pr_auc", "log_loss",
            ],
            (true, false) => &["accuracy", "precision", "recall", "f1", "mcc", "macro_f1"],
            (false, true) => &["accuracy", "micro_f1", "macro_f1", "log_loss"],
            (false, false) => &["accuracy", "micro_f1", "macro_f1"],
        },
    };
    names.iter().map(|n| n.parse().expect("built-in metric name")).collect()
}

/// Splits the suite into computable metrics and failures.
fn check_feasible(suite: &[MetricSpec], folds: &[PredictionSet]) -> (Vec<MetricSpec>, Vec<MetricFailure>) {
    let mut ok = Vec::new();
    let mut failed = Vec::new();
    for spec in suite {
        match folds.iter().enumerate().find_map(|(i, f)| spec.evaluate(f).err().map(|e| (i, e))) {
            None => ok.push(spec.clone()),
            Some((i, e)) => failed.push(MetricFailure {
                metric: spec.to_string(),
                reason: if folds.len() > 1 { format!("fold {}: {e}", i + 1) } else { e.to_string() },
            }),
        }
    }
    (ok, failed)
}

fn pooled(folds: &[PredictionSet]) -> CliResult<PredictionSet> {
    use metricsmith_core::RegressionData;
    let err = |e: metricsmith_core::Error| CliError::data(e.to_string());
    match &folds[0] {
        PredictionSet::Regression(_) => {
            let (mut y, mut p) = (Vec::new(), Vec::new());
            for f in folds {
                if let PredictionSet::Regression(d) = f {
                    y.extend_from_slice(d.y_true());
                    p.extend_from_slice(d.y_pred());
                }
            }
            Ok(PredictionSet::Regression(RegressionData::new(y, p).map_err(err)?))
        }
        PredictionSet::Classification(first) => {
            let explicit = first.explicit_predictions().is_some();
            let (mut y, mut p, mut s) = (Vec::new(), Vec::new(), Vec::new());
            for f in folds {
                if let PredictionSet::Classification(d) = f {
                    y.extend_from_slice(d.y_true());
                    if let Some(e) = d.explicit_predictions() {
                        p.extend_from_slice(e);
                    }
                    if let Some(sc) = d.scores() {
                        s.extend_from_slice(sc);
                    }
                }
            }
            let data = ClassificationData::from_indices(
                first.labels().clone(),
                y,
                explicit.then_some(p),
                first.has_scores().then_some(s),
            )
            .map_err(err)?;
            Ok(PredictionSet::Classification(data))
        }
    }
}

fn diagnostics(
    cfg: &ResolvedConfig,
    report: &EvaluationReport,
    data: &PredictionSet,
) -> Vec<DiagnosticFlag> {
    let thr = &cfg.thresholds;
    let mut flags = Vec::new();
    match data {
        PredictionSet::Classification(d) => {
            if let Ok(profile) = imbalance_profile(&d.true_names().collect::<Vec<_>>()) {
                flags.extend(severe_imbalance_check(&profile, thr));
                if let Ok(Some(f)) = accuracy_trap_check(report, &profile, thr) {
                    flags.push(f);
                }
            }
            if let Ok(Some(f)) = macro_micro_gap(&build_confusion(d), 1.0, thr) {
                flags.push(f);
            }
        }
        PredictionSet::Regression(d) => {
            flags.extend(mape_stability_check(d, thr));
            if let Ok(table) = residual_table(d, RESIDUAL_BINS) {
                if let Ok(found) = metricsmith_core::regress::residual_flags(&table, thr.residual()) {
                    flags.extend(found);
                }
            }
        }
    }
    flags
}

fn split_flags(assignment: Option<&FoldAssignment>) -> Vec<DiagnosticFlag> {
    let Some(a) = assignment else { return Vec::new() };
    a.warnings
        .iter()
        .filter(|w| **w == Warning::SparseClass)
        .take(1)
        .map(|_| {
            DiagnosticFlag::new(
                FlagCode::SparseClass,
                Severity::Warn,
                format!("a class has fewer members than the {} folds; some folds lack it", a.k),
            )
            .with("k", a.k as f64)
        })
        .collect()
}

fn curves(data: &PredictionSet) -> Vec<(String, String)> {
    let mut out = Vec::new();
    match data {
        PredictionSet::Classification(d) => {
            if let Ok((labels, scores)) = binary_scores(d) {
                if let Ok(c) = roc_curve(&labels, &scores, &true) {
                    out.push(("roc".to_string(), crate::emit::curve_csv(&c)));
                }
                if let Ok(c) = pr_curve(&labels, &scores, &true) {
                    out.push(("pr".to_string(), crate::emit::curve_csv(&c)));
                }
            }
        }
        PredictionSet::Regression(d) => {
            if let Ok(t) = residual_table(d, RESIDUAL_BINS) {
                out.push(("residuals".to_string(), crate::emit::residual_csv(&t)));
            }
        }
    }
    out
}

fn direction(spec: &MetricSpec) -> Direction {
    if spec.higher_is_better() {
        Direction::HigherBetter
    } else {
        Direction::LowerBetter
    }
}

pub fn execute(cfg: &ResolvedConfig) -> CliResult<RunOutput> {
    let (models, fold_column) = load(cfg)?;
    let primary_data = &models[&cfg.model_id];
    let (plan, assignment) = fold_plan(cfg, primary_data, fold_column.as_deref())?;
    let suite = if cfg.metrics.is_empty() {
        default_suite(primary_data)
    } else {
        cfg.metrics.clone()
    };

    let mut entries: Vec<(String, Vec<PredictionSet>)> = Vec::new();
    for (id, data) in &models {
        entries.push((id.clone(), fold_sets(data, &plan, None, cfg.seed)?));
    }
    for &b in &cfg.baselines {
        entries.push((baseline_name(b).to_string(), fold_sets(primary_data, &plan, Some(b), cfg.seed)?));
    }

    let mut reports = IndexMap::new();
    let mut failures = Vec::new();
    let mut primary_pool = None;
    for (id, folds) in entries {
        let (ok, failed) = check_feasible(&suite, &folds);
        for f in &failed {
            failures.push(format!("{id}: {}: {}", f.metric, f.reason));
        }
        let mut report = cross_validate(&folds, &ok, cfg.seed)
            .map_err(|e| CliError::infeasible(format!("{id}: {e}")))?;
        report.provenance.failed_metrics = failed;
        let pool = pooled(&folds)?;
        for f in split_flags(assignment.as_ref()) {
            report.push_flag(f);
        }
        for f in diagnostics(cfg, &report, &pool) {
            report.push_flag(f);
        }
        if id == cfg.model_id {
            primary_pool = Some(pool);
        }
        reports.insert(id, report);
    }

    let mut comparisons = Vec::new();
    for (a, b) in &cfg.comparisons {
        let parse = |m: &str| {
            m.parse::<MetricSpec>()
                .map_err(|e| CliError::usage(format!("comparison metric `{m}`: {e}")))
        };
        let (sa, sb) = (parse(a)?, parse(b)?);
        for s in [&sa, &sb] {
            if !suite.contains(s) {
                return Err(CliError::usage(format!("comparison metric `{s}` is not in the metric suite")));
            }
        }
        let (na, nb) = (sa.to_string(), sb.to_string());
        if reports.values().any(|r| r.metric(&na).is_none() || r.metric(&nb).is_none()) {
            // Already reported as an infeasible metric.
            continue;
        }
        let cmp = ranking_comparison(&reports, &na, direction(&sa), &nb, direction(&sb))
            .map_err(|e| CliError::usage(format!("comparison {na} vs {nb}: {e}")))?;
        if let Some(flag) = &cmp.flag {
            reports[&cfg.model_id].push_flag(flag.clone());
        }
        comparisons.push(cmp);
    }

    let infeasible = (!failures.is_empty()).then(|| {
        CliError::infeasible(format!("metric infeasible for this data:\n  {}", failures.join("\n  ")))
    });
    if let Some(e) = infeasible.as_ref().filter(|_| !cfg.permissive) {
        return Err(e.clone());
    }
    let curves = primary_pool.as_ref().map(curves).unwrap_or_default();
    Ok(RunOutput {
        primary: cfg.model_id.clone(),
        reports,
        comparisons,
        curves,
        infeasible,
    })
}
