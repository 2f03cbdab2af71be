//! Run configuration: the JSON document and its resolved form.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use metricsmith_core::diagnose::Thresholds;
use metricsmith_core::regimes::{BaselineKind, RegimeSpec};
use metricsmith_core::{MetricSpec, Task};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

pub const SEED_ENV: &str = "METRICSMITH_SEED";
pub const DEFAULT_SEED: u64 = 0;
pub const DEFAULT_HOLDOUT_RATIO: f64 = 0.2;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub task: Option<Task>,
    #[serde(default)]
    pub input: InputConfig,
    #[serde(default)]
    pub metrics: Vec<MetricEntry>,
    #[serde(default)]
    pub validation: Option<Validation>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub thresholds: Option<Thresholds>,
    #[serde(default)]
    pub outputs: Vec<OutputFormat>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub positive_class: Option<String>,
    #[serde(default)]
    pub model_id: Option<String>,
    /// Reference predictors fitted on each training split.
    #[serde(default)]
    pub baselines: Vec<BaselineKind>,
    /// Metric pairs whose model rankings are compared.
    #[serde(default)]
    pub comparisons: Vec<(String, String)>,
    #[serde(default)]
    pub permissive: bool,
}

/// Exactly one of `path` and `regime` must be set.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
    /// A regime spec; its `seed` defaults to the run seed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub regime: Option<serde_json::Value>,
}

/// `"f_beta(2)"` or `{"name": "f_beta", "beta": 2}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MetricEntry {
    Name(String),
    Detailed {
        name: String,
        #[serde(default)]
        beta: Option<f64>,
        #[serde(default)]
        epsilon: Option<f64>,
        #[serde(default)]
        class: Option<String>,
    },
}

impl MetricEntry {
    pub fn to_spec(&self) -> CliResult<MetricSpec> {
        let text = match self {
            MetricEntry::Name(s) => s.clone(),
            MetricEntry::Detailed {
                name,
                beta,
                epsilon,
                class,
            } => {
                let mut s = name.clone();
                match (beta, epsilon) {
                    (Some(_), Some(_)) => {
                        return Err(CliError::usage(format!(
                            "metric `{name}`: give either beta or epsilon, not both"
                        )))
                    }
                    (Some(b), None) => s = format!("{s}({b})"),
                    (None, Some(e)) => s = format!("{s}({e})"),
                    (None, None) => {}
                }
                if let Some(c) = class {
                    s = format!("{s}@{c}");
                }
                s
            }
        };
        text.parse::<MetricSpec>()
            .map_err(|e| CliError::usage(format!("metric `{text}`: {e}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Validation {
    Holdout {
        #[serde(default = "default_ratio")]
        ratio: f64,
    },
    Kfold {
        k: usize,
    },
    StratifiedKfold {
        k: usize,
    },
    /// Use the input's `fold` column, or evaluate everything as one fold.
    None,
}

fn default_ratio() -> f64 {
    DEFAULT_HOLDOUT_RATIO
}

impl FromStr for Validation {
    type Err = CliError;

    /// `none`, `holdout`, `holdout:0.3`, `kfold:5`, `stratified_kfold:10`.
    fn from_str(s: &str) -> CliResult<Self> {
        let bad = || {
            CliError::usage(format!(
                "invalid validation `{s}`; expected none, holdout[:ratio], kfold:K or stratified_kfold:K"
            ))
        };
        let (kind, arg) = match s.split_once(':') {
            Some((k, a)) => (k, Some(a)),
            None => (s, None),
        };
        let k = || -> CliResult<usize> { arg.ok_or_else(bad)?.parse().map_err(|_| bad()) };
        Ok(match kind {
            "none" if arg.is_none() => Validation::None,
            "holdout" => Validation::Holdout {
                ratio: match arg {
                    Some(a) => a.parse().map_err(|_| bad())?,
                    None => DEFAULT_HOLDOUT_RATIO,
                },
            },
            "kfold" => Validation::Kfold { k: k()? },
            "stratified_kfold" => Validation::StratifiedKfold { k: k()? },
            _ => return Err(bad()),
        })
    }
}

impl fmt::Display for Validation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Validation::Holdout { ratio } => write!(f, "holdout:{ratio}"),
            Validation::Kfold { k } => write!(f, "kfold:{k}"),
            Validation::StratifiedKfold { k } => write!(f, "stratified_kfold:{k}"),
            Validation::None => f.write_str("none"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Json,
    Markdown,
    Curves,
}

impl FromStr for OutputFormat {
    type Err = CliError;

    fn from_str(s: &str) -> CliResult<Self> {
        match s {
            "json" => Ok(OutputFormat::Json),
            "markdown" | "md" => Ok(OutputFormat::Markdown),
            "curves" => Ok(OutputFormat::Curves),
            _ => Err(CliError::usage(format!(
                "unknown output format `{s}`; expected json, markdown or curves"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Input {
    Path(PathBuf),
    Regime(RegimeSpec),
}

/// A validated configuration with every default filled in.
#[derive(Debug, Clone, PartialEq)]
pub struct ResolvedConfig {
    pub task: Task,
    pub input: Input,
    /// Empty means the default suite for the task and data.
    pub metrics: Vec<MetricSpec>,
    pub validation: Option<Validation>,
    pub seed: u64,
    pub thresholds: Thresholds,
    pub outputs: Vec<OutputFormat>,
    pub output_dir: Option<PathBuf>,
    pub positive_class: Option<String>,
    pub model_id: String,
    pub baselines: Vec<BaselineKind>,
    pub comparisons: Vec<(String, String)>,
    pub permissive: bool,
}

/// Explicit seed, else `METRICSMITH_SEED`, else the default.
pub fn resolve_seed(explicit: Option<u64>, env: Option<&str>) -> CliResult<u64> {
    match (explicit, env) {
        (Some(s), _) => Ok(s),
        (None, Some(v)) => v.trim().parse().map_err(|_| {
            CliError::usage(format!("{SEED_ENV}=`{v}` is not an unsigned integer seed"))
        }),
        (None, None) => Ok(DEFAULT_SEED),
    }
}

pub fn env_seed() -> Option<String> {
    std::env::var(SEED_ENV).ok()
}

fn regime_task(spec: &RegimeSpec) -> Task {
    use metricsmith_core::regimes::RegimeKind::*;
    match spec.kind {
        ImbalancedBinary { .. } | Miscalibrated { .. } | MulticlassSkew { .. } => Task::Classification,
        HeavyTailRegression { .. } | LowBaselineCounts { .. } => Task::Regression,
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> CliResult<Self> {
        serde_json::from_str(text).map_err(|e| CliError::usage(format!("invalid config: {e}")))
    }

    pub fn resolve(self, env_seed: Option<&str>) -> CliResult<ResolvedConfig> {
        let seed = resolve_seed(self.seed, env_seed)?;
        let input = match (self.input.path, self.input.regime) {
            (Some(p), None) => Input::Path(p),
            (None, Some(mut regime)) => {
                if let Some(obj) = regime.as_object_mut() {
                    obj.entry("seed").or_insert(seed.into());
                }
                Input::Regime(
                    serde_json::from_value(regime)
                        .map_err(|e| CliError::usage(format!("invalid regime: {e}")))?,
                )
            }
            (Some(_), Some(_)) => {
                return Err(CliError::usage("give exactly one input source, not both path and regime"))
            }
            (None, None) => return Err(CliError::usage("no input given; set input.path or input.regime")),
        };
        let task = match (&input, self.task) {
            (Input::Regime(r), Some(t)) if regime_task(r) != t => {
                return Err(CliError::usage(format!(
                    "regime `{}` produces {} data but the task is {t}",
                    regime_name(r),
                    regime_task(r)
                )))
            }
            (Input::Regime(r), _) => regime_task(r),
            (Input::Path(_), Some(t)) => t,
            (Input::Path(_), None) => {
                return Err(CliError::usage("task is required for file input (classification or regression)"))
            }
        };

        let metrics = self
            .metrics
            .iter()
            .map(MetricEntry::to_spec)
            .collect::<CliResult<Vec<_>>>()?;
        for m in &metrics {
            if m.task() != task {
                return Err(CliError::usage(format!("metric `{m}` does not apply to {task} data")));
            }
        }
        for &b in &self.baselines {
            let ok = match task {
                Task::Classification => b != BaselineKind::MeanRegressor,
                Task::Regression => b == BaselineKind::MeanRegressor,
            };
            if !ok {
                return Err(CliError::usage(format!(
                    "baseline `{}` does not apply to {task} data",
                    baseline_name(b)
                )));
            }
        }
        match self.validation {
            Some(Validation::Kfold { k } | Validation::StratifiedKfold { k }) if k < 2 => {
                return Err(CliError::usage(format!("k must be at least 2, got {k}")))
            }
            Some(Validation::StratifiedKfold { .. }) if task == Task::Regression => {
                return Err(CliError::usage("stratified_kfold needs class labels; use kfold for regression"))
            }
            Some(Validation::Holdout { ratio }) if !(ratio > 0.0 && ratio < 1.0) => {
                return Err(CliError::usage(format!("holdout ratio must lie in (0, 1), got {ratio}")))
            }
            _ => {}
        }
        if !self.comparisons.is_empty() && self.baselines.is_empty() {
            return Err(CliError::usage("comparisons need at least one baseline to rank against"));
        }
        let outputs = if self.outputs.is_empty() {
            vec![OutputFormat::Json]
        } else {
            let mut o = self.outputs;
            o.dedup();
            o
        };
        if outputs.contains(&OutputFormat::Curves) && self.output_dir.is_none() {
            return Err(CliError::usage("curve tables are files; give an output directory"));
        }
        let model_id = self.model_id.unwrap_or_else(|| "model".to_string());
        if self.baselines.iter().any(|&b| baseline_name(b) == model_id) {
            return Err(CliError::usage(format!("model id `{model_id}` collides with a baseline name")));
        }
        Ok(ResolvedConfig {
            task,
            input,
            metrics,
            validation: self.validation,
            seed,
            thresholds: self.thresholds.unwrap_or_default(),
            outputs,
            output_dir: self.output_dir,
            positive_class: self.positive_class,
            model_id,
            baselines: self.baselines,
            comparisons: self.comparisons,
            permissive: self.permissive,
        })
    }
}

pub fn baseline_name(kind: BaselineKind) -> &'static str {
    match kind {
        BaselineKind::MajorityClass => "majority_class",
        BaselineKind::PriorSampler => "prior_sampler",
        BaselineKind::MeanRegressor => "mean_regressor",
    }
}

pub fn regime_name(spec: &RegimeSpec) -> &'static str {
    use metricsmith_core::regimes::RegimeKind::*;
    match spec.kind {
        ImbalancedBinary { .. } => "imbalanced_binary",
        Miscalibrated { .. } => "miscalibrated",
        MulticlassSkew { .. } => "multiclass_skew",
        HeavyTailRegression { .. } => "heavy_tail_regression",
        LowBaselineCounts { .. } => "low_baseline_counts",
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(json: &str) -> CliResult<ResolvedConfig> {
        RunConfig::from_json(json)?.resolve(None)
    }

    #[test]
    fn seed_precedence() {
        assert_eq!(resolve_seed(Some(3), Some("9")).unwrap(), 3);
        assert_eq!(resolve_seed(None, Some("9")).unwrap(), 9);
        assert_eq!(resolve_seed(None, None).unwrap(), DEFAULT_SEED);
        assert!(resolve_seed(None, Some("x")).is_err());
    }

    #[test]
    fn validation_strings_round_trip() {
        for s in ["none", "holdout:0.25", "kfold:5", "stratified_kfold:10"] {
            assert_eq!(s.parse::<Validation>().unwrap().to_string(), s);
        }
        assert_eq!(
            "holdout".parse::<Validation>().unwrap(),
            Validation::Holdout { ratio: 0.2 }
        );
        assert!("kfold".parse::<Validation>().is_err());
        assert!("loo:3".parse::<Validation>().is_err());
    }

    #[test]
    fn metric_entries() {
        let e: MetricEntry = serde_json::from_str(r#"{"name":"f_beta","beta":2}"#).unwrap();
        assert_eq!(e.to_spec().unwrap().to_string(), "f2");
        let e: MetricEntry = serde_json::from_str(r#""recall@b""#).unwrap();
        assert_eq!(e.to_spec().unwrap().to_string(), "recall@b");
        let e: MetricEntry = serde_json::from_str(r#"{"name":"mape","epsilon":0.5}"#).unwrap();
        assert_eq!(e.to_spec().unwrap().to_string(), "mape(0.5)");
    }

    #[test]
    fn regime_config_inherits_seed() {
        let cfg = parse(
            r#"{"input":{"regime":{"kind":"imbalanced_binary","prevalence":0.05,"separation":1.5,"n":100}},
                "seed":17,"metrics":["accuracy","pr_auc"],"validation":{"kind":"stratified_kfold","k":5}}"#,
        )
        .unwrap();
        assert_eq!(cfg.task, Task::Classification);
        match cfg.input {
            Input::Regime(r) => assert_eq!(r.seed, 17),
            Input::Path(_) => panic!(),
        }
    }

    #[test]
    fn config_errors_are_usage_errors() {
        let cases = [
            r#"{"task":"classification"}"#,
            r#"{"task":"regression","input":{"path":"a.csv"},"metrics":["accuracy"]}"#,
            r#"{"task":"regression","input":{"path":"a.csv","regime":{}}}"#,
            r#"{"task":"classification","input":{"path":"a.csv"},"metrics":["nope"]}"#,
            r#"{"task":"classification","input":{"path":"a.csv"},"validation":{"kind":"kfold","k":1}}"#,
            r#"{"task":"regression","input":{"regime":{"kind":"imbalanced_binary","prevalence":0.1,"separation":1,"n":10}}}"#,
            r#"{"task":"classification","input":{"path":"a.csv"},"outputs":["curves"]}"#,
            r#"{"task":"classification","input":{"path":"a.csv"},"baselines":["mean_regressor"]}"#,
            r#"{"task":"classification","input":{"path":"a.csv"},"unknown":1}"#,
        ];
        for c in cases {
            let err = parse(c).unwrap_err();
            assert_eq!(err.exit_code(), 1, "{c}: {err}");
        }
    }
}
