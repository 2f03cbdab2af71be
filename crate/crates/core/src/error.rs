use thiserror::Error;

/// Everything that can go wrong while validating inputs or computing a metric.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid label space: {0}")]
    InvalidLabelSpace(String),
    #[error("length mismatch: {what} has length {found}, expected {expected}")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("unknown label `{0}`")]
    UnknownLabel(String),
    #[error("score row {row} sums to {sum}, outside tolerance of 1")]
    ScoreRowNotNormalized { row: usize, sum: f64 },
    #[error("score row {row} contains a value outside [0, 1]: {value}")]
    ScoreOutOfRange { row: usize, value: f64 },
    #[error("neither hard predictions nor scores were supplied")]
    NoPredictions,
    #[error("empty input")]
    EmptyInput,
    #[error("non-finite value at position {0}")]
    NonFiniteValue(usize),
    #[error("operation requires a binary task, found {0} classes")]
    NotBinary(usize),
    #[error("beta must be positive, got {0}")]
    NonPositiveBeta(f64),
    #[error("probability scores are required")]
    MissingScores,
    #[error("input must contain both classes")]
    SingleClassInput,
    #[error("wrong curve kind: expected {expected}")]
    WrongCurveKind { expected: &'static str },
    #[error("no positive samples")]
    NoPositives,
    #[error("recall target {0} cannot be reached")]
    UnreachableTarget(f64),
    #[error("target is constant, total sum of squares is zero")]
    ConstantTarget,
    #[error("every target is below the near-zero threshold {0}")]
    AllTargetsNearZero(f64),
    #[error("too few samples: need at least {needed}, found {found}")]
    TooFewSamples { needed: usize, found: usize },
    #[error("fewer than two non-empty bins")]
    NoUsableBins,
    #[error("ratio {0} outside the open interval (0, 1)")]
    RatioOutOfRange(f64),
    #[error("fold count {k} outside [2, {n}]")]
    KOutOfRange { k: usize, n: usize },
    #[error("folds mix classification and regression predictions")]
    MixedTaskTypes,
    #[error("no folds supplied")]
    EmptyFoldSet,
    #[error("parameter `{name}` out of range: {reason}")]
    ParameterOutOfRange { name: &'static str, reason: String },
    #[error("{0} is not stochastic (entries must be non-negative and sum to 1)")]
    NotStochastic(&'static str),
    #[error("temperature must be positive, got {0}")]
    NonPositiveTemperature(f64),
    #[error("training view is empty")]
    EmptyTraining,
    #[error("report has no accuracy metric")]
    MissingAccuracy,
    #[error("metric `{metric}` missing from report of `{model}`")]
    MissingMetric { model: String, metric: String },
    #[error("metric `{metric}` is infeasible: {reason}")]
    MetricInfeasible { metric: String, reason: String },
    #[error("unknown metric specifier `{0}`")]
    UnknownMetric(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
