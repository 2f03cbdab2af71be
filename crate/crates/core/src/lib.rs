//! Decision-oriented evaluation of supervised learning predictions.
//!
//! The crate evaluates prediction sets; it never trains models. Modules:
//!
//! - [`data`], [`fold`], [`report`]: the shared data model
//! - [`classify`]: confusion matrix, precision/recall, F-beta, MCC, log loss
//! - [`rank`]: ROC and precision–recall curves, areas, threshold tuning
//! - [`regress`]: MAE, RMSE, R², MAPE, residual structure
//! - [`validate`]: hold-out and (stratified) k-fold splits, cross-validation
//! - [`regimes`]: synthetic pitfall regimes and baseline predictors
//! - [`diagnose`]: regime detection and metric-disagreement analytics
//! - [`metrics`]: textual metric specifiers used by configs and reports

// `!(x > 0.0)` style guards are used on purpose so NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod classify;
pub mod data;
pub mod diagnose;
pub mod error;
pub mod fold;
pub mod metrics;
pub mod rank;
pub mod regimes;
pub mod regress;
pub mod report;
pub mod validate;

pub use data::{validate_classification, ClassificationData, LabelSpace, RawClassification, RegressionData};
pub use error::{Error, Result};
pub use fold::{FoldAssignment, SplitScheme};
pub use metrics::{MetricSpec, PredictionSet};
pub use report::{
    aggregate_folds, DiagnosticFlag, EvaluationReport, FlagCode, MetricReport, Severity, Task,
    Warning,
};
