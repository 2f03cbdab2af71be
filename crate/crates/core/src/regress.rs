//! Regression error metrics and residual structure checks.
//!
//! Residuals are `y_true − y_pred`, so a positive residual is an
//! underprediction.

use serde::{Deserialize, Serialize};

use crate::data::RegressionData;
use crate::error::{Error, Result};
use crate::report::{DiagnosticFlag, FlagCode, Severity, Warning};

/// Default near-zero cut-off for MAPE, in target units.
pub const DEFAULT_MAPE_EPSILON: f64 = 1e-12;
pub const DEFAULT_TREND_FRACTION: f64 = 0.8;
pub const DEFAULT_HETEROSCEDASTIC_RATIO: f64 = 3.0;
pub const DEFAULT_MIN_TREND_BINS: usize = 5;

pub fn mae(data: &RegressionData) -> f64 {
    data.residuals().map(f64::abs).sum::<f64>() / data.len() as f64
}

pub fn rmse(data: &RegressionData) -> f64 {
    (data.residuals().map(|r| r * r).sum::<f64>() / data.len() as f64).sqrt()
}

/// Coefficient of determination against the mean of the evaluated targets.
pub fn r_squared(data: &RegressionData) -> Result<f64> {
    let mean = data.mean_target();
    let ss_tot: f64 = data.y_true().iter().map(|y| (y - mean).powi(2)).sum();
    if ss_tot == 0.0 {
        return Err(Error::ConstantTarget);
    }
    let ss_res: f64 = data.residuals().map(|r| r * r).sum();
    Ok(1.0 - ss_res / ss_tot)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mape {
    pub value_percent: f64,
    /// Fraction of rows dropped because `|y| < epsilon`.
    pub excluded_fraction: f64,
    pub warnings: Vec<Warning>,
}

/// Mean absolute percentage error over rows with `|y| >= epsilon`.
pub fn mape(data: &RegressionData, epsilon: f64) -> Result<Mape> {
    if !(epsilon > 0.0) || !epsilon.is_finite() {
        return Err(Error::ParameterOutOfRange {
            name: "epsilon",
            reason: format!("must be positive, got {epsilon}"),
        });
    }
    let (mut total, mut used) = (0.0, 0usize);
    for (y, p) in data.y_true().iter().zip(data.y_pred()) {
        if y.abs() >= epsilon {
            total += ((y - p) / y).abs();
            used += 1;
        }
    }
    if used == 0 {
        return Err(Error::AllTargetsNearZero(epsilon));
    }
    let excluded = data.len() - used;
    Ok(Mape {
        value_percent: 100.0 * total / used as f64,
        excluded_fraction: excluded as f64 / data.len() as f64,
        warnings: if excluded > 0 {
            vec![Warning::TargetsExcluded]
        } else {
            Vec::new()
        },
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualBin {
    pub lower: f64,
    pub upper: f64,
    pub count: usize,
    /// `None` for an empty bin.
    pub mean_residual: Option<f64>,
    /// Sample standard deviation; `None` below two members.
    pub std_residual: Option<f64>,
    pub mean_predicted: Option<f64>,
}

impl ResidualBin {
    pub fn midpoint(&self) -> f64 {
        (self.lower + self.upper) / 2.0
    }
}

/// Residual statistics in equal-width bins of the predicted value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualTable {
    pub bin_edges: Vec<f64>,
    pub bins: Vec<ResidualBin>,
}

pub fn residual_table(data: &RegressionData, bins: usize) -> Result<ResidualTable> {
    if bins < 2 || data.len() < bins {
        return Err(Error::TooFewSamples {
            needed: bins.max(2),
            found: data.len(),
        });
    }
    let preds = data.y_pred();
    let lo = preds.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = preds.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    // A constant prediction still needs strictly increasing edges.
    let (lo, hi) = if lo == hi { (lo - 0.5, hi + 0.5) } else { (lo, hi) };
    let width = (hi - lo) / bins as f64;
    let mut edges: Vec<f64> = (0..bins).map(|i| lo + width * i as f64).collect();
    edges.push(hi);

    let mut members: Vec<Vec<(f64, f64)>> = vec![Vec::new(); bins];
    for (r, &p) in data.residuals().zip(preds) {
        let idx = (((p - lo) / width) as usize).min(bins - 1);
        members[idx].push((r, p));
    }
    let bins = members
        .iter()
        .enumerate()
        .map(|(i, m)| {
            let count = m.len();
            let mean = |f: fn(&(f64, f64)) -> f64| m.iter().map(f).sum::<f64>() / count as f64;
            let (mean_residual, mean_predicted) = if count == 0 {
                (None, None)
            } else {
                (Some(mean(|x| x.0)), Some(mean(|x| x.1)))
            };
            let std_residual = mean_residual.filter(|_| count >= 2).map(|mu| {
                (m.iter().map(|(r, _)| (r - mu).powi(2)).sum::<f64>() / (count - 1) as f64).sqrt()
            });
            ResidualBin {
                lower: edges[i],
                upper: edges[i + 1],
                count,
                mean_residual,
                std_residual,
                mean_predicted,
            }
        })
        .collect();
    Ok(ResidualTable {
        bin_edges: edges,
        bins,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResidualThresholds {
    /// Share of consecutive bin pairs that must move in one direction.
    pub trend_fraction: f64,
    /// Max-to-min ratio of per-bin residual spread.
    pub heteroscedastic_ratio: f64,
    /// Fewer non-empty bins than this give no trend verdict.
    pub min_trend_bins: usize,
}

impl Default for ResidualThresholds {
    fn default() -> Self {
        Self {
            trend_fraction: DEFAULT_TREND_FRACTION,
            heteroscedastic_ratio: DEFAULT_HETEROSCEDASTIC_RATIO,
            min_trend_bins: DEFAULT_MIN_TREND_BINS,
        }
    }
}

/// Flags a monotone trend in bin mean residuals and uneven residual spread.
pub fn residual_flags(
    table: &ResidualTable,
    thresholds: ResidualThresholds,
) -> Result<Vec<DiagnosticFlag>> {
    let means: Vec<f64> = table.bins.iter().filter_map(|b| b.mean_residual).collect();
    if means.len() < 2 {
        return Err(Error::NoUsableBins);
    }
    let mut flags = Vec::new();

    let pairs = (means.len() - 1) as f64;
    let up = means.windows(2).filter(|w| w[1] > w[0]).count() as f64 / pairs;
    let down = means.windows(2).filter(|w| w[1] < w[0]).count() as f64 / pairs;
    let dominant = up.max(down);
    if means.len() >= thresholds.min_trend_bins && dominant >= thresholds.trend_fraction {
        let direction = if up >= down { "increasing" } else { "decreasing" };
        flags.push(
            DiagnosticFlag::new(
                FlagCode::ResidualTrend,
                Severity::Warn,
                format!("bin mean residuals are {direction} across predicted values"),
            )
            .with("monotone_fraction", dominant)
            .with("increasing_fraction", up)
            .with("decreasing_fraction", down)
            .with("threshold", thresholds.trend_fraction)
            .with("bins_used", means.len() as f64),
        );
    }

    let stds: Vec<f64> = table.bins.iter().filter_map(|b| b.std_residual).collect();
    if stds.len() >= 2 {
        let max = stds.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let min = stds.iter().copied().fold(f64::INFINITY, f64::min);
        if max > 0.0 && (min == 0.0 || max / min > thresholds.heteroscedastic_ratio) {
            let mut flag = DiagnosticFlag::new(
                FlagCode::ResidualHeteroscedastic,
                Severity::Warn,
                "residual spread varies strongly across predicted values",
            )
            .with("max_bin_std", max)
            .with("min_bin_std", min)
            .with("threshold", thresholds.heteroscedastic_ratio);
            if min > 0.0 {
                flag = flag.with("ratio", max / min);
            }
            flags.push(flag);
        }
    }
    Ok(flags)
}
