//! Prediction files.
//!
//! Classification: `y_true`, optional `y_pred`, optional `score_<class>`
//! columns (one per class, in label-space order). Regression: `y_true`,
//! `y_pred`. Either may carry an integer `fold` column with pre-split
//! evaluation folds. Other columns are ignored.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{Read, Write};
use std::path::Path;

use metricsmith_core::{
    validate_classification, Error as CoreError, LabelSpace, PredictionSet,
    RawClassification, RegressionData, Task,
};

use crate::error::{CliError, CliResult};

pub const SCORE_PREFIX: &str = "score_";
pub const FOLD_COLUMN: &str = "fold";

#[derive(Debug, Clone, PartialEq)]
pub struct Ingested {
    pub data: PredictionSet,
    /// Dense fold ids `0..k`, from the `fold` column.
    pub folds: Option<Vec<usize>>,
}

struct Columns {
    y_true: usize,
    y_pred: Option<usize>,
    scores: Vec<(usize, String)>,
    fold: Option<usize>,
    names: Vec<String>,
}

impl Columns {
    fn from_header(header: &csv::StringRecord, task: Task) -> CliResult<Self> {
        let names: Vec<String> = header.iter().map(str::to_string).collect();
        let mut seen = BTreeSet::new();
        for n in &names {
            if !seen.insert(n.as_str()) {
                return Err(CliError::data(format!("duplicate column `{n}` in header")));
            }
        }
        let find = |name: &str| names.iter().position(|n| n == name);
        let y_true = find("y_true").ok_or_else(|| CliError::data("missing required column `y_true`"))?;
        let y_pred = find("y_pred");
        let scores: Vec<(usize, String)> = names
            .iter()
            .enumerate()
            .filter_map(|(i, n)| n.strip_prefix(SCORE_PREFIX).map(|c| (i, c.to_string())))
            .collect();
        match task {
            Task::Regression if y_pred.is_none() => {
                return Err(CliError::data("missing required column `y_pred`"))
            }
            Task::Regression if !scores.is_empty() => {
                return Err(CliError::data(format!(
                    "column `{}` is a class score; regression files hold y_true,y_pred",
                    names[scores[0].0]
                )))
            }
            Task::Classification if y_pred.is_none() && scores.is_empty() => {
                return Err(CliError::data(
                    "missing predictions: need a `y_pred` column or `score_<class>` columns",
                ))
            }
            _ => {}
        }
        if scores.iter().any(|(_, c)| c.is_empty()) {
            return Err(CliError::data("score column `score_` has no class name"));
        }
        Ok(Self {
            y_true,
            y_pred,
            scores,
            fold: find(FOLD_COLUMN),
            names,
        })
    }

    fn cite(&self, row: usize, col: usize) -> String {
        format!("row {row}, column {} (`{}`)", col + 1, self.names[col])
    }
}

fn number(cols: &Columns, row: usize, col: usize, text: &str) -> CliResult<f64> {
    let v: f64 = text.trim().parse().map_err(|_| {
        CliError::data(format!("{}: `{text}` is not a number", cols.cite(row, col)))
    })?;
    if !v.is_finite() {
        return Err(CliError::data(format!("{}: non-finite value `{text}`", cols.cite(row, col))));
    }
    Ok(v)
}

fn label<'r>(cols: &Columns, row: usize, col: usize, rec: &'r csv::StringRecord) -> CliResult<&'r str> {
    let v = &rec[col];
    if v.is_empty() {
        return Err(CliError::data(format!("{}: empty label", cols.cite(row, col))));
    }
    Ok(v)
}

/// Sorted class names; numerically when every label is an integer.
fn derived_classes(labels: BTreeSet<String>) -> Vec<String> {
    let mut v: Vec<String> = labels.into_iter().collect();
    if v.iter().all(|s| s.parse::<i64>().is_ok()) {
        v.sort_by_key(|s| s.parse::<i64>().unwrap());
    }
    v
}

pub fn parse_predictions(path: &Path, task: Task, positive: Option<&str>) -> CliResult<Ingested> {
    let file = std::fs::File::open(path)
        .map_err(|e| CliError::data(format!("cannot read {}: {e}", path.display())))?;
    read_predictions(file, task, positive)
        .map_err(|e| CliError::new(e.kind, format!("{}: {}", path.display(), e.message)))
}

pub fn read_predictions(reader: impl Read, task: Task, positive: Option<&str>) -> CliResult<Ingested> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let header = rdr
        .headers()
        .map_err(|e| CliError::data(format!("unreadable header: {e}")))?
        .clone();
    let cols = Columns::from_header(&header, task)?;

    let mut y_true_text = Vec::new();
    let mut y_pred_text = Vec::new();
    let mut y_num = Vec::new();
    let mut p_num = Vec::new();
    let mut scores: Vec<Vec<f64>> = Vec::new();
    let mut fold_raw = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 1;
        let rec = rec.map_err(|e| match e.kind() {
            csv::ErrorKind::UnequalLengths { len, expected_len, .. } => CliError::data(format!(
                "row {row}: {len} fields where the header has {expected_len}"
            )),
            _ => CliError::data(format!("row {row}: {e}")),
        })?;
        if let Some(c) = cols.fold {
            let v = rec[c].trim().parse::<u64>().map_err(|_| {
                CliError::data(format!("{}: fold `{}` is not a non-negative integer", cols.cite(row, c), &rec[c]))
            })?;
            fold_raw.push(v);
        }
        match task {
            Task::Regression => {
                y_num.push(number(&cols, row, cols.y_true, &rec[cols.y_true])?);
                let c = cols.y_pred.expect("checked in header");
                p_num.push(number(&cols, row, c, &rec[c])?);
            }
            Task::Classification => {
                y_true_text.push(label(&cols, row, cols.y_true, &rec)?.to_string());
                if let Some(c) = cols.y_pred {
                    y_pred_text.push(label(&cols, row, c, &rec)?.to_string());
                }
                if !cols.scores.is_empty() {
                    let mut r = Vec::with_capacity(cols.scores.len());
                    for (c, _) in &cols.scores {
                        let v = number(&cols, row, *c, &rec[*c])?;
                        if !(0.0..=1.0).contains(&v) {
                            return Err(CliError::data(format!(
                                "{}: score {v} outside [0, 1]",
                                cols.cite(row, *c)
                            )));
                        }
                        r.push(v);
                    }
                    scores.push(r);
                }
            }
        }
    }
    let n = y_true_text.len().max(y_num.len());
    if n == 0 {
        return Err(CliError::data("no data rows"));
    }

    let folds = cols.fold.map(|_| {
        let ids: BTreeMap<u64, usize> = fold_raw
            .iter()
            .copied()
            .collect::<BTreeSet<_>>()
            .into_iter()
            .enumerate()
            .map(|(i, f)| (f, i))
            .collect();
        fold_raw.iter().map(|f| ids[f]).collect::<Vec<_>>()
    });

    let data = match task {
        Task::Regression => PredictionSet::Regression(
            RegressionData::new(y_num, p_num).map_err(|e| CliError::data(e.to_string()))?,
        ),
        Task::Classification => {
            let classes: Vec<String> = if cols.scores.is_empty() {
                derived_classes(y_true_text.iter().chain(&y_pred_text).cloned().collect())
            } else {
                cols.scores.iter().map(|(_, c)| c.clone()).collect()
            };
            let mut labels = LabelSpace::new(classes).map_err(|e| CliError::data(e.to_string()))?;
            for (i, (t, p)) in y_true_text
                .iter()
                .zip(y_pred_text.iter().map(Some).chain(std::iter::repeat(None)))
                .enumerate()
            {
                if labels.index_of(t).is_none() {
                    return Err(CliError::data(format!(
                        "{}: label `{t}` has no score column",
                        cols.cite(i + 1, cols.y_true)
                    )));
                }
                if let Some(p) = p {
                    if labels.index_of(p).is_none() {
                        return Err(CliError::data(format!(
                            "{}: label `{p}` has no score column",
                            cols.cite(i + 1, cols.y_pred.unwrap())
                        )));
                    }
                }
            }
            if let Some(p) = positive {
                labels = labels.with_positive(p).map_err(|_| {
                    CliError::usage(format!("positive class `{p}` is not one of the labels"))
                })?;
            }
            let raw = RawClassification {
                y_true: y_true_text,
                y_pred: cols.y_pred.map(|_| y_pred_text),
                y_score: (!cols.scores.is_empty()).then_some(scores),
            };
            PredictionSet::Classification(validate_classification(labels, raw).map_err(|e| match e {
                CoreError::ScoreRowNotNormalized { row, sum } => CliError::data(format!(
                    "row {}: scores sum to {sum}, not 1",
                    row + 1
                )),
                other => CliError::data(other.to_string()),
            })?)
        }
    };
    Ok(Ingested { data, folds })
}

/// Writes a prediction file that [`read_predictions`] reads back exactly.
pub fn write_predictions(
    writer: impl Write,
    data: &PredictionSet,
    folds: Option<&[usize]>,
) -> CliResult<()> {
    let io = |e: csv::Error| CliError::new(crate::error::ErrorKind::Output, e.to_string());
    let mut w = csv::Writer::from_writer(writer);
    let mut header: Vec<String> = vec!["y_true".into()];
    match data {
        PredictionSet::Regression(_) => header.push("y_pred".into()),
        PredictionSet::Classification(d) => {
            if d.explicit_predictions().is_some() {
                header.push("y_pred".into());
            }
            if d.has_scores() {
                header.extend(d.labels().classes().iter().map(|c| format!("{SCORE_PREFIX}{c}")));
            }
        }
    }
    if folds.is_some() {
        header.push(FOLD_COLUMN.into());
    }
    w.write_record(&header).map_err(io)?;
    for i in 0..data.len() {
        let mut rec: Vec<String> = Vec::with_capacity(header.len());
        match data {
            PredictionSet::Regression(d) => {
                rec.push(d.y_true()[i].to_string());
                rec.push(d.y_pred()[i].to_string());
            }
            PredictionSet::Classification(d) => {
                rec.push(d.labels().name(d.y_true()[i]).to_string());
                if let Some(p) = d.explicit_predictions() {
                    rec.push(d.labels().name(p[i]).to_string());
                }
                if let Some(row) = d.score_row(i) {
                    rec.extend(row.iter().map(f64::to_string));
                }
            }
        }
        if let Some(f) = folds {
            rec.push(f[i].to_string());
        }
        w.write_record(&rec).map_err(io)?;
    }
    w.flush()
        .map_err(|e| CliError::new(crate::error::ErrorKind::Output, e.to_string()))
}
