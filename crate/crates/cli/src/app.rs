//! Command-line surface: argument parsing, config merging and emission.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use metricsmith_core::diagnose::RankingComparison;
use metricsmith_core::regimes::BaselineKind;
use metricsmith_core::validate::{holdout_split, kfold, stratified_kfold};
use metricsmith_core::{EvaluationReport, PredictionSet, SplitScheme, Task};
use serde_json::json;

use crate::config::{
    env_seed, resolve_seed, InputConfig, MetricEntry, OutputFormat, ResolvedConfig, RunConfig, Validation,
};
use crate::emit::{report_from_json, to_json, to_markdown, write_file};
use crate::error::{CliError, CliResult};
use crate::ingest::parse_predictions;
use crate::run::{execute, RunOutput, DEFAULT_K};

#[derive(Debug, Parser)]
#[command(name = "metricsmith", version, about = "Evaluate prediction sets and diagnose misleading metrics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Compute a metric suite and diagnostics on a prediction file or regime.
    Evaluate(EvaluateArgs),
    /// Write fold assignments for external training.
    Split(SplitArgs),
    /// Run a named synthetic regime end to end.
    Scenario(ScenarioArgs),
    /// Re-render a stored JSON report.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
struct CommonArgs {
    /// JSON run configuration; flags override its keys.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Comma-separated: json, markdown, curves.
    #[arg(long, value_delimiter = ',')]
    format: Vec<String>,
    /// Output directory. Without it the report goes to stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Record infeasible metrics in the report instead of aborting (exit code stays 3).
    #[arg(long)]
    permissive: bool,
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Prediction CSV.
    #[arg(long)]
    input: Option<PathBuf>,
    /// classification or regression.
    #[arg(long)]
    task: Option<String>,
    /// Comma-separated metric specifiers, e.g. accuracy,f_beta(2),recall@pos.
    #[arg(long, value_delimiter = ',')]
    metrics: Vec<String>,
    /// none, holdout[:ratio], kfold:K or stratified_kfold:K.
    #[arg(long)]
    validation: Option<String>,
    #[arg(long)]
    positive_class: Option<String>,
    /// majority_class, prior_sampler or mean_regressor; repeatable.
    #[arg(long = "baseline")]
    baselines: Vec<String>,
    /// Metric pair to rank models by, as a:b; repeatable.
    #[arg(long = "compare")]
    comparisons: Vec<String>,
    #[arg(long)]
    model_id: Option<String>,
}

#[derive(Debug, Args)]
struct SplitArgs {
    /// Prediction or label CSV; stratification uses its y_true column.
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    task: Option<String>,
    /// Number of rows, when splitting without an input file.
    #[arg(long)]
    n: Option<usize>,
    /// holdout[:ratio], kfold:K or stratified_kfold:K.
    #[arg(long)]
    validation: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output CSV file. Defaults to stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ScenarioArgs {
    /// One of the names printed by --list.
    name: Option<String>,
    #[arg(long)]
    list: bool,
    #[arg(long)]
    n: Option<usize>,
    /// Number of folds.
    #[arg(long)]
    k: Option<usize>,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Debug, Args)]
struct ReportArgs {
    /// A report.json or a combined run document.
    path: PathBuf,
    /// json or markdown.
    #[arg(long, default_value = "markdown")]
    format: String,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_task(s: &str) -> CliResult<Task> {
    match s {
        "classification" => Ok(Task::Classification),
        "regression" => Ok(Task::Regression),
        _ => Err(CliError::usage(format!("unknown task `{s}`; expected classification or regression"))),
    }
}

fn parse_baseline(s: &str) -> CliResult<BaselineKind> {
    serde_json::from_value(json!(s))
        .map_err(|_| CliError::usage(format!("unknown baseline `{s}`")))
}

fn read_config(path: Option<&Path>) -> CliResult<RunConfig> {
    match path {
        None => Ok(RunConfig::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| CliError::usage(format!("cannot read config {}: {e}", p.display())))?;
            RunConfig::from_json(&text)
        }
    }
}

fn apply_common(cfg: &mut RunConfig, c: &CommonArgs) -> CliResult<()> {
    if c.seed.is_some() {
        cfg.seed = c.seed;
    }
    if !c.format.is_empty() {
        cfg.outputs = c.format.iter().map(|f| f.parse()).collect::<CliResult<_>>()?;
    }
    if c.out.is_some() {
        cfg.output_dir = c.out.clone();
    }
    cfg.permissive |= c.permissive;
    Ok(())
}

fn evaluate_config(args: &EvaluateArgs) -> CliResult<RunConfig> {
    let mut cfg = read_config(args.common.config.as_deref())?;
    apply_common(&mut cfg, &args.common)?;
    if let Some(p) = &args.input {
        cfg.input = InputConfig {
            path: Some(p.clone()),
            regime: None,
        };
    }
    if let Some(t) = &args.task {
        cfg.task = Some(parse_task(t)?);
    }
    if !args.metrics.is_empty() {
        cfg.metrics = args.metrics.iter().cloned().map(MetricEntry::Name).collect();
    }
    if let Some(v) = &args.validation {
        cfg.validation = Some(v.parse()?);
    }
    if args.positive_class.is_some() {
        cfg.positive_class = args.positive_class.clone();
    }
    if !args.baselines.is_empty() {
        cfg.baselines = args.baselines.iter().map(|b| parse_baseline(b)).collect::<CliResult<_>>()?;
    }
    if !args.comparisons.is_empty() {
        cfg.comparisons = args
            .comparisons
            .iter()
            .map(|c| {
                c.split_once(':')
                    .map(|(a, b)| (a.to_string(), b.to_string()))
                    .ok_or_else(|| CliError::usage(format!("comparison `{c}` must look like metric_a:metric_b")))
            })
            .collect::<CliResult<_>>()?;
    }
    if args.model_id.is_some() {
        cfg.model_id = args.model_id.clone();
    }
    Ok(cfg)
}

/// Built-in scenario names.
pub const SCENARIOS: [&str; 5] = [
    "imbalanced_binary",
    "miscalibrated",
    "multiclass_skew",
    "heavy_tail_regression",
    "low_baseline_counts",
];

/// The run configuration behind a named scenario.
pub fn scenario_config(name: &str, n: Option<usize>, k: Option<usize>) -> CliResult<RunConfig> {
    let k = k.unwrap_or(DEFAULT_K);
    let names = |v: &[&str]| v.iter().map(|s| MetricEntry::Name(s.to_string())).collect::<Vec<_>>();
    let pairs = |v: &[(&str, &str)]| v.iter().map(|(a, b)| (a.to_string(), b.to_string())).collect();
    let (regime, default_n, metrics, validation, baselines, comparisons, model_id) = match name {
        "imbalanced_binary" => (
            json!({"kind": "imbalanced_binary", "prevalence": 0.05, "separation": 1.5}),
            20_000,
            names(&["accuracy", "precision", "recall", "f1", "mcc", "roc_auc", "pr_auc", "log_loss"]),
            Validation::StratifiedKfold { k },
            vec![BaselineKind::MajorityClass, BaselineKind::PriorSampler],
            pairs(&[("accuracy", "mcc"), ("accuracy", "pr_auc")]),
            None,
        ),
        "miscalibrated" => (
            json!({"kind": "miscalibrated", "prevalence": 0.3, "separation": 1.0, "temperature": 0.25}),
            10_000,
            names(&["accuracy", "log_loss", "calibration_gap", "roc_auc", "mcc"]),
            Validation::StratifiedKfold { k },
            vec![BaselineKind::MajorityClass],
            pairs(&[("accuracy", "log_loss")]),
            Some("t=0.25".to_string()),
        ),
        "multiclass_skew" => (
            json!({
                "kind": "multiclass_skew",
                "prevalences": [0.9, 0.05, 0.05],
                "confusion": [[0.95, 0.03, 0.02], [0.5, 0.4, 0.1], [0.5, 0.1, 0.4]]
            }),
            50_000,
            names(&["accuracy", "micro_f1", "macro_f1", "recall@1", "recall@2"]),
            Validation::StratifiedKfold { k },
            vec![BaselineKind::MajorityClass, BaselineKind::PriorSampler],
            pairs(&[("micro_f1", "macro_f1")]),
            None,
        ),
        "heavy_tail_regression" => (
            json!({"kind": "heavy_tail_regression", "outlier_fraction": 0.05, "outlier_scale": 10.0}),
            20_000,
            names(&["mae", "rmse", "r2", "mape"]),
            Validation::Kfold { k },
            vec![BaselineKind::MeanRegressor],
            pairs(&[("mae", "rmse")]),
            None,
        ),
        "low_baseline_counts" => (
            json!({"kind": "low_baseline_counts", "low_rate": 0.1, "high_rate": 20.0, "low_mix": 0.3}),
            20_000,
            names(&["mae", "rmse", "mape"]),
            Validation::Kfold { k },
            vec![BaselineKind::MeanRegressor],
            pairs(&[("mae", "mape")]),
            None,
        ),
        other => {
            return Err(CliError::usage(format!(
                "unknown scenario `{other}`; choose one of {}",
                SCENARIOS.join(", ")
            )))
        }
    };
    let mut regime = regime;
    regime["n"] = json!(n.unwrap_or(default_n));
    Ok(RunConfig {
        input: InputConfig {
            path: None,
            regime: Some(regime),
        },
        metrics,
        validation: Some(validation),
        baselines,
        comparisons,
        model_id,
        ..RunConfig::default()
    })
}

fn comparisons_markdown(comparisons: &[RankingComparison]) -> String {
    let mut s = String::from("## Ranking comparisons\n\n");
    s.push_str("Disagreement is measured as Kendall tau over model orders and the count of inverted model pairs.\n\n");
    for c in comparisons {
        let _ = writeln!(
            s,
            "- {} vs {}: tau {:.4}, {} inversion(s); by {}: {}; by {}: {}{}",
            c.metric_a,
            c.metric_b,
            c.kendall_tau,
            c.inversions,
            c.metric_a,
            c.model_order_a.join(" > "),
            c.metric_b,
            c.model_order_b.join(" > "),
            if c.ties_broken { " (ties broken by model id)" } else { "" }
        );
    }
    s
}

fn run_markdown(out: &RunOutput) -> String {
    let mut s = String::new();
    for (i, (id, report)) in out.reports.iter().enumerate() {
        if i > 0 {
            s.push('\n');
        }
        s.push_str(&to_markdown(&format!("Evaluation report: {id}"), report));
    }
    if !out.comparisons.is_empty() {
        s.push('\n');
        s.push_str(&comparisons_markdown(&out.comparisons));
    }
    s
}

fn file_stem(id: &str) -> String {
    id.chars()
        .map(|c| if c.is_ascii_alphanumeric() || "._=-".contains(c) { c } else { '_' })
        .collect()
}

/// Writes every requested artifact, or the first textual format to stdout.
pub fn emit_run(out: &RunOutput, cfg: &ResolvedConfig, stdout: &mut dyn Write) -> CliResult<()> {
    let single = out.reports.len() == 1;
    let Some(dir) = &cfg.output_dir else {
        let text = match cfg.outputs.iter().find(|f| **f != OutputFormat::Curves) {
            Some(OutputFormat::Markdown) => run_markdown(out),
            _ if single => to_json(out.primary_report()),
            _ => to_json(&out.document()),
        };
        return stdout
            .write_all(text.as_bytes())
            .map_err(|e| CliError::output(Path::new("<stdout>"), e));
    };
    std::fs::create_dir_all(dir).map_err(|e| CliError::output(dir, e))?;
    let mut written = Vec::new();
    let mut put = |path: PathBuf, text: String| -> CliResult<()> {
        write_file(&path, &text)?;
        written.push(path);
        Ok(())
    };
    for format in &cfg.outputs {
        match format {
            OutputFormat::Json => {
                put(dir.join("report.json"), to_json(out.primary_report()))?;
                if !single {
                    put(dir.join("run.json"), to_json(&out.document()))?;
                    for (id, r) in out.reports.iter().skip(1) {
                        put(dir.join("models").join(format!("{}.json", file_stem(id))), to_json(r))?;
                    }
                }
            }
            OutputFormat::Markdown => put(dir.join("report.md"), run_markdown(out))?,
            OutputFormat::Curves => {
                for (stem, csv) in &out.curves {
                    put(dir.join("curves").join(format!("{stem}.csv")), csv.clone())?;
                }
            }
        }
    }
    for p in written {
        let _ = writeln!(stdout, "wrote {}", p.display());
    }
    Ok(())
}

fn run_config(cfg: RunConfig, stdout: &mut dyn Write) -> CliResult<()> {
    let env = env_seed();
    let resolved = cfg.resolve(env.as_deref())?;
    let out = execute(&resolved)?;
    emit_run(&out, &resolved, stdout)?;
    match out.infeasible {
        Some(e) => Err(e),
        None => Ok(()),
    }
}

fn split(args: &SplitArgs, stdout: &mut dyn Write) -> CliResult<()> {
    let seed = resolve_seed(args.seed, env_seed().as_deref())?;
    let validation: Validation = match &args.validation {
        Some(v) => v.parse()?,
        None => Validation::Kfold { k: DEFAULT_K },
    };
    let labels: Option<Vec<usize>> = match (&args.input, args.n) {
        (Some(_), Some(_)) => return Err(CliError::usage("give either --input or --n, not both")),
        (None, None) => return Err(CliError::usage("give --input or --n")),
        (None, Some(_)) => None,
        (Some(path), None) => {
            let task = parse_task(args.task.as_deref().unwrap_or("classification"))?;
            match parse_predictions(path, task, None)?.data {
                PredictionSet::Classification(d) => Some(d.y_true().to_vec()),
                PredictionSet::Regression(d) => Some(vec![0; d.len()]),
            }
        }
    };
    let n = labels.as_ref().map_or(args.n.unwrap_or(0), Vec::len);
    let err = |e: metricsmith_core::Error| CliError::data(format!("cannot split {n} rows: {e}"));
    let fa = match validation {
        Validation::None => return Err(CliError::usage("split needs holdout, kfold or stratified_kfold")),
        Validation::Holdout { ratio } => holdout_split(n, ratio, seed, labels.as_deref()).map_err(err)?,
        Validation::Kfold { k } => kfold(n, k, seed).map_err(err)?,
        Validation::StratifiedKfold { k } => {
            let l = labels.ok_or_else(|| CliError::usage("stratified_kfold needs --input with class labels"))?;
            stratified_kfold(&l, k, seed).map_err(err)?
        }
    };
    let mut s = String::from(match fa.scheme {
        SplitScheme::Holdout => "row,fold,role\n",
        SplitScheme::KFold => "row,fold\n",
    });
    for (i, f) in fa.fold_of.iter().enumerate() {
        match fa.scheme {
            SplitScheme::Holdout => {
                let _ = writeln!(s, "{i},{f},{}", if *f == 1 { "test" } else { "train" });
            }
            SplitScheme::KFold => {
                let _ = writeln!(s, "{i},{f}");
            }
        }
    }
    match &args.out {
        Some(p) => write_file(p, &s),
        None => stdout
            .write_all(s.as_bytes())
            .map_err(|e| CliError::output(Path::new("<stdout>"), e)),
    }
}

fn report(args: &ReportArgs, stdout: &mut dyn Write) -> CliResult<()> {
    let text = std::fs::read_to_string(&args.path)
        .map_err(|e| CliError::data(format!("cannot read {}: {e}", args.path.display())))?;
    let value: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| CliError::data(format!("{}: {e}", args.path.display())))?;
    let rendered = if value.get("reports").is_some() {
        let reports: indexmap::IndexMap<String, EvaluationReport> =
            serde_json::from_value(value["reports"].clone())
                .map_err(|e| CliError::data(format!("not a run document: {e}")))?;
        let comparisons: Vec<RankingComparison> = serde_json::from_value(value["comparisons"].clone())
            .map_err(|e| CliError::data(format!("not a run document: {e}")))?;
        let primary = value["primary"].as_str().unwrap_or_default().to_string();
        let out = RunOutput {
            primary,
            reports,
            comparisons,
            curves: Vec::new(),
            infeasible: None,
        };
        match args.format.as_str() {
            "json" => to_json(&out.document()),
            "markdown" | "md" => run_markdown(&out),
            f => return Err(CliError::usage(format!("report renders json or markdown, not `{f}`"))),
        }
    } else {
        let r = report_from_json(&text)?;
        match args.format.as_str() {
            "json" => to_json(&r),
            "markdown" | "md" => to_markdown("Evaluation report", &r),
            f => return Err(CliError::usage(format!("report renders json or markdown, not `{f}`"))),
        }
    };
    match &args.out {
        Some(p) => write_file(p, &rendered),
        None => stdout
            .write_all(rendered.as_bytes())
            .map_err(|e| CliError::output(Path::new("<stdout>"), e)),
    }
}

fn dispatch(cli: Cli, stdout: &mut dyn Write) -> CliResult<()> {
    match cli.command {
        Command::Evaluate(args) => run_config(evaluate_config(&args)?, stdout),
        Command::Split(args) => split(&args, stdout),
        Command::Scenario(args) => {
            if args.list {
                for s in SCENARIOS {
                    let _ = writeln!(stdout, "{s}");
                }
                return Ok(());
            }
            let name = args
                .name
                .as_deref()
                .ok_or_else(|| CliError::usage("name a scenario, or pass --list"))?;
            let mut cfg = scenario_config(name, args.n, args.k)?;
            if let Some(path) = &args.common.config {
                // Threshold and output settings may come from a file.
                let file = read_config(Some(path))?;
                cfg.thresholds = file.thresholds;
                cfg.outputs = file.outputs;
                cfg.output_dir = file.output_dir;
                cfg.seed = file.seed;
            }
            apply_common(&mut cfg, &args.common)?;
            run_config(cfg, stdout)
        }
        Command::Report(args) => report(&args, stdout),
    }
}

/// Runs the program and returns its exit code.
pub fn main_with_args<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            if e.use_stderr() {
                let _ = write!(stderr, "{}", e.render());
                return 1;
            }
            let _ = write!(stdout, "{}", e.render());
            return 0;
        }
    };
    match dispatch(cli, stdout) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.exit_code()
        }
    }
}
