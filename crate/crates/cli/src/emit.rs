//! Report rendering: JSON, markdown and plot-ready curve tables.

use std::fmt::Write as _;
use std::io::{self, Write};
use std::path::Path;

use metricsmith_core::rank::CurvePoints;
use metricsmith_core::regress::ResidualTable;
use metricsmith_core::report::DataFingerprint;
use metricsmith_core::EvaluationReport;
use serde::Serialize;
use serde_json::ser::{Formatter, PrettyFormatter};

use crate::error::{CliError, CliResult};

/// `%.17g` with trailing zeros trimmed; every double round-trips.
pub fn format_g17(v: f64) -> String {
    if v == 0.0 {
        return if v.is_sign_negative() { "-0.0".into() } else { "0.0".into() };
    }
    let sci = format!("{v:.16e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    let (sign, mantissa) = match mantissa.strip_prefix('-') {
        Some(m) => ("-", m),
        None => ("", mantissa),
    };
    let digits: String = mantissa.chars().filter(|c| c.is_ascii_digit()).collect();
    let digits = digits.trim_end_matches('0');
    let digits = if digits.is_empty() { "0" } else { digits };
    if (-4..17).contains(&exp) {
        let mut out = String::from(sign);
        if exp < 0 {
            out.push_str("0.");
            out.extend(std::iter::repeat_n('0', (-exp - 1) as usize));
            out.push_str(digits);
        } else {
            let int_len = exp as usize + 1;
            if digits.len() <= int_len {
                out.push_str(digits);
                out.extend(std::iter::repeat_n('0', int_len - digits.len()));
                out.push_str(".0");
            } else {
                out.push_str(&digits[..int_len]);
                out.push('.');
                out.push_str(&digits[int_len..]);
            }
        }
        out
    } else {
        let (head, tail) = digits.split_at(1);
        if tail.is_empty() {
            format!("{sign}{head}e{exp}")
        } else {
            format!("{sign}{head}.{tail}e{exp}")
        }
    }
}

/// Pretty JSON whose floats carry 17 significant digits.
struct G17<'a>(PrettyFormatter<'a>);

impl Formatter for G17<'_> {
    fn write_f64<W: ?Sized + Write>(&mut self, w: &mut W, v: f64) -> io::Result<()> {
        w.write_all(format_g17(v).as_bytes())
    }
    fn write_f32<W: ?Sized + Write>(&mut self, w: &mut W, v: f32) -> io::Result<()> {
        self.write_f64(w, v as f64)
    }
    fn begin_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_array(w)
    }
    fn end_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array(w)
    }
    fn begin_array_value<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_array_value(w, first)
    }
    fn end_array_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array_value(w)
    }
    fn begin_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object(w)
    }
    fn end_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object(w)
    }
    fn begin_object_key<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_object_key(w, first)
    }
    fn begin_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object_value(w)
    }
    fn end_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object_value(w)
    }
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, G17(PrettyFormatter::new()));
    value.serialize(&mut ser).expect("in-memory serialization");
    buf.push(b'\n');
    String::from_utf8(buf).expect("serde_json emits UTF-8")
}

pub fn report_from_json(text: &str) -> CliResult<EvaluationReport> {
    serde_json::from_str(text).map_err(|e| CliError::data(format!("not a report: {e}")))
}

fn num(v: f64) -> String {
    format!("{v:.4}")
}

pub fn to_markdown(title: &str, report: &EvaluationReport) -> String {
    let p = &report.provenance;
    let mut s = String::new();
    let _ = writeln!(s, "# {title}\n");
    let _ = writeln!(s, "- task: {}", report.task);
    match &p.data {
        DataFingerprint::Classification {
            rows,
            positive_class,
            prevalences,
        } => {
            let _ = writeln!(s, "- rows: {rows}");
            let shares: Vec<String> = prevalences
                .iter()
                .map(|(c, v)| format!("{c} {}", num(*v)))
                .collect();
            let _ = writeln!(s, "- class prevalences: {}", shares.join(", "));
            if let Some(pc) = positive_class {
                let _ = writeln!(s, "- positive class: {pc}");
            }
        }
        DataFingerprint::Regression {
            rows,
            target_mean,
            target_std,
            target_min,
            target_max,
        } => {
            let _ = writeln!(s, "- rows: {rows}");
            let _ = writeln!(
                s,
                "- target: mean {} ± {}, range [{}, {}]",
                num(*target_mean),
                num(*target_std),
                num(*target_min),
                num(*target_max)
            );
        }
    }
    let _ = writeln!(s, "- folds: {} (seed {})", p.k, p.seed);
    let _ = writeln!(s, "- aggregation: {}\n", p.aggregation);

    let _ = writeln!(s, "## Metrics\n");
    if report.metrics.is_empty() {
        let _ = writeln!(s, "no metrics computed\n");
    } else {
        let _ = writeln!(s, "| metric | mean ± std | min | max | warnings |");
        let _ = writeln!(s, "|---|---|---|---|---|");
        for (name, m) in &report.metrics {
            let warnings: Vec<&str> = m.warnings.iter().map(|w| w.as_str()).collect();
            let _ = writeln!(
                s,
                "| {name} | {} ± {} | {} | {} | {} |",
                num(m.mean),
                num(m.sample_std),
                num(m.min),
                num(m.max),
                if warnings.is_empty() { "-".to_string() } else { warnings.join(", ") }
            );
        }
        let _ = writeln!(s);
    }
    if !p.failed_metrics.is_empty() {
        let _ = writeln!(s, "## Failed metrics\n");
        for f in &p.failed_metrics {
            let _ = writeln!(s, "- {}: {}", f.metric, f.reason);
        }
        let _ = writeln!(s);
    }

    let _ = writeln!(s, "## Flags\n");
    if report.flags.is_empty() {
        let _ = writeln!(s, "no flags");
    }
    for f in &report.flags {
        let _ = write!(s, "- **{}** ({}): {}", f.code, f.severity, f.message);
        if !f.evidence.is_empty() {
            let ev: Vec<String> = f.evidence.iter().map(|(k, v)| format!("{k}={}", num(*v))).collect();
            let _ = write!(s, " [{}]", ev.join(", "));
        }
        let _ = writeln!(s);
    }
    s
}

fn csv_float(v: f64) -> String {
    if v.is_infinite() {
        if v > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        v.to_string()
    }
}

/// `x,y,threshold` rows; the sentinel threshold is written as `inf`.
pub fn curve_csv(curve: &CurvePoints) -> String {
    let mut s = String::from("x,y,threshold\n");
    for p in &curve.points {
        let _ = writeln!(s, "{},{},{}", csv_float(p.x), csv_float(p.y), csv_float(p.threshold));
    }
    s
}

/// `bin_mid,mean_residual,std_residual,count`; empty statistics stay blank.
pub fn residual_csv(table: &ResidualTable) -> String {
    let opt = |v: Option<f64>| v.map(csv_float).unwrap_or_default();
    let mut s = String::from("bin_mid,mean_residual,std_residual,count\n");
    for b in &table.bins {
        let _ = writeln!(
            s,
            "{},{},{},{}",
            csv_float(b.midpoint()),
            opt(b.mean_residual),
            opt(b.std_residual),
            b.count
        );
    }
    s
}

pub fn write_file(path: &Path, contents: &str) -> CliResult<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| CliError::output(parent, e))?;
    }
    std::fs::write(path, contents).map_err(|e| CliError::output(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn g17_round_trips() {
        for v in [
            0.95, 1.0 / 3.0, 1e-7, 123456.789, 1e300, -2.5e-300, 5e-324, 100.0, 0.1 + 0.2,
            f64::MAX, 1e16, 1e17, 12.0,
        ] {
            let s = format_g17(v);
            assert_eq!(s.parse::<f64>().unwrap(), v, "{s}");
        }
        assert_eq!(format_g17(0.5), "0.5");
        assert_eq!(format_g17(0.95), "0.94999999999999996");
        assert_eq!(format_g17(100.0), "100.0");
        assert_eq!(format_g17(0.0), "0.0");
        assert_eq!(format_g17(1e-7), "9.9999999999999995e-8");
        assert_eq!(format_g17(1e-5), "1.0000000000000001e-5");
        assert_eq!(format_g17(2.5e20), "2.5e20");
    }

    #[test]
    fn json_numbers_use_g17() {
        let json = to_json(&serde_json::json!({"a": 0.95, "b": [1.0, 2]}));
        assert!(json.contains("\"a\": 0.94999999999999996"));
        assert!(json.contains("1.0"));
        let back: serde_json::Value = serde_json::from_str(&json).unwrap();
        assert_eq!(back["a"].as_f64(), Some(0.95));
    }
}
