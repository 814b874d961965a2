//! `curves.csv` and `improvement.csv`: emission and parsing.
//!
//! Floats are printed with 9 significant digits in the shortest of fixed or
//! exponent notation (C's `%.9g`), lines end in LF, and there is no trailing
//! whitespace.

use std::fmt::Write as _;
use std::path::Path;

use albird_core::experiment::{CurveRow, ImprovementRow, LearningCurve, Metric};
use albird_core::metrics::MetricRecord;
use albird_core::Strategy;
use serde::Deserialize;

use crate::error::CliError;

pub const CURVES_HEADER: &str =
    "strategy,repetition,cycle,labeled_count,cmap,auroc,t1acc,evaluated_instances,skipped_classes";
pub const IMPROVEMENT_HEADER: &str = "strategy,metric,cycle,labeled_count,abs_delta,rel_percent";

const SIG_DIGITS: i32 = 9;

/// Formats `x` like `%.9g`.
pub fn fmt_sig9(x: f64) -> String {
    if x == 0.0 {
        return "0".to_owned();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let sci = format!("{:.*e}", (SIG_DIGITS - 1) as usize, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-4..SIG_DIGITS).contains(&exp) {
        let decimals = (SIG_DIGITS - 1 - exp).max(0) as usize;
        trim_fraction(format!("{x:.decimals$}"))
    } else {
        let mantissa = trim_fraction(mantissa.to_owned());
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{mantissa}e{sign}{:02}", exp.abs())
    }
}

fn trim_fraction(mut s: String) -> String {
    if s.contains('.') {
        while s.ends_with('0') {
            s.pop();
        }
        if s.ends_with('.') {
            s.pop();
        }
    }
    s
}

pub fn curves_to_string(curve: &LearningCurve) -> String {
    let mut out = String::with_capacity(64 * (curve.rows.len() + 1));
    out.push_str(CURVES_HEADER);
    out.push('\n');
    for r in &curve.rows {
        let m = &r.metrics;
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            r.strategy,
            r.repetition,
            r.cycle,
            r.labeled_count,
            fmt_sig9(m.cmap),
            fmt_sig9(m.auroc),
            fmt_sig9(m.t1acc),
            m.evaluated_instances,
            m.skipped_classes
        )
        .expect("writing to a String");
    }
    out
}

pub fn improvement_to_string(rows: &[ImprovementRow]) -> String {
    let mut out = String::with_capacity(48 * (rows.len() + 1));
    out.push_str(IMPROVEMENT_HEADER);
    out.push('\n');
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            r.strategy,
            r.metric,
            r.cycle,
            r.labeled_count,
            fmt_sig9(r.abs_delta),
            r.rel_percent.map(fmt_sig9).unwrap_or_default()
        )
        .expect("writing to a String");
    }
    out
}

#[derive(Deserialize)]
struct CurveCsvRow {
    strategy: String,
    repetition: usize,
    cycle: usize,
    labeled_count: usize,
    cmap: f64,
    auroc: f64,
    t1acc: f64,
    evaluated_instances: usize,
    skipped_classes: usize,
}

fn schema_error(path: &Path, message: impl Into<String>) -> CliError {
    CliError::Schema {
        path: path.to_path_buf(),
        message: message.into(),
    }
}

fn check_header(reader: &mut csv::Reader<&[u8]>, expected: &str, path: &Path) -> Result<(), CliError> {
    let headers = reader.headers().map_err(|e| schema_error(path, e.to_string()))?;
    let got = headers.iter().collect::<Vec<_>>().join(",");
    if got != expected {
        return Err(schema_error(path, format!("header is {got:?}, expected {expected:?}")));
    }
    Ok(())
}

/// Parses `curves.csv` content. `path` is only used in error messages.
pub fn parse_curves(text: &str, path: &Path) -> Result<LearningCurve, CliError> {
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    check_header(&mut reader, CURVES_HEADER, path)?;
    let mut rows = Vec::new();
    for (i, rec) in reader.deserialize::<CurveCsvRow>().enumerate() {
        let line = i + 2;
        let r = rec.map_err(|e| schema_error(path, format!("line {line}: {e}")))?;
        let strategy: Strategy = r
            .strategy
            .parse()
            .map_err(|e: albird_core::strategies::StrategyError| schema_error(path, format!("line {line}: {e}")))?;
        rows.push(CurveRow {
            strategy,
            repetition: r.repetition,
            cycle: r.cycle,
            labeled_count: r.labeled_count,
            metrics: MetricRecord {
                cmap: r.cmap,
                auroc: r.auroc,
                t1acc: r.t1acc,
                evaluated_instances: r.evaluated_instances,
                skipped_classes: r.skipped_classes,
            },
        });
    }
    Ok(LearningCurve { rows })
}

#[derive(Deserialize)]
struct ImprovementCsvRow {
    strategy: String,
    metric: String,
    cycle: usize,
    labeled_count: usize,
    abs_delta: f64,
    rel_percent: Option<f64>,
}

/// Parses `improvement.csv` content.
pub fn parse_improvement(text: &str, path: &Path) -> Result<Vec<ImprovementRow>, CliError> {
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    check_header(&mut reader, IMPROVEMENT_HEADER, path)?;
    reader
        .deserialize::<ImprovementCsvRow>()
        .enumerate()
        .map(|(i, rec)| {
            let line = i + 2;
            let r = rec.map_err(|e| schema_error(path, format!("line {line}: {e}")))?;
            Ok(ImprovementRow {
                strategy: r
                    .strategy
                    .parse()
                    .map_err(|e: albird_core::strategies::StrategyError| {
                        schema_error(path, format!("line {line}: {e}"))
                    })?,
                metric: r
                    .metric
                    .parse::<Metric>()
                    .map_err(|e| schema_error(path, format!("line {line}: {e}")))?,
                cycle: r.cycle,
                labeled_count: r.labeled_count,
                abs_delta: r.abs_delta,
                rel_percent: r.rel_percent,
            })
        })
        .collect()
}
