//! Implementations of the `albird` subcommands.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use albird_core::dataset::{load_dataset, synth_dataset, write_dataset, SynthConfig};
use albird_core::experiment::{improvement_curves, Experiment, ExperimentConfig, Metric};
use albird_core::Strategy;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::CliError;
use crate::svg::improvement_svg;
use crate::tables::{curves_to_string, improvement_to_string, parse_curves};

pub const CURVES_FILE: &str = "curves.csv";
pub const IMPROVEMENT_FILE: &str = "improvement.csv";
pub const CONFIG_ECHO_FILE: &str = "config_echo.json";
pub const RUN_REPORT_FILE: &str = "run_report.json";

/// Writes `contents` to a temporary file next to `path`, then renames it into place.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<(), CliError> {
    let dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    fs::create_dir_all(dir).map_err(CliError::io(dir))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(CliError::io(dir))?;
    tmp.write_all(contents).map_err(CliError::io(path))?;
    tmp.persist(path).map_err(|e| CliError::Io {
        path: path.to_path_buf(),
        source: e.error,
    })?;
    Ok(())
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = fs::read_to_string(path).map_err(CliError::io(path))?;
    serde_json::from_str(&text).map_err(|e| {
        let full = e.to_string();
        let suffix = format!(" at line {} column {}", e.line(), e.column());
        CliError::Config {
            path: path.to_path_buf(),
            line: e.line(),
            column: e.column(),
            message: full.strip_suffix(&suffix).unwrap_or(&full).to_owned(),
        }
    })
}

/// Validates a dataset directory and prints a summary to `out`.
pub fn validate(dir: &Path, out: &mut impl Write) -> Result<(), CliError> {
    let ds = load_dataset(dir)?;
    let w = |out: &mut dyn Write, line: String| writeln!(out, "{line}").map_err(CliError::io("<stdout>"));
    w(out, format!("dataset: {}", dir.display()))?;
    w(
        out,
        format!("N={} D={} C={}", ds.num_instances(), ds.dim(), ds.num_classes()),
    )?;
    w(out, format!("no-bird rows: {}", ds.no_bird_count()))?;
    w(out, "instances per day:".to_owned())?;
    for (day, count) in ds.day_histogram() {
        w(out, format!("  day {day}: {count}"))?;
    }
    w(out, "ok".to_owned())?;
    Ok(())
}

/// Generates a synthetic dataset into `out_dir` and checks that it reloads identically.
pub fn synth(config_path: &Path, seed: u64, out_dir: &Path) -> Result<(), CliError> {
    let cfg: SynthConfig = read_json(config_path)?;
    let ds = synth_dataset(&cfg, seed)?;
    write_dataset(&ds, out_dir)?;
    let reloaded = load_dataset(out_dir)?;
    if reloaded != ds {
        return Err(CliError::Schema {
            path: out_dir.to_path_buf(),
            message: "written dataset does not reload identically".into(),
        });
    }
    Ok(())
}

/// Summary of one `run` invocation, written as `run_report.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub config: ExperimentConfig,
    pub curves_csv: PathBuf,
    pub improvement_csv: PathBuf,
    pub baseline: Strategy,
    pub runs: usize,
    pub wall_clock_seconds: f64,
    pub wall_clock_seconds_per_run: f64,
    /// Top-1 accuracy leaves all-zero label rows out of its denominator.
    pub t1acc_excludes_no_bird_rows: bool,
}

/// The baseline for improvement curves: `random` when it was run, else the
/// first configured strategy.
pub fn default_baseline(cfg: &ExperimentConfig) -> Strategy {
    if cfg.strategies.contains(&Strategy::Random) {
        Strategy::Random
    } else {
        cfg.strategies[0]
    }
}

/// Loads the configuration, resolving a relative dataset path against the
/// configuration file's directory.
pub fn load_experiment_config(config_path: &Path) -> Result<(ExperimentConfig, PathBuf), CliError> {
    let cfg: ExperimentConfig = read_json(config_path)?;
    let dataset = if cfg.dataset.is_absolute() {
        cfg.dataset.clone()
    } else {
        config_path.parent().unwrap_or(Path::new(".")).join(&cfg.dataset)
    };
    Ok((cfg, dataset))
}

/// Runs the configured experiment and writes curves, improvements, the
/// configuration echo and the run report into `out_dir`.
pub fn run(config_path: &Path, out_dir: &Path, jobs: usize) -> Result<RunReport, CliError> {
    let (cfg, dataset_path) = load_experiment_config(config_path)?;
    cfg.validate()?;
    let ds = load_dataset(&dataset_path)?;
    let started = Instant::now();
    let experiment = Experiment::new(&ds, cfg.clone())?;
    let curve = experiment.run(jobs)?;
    let elapsed = started.elapsed().as_secs_f64();

    let curves_csv = out_dir.join(CURVES_FILE);
    let improvement_csv = out_dir.join(IMPROVEMENT_FILE);
    let curves_text = curves_to_string(&curve);
    // Summarize the curve as written so `report` on curves.csv reproduces improvement.csv.
    let written = parse_curves(&curves_text, &curves_csv)?;
    let baseline = default_baseline(&cfg);
    let improvement = improvement_curves(&written, baseline)?;
    write_atomic(&curves_csv, curves_text.as_bytes())?;
    write_atomic(&improvement_csv, improvement_to_string(&improvement).as_bytes())?;
    let mut echo = serde_json::to_string_pretty(&cfg).expect("config serializes");
    echo.push('\n');
    write_atomic(&out_dir.join(CONFIG_ECHO_FILE), echo.as_bytes())?;

    let runs = cfg.strategies.len() * cfg.repetitions;
    let report = RunReport {
        config: cfg,
        curves_csv,
        improvement_csv,
        baseline,
        runs,
        wall_clock_seconds: elapsed,
        wall_clock_seconds_per_run: elapsed / runs as f64,
        t1acc_excludes_no_bird_rows: true,
    };
    let mut text = serde_json::to_string_pretty(&report).expect("report serializes");
    text.push('\n');
    write_atomic(&out_dir.join(RUN_REPORT_FILE), text.as_bytes())?;
    Ok(report)
}

/// Recomputes improvement curves from `curves.csv`. Writes `improvement_out`
/// and, when `svg_dir` is given, one `improvement_<metric>.svg` per metric.
pub fn report(
    curves_path: &Path,
    baseline: Strategy,
    improvement_out: &Path,
    svg_dir: Option<&Path>,
) -> Result<Vec<PathBuf>, CliError> {
    let text = fs::read_to_string(curves_path).map_err(CliError::io(curves_path))?;
    let curve = parse_curves(&text, curves_path)?;
    let improvement = improvement_curves(&curve, baseline)?;
    write_atomic(improvement_out, improvement_to_string(&improvement).as_bytes())?;
    let mut written = vec![improvement_out.to_path_buf()];
    if let Some(dir) = svg_dir {
        for metric in Metric::ALL {
            let path = dir.join(format!("improvement_{metric}.svg"));
            write_atomic(&path, improvement_svg(&improvement, metric, baseline).as_bytes())?;
            written.push(path);
        }
    }
    Ok(written)
}
