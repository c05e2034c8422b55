//! Run-log serialization.
//!
//! CSV layout (version [`CSV_SCHEMA_VERSION`]): a `# bilq-runlog v1` line,
//! one header row, then one row per step. Floats are written in Rust's
//! shortest round-trip form, so identical runs give identical bytes. Absent
//! values (no gain during exploration) are empty cells.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{Error, Result};

use super::config::{Experiment, ExperimentConfig};
use super::run::{run_model_based, run_online, RunLog, RunSummary, StepRecord};

pub const CSV_SCHEMA_VERSION: u32 = 1;
pub const MODEL_FREE_CSV: &str = "modelfree.csv";
pub const MODEL_BASED_CSV: &str = "modelbased.csv";
pub const COSTS_CSV: &str = "costs.csv";
pub const SUMMARY_JSON: &str = "summary.json";
pub const DATA_DUMP: &str = "data_matrices.txt";

fn float(v: f64) -> String {
    format!("{v:?}")
}

fn opt_float(v: Option<f64>) -> String {
    v.map(float).unwrap_or_default()
}

fn opt_bool(v: Option<bool>) -> String {
    v.map(|b| b.to_string()).unwrap_or_default()
}

pub fn csv_header(n: usize, m: usize) -> Vec<String> {
    let mut cols = vec!["t".to_string(), "phase".to_string()];
    cols.extend((0..n).map(|i| format!("x{i}")));
    cols.extend((0..m).map(|i| format!("u{i}")));
    cols.extend(["stage_cost", "discounted_cost", "retries"].map(String::from));
    for r in 0..m {
        cols.extend((0..n).map(|c| format!("k{r}_{c}")));
    }
    cols.extend(
        [
            "iterations",
            "residual",
            "converged",
            "spectral_radius",
            "transversality",
        ]
        .map(String::from),
    );
    cols
}

fn csv_row(r: &StepRecord, n: usize, m: usize) -> String {
    let mut cells = vec![r.t.to_string(), r.phase.as_str().to_string()];
    cells.extend(r.x.iter().map(|&v| float(v)));
    cells.extend(r.u.iter().map(|&v| float(v)));
    cells.push(float(r.stage_cost));
    cells.push(float(r.discounted_cost));
    cells.push(r.retries.to_string());
    match &r.gain {
        Some(k) => cells.extend(k.iter().map(|&v| float(v))),
        None => cells.extend(std::iter::repeat_n(String::new(), n * m)),
    }
    cells.push(r.iterations.to_string());
    cells.push(opt_float(r.residual));
    cells.push(opt_bool(r.converged));
    cells.push(opt_float(r.spectral_radius));
    cells.push(opt_bool(r.transversality));
    cells.join(",")
}

pub fn write_csv<W: Write>(log: &RunLog, mut out: W) -> Result<()> {
    let (n, m) = (log.summary.n, log.summary.m);
    writeln!(out, "# bilq-runlog v{CSV_SCHEMA_VERSION}")?;
    writeln!(out, "{}", csv_header(n, m).join(","))?;
    for r in &log.records {
        writeln!(out, "{}", csv_row(r, n, m))?;
    }
    Ok(())
}

pub fn csv_string(log: &RunLog) -> String {
    let mut buf = Vec::new();
    write_csv(log, &mut buf).expect("writing to memory cannot fail");
    String::from_utf8(buf).expect("CSV is ASCII")
}

/// Discounted cost curves of both modes side by side.
pub fn write_costs_csv<W: Write>(
    model_free: &RunLog,
    model_based: &RunLog,
    mut out: W,
) -> Result<()> {
    writeln!(out, "# bilq-costs v{CSV_SCHEMA_VERSION}")?;
    writeln!(
        out,
        "t,modelfree_discounted_cost,modelbased_discounted_cost"
    )?;
    let len = model_free.records.len().max(model_based.records.len());
    let cell = |log: &RunLog, t: usize| {
        log.records
            .get(t)
            .map(|r| float(r.discounted_cost))
            .unwrap_or_default()
    };
    for t in 0..len {
        writeln!(out, "{t},{},{}", cell(model_free, t), cell(model_based, t))?;
    }
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
pub struct SummaryDocument<'a> {
    pub schema_version: u32,
    pub config: &'a ExperimentConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model_free: Option<&'a RunSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model_based: Option<&'a RunSummary>,
    /// Model-based total discounted cost does not exceed the model-free one.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cost_dominance: Option<bool>,
}

impl<'a> SummaryDocument<'a> {
    pub fn new(
        config: &'a ExperimentConfig,
        model_free: Option<&'a RunLog>,
        model_based: Option<&'a RunLog>,
    ) -> Self {
        let cost_dominance = match (model_free, model_based) {
            (Some(mf), Some(mb)) => {
                Some(mb.summary.total_discounted_cost <= mf.summary.total_discounted_cost)
            }
            _ => None,
        };
        Self {
            schema_version: CSV_SCHEMA_VERSION,
            config,
            model_free: model_free.map(|l| &l.summary),
            model_based: model_based.map(|l| &l.summary),
            cost_dominance,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Io(e.to_string()))
    }
}

/// Output directory: explicit argument, then the config, then
/// [`OUT_DIR_ENV`](super::config::OUT_DIR_ENV), then `bilq-out`.
pub fn resolve_output_dir(explicit: Option<&Path>, experiment: &Experiment) -> PathBuf {
    explicit
        .map(Path::to_path_buf)
        .or_else(|| experiment.output_dir.clone())
        .or_else(|| std::env::var_os(super::config::OUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("bilq-out"))
}

fn write_file(path: &Path, write: impl FnOnce(&mut fs::File) -> Result<()>) -> Result<()> {
    let mut file =
        fs::File::create(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    write(&mut file)?;
    file.flush()?;
    Ok(())
}

/// Files written by [`write_outputs`].
#[derive(Debug, Clone, Default, PartialEq)]
pub struct WrittenFiles {
    pub paths: Vec<PathBuf>,
}

/// Writes whichever run logs are present, the cost join when both are, the
/// summary, and optionally the frozen data dump.
pub fn write_outputs(
    dir: &Path,
    config: &ExperimentConfig,
    model_free: Option<&RunLog>,
    model_based: Option<&RunLog>,
    dump_data: bool,
) -> Result<WrittenFiles> {
    fs::create_dir_all(dir).map_err(|e| Error::Io(format!("{}: {e}", dir.display())))?;
    let mut written = WrittenFiles::default();
    if let Some(log) = model_free {
        let path = dir.join(MODEL_FREE_CSV);
        write_file(&path, |f| write_csv(log, f))?;
        written.paths.push(path);
        if dump_data {
            if let Some(data) = &log.data {
                let path = dir.join(DATA_DUMP);
                write_file(&path, |f| data.write_dump(f))?;
                written.paths.push(path);
            }
        }
    }
    if let Some(log) = model_based {
        let path = dir.join(MODEL_BASED_CSV);
        write_file(&path, |f| write_csv(log, f))?;
        written.paths.push(path);
    }
    if let (Some(mf), Some(mb)) = (model_free, model_based) {
        let path = dir.join(COSTS_CSV);
        write_file(&path, |f| write_costs_csv(mf, mb, f))?;
        written.paths.push(path);
    }
    let path = dir.join(SUMMARY_JSON);
    let json = SummaryDocument::new(config, model_free, model_based).to_json()?;
    write_file(&path, |f| Ok(writeln!(f, "{json}")?))?;
    written.paths.push(path);
    Ok(written)
}

/// Runs both modes on independent copies of the plant, concurrently.
pub fn compare(experiment: &Experiment) -> Result<(RunLog, RunLog)> {
    let settings = &experiment.settings;
    let (mf, mb) = std::thread::scope(|scope| {
        let model_free = scope.spawn(|| {
            let mut plant = experiment.system.clone();
            run_online(&mut plant, settings)
        });
        let model_based = scope.spawn(|| run_model_based(&experiment.system, settings));
        (
            model_free.join().expect("model-free run panicked"),
            model_based.join().expect("model-based run panicked"),
        )
    });
    Ok((mf?, mb?))
}
