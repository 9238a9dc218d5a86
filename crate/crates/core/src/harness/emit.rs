//! Output files: CSV tables, JSON reports and the run manifest.
//!
//! All files are UTF-8 with a header row and `.` as the decimal separator.
//! Floats use the shortest representation that parses back to the same
//! value. Files are built in memory and then written through a temporary
//! file that is renamed into place.

use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::ExperimentConfig;
use super::sweep::aggregate;
use super::train::{eval_grid, RunRecord};
use crate::data::{ground_truth, make_dataset, write_dataset_csv};
use crate::error::{Error, Result};
use crate::verify::regret::RegretTrace;

#[derive(Debug, Clone, PartialEq)]
pub struct OutputFile {
    pub name: String,
    pub bytes: Vec<u8>,
}

/// One row of `results.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub optimizer: String,
    pub p: u32,
    pub nu_noise: f64,
    pub scale: f64,
    pub seed: u64,
    pub final_clean_mse: f64,
    pub epochs: usize,
}

impl From<&RunRecord> for ResultRow {
    fn from(r: &RunRecord) -> Self {
        Self {
            optimizer: r.optimizer.clone(),
            p: r.noise.p_percent,
            nu_noise: r.noise.nu_noise,
            scale: r.noise.scale,
            seed: r.seed,
            final_clean_mse: r.final_clean_mse,
            epochs: r.epochs,
        }
    }
}

#[derive(Debug, Serialize)]
struct DiagnosticsRow<'a> {
    optimizer: &'a str,
    p: u32,
    nu_noise: f64,
    scale: f64,
    seed: u64,
    epoch: usize,
    mean_w: f64,
    min_w: f64,
    mean_beta_w: f64,
}

#[derive(Debug, Serialize)]
struct PredictionRow<'a> {
    optimizer: &'a str,
    p: u32,
    nu_noise: f64,
    scale: f64,
    seed: u64,
    x: f64,
    prediction: f64,
    ground_truth: f64,
}

#[derive(Debug, Serialize)]
struct RegretRow<'a> {
    optimizer: &'a str,
    seed: u64,
    t: usize,
    cumulative_regret: f64,
    clean_regret: f64,
    bound_first: f64,
    bound_second: f64,
    bound_third: f64,
    bound_rhs: f64,
}

/// Serializes rows under an explicit header, so empty tables keep their columns.
fn csv_bytes_with_header<T: Serialize>(header: &[&str], rows: impl IntoIterator<Item = T>) -> Result<Vec<u8>> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    w.write_record(header)?;
    for row in rows {
        w.serialize(row)?;
    }
    w.into_inner().map_err(|e| Error::io("<csv buffer>", e.into_error()))
}

pub fn results_csv(records: &[RunRecord]) -> Result<Vec<u8>> {
    csv_bytes_with_header(
        &["optimizer", "p", "nu_noise", "scale", "seed", "final_clean_mse", "epochs"],
        records.iter().map(ResultRow::from),
    )
}

pub fn read_results_csv<R: Read>(input: R) -> Result<Vec<ResultRow>> {
    let mut r = csv::Reader::from_reader(input);
    let headers = r.headers()?.clone();
    for want in ["optimizer", "p", "nu_noise", "scale", "seed", "final_clean_mse", "epochs"] {
        if !headers.iter().any(|h| h == want) {
            return Err(Error::Parse {
                line: 1,
                message: format!("missing column `{want}`"),
            });
        }
    }
    Ok(r.deserialize().collect::<std::result::Result<Vec<ResultRow>, _>>()?)
}

pub fn diagnostics_csv(records: &[RunRecord]) -> Result<Vec<u8>> {
    let rows = records.iter().flat_map(|r| {
        r.diagnostics.iter().map(move |d| DiagnosticsRow {
            optimizer: &r.optimizer,
            p: r.noise.p_percent,
            nu_noise: r.noise.nu_noise,
            scale: r.noise.scale,
            seed: r.seed,
            epoch: d.epoch,
            mean_w: d.mean_w,
            min_w: d.min_w,
            mean_beta_w: d.mean_beta_w,
        })
    });
    csv_bytes_with_header(
        &["optimizer", "p", "nu_noise", "scale", "seed", "epoch", "mean_w", "min_w", "mean_beta_w"],
        rows,
    )
}

pub fn predictions_csv(records: &[RunRecord], eval_points: usize) -> Result<Vec<u8>> {
    let grid = eval_grid(eval_points);
    let grid = &grid;
    let rows = records.iter().flat_map(|r| {
        r.predictions.iter().zip(grid).map(move |(p, &x)| PredictionRow {
            optimizer: &r.optimizer,
            p: r.noise.p_percent,
            nu_noise: r.noise.nu_noise,
            scale: r.noise.scale,
            seed: r.seed,
            x,
            prediction: *p,
            ground_truth: ground_truth(x),
        })
    });
    csv_bytes_with_header(
        &["optimizer", "p", "nu_noise", "scale", "seed", "x", "prediction", "ground_truth"],
        rows,
    )
}

pub fn summary_csv(records: &[RunRecord]) -> Result<Vec<u8>> {
    csv_bytes_with_header(
        &["optimizer", "nu_noise", "scale", "p", "runs", "diverged", "median", "q25", "q75"],
        aggregate(records),
    )
}

pub fn regret_trace_csv(traces: &[RegretTrace], stride: usize) -> Result<Vec<u8>> {
    let stride = stride.max(1);
    let rows = traces.iter().flat_map(|tr| {
        (1..=tr.horizon)
            .filter(move |t| t % stride == 0 || *t == 1 || *t == tr.horizon)
            .map(move |t| {
                let b = tr.bound_series.get(t - 1);
                RegretRow {
                    optimizer: &tr.optimizer,
                    seed: tr.seed,
                    t,
                    cumulative_regret: tr.cumulative_regret[t - 1],
                    clean_regret: tr.clean_regret[t - 1],
                    bound_first: b.map_or(f64::NAN, |b| b.first),
                    bound_second: b.map_or(f64::NAN, |b| b.second),
                    bound_third: b.map_or(f64::NAN, |b| b.third),
                    bound_rhs: b.map_or(f64::NAN, |b| b.total()),
                }
            })
    });
    csv_bytes_with_header(
        &[
            "optimizer",
            "seed",
            "t",
            "cumulative_regret",
            "clean_regret",
            "bound_first",
            "bound_second",
            "bound_third",
            "bound_rhs",
        ],
        rows,
    )
}

pub fn json_bytes<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    Ok(bytes)
}

/// Datasets of every (noise, p, seed) cell, one CSV each.
pub fn dataset_files(config: &ExperimentConfig) -> Result<Vec<OutputFile>> {
    let mut files = Vec::new();
    for noise in config.noise_grid() {
        for &seed in &config.seeds {
            let data = make_dataset(config.samples, &noise, seed)?;
            let mut bytes = Vec::new();
            write_dataset_csv(&data, &mut bytes)?;
            files.push(OutputFile {
                name: format!("datasets/nu{}_scale{}_p{}_seed{}.csv", noise.nu_noise, noise.scale, noise.p_percent, seed),
                bytes,
            });
        }
    }
    Ok(files)
}

/// The files written for a regression sweep, manifest excluded.
pub fn regression_files(records: &[RunRecord], config: &ExperimentConfig) -> Result<Vec<OutputFile>> {
    if records.is_empty() {
        return Err(Error::InvalidConfig("no records to emit".into()));
    }
    let mut files = vec![
        OutputFile { name: "results.csv".into(), bytes: results_csv(records)? },
        OutputFile { name: "diagnostics.csv".into(), bytes: diagnostics_csv(records)? },
        OutputFile { name: "predictions.csv".into(), bytes: predictions_csv(records, config.eval_points)? },
        OutputFile { name: "summary.csv".into(), bytes: summary_csv(records)? },
    ];
    if config.export_datasets {
        files.extend(dataset_files(config)?);
    }
    Ok(files)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub name: String,
    pub sha256: String,
    pub bytes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format_version: u32,
    pub experiment: String,
    pub config_hash: String,
    /// Rendered configuration without `out` and `workers`.
    pub config: String,
    pub package: String,
    pub version: String,
    pub files: Vec<ManifestEntry>,
}

impl Manifest {
    pub fn new(config: &ExperimentConfig, files: &[OutputFile]) -> Self {
        let text: String = config
            .render()
            .lines()
            .filter(|l| !l.starts_with("out =") && !l.starts_with("workers ="))
            .map(|l| format!("{l}\n"))
            .collect();
        Self {
            format_version: 1,
            experiment: config.experiment.name().into(),
            config_hash: config.hash(),
            config: text,
            package: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            files: files
                .iter()
                .map(|f| ManifestEntry {
                    name: f.name.clone(),
                    sha256: hex::encode(Sha256::digest(&f.bytes)),
                    bytes: f.bytes.len(),
                })
                .collect(),
        }
    }

    /// Configuration recorded in the manifest, ready to re-run.
    pub fn config(&self) -> Result<ExperimentConfig> {
        ExperimentConfig::parse(&self.config)
    }
}

pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

/// Writes `files` and a `manifest.json` describing them under `dir`.
pub fn write_outputs(dir: &Path, config: &ExperimentConfig, files: &[OutputFile]) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = Vec::with_capacity(files.len() + 1);
    for f in files {
        let path = dir.join(&f.name);
        write_atomic(&path, &f.bytes)?;
        written.push(path);
    }
    let manifest = Manifest::new(config, files);
    let path = dir.join("manifest.json");
    write_atomic(&path, &json_bytes(&manifest)?)?;
    written.push(path);
    Ok(written)
}

/// Writes the regression outputs for `records` under `output_dir`.
pub fn emit_results(records: &[RunRecord], config: &ExperimentConfig, output_dir: &Path) -> Result<Vec<PathBuf>> {
    let files = regression_files(records, config)?;
    write_outputs(output_dir, config, &files)
}
