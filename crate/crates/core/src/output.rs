//! Output bundles: a manifest plus CSV tables and JSON summaries.
//!
//! The manifest is written before any data with `status: "incomplete"` and
//! rewritten with `status: "complete"` once every file is closed. Floats use
//! Rust's shortest round-trip formatting, so CSV and JSON values parse back to
//! the exact same `f64`.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::disorder::RNG_ALGORITHM;
use crate::error::Result;
use crate::experiment::{EnsembleConfig, EnsembleSummary, SweepResult};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunStatus {
    Incomplete,
    Complete,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub wall_clock_secs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub status: RunStatus,
    pub master_seed: u64,
    pub rng: String,
    pub fraction_mode: String,
    /// Fully resolved command configuration.
    pub config: serde_json::Value,
    /// Files written so far, in order.
    pub files: Vec<String>,
    /// Only present when timings were requested; they differ between runs.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub timings: Option<Timings>,
}

impl RunManifest {
    pub fn new<C: Serialize>(
        command: &str,
        master_seed: u64,
        fraction_mode: &str,
        config: &C,
    ) -> Result<Self> {
        Ok(RunManifest {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            status: RunStatus::Incomplete,
            master_seed,
            rng: RNG_ALGORITHM.to_string(),
            fraction_mode: fraction_mode.to_string(),
            config: serde_json::to_value(config)?,
            files: Vec::new(),
            timings: None,
        })
    }
}

/// Directory of output files governed by one manifest.
#[derive(Debug)]
pub struct OutputBundle {
    dir: PathBuf,
    manifest: RunManifest,
}

impl OutputBundle {
    /// Creates `dir` if needed and writes the incomplete manifest.
    pub fn create(dir: impl Into<PathBuf>, manifest: RunManifest) -> Result<Self> {
        let dir = dir.into();
        fs::create_dir_all(&dir)?;
        let bundle = OutputBundle { dir, manifest };
        bundle.write_manifest()?;
        Ok(bundle)
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn manifest(&self) -> &RunManifest {
        &self.manifest
    }

    /// Writes one file through a buffered writer and lists it in the
    /// manifest.
    pub fn write_file<F>(&mut self, name: &str, write: F) -> Result<()>
    where
        F: FnOnce(&mut BufWriter<File>) -> Result<()>,
    {
        let mut out = BufWriter::new(File::create(self.dir.join(name))?);
        write(&mut out)?;
        out.flush()?;
        self.manifest.files.push(name.to_string());
        self.write_manifest()
    }

    /// Pretty JSON with a trailing newline.
    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        self.write_file(name, |out| {
            serde_json::to_writer_pretty(&mut *out, value)?;
            out.write_all(b"\n")?;
            Ok(())
        })
    }

    pub fn finish(mut self, timings: Option<Timings>) -> Result<RunManifest> {
        self.manifest.status = RunStatus::Complete;
        self.manifest.timings = timings;
        self.write_manifest()?;
        Ok(self.manifest)
    }

    fn write_manifest(&self) -> Result<()> {
        // write-then-rename so a kill never leaves a torn manifest
        let tmp = self.dir.join(".manifest.json.tmp");
        {
            let mut out = BufWriter::new(File::create(&tmp)?);
            serde_json::to_writer_pretty(&mut out, &self.manifest)?;
            out.write_all(b"\n")?;
            out.flush()?;
        }
        fs::rename(tmp, self.dir.join(MANIFEST_FILE))?;
        Ok(())
    }
}

pub fn read_manifest(dir: &Path) -> Result<RunManifest> {
    let text = fs::read_to_string(dir.join(MANIFEST_FILE))?;
    Ok(serde_json::from_str(&text)?)
}

pub const ENSEMBLE_CSV_HEADER: [&str; 16] = [
    "theta",
    "w",
    "n",
    "steps",
    "realizations",
    "fraction_timestep",
    "fraction_timestep_se",
    "fraction_cell",
    "fraction_cell_se",
    "fraction_realization",
    "fraction_realization_se",
    "p_max_mean",
    "p_max_se",
    "threshold_mean",
    "event_count_total",
    "cell_count_total",
];

/// One-row CSV of an ensemble summary.
pub fn write_ensemble_csv<W: Write>(
    out: W,
    config: &EnsembleConfig,
    summary: &EnsembleSummary,
) -> Result<()> {
    let f = &summary.fractions;
    let mut wtr = csv::Writer::from_writer(out);
    wtr.write_record(ENSEMBLE_CSV_HEADER)?;
    wtr.write_record([
        config.theta.radians().to_string(),
        config.w.value().to_string(),
        config.n_sites.to_string(),
        config.steps().to_string(),
        summary.realizations.to_string(),
        f.timestep.mean.to_string(),
        f.timestep.std_error.to_string(),
        f.cell.mean.to_string(),
        f.cell.std_error.to_string(),
        f.realization.mean.to_string(),
        f.realization.std_error.to_string(),
        summary.mean_max_probability.mean.to_string(),
        summary.mean_max_probability.std_error.to_string(),
        summary.mean_threshold.to_string(),
        summary.event_count_total.to_string(),
        summary.cell_count_total.to_string(),
    ])?;
    wtr.flush()?;
    Ok(())
}

pub const SWEEP_CSV_HEADER: [&str; 9] = [
    "theta",
    "w",
    "n",
    "fraction_timestep",
    "fraction_cell",
    "fraction_realization",
    "p_max_mean",
    "p_max_se",
    "threshold_mean",
];

/// Long-format sweep table, one row per grid cell.
pub fn write_sweep_csv<W: Write>(out: W, sweep: &SweepResult) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(out);
    wtr.write_record(SWEEP_CSV_HEADER)?;
    for cell in &sweep.cells {
        let s = &cell.summary;
        wtr.write_record([
            cell.theta.to_string(),
            cell.w.to_string(),
            cell.n_sites.to_string(),
            s.fractions.timestep.mean.to_string(),
            s.fractions.cell.mean.to_string(),
            s.fractions.realization.mean.to_string(),
            s.mean_max_probability.mean.to_string(),
            s.mean_max_probability.std_error.to_string(),
            s.mean_threshold.to_string(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}
