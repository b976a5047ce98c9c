//! CSV result table and JSON sidecar.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::error::{io_err, HarnessError, Result};
use crate::runner::{Diagnostics, ResultRow, RunOutput};

/// Column order of the result table.
pub const CSV_HEADER: [&str; 12] = [
    "config_hash",
    "stage",
    "snr_db",
    "bler",
    "bler_ci_lo",
    "bler_ci_hi",
    "bleu",
    "rouge_l",
    "frames",
    "time_ms_mean",
    "provider",
    "code_source",
];

/// How the text metrics were computed; copied into every sidecar.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricNotes {
    pub tokenization: String,
    pub bleu: String,
    pub rouge: String,
    pub interval: String,
}

impl Default for MetricNotes {
    fn default() -> Self {
        MetricNotes {
            tokenization: "whitespace split, case-sensitive, trailing NUL padding removed".into(),
            bleu: "sentence BLEU-4, uniform weights, brevity penalty, add-one smoothing for zero-match orders 2-4".into(),
            rouge: "ROUGE-L F1 over word LCS".into(),
            interval: "Wilson score, 95%".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnrDiagnostics {
    pub snr_db: f64,
    #[serde(flatten)]
    pub counts: Diagnostics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sidecar {
    pub config_hash: String,
    pub config: ExperimentConfig,
    pub csv_header: Vec<String>,
    pub metrics: MetricNotes,
    pub harness_version: String,
    pub diagnostics: Vec<SnrDiagnostics>,
}

impl Sidecar {
    pub fn new(config: &ExperimentConfig, out: &RunOutput) -> Self {
        Sidecar {
            config_hash: out.config_hash.clone(),
            config: config.clone(),
            csv_header: CSV_HEADER.iter().map(|s| s.to_string()).collect(),
            metrics: MetricNotes::default(),
            harness_version: env!("CARGO_PKG_VERSION").to_string(),
            diagnostics: out.points.iter().map(|p| SnrDiagnostics { snr_db: p.snr_db, counts: p.diagnostics }).collect(),
        }
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(io_err(path))?;
        Ok(serde_json::from_str(&text)?)
    }
}

/// `results.csv` → `results.json`.
pub fn sidecar_path(csv_path: &Path) -> PathBuf {
    csv_path.with_extension("json")
}

fn record(row: &ResultRow) -> [String; 12] {
    [
        row.config_hash.clone(),
        row.stage.to_string(),
        row.snr_db.to_string(),
        row.bler.rate.to_string(),
        row.bler.ci_lo.to_string(),
        row.bler.ci_hi.to_string(),
        row.bleu.to_string(),
        row.rouge_l.to_string(),
        row.frames.to_string(),
        row.time_ms_mean.map(|t| t.to_string()).unwrap_or_default(),
        row.provider.clone(),
        row.code_source.clone(),
    ]
}

/// The result table as CSV text.
pub fn csv_string(rows: &[ResultRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(CSV_HEADER)?;
    for r in rows {
        w.write_record(record(r))?;
    }
    let bytes = w.into_inner().map_err(|e| HarnessError::Csv(e.into_error().into()))?;
    Ok(String::from_utf8(bytes).expect("csv of utf-8 fields"))
}

/// Writes the CSV to `config.output` and the sidecar next to it.
pub fn emit(config: &ExperimentConfig, out: &RunOutput) -> Result<(PathBuf, PathBuf)> {
    if out.rows.is_empty() {
        return Err(HarnessError::Config(vec!["nothing to write: no result rows".into()]));
    }
    let csv_path = config.output.clone();
    if let Some(dir) = csv_path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    std::fs::write(&csv_path, csv_string(&out.rows)?).map_err(io_err(&csv_path))?;
    let side = sidecar_path(&csv_path);
    let json = serde_json::to_string_pretty(&Sidecar::new(config, out))?;
    std::fs::write(&side, json + "\n").map_err(io_err(&side))?;
    Ok((csv_path, side))
}
