//! Count evaluation: MAE and root-mean-squared error, count extraction from
//! density-map files, and comparison tables.
//!
//! Following the counting literature, the error reported as "MSE" is the
//! root of the mean squared residual. [`EvalResult::mean_squared`] gives the
//! unrooted value when needed.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataset::{FloatImage, Manifest};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub mae: f64,
    /// Root-mean-squared error.
    pub mse: f64,
    pub n: usize,
    /// `pred - gt` per sample, in input order.
    pub residuals: Vec<f64>,
}

impl EvalResult {
    pub fn mean_squared(&self) -> f64 {
        self.mse * self.mse
    }
}

pub fn evaluate(pred: &[f64], gt: &[f64]) -> Result<EvalResult> {
    if pred.len() != gt.len() {
        return Err(Error::LengthMismatch {
            pred: pred.len(),
            gt: gt.len(),
        });
    }
    if pred.is_empty() {
        return Err(Error::EmptyInput);
    }
    let residuals: Vec<f64> = pred.iter().zip(gt).map(|(p, g)| p - g).collect();
    let n = residuals.len() as f64;
    let mae = residuals.iter().map(|r| r.abs()).sum::<f64>() / n;
    let mse = (residuals.iter().map(|r| r * r).sum::<f64>() / n).sqrt();
    Ok(EvalResult {
        mae,
        mse,
        n: residuals.len(),
        residuals,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountPair {
    pub id: String,
    pub predicted: f64,
    pub ground_truth: f64,
}

/// File holding the density map for a record.
pub fn density_map_path(dir: &Path, id: &str) -> std::path::PathBuf {
    dir.join(format!("{id}.fimg"))
}

/// Integrates `<dir>/<id>.fimg` for every record and pairs it with the
/// record's annotation count.
pub fn counts_from_density_dir(dir: impl AsRef<Path>, manifest: &Manifest) -> Result<Vec<CountPair>> {
    let dir = dir.as_ref();
    let missing: Vec<String> = manifest
        .records
        .iter()
        .filter(|r| !density_map_path(dir, &r.id).is_file())
        .map(|r| r.id.clone())
        .collect();
    if !missing.is_empty() {
        return Err(Error::MissingMap(missing));
    }
    manifest
        .records
        .iter()
        .map(|r| {
            let map = FloatImage::read(density_map_path(dir, &r.id))?;
            Ok(CountPair {
                id: r.id.clone(),
                predicted: map.sum(),
                ground_truth: r.count() as f64,
            })
        })
        .collect()
}

/// Reads `id -> count` pairs from a CSV with an `id,count` header, or a JSON
/// object mapping ids to counts.
pub fn parse_count_table(text: &str) -> Result<BTreeMap<String, f64>> {
    let trimmed = text.trim_start();
    if trimmed.starts_with('{') {
        return serde_json::from_str(trimmed)
            .map_err(|e| Error::InvalidParams(format!("count table: {e}")));
    }
    let mut out = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || (i == 0 && line.starts_with("id")) {
            continue;
        }
        let (id, value) = line
            .split_once(',')
            .ok_or_else(|| Error::InvalidParams(format!("count table line {}: {line:?}", i + 1)))?;
        let value: f64 = value.trim().parse().map_err(|_| {
            Error::InvalidParams(format!("count table line {}: bad count {value:?}", i + 1))
        })?;
        out.insert(id.trim().to_string(), value);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationEntry {
    /// One cell per label column.
    pub labels: Vec<String>,
    pub mae: f64,
    pub mse: f64,
}

impl AblationEntry {
    pub fn new(labels: Vec<String>, result: &EvalResult) -> Self {
        Self {
            labels,
            mae: result.mae,
            mse: result.mse,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TableFormat {
    Markdown,
    Csv,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableOptions {
    pub label_headers: Vec<String>,
    pub mse_label: String,
    pub precision: usize,
    pub format: TableFormat,
}

impl Default for TableOptions {
    fn default() -> Self {
        Self {
            label_headers: vec!["Density function".into(), "Alignment".into()],
            mse_label: "MSE".into(),
            precision: 2,
            format: TableFormat::Markdown,
        }
    }
}

/// Indices holding the column minimum; values within `1e-12` of it tie.
pub fn best_rows(values: &[f64]) -> Vec<usize> {
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    values
        .iter()
        .enumerate()
        .filter(|(_, v)| (**v - min).abs() <= 1e-12 * min.abs().max(1.0))
        .map(|(i, _)| i)
        .collect()
}

/// Formats the comparison table with the lowest MAE and MSE flagged
/// (bold in Markdown, a `best` column in CSV).
pub fn ablation_table(entries: &[AblationEntry], opts: &TableOptions) -> String {
    let best_mae = best_rows(&entries.iter().map(|e| e.mae).collect::<Vec<_>>());
    let best_mse = best_rows(&entries.iter().map(|e| e.mse).collect::<Vec<_>>());
    let p = opts.precision;
    let mut out = String::new();
    let ncols = opts.label_headers.len();
    let label_cells = |e: &AblationEntry| -> Vec<String> {
        (0..ncols)
            .map(|i| e.labels.get(i).cloned().unwrap_or_default())
            .collect()
    };
    match opts.format {
        TableFormat::Markdown => {
            let mut head = opts.label_headers.clone();
            head.push("MAE".into());
            head.push(opts.mse_label.clone());
            let _ = writeln!(out, "| {} |", head.join(" | "));
            let _ = writeln!(out, "|{}", "---|".repeat(head.len()));
            for (i, e) in entries.iter().enumerate() {
                let cell = |v: f64, best: bool| {
                    if best {
                        format!("**{v:.p$}**")
                    } else {
                        format!("{v:.p$}")
                    }
                };
                let mut row = label_cells(e);
                row.push(cell(e.mae, best_mae.contains(&i)));
                row.push(cell(e.mse, best_mse.contains(&i)));
                let _ = writeln!(out, "| {} |", row.join(" | "));
            }
        }
        TableFormat::Csv => {
            let mut head: Vec<String> = opts.label_headers.iter().map(|h| csv_field(h)).collect();
            let mse = csv_field(&opts.mse_label);
            head.extend(["MAE".into(), mse.clone(), "MAE_best".into(), format!("{mse}_best")]);
            let _ = writeln!(out, "{}", head.join(","));
            for (i, e) in entries.iter().enumerate() {
                let mut row: Vec<String> = label_cells(e).iter().map(|c| csv_field(c)).collect();
                row.push(format!("{:.p$}", e.mae));
                row.push(format!("{:.p$}", e.mse));
                row.push(best_mae.contains(&i).to_string());
                row.push(best_mse.contains(&i).to_string());
                let _ = writeln!(out, "{}", row.join(","));
            }
        }
    }
    out
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}
