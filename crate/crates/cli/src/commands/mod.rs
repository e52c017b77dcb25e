mod augment;
mod crop;
mod densify;
mod eval;
mod reproject;
mod synth;

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use omnidensity::dataset::{validate_manifest, Manifest};
use omnidensity::raster::Raster;

use crate::config::{Command, RunConfig};
use crate::run::Run;

pub fn dispatch(cfg: &RunConfig) -> Result<()> {
    match &cfg.command {
        Command::Reproject(a) => reproject::run(cfg, a),
        Command::Crop(a) => crop::run(cfg, a),
        Command::Augment(a) => augment::run(cfg, a),
        Command::Densify(a) => densify::run(cfg, a),
        Command::Synth(a) => synth::run(cfg, a),
        Command::Tissot(a) => synth::run_tissot(cfg, a),
        Command::Eval(a) => eval::run(cfg, a),
        Command::Discretize(a) => eval::run_discretize(cfg, a),
    }
}

fn require_out<'a>(out: &'a Option<PathBuf>, command: &str) -> Result<&'a Path> {
    out.as_deref().ok_or_else(|| {
        omnidensity::Error::InvalidParams(format!("{command} needs --out")).into()
    })
}

/// Loads and checks a dataset manifest; structural problems are fatal.
fn load_manifest(run: &mut Run, path: &Path) -> Result<Manifest> {
    let text = run.read_string(path)?;
    let manifest =
        Manifest::from_json(&text).with_context(|| format!("loading manifest {}", path.display()))?;
    let report = validate_manifest(&manifest);
    if let Some(issue) = report.issues.first() {
        return Err(omnidensity::Error::MalformedRecord {
            id: issue.record.clone().unwrap_or_else(|| "<manifest>".into()),
            reason: format!("{} ({} issue(s) in total)", issue.problem, report.issues.len()),
        })
        .with_context(|| format!("validating {}", path.display()));
    }
    Ok(manifest)
}

/// Record sources are relative to the manifest's directory.
fn source_path(manifest_path: &Path, source: &str) -> PathBuf {
    manifest_path.parent().unwrap_or(Path::new("")).join(source)
}

fn load_image(run: &mut Run, path: &Path) -> Result<Raster> {
    let bytes = run.read(path)?;
    drop(bytes);
    Raster::load(path).with_context(|| format!("decoding {}", path.display()))
}

fn print_json<T: serde::Serialize>(value: &T) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}
