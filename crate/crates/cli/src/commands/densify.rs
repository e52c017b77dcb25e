use std::path::Path;

use anyhow::{Context, Result};
use omnidensity::dataset::FloatImage;
use omnidensity::density::{render_density, Annotation, DistortionParams, KernelPolicy, KernelSpec};
use serde::Serialize;

use super::augment::TileEntry;
use super::crop::CropRecord;
use super::{load_manifest, require_out};
use crate::config::{DensifyArgs, KernelKind, RunConfig};
use crate::run::Run;

/// What a density map needs from any of the supported inputs.
struct Item {
    id: String,
    width: usize,
    height: usize,
    center: (f64, f64),
    d_norm: f64,
    annotations: Vec<Annotation>,
}

#[derive(Serialize)]
struct Summary {
    id: String,
    annotations: usize,
    sum: f64,
    geometry_fallback: bool,
}

fn read_list<T: serde::de::DeserializeOwned>(run: &mut Run, path: &Path) -> Result<Vec<T>> {
    let text = run.read_string(path)?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn stem(file: &str) -> String {
    Path::new(file)
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or(file)
        .to_string()
}

fn items(run: &mut Run, a: &DensifyArgs) -> Result<Vec<Item>> {
    if let Some(path) = &a.manifest {
        let m = load_manifest(run, path)?;
        return Ok(m
            .records
            .into_iter()
            .map(|r| Item {
                id: r.id,
                width: r.projection.width,
                height: r.projection.height,
                center: r.projection.center(),
                d_norm: r.projection.width as f64 / 2.0,
                annotations: r.annotations,
            })
            .collect());
    }
    if let Some(path) = &a.tiles {
        let tiles: Vec<TileEntry> = read_list(run, path)?;
        return Ok(tiles
            .into_iter()
            .map(|t| Item {
                id: stem(&t.tile.file),
                width: t.tile.width,
                height: t.tile.height,
                center: t.tile.provenance.distortion_center,
                d_norm: t.d_norm,
                annotations: t.tile.annotations,
            })
            .collect());
    }
    let path = a.crops.as_ref().context("one of --manifest, --tiles, --crops is required")?;
    let crops: Vec<CropRecord> = read_list(run, path)?;
    Ok(crops
        .into_iter()
        .map(|c| Item {
            id: c.id,
            width: c.width,
            height: c.height,
            center: c.distortion_center,
            d_norm: c.d_norm,
            annotations: c.annotations,
        })
        .collect())
}

fn kernel(a: &DensifyArgs, item: &Item) -> KernelSpec {
    let policy = match a.kernel {
        KernelKind::Fixed => KernelPolicy::Fixed { sigma: a.sigma },
        KernelKind::GeometryAdaptive => KernelPolicy::GeometryAdaptive {
            k: a.k,
            beta: a.beta,
            fallback_sigma: a.sigma,
        },
        KernelKind::DistortionAdaptive => KernelPolicy::DistortionAdaptive(DistortionParams {
            sigma_alpha: a.sigma_alpha,
            d_norm: a.d_norm.unwrap_or(item.d_norm),
            sigma_min: a.sigma_min,
            sigma_max: a.sigma_max.unwrap_or(4.0 * a.sigma_alpha),
        }),
    };
    KernelSpec {
        policy,
        truncation: a.truncation,
    }
}

pub fn run(cfg: &RunConfig, a: &DensifyArgs) -> Result<()> {
    let mut run = Run::new(Some(require_out(&a.out, "densify")?))?;
    let mut summary = Vec::new();
    for item in items(&mut run, a)? {
        let spec = kernel(a, &item);
        let map = render_density(&item.annotations, item.width, item.height, item.center, &spec)
            .with_context(|| format!("rendering {}", item.id))?;
        run.write(&format!("{}.fimg", item.id), &FloatImage::from_density(&map).encode())?;
        run.write(&format!("{}.png", item.id), &map.preview().encode_png()?)?;
        summary.push(Summary {
            annotations: item.annotations.len(),
            sum: map.sum(),
            geometry_fallback: map.meta.geometry_fallback,
            id: item.id,
        });
    }
    run.write_json("density.json", &summary)?;
    run.finish(cfg)
}
