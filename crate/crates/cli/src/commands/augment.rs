use anyhow::{Context, Result};
use omnidensity::augment::{augment_image, downscale_and_tile, AugmentConfig, AugmentInput, Tile, TileRecord};
use omnidensity::resample::StereoImage;
use omnidensity::Execution;
use serde::{Deserialize, Serialize};

use super::{load_image, load_manifest, require_out, source_path};
use crate::config::{AugmentArgs, RunConfig};
use crate::run::Run;

pub const TILE_MANIFEST: &str = "tiles.json";

/// A tile as listed in `tiles.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TileEntry {
    #[serde(flatten)]
    pub tile: TileRecord,
    /// Distance normaliser of the source image, in this tile's pixels.
    pub d_norm: f64,
}

pub fn run(cfg: &RunConfig, a: &AugmentArgs) -> Result<()> {
    let mut run = Run::new(Some(require_out(&a.out, "augment")?))?;
    let manifest = load_manifest(&mut run, &a.manifest)?;
    let acfg = AugmentConfig {
        rotations: a.rotations,
        flip: a.flip,
        flip_first: !a.flip_after,
        seed: cfg.seed,
    };
    let tiling = match (a.downscale, a.tile_size) {
        (Some(target), tile) => Some((target, tile.unwrap_or(target))),
        (None, _) => None,
    };
    let mut entries = Vec::new();
    let records = &manifest.records;
    let batch = a.batch.max(1);
    for start in (0..records.len()).step_by(batch) {
        let chunk = &records[start..(start + batch).min(records.len())];
        let mut images = Vec::with_capacity(chunk.len());
        for rec in chunk {
            let raster = load_image(&mut run, &source_path(&a.manifest, &rec.source))?;
            images.push(StereoImage::new(raster, rec.projection, None)?);
        }
        let outputs = Execution::default().map_indexed(chunk.len(), |i| {
            let input = AugmentInput {
                id: &chunk[i].id,
                image: &images[i],
                annotations: &chunk[i].annotations,
            };
            augment_image(start + i, &input, &acfg)
        });
        for (rec, (img, tiles)) in chunk.iter().zip(images.iter().zip(outputs)) {
            let tiles = tiles.with_context(|| format!("augmenting {}", rec.id))?;
            let half_width = img.raster.width as f64 / 2.0;
            for (k, tile) in tiles.into_iter().enumerate() {
                let stem = format!("{}_{k:02}", rec.id);
                match tiling {
                    None => entries.push(emit(&mut run, &stem, &tile, half_width)?),
                    Some((target, size)) => {
                        for (j, t) in downscale_and_tile(&tile, target, size)?.iter().enumerate() {
                            let stem = format!("{stem}_{j:02}");
                            entries.push(emit(&mut run, &stem, t, half_width * t.provenance.scale)?);
                        }
                    }
                }
            }
        }
    }
    log::info!("wrote {} tiles from {} images", entries.len(), records.len());
    run.write_json(TILE_MANIFEST, &entries)?;
    run.finish(cfg)
}

fn emit(run: &mut Run, stem: &str, tile: &Tile, d_norm: f64) -> Result<TileEntry> {
    let file = format!("{stem}.png");
    run.write(&file, &tile.raster.encode_png()?)?;
    let record = TileRecord {
        file,
        width: tile.raster.width,
        height: tile.raster.height,
        annotations: tile.annotations.clone(),
        provenance: tile.provenance.clone(),
    };
    run.write_json(&format!("{stem}.json"), &record)?;
    Ok(TileEntry { tile: record, d_norm })
}
