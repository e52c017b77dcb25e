use anyhow::Result;
use omnidensity::dataset::{crop::CropProvenance, crop_unit_area};
use omnidensity::density::Annotation;
use omnidensity::resample::StereoImage;
use serde::{Deserialize, Serialize};

use super::{load_image, load_manifest, require_out, source_path};
use crate::config::{CropArgs, RunConfig};
use crate::run::Run;

pub const CROP_MANIFEST: &str = "crops.json";

/// One cropped image as listed in `crops.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CropRecord {
    pub id: String,
    pub file: String,
    pub width: usize,
    pub height: usize,
    /// Projection center in crop pixel coordinates (may lie outside the crop).
    pub distortion_center: (f64, f64),
    /// Half the source image width: the distance normaliser for this crop.
    pub d_norm: f64,
    pub annotations: Vec<Annotation>,
    pub provenance: CropProvenance,
}

pub fn run(cfg: &RunConfig, a: &CropArgs) -> Result<()> {
    let mut run = Run::new(Some(require_out(&a.out, "crop")?))?;
    let manifest = load_manifest(&mut run, &a.manifest)?;
    let mut records = Vec::new();
    for rec in &manifest.records {
        let Some(area) = &rec.unit_area else {
            log::warn!("{} has no unit area; skipped", rec.id);
            continue;
        };
        let raster = load_image(&mut run, &source_path(&a.manifest, &rec.source))?;
        let img = StereoImage::new(raster, rec.projection, None)?;
        let crop = crop_unit_area(&img, area, &rec.annotations)?;
        let (ox, oy) = crop.provenance.offset;
        let file = format!("{}.png", rec.id);
        run.write(&file, &crop.raster.encode_png()?)?;
        records.push(CropRecord {
            id: rec.id.clone(),
            file,
            width: crop.raster.width,
            height: crop.raster.height,
            distortion_center: (rec.projection.center_u - ox as f64, rec.projection.center_v - oy as f64),
            d_norm: rec.projection.width as f64 / 2.0,
            annotations: crop.annotations,
            provenance: crop.provenance,
        });
    }
    run.write_json(CROP_MANIFEST, &records)?;
    run.finish(cfg)
}
