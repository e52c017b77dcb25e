use anyhow::{Context, Result};
use omnidensity::dataset::{CaptureMeta, ImageRecord, RotationSpec, Split};
use omnidensity::density::Annotation;
use omnidensity::geom::{EquirectCoord, ProjectionParams};
use omnidensity::resample::{annotate_reproject, reproject_with, EquirectImage, Interpolation};
use omnidensity::Execution;

use super::{load_image, require_out};
use crate::config::{Interp, ReprojectArgs, RunConfig};
use crate::run::Run;

pub fn run(cfg: &RunConfig, a: &ReprojectArgs) -> Result<()> {
    let mut run = Run::new(Some(require_out(&a.out, "reproject")?))?;
    let id = match &a.id {
        Some(id) => id.clone(),
        None => a
            .input
            .file_stem()
            .and_then(|s| s.to_str())
            .context("cannot derive an id from the input name; pass --id")?
            .to_string(),
    };
    let rotation = match &a.rotation {
        Some(path) => {
            run.read(path)?;
            RotationSpec::load_sidecar(path)?
        }
        None => RotationSpec::Euler {
            roll: a.roll,
            pitch: a.pitch,
            yaw: a.yaw,
        },
    };
    let rot = rotation.to_rotation();
    let params = ProjectionParams::framed(a.size, a.size, a.d, a.plane_radius)?;
    let src = EquirectImage::new(load_image(&mut run, &a.input)?)?;
    let interp = match a.interp {
        Interp::Bilinear => Interpolation::Bilinear,
        Interp::Nearest => Interpolation::Nearest,
    };
    let stereo = reproject_with(&src, &rot, &params, interp, Execution::default())?;
    let file = format!("{id}.png");
    run.write(&file, &stereo.raster.encode_png()?)?;

    let mut annotations = Vec::new();
    if let Some(path) = &a.annotations {
        let text = run.read_string(path)?;
        let coords: Vec<EquirectCoord> =
            serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        let (w, h) = (a.size as f64, a.size as f64);
        for (u, v) in annotate_reproject(&coords, &rot, &params)? {
            if u >= -0.5 && v >= -0.5 && u < w - 0.5 && v < h - 0.5 {
                annotations.push(Annotation::point(u, v));
            }
        }
        let lost = coords.len() - annotations.len();
        if lost > 0 {
            log::warn!("{lost} annotation(s) fall outside the {}x{} frame", a.size, a.size);
        }
    }
    let record = ImageRecord {
        id: id.clone(),
        source: file,
        rotation,
        projection: params,
        unit_area: None,
        annotations,
        split: Split::Train,
        capture: CaptureMeta::default(),
    };
    run.write_json(&format!("{id}.record.json"), &record)?;
    run.finish(cfg)
}
