use std::fmt::Write as _;

use anyhow::{Context, Result};
use omnidensity::density::{adaptive_sigma, DistortionParams};
use omnidensity::geom::{ProjectionParams, SpherePoint, DEFAULT_PLANE_RADIUS};
use omnidensity::raster::Raster;
use omnidensity::resample::EquirectImage;
use omnidensity::synth::{render_scene, synth_report, tissot, SceneSpec, TissotMode, TissotSample};
use serde::Serialize;

use super::{print_json, require_out};
use crate::config::{RunConfig, SynthArgs, TissotArgs, TissotModes};
use crate::draw;
use crate::run::Run;

#[derive(Serialize)]
struct SynthSummary {
    disks: usize,
    radius_strictly_decreasing: bool,
    pearson_radius_vs_kernel_sigma: f64,
    pearson_radius_vs_inverse_distance: f64,
    pearson_scale_vs_kernel_sigma: f64,
    max_relative_deviation: f64,
}

pub fn run(cfg: &RunConfig, a: &SynthArgs) -> Result<()> {
    let mut run = Run::new(Some(require_out(&a.out, "synth")?))?;
    let spec = match &a.scene {
        Some(path) => {
            let text = run.read_string(path)?;
            serde_json::from_str::<SceneSpec>(&text).with_context(|| format!("parsing {}", path.display()))?
        }
        None => SceneSpec::radial_sweep(a.size)?,
    };
    let scene = render_scene(&spec)?;
    let kernel = DistortionParams::with_defaults(a.sigma_alpha, spec.projection.width);
    let report = synth_report(&spec, &scene, &kernel)?;

    run.write("scene.png", &scene.image.raster.encode_png()?)?;
    let center = spec.projection.center();
    let mut overlay = draw::to_rgb(&scene.image.raster);
    for disk in &scene.disks {
        let c = disk.annotation.center;
        draw::circle(&mut overlay, c, disk.measured_radius_px, draw::RED);
        draw::circle(&mut overlay, c, adaptive_sigma(c, center, &kernel), draw::GREEN);
    }
    run.write("overlay.png", &overlay.encode_png()?)?;
    run.write("report.csv", report.to_csv().as_bytes())?;
    run.write_json("report.json", &report)?;
    run.write_json("disks.json", &scene.disks)?;

    print_json(&SynthSummary {
        disks: scene.disks.len(),
        radius_strictly_decreasing: report.radius_strictly_decreasing,
        pearson_radius_vs_kernel_sigma: report.pearson_radius_vs_kernel_sigma,
        pearson_radius_vs_inverse_distance: report.pearson_radius_vs_inverse_distance,
        pearson_scale_vs_kernel_sigma: report.pearson_scale_vs_kernel_sigma,
        max_relative_deviation: report.max_relative_deviation,
    })?;
    run.finish(cfg)
}

/// Directions on a polar grid around the image center (the south pole),
/// stopping short of both poles.
fn grid(step_deg: f64) -> Vec<(f64, f64, SpherePoint)> {
    let mut out = Vec::new();
    for i in 1.. {
        let polar_deg = i as f64 * step_deg;
        if polar_deg >= 180.0 - 1e-9 {
            break;
        }
        for j in 0.. {
            let azimuth_deg = j as f64 * step_deg;
            if azimuth_deg >= 360.0 - 1e-9 {
                break;
            }
            let (sp, cp) = polar_deg.to_radians().sin_cos();
            let (sa, ca) = azimuth_deg.to_radians().sin_cos();
            if let Ok(s) = SpherePoint::new(sp * ca, sp * sa, -cp) {
                out.push((polar_deg, azimuth_deg, s));
            }
        }
    }
    out
}

#[derive(Serialize)]
struct TissotEntry {
    polar_deg: f64,
    azimuth_deg: f64,
    #[serde(flatten)]
    sample: TissotSample,
}

pub fn run_tissot(cfg: &RunConfig, a: &TissotArgs) -> Result<()> {
    if !(a.step_deg > 0.0 && a.step_deg < 180.0) {
        return Err(omnidensity::Error::InvalidParams(format!(
            "grid step must be in (0, 180) degrees, got {}",
            a.step_deg
        ))
        .into());
    }
    let mut run = Run::new(Some(require_out(&a.out, "tissot")?))?;
    let params = ProjectionParams::framed(a.size, a.size, a.d, DEFAULT_PLANE_RADIUS)?;
    // keep clear of the projection center, where the map is undefined, and
    // of the opposite pole, where the equirectangular outline wraps
    let clear = |s: &SpherePoint| {
        s.angle_to(&SpherePoint::NORTH) > 2.0 * a.epsilon && s.angle_to(&SpherePoint::SOUTH) > 2.0 * a.epsilon
    };
    let dirs: Vec<_> = grid(a.step_deg).into_iter().filter(|d| clear(&d.2)).collect();
    let points: Vec<SpherePoint> = dirs.iter().map(|d| d.2).collect();
    let modes: &[(TissotMode, &str)] = match a.mode {
        TissotModes::Stereographic => &[(TissotMode::Stereographic, "stereographic")],
        TissotModes::Equirectangular => &[(TissotMode::Equirectangular, "equirectangular")],
        TissotModes::Both => &[
            (TissotMode::Stereographic, "stereographic"),
            (TissotMode::Equirectangular, "equirectangular"),
        ],
    };
    let mut csv = String::from("mode,polar_deg,azimuth_deg,a,b,axis_ratio,eccentricity\n");
    let mut all = serde_json::Map::new();
    for &(mode, name) in modes {
        let samples = tissot(&points, a.epsilon, &params, mode)?;
        let mut canvas = match mode {
            TissotMode::Stereographic => Raster::zeros(a.size, a.size, 3),
            TissotMode::Equirectangular => Raster::zeros(2 * a.size, a.size, 3),
        };
        let (cw, ch) = (canvas.width, canvas.height);
        for s in &samples {
            let outline: Vec<_> = match mode {
                TissotMode::Stereographic => s.outline.clone(),
                TissotMode::Equirectangular => s
                    .outline
                    .iter()
                    .map(|&(lon, lat)| EquirectImage::coord_to_pixel(lon, lat, cw, ch))
                    .collect(),
            };
            draw::closed_polyline(&mut canvas, &outline, draw::WHITE);
        }
        run.write(&format!("tissot_{name}.png"), &canvas.encode_png()?)?;
        let entries: Vec<_> = dirs
            .iter()
            .zip(samples)
            .map(|(&(polar_deg, azimuth_deg, _), sample)| {
                let e = &sample.ellipse;
                let _ = writeln!(
                    csv,
                    "{name},{polar_deg},{azimuth_deg},{},{},{},{}",
                    e.a,
                    e.b,
                    e.axis_ratio(),
                    e.eccentricity()
                );
                TissotEntry {
                    polar_deg,
                    azimuth_deg,
                    sample,
                }
            })
            .collect();
        all.insert(name.to_string(), serde_json::to_value(&entries)?);
    }
    run.write("tissot.csv", csv.as_bytes())?;
    run.write_json("tissot.json", &all)?;
    run.finish(cfg)
}
