//! Whole-image reprojection from an equirectangular panorama to a
//! stereographic raster.
//!
//! Destination-driven: every output pixel is pulled back through
//! pixel -> plane -> sphere -> inverse rotation -> longitude/latitude and the
//! source is sampled there. Rows are independent, so the destination is
//! split into row bands for parallel execution with no shared state.

use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_2, PI, TAU};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::geom::{
    self, equirect_raw, unstereo_raw, EquirectCoord, ProjectionParams, SphereRotation,
};
use crate::raster::Raster;

/// Full-sphere equirectangular panorama, `width = 2 * height`.
#[derive(Debug, Clone, PartialEq)]
pub struct EquirectImage {
    raster: Raster,
}

impl EquirectImage {
    pub fn new(raster: Raster) -> Result<Self> {
        if raster.width != 2 * raster.height || raster.height == 0 {
            return Err(Error::DimensionMismatch(format!(
                "equirectangular source must be 2:1, got {}x{}",
                raster.width, raster.height
            )));
        }
        Ok(Self { raster })
    }

    /// Samples `f(direction)` at every pixel center.
    pub fn from_fn(
        height: usize,
        channels: usize,
        f: impl Fn(geom::SpherePoint, &mut [f32]),
    ) -> Result<Self> {
        let width = 2 * height;
        let mut raster = Raster::zeros(width, height, channels);
        for y in 0..height {
            for x in 0..width {
                let c = Self::pixel_to_coord(x as f64, y as f64, width, height);
                f(geom::equirect_to_sphere(c), raster.pixel_mut(x, y));
            }
        }
        Self::new(raster)
    }

    pub fn raster(&self) -> &Raster {
        &self.raster
    }

    pub fn into_raster(self) -> Raster {
        self.raster
    }

    pub fn width(&self) -> usize {
        self.raster.width
    }

    pub fn height(&self) -> usize {
        self.raster.height
    }

    /// Continuous pixel-center coordinate of a longitude/latitude.
    #[inline]
    pub fn coord_to_pixel(lon: f64, lat: f64, width: usize, height: usize) -> (f64, f64) {
        (
            (lon + PI) / TAU * width as f64 - 0.5,
            (FRAC_PI_2 - lat) / PI * height as f64 - 0.5,
        )
    }

    pub fn pixel_to_coord(u: f64, v: f64, width: usize, height: usize) -> EquirectCoord {
        EquirectCoord::new(
            (u + 0.5) / width as f64 * TAU - PI,
            FRAC_PI_2 - (v + 0.5) / height as f64 * PI,
        )
    }

    /// Bilinear lookup with longitude wrap-around and latitude clamping.
    #[inline]
    fn sample_bilinear(&self, col: f64, row: f64, out: &mut [f32]) {
        let r = &self.raster;
        let (w, h) = (r.width, r.height);
        let row = row.clamp(0.0, (h - 1) as f64);
        let y0 = row.floor();
        let fy = (row - y0) as f32;
        let y0 = y0 as usize;
        let y1 = (y0 + 1).min(h - 1);

        let x0f = col.floor();
        let fx = (col - x0f) as f32;
        let x0 = (x0f as i64).rem_euclid(w as i64) as usize;
        let x1 = if x0 + 1 == w { 0 } else { x0 + 1 };

        let ch = r.channels;
        let (p00, p10, p01, p11) = (
            (y0 * w + x0) * ch,
            (y0 * w + x1) * ch,
            (y1 * w + x0) * ch,
            (y1 * w + x1) * ch,
        );
        let d = &r.data;
        for c in 0..ch {
            let top = d[p00 + c] + (d[p10 + c] - d[p00 + c]) * fx;
            let bot = d[p01 + c] + (d[p11 + c] - d[p01 + c]) * fx;
            out[c] = top + (bot - top) * fy;
        }
    }

    #[inline]
    fn sample_nearest(&self, col: f64, row: f64, out: &mut [f32]) {
        let r = &self.raster;
        let (w, h) = (r.width, r.height);
        let y = (row.round().max(0.0) as usize).min(h - 1);
        let x = (col.round() as i64).rem_euclid(w as i64) as usize;
        out.copy_from_slice(r.pixel(x, y));
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Interpolation {
    Nearest,
    #[default]
    Bilinear,
}

/// A stereographic raster tied to the plane by its projection parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct StereoImage {
    pub raster: Raster,
    pub params: ProjectionParams,
    /// Per-pixel validity; `None` means every pixel is valid.
    pub mask: Option<Vec<bool>>,
}

impl StereoImage {
    pub fn new(raster: Raster, params: ProjectionParams, mask: Option<Vec<bool>>) -> Result<Self> {
        params.validate()?;
        if raster.width != params.width || raster.height != params.height {
            return Err(Error::DimensionMismatch(format!(
                "raster {}x{} vs params {}x{}",
                raster.width, raster.height, params.width, params.height
            )));
        }
        if let Some(m) = &mask {
            if m.len() != raster.width * raster.height {
                return Err(Error::DimensionMismatch(format!(
                    "mask has {} entries for {} pixels",
                    m.len(),
                    raster.width * raster.height
                )));
            }
        }
        Ok(Self {
            raster,
            params,
            mask,
        })
    }

    pub fn is_valid(&self, x: usize, y: usize) -> bool {
        self.mask
            .as_ref()
            .is_none_or(|m| m[y * self.raster.width + x])
    }

    /// Mean over valid pixels and channels.
    pub fn valid_mean(&self) -> f64 {
        let r = &self.raster;
        let mut sum = 0.0;
        let mut n = 0usize;
        for y in 0..r.height {
            for x in 0..r.width {
                if self.is_valid(x, y) {
                    sum += r.pixel(x, y).iter().map(|&v| v as f64).sum::<f64>();
                    n += r.channels;
                }
            }
        }
        if n == 0 {
            0.0
        } else {
            sum / n as f64
        }
    }
}

/// Reprojects `src` into a stereographic raster described by `params`.
///
/// `rot` maps source (camera) directions into the aligned frame; each
/// destination pixel therefore samples the source at `rot^-1 * s`.
pub fn reproject(
    src: &EquirectImage,
    rot: &SphereRotation,
    params: &ProjectionParams,
    interp: Interpolation,
) -> Result<StereoImage> {
    reproject_with(src, rot, params, interp, Execution::default())
}

pub fn reproject_with(
    src: &EquirectImage,
    rot: &SphereRotation,
    params: &ProjectionParams,
    interp: Interpolation,
    exec: Execution,
) -> Result<StereoImage> {
    params.validate()?;
    let channels = src.raster.channels;
    let (w, h) = (params.width, params.height);
    let (sw, sh) = (src.width(), src.height());
    let inv = rot.inverse();
    let p = *params;
    let mut raster = Raster::zeros(w, h, channels);

    exec.for_each_chunk(&mut raster.data, w * channels, |y, row| {
        let py = (y as f64 - p.center_v) / p.scale;
        for x in 0..w {
            let px = (x as f64 - p.center_u) / p.scale;
            let s = unstereo_raw(px, py, p.d);
            let [sx, sy, sz] = inv.apply_raw(s);
            let (lon, lat) = equirect_raw(sx, sy, sz);
            let (col, rowf) = EquirectImage::coord_to_pixel(lon, lat, sw, sh);
            let out = &mut row[x * channels..(x + 1) * channels];
            match interp {
                Interpolation::Bilinear => src.sample_bilinear(col, rowf, out),
                Interpolation::Nearest => src.sample_nearest(col, rowf, out),
            }
        }
    });

    StereoImage::new(raster, *params, None)
}

/// Carries source-frame annotation directions through the same transform as
/// [`reproject`], forward and without interpolation.
pub fn annotate_reproject(
    points: &[EquirectCoord],
    rot: &SphereRotation,
    params: &ProjectionParams,
) -> Result<Vec<(f64, f64)>> {
    points
        .iter()
        .enumerate()
        .map(|(index, c)| {
            let s = geom::rotate_sphere(geom::equirect_to_sphere(*c), rot);
            geom::sphere_to_pixel(s, params).map_err(|_| Error::PointAtProjectionCenter { index })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::{SpherePoint, SphereRotation};
    use crate::raster::QuarterTurn;

    fn smooth(h: usize) -> EquirectImage {
        EquirectImage::from_fn(h, 3, |s, out| {
            out[0] = (0.5 + 0.3 * s.x()) as f32;
            out[1] = (0.5 + 0.3 * s.y()) as f32;
            out[2] = (0.5 + 0.4 * s.z()) as f32;
        })
        .unwrap()
    }

    #[test]
    fn rejects_non_2_to_1_sources() {
        assert!(matches!(
            EquirectImage::new(Raster::zeros(10, 10, 1)),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn constant_source_gives_constant_output() {
        let src = EquirectImage::new(Raster::filled(64, 32, 1, 0.42)).unwrap();
        let params = ProjectionParams::square_default(40).unwrap();
        for interp in [Interpolation::Nearest, Interpolation::Bilinear] {
            let out = reproject(&src, &SphereRotation::identity(), &params, interp).unwrap();
            assert!(out.raster.data.iter().all(|&v| (v - 0.42).abs() < 1e-6));
        }
    }

    #[test]
    fn impulse_lands_on_forward_mapped_pixel() {
        let (sw, sh) = (256, 128);
        let (ix, iy) = (40usize, 90usize);
        let mut raster = Raster::zeros(sw, sh, 1);
        raster.pixel_mut(ix, iy)[0] = 1.0;
        let src = EquirectImage::new(raster).unwrap();
        let params = ProjectionParams::framed(400, 400, 1.0, 2.0).unwrap();
        let rot = SphereRotation::from_roll_pitch_yaw(0.2, -0.1, 0.4);
        let out = reproject(&src, &rot, &params, Interpolation::Nearest).unwrap();

        let (mut best, mut arg) = (0.0, (0, 0));
        for y in 0..400 {
            for x in 0..400 {
                let v = out.raster.pixel(x, y)[0];
                if v > best {
                    best = v;
                    arg = (x, y);
                }
            }
        }
        assert_eq!(best, 1.0);
        let c = EquirectImage::pixel_to_coord(ix as f64, iy as f64, sw, sh);
        let (u, v) = annotate_reproject(&[c], &rot, &params).unwrap()[0];
        // argmax is the first hit in scan order; the impulse footprint is a
        // few output pixels wide
        assert!((arg.0 as f64 - u).abs() <= 4.0 && (arg.1 as f64 - v).abs() <= 4.0);
        let mut dmin = f64::INFINITY;
        for y in 0..400 {
            for x in 0..400 {
                if out.raster.pixel(x, y)[0] == 1.0 {
                    dmin = dmin.min((x as f64 - u).hypot(y as f64 - v));
                }
            }
        }
        assert!(dmin <= 1.0, "nearest lit pixel {dmin} px from forward map");
    }

    #[test]
    fn yaw_rotation_turns_the_output() {
        let src = smooth(128);
        let params = ProjectionParams::square_default(96).unwrap();
        let id = reproject(&src, &SphereRotation::identity(), &params, Interpolation::Bilinear)
            .unwrap();
        let rot = reproject(
            &src,
            &SphereRotation::about_z(FRAC_PI_2),
            &params,
            Interpolation::Bilinear,
        )
        .unwrap();
        let turned = id.raster.quarter_turn(QuarterTurn::Rot270);
        let max = turned
            .data
            .iter()
            .zip(&rot.raster.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0f32, f32::max);
        assert!(max < 2.0 / 255.0, "max diff {max}");
    }

    #[test]
    fn annotation_examples() {
        let params = ProjectionParams::new(1.0, 2688, 2688, 100.0, 1344.0, 1344.0).unwrap();
        let id = SphereRotation::identity();
        let uv = annotate_reproject(&[EquirectCoord::new(0.0, 0.0)], &id, &params).unwrap();
        assert!((uv[0].0 - 1544.0).abs() < 1e-9 && (uv[0].1 - 1344.0).abs() < 1e-9);

        // the source direction that the rotation sends to -z lands on O_c
        let rot = SphereRotation::from_roll_pitch_yaw(0.3, 0.5, -1.0);
        let nadir = geom::rotate_sphere(SpherePoint::SOUTH, &rot.inverse());
        let c = geom::sphere_to_equirect(nadir);
        let uv = annotate_reproject(&[c], &rot, &params).unwrap();
        assert!((uv[0].0 - 1344.0).abs() < 1e-9 && (uv[0].1 - 1344.0).abs() < 1e-9);

        // pixel back to the source direction
        let c = EquirectCoord::new(1.1, -0.4);
        let uv = annotate_reproject(&[c], &rot, &params).unwrap()[0];
        let back = geom::rotate_sphere(geom::pixel_to_sphere(uv.0, uv.1, &params), &rot.inverse());
        assert!(back.angle_to(&geom::equirect_to_sphere(c)) < 1e-9);

        let north = geom::rotate_sphere(SpherePoint::NORTH, &rot.inverse());
        assert!(matches!(
            annotate_reproject(&[c, geom::sphere_to_equirect(north)], &rot, &params),
            Err(Error::PointAtProjectionCenter { index: 1 })
        ));
    }

    #[test]
    fn sequential_and_parallel_are_bit_identical() {
        let src = smooth(64);
        let params = ProjectionParams::square_default(80).unwrap();
        let rot = SphereRotation::from_roll_pitch_yaw(0.1, 0.2, 0.3);
        let a = reproject_with(&src, &rot, &params, Interpolation::Bilinear, Execution::Sequential)
            .unwrap();
        let b = reproject_with(&src, &rot, &params, Interpolation::Bilinear, Execution::Parallel)
            .unwrap();
        assert_eq!(a, b);
    }
}
