use serde::{Deserialize, Serialize};

use super::hull::{convex_hull, point_in_polygon};
use super::UnitArea;
use crate::density::Annotation;
use crate::error::{Error, Result};
use crate::raster::{crop_grid, Raster};
use crate::resample::StereoImage;

/// Output of [`crop_unit_area`].
#[derive(Debug, Clone, PartialEq)]
pub struct UnitAreaCrop {
    /// Bounding rectangle of the hull; pixels outside the hull are black.
    pub raster: Raster,
    /// `true` where the pixel center lies inside the hull (and the source
    /// pixel was valid).
    pub mask: Vec<bool>,
    /// Kept annotations in crop coordinates.
    pub annotations: Vec<Annotation>,
    pub provenance: CropProvenance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CropProvenance {
    pub unit_area: String,
    /// Top-left source pixel of the crop.
    pub offset: (usize, usize),
    /// Crop hull in source pixel coordinates, counterclockwise.
    pub hull: Vec<(f64, f64)>,
}

/// Crops a unit area so that no annotated object is cut off: the crop region
/// is the convex hull of the area polygon together with the bounding boxes of
/// every annotation whose center lies inside the area.
pub fn crop_unit_area(
    img: &StereoImage,
    area: &UnitArea,
    annotations: &[Annotation],
) -> Result<UnitAreaCrop> {
    let r = &img.raster;
    let (w, h) = (r.width as f64, r.height as f64);
    let inside_image = |(u, v): (f64, f64)| u >= -0.5 && v >= -0.5 && u <= w - 0.5 && v <= h - 0.5;
    if !area.corners.iter().all(|&p| inside_image(p)) {
        return Err(Error::InvalidPolygon(format!(
            "unit area {} extends outside the {}x{} image",
            area.id, r.width, r.height
        )));
    }
    area.validate()?;

    let kept: Vec<&Annotation> = annotations
        .iter()
        .filter(|a| point_in_polygon(a.center, &area.corners))
        .collect();
    let mut points = area.corners.clone();
    for a in &kept {
        let [u0, v0, u1, v1] = a.bbox;
        for p in [(u0, v0), (u1, v0), (u1, v1), (u0, v1)] {
            if !inside_image(p) {
                return Err(Error::InvalidParams(format!(
                    "bbox [{u0}, {v0}, {u1}, {v1}] extends outside the image"
                )));
            }
            points.push(p);
        }
    }
    let hull = convex_hull(&points)?;

    let (min_u, max_u) = extent(hull.iter().map(|p| p.0));
    let (min_v, max_v) = extent(hull.iter().map(|p| p.1));
    let pix = |lo: f64, hi: f64, n: usize| {
        let a = ((lo + 0.5).floor().max(0.0) as usize).min(n - 1);
        let b = ((hi + 0.5).floor().max(0.0) as usize).min(n - 1);
        (a, b - a + 1)
    };
    let (x0, cw) = pix(min_u, max_u, r.width);
    let (y0, ch) = pix(min_v, max_v, r.height);

    let mut raster = Raster {
        width: cw,
        height: ch,
        channels: r.channels,
        data: crop_grid(&r.data, r.width, r.channels, x0, y0, cw, ch),
    };
    let mut mask = vec![false; cw * ch];
    for y in 0..ch {
        for x in 0..cw {
            let (sx, sy) = (x0 + x, y0 + y);
            let valid = img.is_valid(sx, sy) && point_in_polygon((sx as f64, sy as f64), &hull);
            mask[y * cw + x] = valid;
            if !valid {
                raster.pixel_mut(x, y).fill(0.0);
            }
        }
    }

    let (dx, dy) = (x0 as f64, y0 as f64);
    let annotations = kept
        .into_iter()
        .map(|a| a.map_with(|u, v| (u - dx, v - dy)))
        .collect();

    Ok(UnitAreaCrop {
        raster,
        mask,
        annotations,
        provenance: CropProvenance {
            unit_area: area.id.clone(),
            offset: (x0, y0),
            hull,
        },
    })
}

fn extent(it: impl Iterator<Item = f64>) -> (f64, f64) {
    it.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
        (lo.min(v), hi.max(v))
    })
}
