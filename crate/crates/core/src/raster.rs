//! Interleaved `f32` rasters with samples in `[0, 1]`, plus the lossless
//! grid transforms (quarter turns, mirror, crop) shared by images, masks and
//! density maps.

use serde::{Deserialize, Serialize};
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Raster {
    pub width: usize,
    pub height: usize,
    pub channels: usize,
    /// Row-major, channel-interleaved.
    pub data: Vec<f32>,
}

impl Raster {
    pub fn zeros(width: usize, height: usize, channels: usize) -> Self {
        Self {
            width,
            height,
            channels,
            data: vec![0.0; width * height * channels],
        }
    }

    pub fn filled(width: usize, height: usize, channels: usize, value: f32) -> Self {
        Self {
            width,
            height,
            channels,
            data: vec![value; width * height * channels],
        }
    }

    pub fn from_data(width: usize, height: usize, channels: usize, data: Vec<f32>) -> Result<Self> {
        if !(channels == 1 || channels == 3) {
            return Err(Error::DimensionMismatch(format!(
                "expected 1 or 3 channels, got {channels}"
            )));
        }
        if data.len() != width * height * channels {
            return Err(Error::DimensionMismatch(format!(
                "{} samples for a {width}x{height}x{channels} raster",
                data.len()
            )));
        }
        Ok(Self {
            width,
            height,
            channels,
            data,
        })
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize) -> usize {
        (y * self.width + x) * self.channels
    }

    #[inline]
    pub fn pixel(&self, x: usize, y: usize) -> &[f32] {
        let i = self.index(x, y);
        &self.data[i..i + self.channels]
    }

    #[inline]
    pub fn pixel_mut(&mut self, x: usize, y: usize) -> &mut [f32] {
        let i = self.index(x, y);
        let c = self.channels;
        &mut self.data[i..i + c]
    }

    /// Bilinear sample at continuous pixel-center coordinates. Returns `false`
    /// (and leaves `out` untouched) when the point falls outside the raster's
    /// extent `[-0.5, w - 0.5] x [-0.5, h - 0.5]`; inside that extent the
    /// border pixels are clamped.
    pub fn sample_bilinear(&self, u: f64, v: f64, out: &mut [f32]) -> bool {
        let (w, h) = (self.width as f64, self.height as f64);
        if !(u >= -0.5 && u <= w - 0.5 && v >= -0.5 && v <= h - 0.5) {
            return false;
        }
        let uc = u.clamp(0.0, w - 1.0);
        let vc = v.clamp(0.0, h - 1.0);
        let x0 = uc.floor() as usize;
        let y0 = vc.floor() as usize;
        let x1 = (x0 + 1).min(self.width - 1);
        let y1 = (y0 + 1).min(self.height - 1);
        let fx = (uc - x0 as f64) as f32;
        let fy = (vc - y0 as f64) as f32;
        let (p00, p10, p01, p11) = (
            self.index(x0, y0),
            self.index(x1, y0),
            self.index(x0, y1),
            self.index(x1, y1),
        );
        for (c, o) in out.iter_mut().enumerate().take(self.channels) {
            let top = self.data[p00 + c] + (self.data[p10 + c] - self.data[p00 + c]) * fx;
            let bot = self.data[p01 + c] + (self.data[p11 + c] - self.data[p01 + c]) * fx;
            *o = top + (bot - top) * fy;
        }
        true
    }

    pub fn quarter_turn(&self, turn: QuarterTurn) -> Raster {
        let (data, width, height) =
            quarter_turn_grid(&self.data, self.width, self.height, self.channels, turn);
        Raster {
            width,
            height,
            channels: self.channels,
            data,
        }
    }

    pub fn flip_horizontal(&self) -> Raster {
        Raster {
            data: flip_grid(&self.data, self.width, self.height, self.channels),
            ..*self
        }
    }

    pub fn crop(&self, x0: usize, y0: usize, w: usize, h: usize) -> Raster {
        Raster {
            width: w,
            height: h,
            channels: self.channels,
            data: crop_grid(&self.data, self.width, self.channels, x0, y0, w, h),
        }
    }

    pub fn mean(&self) -> f64 {
        if self.data.is_empty() {
            return 0.0;
        }
        self.data.iter().map(|&v| v as f64).sum::<f64>() / self.data.len() as f64
    }

    /// Loads an 8-bit PNG or JPEG; grey stays single-channel, anything else
    /// becomes RGB.
    pub fn load(path: impl AsRef<Path>) -> Result<Raster> {
        let img = image::open(path.as_ref())?;
        let (w, h) = (img.width() as usize, img.height() as usize);
        let raster = match img.color().channel_count() {
            1 | 2 => {
                let g = img.into_luma8();
                Raster::from_data(w, h, 1, g.into_raw().into_iter().map(u8_to_unit).collect())?
            }
            _ => {
                let rgb = img.into_rgb8();
                Raster::from_data(w, h, 3, rgb.into_raw().into_iter().map(u8_to_unit).collect())?
            }
        };
        Ok(raster)
    }

    /// Quantised 8-bit encoding of the samples.
    pub fn to_u8(&self) -> Vec<u8> {
        self.data.iter().map(|&v| unit_to_u8(v)).collect()
    }

    /// PNG bytes of the 8-bit quantised raster.
    pub fn encode_png(&self) -> Result<Vec<u8>> {
        use image::ImageEncoder;
        let color = match self.channels {
            1 => image::ExtendedColorType::L8,
            _ => image::ExtendedColorType::Rgb8,
        };
        let mut buf = Vec::new();
        image::codecs::png::PngEncoder::new(&mut buf).write_image(
            &self.to_u8(),
            self.width as u32,
            self.height as u32,
            color,
        )?;
        Ok(buf)
    }
}

#[inline]
fn u8_to_unit(v: u8) -> f32 {
    v as f32 / 255.0
}

#[inline]
pub fn unit_to_u8(v: f32) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// Counterclockwise quarter turns as displayed (with `v` pointing down).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QuarterTurn {
    Rot0,
    Rot90,
    Rot180,
    Rot270,
}

impl QuarterTurn {
    pub fn dims(self, width: usize, height: usize) -> (usize, usize) {
        match self {
            QuarterTurn::Rot0 | QuarterTurn::Rot180 => (width, height),
            QuarterTurn::Rot90 | QuarterTurn::Rot270 => (height, width),
        }
    }

    /// Maps a continuous pixel-center coordinate of a `width x height` grid
    /// to the turned grid.
    pub fn map_point(self, u: f64, v: f64, width: usize, height: usize) -> (f64, f64) {
        let (w1, h1) = (width as f64 - 1.0, height as f64 - 1.0);
        match self {
            QuarterTurn::Rot0 => (u, v),
            QuarterTurn::Rot90 => (v, w1 - u),
            QuarterTurn::Rot180 => (w1 - u, h1 - v),
            QuarterTurn::Rot270 => (h1 - v, u),
        }
    }

    /// Maps an axis-aligned box; the result is again axis-aligned.
    pub fn map_box(self, b: [f64; 4], width: usize, height: usize) -> [f64; 4] {
        let (a0, a1) = self.map_point(b[0], b[1], width, height);
        let (c0, c1) = self.map_point(b[2], b[3], width, height);
        [a0.min(c0), a1.min(c1), a0.max(c0), a1.max(c1)]
    }

    /// Source pixel feeding destination pixel `(x, y)` of the turned grid.
    #[inline]
    fn source_of(self, x: usize, y: usize, width: usize, height: usize) -> (usize, usize) {
        match self {
            QuarterTurn::Rot0 => (x, y),
            QuarterTurn::Rot90 => (width - 1 - y, x),
            QuarterTurn::Rot180 => (width - 1 - x, height - 1 - y),
            QuarterTurn::Rot270 => (y, height - 1 - x),
        }
    }
}

/// Lossless quarter turn of an interleaved grid. Returns the new data and
/// dimensions.
pub fn quarter_turn_grid<T: Copy>(
    data: &[T],
    width: usize,
    height: usize,
    channels: usize,
    turn: QuarterTurn,
) -> (Vec<T>, usize, usize) {
    let (ow, oh) = turn.dims(width, height);
    let mut out = Vec::with_capacity(data.len());
    for y in 0..oh {
        for x in 0..ow {
            let (sx, sy) = turn.source_of(x, y, width, height);
            let i = (sy * width + sx) * channels;
            out.extend_from_slice(&data[i..i + channels]);
        }
    }
    (out, ow, oh)
}

/// Mirror about the vertical axis through the grid center.
pub fn flip_grid<T: Copy>(data: &[T], width: usize, height: usize, channels: usize) -> Vec<T> {
    let mut out = Vec::with_capacity(data.len());
    for y in 0..height {
        for x in (0..width).rev() {
            let i = (y * width + x) * channels;
            out.extend_from_slice(&data[i..i + channels]);
        }
    }
    out
}

pub fn crop_grid<T: Copy>(
    data: &[T],
    width: usize,
    channels: usize,
    x0: usize,
    y0: usize,
    w: usize,
    h: usize,
) -> Vec<T> {
    let mut out = Vec::with_capacity(w * h * channels);
    for y in y0..y0 + h {
        let i = (y * width + x0) * channels;
        out.extend_from_slice(&data[i..i + w * channels]);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp(w: usize, h: usize) -> Raster {
        let data = (0..w * h).map(|i| i as f32 / (w * h) as f32).collect();
        Raster::from_data(w, h, 1, data).unwrap()
    }

    #[test]
    fn quarter_turns_compose() {
        let r = ramp(5, 3);
        let r90 = r.quarter_turn(QuarterTurn::Rot90);
        assert_eq!((r90.width, r90.height), (3, 5));
        let back = r90
            .quarter_turn(QuarterTurn::Rot90)
            .quarter_turn(QuarterTurn::Rot90)
            .quarter_turn(QuarterTurn::Rot90);
        assert_eq!(back, r);
        assert_eq!(
            r.quarter_turn(QuarterTurn::Rot90).quarter_turn(QuarterTurn::Rot90),
            r.quarter_turn(QuarterTurn::Rot180)
        );
        assert_eq!(
            r.quarter_turn(QuarterTurn::Rot180).quarter_turn(QuarterTurn::Rot90),
            r.quarter_turn(QuarterTurn::Rot270)
        );
    }

    #[test]
    fn point_map_matches_pixels() {
        let r = ramp(4, 6);
        for turn in [
            QuarterTurn::Rot0,
            QuarterTurn::Rot90,
            QuarterTurn::Rot180,
            QuarterTurn::Rot270,
        ] {
            let t = r.quarter_turn(turn);
            for y in 0..r.height {
                for x in 0..r.width {
                    let (u, v) = turn.map_point(x as f64, y as f64, r.width, r.height);
                    assert_eq!(t.pixel(u as usize, v as usize), r.pixel(x, y), "{turn:?}");
                }
            }
        }
    }

    #[test]
    fn ccw_turn_moves_top_right_to_top_left() {
        assert_eq!(QuarterTurn::Rot90.map_point(4.0, 0.0, 5, 5), (0.0, 0.0));
        assert_eq!(QuarterTurn::Rot270.map_point(0.0, 4.0, 5, 5), (0.0, 0.0));
    }

    #[test]
    fn bilinear_sampling() {
        let r = Raster::from_data(2, 1, 1, vec![0.0, 1.0]).unwrap();
        let mut o = [0f32];
        assert!(r.sample_bilinear(0.25, 0.0, &mut o));
        assert!((o[0] - 0.25).abs() < 1e-7);
        assert!(r.sample_bilinear(-0.5, 0.0, &mut o));
        assert_eq!(o[0], 0.0);
        assert!(!r.sample_bilinear(-0.6, 0.0, &mut o));
        assert!(!r.sample_bilinear(0.0, 0.6, &mut o));
    }

    #[test]
    fn rejects_bad_shapes() {
        assert!(Raster::from_data(2, 2, 2, vec![0.0; 8]).is_err());
        assert!(Raster::from_data(2, 2, 1, vec![0.0; 3]).is_err());
    }
}
