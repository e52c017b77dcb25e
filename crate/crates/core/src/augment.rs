//! Rotate/divide/align augmentation for stereographic images.
//!
//! Radial distortion in a stereographic image depends only on the distance
//! from the image center, so random crops see inconsistent distortion. This
//! module instead (1) optionally mirrors the image about its vertical center
//! line, (2) rotates it about the center by a random angle in `(0, pi/2)`,
//! (3) cuts it into four quadrants and (4) turns each quadrant by a multiple
//! of 90 degrees so that the original center lands on its upper-left corner.
//! Every step is an isometry fixing the center, so each annotation keeps its
//! distance to the (transformed) center and every aligned quadrant shows the
//! same distortion pattern.
//!
//! An annotation belongs to the quadrant or tile containing its center
//! (half-open intervals), so counts are conserved exactly. Annotations whose
//! center is rotated out of the square frame are dropped and counted in the
//! tile provenance.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::FRAC_PI_2;

use crate::density::Annotation;
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::raster::{crop_grid, flip_grid, quarter_turn_grid, QuarterTurn, Raster};
use crate::resample::StereoImage;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Flip {
    None,
    Horizontal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Quadrant {
    NW,
    NE,
    SW,
    SE,
}

impl Quadrant {
    pub const ALL: [Quadrant; 4] = [Quadrant::NW, Quadrant::NE, Quadrant::SW, Quadrant::SE];

    /// The quarter turn that moves the original center to the upper-left.
    pub fn alignment(self) -> QuarterTurn {
        match self {
            Quadrant::NW => QuarterTurn::Rot180,
            Quadrant::NE => QuarterTurn::Rot270,
            Quadrant::SW => QuarterTurn::Rot90,
            Quadrant::SE => QuarterTurn::Rot0,
        }
    }

    fn offset(self, half_w: usize, half_h: usize) -> (usize, usize) {
        match self {
            Quadrant::NW => (0, 0),
            Quadrant::NE => (half_w, 0),
            Quadrant::SW => (0, half_h),
            Quadrant::SE => (half_w, half_h),
        }
    }

    fn index(self) -> usize {
        self as usize
    }
}

/// One augmentation chain, enough to replay it exactly.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AugmentOp {
    /// Rotation about the image center, radians, `v`-down counterclockwise
    /// in `(u, v)` (clockwise as displayed).
    pub theta: f64,
    pub flip: Flip,
    /// Whether the flip is applied before the rotation.
    pub flip_first: bool,
    pub quadrant: Quadrant,
    pub alignment: QuarterTurn,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TileProvenance {
    pub source_id: String,
    pub op: AugmentOp,
    /// Offset of this tile inside the (possibly downscaled) aligned quadrant.
    pub tile_offset: (usize, usize),
    /// Downscale factor applied to the aligned quadrant (1 before tiling).
    pub scale: f64,
    /// Original image center in this tile's pixel coordinates; the center to
    /// render distortion-adaptive kernels against.
    pub distortion_center: (f64, f64),
    /// Annotations lost because rotation moved their center off the frame.
    pub dropped_by_rotation: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tile {
    pub raster: Raster,
    /// `None` when every pixel is valid.
    pub mask: Option<Vec<bool>>,
    pub annotations: Vec<Annotation>,
    pub provenance: TileProvenance,
}

/// A raster with an optional validity mask and its annotations.
#[derive(Debug, Clone, PartialEq)]
pub struct Labelled {
    pub raster: Raster,
    pub mask: Option<Vec<bool>>,
    pub annotations: Vec<Annotation>,
}

fn normalise_mask(mask: Vec<bool>) -> Option<Vec<bool>> {
    if mask.iter().all(|&m| m) {
        None
    } else {
        Some(mask)
    }
}

fn clip_box(b: [f64; 4], w: usize, h: usize) -> [f64; 4] {
    let (wmax, hmax) = (w as f64 - 0.5, h as f64 - 0.5);
    [
        b[0].clamp(-0.5, wmax),
        b[1].clamp(-0.5, hmax),
        b[2].clamp(-0.5, wmax),
        b[3].clamp(-0.5, hmax),
    ]
}

fn in_extent((u, v): (f64, f64), w: usize, h: usize) -> bool {
    u >= -0.5 && v >= -0.5 && u <= w as f64 - 0.5 && v <= h as f64 - 0.5
}

/// Rotates annotation centers exactly: `theta = pi/2` sends `(c + a, c)` to
/// `(c, c + a)`.
pub fn rotate_point(p: (f64, f64), center: (f64, f64), theta: f64) -> (f64, f64) {
    let (s, c) = theta.sin_cos();
    let (du, dv) = (p.0 - center.0, p.1 - center.1);
    (center.0 + c * du - s * dv, center.1 + s * du + c * dv)
}

/// Rotates the raster (bilinear) and annotations (exact) about the projection
/// center. Pixels that sample outside the source become black and invalid;
/// annotations whose center leaves the frame are dropped.
pub fn rotate_about_center(
    img: &StereoImage,
    annotations: &[Annotation],
    theta: f64,
) -> Result<(StereoImage, Vec<Annotation>)> {
    rotate_about_center_with(img, annotations, theta, Execution::default())
}

pub fn rotate_about_center_with(
    img: &StereoImage,
    annotations: &[Annotation],
    theta: f64,
    exec: Execution,
) -> Result<(StereoImage, Vec<Annotation>)> {
    let (w, h) = (img.raster.width, img.raster.height);
    if w != h {
        return Err(Error::NonSquareImage {
            width: w,
            height: h,
        });
    }
    let center = img.params.center();
    let (raster, mask) = rotate_raster(&img.raster, img.mask.as_deref(), center, theta, exec);
    let out = StereoImage::new(raster, img.params, mask)?;
    let anns = rotate_annotations(annotations, center, theta, w, h);
    Ok((out, anns))
}

fn rotate_annotations(
    annotations: &[Annotation],
    center: (f64, f64),
    theta: f64,
    w: usize,
    h: usize,
) -> Vec<Annotation> {
    annotations
        .iter()
        .map(|a| a.map_with(|u, v| rotate_point((u, v), center, theta)))
        .filter(|a| in_extent(a.center, w, h))
        .map(|mut a| {
            a.bbox = clip_box(a.bbox, w, h);
            a
        })
        .collect()
}

fn rotate_raster(
    src: &Raster,
    src_mask: Option<&[bool]>,
    center: (f64, f64),
    theta: f64,
    exec: Execution,
) -> (Raster, Option<Vec<bool>>) {
    let (w, h, ch) = (src.width, src.height, src.channels);
    let (s, c) = theta.sin_cos();
    let mut out = Raster::zeros(w, h, ch);
    let mut mask = vec![true; w * h];
    // rows carry their mask entries alongside the samples
    let rows: Vec<(Vec<f32>, Vec<bool>)> = exec.map_indexed(h, |y| {
        let mut data = vec![0f32; w * ch];
        let mut valid = vec![false; w];
        let dv = y as f64 - center.1;
        for x in 0..w {
            let du = x as f64 - center.0;
            let su = center.0 + c * du + s * dv;
            let sv = center.1 - s * du + c * dv;
            let px = &mut data[x * ch..(x + 1) * ch];
            if src.sample_bilinear(su, sv, px) {
                valid[x] = match src_mask {
                    None => true,
                    Some(m) => {
                        let nx = (su.round().max(0.0) as usize).min(w - 1);
                        let ny = (sv.round().max(0.0) as usize).min(h - 1);
                        m[ny * w + nx]
                    }
                };
                if !valid[x] {
                    px.fill(0.0);
                }
            }
        }
        (data, valid)
    });
    for (y, (data, valid)) in rows.into_iter().enumerate() {
        out.data[y * w * ch..(y + 1) * w * ch].copy_from_slice(&data);
        mask[y * w..(y + 1) * w].copy_from_slice(&valid);
    }
    (out, normalise_mask(mask))
}

/// Mirrors about the vertical line through the raster center.
pub fn flip_horizontal(item: &Labelled) -> Labelled {
    let (w, h) = (item.raster.width, item.raster.height);
    let w1 = w as f64 - 1.0;
    Labelled {
        raster: item.raster.flip_horizontal(),
        mask: item.mask.as_ref().map(|m| flip_grid(m, w, h, 1)),
        annotations: item
            .annotations
            .iter()
            .map(|a| a.map_with(|u, v| (w1 - u, v)))
            .collect(),
    }
}

/// An aligned quadrant.
#[derive(Debug, Clone, PartialEq)]
pub struct AlignedQuadrant {
    pub quadrant: Quadrant,
    pub item: Labelled,
}

/// Quadrant containing a point, using half-open intervals split at the raster
/// center (`u` first, then `v`).
pub fn quadrant_of(p: (f64, f64), width: usize, height: usize) -> Quadrant {
    let east = p.0 >= (width / 2) as f64 - 0.5;
    let south = p.1 >= (height / 2) as f64 - 0.5;
    match (east, south) {
        (false, false) => Quadrant::NW,
        (true, false) => Quadrant::NE,
        (false, true) => Quadrant::SW,
        (true, true) => Quadrant::SE,
    }
}

/// Splits into four equal quadrants and turns each so that the raster center
/// sits at its upper-left corner. Output order: NW, NE, SW, SE.
pub fn divide_and_align(item: &Labelled) -> Result<[AlignedQuadrant; 4]> {
    let (w, h) = (item.raster.width, item.raster.height);
    if w % 2 != 0 || h % 2 != 0 || w == 0 || h == 0 {
        return Err(Error::OddDimensions {
            width: w,
            height: h,
        });
    }
    let (hw, hh) = (w / 2, h / 2);
    let mut buckets: [Vec<Annotation>; 4] = Default::default();
    for a in &item.annotations {
        buckets[quadrant_of(a.center, w, h).index()].push(*a);
    }
    let ch = item.raster.channels;
    Ok(Quadrant::ALL.map(|q| {
        let (x0, y0) = q.offset(hw, hh);
        let turn = q.alignment();
        let sub = crop_grid(&item.raster.data, w, ch, x0, y0, hw, hh);
        let (data, tw, th) = quarter_turn_grid(&sub, hw, hh, ch, turn);
        let mask = item.mask.as_ref().map(|m| {
            let sub = crop_grid(m, w, 1, x0, y0, hw, hh);
            quarter_turn_grid(&sub, hw, hh, 1, turn).0
        });
        let (dx, dy) = (x0 as f64, y0 as f64);
        let annotations = buckets[q.index()]
            .iter()
            .map(|a| {
                let mut local = a.map_with(|u, v| (u - dx, v - dy));
                local.bbox = clip_box(local.bbox, hw, hh);
                local.map_with(|u, v| turn.map_point(u, v, hw, hh))
            })
            .collect();
        AlignedQuadrant {
            quadrant: q,
            item: Labelled {
                raster: Raster {
                    width: tw,
                    height: th,
                    channels: ch,
                    data,
                },
                mask: mask.and_then(normalise_mask),
                annotations,
            },
        }
    }))
}

/// Source material for [`augment_set`].
#[derive(Debug, Clone, Copy)]
pub struct AugmentInput<'a> {
    pub id: &'a str,
    pub image: &'a StereoImage,
    pub annotations: &'a [Annotation],
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AugmentConfig {
    /// Random rotations per image, on top of the unrotated original.
    pub rotations: usize,
    pub flip: bool,
    /// Flip before rotating (otherwise after).
    #[serde(default = "yes")]
    pub flip_first: bool,
    pub seed: u64,
}

fn yes() -> bool {
    true
}

impl AugmentConfig {
    /// Quadrant images produced per source image.
    pub fn outputs_per_image(&self) -> usize {
        (1 + self.rotations) * 4 * if self.flip { 2 } else { 1 }
    }
}

/// Uniform draw from the open interval `(0, pi/2)`.
fn draw_theta(rng: &mut ChaCha8Rng) -> f64 {
    loop {
        let t: f64 = rng.random_range(0.0..FRAC_PI_2);
        if t > 0.0 {
            return t;
        }
    }
}

/// `(flip, theta)` pairs for one image. Each image has its own stream derived
/// from the seed and its position, so results do not depend on scheduling.
pub fn plan_variants(image_index: usize, cfg: &AugmentConfig) -> Vec<(Flip, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(image_index as u64);
    let flips: &[Flip] = if cfg.flip {
        &[Flip::None, Flip::Horizontal]
    } else {
        &[Flip::None]
    };
    let mut out = Vec::with_capacity(flips.len() * (1 + cfg.rotations));
    for &f in flips {
        out.push((f, 0.0));
        for _ in 0..cfg.rotations {
            out.push((f, draw_theta(&mut rng)));
        }
    }
    out
}

fn check_centered(img: &StereoImage) -> Result<()> {
    let (w, h) = (img.raster.width, img.raster.height);
    if w != h {
        return Err(Error::NonSquareImage {
            width: w,
            height: h,
        });
    }
    let c = (w as f64 - 1.0) / 2.0;
    if (img.params.center_u - c).abs() > 1e-9 || (img.params.center_v - c).abs() > 1e-9 {
        return Err(Error::InvalidParams(format!(
            "augmentation needs the projection center on the raster center ({c}, {c}), got ({}, {})",
            img.params.center_u, img.params.center_v
        )));
    }
    Ok(())
}

/// Runs the flip/rotate part of the chain and returns the four aligned
/// quadrants plus the number of annotations dropped by rotation.
fn variant(
    input: &AugmentInput<'_>,
    flip: Flip,
    flip_first: bool,
    theta: f64,
) -> Result<([AlignedQuadrant; 4], usize)> {
    let img = input.image;
    let apply_flip = |l: Labelled| match flip {
        Flip::None => l,
        Flip::Horizontal => flip_horizontal(&l),
    };
    let mut item = Labelled {
        raster: img.raster.clone(),
        mask: img.mask.clone(),
        annotations: input.annotations.to_vec(),
    };
    if flip_first {
        item = apply_flip(item);
    }
    let before = item.annotations.len();
    if theta != 0.0 {
        let staged = StereoImage::new(item.raster, img.params, item.mask)?;
        let (rotated, anns) =
            rotate_about_center_with(&staged, &item.annotations, theta, Execution::Sequential)?;
        item = Labelled {
            raster: rotated.raster,
            mask: rotated.mask,
            annotations: anns,
        };
    }
    let dropped = before - item.annotations.len();
    if !flip_first {
        item = apply_flip(item);
    }
    Ok((divide_and_align(&item)?, dropped))
}

fn make_tile(id: &str, q: AlignedQuadrant, op: AugmentOp, dropped: usize) -> Tile {
    Tile {
        raster: q.item.raster,
        mask: q.item.mask,
        annotations: q.item.annotations,
        provenance: TileProvenance {
            source_id: id.to_string(),
            op,
            tile_offset: (0, 0),
            scale: 1.0,
            distortion_center: (-0.5, -0.5),
            dropped_by_rotation: dropped,
        },
    }
}

/// Produces `|inputs| * (1 + rotations) * 4 * (flip ? 2 : 1)` aligned
/// quadrant images, ordered by input, then flip, then rotation, then quadrant.
pub fn augment_set(inputs: &[AugmentInput<'_>], cfg: &AugmentConfig) -> Result<Vec<Tile>> {
    augment_set_with(inputs, cfg, Execution::default())
}

pub fn augment_set_with(
    inputs: &[AugmentInput<'_>],
    cfg: &AugmentConfig,
    exec: Execution,
) -> Result<Vec<Tile>> {
    for i in inputs {
        check_centered(i.image)?;
    }
    let per_image: Vec<Result<Vec<Tile>>> =
        exec.map_indexed(inputs.len(), |idx| augment_image(idx, &inputs[idx], cfg));
    let mut out = Vec::with_capacity(inputs.len() * cfg.outputs_per_image());
    for r in per_image {
        out.extend(r?);
    }
    Ok(out)
}

/// All outputs for one image. `index` is the image's position in the full
/// set and selects its random stream, so batches can be processed in pieces.
pub fn augment_image(index: usize, input: &AugmentInput<'_>, cfg: &AugmentConfig) -> Result<Vec<Tile>> {
    check_centered(input.image)?;
    let mut tiles = Vec::with_capacity(cfg.outputs_per_image());
    for (flip, theta) in plan_variants(index, cfg) {
        let (quads, dropped) = variant(input, flip, cfg.flip_first, theta)?;
        for q in quads {
            let op = AugmentOp {
                theta,
                flip,
                flip_first: cfg.flip_first,
                quadrant: q.quadrant,
                alignment: q.quadrant.alignment(),
            };
            tiles.push(make_tile(input.id, q, op, dropped));
        }
    }
    Ok(tiles)
}

/// Rebuilds the aligned quadrant described by `op`.
pub fn replay(input: &AugmentInput<'_>, op: &AugmentOp) -> Result<Tile> {
    check_centered(input.image)?;
    let (quads, dropped) = variant(input, op.flip, op.flip_first, op.theta)?;
    let q = quads
        .into_iter()
        .find(|q| q.quadrant == op.quadrant)
        .expect("all four quadrants are produced");
    Ok(make_tile(input.id, q, *op, dropped))
}

/// Maps a pixel-center coordinate through a uniform resize by `factor`.
#[inline]
fn scale_point(u: f64, factor: f64) -> f64 {
    (u + 0.5) * factor - 0.5
}

/// Bilinear resize of a square labelled raster to `target x target`.
pub fn downscale(item: &Labelled, target: usize) -> Result<Labelled> {
    let (w, h) = (item.raster.width, item.raster.height);
    if w != h {
        return Err(Error::NonSquareImage {
            width: w,
            height: h,
        });
    }
    if target == 0 {
        return Err(Error::DimensionMismatch("target size 0".into()));
    }
    if target == w {
        return Ok(item.clone());
    }
    let f = target as f64 / w as f64;
    let inv = 1.0 / f;
    let ch = item.raster.channels;
    let mut raster = Raster::zeros(target, target, ch);
    let mut mask = item.mask.as_ref().map(|_| vec![true; target * target]);
    for y in 0..target {
        let sv = scale_point(y as f64, inv);
        for x in 0..target {
            let su = scale_point(x as f64, inv);
            let i = raster.index(x, y);
            item.raster
                .sample_bilinear(su, sv, &mut raster.data[i..i + ch]);
            if let (Some(m), Some(src)) = (mask.as_mut(), item.mask.as_ref()) {
                let nx = (su.round().max(0.0) as usize).min(w - 1);
                let ny = (sv.round().max(0.0) as usize).min(h - 1);
                m[y * target + x] = src[ny * w + nx];
            }
        }
    }
    let annotations = item
        .annotations
        .iter()
        .map(|a| a.map_with(|u, v| (scale_point(u, f), scale_point(v, f))))
        .collect();
    Ok(Labelled {
        raster,
        mask: mask.and_then(normalise_mask),
        annotations,
    })
}

/// Downscales a square tile to `target` and cuts it into
/// `(target / tile)^2` tiles, row-major. Annotation centers pick their tile
/// with half-open intervals; boxes are clipped.
pub fn downscale_and_tile(tile: &Tile, target: usize, tile_size: usize) -> Result<Vec<Tile>> {
    if tile_size == 0 || !target.is_multiple_of(tile_size) {
        return Err(Error::DimensionMismatch(format!(
            "target {target} is not a multiple of tile size {tile_size}"
        )));
    }
    let item = Labelled {
        raster: tile.raster.clone(),
        mask: tile.mask.clone(),
        annotations: tile.annotations.clone(),
    };
    let f = target as f64 / tile.raster.width as f64;
    let small = downscale(&item, target)?;
    let n = target / tile_size;
    let ch = small.raster.channels;
    let pick = |c: f64| (((c + 0.5) / tile_size as f64).floor().max(0.0) as usize).min(n - 1);
    let mut buckets: Vec<Vec<Annotation>> = vec![Vec::new(); n * n];
    for a in &small.annotations {
        buckets[pick(a.center.1) * n + pick(a.center.0)].push(*a);
    }
    let (cu, cv) = tile.provenance.distortion_center;
    let center = (scale_point(cu, f), scale_point(cv, f));
    let mut out = Vec::with_capacity(n * n);
    for ty in 0..n {
        for tx in 0..n {
            let (x0, y0) = (tx * tile_size, ty * tile_size);
            let (dx, dy) = (x0 as f64, y0 as f64);
            let annotations = buckets[ty * n + tx]
                .iter()
                .map(|a| {
                    let mut l = a.map_with(|u, v| (u - dx, v - dy));
                    l.bbox = clip_box(l.bbox, tile_size, tile_size);
                    l
                })
                .collect();
            let mask = small
                .mask
                .as_ref()
                .map(|m| crop_grid(m, target, 1, x0, y0, tile_size, tile_size))
                .and_then(normalise_mask);
            let (ox, oy) = tile.provenance.tile_offset;
            out.push(Tile {
                raster: small.raster.crop(x0, y0, tile_size, tile_size),
                mask,
                annotations,
                provenance: TileProvenance {
                    tile_offset: (ox + x0, oy + y0),
                    scale: tile.provenance.scale * f,
                    distortion_center: (center.0 - dx, center.1 - dy),
                    ..tile.provenance.clone()
                },
            });
        }
    }
    debug_assert_eq!(ch, tile.raster.channels);
    Ok(out)
}

/// Per-tile annotation file contents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TileRecord {
    pub file: String,
    pub width: usize,
    pub height: usize,
    pub annotations: Vec<Annotation>,
    pub provenance: TileProvenance,
}
