//! Density-map ground truth and count discretization.
//!
//! A density map is a sum of one truncated isotropic Gaussian per annotation.
//! Each kernel is truncated to a disc of `truncation * sigma` pixels, clipped
//! to the raster and renormalised to sum to exactly one, so integrating any
//! map returns its annotation count.
//!
//! Three policies choose each kernel's sigma:
//!
//! * `Fixed` - one sigma for every object.
//! * `GeometryAdaptive` - `beta` times the mean distance to the `k` nearest
//!   neighbouring annotations.
//! * `DistortionAdaptive` - inversely proportional to the distance from the
//!   stereographic image center: `sigma = sigma_alpha / (D / D_norm)`,
//!   clamped to `[sigma_min, sigma_max]`.

use serde::{Deserialize, Serialize};

use crate::dataset::hull::point_in_polygon;
use crate::error::{Error, Result};
use crate::exec::Execution;

/// An annotated object: bounding box plus the point the kernel is centered on.
///
/// In JSON the center may be omitted, in which case it is the bbox midpoint.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "AnnotationRepr")]
pub struct Annotation {
    /// `[u_min, v_min, u_max, v_max]` in pixels.
    pub bbox: [f64; 4],
    pub center: (f64, f64),
}

#[derive(Deserialize)]
struct AnnotationRepr {
    bbox: [f64; 4],
    center: Option<(f64, f64)>,
}

impl From<AnnotationRepr> for Annotation {
    fn from(r: AnnotationRepr) -> Self {
        let b = r.bbox;
        Self {
            bbox: b,
            center: r
                .center
                .unwrap_or(((b[0] + b[2]) / 2.0, (b[1] + b[3]) / 2.0)),
        }
    }
}

impl Annotation {
    /// Center is the bbox midpoint.
    pub fn from_bbox(bbox: [f64; 4]) -> Result<Self> {
        let a = Self {
            bbox,
            center: ((bbox[0] + bbox[2]) / 2.0, (bbox[1] + bbox[3]) / 2.0),
        };
        a.validate()?;
        Ok(a)
    }

    /// A point annotation with a one-pixel box.
    pub fn point(u: f64, v: f64) -> Self {
        Self {
            bbox: [u - 0.5, v - 0.5, u + 0.5, v + 0.5],
            center: (u, v),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let [u0, v0, u1, v1] = self.bbox;
        let finite = self.bbox.iter().all(|v| v.is_finite())
            && self.center.0.is_finite()
            && self.center.1.is_finite();
        if !finite {
            return Err(Error::InvalidParams("non-finite annotation".into()));
        }
        if !(u0 < u1 && v0 < v1) {
            return Err(Error::InvalidParams(format!(
                "degenerate bbox [{u0}, {v0}, {u1}, {v1}]"
            )));
        }
        Ok(())
    }

    /// Same object moved by `f`, which must be an isometry or a uniform
    /// scaling so that the bbox stays axis-aligned up to its corner hull.
    pub(crate) fn map_with(&self, f: impl Fn(f64, f64) -> (f64, f64)) -> Self {
        let [u0, v0, u1, v1] = self.bbox;
        let corners = [f(u0, v0), f(u1, v0), f(u0, v1), f(u1, v1)];
        let mut b = [f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY];
        for (u, v) in corners {
            b[0] = b[0].min(u);
            b[1] = b[1].min(v);
            b[2] = b[2].max(u);
            b[3] = b[3].max(v);
        }
        Self {
            bbox: b,
            center: f(self.center.0, self.center.1),
        }
    }
}

/// Which sigma each annotation's kernel gets.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "policy", rename_all = "kebab-case")]
pub enum KernelPolicy {
    Fixed {
        sigma: f64,
    },
    GeometryAdaptive {
        k: usize,
        beta: f64,
        /// Used for every annotation when there are fewer than `k + 1`.
        fallback_sigma: f64,
    },
    DistortionAdaptive(DistortionParams),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistortionParams {
    pub sigma_alpha: f64,
    pub d_norm: f64,
    pub sigma_min: f64,
    pub sigma_max: f64,
}

impl DistortionParams {
    /// `D_norm = width / 2`, `sigma_min = 2`, `sigma_max = 4 * sigma_alpha`.
    pub fn with_defaults(sigma_alpha: f64, width: usize) -> Self {
        Self {
            sigma_alpha,
            d_norm: width as f64 / 2.0,
            sigma_min: DEFAULT_SIGMA_MIN,
            sigma_max: 4.0 * sigma_alpha,
        }
    }
}

pub const DEFAULT_FIXED_SIGMA: f64 = 8.0;
pub const DEFAULT_TRUNCATION: f64 = 4.0;
pub const DEFAULT_SIGMA_MIN: f64 = 2.0;
pub const DEFAULT_K: usize = 3;
pub const DEFAULT_BETA: f64 = 0.3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    #[serde(flatten)]
    pub policy: KernelPolicy,
    /// Kernel support radius in multiples of sigma.
    #[serde(default = "default_truncation")]
    pub truncation: f64,
}

fn default_truncation() -> f64 {
    DEFAULT_TRUNCATION
}

impl KernelSpec {
    pub fn fixed(sigma: f64) -> Self {
        Self {
            policy: KernelPolicy::Fixed { sigma },
            truncation: DEFAULT_TRUNCATION,
        }
    }

    pub fn geometry_adaptive(k: usize, beta: f64) -> Self {
        Self {
            policy: KernelPolicy::GeometryAdaptive {
                k,
                beta,
                fallback_sigma: DEFAULT_FIXED_SIGMA,
            },
            truncation: DEFAULT_TRUNCATION,
        }
    }

    pub fn distortion_adaptive(params: DistortionParams) -> Self {
        Self {
            policy: KernelPolicy::DistortionAdaptive(params),
            truncation: DEFAULT_TRUNCATION,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidKernel(m));
        let pos = |v: f64| v > 0.0 && v.is_finite();
        if !(self.truncation >= 3.0 && self.truncation.is_finite()) {
            return bad(format!("truncation must be >= 3, got {}", self.truncation));
        }
        match self.policy {
            KernelPolicy::Fixed { sigma } if !pos(sigma) => bad(format!("sigma {sigma}")),
            KernelPolicy::GeometryAdaptive {
                k,
                beta,
                fallback_sigma,
            } => {
                if k < 1 {
                    return bad("k must be >= 1".into());
                }
                if !pos(beta) || !pos(fallback_sigma) {
                    return bad(format!("beta {beta}, fallback sigma {fallback_sigma}"));
                }
                Ok(())
            }
            KernelPolicy::DistortionAdaptive(p) => {
                if ![p.sigma_alpha, p.d_norm, p.sigma_min, p.sigma_max]
                    .into_iter()
                    .all(pos)
                {
                    return bad(format!("non-positive distortion parameter in {p:?}"));
                }
                if p.sigma_min > p.sigma_max {
                    return bad(format!("sigma_min {} > sigma_max {}", p.sigma_min, p.sigma_max));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }
}

/// Euclidean distance `D(p)` from the image center.
pub fn distance_from_center(p: (f64, f64), center: (f64, f64)) -> f64 {
    (p.0 - center.0).hypot(p.1 - center.1)
}

/// Distortion-adaptive sigma. `D = 0` lands on `sigma_max`.
pub fn adaptive_sigma(p: (f64, f64), center: (f64, f64), spec: &DistortionParams) -> f64 {
    let dist = distance_from_center(p, center);
    let raw = if dist > 0.0 {
        spec.sigma_alpha * spec.d_norm / dist
    } else {
        f64::INFINITY
    };
    raw.clamp(spec.sigma_min, spec.sigma_max)
}

/// `beta` times the mean distance from `centers[index]` to its `k` nearest
/// other centers.
pub fn geometry_adaptive_sigma(
    index: usize,
    centers: &[(f64, f64)],
    k: usize,
    beta: f64,
) -> Result<f64> {
    if k == 0 || centers.len() < k + 1 {
        return Err(Error::TooFewPoints {
            needed: k + 1,
            got: centers.len(),
        });
    }
    let p = centers[index];
    let mut dists: Vec<f64> = centers
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != index)
        .map(|(_, q)| distance_from_center(p, *q))
        .collect();
    dists.select_nth_unstable_by(k - 1, f64::total_cmp);
    let nearest = &mut dists[..k];
    nearest.sort_by(f64::total_cmp);
    Ok(beta * nearest.iter().sum::<f64>() / k as f64)
}

/// Per-annotation sigma for a whole set; the flag reports whether the
/// geometry-adaptive policy had to fall back to its fixed value.
pub fn kernel_sigmas(
    annotations: &[Annotation],
    center: (f64, f64),
    spec: &KernelSpec,
) -> Result<(Vec<f64>, bool)> {
    spec.validate()?;
    Ok(match spec.policy {
        KernelPolicy::Fixed { sigma } => (vec![sigma; annotations.len()], false),
        KernelPolicy::DistortionAdaptive(p) => (
            annotations
                .iter()
                .map(|a| adaptive_sigma(a.center, center, &p))
                .collect(),
            false,
        ),
        KernelPolicy::GeometryAdaptive {
            k,
            beta,
            fallback_sigma,
        } => {
            let centers: Vec<_> = annotations.iter().map(|a| a.center).collect();
            if centers.len() < k + 1 {
                if !centers.is_empty() {
                    log::warn!(
                        "geometry-adaptive kernel: {} annotation(s) < k + 1 = {}, using sigma {}",
                        centers.len(),
                        k + 1,
                        fallback_sigma
                    );
                }
                (vec![fallback_sigma; centers.len()], !centers.is_empty())
            } else {
                let s = (0..centers.len())
                    .map(|i| geometry_adaptive_sigma(i, &centers, k, beta))
                    .collect::<Result<Vec<_>>>()?;
                (s, false)
            }
        }
    })
}

/// A non-negative scalar field whose sum is the object count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityMap {
    pub width: usize,
    pub height: usize,
    pub values: Vec<f64>,
    pub meta: DensityMeta,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityMeta {
    pub kernel: KernelSpec,
    /// Center used for `D(p)`.
    pub center: (f64, f64),
    pub sigmas: Vec<f64>,
    pub geometry_fallback: bool,
}

impl DensityMap {
    pub fn zeros(width: usize, height: usize, meta: DensityMeta) -> Self {
        Self {
            width,
            height,
            values: vec![0.0; width * height],
            meta,
        }
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    #[inline]
    pub fn at(&self, x: usize, y: usize) -> f64 {
        self.values[y * self.width + x]
    }

    /// 8-bit grey preview scaled by the map maximum.
    pub fn preview(&self) -> crate::raster::Raster {
        let m = self.max();
        let k = if m > 0.0 { 1.0 / m } else { 0.0 };
        crate::raster::Raster {
            width: self.width,
            height: self.height,
            channels: 1,
            data: self.values.iter().map(|&v| (v * k) as f32).collect(),
        }
    }
}

/// One normalised kernel footprint.
#[derive(Debug, Clone)]
struct Patch {
    x0: usize,
    y0: usize,
    w: usize,
    values: Vec<f64>,
}

fn kernel_patch(center: (f64, f64), sigma: f64, truncation: f64, width: usize, height: usize) -> Patch {
    let (cu, cv) = center;
    if !(sigma > 0.0) {
        return point_patch(center, width, height);
    }
    let radius = truncation * sigma;
    let r2 = radius * radius;
    let inv = -0.5 / (sigma * sigma);
    let span = |c: f64, n: usize| -> (usize, usize) {
        let lo = (c - radius).ceil().max(0.0);
        let hi = (c + radius).floor().min(n as f64 - 1.0);
        if hi < lo {
            (0, 0)
        } else {
            (lo as usize, hi as usize + 1)
        }
    };
    let (x0, x1) = span(cu, width);
    let (y0, y1) = span(cv, height);
    let gx: Vec<(f64, f64)> = (x0..x1)
        .map(|x| {
            let d = x as f64 - cu;
            (d * d, (d * d * inv).exp())
        })
        .collect();
    let mut values = Vec::with_capacity(gx.len() * (y1 - y0));
    let mut total = 0.0;
    for y in y0..y1 {
        let dy = y as f64 - cv;
        let dy2 = dy * dy;
        let ey = (dy2 * inv).exp();
        for &(dx2, ex) in &gx {
            let v = if dx2 + dy2 <= r2 { ex * ey } else { 0.0 };
            total += v;
            values.push(v);
        }
    }
    if total > 0.0 {
        let k = 1.0 / total;
        values.iter_mut().for_each(|v| *v *= k);
        Patch {
            x0,
            y0,
            w: x1 - x0,
            values,
        }
    } else {
        // support narrower than the pixel pitch
        point_patch(center, width, height)
    }
}

/// The whole unit on the pixel nearest to `center`.
fn point_patch((cu, cv): (f64, f64), width: usize, height: usize) -> Patch {
    let x = (cu.round().max(0.0) as usize).min(width - 1);
    let y = (cv.round().max(0.0) as usize).min(height - 1);
    Patch {
        x0: x,
        y0: y,
        w: 1,
        values: vec![1.0],
    }
}

/// Renders the density map of `annotations` on a `width x height` grid.
/// `center` is the point distances are measured from (the stereographic
/// image center, or the upper-left corner of an aligned quadrant).
pub fn render_density(
    annotations: &[Annotation],
    width: usize,
    height: usize,
    center: (f64, f64),
    spec: &KernelSpec,
) -> Result<DensityMap> {
    render_density_with(annotations, width, height, center, spec, Execution::default())
}

pub fn render_density_with(
    annotations: &[Annotation],
    width: usize,
    height: usize,
    center: (f64, f64),
    spec: &KernelSpec,
    exec: Execution,
) -> Result<DensityMap> {
    if width == 0 || height == 0 {
        return Err(Error::DimensionMismatch(format!("empty {width}x{height} map")));
    }
    let (sigmas, geometry_fallback) = kernel_sigmas(annotations, center, spec)?;
    let patches = exec.map_indexed(annotations.len(), |i| {
        kernel_patch(annotations[i].center, sigmas[i], spec.truncation, width, height)
    });
    let mut map = DensityMap::zeros(
        width,
        height,
        DensityMeta {
            kernel: *spec,
            center,
            sigmas,
            geometry_fallback,
        },
    );
    // ordered reduction keeps the result independent of the thread count
    for p in &patches {
        for (row, chunk) in p.values.chunks(p.w).enumerate() {
            let start = (p.y0 + row) * width + p.x0;
            for (dst, v) in map.values[start..start + p.w].iter_mut().zip(chunk) {
                *dst += v;
            }
        }
    }
    Ok(map)
}

/// Sum of the map over pixels whose centers lie in `region` (closed), or
/// over the whole map.
pub fn integrate_count(map: &DensityMap, region: Option<&[(f64, f64)]>) -> f64 {
    match region {
        None => map.sum(),
        Some(poly) => {
            let mut s = 0.0;
            for y in 0..map.height {
                for x in 0..map.width {
                    if point_in_polygon((x as f64, y as f64), poly) {
                        s += map.at(x, y);
                    }
                }
            }
            s
        }
    }
}

/// Class layout for count discretization: `{0}`, fine steps up to
/// `fine_limit`, coarse steps up to `c_max`, then `(c_max, inf)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CountBins {
    pub fine_step: f64,
    pub coarse_step: f64,
    pub fine_limit: f64,
    pub c_max: f64,
}

/// A class interval. The zero class is the singleton `{0}`; every other class
/// is `(lo, hi]`, with `hi = inf` for the overflow class.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BinBounds {
    pub lo: f64,
    pub hi: f64,
}

impl BinBounds {
    pub fn contains(&self, v: f64) -> bool {
        if self.hi == 0.0 {
            v == 0.0
        } else {
            v > self.lo && v <= self.hi
        }
    }
}

// bounds are computed as k * step; snapping to 1e-12 keeps e.g. 9 * 0.05 on
// the same double as the literal 0.45
fn snap(v: f64) -> f64 {
    (v * 1e12).round() / 1e12
}

impl CountBins {
    pub fn new(c_max: f64) -> Result<Self> {
        let b = Self {
            fine_step: 0.05,
            coarse_step: 0.5,
            fine_limit: 0.5,
            c_max,
        };
        b.validate()?;
        Ok(b)
    }

    /// `c_max` is the largest training count rounded up to the coarse grid
    /// (and at least `fine_limit`).
    pub fn from_training_counts(counts: &[f64]) -> Result<Self> {
        if counts.iter().any(|c| !(*c >= 0.0)) {
            return Err(Error::InvalidBins("negative or NaN training count".into()));
        }
        let max = counts.iter().copied().fold(0.0, f64::max);
        let c_max = ((max / 0.5).ceil() * 0.5).max(0.5);
        Self::new(c_max)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidBins(m));
        let pos = |v: f64| v > 0.0 && v.is_finite();
        if !(pos(self.fine_step) && pos(self.coarse_step) && pos(self.fine_limit) && pos(self.c_max))
        {
            return bad(format!("all steps and limits must be positive: {self:?}"));
        }
        let whole = |v: f64| (v - v.round()).abs() < 1e-9;
        if !whole(self.fine_limit / self.fine_step) {
            return bad(format!(
                "fine step {} does not divide {}",
                self.fine_step, self.fine_limit
            ));
        }
        if self.c_max < self.fine_limit || !whole((self.c_max - self.fine_limit) / self.coarse_step)
        {
            return bad(format!(
                "c_max {} is not fine_limit + a multiple of {}",
                self.c_max, self.coarse_step
            ));
        }
        Ok(())
    }

    fn n_fine(&self) -> usize {
        (self.fine_limit / self.fine_step).round() as usize
    }

    fn n_coarse(&self) -> usize {
        ((self.c_max - self.fine_limit) / self.coarse_step).round() as usize
    }

    /// Index of the `(c_max, inf)` class.
    pub fn overflow_class(&self) -> usize {
        self.n_fine() + self.n_coarse() + 1
    }

    pub fn num_classes(&self) -> usize {
        self.overflow_class() + 1
    }

    /// Upper edge of class `i` for `1 <= i < overflow_class()`.
    fn upper(&self, i: usize) -> f64 {
        let nf = self.n_fine();
        let nc = self.n_coarse();
        if i == nf {
            self.fine_limit
        } else if i < nf {
            snap(i as f64 * self.fine_step)
        } else if i == nf + nc {
            self.c_max
        } else {
            snap(self.fine_limit + (i - nf) as f64 * self.coarse_step)
        }
    }

    pub fn bin_bounds(&self, index: usize) -> Result<BinBounds> {
        let over = self.overflow_class();
        if index > over {
            return Err(Error::InvalidBins(format!(
                "class {index} out of range 0..={over}"
            )));
        }
        Ok(match index {
            0 => BinBounds { lo: 0.0, hi: 0.0 },
            i if i == over => BinBounds {
                lo: self.c_max,
                hi: f64::INFINITY,
            },
            1 => BinBounds {
                lo: 0.0,
                hi: self.upper(1),
            },
            i => BinBounds {
                lo: self.upper(i - 1),
                hi: self.upper(i),
            },
        })
    }

    pub fn discretize_count(&self, value: f64) -> Result<usize> {
        if !(value >= 0.0) {
            return Err(Error::NegativeCount(value));
        }
        if value == 0.0 {
            return Ok(0);
        }
        if value > self.c_max {
            return Ok(self.overflow_class());
        }
        let nf = self.n_fine();
        let (mut i, lo, hi) = if value <= self.fine_limit {
            ((value / self.fine_step).ceil() as usize, 1, nf)
        } else {
            (
                nf + ((value - self.fine_limit) / self.coarse_step).ceil() as usize,
                nf + 1,
                nf + self.n_coarse(),
            )
        };
        i = i.clamp(lo, hi);
        // the estimate can be one class off on a boundary
        while i > lo && value <= self.upper(i - 1) {
            i -= 1;
        }
        while i < hi && value > self.upper(i) {
            i += 1;
        }
        Ok(i)
    }
}

pub fn discretize_count(value: f64, bins: &CountBins) -> Result<usize> {
    bins.discretize_count(value)
}

pub fn bin_bounds(index: usize, bins: &CountBins) -> Result<BinBounds> {
    bins.bin_bounds(index)
}
