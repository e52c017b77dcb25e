//! Synthetic plane scenes and Tissot diagnostics.
//!
//! A scene is a horizontal plane `z = k` carrying flat disks of a fixed world
//! radius, seen by the omnidirectional camera at the origin. Rendering goes
//! through the same pixel -> plane -> sphere chain as the resampler, so the
//! measured disk sizes are ground truth for how the stereographic projection
//! scales objects with distance from the image center.

use nalgebra::{Matrix2, SMatrix, SVector};
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;

use crate::density::{adaptive_sigma, distance_from_center, Annotation, DistortionParams};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::geom::{
    equirect_raw, stereo_raw, unstereo_raw, ProjectionParams, SpherePoint, SphereRotation,
};
use crate::raster::Raster;
use crate::resample::StereoImage;

pub const DEFAULT_SUPERSAMPLE: usize = 4;
/// Boundary samples used to bound a disk's footprint.
const OUTLINE_SAMPLES: usize = 256;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    /// The scene plane is `z = k`.
    pub plane_height: f64,
    pub disk_radius: f64,
    pub disk_centers: Vec<(f64, f64)>,
    pub projection: ProjectionParams,
    /// World -> aligned camera frame.
    #[serde(default)]
    pub rotation: SphereRotation,
    #[serde(default = "default_supersample")]
    pub supersample: usize,
}

fn default_supersample() -> usize {
    DEFAULT_SUPERSAMPLE
}

impl SceneSpec {
    /// Disks every half unit along `+x` from the nadir out to four plane
    /// heights, on the plane `z = -2`, framed so that the image edge is the
    /// horizon.
    pub fn radial_sweep(size: usize) -> Result<Self> {
        let k: f64 = -2.0;
        let n = (4.0 * k.abs() / 0.5) as usize;
        Ok(Self {
            plane_height: k,
            disk_radius: 0.2,
            disk_centers: (0..=n).map(|i| (0.5 * i as f64, 0.0)).collect(),
            projection: ProjectionParams::framed(size, size, 1.0, 2.0)?,
            rotation: SphereRotation::identity(),
            supersample: DEFAULT_SUPERSAMPLE,
        })
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidScene(m));
        if !(self.plane_height != 0.0 && self.plane_height.is_finite()) {
            return bad(format!(
                "plane height must be finite and non-zero, got {}",
                self.plane_height
            ));
        }
        if !(self.disk_radius > 0.0 && self.disk_radius.is_finite()) {
            return bad(format!("disk radius must be positive, got {}", self.disk_radius));
        }
        if self.supersample == 0 {
            return bad("supersample factor must be at least 1".into());
        }
        self.projection.validate()?;
        for (i, a) in self.disk_centers.iter().enumerate() {
            if !(a.0.is_finite() && a.1.is_finite()) {
                return bad(format!("disk {i} has a non-finite center"));
            }
            for (j, b) in self.disk_centers.iter().enumerate().skip(i + 1) {
                if (a.0 - b.0).hypot(a.1 - b.1) <= 2.0 * self.disk_radius {
                    return bad(format!("disks {i} and {j} overlap"));
                }
            }
        }
        Ok(())
    }

    /// Plane point -> pixel, `None` near the projection center.
    fn plane_to_pixel(&self, x: f64, y: f64) -> Option<(f64, f64)> {
        let k = self.plane_height;
        let r = (x * x + y * y + k * k).sqrt();
        let [sx, sy, sz] = self.rotation.apply_raw([x / r, y / r, k / r]);
        let p = &self.projection;
        let (px, py) = stereo_raw(sx, sy, sz, p.d)?;
        Some((p.center_u + p.scale * px, p.center_v + p.scale * py))
    }

    /// Pixel -> plane point, `None` when the viewing ray misses the plane.
    fn pixel_to_plane(&self, u: f64, v: f64, inv: &SphereRotation) -> Option<(f64, f64)> {
        let p = &self.projection;
        let s = unstereo_raw((u - p.center_u) / p.scale, (v - p.center_v) / p.scale, p.d);
        let [x, y, z] = inv.apply_raw(s);
        let t = self.plane_height / z;
        (t > 0.0 && t.is_finite()).then_some((t * x, t * y))
    }

    /// Direction of a plane point in the aligned frame.
    fn aligned_direction(&self, x: f64, y: f64) -> [f64; 3] {
        let k = self.plane_height;
        let r = (x * x + y * y + k * k).sqrt();
        self.rotation.apply_raw([x / r, y / r, k / r])
    }
}

/// One rendered disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RenderedDisk {
    /// Box around the covered pixels; center is the covered-pixel centroid.
    pub annotation: Annotation,
    /// Number of pixels whose coverage reached one half.
    pub pixel_area: usize,
    /// `sqrt(area / pi)`.
    pub measured_radius_px: f64,
    pub plane_center: (f64, f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RenderedScene {
    /// Binary single-channel raster: 1 inside a disk.
    pub image: StereoImage,
    pub disks: Vec<RenderedDisk>,
}

/// Renders the disks with `supersample^2` samples per pixel; a pixel belongs
/// to a disk when at least half of its samples hit it.
pub fn render_scene(spec: &SceneSpec) -> Result<RenderedScene> {
    render_scene_with(spec, Execution::default())
}

pub fn render_scene_with(spec: &SceneSpec, exec: Execution) -> Result<RenderedScene> {
    spec.validate()?;
    let (w, h) = (spec.projection.width, spec.projection.height);
    // Disks must sit in the hemisphere facing the image center.
    for (i, &(x, y)) in spec.disk_centers.iter().enumerate() {
        let reach = spec.disk_radius;
        let rim_ok = (0..OUTLINE_SAMPLES).all(|j| {
            let a = std::f64::consts::TAU * j as f64 / OUTLINE_SAMPLES as f64;
            spec.aligned_direction(x + reach * a.cos(), y + reach * a.sin())[2] < 0.0
        });
        if spec.aligned_direction(x, y)[2] >= 0.0 || !rim_ok {
            return Err(Error::DiskBehindCamera { index: i });
        }
    }
    let inv = spec.rotation.inverse();
    let n = spec.supersample;
    let threshold = n * n;
    let results: Vec<Result<(Vec<usize>, RenderedDisk)>> =
        exec.map_indexed(spec.disk_centers.len(), |i| {
            let (cx, cy) = spec.disk_centers[i];
            let r = spec.disk_radius;
            let (mut lo_u, mut lo_v, mut hi_u, mut hi_v) =
                (f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
            for j in 0..OUTLINE_SAMPLES {
                let a = std::f64::consts::TAU * j as f64 / OUTLINE_SAMPLES as f64;
                let (u, v) = spec
                    .plane_to_pixel(cx + r * a.cos(), cy + r * a.sin())
                    .ok_or(Error::DiskBehindCamera { index: i })?;
                lo_u = lo_u.min(u);
                lo_v = lo_v.min(v);
                hi_u = hi_u.max(u);
                hi_v = hi_v.max(v);
            }
            let clamp = |x: f64, n: usize| x.max(0.0).min(n as f64 - 1.0) as usize;
            let (x0, x1) = (clamp(lo_u.floor() - 2.0, w), clamp(hi_u.ceil() + 2.0, w));
            let (y0, y1) = (clamp(lo_v.floor() - 2.0, h), clamp(hi_v.ceil() + 2.0, h));
            let r2 = r * r;
            let mut covered = Vec::new();
            let (mut su, mut sv) = (0.0, 0.0);
            let (mut bu0, mut bv0, mut bu1, mut bv1) = (usize::MAX, usize::MAX, 0, 0);
            for y in y0..=y1 {
                for x in x0..=x1 {
                    let mut hits = 0;
                    for sy in 0..n {
                        let v = y as f64 + (sy as f64 + 0.5) / n as f64 - 0.5;
                        for sx in 0..n {
                            let u = x as f64 + (sx as f64 + 0.5) / n as f64 - 0.5;
                            if let Some((px, py)) = spec.pixel_to_plane(u, v, &inv) {
                                let (dx, dy) = (px - cx, py - cy);
                                if dx * dx + dy * dy <= r2 {
                                    hits += 1;
                                }
                            }
                        }
                    }
                    if 2 * hits >= threshold {
                        covered.push(y * w + x);
                        su += x as f64;
                        sv += y as f64;
                        bu0 = bu0.min(x);
                        bv0 = bv0.min(y);
                        bu1 = bu1.max(x);
                        bv1 = bv1.max(y);
                    }
                }
            }
            let area = covered.len();
            let annotation = if area == 0 {
                let (u, v) = spec.plane_to_pixel(cx, cy).ok_or(Error::DiskBehindCamera { index: i })?;
                Annotation::point(u, v)
            } else {
                Annotation {
                    bbox: [
                        bu0 as f64 - 0.5,
                        bv0 as f64 - 0.5,
                        bu1 as f64 + 0.5,
                        bv1 as f64 + 0.5,
                    ],
                    center: (su / area as f64, sv / area as f64),
                }
            };
            Ok((
                covered,
                RenderedDisk {
                    annotation,
                    pixel_area: area,
                    measured_radius_px: (area as f64 / std::f64::consts::PI).sqrt(),
                    plane_center: (cx, cy),
                },
            ))
        });
    let mut raster = Raster::zeros(w, h, 1);
    let mut disks = Vec::with_capacity(results.len());
    for r in results {
        let (covered, disk) = r?;
        for i in covered {
            raster.data[i] = 1.0;
        }
        disks.push(disk);
    }
    Ok(RenderedScene {
        image: StereoImage::new(raster, spec.projection, None)?,
        disks,
    })
}

/// Local magnification (pixels per world unit) of the map plane -> pixels at
/// plane point `p`: the square root of the Jacobian determinant, i.e. the
/// geometric mean of the two principal stretches, from central differences
/// with step `1e-5 * |k|`.
pub fn exact_scale_factor(p: (f64, f64), spec: &SceneSpec) -> Result<f64> {
    spec.validate()?;
    let h = 1e-5 * spec.plane_height.abs();
    let f = |x: f64, y: f64| spec.plane_to_pixel(x, y).ok_or(Error::NearSingularity);
    let (xp, xm) = (f(p.0 + h, p.1)?, f(p.0 - h, p.1)?);
    let (yp, ym) = (f(p.0, p.1 + h)?, f(p.0, p.1 - h)?);
    let j = Matrix2::new(
        (xp.0 - xm.0) / (2.0 * h),
        (yp.0 - ym.0) / (2.0 * h),
        (xp.1 - xm.1) / (2.0 * h),
        (yp.1 - ym.1) / (2.0 * h),
    );
    Ok(j.determinant().abs().sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TissotMode {
    /// Outline in stereographic pixel coordinates.
    Stereographic,
    /// Outline in `(lon, lat)` radians.
    Equirectangular,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ellipse {
    pub center: (f64, f64),
    /// Semi-major axis.
    pub a: f64,
    /// Semi-minor axis.
    pub b: f64,
    /// Direction of the major axis, radians.
    pub angle: f64,
}

impl Ellipse {
    pub fn eccentricity(&self) -> f64 {
        (1.0 - (self.b / self.a).powi(2)).max(0.0).sqrt()
    }

    pub fn axis_ratio(&self) -> f64 {
        self.a / self.b
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TissotSample {
    pub direction: SpherePoint,
    pub epsilon: f64,
    pub outline: Vec<(f64, f64)>,
    pub ellipse: Ellipse,
}

pub const TISSOT_OUTLINE_POINTS: usize = 96;
pub const TISSOT_MAX_EPSILON: f64 = 0.05;

/// Projects the small circle of angular radius `epsilon` around each
/// direction and fits an ellipse to the outline.
pub fn tissot(
    directions: &[SpherePoint],
    epsilon: f64,
    params: &ProjectionParams,
    mode: TissotMode,
) -> Result<Vec<TissotSample>> {
    if !(epsilon > 0.0 && epsilon <= TISSOT_MAX_EPSILON) {
        return Err(Error::InvalidParams(format!(
            "epsilon must be in (0, {TISSOT_MAX_EPSILON}], got {epsilon}"
        )));
    }
    params.validate()?;
    directions
        .iter()
        .enumerate()
        .map(|(i, &s)| {
            if s.angle_to(&SpherePoint::NORTH) <= 2.0 * epsilon {
                return Err(Error::NearProjectionCenter { index: i });
            }
            if mode == TissotMode::Equirectangular
                && s.angle_to(&SpherePoint::SOUTH) <= 2.0 * epsilon
            {
                return Err(Error::InvalidParams(format!(
                    "direction {i} is too close to a pole for the equirectangular mode"
                )));
            }
            let outline = small_circle(s, epsilon)
                .into_iter()
                .map(|[x, y, z]| match mode {
                    TissotMode::Stereographic => {
                        let (px, py) = stereo_raw(x, y, z, params.d)
                            .ok_or(Error::NearProjectionCenter { index: i })?;
                        Ok((
                            params.center_u + params.scale * px,
                            params.center_v + params.scale * py,
                        ))
                    }
                    TissotMode::Equirectangular => Ok(equirect_raw(x, y, z)),
                })
                .collect::<Result<Vec<_>>>()?;
            let outline = if mode == TissotMode::Equirectangular {
                let (lon0, _) = equirect_raw(s.x(), s.y(), s.z());
                unwrap_longitude(outline, lon0)
            } else {
                outline
            };
            let ellipse = fit_ellipse(&outline)?;
            Ok(TissotSample {
                direction: s,
                epsilon,
                outline,
                ellipse,
            })
        })
        .collect()
}

fn small_circle(s: SpherePoint, epsilon: f64) -> Vec<[f64; 3]> {
    let c = s.to_array();
    // any vector not parallel to c seeds the tangent frame
    let seed = if c[0].abs() < 0.9 { [1.0, 0.0, 0.0] } else { [0.0, 1.0, 0.0] };
    let e1 = normalize(cross(c, seed));
    let e2 = cross(c, e1);
    let (se, ce) = epsilon.sin_cos();
    (0..TISSOT_OUTLINE_POINTS)
        .map(|j| {
            let phi = std::f64::consts::TAU * j as f64 / TISSOT_OUTLINE_POINTS as f64;
            let (sp, cp) = phi.sin_cos();
            std::array::from_fn(|k| ce * c[k] + se * (cp * e1[k] + sp * e2[k]))
        })
        .collect()
}

fn unwrap_longitude(points: Vec<(f64, f64)>, lon0: f64) -> Vec<(f64, f64)> {
    use std::f64::consts::{PI, TAU};
    points
        .into_iter()
        .map(|(lon, lat)| {
            let mut d = lon - lon0;
            if d > PI {
                d -= TAU;
            } else if d < -PI {
                d += TAU;
            }
            (lon0 + d, lat)
        })
        .collect()
}

fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn normalize(v: [f64; 3]) -> [f64; 3] {
    let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    [v[0] / n, v[1] / n, v[2] / n]
}

/// Least-squares conic fit `A x^2 + B xy + C y^2 + D x + E y = 1` on
/// centered, scale-normalized points.
pub fn fit_ellipse(points: &[(f64, f64)]) -> Result<Ellipse> {
    if points.len() < 5 {
        return Err(Error::InvalidParams(format!(
            "an ellipse fit needs at least 5 points, got {}",
            points.len()
        )));
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let s = (points
        .iter()
        .map(|p| (p.0 - mx).powi(2) + (p.1 - my).powi(2))
        .sum::<f64>()
        / n)
        .sqrt();
    if !(s > 0.0) {
        return Err(Error::InvalidParams("outline points coincide".into()));
    }
    let mut ata = SMatrix::<f64, 5, 5>::zeros();
    let mut atb = SVector::<f64, 5>::zeros();
    for p in points {
        let (x, y) = ((p.0 - mx) / s, (p.1 - my) / s);
        let row = SVector::<f64, 5>::from([x * x, x * y, y * y, x, y]);
        ata += row * row.transpose();
        atb += row;
    }
    let c = ata
        .lu()
        .solve(&atb)
        .ok_or_else(|| Error::InvalidParams("degenerate outline".into()))?;
    let (a, b, cc, d, e) = (c[0], c[1], c[2], c[3], c[4]);
    let q = Matrix2::new(a, b / 2.0, b / 2.0, cc);
    let center = (2.0 * q)
        .try_inverse()
        .ok_or_else(|| Error::InvalidParams("conic has no center".into()))?
        * nalgebra::Vector2::new(-d, -e);
    let (x0, y0) = (center[0], center[1]);
    let f0 = a * x0 * x0 + b * x0 * y0 + cc * y0 * y0 + d * x0 + e * y0 - 1.0;
    let eig = q.symmetric_eigen();
    let (l0, l1) = (eig.eigenvalues[0], eig.eigenvalues[1]);
    if !(l0 > 0.0 && l1 > 0.0 && f0 < 0.0) {
        return Err(Error::InvalidParams("outline is not an ellipse".into()));
    }
    let (r0, r1) = ((-f0 / l0).sqrt(), (-f0 / l1).sqrt());
    let (major, minor, axis) = if r0 >= r1 { (r0, r1, 0) } else { (r1, r0, 1) };
    let v = eig.eigenvectors.column(axis);
    Ok(Ellipse {
        center: (mx + s * x0, my + s * y0),
        a: s * major,
        b: s * minor,
        angle: v[1].atan2(v[0]),
    })
}

/// Pearson correlation coefficient; `NaN` for constant or short input.
pub fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len());
    if n < 2 {
        return f64::NAN;
    }
    let (a, b) = (&a[..n], &b[..n]);
    let ma = a.iter().sum::<f64>() / n as f64;
    let mb = b.iter().sum::<f64>() / n as f64;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    sab / (saa * sbb).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub distance_px: f64,
    pub measured_radius_px: f64,
    pub exact_scale: f64,
    /// `sigma_alpha * D_norm / D`, unclamped.
    pub sigma_alpha_over_d: f64,
    /// The distortion-adaptive kernel sigma at this distance (clamped).
    pub kernel_sigma: f64,
}

/// Scale-approximation audit over a rendered sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthReport {
    pub kernel: DistortionParams,
    /// Rows inside the audited annulus, ordered by distance.
    pub rows: Vec<ReportRow>,
    /// Measured radius strictly decreasing in distance over all disks.
    pub radius_strictly_decreasing: bool,
    pub pearson_radius_vs_kernel_sigma: f64,
    pub pearson_radius_vs_inverse_distance: f64,
    pub pearson_scale_vs_kernel_sigma: f64,
    pub pearson_scale_vs_inverse_distance: f64,
    /// Largest `|s - c g| / s` for the least-squares proportional fit of the
    /// exact scale `s` against `g = sigma_alpha * D_norm / D`.
    pub max_relative_deviation: f64,
}

/// Annulus audited by the report, as fractions of `D_norm`.
pub const AUDIT_ANNULUS: (f64, f64) = (0.1, 1.0);

pub fn synth_report(
    spec: &SceneSpec,
    scene: &RenderedScene,
    kernel: &DistortionParams,
) -> Result<SynthReport> {
    let center = spec.projection.center();
    let mut all = Vec::with_capacity(scene.disks.len());
    for disk in &scene.disks {
        let dist = distance_from_center(disk.annotation.center, center);
        let raw = if dist > 0.0 {
            kernel.sigma_alpha * kernel.d_norm / dist
        } else {
            f64::INFINITY
        };
        all.push(ReportRow {
            distance_px: dist,
            measured_radius_px: disk.measured_radius_px,
            exact_scale: exact_scale_factor(disk.plane_center, spec)?,
            sigma_alpha_over_d: raw,
            kernel_sigma: adaptive_sigma(disk.annotation.center, center, kernel),
        });
    }
    all.sort_by(|a, b| a.distance_px.total_cmp(&b.distance_px));
    let radius_strictly_decreasing = all
        .windows(2)
        .all(|w| w[1].measured_radius_px < w[0].measured_radius_px);
    let (lo, hi) = (AUDIT_ANNULUS.0 * kernel.d_norm, AUDIT_ANNULUS.1 * kernel.d_norm);
    let rows: Vec<ReportRow> = all
        .into_iter()
        .filter(|r| r.distance_px >= lo && r.distance_px <= hi)
        .collect();
    let col = |f: fn(&ReportRow) -> f64| rows.iter().map(f).collect::<Vec<_>>();
    let radius = col(|r| r.measured_radius_px);
    let scale = col(|r| r.exact_scale);
    let sigma = col(|r| r.kernel_sigma);
    let raw = col(|r| r.sigma_alpha_over_d);
    let c = scale.iter().zip(&raw).map(|(s, g)| s * g).sum::<f64>()
        / raw.iter().map(|g| g * g).sum::<f64>();
    let max_relative_deviation = scale
        .iter()
        .zip(&raw)
        .map(|(s, g)| ((s - c * g) / s).abs())
        .fold(0.0, f64::max);
    Ok(SynthReport {
        kernel: *kernel,
        radius_strictly_decreasing,
        pearson_radius_vs_kernel_sigma: pearson(&radius, &sigma),
        pearson_radius_vs_inverse_distance: pearson(&radius, &raw),
        pearson_scale_vs_kernel_sigma: pearson(&scale, &sigma),
        pearson_scale_vs_inverse_distance: pearson(&scale, &raw),
        max_relative_deviation,
        rows,
    })
}

impl SynthReport {
    pub fn to_csv(&self) -> String {
        let mut out =
            String::from("distance_px,measured_radius_px,exact_scale,sigma_alpha_over_D,kernel_sigma\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                r.distance_px, r.measured_radius_px, r.exact_scale, r.sigma_alpha_over_d, r.kernel_sigma
            );
        }
        out
    }
}
