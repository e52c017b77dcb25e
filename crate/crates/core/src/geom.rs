//! Point-level projection mathematics.
//!
//! Frame conventions: the camera center is the origin, `z` points up in the
//! aligned frame, the projection center is the north pole `N = (0, 0, 1)` and
//! the image plane is `z = -d` with `d >= 1`. Pixel coordinates address pixel
//! centers: pixel `(i, j)` sits at continuous coordinate `(i, j)` and covers
//! `[i - 0.5, i + 0.5] x [j - 0.5, j + 0.5]`. `u` grows rightward, `v`
//! downward.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_2, PI};

use crate::error::{Error, Result};

const UNIT_TOL: f64 = 1e-12;
const POLE_TOL: f64 = 1e-12;
const ROTATION_TOL: f64 = 1e-9;

/// A point in the camera-centered 3D frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Point3 {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn norm(&self) -> f64 {
        (self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }
}

/// A unit vector on the viewing sphere.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpherePoint {
    x: f64,
    y: f64,
    z: f64,
}

impl SpherePoint {
    /// Projection center.
    pub const NORTH: SpherePoint = SpherePoint {
        x: 0.0,
        y: 0.0,
        z: 1.0,
    };
    /// Maps to the plane center `O_c`.
    pub const SOUTH: SpherePoint = SpherePoint {
        x: 0.0,
        y: 0.0,
        z: -1.0,
    };

    /// Builds a sphere point from components that already have unit norm.
    pub fn new(x: f64, y: f64, z: f64) -> Result<Self> {
        let n2 = x * x + y * y + z * z;
        if !n2.is_finite() || (n2 - 1.0).abs() > 2.0 * UNIT_TOL {
            return Err(Error::InvalidParams(format!(
                "({x}, {y}, {z}) is not a unit vector (norm^2 = {n2})"
            )));
        }
        Ok(Self { x, y, z })
    }

    /// Components are trusted to be unit-norm up to rounding.
    pub(crate) const fn new_unchecked(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn x(&self) -> f64 {
        self.x
    }
    pub fn y(&self) -> f64 {
        self.y
    }
    pub fn z(&self) -> f64 {
        self.z
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    pub fn dot(&self, other: &SpherePoint) -> f64 {
        self.x * other.x + self.y * other.y + self.z * other.z
    }

    /// Great-circle angle to `other`, robust for tiny angles.
    pub fn angle_to(&self, other: &SpherePoint) -> f64 {
        let cx = self.y * other.z - self.z * other.y;
        let cy = self.z * other.x - self.x * other.z;
        let cz = self.x * other.y - self.y * other.x;
        (cx * cx + cy * cy + cz * cz).sqrt().atan2(self.dot(other))
    }

    fn vector(&self) -> Vector3<f64> {
        Vector3::new(self.x, self.y, self.z)
    }
}

/// A point on the projection plane `z = -d`, expressed by its in-plane
/// coordinates relative to `O_c`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlanePoint {
    pub px: f64,
    pub py: f64,
}

impl PlanePoint {
    pub const fn new(px: f64, py: f64) -> Self {
        Self { px, py }
    }

    pub fn radius(&self) -> f64 {
        self.px.hypot(self.py)
    }
}

/// Ties the projection plane to a pixel raster.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProjectionParams {
    /// Plane offset: the plane is `z = -d`.
    pub d: f64,
    pub width: usize,
    pub height: usize,
    /// Pixels per plane unit.
    pub scale: f64,
    /// Pixel coordinates of `O_c`.
    pub center_u: f64,
    pub center_v: f64,
}

/// Plane radius covered by the half-width of a default-framed image.
pub const DEFAULT_PLANE_RADIUS: f64 = 4.0;

impl ProjectionParams {
    pub fn new(
        d: f64,
        width: usize,
        height: usize,
        scale: f64,
        center_u: f64,
        center_v: f64,
    ) -> Result<Self> {
        let p = Self {
            d,
            width,
            height,
            scale,
            center_u,
            center_v,
        };
        p.validate()?;
        Ok(p)
    }

    /// Frames a `width x height` raster so that its half-extent (the smaller
    /// one) spans `plane_radius` plane units, centered on the raster's
    /// geometric center `((w - 1) / 2, (h - 1) / 2)`.
    pub fn framed(width: usize, height: usize, d: f64, plane_radius: f64) -> Result<Self> {
        if !(plane_radius > 0.0 && plane_radius.is_finite()) {
            return Err(Error::InvalidParams(format!(
                "plane radius must be positive, got {plane_radius}"
            )));
        }
        let half = width.min(height) as f64 / 2.0;
        Self::new(
            d,
            width,
            height,
            half / plane_radius,
            (width as f64 - 1.0) / 2.0,
            (height as f64 - 1.0) / 2.0,
        )
    }

    /// `framed` with `d = 1` and the default plane radius.
    pub fn square_default(size: usize) -> Result<Self> {
        Self::framed(size, size, 1.0, DEFAULT_PLANE_RADIUS)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParams(m));
        if !(self.d >= 1.0 && self.d.is_finite()) {
            return bad(format!("d must be >= 1, got {}", self.d));
        }
        if self.width == 0 || self.height == 0 {
            return bad(format!("empty raster {}x{}", self.width, self.height));
        }
        if !(self.scale > 0.0 && self.scale.is_finite()) {
            return bad(format!("scale must be positive, got {}", self.scale));
        }
        if !(0.0..self.width as f64).contains(&self.center_u)
            || !(0.0..self.height as f64).contains(&self.center_v)
        {
            return bad(format!(
                "center ({}, {}) outside {}x{} raster",
                self.center_u, self.center_v, self.width, self.height
            ));
        }
        Ok(())
    }

    pub fn center(&self) -> (f64, f64) {
        (self.center_u, self.center_v)
    }
}

/// A proper rotation of the viewing sphere.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SphereRotation {
    m: Matrix3<f64>,
}

impl Default for SphereRotation {
    fn default() -> Self {
        Self::identity()
    }
}

impl SphereRotation {
    pub fn identity() -> Self {
        Self {
            m: Matrix3::identity(),
        }
    }

    /// Validates orthonormality and `det = +1` within `1e-9`.
    pub fn from_matrix(rows: [[f64; 3]; 3]) -> Result<Self> {
        let m = Matrix3::from_fn(|r, c| rows[r][c]);
        if m.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidRotation("non-finite entry".into()));
        }
        let err = (m * m.transpose() - Matrix3::identity()).abs().max();
        if err > ROTATION_TOL {
            return Err(Error::InvalidRotation(format!(
                "R R^T deviates from I by {err:e}"
            )));
        }
        let det = m.determinant();
        if (det - 1.0).abs() > ROTATION_TOL {
            return Err(Error::InvalidRotation(format!("determinant is {det}")));
        }
        Ok(Self { m })
    }

    pub fn about_x(angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        Self {
            m: Matrix3::new(1.0, 0.0, 0.0, 0.0, c, -s, 0.0, s, c),
        }
    }

    pub fn about_y(angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        Self {
            m: Matrix3::new(c, 0.0, s, 0.0, 1.0, 0.0, -s, 0.0, c),
        }
    }

    pub fn about_z(angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        Self {
            m: Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0),
        }
    }

    /// `Rz(yaw) * Ry(pitch) * Rx(roll)`.
    pub fn from_roll_pitch_yaw(roll: f64, pitch: f64, yaw: f64) -> Self {
        Self::about_z(yaw)
            .then_after(&Self::about_y(pitch))
            .then_after(&Self::about_x(roll))
    }

    /// Rotation around an arbitrary axis (need not be normalised).
    pub fn about_axis(axis: [f64; 3], angle: f64) -> Result<Self> {
        let v = Vector3::from(axis);
        let unit = nalgebra::Unit::try_new(v, 1e-15).ok_or(Error::ZeroVector)?;
        let r = nalgebra::Rotation3::from_axis_angle(&unit, angle);
        Ok(Self { m: *r.matrix() })
    }

    /// `self * inner`: applies `inner` first, then `self`.
    pub fn then_after(&self, inner: &SphereRotation) -> Self {
        Self { m: self.m * inner.m }
    }

    /// Applies `self` first, then `outer`.
    pub fn then(&self, outer: &SphereRotation) -> Self {
        outer.then_after(self)
    }

    pub fn inverse(&self) -> Self {
        Self {
            m: self.m.transpose(),
        }
    }

    pub fn rows(&self) -> [[f64; 3]; 3] {
        let m = &self.m;
        [
            [m[(0, 0)], m[(0, 1)], m[(0, 2)]],
            [m[(1, 0)], m[(1, 1)], m[(1, 2)]],
            [m[(2, 0)], m[(2, 1)], m[(2, 2)]],
        ]
    }

    pub fn is_identity(&self) -> bool {
        self.m == Matrix3::identity()
    }

    #[inline]
    pub(crate) fn apply_raw(&self, v: [f64; 3]) -> [f64; 3] {
        let m = &self.m;
        [
            m[(0, 0)] * v[0] + m[(0, 1)] * v[1] + m[(0, 2)] * v[2],
            m[(1, 0)] * v[0] + m[(1, 1)] * v[1] + m[(1, 2)] * v[2],
            m[(2, 0)] * v[0] + m[(2, 1)] * v[1] + m[(2, 2)] * v[2],
        ]
    }
}

impl Serialize for SphereRotation {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.rows().serialize(s)
    }
}

impl<'de> Deserialize<'de> for SphereRotation {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let rows = <[[f64; 3]; 3]>::deserialize(d)?;
        SphereRotation::from_matrix(rows).map_err(serde::de::Error::custom)
    }
}

/// Longitude/latitude on the sphere: `lat = +pi/2` is `+z`, `lon = 0` is `+x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EquirectCoord {
    pub lon: f64,
    pub lat: f64,
}

impl EquirectCoord {
    pub const fn new(lon: f64, lat: f64) -> Self {
        Self { lon, lat }
    }
}

/// Central projection of a 3D point onto the unit sphere.
pub fn project_to_sphere(p: Point3) -> Result<SpherePoint> {
    let r = p.norm();
    if !(r >= 1e-15) || !r.is_finite() {
        return Err(Error::ZeroVector);
    }
    Ok(SpherePoint::new_unchecked(p.x / r, p.y / r, p.z / r))
}

/// Stereographic projection from `N` onto the plane `z = -d`.
pub fn stereographic_project(s: SpherePoint, params: &ProjectionParams) -> Result<PlanePoint> {
    stereo_raw(s.x, s.y, s.z, params.d)
        .map(|(px, py)| PlanePoint::new(px, py))
        .ok_or(Error::AtProjectionCenter)
}

#[inline]
pub(crate) fn stereo_raw(x: f64, y: f64, z: f64, d: f64) -> Option<(f64, f64)> {
    let denom = 1.0 - z;
    if denom < POLE_TOL {
        return None;
    }
    let k = (1.0 + d) / denom;
    Some((k * x, k * y))
}

/// Inverse of [`stereographic_project`]; every finite plane point has a
/// preimage other than `N`.
pub fn stereographic_unproject(q: PlanePoint, params: &ProjectionParams) -> SpherePoint {
    let [x, y, z] = unstereo_raw(q.px, q.py, params.d);
    SpherePoint::new_unchecked(x, y, z)
}

#[inline]
pub(crate) fn unstereo_raw(px: f64, py: f64, d: f64) -> [f64; 3] {
    // With a = p / (1 + d): x = 2a_x / (1 + |a|^2), z = (|a|^2 - 1) / (|a|^2 + 1).
    let inv = 1.0 / (1.0 + d);
    let ax = px * inv;
    let ay = py * inv;
    let a2 = ax * ax + ay * ay;
    let denom = 1.0 / (1.0 + a2);
    [2.0 * ax * denom, 2.0 * ay * denom, (a2 - 1.0) * denom]
}

pub fn plane_to_pixel(q: PlanePoint, params: &ProjectionParams) -> (f64, f64) {
    (
        params.center_u + params.scale * q.px,
        params.center_v + params.scale * q.py,
    )
}

pub fn pixel_to_plane(u: f64, v: f64, params: &ProjectionParams) -> PlanePoint {
    PlanePoint::new(
        (u - params.center_u) / params.scale,
        (v - params.center_v) / params.scale,
    )
}

pub fn rotate_sphere(s: SpherePoint, rot: &SphereRotation) -> SpherePoint {
    let r = rot.m * s.vector();
    SpherePoint::new_unchecked(r.x, r.y, r.z)
}

pub fn equirect_to_sphere(c: EquirectCoord) -> SpherePoint {
    let (slat, clat) = c.lat.sin_cos();
    let (slon, clon) = c.lon.sin_cos();
    SpherePoint::new_unchecked(clat * clon, clat * slon, slat)
}

pub fn sphere_to_equirect(s: SpherePoint) -> EquirectCoord {
    let (lon, lat) = equirect_raw(s.x, s.y, s.z);
    EquirectCoord::new(lon, lat)
}

/// `(lon, lat)` with `lon` in `[-pi, pi)`.
#[inline]
pub(crate) fn equirect_raw(x: f64, y: f64, z: f64) -> (f64, f64) {
    let mut lon = y.atan2(x);
    if lon >= PI {
        lon -= 2.0 * PI;
    }
    let lat = z.clamp(-1.0, 1.0).asin().clamp(-FRAC_PI_2, FRAC_PI_2);
    (lon, lat)
}

/// Pixel center -> sphere in the aligned frame.
pub fn pixel_to_sphere(u: f64, v: f64, params: &ProjectionParams) -> SpherePoint {
    stereographic_unproject(pixel_to_plane(u, v, params), params)
}

/// Sphere (aligned frame) -> pixel.
pub fn sphere_to_pixel(s: SpherePoint, params: &ProjectionParams) -> Result<(f64, f64)> {
    Ok(plane_to_pixel(stereographic_project(s, params)?, params))
}
