//! Dataset records, manifests, unit-area cropping and file formats.
//!
//! All coordinates are pixels with the origin at the top-left pixel center,
//! `u` rightward and `v` downward.

pub mod crop;
pub mod fimg;
pub mod hull;

use serde::{Deserialize, Serialize};
use std::collections::{BTreeSet, HashSet};
use std::f64::consts::PI;
use std::path::Path;

use crate::density::Annotation;
use crate::error::{Error, Result};
use crate::geom::{ProjectionParams, SphereRotation};

pub use crop::{crop_unit_area, UnitAreaCrop};
pub use fimg::FloatImage;
pub use hull::{convex_hull, point_in_polygon};

pub const SCHEMA_VERSION: u32 = 1;

/// A marked trellis cell: its corner markers as a simple polygon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnitArea {
    pub id: String,
    pub corners: Vec<(f64, f64)>,
}

impl UnitArea {
    pub fn new(id: impl Into<String>, corners: Vec<(f64, f64)>) -> Result<Self> {
        let a = Self {
            id: id.into(),
            corners,
        };
        a.validate()?;
        Ok(a)
    }

    pub fn validate(&self) -> Result<()> {
        if !hull::is_simple_polygon(&self.corners) {
            return Err(Error::InvalidPolygon(format!(
                "unit area {} is not a simple polygon",
                self.id
            )));
        }
        Ok(())
    }
}

/// Orientation of the camera for one capture.
///
/// `Euler` angles are the gyroscope reading (radians, applied as
/// `Rz(yaw) Ry(pitch) Rx(roll)` in a z-up world frame); the aligned frame then
/// points `+z` straight down, so a level camera puts the zenith (the overhead
/// trellis) on the image center. `Matrix` is used verbatim as the
/// camera-to-aligned rotation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RotationSpec {
    Euler { roll: f64, pitch: f64, yaw: f64 },
    Matrix { matrix: SphereRotation },
}

impl Default for RotationSpec {
    fn default() -> Self {
        RotationSpec::Euler {
            roll: 0.0,
            pitch: 0.0,
            yaw: 0.0,
        }
    }
}

impl RotationSpec {
    pub fn to_rotation(&self) -> SphereRotation {
        match *self {
            RotationSpec::Euler { roll, pitch, yaw } => {
                let tilt = SphereRotation::from_roll_pitch_yaw(roll, pitch, yaw);
                tilt.then(&SphereRotation::about_x(PI))
            }
            RotationSpec::Matrix { matrix } => matrix,
        }
    }

    /// Reads a `{"roll": .., "pitch": .., "yaw": ..}` (or `{"matrix": ..}`)
    /// sidecar.
    pub fn load_sidecar(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::json(path, e))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CaptureMeta {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub date: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trellis: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageRecord {
    pub id: String,
    /// Path of the image the annotations refer to, relative to the manifest.
    pub source: String,
    #[serde(default)]
    pub rotation: RotationSpec,
    pub projection: ProjectionParams,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub unit_area: Option<UnitArea>,
    #[serde(default)]
    pub annotations: Vec<Annotation>,
    pub split: Split,
    #[serde(default)]
    pub capture: CaptureMeta,
}

impl ImageRecord {
    pub fn count(&self) -> usize {
        self.annotations.len()
    }

    /// Structural problems with this record alone.
    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.id.is_empty() {
            out.push("empty id".to_string());
        }
        if let Err(e) = self.projection.validate() {
            out.push(e.to_string());
        }
        let (w, h) = (self.projection.width as f64, self.projection.height as f64);
        for (i, a) in self.annotations.iter().enumerate() {
            if let Err(e) = a.validate() {
                out.push(format!("annotation {i}: {e}"));
                continue;
            }
            let [u0, v0, u1, v1] = a.bbox;
            if u0 < -0.5 || v0 < -0.5 || u1 > w - 0.5 || v1 > h - 0.5 {
                out.push(format!(
                    "annotation {i}: bbox [{u0}, {v0}, {u1}, {v1}] outside {w}x{h} image"
                ));
            }
        }
        if let Some(area) = &self.unit_area {
            if let Err(e) = area.validate() {
                out.push(e.to_string());
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordCount {
    pub id: String,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestStats {
    pub counts: Vec<RecordCount>,
    pub mean_count: f64,
}

impl ManifestStats {
    pub fn of(records: &[ImageRecord]) -> Self {
        let counts: Vec<_> = records
            .iter()
            .map(|r| RecordCount {
                id: r.id.clone(),
                count: r.count(),
            })
            .collect();
        let mean_count = if counts.is_empty() {
            0.0
        } else {
            counts.iter().map(|c| c.count as f64).sum::<f64>() / counts.len() as f64
        };
        Self { counts, mean_count }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema_version: u32,
    pub records: Vec<ImageRecord>,
    pub stats: ManifestStats,
}

impl Manifest {
    /// Builds a manifest with freshly computed stats.
    pub fn new(records: Vec<ImageRecord>) -> Self {
        let stats = ManifestStats::of(&records);
        Self {
            schema_version: SCHEMA_VERSION,
            records,
            stats,
        }
    }

    pub fn record(&self, id: &str) -> Option<&ImageRecord> {
        self.records.iter().find(|r| r.id == id)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("manifest is always serialisable");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self> {
        parse_manifest(text, Path::new("<memory>"))
    }
}

/// Atomically replaces `path` with `bytes` (write to a sibling temp file, then
/// rename).
pub fn write_atomic(path: impl AsRef<Path>, bytes: &[u8]) -> Result<()> {
    let path = path.as_ref();
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(format!(".tmp{}", std::process::id()));
    let tmp = std::path::PathBuf::from(tmp);
    std::fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

pub fn save_manifest(manifest: &Manifest, path: impl AsRef<Path>) -> Result<()> {
    write_atomic(path, manifest.to_json().as_bytes())
}

pub fn load_manifest(path: impl AsRef<Path>) -> Result<Manifest> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_manifest(&text, path)
}

fn parse_manifest(text: &str, path: &Path) -> Result<Manifest> {
    let value: serde_json::Value = serde_json::from_str(text).map_err(|e| Error::json(path, e))?;
    let found = value
        .get("schema_version")
        .and_then(|v| v.as_u64())
        .unwrap_or(0) as u32;
    if found != SCHEMA_VERSION {
        return Err(Error::SchemaVersionMismatch {
            found,
            expected: SCHEMA_VERSION,
        });
    }
    let raw_records = value
        .get("records")
        .and_then(|r| r.as_array())
        .cloned()
        .unwrap_or_default();
    let mut records = Vec::with_capacity(raw_records.len());
    for (i, raw) in raw_records.into_iter().enumerate() {
        let id = raw
            .get("id")
            .and_then(|v| v.as_str())
            .map(str::to_string)
            .unwrap_or_else(|| format!("#{i}"));
        let rec: ImageRecord =
            serde_json::from_value(raw).map_err(|e| Error::MalformedRecord {
                id: id.clone(),
                reason: e.to_string(),
            })?;
        for (j, a) in rec.annotations.iter().enumerate() {
            a.validate().map_err(|e| Error::MalformedRecord {
                id: id.clone(),
                reason: format!("annotation {j}: {e}"),
            })?;
        }
        records.push(rec);
    }
    let stats = match value.get("stats") {
        Some(s) => serde_json::from_value(s.clone()).map_err(|e| Error::json(path, e))?,
        None => ManifestStats::of(&records),
    };
    Ok(Manifest {
        schema_version: found,
        records,
        stats,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationIssue {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub record: Option<String>,
    pub problem: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub records: usize,
    pub issues: Vec<ValidationIssue>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.issues.is_empty()
    }
}

/// Reports every invariant violation without touching the manifest.
pub fn validate_manifest(manifest: &Manifest) -> ValidationReport {
    let mut issues = Vec::new();
    let mut push = |record: Option<&str>, problem: String| {
        issues.push(ValidationIssue {
            record: record.map(str::to_string),
            problem,
        })
    };
    if manifest.schema_version != SCHEMA_VERSION {
        push(
            None,
            format!("schema version {} != {SCHEMA_VERSION}", manifest.schema_version),
        );
    }
    let mut seen = HashSet::new();
    for r in &manifest.records {
        if !seen.insert(r.id.as_str()) {
            push(Some(&r.id), "duplicate id".into());
        }
        for p in r.problems() {
            push(Some(&r.id), p);
        }
    }
    let expected = ManifestStats::of(&manifest.records);
    if expected.counts != manifest.stats.counts {
        push(None, "per-image counts in stats do not match records".into());
    }
    if (expected.mean_count - manifest.stats.mean_count).abs() > 1e-9 {
        push(
            None,
            format!(
                "stats mean {} but records give {}",
                manifest.stats.mean_count, expected.mean_count
            ),
        );
    }
    ValidationReport {
        records: manifest.records.len(),
        issues,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SplitResult {
    pub train: Manifest,
    pub test: Manifest,
    pub warnings: Vec<String>,
}

/// Partitions by trellis: records whose trellis is in `train_groups` form the
/// training set, the rest the test set. Split tags are rewritten.
pub fn split_by_group(manifest: &Manifest, train_groups: &[String]) -> Result<SplitResult> {
    let missing: Vec<String> = manifest
        .records
        .iter()
        .filter(|r| r.capture.trellis.is_none())
        .map(|r| r.id.clone())
        .collect();
    if !missing.is_empty() {
        return Err(Error::MissingGroupKey(missing));
    }
    let groups: BTreeSet<&str> = manifest
        .records
        .iter()
        .filter_map(|r| r.capture.trellis.as_deref())
        .collect();
    let unknown: Vec<String> = train_groups
        .iter()
        .filter(|g| !groups.contains(g.as_str()))
        .cloned()
        .collect();
    if !unknown.is_empty() {
        return Err(Error::UnknownGroup(unknown));
    }
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for r in &manifest.records {
        let mut r = r.clone();
        if train_groups.iter().any(|g| Some(g.as_str()) == r.capture.trellis.as_deref()) {
            r.split = Split::Train;
            train.push(r);
        } else {
            r.split = Split::Test;
            test.push(r);
        }
    }
    let mut warnings = Vec::new();
    for (name, set) in [("train", &train), ("test", &test)] {
        if set.is_empty() {
            let w = format!("{name} split is empty ({} group(s) in manifest)", groups.len());
            log::warn!("{w}");
            warnings.push(w);
        }
    }
    Ok(SplitResult {
        train: Manifest::new(train),
        test: Manifest::new(test),
        warnings,
    })
}
