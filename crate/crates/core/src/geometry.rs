//! Camera and floor geometry.
//!
//! The camera looks straight down at the floor. Detections arrive in pixel
//! space (origin top-left, `v` pointing down), are corrected for barrel
//! distortion with a single-coefficient division model, mapped affinely onto
//! the floor rectangle, and assigned to a cell of the zone grid. Sphere height
//! comes from the pinhole relation between apparent and physical diameter.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::tracking::TrackedSphere;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("invalid detection: {0}")]
    InvalidDetection(String),
    #[error("invalid calibration: `{field}` {reason}")]
    InvalidCalibration { field: &'static str, reason: String },
}

/// Intrinsics of the overhead camera plus the floor it sees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CalibrationProfile {
    pub image_width: f64,
    pub image_height: f64,
    /// Pinhole focal length in pixels.
    pub focal_length: f64,
    /// Division-model coefficient, normalized by the half image width.
    pub k1: f64,
    /// Meters between the camera and the floor.
    pub camera_height: f64,
    pub floor_width: f64,
    pub floor_length: f64,
}

impl Default for CalibrationProfile {
    /// Rehearsal defaults: a 1920x1080 frame, f = 1000 px, no distortion, and
    /// an 18 m x 42 m hall with the camera 9 m up.
    fn default() -> Self {
        Self {
            image_width: 1920.0,
            image_height: 1080.0,
            focal_length: 1000.0,
            k1: 0.0,
            camera_height: 9.0,
            floor_width: 18.0,
            floor_length: 42.0,
        }
    }
}

impl CalibrationProfile {
    pub fn validate(&self) -> Result<(), GeometryError> {
        let positive = [
            ("image_width", self.image_width),
            ("image_height", self.image_height),
            ("focal_length", self.focal_length),
            ("camera_height", self.camera_height),
            ("floor_width", self.floor_width),
            ("floor_length", self.floor_length),
        ];
        for (field, value) in positive {
            if !(value.is_finite() && value > 0.0) {
                return Err(GeometryError::InvalidCalibration {
                    field,
                    reason: format!("must be a positive finite number, got {value}"),
                });
            }
        }
        if !(self.k1.is_finite() && self.k1 >= 0.0) {
            return Err(GeometryError::InvalidCalibration {
                field: "k1",
                reason: format!("must be >= 0 (barrel distortion only), got {}", self.k1),
            });
        }
        Ok(())
    }

    pub fn center(&self) -> PixelPoint {
        PixelPoint::new(self.image_width / 2.0, self.image_height / 2.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PixelPoint {
    pub u: f64,
    pub v: f64,
}

impl PixelPoint {
    pub const fn new(u: f64, v: f64) -> Self {
        Self { u, v }
    }
}

/// Floor-plane coordinates in meters. `x` runs across the floor width, `y`
/// along its length. Points may fall outside the floor rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WorldPoint {
    pub x: f64,
    pub y: f64,
}

impl WorldPoint {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &WorldPoint) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ZoneIndex(pub u32);

impl std::fmt::Display for ZoneIndex {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        self.0.fmt(f)
    }
}

/// Axis-aligned floor rectangle `[x0, x1) x [y0, y1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZoneRect {
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZoneGrid {
    pub cols: u32,
    pub rows: u32,
    pub floor_width: f64,
    pub floor_length: f64,
}

impl Default for ZoneGrid {
    fn default() -> Self {
        Self::for_floor(3, 3, &CalibrationProfile::default())
    }
}

impl ZoneGrid {
    pub fn for_floor(cols: u32, rows: u32, cal: &CalibrationProfile) -> Self {
        Self {
            cols,
            rows,
            floor_width: cal.floor_width,
            floor_length: cal.floor_length,
        }
    }

    pub fn zone_count(&self) -> usize {
        (self.cols * self.rows) as usize
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        if self.cols == 0 {
            return Err(GeometryError::InvalidCalibration {
                field: "cols",
                reason: "must be >= 1".into(),
            });
        }
        if self.rows == 0 {
            return Err(GeometryError::InvalidCalibration {
                field: "rows",
                reason: "must be >= 1".into(),
            });
        }
        if !(self.floor_width > 0.0 && self.floor_length > 0.0) {
            return Err(GeometryError::InvalidCalibration {
                field: "floor_width",
                reason: "floor dimensions must be positive".into(),
            });
        }
        Ok(())
    }

    fn col_edge(&self, col: u32) -> f64 {
        self.floor_width * f64::from(col) / f64::from(self.cols)
    }

    fn row_edge(&self, row: u32) -> f64 {
        self.floor_length * f64::from(row) / f64::from(self.rows)
    }

    pub fn rect(&self, zone: ZoneIndex) -> ZoneRect {
        let col = zone.0 % self.cols;
        let row = zone.0 / self.cols;
        ZoneRect {
            x0: self.col_edge(col),
            x1: self.col_edge(col + 1),
            y0: self.row_edge(row),
            y1: self.row_edge(row + 1),
        }
    }

    /// Distance from `w` to the nearest side of `zone` that borders another
    /// cell. Sides on the floor's outer wall do not count, so a sphere hugging
    /// the wall still registers in its cell. Returns `f64::INFINITY` for a
    /// single-cell grid.
    pub fn interior_depth(&self, w: WorldPoint, zone: ZoneIndex) -> f64 {
        let w = self.clamp(w);
        let col = zone.0 % self.cols;
        let row = zone.0 / self.cols;
        let r = self.rect(zone);
        let mut depth = f64::INFINITY;
        if col > 0 {
            depth = depth.min(w.x - r.x0);
        }
        if col + 1 < self.cols {
            depth = depth.min(r.x1 - w.x);
        }
        if row > 0 {
            depth = depth.min(w.y - r.y0);
        }
        if row + 1 < self.rows {
            depth = depth.min(r.y1 - w.y);
        }
        depth
    }

    /// Clamp onto the closed floor rectangle.
    pub fn clamp(&self, w: WorldPoint) -> WorldPoint {
        WorldPoint::new(
            w.x.clamp(0.0, self.floor_width),
            w.y.clamp(0.0, self.floor_length),
        )
    }
}

/// Division-model undistortion about the image center.
///
/// `r²` is the squared offset from the center normalized by the squared half
/// width; the corrected point is `c + d / (1 + k1·r²)`.
pub fn undistort(p: PixelPoint, cal: &CalibrationProfile) -> PixelPoint {
    if cal.k1 == 0.0 {
        return p;
    }
    let c = cal.center();
    let (du, dv) = (p.u - c.u, p.v - c.v);
    let half_w = cal.image_width / 2.0;
    let r2 = (du * du + dv * dv) / (half_w * half_w);
    let s = 1.0 + cal.k1 * r2;
    PixelPoint::new(c.u + du / s, c.v + dv / s)
}

/// Inverse of [`undistort`]: the raw (distorted) pixel that corrects to `q`.
///
/// Returns `None` when `q` lies beyond the largest radius the division model
/// can produce for this `k1`.
pub fn distort(q: PixelPoint, cal: &CalibrationProfile) -> Option<PixelPoint> {
    if cal.k1 == 0.0 {
        return Some(q);
    }
    let c = cal.center();
    let (eu, ev) = (q.u - c.u, q.v - c.v);
    let half_w = cal.image_width / 2.0;
    // With d = s·e, s solves k1·|e|²/h²·s² − s + 1 = 0; take the root that
    // tends to 1 as the offset shrinks.
    let a = cal.k1 * (eu * eu + ev * ev) / (half_w * half_w);
    let disc = 1.0 - 4.0 * a;
    if disc < 0.0 {
        return None;
    }
    let s = 2.0 / (1.0 + disc.sqrt());
    Some(PixelPoint::new(c.u + eu * s, c.v + ev * s))
}

pub fn pixel_to_world(p: PixelPoint, cal: &CalibrationProfile) -> WorldPoint {
    WorldPoint::new(
        p.u / cal.image_width * cal.floor_width,
        p.v / cal.image_height * cal.floor_length,
    )
}

pub fn world_to_pixel(w: WorldPoint, cal: &CalibrationProfile) -> PixelPoint {
    PixelPoint::new(
        w.x / cal.floor_width * cal.image_width,
        w.y / cal.floor_length * cal.image_height,
    )
}

/// Height of the sphere center above the floor from its apparent diameter.
///
/// The pinhole model puts the sphere `f·D/d_px` meters below the camera; the
/// result is clamped so the sphere neither sinks into the floor nor pokes
/// through the camera plane.
pub fn estimate_height(
    d_px: f64,
    physical_diameter: f64,
    cal: &CalibrationProfile,
) -> Result<f64, GeometryError> {
    if !(d_px.is_finite() && d_px > 0.0) {
        return Err(GeometryError::InvalidDetection(format!(
            "apparent diameter must be positive, got {d_px}"
        )));
    }
    if !(physical_diameter.is_finite() && physical_diameter > 0.0) {
        return Err(GeometryError::InvalidDetection(format!(
            "physical diameter must be positive, got {physical_diameter}"
        )));
    }
    let radius = physical_diameter / 2.0;
    let (lo, hi) = (radius, cal.camera_height - radius);
    if lo > hi {
        return Err(GeometryError::InvalidDetection(format!(
            "a {physical_diameter} m sphere does not fit under a {} m camera",
            cal.camera_height
        )));
    }
    let depth = cal.focal_length * physical_diameter / d_px;
    Ok((cal.camera_height - depth).clamp(lo, hi))
}

/// Apparent diameter of a sphere whose center sits `height` meters above the
/// floor. Inverse of [`estimate_height`] inside the clamp range.
pub fn apparent_diameter(height: f64, physical_diameter: f64, cal: &CalibrationProfile) -> f64 {
    cal.focal_length * physical_diameter / (cal.camera_height - height)
}

/// Cell index of `w`, row-major from the origin corner. Points off the floor
/// are clamped onto it; cells are half-open with the last row and column
/// closed.
pub fn zone_of(w: WorldPoint, grid: &ZoneGrid) -> ZoneIndex {
    let w = grid.clamp(w);
    let col = cell_index(w.x, grid.cols, |i| grid.col_edge(i));
    let row = cell_index(w.y, grid.rows, |i| grid.row_edge(i));
    ZoneIndex(row * grid.cols + col)
}

// floor() of the scaled coordinate, nudged so it always agrees with the
// edge positions used by `ZoneGrid::rect`.
fn cell_index(value: f64, cells: u32, edge: impl Fn(u32) -> f64) -> u32 {
    let span = edge(cells);
    let mut i = ((value / span * f64::from(cells)).floor().max(0.0) as u32).min(cells - 1);
    while i > 0 && value < edge(i) {
        i -= 1;
    }
    while i + 1 < cells && value >= edge(i + 1) {
        i += 1;
    }
    i
}

/// Gap between two sphere surfaces measured in the floor plane; negative when
/// they overlap.
pub fn surface_distance(a: &TrackedSphere, b: &TrackedSphere) -> f64 {
    a.world.distance(&b.world) - (a.physical_diameter + b.physical_diameter) / 2.0
}
