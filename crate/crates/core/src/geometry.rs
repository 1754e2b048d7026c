//! Centroids, pixel distances, and pixel-to-meter conversion.

use thiserror::Error;

use crate::model::{BBox, CalibrationScale, FrameRecord, ScaleSource};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("reference widths must be positive and finite, got {width_px} px / {width_m} m")]
    NonPositiveReference { width_px: f64, width_m: f64 },
    #[error("area {area_px} px exceeds frame area {frame_area_px} px")]
    AreaExceedsFrame { area_px: f64, frame_area_px: f64 },
    #[error("no pixels-per-meter scale available for frame {frame_id}")]
    ScaleUnresolved { frame_id: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointPx {
    pub x: f64,
    pub y: f64,
}

impl PointPx {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }
}

/// Which point-to-point measure drives proximity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProximityMetric {
    #[default]
    Centroid,
    BboxGap,
}

pub fn centroid(b: &BBox) -> PointPx {
    PointPx::new(b.x + b.w / 2.0, b.y + b.h / 2.0)
}

pub fn pixel_distance(p: PointPx, q: PointPx) -> f64 {
    (p.x - q.x).hypot(p.y - q.y)
}

/// Scale from a reference object of known physical width.
pub fn derive_scale(ref_width_px: f64, ref_width_m: f64) -> Result<CalibrationScale, GeometryError> {
    let ok = |v: f64| v.is_finite() && v > 0.0;
    if !ok(ref_width_px) || !ok(ref_width_m) {
        return Err(GeometryError::NonPositiveReference {
            width_px: ref_width_px,
            width_m: ref_width_m,
        });
    }
    CalibrationScale::new(ref_width_px / ref_width_m, ScaleSource::ReferenceObject).map_err(|_| {
        GeometryError::NonPositiveReference {
            width_px: ref_width_px,
            width_m: ref_width_m,
        }
    })
}

pub fn to_meters(d_px: f64, scale: CalibrationScale) -> f64 {
    d_px / scale.kappa()
}

/// Fraction of the frame covered by `area_px`.
pub fn normalized_area(area_px: f64, frame: &FrameRecord) -> Result<f64, GeometryError> {
    let frame_area_px = frame.area_px();
    if area_px > frame_area_px {
        return Err(GeometryError::AreaExceedsFrame {
            area_px,
            frame_area_px,
        });
    }
    Ok(area_px / frame_area_px)
}

/// Shortest distance between two axis-aligned boxes, zero when they touch or overlap.
pub fn bbox_gap_distance(a: &BBox, b: &BBox) -> f64 {
    let dx = (b.x - (a.x + a.w)).max(a.x - (b.x + b.w)).max(0.0);
    let dy = (b.y - (a.y + a.h)).max(a.y - (b.y + b.h)).max(0.0);
    dx.hypot(dy)
}

/// Pixel distance between two boxes under the chosen metric.
pub fn box_distance(a: &BBox, b: &BBox, metric: ProximityMetric) -> f64 {
    match metric {
        ProximityMetric::Centroid => pixel_distance(centroid(a), centroid(b)),
        ProximityMetric::BboxGap => bbox_gap_distance(a, b),
    }
}

/// Picks the scale for a frame: its own override, then the configured
/// scale, then one derived on the command line.
pub fn resolve_scale(
    frame: &FrameRecord,
    configured: Option<CalibrationScale>,
    command_line: Option<CalibrationScale>,
) -> Result<CalibrationScale, GeometryError> {
    frame
        .scale_override
        .or(configured)
        .or(command_line)
        .ok_or(GeometryError::ScaleUnresolved {
            frame_id: frame.frame_id,
        })
}
