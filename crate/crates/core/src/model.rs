//! Domain types for the proximity-aware risk model.
//!
//! Every tunable of the model lives in [`RiskParams`]; every per-frame input
//! lives in [`FrameRecord`]; every computed quantity ends up in a
//! [`PairAssessment`] or a [`RiskReport`].

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Axis-aligned box in pixel coordinates, `(x, y)` is the top-left corner.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BBox {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl BBox {
    pub const fn new(x: f64, y: f64, w: f64, h: f64) -> Self {
        Self { x, y, w, h }
    }

    pub fn area(&self) -> f64 {
        self.w * self.h
    }

    /// Builds a box from corner coordinates `(x1, y1, x2, y2)`.
    pub fn from_corners(x1: f64, y1: f64, x2: f64, y2: f64) -> Self {
        Self::new(x1, y1, x2 - x1, y2 - y1)
    }
}

/// One fire/smoke instance from the segmentation model.
#[derive(Debug, Clone, PartialEq)]
pub struct FireInstance {
    pub bbox: BBox,
    pub confidence: f64,
    /// Pixel count of the segmentation mask. Box area is used when absent.
    pub mask_area_px: Option<f64>,
}

impl FireInstance {
    /// Area fed into the severity term.
    pub fn area_px(&self) -> f64 {
        self.mask_area_px.unwrap_or_else(|| self.bbox.area())
    }
}

/// One surrounding entity from the general-purpose detector.
#[derive(Debug, Clone, PartialEq)]
pub struct ContextObject {
    pub bbox: BBox,
    pub class_label: String,
    pub confidence: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScaleSource {
    ReferenceObject,
    Manual,
    ConfigDefault,
}

/// Pixels-per-meter factor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalibrationScale {
    kappa: f64,
    source: ScaleSource,
}

impl CalibrationScale {
    pub fn new(kappa: f64, source: ScaleSource) -> Result<Self, ValidationError> {
        if !kappa.is_finite() || kappa <= 0.0 {
            return Err(ValidationError::InvalidScale { kappa });
        }
        Ok(Self { kappa, source })
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn source(&self) -> ScaleSource {
        self.source
    }
}

/// Fused detector output for a single frame.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameRecord {
    pub frame_id: u64,
    pub timestamp_ms: Option<u64>,
    pub width_px: u32,
    pub height_px: u32,
    pub fires: Vec<FireInstance>,
    pub objects: Vec<ContextObject>,
    pub scale_override: Option<CalibrationScale>,
}

impl FrameRecord {
    /// An empty frame of the given size.
    pub fn empty(frame_id: u64, width_px: u32, height_px: u32) -> Self {
        Self {
            frame_id,
            timestamp_ms: None,
            width_px,
            height_px,
            fires: Vec::new(),
            objects: Vec::new(),
            scale_override: None,
        }
    }

    pub fn area_px(&self) -> f64 {
        f64::from(self.width_px) * f64::from(self.height_px)
    }
}

/// Class-dependent consequence weights. Lookups are case-sensitive.
#[derive(Debug, Clone, PartialEq)]
pub struct VulnerabilityTable {
    pub entries: BTreeMap<String, f64>,
    pub default_weight: f64,
}

impl VulnerabilityTable {
    pub fn new(entries: BTreeMap<String, f64>, default_weight: f64) -> Self {
        Self {
            entries,
            default_weight,
        }
    }

    pub fn weight(&self, class_label: &str) -> f64 {
        self.entries
            .get(class_label)
            .copied()
            .unwrap_or(self.default_weight)
    }
}

impl Default for VulnerabilityTable {
    fn default() -> Self {
        let entries = [
            ("person", 1.0),
            ("bicycle", 0.7),
            ("car", 0.6),
            ("truck", 0.7),
            ("bus", 0.8),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect();
        Self::new(entries, 0.3)
    }
}

/// How object risks are folded into one frame risk.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aggregation {
    /// Single worst threat.
    #[default]
    WorstCaseMax,
    /// Noisy-or accumulation `1 - prod(1 - r)`.
    BoundedSum,
}

/// Every tunable of the risk model.
#[derive(Debug, Clone, PartialEq)]
pub struct RiskParams {
    /// Weight of fire confidence in the severity term.
    pub alpha_s: f64,
    /// Weight of normalized fire area in the severity term.
    pub alpha_a: f64,
    /// Weight of object confidence in the confidence factor.
    pub beta_s: f64,
    /// Exposure decay length in meters.
    pub lambda_m: f64,
    pub tau1: f64,
    pub tau2: f64,
    pub tau3: f64,
    /// Alert safety radius in meters.
    pub d_crit_m: f64,
    /// Minimum pair risk for an alert.
    pub rho_crit: f64,
    /// Smoothing coefficient, weight of the previous smoothed value.
    pub gamma: f64,
    /// Distance uncertainty in meters for the worst-case exposure bound.
    pub delta_d_m: f64,
    pub vulnerability: VulnerabilityTable,
    pub aggregation: Aggregation,
    pub use_worst_case_exposure: bool,
}

impl Default for RiskParams {
    fn default() -> Self {
        Self {
            alpha_s: 2.0,
            alpha_a: 4.0,
            beta_s: 2.0,
            lambda_m: 10.0,
            tau1: 0.25,
            tau2: 0.50,
            tau3: 0.75,
            d_crit_m: 5.0,
            rho_crit: 0.5,
            gamma: 0.6,
            delta_d_m: 0.0,
            vulnerability: VulnerabilityTable::default(),
            aggregation: Aggregation::WorstCaseMax,
            use_worst_case_exposure: false,
        }
    }
}

impl RiskParams {
    /// Checks every range constraint, reporting the first violation.
    pub fn validate(&self) -> Result<(), ParamError> {
        fn check(name: &'static str, value: f64, ok: bool) -> Result<(), ParamError> {
            if value.is_finite() && ok {
                Ok(())
            } else {
                Err(ParamError::OutOfRange { name, value })
            }
        }
        check("alpha_s", self.alpha_s, self.alpha_s >= 0.0)?;
        check("alpha_a", self.alpha_a, self.alpha_a >= 0.0)?;
        check("beta_s", self.beta_s, self.beta_s >= 0.0)?;
        check("lambda_m", self.lambda_m, self.lambda_m > 0.0)?;
        check("tau1", self.tau1, self.tau1 > 0.0 && self.tau1 < 1.0)?;
        check("tau2", self.tau2, self.tau2 > 0.0 && self.tau2 < 1.0)?;
        check("tau3", self.tau3, self.tau3 > 0.0 && self.tau3 < 1.0)?;
        if !(self.tau1 < self.tau2 && self.tau2 < self.tau3) {
            return Err(ParamError::ThresholdOrder {
                tau1: self.tau1,
                tau2: self.tau2,
                tau3: self.tau3,
            });
        }
        check("d_crit_m", self.d_crit_m, self.d_crit_m > 0.0)?;
        check(
            "rho_crit",
            self.rho_crit,
            self.rho_crit > 0.0 && self.rho_crit <= 1.0,
        )?;
        check("gamma", self.gamma, self.gamma > 0.0 && self.gamma < 1.0)?;
        check("delta_d_m", self.delta_d_m, self.delta_d_m >= 0.0)?;
        let table = &self.vulnerability;
        check(
            "vulnerability.default_weight",
            table.default_weight,
            (0.0..=1.0).contains(&table.default_weight),
        )?;
        for (label, &w) in &table.entries {
            if !(w.is_finite() && (0.0..=1.0).contains(&w)) {
                return Err(ParamError::VulnerabilityWeight {
                    label: label.clone(),
                    value: w,
                });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParamError {
    #[error("parameter `{name}` out of range: {value}")]
    OutOfRange { name: &'static str, value: f64 },
    #[error("tier thresholds must satisfy 0 < tau1 < tau2 < tau3 < 1, got {tau1}, {tau2}, {tau3}")]
    ThresholdOrder { tau1: f64, tau2: f64, tau3: f64 },
    #[error("vulnerability weight for `{label}` must be in [0, 1], got {value}")]
    VulnerabilityWeight { label: String, value: f64 },
}

/// Discrete risk tier, ordered `Low < Medium < High < Critical`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum RiskTier {
    Low,
    Medium,
    High,
    Critical,
}

impl fmt::Display for RiskTier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            RiskTier::Low => "Low",
            RiskTier::Medium => "Medium",
            RiskTier::High => "High",
            RiskTier::Critical => "Critical",
        };
        f.write_str(s)
    }
}

/// Risk of one fire instance to one context object, with every factor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairAssessment {
    pub fire_index: usize,
    pub object_index: usize,
    pub distance_px: f64,
    pub distance_m: f64,
    pub severity: f64,
    pub vulnerability: f64,
    pub confidence_factor: f64,
    pub exposure: f64,
    pub risk: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlertEvent {
    pub frame_id: u64,
    pub fire_index: usize,
    pub object_index: usize,
    pub class_label: String,
    pub distance_m: f64,
    pub risk: f64,
    pub tier: RiskTier,
    /// True when issued from the smoothed stream rather than a single frame.
    pub smoothed: bool,
}

/// Per-frame output of the risk model.
#[derive(Debug, Clone, PartialEq)]
pub struct RiskReport {
    pub frame_id: u64,
    /// Row-major over fires, then objects.
    pub pairs: Vec<PairAssessment>,
    pub object_risks: Vec<f64>,
    pub frame_risk_max: f64,
    pub frame_risk_accumulated: f64,
    pub tier: RiskTier,
    pub alerts: Vec<AlertEvent>,
    pub kappa_used: f64,
}

impl RiskReport {
    /// Frame risk under the given aggregation rule.
    pub fn frame_risk(&self, aggregation: Aggregation) -> f64 {
        match aggregation {
            Aggregation::WorstCaseMax => self.frame_risk_max,
            Aggregation::BoundedSum => self.frame_risk_accumulated,
        }
    }

    /// The pair with the highest risk; the first one wins ties.
    pub fn driving_pair(&self) -> Option<&PairAssessment> {
        self.pairs.iter().fold(None, |best, p| match best {
            Some(b) if b.risk >= p.risk => Some(b),
            _ => Some(p),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ValidationError {
    #[error("non-finite value in `{field}`")]
    NonFiniteField { field: String },
    #[error("`{field}` = {value} is outside [0, 1]")]
    ConfidenceOutOfRange { field: String, value: f64 },
    #[error("`{field}` = {value} is negative")]
    NegativeDimension { field: String, value: f64 },
    #[error("frame area is zero ({width_px}x{height_px})")]
    ZeroFrameArea { width_px: u32, height_px: u32 },
    #[error("`{field}` = {value} exceeds the frame area {frame_area}")]
    MaskAreaExceedsFrame {
        field: String,
        value: f64,
        frame_area: f64,
    },
    #[error("`{field}` is empty")]
    EmptyClassLabel { field: String },
    #[error("scale must be positive and finite, got {kappa}")]
    InvalidScale { kappa: f64 },
}

fn check_finite(field: impl FnOnce() -> String, v: f64) -> Result<(), ValidationError> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(ValidationError::NonFiniteField { field: field() })
    }
}

fn check_bbox(prefix: &str, b: &BBox) -> Result<(), ValidationError> {
    for (name, v) in [("x", b.x), ("y", b.y), ("w", b.w), ("h", b.h)] {
        check_finite(|| format!("{prefix}.bbox.{name}"), v)?;
    }
    for (name, v) in [("w", b.w), ("h", b.h)] {
        if v < 0.0 {
            return Err(ValidationError::NegativeDimension {
                field: format!("{prefix}.bbox.{name}"),
                value: v,
            });
        }
    }
    Ok(())
}

fn check_confidence(field: String, v: f64) -> Result<(), ValidationError> {
    check_finite(|| field.clone(), v)?;
    if !(0.0..=1.0).contains(&v) {
        return Err(ValidationError::ConfidenceOutOfRange { field, value: v });
    }
    Ok(())
}

/// Checks every invariant of an untrusted frame and hands it back unchanged.
pub fn validate_frame(record: FrameRecord) -> Result<FrameRecord, ValidationError> {
    if record.width_px == 0 || record.height_px == 0 {
        return Err(ValidationError::ZeroFrameArea {
            width_px: record.width_px,
            height_px: record.height_px,
        });
    }
    let frame_area = record.area_px();
    if let Some(scale) = &record.scale_override {
        CalibrationScale::new(scale.kappa(), scale.source())?;
    }
    for (i, fire) in record.fires.iter().enumerate() {
        let prefix = format!("fires[{i}]");
        check_bbox(&prefix, &fire.bbox)?;
        check_confidence(format!("{prefix}.confidence"), fire.confidence)?;
        if let Some(mask) = fire.mask_area_px {
            let field = || format!("{prefix}.mask_area_px");
            check_finite(field, mask)?;
            if mask < 0.0 {
                return Err(ValidationError::NegativeDimension {
                    field: field(),
                    value: mask,
                });
            }
            if mask > frame_area {
                return Err(ValidationError::MaskAreaExceedsFrame {
                    field: field(),
                    value: mask,
                    frame_area,
                });
            }
        }
    }
    for (j, obj) in record.objects.iter().enumerate() {
        let prefix = format!("objects[{j}]");
        check_bbox(&prefix, &obj.bbox)?;
        check_confidence(format!("{prefix}.confidence"), obj.confidence)?;
        if obj.class_label.is_empty() {
            return Err(ValidationError::EmptyClassLabel {
                field: format!("{prefix}.class"),
            });
        }
    }
    Ok(record)
}
