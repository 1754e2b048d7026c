//! JSONL wire format for frames, reports, and alerts.
//!
//! Reals are written with at most 12 significant digits in their shortest
//! round-trip form. Unknown input fields are ignored.

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::model::{
    validate_frame, AlertEvent, BBox, CalibrationScale, ContextObject, FireInstance, FrameRecord,
    PairAssessment, RiskReport, RiskTier, ScaleSource, ValidationError,
};
use crate::temporal::StreamStep;

pub const SIGNIFICANT_DIGITS: usize = 12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum WireError {
    #[error("malformed JSON at byte {offset}: {message}")]
    MalformedJson { offset: usize, message: String },
    #[error("schema violation at `{path}`: {message}")]
    SchemaViolation { path: String, message: String },
    #[error(transparent)]
    Validation(#[from] ValidationError),
}

/// Rounds to [`SIGNIFICANT_DIGITS`] significant digits.
pub fn round_sig(v: f64) -> f64 {
    if v == 0.0 || !v.is_finite() {
        return v;
    }
    format!("{:.*e}", SIGNIFICANT_DIGITS - 1, v)
        .parse()
        .unwrap_or(v)
}

/// Compact decimal rendering of a rounded real, e.g. `320` or `0.0025`.
pub fn format_real(v: f64) -> String {
    format!("{}", round_sig(v))
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Num(f64);

impl Serialize for Num {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(round_sig(self.0))
    }
}

impl<'de> Deserialize<'de> for Num {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        f64::deserialize(d).map(Num)
    }
}

fn nums<const N: usize>(v: [f64; N]) -> [Num; N] {
    v.map(Num)
}

fn bbox_from(b: [Num; 4]) -> BBox {
    BBox::new(b[0].0, b[1].0, b[2].0, b[3].0)
}

fn bbox_to(b: &BBox) -> [Num; 4] {
    nums([b.x, b.y, b.w, b.h])
}

#[derive(Serialize, Deserialize)]
struct WireFire {
    bbox: [Num; 4],
    confidence: Num,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    mask_area_px: Option<Num>,
}

#[derive(Serialize, Deserialize)]
struct WireObject {
    bbox: [Num; 4],
    class: String,
    confidence: Num,
}

#[derive(Serialize, Deserialize)]
struct WireFrame {
    frame_id: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    timestamp_ms: Option<u64>,
    width_px: u32,
    height_px: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    scale_px_per_m: Option<Num>,
    fires: Vec<WireFire>,
    objects: Vec<WireObject>,
}

#[derive(Serialize, Deserialize)]
struct WirePair {
    fire_index: usize,
    object_index: usize,
    distance_px: Num,
    distance_m: Num,
    severity: Num,
    vulnerability: Num,
    confidence_factor: Num,
    exposure: Num,
    risk: Num,
}

#[derive(Serialize, Deserialize)]
struct WireAlert {
    frame_id: u64,
    fire_index: usize,
    object_index: usize,
    class: String,
    distance_m: Num,
    risk: Num,
    tier: RiskTier,
    smoothed: bool,
}

#[derive(Serialize, Deserialize)]
struct WireReport {
    frame_id: u64,
    kappa_used: Num,
    pairs: Vec<WirePair>,
    object_risks: Vec<Num>,
    frame_risk_max: Num,
    frame_risk_accumulated: Num,
    tier: RiskTier,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    smoothed_risk: Option<Num>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    smoothed_tier: Option<RiskTier>,
    alerts: Vec<WireAlert>,
}

fn decode<'a, T: Deserialize<'a>>(line: &'a str) -> Result<T, WireError> {
    let line = line.strip_suffix('\n').unwrap_or(line);
    let line = line.strip_suffix('\r').unwrap_or(line);
    let mut de = serde_json::Deserializer::from_str(line);
    let value = serde_path_to_error::deserialize(&mut de).map_err(|e| {
        let path = e.path().to_string();
        classify(e.into_inner(), Some(path))
    })?;
    de.end().map_err(|e| classify(e, None))?;
    Ok(value)
}

fn classify(e: serde_json::Error, path: Option<String>) -> WireError {
    use serde_json::error::Category;
    match e.classify() {
        Category::Data => WireError::SchemaViolation {
            path: path.unwrap_or_else(|| ".".into()),
            message: strip_position(&e.to_string()),
        },
        _ => WireError::MalformedJson {
            // Single-line input, so the column is the byte position.
            offset: e.column(),
            message: strip_position(&e.to_string()),
        },
    }
}

fn strip_position(msg: &str) -> String {
    match msg.rfind(" at line ") {
        Some(i) => msg[..i].to_string(),
        None => msg.to_string(),
    }
}

fn encode<T: Serialize>(value: &T) -> String {
    serde_json::to_string(value).expect("wire types always serialize")
}

/// Parses and validates one frame line.
pub fn parse_frame_line(line: &str) -> Result<FrameRecord, WireError> {
    let w: WireFrame = decode(line)?;
    let scale_override = match w.scale_px_per_m {
        Some(Num(k)) => Some(CalibrationScale::new(k, ScaleSource::Manual)?),
        None => None,
    };
    let record = FrameRecord {
        frame_id: w.frame_id,
        timestamp_ms: w.timestamp_ms,
        width_px: w.width_px,
        height_px: w.height_px,
        fires: w
            .fires
            .into_iter()
            .map(|f| FireInstance {
                bbox: bbox_from(f.bbox),
                confidence: f.confidence.0,
                mask_area_px: f.mask_area_px.map(|m| m.0),
            })
            .collect(),
        objects: w
            .objects
            .into_iter()
            .map(|o| ContextObject {
                bbox: bbox_from(o.bbox),
                class_label: o.class,
                confidence: o.confidence.0,
            })
            .collect(),
        scale_override,
    };
    Ok(validate_frame(record)?)
}

pub fn emit_frame_line(record: &FrameRecord) -> String {
    encode(&WireFrame {
        frame_id: record.frame_id,
        timestamp_ms: record.timestamp_ms,
        width_px: record.width_px,
        height_px: record.height_px,
        scale_px_per_m: record.scale_override.map(|s| Num(s.kappa())),
        fires: record
            .fires
            .iter()
            .map(|f| WireFire {
                bbox: bbox_to(&f.bbox),
                confidence: Num(f.confidence),
                mask_area_px: f.mask_area_px.map(Num),
            })
            .collect(),
        objects: record
            .objects
            .iter()
            .map(|o| WireObject {
                bbox: bbox_to(&o.bbox),
                class: o.class_label.clone(),
                confidence: Num(o.confidence),
            })
            .collect(),
    })
}

fn wire_alert(a: &AlertEvent) -> WireAlert {
    WireAlert {
        frame_id: a.frame_id,
        fire_index: a.fire_index,
        object_index: a.object_index,
        class: a.class_label.clone(),
        distance_m: Num(a.distance_m),
        risk: Num(a.risk),
        tier: a.tier,
        smoothed: a.smoothed,
    }
}

fn alert_from(a: WireAlert) -> AlertEvent {
    AlertEvent {
        frame_id: a.frame_id,
        fire_index: a.fire_index,
        object_index: a.object_index,
        class_label: a.class,
        distance_m: a.distance_m.0,
        risk: a.risk.0,
        tier: a.tier,
        smoothed: a.smoothed,
    }
}

fn wire_report(r: &RiskReport, smoothed: Option<(f64, RiskTier)>) -> WireReport {
    WireReport {
        frame_id: r.frame_id,
        kappa_used: Num(r.kappa_used),
        pairs: r
            .pairs
            .iter()
            .map(|p| WirePair {
                fire_index: p.fire_index,
                object_index: p.object_index,
                distance_px: Num(p.distance_px),
                distance_m: Num(p.distance_m),
                severity: Num(p.severity),
                vulnerability: Num(p.vulnerability),
                confidence_factor: Num(p.confidence_factor),
                exposure: Num(p.exposure),
                risk: Num(p.risk),
            })
            .collect(),
        object_risks: r.object_risks.iter().copied().map(Num).collect(),
        frame_risk_max: Num(r.frame_risk_max),
        frame_risk_accumulated: Num(r.frame_risk_accumulated),
        tier: r.tier,
        smoothed_risk: smoothed.map(|(v, _)| Num(v)),
        smoothed_tier: smoothed.map(|(_, t)| t),
        alerts: r.alerts.iter().map(wire_alert).collect(),
    }
}

/// A parsed report line, with the smoothed fields when the producer had them.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportLine {
    pub report: RiskReport,
    pub smoothed_risk: Option<f64>,
    pub smoothed_tier: Option<RiskTier>,
}

pub fn emit_report_line(report: &RiskReport) -> String {
    encode(&wire_report(report, None))
}

/// Report line carrying the smoothed risk and tier of a stream step.
pub fn emit_step_line(step: &StreamStep) -> String {
    encode(&wire_report(
        &step.report,
        Some((step.smoothed_risk, step.smoothed_tier)),
    ))
}

pub fn parse_report_line(line: &str) -> Result<ReportLine, WireError> {
    let w: WireReport = decode(line)?;
    let report = RiskReport {
        frame_id: w.frame_id,
        pairs: w
            .pairs
            .into_iter()
            .map(|p| PairAssessment {
                fire_index: p.fire_index,
                object_index: p.object_index,
                distance_px: p.distance_px.0,
                distance_m: p.distance_m.0,
                severity: p.severity.0,
                vulnerability: p.vulnerability.0,
                confidence_factor: p.confidence_factor.0,
                exposure: p.exposure.0,
                risk: p.risk.0,
            })
            .collect(),
        object_risks: w.object_risks.into_iter().map(|n| n.0).collect(),
        frame_risk_max: w.frame_risk_max.0,
        frame_risk_accumulated: w.frame_risk_accumulated.0,
        tier: w.tier,
        alerts: w.alerts.into_iter().map(alert_from).collect(),
        kappa_used: w.kappa_used.0,
    };
    Ok(ReportLine {
        report,
        smoothed_risk: w.smoothed_risk.map(|n| n.0),
        smoothed_tier: w.smoothed_tier,
    })
}

pub fn emit_alert_line(alert: &AlertEvent) -> String {
    encode(&wire_alert(alert))
}

pub fn parse_alert_line(line: &str) -> Result<AlertEvent, WireError> {
    decode::<WireAlert>(line).map(alert_from)
}
