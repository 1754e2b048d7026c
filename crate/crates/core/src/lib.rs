//! Proximity-aware fire hazard risk scoring.
//!
//! Takes per-frame fire/smoke detections and surrounding object detections,
//! measures fire-to-object distances in meters, and turns them into pairwise
//! risks, a frame risk, a discrete tier, alerts, and a smoothed alert stream.

pub mod geometry;
pub mod io;
pub mod model;
pub mod risk;
pub mod synth;
pub mod temporal;

pub use geometry::{GeometryError, PointPx, ProximityMetric};
pub use model::{
    validate_frame, Aggregation, AlertEvent, BBox, CalibrationScale, ContextObject, FireInstance,
    FrameRecord, PairAssessment, ParamError, RiskParams, RiskReport, RiskTier, ScaleSource,
    ValidationError, VulnerabilityTable,
};
pub use risk::{assess_frame, RiskError};
pub use temporal::{stream_assess, StreamProcessor, StreamState, StreamStep, TemporalError};
