//! Exponential smoothing of frame risk and alerting on the smoothed signal.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::geometry::{self, GeometryError, ProximityMetric};
use crate::model::{AlertEvent, CalibrationScale, FrameRecord, RiskParams, RiskReport, RiskTier};
use crate::risk::{self, RiskError};

/// Default number of frames an emitted stream alert stays suppressed.
pub const DEFAULT_DEBOUNCE_FRAMES: u32 = 5;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TemporalError {
    #[error("frame risk {0} is outside [0, 1]")]
    RiskOutOfRange(f64),
    #[error("frame {frame_id} does not follow frame {previous}")]
    OutOfOrderFrame { frame_id: u64, previous: u64 },
    #[error(transparent)]
    Risk(#[from] RiskError),
}

impl From<GeometryError> for TemporalError {
    fn from(e: GeometryError) -> Self {
        TemporalError::Risk(RiskError::Geometry(e))
    }
}

/// Smoothed risk plus per-pair debounce counters for one stream.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct StreamState {
    pub smoothed_risk: f64,
    pub last_frame_id: Option<u64>,
    pub frames_seen: u64,
    /// Remaining suppressed frames per `(fire_index, object_index)`.
    pub debounce: BTreeMap<(usize, usize), u32>,
}

impl StreamState {
    pub fn new() -> Self {
        Self::default()
    }

    /// Longest remaining suppression window across all pairs.
    pub fn debounce_remaining(&self) -> u32 {
        self.debounce.values().copied().max().unwrap_or(0)
    }
}

/// One step of `s_t = gamma * s_{t-1} + (1 - gamma) * r_t`.
///
/// The first frame seeds the filter with its own risk.
pub fn smooth_update(
    state: &StreamState,
    frame_risk: f64,
    params: &RiskParams,
) -> Result<StreamState, TemporalError> {
    if !(0.0..=1.0).contains(&frame_risk) {
        return Err(TemporalError::RiskOutOfRange(frame_risk));
    }
    let smoothed_risk = if state.frames_seen == 0 {
        frame_risk
    } else {
        params.gamma * state.smoothed_risk + (1.0 - params.gamma) * frame_risk
    };
    Ok(StreamState {
        smoothed_risk,
        frames_seen: state.frames_seen + 1,
        ..state.clone()
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct StreamStep {
    pub report: RiskReport,
    pub smoothed_risk: f64,
    pub smoothed_tier: RiskTier,
    pub stream_alerts: Vec<AlertEvent>,
}

/// Sequential per-stream assessor. Owns the smoothing and debounce state.
#[derive(Debug, Clone)]
pub struct StreamProcessor {
    params: RiskParams,
    fallback_scale: Option<CalibrationScale>,
    metric: ProximityMetric,
    debounce_frames: u32,
    state: StreamState,
}

impl StreamProcessor {
    pub fn new(params: RiskParams, fallback_scale: Option<CalibrationScale>) -> Self {
        Self {
            params,
            fallback_scale,
            metric: ProximityMetric::Centroid,
            debounce_frames: DEFAULT_DEBOUNCE_FRAMES,
            state: StreamState::new(),
        }
    }

    pub fn with_metric(mut self, metric: ProximityMetric) -> Self {
        self.metric = metric;
        self
    }

    pub fn with_debounce(mut self, frames: u32) -> Self {
        self.debounce_frames = frames;
        self
    }

    pub fn state(&self) -> &StreamState {
        &self.state
    }

    pub fn params(&self) -> &RiskParams {
        &self.params
    }

    /// Assesses the next frame. On error the state is left untouched.
    pub fn push(&mut self, frame: &FrameRecord) -> Result<StreamStep, TemporalError> {
        if let Some(previous) = self.state.last_frame_id {
            if frame.frame_id <= previous {
                return Err(TemporalError::OutOfOrderFrame {
                    frame_id: frame.frame_id,
                    previous,
                });
            }
        }
        let scale = geometry::resolve_scale(frame, None, self.fallback_scale)?;
        let report = risk::assess_frame_with(frame, scale, &self.params, self.metric)?;
        let mut next = smooth_update(
            &self.state,
            report.frame_risk(self.params.aggregation),
            &self.params,
        )?;
        next.last_frame_id = Some(frame.frame_id);

        let smoothed_tier = risk::tier(next.smoothed_risk, &self.params);
        let stream_alerts: Vec<AlertEvent> = if smoothed_tier >= RiskTier::High {
            report
                .alerts
                .iter()
                .filter(|a| !next.debounce.contains_key(&(a.fire_index, a.object_index)))
                .map(|a| AlertEvent {
                    tier: smoothed_tier,
                    smoothed: true,
                    ..a.clone()
                })
                .collect()
        } else {
            Vec::new()
        };

        // This frame counts against every open window.
        next.debounce.retain(|_, left| {
            *left -= 1;
            *left > 0
        });
        if self.debounce_frames > 0 {
            for a in &stream_alerts {
                next.debounce
                    .insert((a.fire_index, a.object_index), self.debounce_frames);
            }
        }

        let smoothed_risk = next.smoothed_risk;
        self.state = next;
        Ok(StreamStep {
            report,
            smoothed_risk,
            smoothed_tier,
            stream_alerts,
        })
    }
}

/// Runs a whole ordered sequence through a fresh [`StreamProcessor`].
pub fn stream_assess<'a>(
    frames: impl IntoIterator<Item = &'a FrameRecord>,
    scale: Option<CalibrationScale>,
    params: &RiskParams,
) -> Result<Vec<StreamStep>, TemporalError> {
    let mut proc = StreamProcessor::new(params.clone(), scale);
    frames.into_iter().map(|f| proc.push(f)).collect()
}
