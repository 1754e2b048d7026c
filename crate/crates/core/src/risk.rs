//! Scoring: severity, vulnerability, exposure, pairwise risk, aggregation,
//! tiers, and alerting for a single frame.
//!
//! The pairwise risk of fire `i` to object `j` is the product
//! `H_i * V(c_j) * C_j * E(d_ij)`:
//!
//! * `H_i = logistic(alpha_s * s_i + alpha_a * area_i / frame_area)`
//! * `C_j = logistic(beta_s * s_j)`
//! * `E(d) = exp(-d / lambda)`, or `exp(-max(d - delta_d, 0) / lambda)` in
//!   worst-case mode.
//!
//! With non-negative weights both logistic terms sit in `[0.5, 1)`.

use std::cmp::Ordering;

use thiserror::Error;

use crate::geometry::{self, GeometryError, ProximityMetric};
use crate::model::{
    Aggregation, AlertEvent, CalibrationScale, ContextObject, FireInstance, FrameRecord,
    PairAssessment, RiskParams, RiskReport, RiskTier, VulnerabilityTable,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RiskError {
    #[error("pair index out of range: fire {fire_index} of {fires}, object {object_index} of {objects}")]
    IndexOutOfRange {
        fire_index: usize,
        object_index: usize,
        fires: usize,
        objects: usize,
    },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// Standard logistic `1 / (1 + e^-x)`.
pub fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn severity(
    fire: &FireInstance,
    frame: &FrameRecord,
    params: &RiskParams,
) -> Result<f64, GeometryError> {
    let area = geometry::normalized_area(fire.area_px(), frame)?;
    Ok(logistic(params.alpha_s * fire.confidence + params.alpha_a * area))
}

pub fn confidence_factor(obj: &ContextObject, params: &RiskParams) -> f64 {
    logistic(params.beta_s * obj.confidence)
}

pub fn vulnerability(class_label: &str, table: &VulnerabilityTable) -> f64 {
    table.weight(class_label)
}

pub fn exposure(d_m: f64, params: &RiskParams) -> f64 {
    (-d_m / params.lambda_m).exp()
}

/// Exposure at the near edge of the distance uncertainty band.
pub fn exposure_worst_case(d_m: f64, params: &RiskParams) -> f64 {
    (-(d_m - params.delta_d_m).max(0.0) / params.lambda_m).exp()
}

pub fn pair_risk(severity: f64, vulnerability: f64, confidence_factor: f64, exposure: f64) -> f64 {
    severity * vulnerability * confidence_factor * exposure
}

/// Centroid-metric pairwise risk.
pub fn pairwise_risk(
    fire_index: usize,
    object_index: usize,
    frame: &FrameRecord,
    scale: CalibrationScale,
    params: &RiskParams,
) -> Result<PairAssessment, RiskError> {
    pairwise_risk_with(
        fire_index,
        object_index,
        frame,
        scale,
        params,
        ProximityMetric::Centroid,
    )
}

pub fn pairwise_risk_with(
    fire_index: usize,
    object_index: usize,
    frame: &FrameRecord,
    scale: CalibrationScale,
    params: &RiskParams,
    metric: ProximityMetric,
) -> Result<PairAssessment, RiskError> {
    let (fire, obj) = match (frame.fires.get(fire_index), frame.objects.get(object_index)) {
        (Some(f), Some(o)) => (f, o),
        _ => {
            return Err(RiskError::IndexOutOfRange {
                fire_index,
                object_index,
                fires: frame.fires.len(),
                objects: frame.objects.len(),
            })
        }
    };
    let severity = severity(fire, frame, params)?;
    Ok(assess_pair(
        fire_index, fire, severity, object_index, obj, scale, params, metric,
    ))
}

#[allow(clippy::too_many_arguments)]
fn assess_pair(
    fire_index: usize,
    fire: &FireInstance,
    severity: f64,
    object_index: usize,
    obj: &ContextObject,
    scale: CalibrationScale,
    params: &RiskParams,
    metric: ProximityMetric,
) -> PairAssessment {
    let distance_px = geometry::box_distance(&fire.bbox, &obj.bbox, metric);
    let distance_m = geometry::to_meters(distance_px, scale);
    let vulnerability = vulnerability(&obj.class_label, &params.vulnerability);
    let confidence_factor = confidence_factor(obj, params);
    let exposure = if params.use_worst_case_exposure {
        exposure_worst_case(distance_m, params)
    } else {
        exposure(distance_m, params)
    };
    PairAssessment {
        fire_index,
        object_index,
        distance_px,
        distance_m,
        severity,
        vulnerability,
        confidence_factor,
        exposure,
        risk: pair_risk(severity, vulnerability, confidence_factor, exposure),
    }
}

/// Worst threat to one object over all fires; zero when there are none.
pub fn object_risk<'a>(pairs: impl IntoIterator<Item = &'a PairAssessment>) -> f64 {
    pairs.into_iter().map(|p| p.risk).fold(0.0, f64::max)
}

pub fn frame_risk_max(object_risks: &[f64]) -> f64 {
    object_risks.iter().copied().fold(0.0, f64::max)
}

/// Noisy-or accumulation `1 - prod(1 - r)`.
pub fn frame_risk_bounded_sum(object_risks: &[f64]) -> f64 {
    let survival: f64 = object_risks.iter().map(|r| 1.0 - r).product();
    // Rounding can push a single-element result a hair below the max.
    (1.0 - survival).max(frame_risk_max(object_risks))
}

pub fn frame_risk(object_risks: &[f64], params: &RiskParams) -> f64 {
    match params.aggregation {
        Aggregation::WorstCaseMax => frame_risk_max(object_risks),
        Aggregation::BoundedSum => frame_risk_bounded_sum(object_risks),
    }
}

/// Lower bounds are inclusive; 1.0 maps to `Critical`.
pub fn tier(r: f64, params: &RiskParams) -> RiskTier {
    if r >= params.tau3 {
        RiskTier::Critical
    } else if r >= params.tau2 {
        RiskTier::High
    } else if r >= params.tau1 {
        RiskTier::Medium
    } else {
        RiskTier::Low
    }
}

pub fn alert_predicate(pair: &PairAssessment, params: &RiskParams) -> bool {
    pair.distance_m <= params.d_crit_m && pair.risk >= params.rho_crit
}

/// Descending risk, then ascending `(fire_index, object_index)`.
pub(crate) fn alert_order(a: &AlertEvent, b: &AlertEvent) -> Ordering {
    b.risk
        .partial_cmp(&a.risk)
        .unwrap_or(Ordering::Equal)
        .then(a.fire_index.cmp(&b.fire_index))
        .then(a.object_index.cmp(&b.object_index))
}

/// One alert per pair inside the safety radius with enough risk.
pub fn evaluate_alerts(
    frame: &FrameRecord,
    pairs: &[PairAssessment],
    params: &RiskParams,
) -> Vec<AlertEvent> {
    let mut alerts: Vec<AlertEvent> = pairs
        .iter()
        .filter(|p| alert_predicate(p, params))
        .map(|p| AlertEvent {
            frame_id: frame.frame_id,
            fire_index: p.fire_index,
            object_index: p.object_index,
            class_label: frame
                .objects
                .get(p.object_index)
                .map(|o| o.class_label.clone())
                .unwrap_or_default(),
            distance_m: p.distance_m,
            risk: p.risk,
            tier: tier(p.risk, params),
            smoothed: false,
        })
        .collect();
    alerts.sort_by(alert_order);
    alerts
}

pub fn assess_frame(
    frame: &FrameRecord,
    scale: CalibrationScale,
    params: &RiskParams,
) -> Result<RiskReport, RiskError> {
    assess_frame_with(frame, scale, params, ProximityMetric::Centroid)
}

pub fn assess_frame_with(
    frame: &FrameRecord,
    scale: CalibrationScale,
    params: &RiskParams,
    metric: ProximityMetric,
) -> Result<RiskReport, RiskError> {
    let n_objects = frame.objects.len();
    let mut pairs = Vec::with_capacity(frame.fires.len() * n_objects);
    for (i, fire) in frame.fires.iter().enumerate() {
        let h = severity(fire, frame, params)?;
        for (j, obj) in frame.objects.iter().enumerate() {
            pairs.push(assess_pair(i, fire, h, j, obj, scale, params, metric));
        }
    }

    let mut object_risks = vec![0.0_f64; n_objects];
    for p in &pairs {
        let slot = &mut object_risks[p.object_index];
        *slot = slot.max(p.risk);
    }

    let frame_risk_max = frame_risk_max(&object_risks);
    let frame_risk_accumulated = frame_risk_bounded_sum(&object_risks);
    let selected = match params.aggregation {
        Aggregation::WorstCaseMax => frame_risk_max,
        Aggregation::BoundedSum => frame_risk_accumulated,
    };
    let alerts = evaluate_alerts(frame, &pairs, params);

    Ok(RiskReport {
        frame_id: frame.frame_id,
        pairs,
        object_risks,
        frame_risk_max,
        frame_risk_accumulated,
        tier: tier(selected, params),
        alerts,
        kappa_used: scale.kappa(),
    })
}
