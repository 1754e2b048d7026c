//! Synthetic scenes with known geometry, plus a from-scratch reference
//! implementation of the risk model used as a test oracle.
//!
//! `reference_assess` deliberately shares no scoring code with
//! [`crate::risk`]; it only reuses the domain types.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::GeometryError;
use crate::model::{
    Aggregation, AlertEvent, BBox, CalibrationScale, ContextObject, FireInstance, FrameRecord,
    PairAssessment, RiskParams, RiskReport, RiskTier, ScaleSource, VulnerabilityTable,
};
use crate::risk::RiskError;

/// Class drawn alongside the default table's keys to exercise the fallback weight.
pub const UNLISTED_CLASS: &str = "fire hydrant";

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SynthError {
    #[error("{track} has {got} samples, expected {expected}")]
    SpecLengthMismatch {
        track: String,
        expected: usize,
        got: usize,
    },
    #[error("scenario kappa must be positive and finite, got {0}")]
    InvalidKappa(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FireSample {
    pub bbox: [f64; 4],
    pub confidence: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mask_area_px: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectSample {
    pub bbox: [f64; 4],
    pub class: String,
    pub confidence: f64,
}

/// Per-frame trajectories for every fire and object in a scene.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub width_px: u32,
    pub height_px: u32,
    /// Written to each frame as its scale override when present.
    #[serde(default)]
    pub kappa: Option<f64>,
    pub frame_count: usize,
    #[serde(default)]
    pub rng_seed: u64,
    /// Uniform positional noise applied to every box, drawn from `rng_seed`.
    #[serde(default)]
    pub jitter_px: f64,
    #[serde(default)]
    pub fires: Vec<Vec<FireSample>>,
    #[serde(default)]
    pub objects: Vec<Vec<ObjectSample>>,
}

/// Parameters for a randomly drawn scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomScenario {
    pub width_px: u32,
    pub height_px: u32,
    #[serde(default)]
    pub kappa: Option<f64>,
    pub frame_count: usize,
    pub rng_seed: u64,
    #[serde(default = "default_max_fires")]
    pub max_fires: usize,
    #[serde(default = "default_max_objects")]
    pub max_objects: usize,
}

fn default_max_fires() -> usize {
    5
}

fn default_max_objects() -> usize {
    8
}

/// Contents of a `synth --spec` file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ScenarioFile {
    Random { random: RandomScenario },
    Explicit(ScenarioSpec),
}

impl ScenarioFile {
    pub fn into_spec(self) -> ScenarioSpec {
        match self {
            ScenarioFile::Random { random } => ScenarioSpec::random(&random),
            ScenarioFile::Explicit(spec) => spec,
        }
    }
}

fn bbox(b: [f64; 4]) -> BBox {
    BBox::new(b[0], b[1], b[2], b[3])
}

impl ScenarioSpec {
    /// A single fire with one object moving toward it along a straight line
    /// at `step_px` pixels per frame. The object stops once it reaches the fire.
    pub fn linear_approach(
        width_px: u32,
        height_px: u32,
        kappa: f64,
        fire: FireSample,
        object: ObjectSample,
        step_px: f64,
        frame_count: usize,
    ) -> Self {
        let fc = [fire.bbox[0] + fire.bbox[2] / 2.0, fire.bbox[1] + fire.bbox[3] / 2.0];
        let oc = [
            object.bbox[0] + object.bbox[2] / 2.0,
            object.bbox[1] + object.bbox[3] / 2.0,
        ];
        let (dx, dy) = (fc[0] - oc[0], fc[1] - oc[1]);
        let dist = dx.hypot(dy);
        let track = (0..frame_count)
            .map(|t| {
                let travelled = (t as f64 * step_px).min(dist);
                let (ux, uy) = if dist > 0.0 { (dx / dist, dy / dist) } else { (0.0, 0.0) };
                let mut b = object.bbox;
                b[0] += ux * travelled;
                b[1] += uy * travelled;
                ObjectSample { bbox: b, ..object.clone() }
            })
            .collect();
        Self {
            width_px,
            height_px,
            kappa: Some(kappa),
            frame_count,
            rng_seed: 0,
            jitter_px: 0.0,
            fires: vec![vec![fire; frame_count]],
            objects: vec![track],
        }
    }

    /// Random boxes drifting at constant velocity with fixed confidences.
    pub fn random(cfg: &RandomScenario) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
        let (w, h) = (f64::from(cfg.width_px), f64::from(cfg.height_px));
        let n_fires = rng.gen_range(0..=cfg.max_fires);
        let n_objects = rng.gen_range(0..=cfg.max_objects);
        let tracks = |rng: &mut ChaCha8Rng| {
            let b = random_bbox(rng, w, h);
            let v = [rng.gen_range(-8.0..8.0), rng.gen_range(-8.0..8.0)];
            (0..cfg.frame_count)
                .map(|t| [b[0] + v[0] * t as f64, b[1] + v[1] * t as f64, b[2], b[3]])
                .collect::<Vec<_>>()
        };
        let fires = (0..n_fires)
            .map(|_| {
                let path = tracks(&mut rng);
                let confidence = rng.gen_range(0.0..=1.0);
                let with_mask = rng.gen_bool(0.5);
                path.into_iter()
                    .map(|b| FireSample {
                        bbox: b,
                        confidence,
                        mask_area_px: with_mask.then(|| b[2] * b[3] * 0.6),
                    })
                    .collect()
            })
            .collect();
        let objects = (0..n_objects)
            .map(|_| {
                let path = tracks(&mut rng);
                let class = random_class(&mut rng);
                let confidence = rng.gen_range(0.0..=1.0);
                path.into_iter()
                    .map(|b| ObjectSample {
                        bbox: b,
                        class: class.clone(),
                        confidence,
                    })
                    .collect()
            })
            .collect();
        Self {
            width_px: cfg.width_px,
            height_px: cfg.height_px,
            kappa: cfg.kappa,
            frame_count: cfg.frame_count,
            rng_seed: cfg.rng_seed,
            jitter_px: 0.0,
            fires,
            objects,
        }
    }
}

/// Realizes a scenario as an ordered frame sequence with ids `0..frame_count`.
pub fn generate(spec: &ScenarioSpec) -> Result<Vec<FrameRecord>, SynthError> {
    let check = |track: String, got: usize| {
        if got == spec.frame_count {
            Ok(())
        } else {
            Err(SynthError::SpecLengthMismatch {
                track,
                expected: spec.frame_count,
                got,
            })
        }
    };
    for (i, t) in spec.fires.iter().enumerate() {
        check(format!("fires[{i}]"), t.len())?;
    }
    for (j, t) in spec.objects.iter().enumerate() {
        check(format!("objects[{j}]"), t.len())?;
    }
    let scale_override = spec
        .kappa
        .map(|k| CalibrationScale::new(k, ScaleSource::Manual).map_err(|_| SynthError::InvalidKappa(k)))
        .transpose()?;

    let mut rng = ChaCha8Rng::seed_from_u64(spec.rng_seed);
    let jitter = spec.jitter_px.abs();
    let mut jittered = |b: [f64; 4]| {
        let mut b = bbox(b);
        if jitter > 0.0 {
            b.x += rng.gen_range(-jitter..=jitter);
            b.y += rng.gen_range(-jitter..=jitter);
        }
        b
    };

    let mut frames = Vec::with_capacity(spec.frame_count);
    for t in 0..spec.frame_count {
        let fires = spec
            .fires
            .iter()
            .map(|track| {
                let s = &track[t];
                FireInstance {
                    bbox: jittered(s.bbox),
                    confidence: s.confidence,
                    mask_area_px: s.mask_area_px,
                }
            })
            .collect();
        let objects = spec
            .objects
            .iter()
            .map(|track| {
                let s = &track[t];
                ContextObject {
                    bbox: jittered(s.bbox),
                    class_label: s.class.clone(),
                    confidence: s.confidence,
                }
            })
            .collect();
        frames.push(FrameRecord {
            frame_id: t as u64,
            timestamp_ms: None,
            width_px: spec.width_px,
            height_px: spec.height_px,
            fires,
            objects,
            scale_override,
        });
    }
    Ok(frames)
}

fn random_bbox(rng: &mut impl Rng, w: f64, h: f64) -> [f64; 4] {
    let (x0, x1) = ordered(rng.gen_range(0.0..=w), rng.gen_range(0.0..=w));
    let (y0, y1) = ordered(rng.gen_range(0.0..=h), rng.gen_range(0.0..=h));
    [x0, y0, x1 - x0, y1 - y0]
}

fn ordered(a: f64, b: f64) -> (f64, f64) {
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

fn random_class(rng: &mut impl Rng) -> String {
    let table = VulnerabilityTable::default();
    let keys: Vec<&String> = table.entries.keys().collect();
    let k = rng.gen_range(0..=keys.len());
    keys.get(k)
        .map(|s| s.to_string())
        .unwrap_or_else(|| UNLISTED_CLASS.to_string())
}

/// A frame with up to `max_fires` fires and `max_objects` objects, all boxes
/// inside the frame and confidences uniform on `[0, 1]`.
pub fn random_frame(
    rng: &mut impl Rng,
    frame_id: u64,
    width_px: u32,
    height_px: u32,
    max_fires: usize,
    max_objects: usize,
) -> FrameRecord {
    let (w, h) = (f64::from(width_px), f64::from(height_px));
    let n_fires = rng.gen_range(0..=max_fires);
    let n_objects = rng.gen_range(0..=max_objects);
    let fires = (0..n_fires)
        .map(|_| {
            let b = random_bbox(rng, w, h);
            let confidence = rng.gen_range(0.0..=1.0);
            let mask_area_px = rng
                .gen_bool(0.5)
                .then(|| rng.gen_range(0.0..=1.0) * b[2] * b[3]);
            FireInstance {
                bbox: bbox(b),
                confidence,
                mask_area_px,
            }
        })
        .collect();
    let objects = (0..n_objects)
        .map(|_| ContextObject {
            bbox: bbox(random_bbox(rng, w, h)),
            class_label: random_class(rng),
            confidence: rng.gen_range(0.0..=1.0),
        })
        .collect();
    FrameRecord {
        frame_id,
        timestamp_ms: None,
        width_px,
        height_px,
        fires,
        objects,
        scale_override: None,
    }
}

/// Valid parameters drawn from moderate ranges.
pub fn random_params(rng: &mut impl Rng) -> RiskParams {
    let mut taus = [
        rng.gen_range(0.05..0.95),
        rng.gen_range(0.05..0.95),
        rng.gen_range(0.05..0.95),
    ];
    taus.sort_by(f64::total_cmp);
    if !(taus[0] < taus[1] && taus[1] < taus[2]) {
        taus = [0.25, 0.5, 0.75];
    }
    RiskParams {
        alpha_s: rng.gen_range(0.0..6.0),
        alpha_a: rng.gen_range(0.0..10.0),
        beta_s: rng.gen_range(0.0..6.0),
        lambda_m: rng.gen_range(0.5..30.0),
        tau1: taus[0],
        tau2: taus[1],
        tau3: taus[2],
        d_crit_m: rng.gen_range(0.5..20.0),
        rho_crit: rng.gen_range(0.05..=1.0),
        gamma: rng.gen_range(0.05..0.95),
        delta_d_m: if rng.gen_bool(0.5) { rng.gen_range(0.0..5.0) } else { 0.0 },
        vulnerability: VulnerabilityTable::default(),
        aggregation: if rng.gen_bool(0.5) {
            Aggregation::WorstCaseMax
        } else {
            Aggregation::BoundedSum
        },
        use_worst_case_exposure: rng.gen_bool(0.5),
    }
}

// ---------------------------------------------------------------------------
// Reference implementation. Straight transcription of each formula with naive
// loops. Keep it that way.
// ---------------------------------------------------------------------------

fn ref_sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn ref_tier(r: f64, p: &RiskParams) -> RiskTier {
    if r < p.tau1 {
        RiskTier::Low
    } else if r < p.tau2 {
        RiskTier::Medium
    } else if r < p.tau3 {
        RiskTier::High
    } else {
        RiskTier::Critical
    }
}

/// Recomputes a [`RiskReport`] from first principles (centroid metric).
pub fn reference_assess(
    frame: &FrameRecord,
    scale: CalibrationScale,
    params: &RiskParams,
) -> Result<RiskReport, RiskError> {
    let kappa = scale.kappa();
    let frame_area = frame.width_px as f64 * frame.height_px as f64;

    let mut pairs = Vec::new();
    for i in 0..frame.fires.len() {
        let f = &frame.fires[i];
        let area = match f.mask_area_px {
            Some(m) => m,
            None => f.bbox.w * f.bbox.h,
        };
        if area > frame_area {
            return Err(RiskError::Geometry(GeometryError::AreaExceedsFrame {
                area_px: area,
                frame_area_px: frame_area,
            }));
        }
        let h_i = ref_sigmoid(params.alpha_s * f.confidence + params.alpha_a * (area / frame_area));
        let fx = f.bbox.x + 0.5 * f.bbox.w;
        let fy = f.bbox.y + 0.5 * f.bbox.h;

        for j in 0..frame.objects.len() {
            let o = &frame.objects[j];
            let ox = o.bbox.x + 0.5 * o.bbox.w;
            let oy = o.bbox.y + 0.5 * o.bbox.h;
            let d_px = ((fx - ox) * (fx - ox) + (fy - oy) * (fy - oy)).sqrt();
            let d_m = d_px / kappa;
            let v = match params.vulnerability.entries.get(&o.class_label) {
                Some(w) => *w,
                None => params.vulnerability.default_weight,
            };
            let c = ref_sigmoid(params.beta_s * o.confidence);
            let effective = if params.use_worst_case_exposure {
                if d_m - params.delta_d_m > 0.0 {
                    d_m - params.delta_d_m
                } else {
                    0.0
                }
            } else {
                d_m
            };
            let e = (-effective / params.lambda_m).exp();
            pairs.push(PairAssessment {
                fire_index: i,
                object_index: j,
                distance_px: d_px,
                distance_m: d_m,
                severity: h_i,
                vulnerability: v,
                confidence_factor: c,
                exposure: e,
                risk: h_i * v * c * e,
            });
        }
    }

    let mut object_risks = Vec::new();
    for j in 0..frame.objects.len() {
        let mut best = 0.0;
        for p in &pairs {
            if p.object_index == j && p.risk > best {
                best = p.risk;
            }
        }
        object_risks.push(best);
    }

    let mut frame_risk_max = 0.0;
    let mut survival = 1.0;
    for &r in &object_risks {
        if r > frame_risk_max {
            frame_risk_max = r;
        }
        survival *= 1.0 - r;
    }
    let mut frame_risk_accumulated = 1.0 - survival;
    if frame_risk_accumulated < frame_risk_max {
        frame_risk_accumulated = frame_risk_max;
    }
    let selected = match params.aggregation {
        Aggregation::WorstCaseMax => frame_risk_max,
        Aggregation::BoundedSum => frame_risk_accumulated,
    };

    // Insertion sort: higher risk first, then lower (fire, object) index.
    let mut alerts: Vec<AlertEvent> = Vec::new();
    for p in &pairs {
        if !(p.distance_m <= params.d_crit_m && p.risk >= params.rho_crit) {
            continue;
        }
        let ev = AlertEvent {
            frame_id: frame.frame_id,
            fire_index: p.fire_index,
            object_index: p.object_index,
            class_label: frame.objects[p.object_index].class_label.clone(),
            distance_m: p.distance_m,
            risk: p.risk,
            tier: ref_tier(p.risk, params),
            smoothed: false,
        };
        let mut at = alerts.len();
        while at > 0 {
            let prev = &alerts[at - 1];
            let goes_before = ev.risk > prev.risk
                || (ev.risk == prev.risk
                    && (ev.fire_index, ev.object_index) < (prev.fire_index, prev.object_index));
            if !goes_before {
                break;
            }
            at -= 1;
        }
        alerts.insert(at, ev);
    }

    Ok(RiskReport {
        frame_id: frame.frame_id,
        pairs,
        object_risks,
        frame_risk_max,
        frame_risk_accumulated,
        tier: ref_tier(selected, params),
        alerts,
        kappa_used: kappa,
    })
}

/// First difference between two reports beyond `tol`, or `None` if they agree.
pub fn report_discrepancy(a: &RiskReport, b: &RiskReport, tol: f64) -> Option<String> {
    let near = |x: f64, y: f64| (x - y).abs() <= tol;
    if a.frame_id != b.frame_id {
        return Some(format!("frame_id {} vs {}", a.frame_id, b.frame_id));
    }
    if !near(a.kappa_used, b.kappa_used) {
        return Some(format!("kappa_used {} vs {}", a.kappa_used, b.kappa_used));
    }
    if a.pairs.len() != b.pairs.len() {
        return Some(format!("pair count {} vs {}", a.pairs.len(), b.pairs.len()));
    }
    for (p, q) in a.pairs.iter().zip(&b.pairs) {
        if (p.fire_index, p.object_index) != (q.fire_index, q.object_index) {
            return Some(format!("pair order {p:?} vs {q:?}"));
        }
        let fields = [
            ("distance_px", p.distance_px, q.distance_px),
            ("distance_m", p.distance_m, q.distance_m),
            ("severity", p.severity, q.severity),
            ("vulnerability", p.vulnerability, q.vulnerability),
            ("confidence_factor", p.confidence_factor, q.confidence_factor),
            ("exposure", p.exposure, q.exposure),
            ("risk", p.risk, q.risk),
        ];
        for (name, x, y) in fields {
            if !near(x, y) {
                return Some(format!(
                    "pair ({}, {}) {name}: {x} vs {y}",
                    p.fire_index, p.object_index
                ));
            }
        }
    }
    if a.object_risks.len() != b.object_risks.len() {
        return Some("object risk count".into());
    }
    for (j, (x, y)) in a.object_risks.iter().zip(&b.object_risks).enumerate() {
        if !near(*x, *y) {
            return Some(format!("object_risks[{j}]: {x} vs {y}"));
        }
    }
    if !near(a.frame_risk_max, b.frame_risk_max) {
        return Some(format!("frame_risk_max {} vs {}", a.frame_risk_max, b.frame_risk_max));
    }
    if !near(a.frame_risk_accumulated, b.frame_risk_accumulated) {
        return Some(format!(
            "frame_risk_accumulated {} vs {}",
            a.frame_risk_accumulated, b.frame_risk_accumulated
        ));
    }
    if a.tier != b.tier {
        return Some(format!("tier {} vs {}", a.tier, b.tier));
    }
    if a.alerts.len() != b.alerts.len() {
        return Some(format!("alert count {} vs {}", a.alerts.len(), b.alerts.len()));
    }
    for (x, y) in a.alerts.iter().zip(&b.alerts) {
        let same = x.frame_id == y.frame_id
            && x.fire_index == y.fire_index
            && x.object_index == y.object_index
            && x.class_label == y.class_label
            && x.tier == y.tier
            && x.smoothed == y.smoothed
            && near(x.distance_m, y.distance_m)
            && near(x.risk, y.risk);
        if !same {
            return Some(format!("alert {x:?} vs {y:?}"));
        }
    }
    None
}
