//! Engine configuration, loaded from a single JSON document.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::ProximityMetric;
use crate::model::{
    Aggregation, CalibrationScale, ParamError, RiskParams, ScaleSource, VulnerabilityTable,
};
use crate::temporal::DEFAULT_DEBOUNCE_FRAMES;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("invalid config JSON: {0}")]
    Parse(String),
    #[error("invalid config: {0}")]
    Param(#[from] ParamError),
    #[error("config kappa must be positive and finite, got {0}")]
    Kappa(f64),
}

/// How proximity lines are drawn on overlays.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OverlayStyle {
    /// Straight segment between the two centroids.
    #[default]
    Direct,
    /// Horizontal segment at the fire centroid's height.
    Horizontal,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EngineConfig {
    pub params: RiskParams,
    pub kappa: Option<f64>,
    pub proximity_metric: ProximityMetric,
    pub overlay_style: OverlayStyle,
    pub debounce_frames: u32,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self {
            params: RiskParams::default(),
            kappa: None,
            proximity_metric: ProximityMetric::Centroid,
            overlay_style: OverlayStyle::Direct,
            debounce_frames: DEFAULT_DEBOUNCE_FRAMES,
        }
    }
}

// Every field optional; absent ones keep their defaults.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    alpha_s: Option<f64>,
    alpha_a: Option<f64>,
    beta_s: Option<f64>,
    lambda_m: Option<f64>,
    tau1: Option<f64>,
    tau2: Option<f64>,
    tau3: Option<f64>,
    d_crit_m: Option<f64>,
    rho_crit: Option<f64>,
    gamma: Option<f64>,
    delta_d_m: Option<f64>,
    vulnerability: Option<BTreeMap<String, f64>>,
    default_vulnerability: Option<f64>,
    aggregation: Option<Aggregation>,
    use_worst_case_exposure: Option<bool>,
    kappa: Option<f64>,
    proximity_metric: Option<ProximityMetric>,
    overlay_style: Option<OverlayStyle>,
    debounce_frames: Option<u32>,
}

impl EngineConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let raw: RawConfig =
            serde_json::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        let d = RiskParams::default();
        let vulnerability = VulnerabilityTable::new(
            raw.vulnerability.unwrap_or(d.vulnerability.entries),
            raw.default_vulnerability
                .unwrap_or(d.vulnerability.default_weight),
        );
        let params = RiskParams {
            alpha_s: raw.alpha_s.unwrap_or(d.alpha_s),
            alpha_a: raw.alpha_a.unwrap_or(d.alpha_a),
            beta_s: raw.beta_s.unwrap_or(d.beta_s),
            lambda_m: raw.lambda_m.unwrap_or(d.lambda_m),
            tau1: raw.tau1.unwrap_or(d.tau1),
            tau2: raw.tau2.unwrap_or(d.tau2),
            tau3: raw.tau3.unwrap_or(d.tau3),
            d_crit_m: raw.d_crit_m.unwrap_or(d.d_crit_m),
            rho_crit: raw.rho_crit.unwrap_or(d.rho_crit),
            gamma: raw.gamma.unwrap_or(d.gamma),
            delta_d_m: raw.delta_d_m.unwrap_or(d.delta_d_m),
            vulnerability,
            aggregation: raw.aggregation.unwrap_or(d.aggregation),
            use_worst_case_exposure: raw
                .use_worst_case_exposure
                .unwrap_or(d.use_worst_case_exposure),
        };
        params.validate()?;
        if let Some(k) = raw.kappa {
            if !(k.is_finite() && k > 0.0) {
                return Err(ConfigError::Kappa(k));
            }
        }
        Ok(Self {
            params,
            kappa: raw.kappa,
            proximity_metric: raw.proximity_metric.unwrap_or_default(),
            overlay_style: raw.overlay_style.unwrap_or_default(),
            debounce_frames: raw.debounce_frames.unwrap_or(DEFAULT_DEBOUNCE_FRAMES),
        })
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&text)
    }

    /// The configured scale, if any.
    pub fn scale(&self) -> Option<CalibrationScale> {
        self.kappa
            .and_then(|k| CalibrationScale::new(k, ScaleSource::ConfigDefault).ok())
    }
}
