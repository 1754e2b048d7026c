//! Wire formats, configuration, overlays, streaming, and the CLI.

pub mod cli;
pub mod config;
pub mod overlay;
pub mod stream;
pub mod wire;

pub use config::{ConfigError, EngineConfig, OverlayStyle};
pub use overlay::{render_overlay, OverlayError};
pub use wire::{
    emit_alert_line, emit_frame_line, emit_report_line, emit_step_line, parse_alert_line,
    parse_frame_line, parse_report_line, ReportLine, WireError,
};
