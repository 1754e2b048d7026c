//! Line-oriented frame processing shared by batch files, stdin, and sockets.

use std::io::{self, BufRead, BufReader, Write};
use std::net::{TcpListener, TcpStream};
use std::sync::{Arc, Mutex};
use std::thread;

use thiserror::Error;

use super::config::EngineConfig;
use super::wire::{self, WireError};
use crate::geometry::GeometryError;
use crate::model::{CalibrationScale, FrameRecord};
use crate::risk::RiskError;
use crate::temporal::{StreamProcessor, StreamStep, TemporalError};

/// Shared, thread-safe line sink.
pub type SharedSink = Arc<Mutex<Box<dyn Write + Send>>>;

pub fn shared_sink(w: impl Write + Send + 'static) -> SharedSink {
    Arc::new(Mutex::new(Box::new(w)))
}

#[derive(Debug, Error)]
pub enum LineError {
    #[error("line {line}: {source}")]
    Wire { line: usize, source: WireError },
    #[error("line {line}: {source}")]
    Assess { line: usize, source: TemporalError },
}

impl LineError {
    /// True when the failure stems from missing configuration rather than bad input.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            LineError::Assess {
                source: TemporalError::Risk(RiskError::Geometry(
                    GeometryError::ScaleUnresolved { .. }
                )),
                ..
            }
        )
    }
}

/// One stream's worth of state: a processor plus a line counter.
pub struct FrameSession {
    processor: StreamProcessor,
    line: usize,
}

impl FrameSession {
    /// `command_line` is only consulted when neither the frame nor the config carries a scale.
    pub fn new(config: &EngineConfig, command_line: Option<CalibrationScale>) -> Self {
        let fallback = config.scale().or(command_line);
        let processor = StreamProcessor::new(config.params.clone(), fallback)
            .with_metric(config.proximity_metric)
            .with_debounce(config.debounce_frames);
        Self { processor, line: 0 }
    }

    /// Feeds one input line. Blank lines are skipped and yield `None`.
    pub fn feed(&mut self, text: &str) -> Result<Option<(FrameRecord, StreamStep)>, LineError> {
        self.line += 1;
        let line = self.line;
        if text.trim().is_empty() {
            return Ok(None);
        }
        let frame = wire::parse_frame_line(text).map_err(|source| LineError::Wire { line, source })?;
        let step = self
            .processor
            .push(&frame)
            .map_err(|source| LineError::Assess { line, source })?;
        Ok(Some((frame, step)))
    }
}

/// Writes the report line for a step, and its stream alerts to `alerts` if given.
pub fn write_step<A: Write + ?Sized>(
    out: &mut dyn Write,
    alerts: Option<&mut A>,
    step: &StreamStep,
) -> io::Result<()> {
    writeln!(out, "{}", wire::emit_step_line(step))?;
    if let Some(a) = alerts {
        for alert in &step.stream_alerts {
            writeln!(a, "{}", wire::emit_alert_line(alert))?;
        }
    }
    Ok(())
}

fn error_line(err: &LineError) -> String {
    let (line, message) = match err {
        LineError::Wire { line, source } => (*line, source.to_string()),
        LineError::Assess { line, source } => (*line, source.to_string()),
    };
    serde_json::json!({ "line": line, "error": message }).to_string()
}

/// Serves one socket client: a frame per line in, a report (or an error
/// object) per line out. Each connection is an independent stream.
pub fn handle_connection<R: BufRead, W: Write>(
    reader: R,
    mut writer: W,
    config: &EngineConfig,
    command_line: Option<CalibrationScale>,
    mirror: Option<&SharedSink>,
    alerts: Option<&SharedSink>,
) -> io::Result<()> {
    let mut session = FrameSession::new(config, command_line);
    for text in reader.lines() {
        let text = text?;
        match session.feed(&text) {
            Ok(None) => continue,
            Ok(Some((_, step))) => {
                let line = wire::emit_step_line(&step);
                writeln!(writer, "{line}")?;
                if let Some(m) = mirror {
                    let mut m = m.lock().unwrap_or_else(|e| e.into_inner());
                    writeln!(m, "{line}")?;
                    m.flush()?;
                }
                if let Some(a) = alerts {
                    let mut a = a.lock().unwrap_or_else(|e| e.into_inner());
                    for alert in &step.stream_alerts {
                        writeln!(a, "{}", wire::emit_alert_line(alert))?;
                    }
                    a.flush()?;
                }
            }
            Err(e) => writeln!(writer, "{}", error_line(&e))?,
        }
        writer.flush()?;
    }
    Ok(())
}

/// Accepts clients forever, one thread per connection.
pub fn serve(
    listener: TcpListener,
    config: Arc<EngineConfig>,
    command_line: Option<CalibrationScale>,
    mirror: Option<SharedSink>,
    alerts: Option<SharedSink>,
) -> io::Result<()> {
    for conn in listener.incoming() {
        let conn = conn?;
        let config = Arc::clone(&config);
        let mirror = mirror.clone();
        let alerts = alerts.clone();
        thread::spawn(move || {
            let peer = conn.peer_addr().ok();
            if let Err(e) = serve_one(conn, &config, command_line, mirror.as_ref(), alerts.as_ref()) {
                eprintln!("connection {peer:?}: {e}");
            }
        });
    }
    Ok(())
}

fn serve_one(
    conn: TcpStream,
    config: &EngineConfig,
    command_line: Option<CalibrationScale>,
    mirror: Option<&SharedSink>,
    alerts: Option<&SharedSink>,
) -> io::Result<()> {
    let reader = BufReader::new(conn.try_clone()?);
    handle_connection(reader, conn, config, command_line, mirror, alerts)
}
