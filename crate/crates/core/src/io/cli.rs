//! Command-line front end. Exit codes: 0 success, 1 input error, 2 config error.

use std::ffi::OsString;
use std::fs::{self, File};
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::net::TcpListener;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

use super::config::EngineConfig;
use super::overlay::{overlay_file_name, render_overlay};
use super::stream::{self, shared_sink, FrameSession};
use super::wire;
use crate::geometry::derive_scale;
use crate::model::{CalibrationScale, ScaleSource};
use crate::synth::{self, ScenarioFile};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;

#[derive(Debug, Error)]
enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    Config(String),
}

impl CliError {
    fn code(&self) -> i32 {
        match self {
            CliError::Input(_) => EXIT_INPUT,
            CliError::Config(_) => EXIT_CONFIG,
        }
    }
}

fn input_err(context: impl std::fmt::Display) -> impl FnOnce(io::Error) -> CliError {
    move |e| CliError::Input(format!("{context}: {e}"))
}

#[derive(Parser)]
#[command(name = "fireprox", version, about = "Proximity-aware fire hazard risk scoring")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Score a JSONL file of frames and write one report line per frame.
    Assess(AssessArgs),
    /// Score frames from stdin or a TCP socket as they arrive.
    Stream(StreamArgs),
    /// Derive pixels-per-meter from a reference object.
    Calibrate(CalibrateArgs),
    /// Re-render SVG overlays from stored frames and reports.
    Render(RenderArgs),
    /// Generate a synthetic frame corpus.
    Synth(SynthArgs),
}

#[derive(Args)]
struct AssessArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    output: String,
    /// Directory for per-frame SVG overlays.
    #[arg(long)]
    overlays: Option<PathBuf>,
    /// Fallback scale in px/m, used when neither frame nor config has one.
    #[arg(long)]
    kappa: Option<f64>,
    /// File for stream-level (smoothed) alerts.
    #[arg(long)]
    alerts: Option<PathBuf>,
}

#[derive(Args)]
struct StreamArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long, conflicts_with = "stdin", required_unless_present = "stdin")]
    listen: Option<String>,
    #[arg(long)]
    stdin: bool,
    /// Report destination: a path, or `stdout`/`-`.
    #[arg(long, default_value = "stdout")]
    output: String,
    #[arg(long)]
    alerts: Option<PathBuf>,
    #[arg(long)]
    kappa: Option<f64>,
}

#[derive(Args)]
struct CalibrateArgs {
    #[arg(long = "ref-px", allow_negative_numbers = true)]
    ref_px: f64,
    #[arg(long = "ref-m", allow_negative_numbers = true)]
    ref_m: f64,
}

#[derive(Args)]
struct RenderArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    report: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    spec: PathBuf,
    #[arg(long)]
    out: String,
}

/// Parses `argv` (including the program name) and runs the command.
pub fn run_cli<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    let result = match cli.command {
        Command::Assess(a) => assess(a),
        Command::Stream(a) => stream_cmd(a),
        Command::Calibrate(a) => calibrate(a),
        Command::Render(a) => render(a),
        Command::Synth(a) => synth_cmd(a),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.code()
        }
    }
}

fn load_config(path: &Path) -> Result<EngineConfig, CliError> {
    EngineConfig::from_path(path).map_err(|e| CliError::Config(e.to_string()))
}

fn command_line_scale(kappa: Option<f64>) -> Result<Option<CalibrationScale>, CliError> {
    kappa
        .map(|k| {
            CalibrationScale::new(k, ScaleSource::Manual)
                .map_err(|e| CliError::Config(format!("--kappa: {e}")))
        })
        .transpose()
}

fn is_stdout(target: &str) -> bool {
    target == "-" || target == "stdout"
}

fn open_output(target: &str) -> Result<Box<dyn Write + Send>, CliError> {
    if is_stdout(target) {
        Ok(Box::new(io::stdout()))
    } else {
        let f = File::create(target).map_err(input_err(target))?;
        Ok(Box::new(BufWriter::new(f)))
    }
}

fn create_file(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(input_err(path.display()))
}

/// Runs every line of `reader` through one stream session.
fn run_lines(
    reader: impl BufRead,
    config: &EngineConfig,
    command_line: Option<CalibrationScale>,
    out: &mut dyn Write,
    mut alerts: Option<&mut dyn Write>,
    overlays: Option<&Path>,
) -> Result<(), CliError> {
    let mut session = FrameSession::new(config, command_line);
    for (i, text) in reader.lines().enumerate() {
        let text = text.map_err(input_err(format!("line {}", i + 1)))?;
        let (frame, step) = match session.feed(&text) {
            Ok(Some(x)) => x,
            Ok(None) => continue,
            Err(e) if e.is_config() => return Err(CliError::Config(e.to_string())),
            Err(e) => return Err(CliError::Input(e.to_string())),
        };
        let write_err = |e: io::Error| CliError::Input(format!("writing output: {e}"));
        stream::write_step(out, alerts.as_deref_mut(), &step).map_err(write_err)?;
        out.flush().map_err(write_err)?;
        if let Some(dir) = overlays {
            let svg = render_overlay(&frame, &step.report, config.overlay_style)
                .map_err(|e| CliError::Input(e.to_string()))?;
            let path = dir.join(overlay_file_name(frame.frame_id));
            fs::write(&path, svg).map_err(input_err(path.display()))?;
        }
    }
    if let Some(a) = alerts {
        a.flush().map_err(input_err("alerts"))?;
    }
    Ok(())
}

fn assess(args: AssessArgs) -> Result<(), CliError> {
    let config = load_config(&args.config)?;
    let cli_scale = command_line_scale(args.kappa)?;
    let input = File::open(&args.input).map_err(input_err(args.input.display()))?;
    if let Some(dir) = &args.overlays {
        fs::create_dir_all(dir).map_err(input_err(dir.display()))?;
    }
    let mut out = open_output(&args.output)?;
    let mut alerts = args.alerts.as_deref().map(create_file).transpose()?;
    run_lines(
        BufReader::new(input),
        &config,
        cli_scale,
        &mut out,
        alerts.as_mut().map(|a| a as &mut dyn Write),
        args.overlays.as_deref(),
    )
}

fn stream_cmd(args: StreamArgs) -> Result<(), CliError> {
    let config = load_config(&args.config)?;
    let cli_scale = command_line_scale(args.kappa)?;
    match &args.listen {
        None => {
            let mut out = open_output(&args.output)?;
            let mut alerts = args.alerts.as_deref().map(create_file).transpose()?;
            let stdin = io::stdin();
            run_lines(
                stdin.lock(),
                &config,
                cli_scale,
                &mut out,
                alerts.as_mut().map(|a| a as &mut dyn Write),
                None,
            )
        }
        Some(addr) => {
            let listener = TcpListener::bind(addr)
                .map_err(|e| CliError::Config(format!("cannot listen on {addr}: {e}")))?;
            let local = listener.local_addr().map_err(input_err(addr))?;
            eprintln!("listening on {local}");
            let mirror = if is_stdout(&args.output) {
                None
            } else {
                Some(shared_sink(create_file(Path::new(&args.output))?))
            };
            let alerts = args
                .alerts
                .as_deref()
                .map(create_file)
                .transpose()?
                .map(shared_sink);
            stream::serve(listener, Arc::new(config), cli_scale, mirror, alerts)
                .map_err(input_err("socket"))
        }
    }
}

fn calibrate(args: CalibrateArgs) -> Result<(), CliError> {
    let scale = derive_scale(args.ref_px, args.ref_m).map_err(|e| CliError::Input(e.to_string()))?;
    println!("kappa={} px/m", wire::format_real(scale.kappa()));
    Ok(())
}

fn read_nonblank_lines(path: &Path) -> Result<Vec<(usize, String)>, CliError> {
    let text = fs::read_to_string(path).map_err(input_err(path.display()))?;
    Ok(text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| (i + 1, l.to_string()))
        .collect())
}

fn render(args: RenderArgs) -> Result<(), CliError> {
    let config = load_config(&args.config)?;
    let frames = read_nonblank_lines(&args.input)?;
    let reports = read_nonblank_lines(&args.report)?;
    if frames.len() != reports.len() {
        return Err(CliError::Input(format!(
            "{} frames but {} reports",
            frames.len(),
            reports.len()
        )));
    }
    fs::create_dir_all(&args.out).map_err(input_err(args.out.display()))?;
    for ((fl, ftext), (rl, rtext)) in frames.iter().zip(&reports) {
        let frame = wire::parse_frame_line(ftext)
            .map_err(|e| CliError::Input(format!("{} line {fl}: {e}", args.input.display())))?;
        let report = wire::parse_report_line(rtext)
            .map_err(|e| CliError::Input(format!("{} line {rl}: {e}", args.report.display())))?
            .report;
        let svg = render_overlay(&frame, &report, config.overlay_style)
            .map_err(|e| CliError::Input(format!("report line {rl}: {e}")))?;
        let path = args.out.join(overlay_file_name(frame.frame_id));
        fs::write(&path, svg).map_err(input_err(path.display()))?;
    }
    Ok(())
}

fn synth_cmd(args: SynthArgs) -> Result<(), CliError> {
    let text = fs::read_to_string(&args.spec).map_err(input_err(args.spec.display()))?;
    let file: ScenarioFile = serde_json::from_str(&text)
        .map_err(|e| CliError::Input(format!("{}: {e}", args.spec.display())))?;
    let frames = synth::generate(&file.into_spec()).map_err(|e| CliError::Input(e.to_string()))?;
    let mut out = open_output(&args.out)?;
    let write_err = input_err("writing frames");
    let mut buf = String::new();
    for f in &frames {
        buf.push_str(&wire::emit_frame_line(f));
        buf.push('\n');
    }
    out.write_all(buf.as_bytes())
        .and_then(|()| out.flush())
        .map_err(write_err)
}
