use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::net::{TcpListener, TcpStream};
use std::path::{Path, PathBuf};
use std::process::{Child, Command, Output, Stdio};
use std::sync::Arc;
use std::thread;

use fireprox::io::stream::{self, shared_sink};
use fireprox::io::{parse_report_line, EngineConfig};

const FRAME_NEAR: &str = r#"{"frame_id":1,"width_px":1280,"height_px":720,"fires":[{"bbox":[200,300,200,200],"confidence":0.95,"mask_area_px":460800}],"objects":[{"bbox":[520,350,60,100],"class":"person","confidence":0.98}]}"#;
const FRAME_EMPTY: &str = r#"{"frame_id":2,"width_px":1280,"height_px":720,"fires":[],"objects":[]}"#;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_fireprox"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn run_stdin(args: &[&str], input: &str) -> Output {
    let mut child = bin()
        .args(args)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    child.stdin.take().unwrap().write_all(input.as_bytes()).unwrap();
    child.wait_with_output().unwrap()
}

struct Workspace {
    dir: tempfile::TempDir,
}

impl Workspace {
    fn new() -> Self {
        Self {
            dir: tempfile::tempdir().unwrap(),
        }
    }

    fn file(&self, name: &str, body: &str) -> String {
        let p = self.dir.path().join(name);
        fs::write(&p, body).unwrap();
        p.to_str().unwrap().to_string()
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn assess_writes_reports_and_overlays() {
    let ws = Workspace::new();
    let config = ws.file("c.json", r#"{"kappa": 50}"#);
    let input = ws.file("f.jsonl", &format!("{FRAME_NEAR}\n\n{FRAME_EMPTY}\n"));
    let out = ws.path("r.jsonl");
    let overlays = ws.path("svg");
    let o = run(&["assess", "--config", &config, "--input", &input, "--output", s(&out), "--overlays", s(&overlays)]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));

    let text = fs::read_to_string(&out).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 2);
    let first = parse_report_line(lines[0]).unwrap();
    assert_eq!(first.report.alerts.len(), 1);
    assert_eq!(first.report.pairs[0].distance_m, 5.0);
    assert_eq!(first.report.kappa_used, 50.0);

    let svg = fs::read_to_string(overlays.join("overlay_1.svg")).unwrap();
    assert!(svg.contains(">5.00 m</text>"));
    assert!(overlays.join("overlay_2.svg").exists());
}

#[test]
fn render_reproduces_assess_overlays() {
    let ws = Workspace::new();
    let config = ws.file("c.json", r#"{"kappa": 50, "overlay_style": "horizontal"}"#);
    let input = ws.file("f.jsonl", &format!("{FRAME_NEAR}\n{FRAME_EMPTY}\n"));
    let reports = ws.path("r.jsonl");
    let live = ws.path("live");
    let again = ws.path("again");
    let o = run(&["assess", "--config", &config, "--input", &input, "--output", s(&reports), "--overlays", s(&live)]);
    assert_eq!(o.status.code(), Some(0));
    let o = run(&["render", "--config", &config, "--input", &input, "--report", s(&reports), "--out", s(&again)]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    for id in [1, 2] {
        let name = format!("overlay_{id}.svg");
        assert_eq!(fs::read(live.join(&name)).unwrap(), fs::read(again.join(&name)).unwrap());
    }
}

#[test]
fn render_rejects_mismatched_inputs() {
    let ws = Workspace::new();
    let config = ws.file("c.json", "{}");
    let input = ws.file("f.jsonl", &format!("{FRAME_NEAR}\n{FRAME_EMPTY}\n"));
    let reports = ws.file("r.jsonl", "");
    let o = run(&["render", "--config", &config, "--input", &input, "--report", &reports, "--out", s(&ws.path("o"))]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn stdin_stream_matches_batch() {
    let ws = Workspace::new();
    let config = ws.file("c.json", "{}");
    let body = format!("{FRAME_NEAR}\n{FRAME_EMPTY}\n");
    let input = ws.file("f.jsonl", &body);
    let out = ws.path("r.jsonl");
    let batch = run(&["assess", "--config", &config, "--input", &input, "--output", s(&out), "--kappa", "50"]);
    assert_eq!(batch.status.code(), Some(0));
    let live = run_stdin(&["stream", "--config", &config, "--stdin", "--kappa", "50"], &body);
    assert_eq!(live.status.code(), Some(0));
    assert_eq!(fs::read(&out).unwrap(), live.stdout);
}

#[test]
fn config_kappa_beats_command_line() {
    let ws = Workspace::new();
    let config = ws.file("c.json", r#"{"kappa": 25}"#);
    let o = run_stdin(&["stream", "--config", &config, "--stdin", "--kappa", "50"], FRAME_NEAR);
    let r = parse_report_line(String::from_utf8_lossy(&o.stdout).trim()).unwrap();
    assert_eq!(r.report.kappa_used, 25.0);
    assert_eq!(r.report.pairs[0].distance_m, 10.0);
}

#[test]
fn missing_scale_is_a_config_error() {
    let ws = Workspace::new();
    let config = ws.file("c.json", "{}");
    let o = run_stdin(&["stream", "--config", &config, "--stdin"], FRAME_NEAR);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn schema_violation_names_line_and_field() {
    let ws = Workspace::new();
    let config = ws.file("c.json", r#"{"kappa": 50}"#);
    let bad = FRAME_EMPTY.replace(r#""width_px":1280"#, r#""width_px":"wide""#);
    let input = ws.file("f.jsonl", &format!("{FRAME_NEAR}\n{bad}\n"));
    let o = run(&["assess", "--config", &config, "--input", &input, "--output", s(&ws.path("r"))]);
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("line 2") && err.contains("width_px"), "{err}");
}

#[test]
fn invalid_frame_values_exit_one() {
    let ws = Workspace::new();
    let config = ws.file("c.json", r#"{"kappa": 50}"#);
    let bad = FRAME_NEAR.replace(r#""confidence":0.95"#, r#""confidence":1.5"#);
    let input = ws.file("f.jsonl", &bad);
    let o = run(&["assess", "--config", &config, "--input", &input, "--output", s(&ws.path("r"))]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("fires[0].confidence"));
}

#[test]
fn config_errors_exit_two() {
    let ws = Workspace::new();
    let input = ws.file("f.jsonl", FRAME_EMPTY);
    for body in [r#"{"tau1": 0.9}"#, r#"{"unknown_key": 1}"#, "not json", r#"{"kappa": -3}"#] {
        let config = ws.file("c.json", body);
        let o = run(&["assess", "--config", &config, "--input", &input, "--output", s(&ws.path("r"))]);
        assert_eq!(o.status.code(), Some(2), "config {body}");
    }
    let o = run(&["assess", "--config", s(&ws.path("absent.json")), "--input", &input, "--output", s(&ws.path("r"))]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn usage_errors_and_help() {
    assert_eq!(run(&["assess"]).status.code(), Some(2));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
    let ws = Workspace::new();
    let config = ws.file("c.json", "{}");
    // --listen and --stdin are mutually exclusive.
    assert_eq!(
        run(&["stream", "--config", &config, "--stdin", "--listen", "127.0.0.1:0"]).status.code(),
        Some(2)
    );
}

#[test]
fn calibrate_prints_kappa() {
    let o = run(&["calibrate", "--ref-px", "100", "--ref-m", "2"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(String::from_utf8_lossy(&o.stdout), "kappa=50 px/m\n");
    let o = run(&["calibrate", "--ref-px", "100", "--ref-m", "0"]);
    assert_eq!(o.status.code(), Some(1));
    let o = run(&["calibrate", "--ref-px", "-5", "--ref-m", "2"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn synth_is_reproducible_and_assessable() {
    let ws = Workspace::new();
    let spec = ws.file(
        "s.json",
        r#"{"random": {"width_px": 640, "height_px": 480, "kappa": 30, "frame_count": 25, "rng_seed": 9}}"#,
    );
    let a = ws.path("a.jsonl");
    let b = ws.path("b.jsonl");
    assert_eq!(run(&["synth", "--spec", &spec, "--out", s(&a)]).status.code(), Some(0));
    assert_eq!(run(&["synth", "--spec", &spec, "--out", s(&b)]).status.code(), Some(0));
    let frames = fs::read(&a).unwrap();
    assert_eq!(frames, fs::read(&b).unwrap());
    assert_eq!(String::from_utf8_lossy(&frames).lines().count(), 25);

    let config = ws.file("c.json", "{}");
    let o = run(&["assess", "--config", &config, "--input", s(&a), "--output", "-"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(String::from_utf8_lossy(&o.stdout).lines().count(), 25);

    let bad = ws.file("bad.json", r#"{"width_px": 10}"#);
    assert_eq!(run(&["synth", "--spec", &bad, "--out", s(&a)]).status.code(), Some(1));
}

fn request(addr: std::net::SocketAddr, lines: &[&str]) -> Vec<String> {
    let mut conn = TcpStream::connect(addr).unwrap();
    let mut reader = BufReader::new(conn.try_clone().unwrap());
    let mut replies = Vec::new();
    for l in lines {
        writeln!(conn, "{l}").unwrap();
        let mut reply = String::new();
        reader.read_line(&mut reply).unwrap();
        replies.push(reply.trim_end().to_string());
    }
    replies
}

#[test]
fn socket_server_answers_per_connection() {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    let config = Arc::new(EngineConfig::from_json(r#"{"kappa": 50}"#).unwrap());
    let mirror = shared_sink(Vec::new());
    thread::spawn(move || stream::serve(listener, config, None, Some(mirror), None));

    let first = request(addr, &[FRAME_NEAR, "{broken", FRAME_EMPTY]);
    assert_eq!(first.len(), 3);
    let r = parse_report_line(&first[0]).unwrap();
    assert_eq!(r.report.frame_id, 1);
    assert_eq!(r.smoothed_risk, Some(r.report.frame_risk_max));
    assert!(first[1].contains(r#""line":2"#) && first[1].contains(r#""error""#));
    assert_eq!(parse_report_line(&first[2]).unwrap().report.frame_id, 2);

    // A new connection starts a fresh stream, so frame 1 is accepted again.
    let second = request(addr, &[FRAME_NEAR]);
    assert_eq!(second[0], first[0]);
}

struct Killed(Child);

impl Drop for Killed {
    fn drop(&mut self) {
        let _ = self.0.kill();
        let _ = self.0.wait();
    }
}

#[test]
fn listen_mode_over_tcp() {
    let ws = Workspace::new();
    let config = ws.file("c.json", r#"{"kappa": 50}"#);
    let mut child = Killed(
        bin()
            .args(["stream", "--config", &config, "--listen", "127.0.0.1:0"])
            .stderr(Stdio::piped())
            .stdout(Stdio::null())
            .spawn()
            .unwrap(),
    );
    let mut banner = String::new();
    BufReader::new(child.0.stderr.take().unwrap())
        .read_line(&mut banner)
        .unwrap();
    let addr = banner.trim().strip_prefix("listening on ").expect(&banner).parse().unwrap();

    let replies = request(addr, &[FRAME_NEAR, FRAME_EMPTY]);
    let batch = run_stdin(&["stream", "--config", &config, "--stdin"], &format!("{FRAME_NEAR}\n{FRAME_EMPTY}\n"));
    let expected: Vec<String> = String::from_utf8_lossy(&batch.stdout).lines().map(String::from).collect();
    assert_eq!(replies, expected);
}
