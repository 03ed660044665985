use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use cpg::trace_io::{parse_stream_line, read_events, read_trace};

fn cpg(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cpg"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn workdir(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("cpg-cli-{}-{name}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

const FORWARD: &str = r#"
[network]
frequency_hz = 1.0

[gait]
preset = "forward"

[schedule]
duration_s = 10.0
seed = 42
initial = "random-phase"

[output]
path = "out.csv"
"#;

fn write(dir: &Path, name: &str, text: &str) -> String {
    std::fs::write(dir.join(name), text).unwrap();
    name.to_string()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn simulate_writes_full_trace() {
    let dir = workdir("simulate");
    let cfg = write(&dir, "forward.toml", FORWARD);
    let out = cpg(&["simulate", &cfg], &dir);
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(stdout(&out).starts_with("ok samples=1001"));
    let trace = read_trace(std::io::BufReader::new(std::fs::File::open(dir.join("out.csv")).unwrap())).unwrap();
    assert_eq!(trace.len(), 1001);
    for (i, ceiling) in [12.0, 40.0, 40.0].iter().enumerate() {
        assert!(trace.theta[i].iter().all(|v| v.abs() <= ceiling + 1e-3));
    }
    let events = read_events(std::io::BufReader::new(std::fs::File::open(dir.join("out.events.csv")).unwrap())).unwrap();
    assert_eq!(events[0].time, 0.0);
}

#[test]
fn coarse_step_override_still_locks() {
    let dir = workdir("coarse");
    let cfg = write(&dir, "forward.toml", FORWARD);
    let out = cpg(&["simulate", &cfg, "--dt", "0.05", "-o", "coarse.csv"], &dir);
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(stdout(&out).contains("locked=true"), "{}", stdout(&out));
    assert!(dir.join("coarse.csv").exists());
}

#[test]
fn exit_codes() {
    let dir = workdir("exit");
    let bad_toml = write(&dir, "bad.toml", "[network\nfrequency_hz = 1");
    assert_eq!(cpg(&["simulate", &bad_toml], &dir).status.code(), Some(2));

    let self_coupled = FORWARD.replace(
        "preset = \"forward\"",
        "w = [[0.5, 0.5, 0.5], [0.5, 0.0, 0.5], [0.5, 0.5, 0.0]]\nvarphi = [[0, 0, 0], [0, 0, 0], [0, 0, 0]]\nbig_r = [12, 40, 40]",
    );
    let cfg = write(&dir, "self.toml", &self_coupled);
    let out = cpg(&["simulate", &cfg], &dir);
    assert_eq!(out.status.code(), Some(3));
    assert!(stderr(&out).contains("w[1][1]"), "{}", stderr(&out));

    let unknown = write(&dir, "unknown.toml", &FORWARD.replace("\"forward\"", "\"moonwalk\""));
    let out = cpg(&["simulate", &unknown], &dir);
    assert_eq!(out.status.code(), Some(3));
    assert!(stderr(&out).contains("forward"), "valid names listed: {}", stderr(&out));

    let diverging = write(&dir, "diverge.toml", &FORWARD.replace("frequency_hz = 1.0", "frequency_hz = 1.0\na_r = 1e200"));
    assert_eq!(cpg(&["simulate", &diverging], &dir).status.code(), Some(4));

    assert_eq!(cpg(&["simulate", "missing.toml"], &dir).status.code(), Some(1));
}

#[test]
fn gaits_list_shows_provenance() {
    let out = cpg(&["gaits", "list"], &workdir("gaits"));
    assert!(out.status.success());
    let text = stdout(&out);
    for name in ["forward", "backward", "rotate_cw", "rotate_ccw_paper", "rotate_ccw_corrected", "counter_phase_sides", "sync_default"] {
        assert!(text.contains(name), "{name} missing");
    }
    assert!(text.contains("paper-verbatim"));
    assert!(text.contains("non-paper variant"));
}

#[test]
fn demos_write_sidecars() {
    let dir = workdir("demos");
    let out = cpg(&["demo", "transitions", "-o", "t.csv"], &dir);
    assert!(out.status.success(), "{}", stderr(&out));
    let events = read_events(std::io::BufReader::new(std::fs::File::open(dir.join("t.events.csv")).unwrap())).unwrap();
    let times: Vec<f64> = events.iter().map(|e| e.time).collect();
    assert_eq!(times, [0.0, 12.0, 20.0]);

    let out = cpg(&["demo", "recovery", "-o", "r.csv"], &dir);
    assert!(out.status.success(), "{}", stderr(&out));
    let events = read_events(std::io::BufReader::new(std::fs::File::open(dir.join("r.events.csv")).unwrap())).unwrap();
    assert_eq!(events.len(), 3);
    assert!(events.iter().all(|e| e.kind == "perturbation" && e.details.contains('[')));

    let out = cpg(&["demo", "sync", "-o", "s.csv"], &dir);
    assert!(out.status.success(), "{}", stderr(&out));
    let trace = read_trace(std::io::BufReader::new(std::fs::File::open(dir.join("s.csv")).unwrap())).unwrap();
    let last = trace.len() - 1;
    let phases: Vec<f64> = (0..3).map(|i| trace.phi[i][last]).collect();
    assert!(cpg::analysis::phase_spread(&phases) < 1e-2);

    assert_eq!(cpg(&["demo", "moonwalk"], &dir).status.code(), Some(2));
}

#[test]
fn stream_emits_one_line_per_tick() {
    let dir = workdir("stream");
    let cfg = write(&dir, "short.toml", &FORWARD.replace("duration_s = 10.0", "duration_s = 1.0"));
    let out = cpg(&["stream", &cfg, "--rate", "100"], &dir);
    assert!(out.status.success(), "{}", stderr(&out));
    let lines: Vec<_> = stdout(&out).lines().map(|l| parse_stream_line(l).unwrap()).collect();
    assert!((99..=101).contains(&lines.len()), "{} lines", lines.len());
    assert!(lines.windows(2).all(|w| w[1].0 > w[0].0));
}

#[test]
fn stream_of_silent_network_prints_zeros() {
    let dir = workdir("silent");
    let text = FORWARD
        .replace("duration_s = 10.0", "duration_s = 0.2\nramp_in = false")
        .replace("random-phase", "rest")
        .replace("preset = \"forward\"", "preset = \"forward\"\nbig_r = [0, 0, 0]");
    let cfg = write(&dir, "silent.toml", &text);
    let out = cpg(&["stream", &cfg, "--no-pace"], &dir);
    assert!(out.status.success(), "{}", stderr(&out));
    for line in stdout(&out).lines() {
        assert!(line.split(',').skip(1).all(|v| v == "0.000"), "{line}");
    }
}

#[test]
fn analyze_reports_lock() {
    let dir = workdir("analyze");
    let cfg = write(&dir, "forward.toml", FORWARD);
    assert!(cpg(&["simulate", &cfg], &dir).status.success());
    let out = cpg(&["analyze", "out.csv", "--preset", "forward"], &dir);
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(stdout(&out).contains("locked=true"), "{}", stdout(&out));
}
