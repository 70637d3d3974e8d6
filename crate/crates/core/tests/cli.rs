use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};

use accident_core::sim::builtin_suite;
use accident_core::EngineConfig;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_accident"))
}

fn golden(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name)
}

fn run_with_stdin(args: &[&str], stdin: &str) -> Output {
    let mut child =
        bin().args(args).stdin(Stdio::piped()).stdout(Stdio::piped()).stderr(Stdio::piped()).spawn().unwrap();
    child.stdin.take().unwrap().write_all(stdin.as_bytes()).unwrap();
    child.wait_with_output().unwrap()
}

#[test]
fn empty_stream_exits_cleanly_with_no_events() {
    let out = run_with_stdin(&["run"], "");
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
}

#[test]
fn head_on_events_match_golden_file() {
    let out = bin().arg("run").arg("--input").arg(golden("head_on_clear.jsonl")).output().unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let expected = std::fs::read(golden("head_on_clear.events.jsonl")).unwrap();
    assert_eq!(String::from_utf8(out.stdout).unwrap(), String::from_utf8(expected).unwrap());
}

#[test]
fn same_input_twice_gives_identical_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let mut outputs = Vec::new();
    for tag in ["a", "b"] {
        let events = dir.path().join(format!("{tag}.jsonl"));
        let trace = dir.path().join(format!("{tag}.trace"));
        let status = bin()
            .arg("run")
            .arg("--input")
            .arg(golden("head_on_clear.jsonl"))
            .arg("--output")
            .arg(&events)
            .arg("--trace")
            .arg(&trace)
            .status()
            .unwrap();
        assert!(status.success());
        outputs.push((std::fs::read(events).unwrap(), std::fs::read(trace).unwrap()));
    }
    assert_eq!(outputs[0], outputs[1]);
    assert_eq!(String::from_utf8_lossy(&outputs[0].1).lines().count(), 150);
}

#[test]
fn malformed_input_exits_1_with_line_number() {
    let out = run_with_stdin(&["run"], "{\"frame\":0,\"w\":10,\"h\":10,\"det\":[]}\nnot json\n");
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"));
}

#[test]
fn bad_config_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "[anomaly]\ndecision_threshold = 3.0\n").unwrap();
    let out = run_with_stdin(&["run", "--config", cfg.to_str().unwrap()], "");
    assert_eq!(out.status.code(), Some(2));
    let out = run_with_stdin(&["run", "--config", "/nonexistent/config.toml"], "");
    assert_eq!(out.status.code(), Some(2));
    let out = run_with_stdin(&["run", "--fps", "0"], "");
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn config_defaults_parse_back() {
    let out = bin().args(["config", "--defaults"]).output().unwrap();
    assert!(out.status.success());
    let cfg = EngineConfig::from_toml_str(&String::from_utf8(out.stdout).unwrap()).unwrap();
    assert_eq!(cfg, EngineConfig::default());
}

#[test]
fn simulate_then_eval_detects_the_staged_collision() {
    let dir = tempfile::tempdir().unwrap();
    let status = bin().args(["simulate", "--builtin", "--seed", "7", "--output"]).arg(dir.path()).status().unwrap();
    assert!(status.success());
    for spec in builtin_suite(7) {
        assert!(dir.path().join(format!("{}.jsonl", spec.name)).exists());
        assert!(dir.path().join(format!("{}.truth", spec.name)).exists());
    }
    let out = bin()
        .arg("eval")
        .arg("--input")
        .arg(dir.path().join("t-bone-clear.jsonl"))
        .arg("--truth")
        .arg(dir.path().join("t-bone-clear.truth"))
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let record: serde_json::Value = serde_json::from_str(text.lines().last().unwrap()).unwrap();
    assert_eq!(record["total_accidents"], 1);
    assert_eq!(record["detected_accidents"], 1);
    assert_eq!(record["detection_rate"], 100.0);
}

#[test]
fn simulate_from_spec_file() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("one.toml");
    std::fs::write(
        &spec,
        "name = \"one\"\nframe_count = 10\nwidth = 640\nheight = 480\n\n[[vehicles]]\nstart = [100.0, 100.0]\nvelocity = [5.0, 0.0]\nsize = [40.0, 20.0]\n",
    )
    .unwrap();
    let out_dir = dir.path().join("out");
    let status = bin().arg("simulate").arg("--input").arg(&spec).arg("--output").arg(&out_dir).status().unwrap();
    assert!(status.success());
    let stream = std::fs::read_to_string(out_dir.join("one.jsonl")).unwrap();
    assert_eq!(stream.lines().count(), 10);
    assert!(stream.lines().nth(3).unwrap().contains("[115.0,100.0,40.0,20.0]"));
    assert_eq!(std::fs::read_to_string(out_dir.join("one.truth")).unwrap(), "");
}

#[test]
fn strict_mode_changes_overlap_rule() {
    // Two overlapping cars well below the top edge: the legacy rule sums the
    // vertical centers and misses the overlap.
    let stream = (0..20)
        .map(|f| {
            format!(
                "{{\"frame\":{f},\"w\":1000,\"h\":1000,\"det\":[{{\"cls\":3,\"score\":0.9,\"box\":[100,400,40,20]}},{{\"cls\":3,\"score\":0.9,\"box\":[110,410,40,20]}}]}}\n"
            )
        })
        .collect::<String>();
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("t");
    let traced = |extra: &[&str]| {
        let mut args = vec!["run", "--trace", trace.to_str().unwrap()];
        args.extend_from_slice(extra);
        assert!(run_with_stdin(&args, &stream).status.success());
        std::fs::read_to_string(&trace).unwrap()
    };
    assert!(traced(&[]).lines().all(|l| !l.contains("\"overlaps\":[]")));
    assert!(traced(&["--strict-paper-mode"]).lines().all(|l| l.contains("\"overlaps\":[]")));
}
