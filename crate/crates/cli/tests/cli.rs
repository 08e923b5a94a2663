use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};
use std::sync::OnceLock;

use serde_json::Value;

fn usc() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_usc"));
    for (k, _) in std::env::vars() {
        if k.starts_with("USC_") {
            c.env_remove(k);
        }
    }
    c
}

fn run(args: &[&str]) -> Output {
    usc().args(args).output().unwrap()
}

fn stdout_json(out: &Output) -> Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

fn workdir() -> &'static Path {
    static DIR: OnceLock<tempfile::TempDir> = OnceLock::new();
    DIR.get_or_init(|| tempfile::tempdir().unwrap()).path()
}

/// A small model trained once per test binary.
fn model() -> PathBuf {
    static MODEL: OnceLock<PathBuf> = OnceLock::new();
    MODEL
        .get_or_init(|| {
            let path = workdir().join("model.bin");
            let out = run(&["train", "--synthetic", "8", "--epochs", "300", "--seed", "3", "--out", path.to_str().unwrap()]);
            assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
            path
        })
        .clone()
}

fn published() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios/published_tables.csv")
}

#[test]
fn help_and_usage_exit_codes() {
    for sub in ["train", "extract", "classify", "synth", "serve", "device", "bench", "score"] {
        let out = run(&[sub, "--help"]);
        assert_eq!(out.status.code(), Some(0), "{sub}");
        assert!(!out.stdout.is_empty());
    }
    assert_eq!(run(&["--help"]).status.code(), Some(0));
    assert_eq!(run(&[]).status.code(), Some(1));
    assert_eq!(run(&["score", "--no-such-flag", "x.csv"]).status.code(), Some(1));
    assert_eq!(run(&["train", "--synthetic", "2", "--epochs", "0", "--out", "m.bin"]).status.code(), Some(1));
    assert_eq!(run(&["train", "--epochs", "5", "--out", "m.bin"]).status.code(), Some(1));
    assert_eq!(run(&["device", "--config", "D"]).status.code(), Some(1));
}

#[test]
fn training_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let paths: Vec<PathBuf> = (0..2).map(|i| dir.path().join(format!("m{i}.bin"))).collect();
    let mut summaries = Vec::new();
    for p in &paths {
        let out = run(&["train", "--synthetic", "2", "--clip-seconds", "1", "--epochs", "20", "--seed", "5", "--out", p.to_str().unwrap()]);
        summaries.push(stdout_json(&out));
    }
    assert_eq!(std::fs::read(&paths[0]).unwrap(), std::fs::read(&paths[1]).unwrap());
    assert_eq!(summaries[0]["test_accuracy"], summaries[1]["test_accuracy"]);
    assert_eq!(summaries[0]["items"], 20);
}

#[test]
fn empty_class_directory_is_named() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::create_dir(dir.path().join("air_conditioner")).unwrap();
    let out = run(&["train", "--data", dir.path().to_str().unwrap(), "--epochs", "5", "--out", "unused.bin"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("`air_conditioner` has no WAV files"));
}

#[test]
fn classify_and_extract_a_generated_siren() {
    let wav = workdir().join("siren.wav");
    assert!(run(&["synth", "--class", "siren", "--seed", "101", "--out", wav.to_str().unwrap()]).status.success());
    let c = stdout_json(&run(&["classify", wav.to_str().unwrap(), "--model", model().to_str().unwrap()]));
    assert_eq!(c["label"], "siren");
    assert_eq!(c["class_index"], 8);
    let f = stdout_json(&run(&["extract", wav.to_str().unwrap()]));
    assert_eq!(f.as_array().unwrap().len(), 193);
    assert_eq!(run(&["extract", wav.to_str().unwrap()]).stdout, run(&["extract", wav.to_str().unwrap()]).stdout);
}

#[test]
fn score_published_tables() {
    let card = stdout_json(&run(&["score", published().to_str().unwrap()]));
    let tallies: Vec<u64> = card["rows"].as_array().unwrap().iter().map(|r| r["tally"].as_u64().unwrap()).collect();
    assert_eq!(tallies, vec![5, 6, 7]);
    let growth = stdout_json(&run(&["score", published().to_str().unwrap(), "--criterion", "growth-ratio"]));
    assert_eq!(growth["rows"][2]["tally"], 8);
    let md = run(&["score", published().to_str().unwrap(), "--format", "markdown"]);
    assert!(String::from_utf8_lossy(&md.stdout).contains("| C | 3 | 2 | 2 | 7 |"));
}

#[test]
fn runtime_errors_are_actionable() {
    let out = run(&["classify", "missing.wav", "--model", "missing-model.bin"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing-model.bin"));

    let free = std::net::TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().to_string();
    let out = run(&["device", "--config", "C", "--server", &free, "--no-pacing"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("cannot connect"));

    let out = run(&["device", "--config", "A", "--server", &free]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--model"));

    let bad = workdir().join("bad.toml");
    std::fs::write(&bad, "iterations = \"many\"\n").unwrap();
    let out = run(&["bench", "--scenario", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("iterations"));
}

struct Server(std::process::Child);

impl Drop for Server {
    fn drop(&mut self) {
        let _ = self.0.kill();
        let _ = self.0.wait();
    }
}

#[test]
fn serve_and_device_with_deterministic_timestamps() {
    let store = workdir().join("served.jsonl");
    let mut child = usc()
        .args(["--deterministic-ts", "serve", "--bind", "127.0.0.1:0", "--model", model().to_str().unwrap()])
        .args(["--store", store.to_str().unwrap()])
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    let mut lines = BufReader::new(child.stderr.take().unwrap()).lines();
    let server = Server(child);
    let addr = lines
        .by_ref()
        .map_while(Result::ok)
        .find_map(|l| l.strip_prefix("listening on ").map(str::to_string))
        .expect("server announces its address");
    std::thread::spawn(move || lines.for_each(drop));

    for config in ["A", "B", "C"] {
        let out = usc()
            .args(["--deterministic-ts", "device", "--config", config, "--server", &addr, "--no-pacing"])
            .args(["--clip-seconds", "2", "--synth-class", "dog_bark", "--iterations", "2"])
            .args(["--model", model().to_str().unwrap()])
            .output()
            .unwrap();
        assert!(out.status.success(), "{config}: {}", String::from_utf8_lossy(&out.stderr));
        let reports: Vec<Value> =
            String::from_utf8_lossy(&out.stdout).lines().map(|l| serde_json::from_str(l).unwrap()).collect();
        assert_eq!(reports.len(), 2);
        for r in &reports {
            assert_eq!(r["record_start_us"], 0);
            assert_eq!(r["ack_received_us"], 0);
            assert!(r["failure"].is_null());
        }
    }
    drop(server);
    let text = std::fs::read_to_string(&store).unwrap();
    let records: Vec<Value> = text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(records.len(), 6);
    assert!(records.iter().all(|r| r["server_receive_ts_us"] == 0));
}

#[test]
fn bench_layers_settings_and_writes_reports() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = dir.path().join("s.toml");
    std::fs::write(&scenario, "fleet_sizes = [1, 2]\niterations = 1\nclip_seconds = 1.0\ndevice_compute_scale = 1.0\n").unwrap();
    let out_dir = dir.path().join("out");
    let out = usc()
        .env("USC_ITERATIONS", "3")
        .env("USC_SEED", "4")
        .args(["bench", "--scenario", scenario.to_str().unwrap(), "--model", model().to_str().unwrap()])
        .args(["--out", out_dir.to_str().unwrap(), "--fleet-sizes", "1,3"])
        .output()
        .unwrap();
    let card = stdout_json(&out);
    assert_eq!(card["rows"].as_array().unwrap().len(), 3);

    let resolved = std::fs::read_to_string(out_dir.join("scenario.toml")).unwrap();
    assert!(resolved.contains("iterations = 1"), "scenario file beats environment");
    assert!(resolved.contains("seed = 4"), "environment beats defaults");
    assert!(resolved.contains("fleet_sizes = [\n    1,\n    3,\n]") || resolved.contains("fleet_sizes = [1, 3]"), "{resolved}");

    let csv = std::fs::read_to_string(out_dir.join("results.csv")).unwrap();
    // Probes: 3 configurations x 1 iteration; fleets: 3 x (1 + 3) devices.
    assert_eq!(csv.lines().count(), 1 + 3 + 3 * 4);
    assert!(out_dir.join("report.md").exists());
    let rescored = stdout_json(&run(&["score", out_dir.join("results.csv").to_str().unwrap()]));
    assert_eq!(rescored, card);
}
