use std::path::Path;
use std::process::{Command, Output};

use pvp_core::eval::EvalReport;
use pvp_core::runner::{read_metrics, Trainer, METRICS_FILE};

fn pvp(args: &[&str], envs: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_pvp"));
    cmd.args(args).env("RUST_LOG", "warn");
    for (k, v) in envs {
        cmd.env(k, v);
    }
    cmd.output().unwrap()
}

fn ok(out: &Output) {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
}

const SMALL: &str = r#"
[scenes]
train_scenes = 4
test_scenes = 4

[learner]
hidden = [16, 16]
batch_size = 16
warmup = 10

[eval]
every = 200
episodes = 2

[run]
checkpoint_every = 1000
"#;

fn write_config(dir: &Path) -> String {
    let path = dir.join("small.toml");
    std::fs::write(&path, SMALL).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn headless_training_emits_ten_reports() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path());
    let run = dir.path().join("run");
    let out = pvp(
        &["train", "--config", &cfg, "--mode", "threshold", "--steps", "2000", "--out", run.to_str().unwrap()],
        &[],
    );
    ok(&out);
    assert_eq!(EvalReport::load_dir(&run.join("evals")).unwrap().len(), 10);
    assert_eq!(read_metrics(&run.join(METRICS_FILE)).unwrap().len(), 2000);
    assert!(Trainer::checkpoint_dir(&run, 2000).join("nets.json").is_file());
    assert!(run.join("config.toml").is_file());
}

#[test]
fn resumed_training_keeps_the_log_continuous() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path());
    let run = dir.path().join("run");
    let run_s = run.to_str().unwrap();
    ok(&pvp(&["train", "--config", &cfg, "--steps", "1000", "--out", run_s, "--seed", "3"], &[]));
    let ckpt = Trainer::checkpoint_dir(&run, 1000);
    ok(&pvp(&["train", "--resume", ckpt.to_str().unwrap(), "--steps", "2000"], &[]));
    let steps: Vec<u64> = read_metrics(&run.join(METRICS_FILE)).unwrap().iter().map(|m| m.step).collect();
    assert_eq!(steps, (1..=2000).collect::<Vec<_>>());

    // The same run without the interruption ends in the same place.
    let straight = dir.path().join("straight");
    ok(&pvp(
        &["train", "--config", &cfg, "--steps", "2000", "--out", straight.to_str().unwrap(), "--seed", "3"],
        &[],
    ));
    for f in ["nets.json", "state.json"] {
        let a = std::fs::read(Trainer::checkpoint_dir(&run, 2000).join(f)).unwrap();
        let b = std::fs::read(Trainer::checkpoint_dir(&straight, 2000).join(f)).unwrap();
        assert!(a == b, "{f}");
    }
}

#[test]
fn invalid_configs_fail_with_diagnostics() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "[learner]\nbatchsize = 3\n").unwrap();
    let out = pvp(&["train", "--config", bad.to_str().unwrap(), "--steps", "1"], &[]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("batchsize"));

    let out = pvp(&["train", "--steps", "1"], &[("PVP__GATE__EPSILON", "-1")]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("epsilon"));
}

#[test]
fn eval_reports_reference_policies() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path());
    let report = dir.path().join("brake.json");
    let out = pvp(
        &["eval", "--config", &cfg, "--policy", "brake", "-n", "3", "--out", report.to_str().unwrap()],
        &[("PVP__ENV__HORIZON", "100")],
    );
    ok(&out);
    let r: EvalReport = serde_json::from_slice(&std::fs::read(&report).unwrap()).unwrap();
    assert_eq!((r.episodes, r.success_rate, r.timeout_rate), (3, 0.0, 1.0));
    let printed: EvalReport = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(printed, r);
}

#[test]
fn eval_of_a_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path());
    let run = dir.path().join("run");
    ok(&pvp(&["train", "--config", &cfg, "--steps", "100", "--out", run.to_str().unwrap()], &[]));
    let ckpt = Trainer::checkpoint_dir(&run, 100);
    ok(&pvp(&["eval", ckpt.to_str().unwrap(), "-n", "2"], &[]));
    assert!(ckpt.join(EvalReport::file_name(100)).is_file());

    let missing = dir.path().join("nowhere");
    let out = pvp(&["eval", missing.to_str().unwrap(), "-n", "1"], &[]);
    assert!(!out.status.success());
    std::fs::create_dir_all(&missing).unwrap();
    std::fs::write(missing.join("nets.json"), "{not json").unwrap();
    assert!(!pvp(&["eval", missing.to_str().unwrap(), "-n", "1"], &[]).status.success());
}

#[test]
fn mapgen_is_deterministic_and_validates_blocks() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    let svg = dir.path().join("a.svg");
    ok(&pvp(
        &["mapgen", "--seed", "5", "--blocks", "4", "--out", a.to_str().unwrap(), "--preview", svg.to_str().unwrap()],
        &[],
    ));
    ok(&pvp(&["mapgen", "--seed", "5", "--blocks", "4", "--out", b.to_str().unwrap()], &[]));
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    assert!(pvp_sim::load_map(&a).is_ok());
    let svg = std::fs::read_to_string(&svg).unwrap();
    assert!(svg.starts_with("<svg") && svg.contains("<polygon") && svg.trim_end().ends_with("</svg>"));

    let out = pvp(&["mapgen", "--blocks", "0", "--out", a.to_str().unwrap()], &[]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn replay_summarizes_a_trajectory() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path());
    let run = dir.path().join("run");
    ok(&pvp(&["train", "--config", &cfg, "--steps", "50", "--out", run.to_str().unwrap()], &[]));
    let traj = run.join("trajectories").join("ep_000000.jsonl");
    let map = dir.path().join("m.json");
    ok(&pvp(&["mapgen", "--seed", "1", "--out", map.to_str().unwrap()], &[]));
    let svg = dir.path().join("t.svg");
    let out = pvp(
        &["replay", traj.to_str().unwrap(), "--map", map.to_str().unwrap(), "--svg", svg.to_str().unwrap()],
        &[],
    );
    ok(&out);
    let summary: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let recs = pvp_sim::read_trajectory(&traj).unwrap();
    assert_eq!(summary["steps"], recs.len());
    assert_eq!(summary["interventions"], recs.iter().filter(|r| r.intervention).count());
    assert!(std::fs::read_to_string(&svg).unwrap().contains("<polyline"));
}

#[test]
fn live_mode_without_an_operator_brakes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path());
    let run = dir.path().join("run");
    let out = pvp(
        &["train", "--config", &cfg, "--mode", "live", "--steps", "3", "--port", "0", "--out", run.to_str().unwrap()],
        &[("PVP__RUN__LIVE_TICK", "0.05"), ("RUST_LOG", "warn")],
    );
    ok(&out);
    assert!(String::from_utf8_lossy(&out.stderr).contains("no operator connected"));
    let metrics = read_metrics(&run.join(METRICS_FILE)).unwrap();
    assert_eq!(metrics.len(), 3);
    assert!(metrics.iter().all(|m| m.intervened && m.failsafe));
}

#[test]
fn busy_port_is_an_error() {
    let listener = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    let port = listener.local_addr().unwrap().port().to_string();
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path());
    let out = pvp(
        &["serve", "--config", &cfg, "--steps", "1", "--port", &port, "--out", dir.path().join("r").to_str().unwrap()],
        &[],
    );
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("cannot listen"));
}
