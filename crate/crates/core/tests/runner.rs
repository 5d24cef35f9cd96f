use std::sync::mpsc::sync_channel;
use std::sync::Arc;

use pvp_core::config::RunConfig;
use pvp_core::eval::learning_curve_export;
use pvp_core::runner::{read_metrics, Trainer, METRICS_FILE, NETS_FILE, STATE_FILE};
use pvp_core::{human_channel, GateMode, HumanOverride, FAILSAFE_ACTION};
use pvp_sim::trajectory::read_trajectory;
use pvp_sim::{SceneCatalog, SceneConfig};

fn small_config() -> RunConfig {
    let mut cfg = RunConfig::default();
    cfg.scenes = SceneConfig {
        train_scenes: 4,
        test_scenes: 4,
        ..SceneConfig::default()
    };
    cfg.learner.hidden = vec![16, 16];
    cfg.learner.batch_size = 16;
    cfg.learner.warmup = 10;
    cfg.eval.every = 0;
    cfg.eval.episodes = 2;
    cfg.run.checkpoint_every = 0;
    cfg.run.record_trajectories = false;
    cfg
}

fn catalog(cfg: &RunConfig) -> Arc<SceneCatalog> {
    Arc::new(SceneCatalog::generate(&cfg.scenes).unwrap())
}

fn trainer(cfg: RunConfig) -> Trainer {
    let cat = catalog(&cfg);
    Trainer::new(cfg, cat).unwrap()
}

#[test]
fn gate_off_fills_only_the_novice_store() {
    let mut cfg = small_config();
    cfg.gate.mode = GateMode::Off;
    let mut t = trainer(cfg);
    for _ in 0..300 {
        let r = t.train_tick().unwrap();
        assert!(!r.intervened && r.a_h.is_none() && r.update.is_none());
        assert_eq!(r.executed, r.a_n);
    }
    assert_eq!(t.learner.buffers.human.len(), 0);
    assert_eq!(t.learner.buffers.novice.len(), 300);
    assert_eq!(t.learner.updates(), 0);
}

#[test]
fn permanent_intervention_leaves_the_novice_store_empty() {
    let mut cfg = small_config();
    cfg.gate.epsilon = 1e9;
    let mut t = trainer(cfg);
    for _ in 0..300 {
        let r = t.train_tick().unwrap();
        assert!(r.intervened && r.update.is_none());
        assert_eq!(Some(r.executed), r.a_h);
    }
    assert_eq!(t.learner.buffers.novice.len(), 0);
    assert_eq!(t.learner.updates(), 0);
    assert_eq!(t.cumulative_interventions(), 300);
}

#[test]
fn full_run_logs_every_tick_and_every_evaluation() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small_config();
    cfg.eval.every = 200;
    cfg.run.record_trajectories = true;
    let mut t = trainer(cfg).with_run_dir(dir.path()).unwrap();

    let mut audit = Vec::new();
    let summary = t
        .run_until(2000, false, |r| {
            audit.push((r.intervened, r.a_n, r.a_h, r.executed, r.buffer_h, r.buffer_n));
        })
        .unwrap();
    assert_eq!(summary.ticks, 2000);
    assert_eq!(summary.evals, 10);

    // Buffer routing and executed actions, tick by tick.
    let (mut h, mut n) = (0, 0);
    for &(i, a_n, a_h, executed, bh, bn) in &audit {
        if i {
            h += 1;
            assert_eq!(Some(executed), a_h);
        } else {
            n += 1;
            assert_eq!(executed, a_n);
            assert!(a_h.is_none());
        }
        assert_eq!((bh, bn), (h, n));
    }
    assert_eq!(t.cumulative_interventions(), h as u64);
    assert!(t.learner.buffers.human.iter().all(|x| x.intervened && x.a_h.is_some()));
    assert!(t.learner.buffers.novice.iter().all(|x| !x.intervened && x.a_h.is_none()));

    let metrics = read_metrics(&dir.path().join(METRICS_FILE)).unwrap();
    assert_eq!(metrics.len(), 2000);
    assert!(metrics.iter().enumerate().all(|(k, m)| m.step == k as u64 + 1));
    assert_eq!(metrics.iter().filter(|m| m.intervened).count(), h);

    let mut records = 0;
    for entry in std::fs::read_dir(dir.path().join("trajectories")).unwrap() {
        records += read_trajectory(&entry.unwrap().path()).unwrap().len();
    }
    assert_eq!(records, 2000);

    assert_eq!(std::fs::read_dir(dir.path().join("evals")).unwrap().count(), 10);
    let curve = learning_curve_export(dir.path()).unwrap();
    assert_eq!(curve.rows.len(), 10);
    assert!(curve.rows.iter().all(|r| !r.gap && r.seeds == 1));
    let cum: Vec<f64> = curve.rows.iter().map(|r| r.cumulative_interventions).collect();
    assert!(cum.windows(2).all(|w| w[0] <= w[1]));
    assert_eq!(curve.rows.last().unwrap().cumulative_interventions, h as f64);
}

#[test]
fn evaluation_does_not_touch_training_state() {
    let mut with_eval = small_config();
    with_eval.eval.every = 50;
    let mut a = trainer(with_eval);
    let mut b = trainer(small_config());
    for _ in 0..200 {
        a.train_tick().unwrap();
        b.train_tick().unwrap();
    }
    assert_eq!(
        serde_json::to_string(&a.state()).unwrap(),
        serde_json::to_string(&b.state()).unwrap()
    );
    assert_eq!(a.learner.nets.to_checkpoint(), b.learner.nets.to_checkpoint());
}

fn checkpointing_config() -> RunConfig {
    let mut cfg = small_config();
    cfg.run.checkpoint_every = 150;
    cfg.run.record_trajectories = true;
    cfg.eval.every = 100;
    cfg
}

#[test]
fn resumed_run_matches_uninterrupted_run() {
    let straight = tempfile::tempdir().unwrap();
    let broken = tempfile::tempdir().unwrap();
    let cfg = checkpointing_config();
    let cat = catalog(&cfg);

    let mut a = Trainer::new(cfg.clone(), cat.clone()).unwrap().with_run_dir(straight.path()).unwrap();
    a.run_until(450, false, |_| {}).unwrap();

    let mut b = Trainer::new(cfg.clone(), cat.clone()).unwrap().with_run_dir(broken.path()).unwrap();
    b.run_until(230, false, |_| {}).unwrap();
    drop(b);
    let ckpt = Trainer::checkpoint_dir(broken.path(), 150);
    let mut b = Trainer::resume(cfg, cat, &ckpt).unwrap().with_run_dir(broken.path()).unwrap();
    assert_eq!(b.step(), 150);
    b.run_until(450, false, |_| {}).unwrap();

    for file in [NETS_FILE, STATE_FILE] {
        let x = std::fs::read(Trainer::checkpoint_dir(straight.path(), 450).join(file)).unwrap();
        let y = std::fs::read(Trainer::checkpoint_dir(broken.path(), 450).join(file)).unwrap();
        assert!(x == y, "{file} differs after resume");
    }
    assert_eq!(
        std::fs::read_to_string(straight.path().join(METRICS_FILE)).unwrap(),
        std::fs::read_to_string(broken.path().join(METRICS_FILE)).unwrap()
    );
    let mut names: Vec<_> = std::fs::read_dir(straight.path().join("trajectories"))
        .unwrap()
        .map(|e| e.unwrap().file_name())
        .collect();
    names.sort();
    for name in names {
        let x = read_trajectory(&straight.path().join("trajectories").join(&name)).unwrap();
        let y = read_trajectory(&broken.path().join("trajectories").join(&name)).unwrap();
        assert_eq!(x, y, "{name:?}");
    }
    assert_eq!(
        learning_curve_export(straight.path()).unwrap(),
        learning_curve_export(broken.path()).unwrap()
    );
}

#[test]
fn live_mode_without_operator_brakes_every_tick() {
    let mut cfg = small_config();
    cfg.gate.mode = GateMode::Human;
    let (_handle, channel) = human_channel();
    let mut t = trainer(cfg).with_human(channel);
    for _ in 0..50 {
        let r = t.train_tick().unwrap();
        assert!(r.failsafe && r.intervened);
        assert_eq!(r.executed, FAILSAFE_ACTION);
    }
    assert_eq!(t.learner.buffers.human.len(), 50);
}

#[test]
fn operator_takeover_is_stored_as_human_data() {
    let mut cfg = small_config();
    cfg.gate.mode = GateMode::Human;
    let (handle, channel) = human_channel();
    handle.set_connected(true);
    let (tx, rx) = sync_channel(4);
    let mut t = trainer(cfg).with_human(channel).with_telemetry(tx);

    let r = t.train_tick().unwrap();
    assert!(!r.intervened);
    handle.send(HumanOverride {
        takeover: true,
        steer: -0.25,
        accel: 0.5,
        client_time_ms: 1234,
    });
    let r = t.train_tick().unwrap();
    assert!(r.intervened && !r.failsafe);
    assert_eq!(r.executed, [-0.25, 0.5]);
    assert_eq!(r.client_time_ms, Some(1234));
    let stored = t.learner.buffers.human.get(0);
    assert_eq!(stored.a_h, Some([-0.25, 0.5]));

    let frames: Vec<_> = rx.try_iter().collect();
    assert_eq!(frames.len(), 2);
    assert!(frames[1].gate.intervened);
    assert_eq!(frames[1].client_time_ms, Some(1234));
    assert!(frames[1].lidar.len() <= 60);
}
