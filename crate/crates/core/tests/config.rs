use pvp_core::config::{env_overrides, RunConfig};
use pvp_core::{CoreError, GateMode};

#[test]
fn defaults_round_trip_through_toml() {
    let cfg = RunConfig::default();
    let text = cfg.to_toml_string().unwrap();
    assert_eq!(RunConfig::from_toml_str(&text).unwrap(), cfg);
    assert_eq!(RunConfig::from_toml_str("").unwrap(), cfg);
}

#[test]
fn learner_defaults() {
    let l = RunConfig::default().learner;
    assert_eq!(l.bound, 1.0);
    assert_eq!(l.gamma, 0.99);
    assert_eq!(l.batch_size, 1024);
    assert_eq!(l.lr, 1e-4);
    assert_eq!(l.tau, 0.05);
    assert_eq!(l.hidden, vec![256, 256]);
    assert_eq!(l.bc_weight, 1.0);
    assert_eq!(l.warmup, 100);
    assert_eq!((l.target_noise, l.target_noise_clip), (0.2, 0.5));
    let cfg = RunConfig::default();
    assert_eq!(cfg.gate.epsilon, 0.05);
    assert_eq!(cfg.gate.mode, GateMode::Threshold);
    assert_eq!(cfg.expert.noise_std, [0.3, 0.3]);
    assert_eq!((cfg.scenes.train_scenes, cfg.scenes.test_scenes), (50, 50));
    assert_eq!((cfg.eval.every, cfg.eval.episodes), (200, 100));
}

#[test]
fn unknown_keys_are_rejected() {
    for text in [
        "colour = 1",
        "[learner]\nbatchsize = 5",
        "[scenes.pg]\nwobble = 1.0",
        "[baselines.td3]\ntwins = true",
    ] {
        assert!(matches!(RunConfig::from_toml_str(text), Err(CoreError::Toml(_))), "{text}");
    }
}

#[test]
fn environment_overrides_win() {
    let vars = vec![
        ("PVP__LEARNER__BATCH_SIZE".to_string(), "256".to_string()),
        ("PVP__GATE__MODE".to_string(), "off".to_string()),
        ("PVP__RUN__OUT_DIR".to_string(), "runs/x".to_string()),
        ("PVP__EXPERT__NOISE_STD".to_string(), "[0.1, 0.2]".to_string()),
        ("HOME".to_string(), "/root".to_string()),
    ];
    let overrides = env_overrides(vars);
    assert_eq!(overrides.len(), 4);
    let cfg = RunConfig::from_toml_with("[learner]\nbatch_size = 64\n", overrides).unwrap();
    assert_eq!(cfg.learner.batch_size, 256);
    assert_eq!(cfg.gate.mode, GateMode::Off);
    assert_eq!(cfg.run.out_dir, std::path::PathBuf::from("runs/x"));
    assert_eq!(cfg.expert.noise_std, [0.1, 0.2]);
}

#[test]
fn overrides_into_scalars_fail() {
    let err = RunConfig::from_toml_with("[learner]\nlr = 0.1\n", [("learner.lr.x", "1")]).unwrap_err();
    assert!(matches!(err, CoreError::Config(_)));
}

#[test]
fn invalid_values_are_rejected() {
    for text in [
        "[learner]\ngamma = 1.0",
        "[learner]\nbatch_size = 0",
        "[gate]\nepsilon = 0.0",
        "[expert]\nnoise_std = [0.3, 0.0]",
        "[scenes]\ntrain_scenes = 0",
        "[learner]\nhidden = [0, 4]",
    ] {
        assert!(matches!(RunConfig::from_toml_str(text), Err(CoreError::Config(_)) | Err(CoreError::Nn(_)) | Err(CoreError::Env(_))), "{text}");
    }
}
