//! Desk-scale comparison of the proxy-value learner against behavior
//! cloning on a matched expert budget and reward-based TD3 on the same
//! interaction budget.

use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use pvp_sim::{SceneCatalog, SceneConfig, Split};
use serde::{Deserialize, Serialize};

use crate::bc::{baseline_bc_train, collect_expert_dataset, BcConfig};
use crate::config::RunConfig;
use crate::eval::{evaluate, EvalReport, NetPolicy};
use crate::expert::ExpertPolicy;
use crate::runner::Trainer;
use crate::td3::{baseline_td3_train, DriveRlEnv, RlEnv, Td3Config, Td3Learner};
use crate::CoreError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DeskConfig {
    pub base: RunConfig,
    pub seeds: Vec<u64>,
    pub steps: u64,
    pub final_eval_episodes: usize,
    /// Width of the intervention-count windows, in steps.
    pub window: u64,
    pub run_td3: bool,
    pub run_bc: bool,
}

impl Default for DeskConfig {
    /// Ten training and ten test scenes, smaller networks and batches than
    /// the full-scale defaults, and a steering-tight expert model.
    fn default() -> Self {
        let mut base = RunConfig::default();
        base.scenes = SceneConfig {
            train_scenes: 10,
            test_scenes: 10,
            ..SceneConfig::default()
        };
        base.learner.hidden = vec![128, 128];
        base.learner.batch_size = 128;
        base.expert.noise_std = [0.1, 0.3];
        base.eval.every = 1000;
        base.eval.episodes = 20;
        base.run.checkpoint_every = 0;
        base.run.record_trajectories = false;
        base.baselines.bc = BcConfig {
            epochs: 100,
            batch_size: 128,
            lr: 1e-3,
            hidden: vec![128, 128],
        };
        base.baselines.td3 = Td3Config {
            batch_size: 128,
            hidden: vec![128, 128],
            twin: true,
            ..Td3Config::default()
        };
        DeskConfig {
            base,
            seeds: vec![0, 1, 2],
            steps: 8000,
            final_eval_episodes: 50,
            window: 1000,
            run_td3: true,
            run_bc: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedOutcome {
    pub seed: u64,
    pub pvp: EvalReport,
    pub bc: Option<EvalReport>,
    pub td3: Option<EvalReport>,
    /// Interventions in each consecutive window of training steps.
    pub interventions_per_window: Vec<u64>,
    /// Expert actions the learner received, which is also the BC budget.
    pub expert_actions: u64,
    pub td3_train_successes: usize,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeskReport {
    pub seeds: Vec<SeedOutcome>,
    pub pvp_success: f64,
    pub bc_success: Option<f64>,
    pub td3_success: Option<f64>,
    pub first_window_interventions: f64,
    pub final_window_interventions: f64,
    pub seconds: f64,
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let v: Vec<f64> = xs.collect();
    v.iter().sum::<f64>() / v.len().max(1) as f64
}

/// Runs every configured seed. With `out`, each seed's learner run writes
/// its run directory to `out/seed_<k>`.
pub fn run_desk_experiment(cfg: &DeskConfig, out: Option<&Path>) -> Result<DeskReport, CoreError> {
    let start = Instant::now();
    let catalog = Arc::new(SceneCatalog::generate(&cfg.base.scenes)?);
    let mut seeds = Vec::new();
    for &seed in &cfg.seeds {
        seeds.push(run_seed(cfg, &catalog, seed, out.map(|o| o.join(format!("seed_{seed}"))))?);
    }
    let windows = |pick: fn(&[u64]) -> Option<&u64>| mean(seeds.iter().map(|s| *pick(&s.interventions_per_window).unwrap_or(&0) as f64));
    Ok(DeskReport {
        pvp_success: mean(seeds.iter().map(|s| s.pvp.success_rate)),
        bc_success: cfg.run_bc.then(|| mean(seeds.iter().filter_map(|s| s.bc.as_ref()).map(|r| r.success_rate))),
        td3_success: cfg.run_td3.then(|| mean(seeds.iter().filter_map(|s| s.td3.as_ref()).map(|r| r.success_rate))),
        first_window_interventions: windows(|w| w.first()),
        final_window_interventions: windows(|w| w.last()),
        seconds: start.elapsed().as_secs_f64(),
        seeds,
    })
}

fn run_seed(cfg: &DeskConfig, catalog: &Arc<SceneCatalog>, seed: u64, dir: Option<PathBuf>) -> Result<SeedOutcome, CoreError> {
    let start = Instant::now();
    let mut run = cfg.base.clone();
    run.run.seed = seed;
    let env_cfg = run.env.clone();
    let final_eval = |policy: &pvp_nn::Mlp, step: u64| {
        evaluate(
            &mut NetPolicy(policy),
            catalog,
            Split::Test,
            &env_cfg,
            cfg.final_eval_episodes,
            run.eval.seed,
            step,
        )
    };

    let mut trainer = Trainer::new(run.clone(), catalog.clone())?;
    if let Some(d) = &dir {
        trainer = trainer.with_run_dir(d)?;
    }
    let window = cfg.window.max(1);
    let mut windows = vec![0u64; cfg.steps.div_ceil(window) as usize];
    trainer.run_until(cfg.steps, false, |r| {
        if r.intervened {
            windows[((r.step - 1) / window) as usize] += 1;
        }
    })?;
    let expert_actions = trainer.cumulative_interventions();
    let mut pvp = final_eval(&trainer.learner.nets.policy, cfg.steps)?;
    pvp.cumulative_interventions = expert_actions;

    let bc = if cfg.run_bc {
        let expert = ExpertPolicy::new(run.expert.clone());
        let data = collect_expert_dataset(
            catalog,
            &env_cfg,
            &expert,
            run.expert.noise_std,
            expert_actions.max(1) as usize,
            seed ^ 0xBC,
        )?;
        let (policy, _) = baseline_bc_train(&data, &run.baselines.bc, seed)?;
        let mut r = final_eval(&policy, cfg.steps)?;
        r.cumulative_interventions = expert_actions;
        Some(r)
    } else {
        None
    };

    let (td3, td3_train_successes) = if cfg.run_td3 {
        let mut env = DriveRlEnv::new(catalog.clone(), env_cfg.clone(), seed ^ 0x7D3)?;
        let mut learner = Td3Learner::new(env.obs_dim(), env.act_dim(), run.baselines.td3.clone(), seed)?;
        let stats = baseline_td3_train(&mut env, &mut learner, cfg.steps as usize, 0)?;
        (Some(final_eval(&learner.actor, cfg.steps)?), stats.successes)
    } else {
        (None, 0)
    };

    Ok(SeedOutcome {
        seed,
        pvp,
        bc,
        td3,
        interventions_per_window: windows,
        expert_actions,
        td3_train_successes,
        seconds: start.elapsed().as_secs_f64(),
    })
}
