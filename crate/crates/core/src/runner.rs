//! The online training loop: one control tick at a time, with metrics,
//! trajectories, periodic evaluation, checkpoints and exact resume.

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::mpsc::SyncSender;
use std::sync::Arc;
use std::time::{Duration, Instant};

use pvp_nn::Checkpoint;
use pvp_sim::{DriveEnv, EventFlags, SceneCatalog, Split, Termination, TrajectoryRecord, TrajectoryWriter};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::buffer::Transition;
use crate::config::RunConfig;
use crate::eval::{evaluate, EpisodeEnd, EpisodeMetrics, EvalReport, NetPolicy};
use crate::expert::ExpertPolicy;
use crate::gate::{behavior_action, clamp_action, GateMode, HumanChannel, InterventionGate};
use crate::learner::{ActorCritic, LearnerState, PvpLearner, UpdateReport};
use crate::{Action, CoreError};

pub const NETS_FILE: &str = "nets.json";
pub const STATE_FILE: &str = "state.json";
pub const METRICS_FILE: &str = "metrics.log";
pub const CONFIG_FILE: &str = "config.toml";

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Training scene and environment seed of episode `k` of a run.
pub fn episode_plan(run_seed: u64, k: u64, scenes: usize) -> (usize, u64) {
    let h = splitmix(run_seed ^ splitmix(k));
    ((h % scenes.max(1) as u64) as usize, splitmix(h))
}

/// Everything one control tick did.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TickReport {
    /// Interactions completed including this one.
    pub step: u64,
    pub episode: u64,
    pub intervened: bool,
    pub failsafe: bool,
    pub a_n: Action,
    pub a_h: Option<Action>,
    pub executed: Action,
    pub reward: f64,
    pub cost: f64,
    pub events: EventFlags,
    pub termination: Termination,
    pub update: Option<UpdateReport>,
    pub buffer_h: usize,
    pub buffer_n: usize,
    pub episode_end: Option<EpisodeMetrics>,
    pub eval: Option<EvalReport>,
    pub client_time_ms: Option<i64>,
}

/// One line of `metrics.log`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRecord {
    pub step: u64,
    #[serde(rename = "I")]
    pub intervened: bool,
    pub failsafe: bool,
    pub loss_proxy: Option<f64>,
    pub loss_td: Option<f64>,
    pub loss_q_total: Option<f64>,
    pub loss_policy: Option<f64>,
    pub loss_bc: Option<f64>,
    pub buffer_h: usize,
    pub buffer_n: usize,
    pub reward: f64,
    pub cost: f64,
    pub events: EventFlags,
    pub episode_end: Option<EpisodeEnd>,
}

impl From<&TickReport> for MetricRecord {
    fn from(r: &TickReport) -> Self {
        let u = r.update.as_ref();
        MetricRecord {
            step: r.step,
            intervened: r.intervened,
            failsafe: r.failsafe,
            loss_proxy: u.map(|u| u.loss_proxy),
            loss_td: u.map(|u| u.loss_td),
            loss_q_total: u.map(|u| u.loss_q_total),
            loss_policy: u.and_then(|u| u.loss_policy),
            loss_bc: u.and_then(|u| u.loss_bc),
            buffer_h: r.buffer_h,
            buffer_n: r.buffer_n,
            reward: r.reward,
            cost: r.cost,
            events: r.events,
            episode_end: r.episode_end.as_ref().map(|e| e.end),
        }
    }
}

pub fn read_metrics(path: &Path) -> Result<Vec<MetricRecord>, CoreError> {
    let file = File::open(path).map_err(|e| CoreError::io(path, e))?;
    let mut out = Vec::new();
    for line in BufReader::new(file).lines() {
        let line = line.map_err(|e| CoreError::io(path, e))?;
        if !line.trim().is_empty() {
            out.push(serde_json::from_str(&line)?);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoseView {
    pub x: f64,
    pub y: f64,
    pub heading: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EgoView {
    pub x: f64,
    pub y: f64,
    pub heading: f64,
    pub speed: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObstacleView {
    pub x: f64,
    pub y: f64,
    pub radius: f64,
    pub kind: pvp_sim::map::ObstacleKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateView {
    pub mode: GateMode,
    #[serde(rename = "I")]
    pub intervened: bool,
    pub failsafe: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalSummary {
    pub step: u64,
    pub success_rate: f64,
    pub out_rate: f64,
    pub crash_rate: f64,
    pub mean_cost: f64,
}

/// Immutable snapshot handed to telemetry consumers after each tick.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Telemetry {
    pub tick: u64,
    pub ego: EgoView,
    pub traffic: Vec<PoseView>,
    pub obstacles: Vec<ObstacleView>,
    /// Normalized ranges, decimated unless verbose.
    pub lidar: Vec<f64>,
    pub gate: GateView,
    pub losses: Option<UpdateReport>,
    pub eval: Option<EvalSummary>,
    pub client_time_ms: Option<i64>,
}

/// Resume sidecar stored next to the network checkpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainerState {
    pub step: u64,
    pub episode: u64,
    pub cumulative_interventions: u64,
    /// Actions executed so far in the running episode, with their
    /// intervention flags, replayed on resume.
    pub episode_actions: Vec<(Action, bool)>,
    pub rng: ChaCha8Rng,
    pub learner: LearnerState,
}

struct RunIo {
    dir: PathBuf,
    metrics: BufWriter<File>,
    trajectory: Option<TrajectoryWriter>,
}

impl RunIo {
    fn open(dir: &Path, keep_metrics_upto: Option<u64>) -> Result<Self, CoreError> {
        for sub in ["checkpoints", "trajectories", "evals"] {
            let p = dir.join(sub);
            std::fs::create_dir_all(&p).map_err(|e| CoreError::io(&p, e))?;
        }
        let path = dir.join(METRICS_FILE);
        let metrics = match keep_metrics_upto {
            None => File::create(&path).map_err(|e| CoreError::io(&path, e))?,
            Some(step) => {
                let kept: Vec<MetricRecord> = if path.exists() {
                    read_metrics(&path)?.into_iter().filter(|m| m.step <= step).collect()
                } else {
                    Vec::new()
                };
                let mut f = File::create(&path).map_err(|e| CoreError::io(&path, e))?;
                for m in &kept {
                    writeln!(f, "{}", serde_json::to_string(m)?).map_err(|e| CoreError::io(&path, e))?;
                }
                OpenOptions::new().append(true).open(&path).map_err(|e| CoreError::io(&path, e))?
            }
        };
        Ok(RunIo {
            dir: dir.to_path_buf(),
            metrics: BufWriter::new(metrics),
            trajectory: None,
        })
    }

    fn trajectory_path(&self, episode: u64) -> PathBuf {
        self.dir.join("trajectories").join(format!("ep_{episode:06}.jsonl"))
    }
}

pub struct Trainer {
    pub cfg: RunConfig,
    catalog: Arc<SceneCatalog>,
    envs: HashMap<usize, DriveEnv>,
    scene: usize,
    pub learner: PvpLearner,
    gate: InterventionGate,
    expert: ExpertPolicy,
    rng: ChaCha8Rng,
    step: u64,
    episode: u64,
    obs: Vec<f64>,
    episode_actions: Vec<(Action, bool)>,
    episode_interventions: u64,
    episode_crashed: bool,
    cumulative_interventions: u64,
    last_update: Option<UpdateReport>,
    last_eval: Option<EvalReport>,
    io: Option<RunIo>,
    telemetry: Option<SyncSender<Telemetry>>,
}

impl Trainer {
    /// Fresh run. Nothing is written until [`Trainer::with_run_dir`].
    pub fn new(cfg: RunConfig, catalog: Arc<SceneCatalog>) -> Result<Self, CoreError> {
        cfg.validate()?;
        if catalog.is_empty(Split::Train) {
            return Err(CoreError::Config("the training split has no scenes".into()));
        }
        let seed = cfg.run.seed;
        let learner = PvpLearner::new(cfg.env.observation_width(), cfg.learner.clone(), splitmix(seed ^ 0x1EA2))?;
        let mut t = Trainer {
            gate: InterventionGate::new(cfg.gate.clone(), cfg.expert.noise_std),
            expert: ExpertPolicy::new(cfg.expert.clone()),
            rng: ChaCha8Rng::seed_from_u64(splitmix(seed ^ 0x6A7E)),
            catalog,
            envs: HashMap::new(),
            scene: 0,
            learner,
            step: 0,
            episode: 0,
            obs: Vec::new(),
            episode_actions: Vec::new(),
            episode_interventions: 0,
            episode_crashed: false,
            cumulative_interventions: 0,
            last_update: None,
            last_eval: None,
            io: None,
            telemetry: None,
            cfg,
        };
        t.obs = t.begin_episode()?;
        Ok(t)
    }

    /// Restores a run from `checkpoint_dir` and brings the running episode
    /// back to where it stood by replaying its recorded actions.
    pub fn resume(cfg: RunConfig, catalog: Arc<SceneCatalog>, checkpoint_dir: &Path) -> Result<Self, CoreError> {
        let nets = ActorCritic::from_checkpoint(&Checkpoint::load(&checkpoint_dir.join(NETS_FILE))?)?;
        let path = checkpoint_dir.join(STATE_FILE);
        let text = std::fs::read_to_string(&path).map_err(|e| CoreError::io(&path, e))?;
        let state: TrainerState = serde_json::from_str(&text)?;
        let mut t = Trainer::new(cfg, catalog)?;
        t.learner = PvpLearner::restore(t.cfg.learner.clone(), nets, state.learner)?;
        t.rng = state.rng;
        t.step = state.step;
        t.episode = state.episode;
        t.cumulative_interventions = state.cumulative_interventions;
        t.obs = t.begin_episode()?;
        for &(a, intervened) in &state.episode_actions {
            let out = t.env_mut().step(a)?;
            t.obs = out.observation.to_vec();
            t.episode_actions.push((a, intervened));
            t.episode_interventions += intervened as u64;
            t.episode_crashed |= out.events.any_collision();
        }
        Ok(t)
    }

    /// Writes metrics, trajectories, evaluations and checkpoints under `dir`.
    /// A resumed run keeps the metric lines up to its checkpoint.
    pub fn with_run_dir(mut self, dir: &Path) -> Result<Self, CoreError> {
        let keep = (self.step > 0).then_some(self.step);
        let mut io = RunIo::open(dir, keep)?;
        let cfg_path = dir.join(CONFIG_FILE);
        std::fs::write(&cfg_path, self.cfg.to_toml_string()?).map_err(|e| CoreError::io(&cfg_path, e))?;
        if self.cfg.run.record_trajectories {
            let path = io.trajectory_path(self.episode);
            let mut w = TrajectoryWriter::create(&path).map_err(|e| CoreError::io(&path, e))?;
            // A resumed episode gets its partial trajectory back by replaying
            // on a scratch environment.
            let mut probe = DriveEnv::new(self.env().map().clone(), self.cfg.env.clone())?;
            let (_, env_seed) = episode_plan(self.cfg.run.seed, self.episode, self.catalog.len(Split::Train));
            probe.reset(env_seed);
            for (t, &(a, i)) in self.episode_actions.iter().enumerate() {
                let out = probe.step(a)?;
                w.write(&trajectory_record(t, &probe, a, out.reward, out.cost, i))
                    .map_err(|e| CoreError::io(&path, e))?;
            }
            io.trajectory = Some(w);
        }
        self.io = Some(io);
        Ok(self)
    }

    pub fn with_human(mut self, channel: HumanChannel) -> Self {
        self.gate = InterventionGate::new(self.cfg.gate.clone(), self.cfg.expert.noise_std).with_human(channel);
        self
    }

    /// Non-blocking telemetry sink; frames are dropped when it is full.
    pub fn with_telemetry(mut self, tx: SyncSender<Telemetry>) -> Self {
        self.telemetry = Some(tx);
        self
    }

    pub fn step(&self) -> u64 {
        self.step
    }

    pub fn episode(&self) -> u64 {
        self.episode
    }

    pub fn cumulative_interventions(&self) -> u64 {
        self.cumulative_interventions
    }

    pub fn env(&self) -> &DriveEnv {
        &self.envs[&self.scene]
    }

    fn env_mut(&mut self) -> &mut DriveEnv {
        self.envs.get_mut(&self.scene).expect("current scene env exists")
    }

    pub fn catalog(&self) -> &Arc<SceneCatalog> {
        &self.catalog
    }

    fn begin_episode(&mut self) -> Result<Vec<f64>, CoreError> {
        let (scene, env_seed) = episode_plan(self.cfg.run.seed, self.episode, self.catalog.len(Split::Train));
        self.scene = scene;
        if !self.envs.contains_key(&scene) {
            let (_, map) = self.catalog.by_index(Split::Train, scene);
            self.envs.insert(scene, DriveEnv::new(map, self.cfg.env.clone())?);
        }
        self.episode_actions.clear();
        self.episode_interventions = 0;
        self.episode_crashed = false;
        Ok(self.env_mut().reset(env_seed).to_vec())
    }

    fn novice_action(&mut self) -> Result<Action, CoreError> {
        let mut a = self.learner.act(&self.obs)?;
        let sigma = self.cfg.learner.exploration_noise;
        if sigma > 0.0 {
            let n = Normal::new(0.0, sigma).expect("finite exploration noise");
            a = [a[0] + n.sample(&mut self.rng), a[1] + n.sample(&mut self.rng)];
        }
        Ok(clamp_action(a))
    }

    /// One control tick: act, gate, step, store, learn.
    pub fn train_tick(&mut self) -> Result<TickReport, CoreError> {
        let a_n = self.novice_action()?;
        let mu = (self.gate.mode() == GateMode::Threshold).then(|| self.expert.act(self.env()).action);
        let decision = self.gate.should_intervene(a_n, mu, &mut self.rng);
        let executed = behavior_action(decision.intervene, a_n, decision.a_h)?;
        let out = self.env_mut().step(executed)?;
        let s_next = out.observation.to_vec();
        let terminal = matches!(out.termination, Termination::Success | Termination::OutOfRoad);
        self.learner.store(Transition {
            s: std::mem::take(&mut self.obs).into(),
            a_n,
            a_h: decision.a_h,
            intervened: decision.intervene,
            s_next: s_next.clone().into(),
            done: terminal,
            reward: out.reward,
            cost: out.cost,
        })?;
        self.step += 1;
        self.episode_actions.push((executed, decision.intervene));
        self.episode_interventions += decision.intervene as u64;
        self.cumulative_interventions += decision.intervene as u64;
        self.episode_crashed |= out.events.any_collision();

        let mut update = None;
        for _ in 0..self.cfg.learner.updates_per_step {
            if let Some(u) = self.learner.update()? {
                update = Some(u);
            }
        }
        if update.is_some() {
            self.last_update = update;
        }

        if let Some(io) = self.io.as_mut() {
            if let Some(w) = io.trajectory.as_mut() {
                let env = &self.envs[&self.scene];
                let t = self.episode_actions.len() - 1;
                w.write(&trajectory_record(t, env, executed, out.reward, out.cost, decision.intervene))
                    .map_err(|e| CoreError::io(&io.dir, e))?;
            }
        }

        let episode_end = out.done.then(|| {
            let env = &self.envs[&self.scene];
            let end = match out.termination {
                Termination::Success => EpisodeEnd::Success,
                Termination::OutOfRoad => EpisodeEnd::OutOfRoad,
                _ => EpisodeEnd::Timeout,
            };
            EpisodeMetrics {
                end,
                steps: env.steps(),
                cost: env.episode_cost(),
                reward: env.episode_reward(),
                interventions: self.episode_interventions,
                route_completion: if end == EpisodeEnd::Success {
                    1.0
                } else {
                    (out.progress / env.route_length()).clamp(0.0, 1.0)
                },
                crashed: self.episode_crashed,
            }
        });
        if out.done {
            self.episode += 1;
            self.obs = self.begin_episode()?;
            if let Some(io) = self.io.as_mut() {
                if let Some(w) = io.trajectory.as_mut() {
                    w.flush().map_err(|e| CoreError::io(&io.dir, e))?;
                    let path = io.trajectory_path(self.episode);
                    io.trajectory = Some(TrajectoryWriter::create(&path).map_err(|e| CoreError::io(&path, e))?);
                }
            }
        } else {
            self.obs = s_next;
        }

        let eval = if self.cfg.eval.every > 0 && self.step % self.cfg.eval.every == 0 {
            Some(self.evaluate_now()?)
        } else {
            None
        };

        let report = TickReport {
            step: self.step,
            episode: self.episode,
            intervened: decision.intervene,
            failsafe: decision.failsafe,
            a_n,
            a_h: decision.a_h,
            executed,
            reward: out.reward,
            cost: out.cost,
            events: out.events,
            termination: out.termination,
            update,
            buffer_h: self.learner.buffers.human.len(),
            buffer_n: self.learner.buffers.novice.len(),
            episode_end,
            eval,
            client_time_ms: decision.client_time_ms,
        };
        if let Some(io) = self.io.as_mut() {
            let line = serde_json::to_string(&MetricRecord::from(&report))?;
            writeln!(io.metrics, "{line}").map_err(|e| CoreError::io(&io.dir, e))?;
        }
        if let Some(tx) = &self.telemetry {
            let _ = tx.try_send(self.telemetry_frame(&report));
        }
        if let Some(every) = std::num::NonZeroU64::new(self.cfg.run.checkpoint_every) {
            if self.io.is_some() && self.step % every.get() == 0 {
                self.save_checkpoint()?;
            }
        }
        Ok(report)
    }

    /// Evaluates a snapshot of the current policy on the test split. Training
    /// state is only read.
    pub fn evaluate_now(&mut self) -> Result<EvalReport, CoreError> {
        let policy = self.learner.nets.policy.clone();
        let mut report = evaluate(
            &mut NetPolicy(&policy),
            &self.catalog,
            Split::Test,
            &self.cfg.env,
            self.cfg.eval.episodes,
            self.cfg.eval.seed,
            self.step,
        )?;
        report.cumulative_interventions = self.cumulative_interventions;
        if let Some(io) = &self.io {
            report.save(&io.dir.join("evals"))?;
        }
        self.last_eval = Some(report.clone());
        Ok(report)
    }

    pub fn telemetry_frame(&self, report: &TickReport) -> Telemetry {
        let env = self.env();
        let ego = env.ego();
        let lidar_all = &self.obs[..self.cfg.env.lidar.num_rays.min(self.obs.len())];
        let lidar = if self.cfg.run.verbose_lidar {
            lidar_all.to_vec()
        } else {
            let stride = (lidar_all.len() / 60).max(1);
            lidar_all.iter().step_by(stride).copied().collect()
        };
        Telemetry {
            tick: report.step,
            ego: EgoView {
                x: ego.position.x,
                y: ego.position.y,
                heading: ego.heading,
                speed: ego.speed,
            },
            traffic: env
                .traffic_states()
                .iter()
                .map(|v| PoseView {
                    x: v.position.x,
                    y: v.position.y,
                    heading: v.heading,
                })
                .collect(),
            obstacles: env
                .map()
                .obstacles()
                .iter()
                .map(|o| ObstacleView {
                    x: o.x,
                    y: o.y,
                    radius: o.radius,
                    kind: o.kind,
                })
                .collect(),
            lidar,
            gate: GateView {
                mode: self.gate.mode(),
                intervened: report.intervened,
                failsafe: report.failsafe,
            },
            losses: self.last_update,
            eval: self.last_eval.as_ref().map(|e| EvalSummary {
                step: e.step,
                success_rate: e.success_rate,
                out_rate: e.out_rate,
                crash_rate: e.crash_rate,
                mean_cost: e.mean_cost,
            }),
            client_time_ms: report.client_time_ms,
        }
    }

    pub fn state(&self) -> TrainerState {
        TrainerState {
            step: self.step,
            episode: self.episode,
            cumulative_interventions: self.cumulative_interventions,
            episode_actions: self.episode_actions.clone(),
            rng: self.rng.clone(),
            learner: self.learner.state(),
        }
    }

    pub fn checkpoint_dir(run_dir: &Path, step: u64) -> PathBuf {
        run_dir.join("checkpoints").join(format!("ckpt_{step:08}"))
    }

    /// Writes networks and the resume sidecar for the current step, and
    /// flushes the logs.
    pub fn save_checkpoint(&mut self) -> Result<PathBuf, CoreError> {
        let Some(io) = self.io.as_mut() else {
            return Err(CoreError::Contract("checkpointing needs a run directory".into()));
        };
        io.metrics.flush().map_err(|e| CoreError::io(&io.dir, e))?;
        if let Some(w) = io.trajectory.as_mut() {
            w.flush().map_err(|e| CoreError::io(&io.dir, e))?;
        }
        let dir = Self::checkpoint_dir(&io.dir, self.step);
        std::fs::create_dir_all(&dir).map_err(|e| CoreError::io(&dir, e))?;
        self.learner.nets.to_checkpoint().save(&dir.join(NETS_FILE))?;
        let path = dir.join(STATE_FILE);
        std::fs::write(&path, serde_json::to_string(&self.state())?).map_err(|e| CoreError::io(&path, e))?;
        Ok(dir)
    }

    pub fn flush(&mut self) -> Result<(), CoreError> {
        if let Some(io) = self.io.as_mut() {
            io.metrics.flush().map_err(|e| CoreError::io(&io.dir, e))?;
            if let Some(w) = io.trajectory.as_mut() {
                w.flush().map_err(|e| CoreError::io(&io.dir, e))?;
            }
        }
        Ok(())
    }

    /// Ticks until `total` interactions have happened. With `pace`, each tick
    /// is held to the configured wall-clock period and overruns are counted.
    /// A failing tick flushes a checkpoint before the error is returned.
    pub fn run_until(
        &mut self,
        total: u64,
        pace: bool,
        mut on_tick: impl FnMut(&TickReport),
    ) -> Result<RunSummary, CoreError> {
        let period = Duration::from_secs_f64(self.cfg.run.live_tick);
        let mut summary = RunSummary::default();
        while self.step < total {
            let started = Instant::now();
            let report = match self.train_tick() {
                Ok(r) => r,
                Err(e) => {
                    if self.io.is_some() {
                        let _ = self.save_checkpoint();
                    }
                    return Err(e);
                }
            };
            summary.ticks += 1;
            summary.failsafe_ticks += report.failsafe as u64;
            if report.eval.is_some() {
                summary.evals += 1;
            }
            on_tick(&report);
            if pace {
                let spent = started.elapsed();
                if spent < period {
                    std::thread::sleep(period - spent);
                } else {
                    summary.deadline_misses += 1;
                }
            }
        }
        if self.io.is_some() {
            let ckpt = Self::checkpoint_dir(&self.io.as_ref().expect("checked").dir, self.step);
            if !ckpt.exists() {
                self.save_checkpoint()?;
            }
            self.flush()?;
        }
        Ok(summary)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct RunSummary {
    pub ticks: u64,
    pub evals: u64,
    pub failsafe_ticks: u64,
    pub deadline_misses: u64,
}

fn trajectory_record(t: usize, env: &DriveEnv, a: Action, reward: f64, cost: f64, intervened: bool) -> TrajectoryRecord {
    let ego = env.ego();
    TrajectoryRecord {
        t,
        x: ego.position.x,
        y: ego.position.y,
        heading: ego.heading,
        speed: ego.speed,
        action: a,
        reward,
        cost,
        intervention: intervened,
    }
}
