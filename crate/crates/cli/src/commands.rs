//! Subcommands of the `pvp` binary.

use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::mpsc::sync_channel;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use pvp_core::config::{RunConfig, ENV_PREFIX};
use pvp_core::eval::{evaluate, ConstantPolicy, EvalReport, NetPolicy, Policy};
use pvp_core::runner::{Trainer, TrainerState, CONFIG_FILE, NETS_FILE, STATE_FILE};
use pvp_core::{human_channel, ActorCritic, ExpertPolicy, GateMode, FAILSAFE_ACTION};
use pvp_nn::Checkpoint;
use pvp_sim::{pg_generate, read_trajectory, SceneCatalog, Split, Vec2};

use crate::preview::render_svg;
use crate::service::{router, spawn_forwarder, Hub, ServiceConfig};

#[derive(Debug, Parser)]
#[command(name = "pvp", version, about = "Proxy-value learning from live or scripted interventions")]
#[command(after_help = "Any config value can be overridden from the environment, e.g. PVP__LEARNER__BATCH_SIZE=256.")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a policy, headless against the scripted expert or live with an operator.
    Train(TrainArgs),
    /// Evaluate a checkpoint (or a reference policy) on held-out scenes.
    Eval(EvalArgs),
    /// Generate a procedural map file.
    Mapgen(MapgenArgs),
    /// Host the operator bridge and UI while a live run trains.
    Serve(ServeArgs),
    /// Summarize a recorded trajectory.
    Replay(ReplayArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    /// The scripted expert intervenes when the novice action is unlikely.
    Threshold,
    /// A human operator intervenes through the bridge.
    Live,
    /// No interventions.
    Off,
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    /// Run configuration (TOML). Defaults apply to anything left out.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Total environment interactions.
    #[arg(long)]
    pub steps: Option<u64>,
    /// Run directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct BridgeArgs {
    #[arg(long, default_value = "127.0.0.1")]
    pub host: String,
    #[arg(long, default_value_t = 8787)]
    pub port: u16,
    /// Directory served at `/`, normally the built UI bundle.
    #[arg(long, default_value = "ui/dist")]
    pub static_dir: PathBuf,
    /// Directory whose subdirectories are served under `/runs/{id}/curve`.
    /// Defaults to the parent of the run directory.
    #[arg(long)]
    pub runs_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub run: RunArgs,
    #[arg(long, value_enum)]
    pub mode: Option<Mode>,
    /// Checkpoint directory to continue from.
    #[arg(long)]
    pub resume: Option<PathBuf>,
    #[command(flatten)]
    pub bridge: BridgeArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EvalPolicy {
    /// The checkpoint's policy network.
    Net,
    /// The scripted expert.
    Expert,
    /// Constant full braking.
    Brake,
}

#[derive(Debug, Clone, Args)]
pub struct EvalArgs {
    /// Checkpoint directory holding the networks.
    pub checkpoint: Option<PathBuf>,
    /// Number of episodes.
    #[arg(short, long, default_value_t = 100)]
    pub n: usize,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "net")]
    pub policy: EvalPolicy,
    #[arg(long, value_enum, default_value = "test")]
    pub split: SplitArg,
    /// Episode seed base; defaults to the configured evaluation seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Where to write the report; defaults to the checkpoint directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SplitArg {
    Train,
    Test,
}

#[derive(Debug, Clone, Args)]
pub struct MapgenArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 3, value_parser = clap::value_parser!(u64).range(1..))]
    pub blocks: u64,
    #[arg(long)]
    pub out: PathBuf,
    /// Also write an SVG rendering here.
    #[arg(long)]
    pub preview: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct ServeArgs {
    #[command(flatten)]
    pub run: RunArgs,
    #[arg(long)]
    pub resume: Option<PathBuf>,
    #[command(flatten)]
    pub bridge: BridgeArgs,
}

#[derive(Debug, Clone, Args)]
pub struct ReplayArgs {
    pub trajectory: PathBuf,
    /// Map the trajectory was driven on; required for `--svg`.
    #[arg(long)]
    pub map: Option<PathBuf>,
    /// Write the path drawn over the map here.
    #[arg(long, requires = "map")]
    pub svg: Option<PathBuf>,
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train(a) => train(a),
        Command::Eval(a) => eval(a),
        Command::Mapgen(a) => mapgen(a),
        Command::Serve(a) => train(TrainArgs {
            run: a.run,
            mode: Some(Mode::Live),
            resume: a.resume,
            bridge: a.bridge,
        }),
        Command::Replay(a) => replay(a),
    }
}

/// Run directory of a checkpoint at `<run>/checkpoints/<ckpt>`.
fn run_dir_of(checkpoint: &Path) -> PathBuf {
    let parent = checkpoint.parent().unwrap_or(Path::new("."));
    if parent.file_name().is_some_and(|n| n == "checkpoints") {
        parent.parent().unwrap_or(Path::new(".")).to_path_buf()
    } else {
        parent.to_path_buf()
    }
}

fn load_config(explicit: Option<&Path>, fallback_dir: Option<&Path>) -> Result<RunConfig> {
    let snapshot = fallback_dir.map(|d| d.join(CONFIG_FILE)).filter(|p| p.is_file());
    let path = explicit.map(Path::to_path_buf).or(snapshot);
    RunConfig::load(path.as_deref()).with_context(|| match &path {
        Some(p) => format!("invalid configuration {}", p.display()),
        None => format!("invalid configuration from {ENV_PREFIX}* variables"),
    })
}

pub fn train(args: TrainArgs) -> Result<()> {
    let resume_run = args.resume.as_deref().map(run_dir_of);
    let mut cfg = load_config(args.run.config.as_deref(), resume_run.as_deref())?;
    if let Some(seed) = args.run.seed {
        cfg.run.seed = seed;
    }
    if let Some(steps) = args.run.steps {
        cfg.run.total_steps = steps;
    }
    if let Some(out) = args.run.out.clone().or(resume_run) {
        cfg.run.out_dir = out;
    }
    match args.mode {
        Some(Mode::Threshold) => cfg.gate.mode = GateMode::Threshold,
        Some(Mode::Live) => cfg.gate.mode = GateMode::Human,
        Some(Mode::Off) => cfg.gate.mode = GateMode::Off,
        None => {}
    }
    cfg.validate().context("invalid configuration")?;

    let catalog = Arc::new(SceneCatalog::generate(&cfg.scenes).context("scene generation failed")?);
    let trainer = match &args.resume {
        Some(ckpt) => Trainer::resume(cfg.clone(), catalog, ckpt)
            .with_context(|| format!("cannot resume from {}", ckpt.display()))?,
        None => Trainer::new(cfg.clone(), catalog)?,
    };
    let out_dir = cfg.run.out_dir.clone();
    let mut trainer = trainer.with_run_dir(&out_dir)?;
    tracing::info!(
        "training {} -> {} steps, gate {:?}, run directory {}",
        trainer.step(),
        cfg.run.total_steps,
        cfg.gate.mode,
        out_dir.display()
    );

    let summary = if cfg.gate.mode == GateMode::Human {
        run_live(trainer, &cfg, &args.bridge)?
    } else {
        trainer.run_until(cfg.run.total_steps, false, |r| {
            if let Some(e) = &r.eval {
                tracing::info!(
                    "step {}: success {:.2}, out {:.2}, crash {:.2}, interventions so far {}",
                    e.step,
                    e.success_rate,
                    e.out_rate,
                    e.crash_rate,
                    e.cumulative_interventions
                );
            }
        })?
    };
    tracing::info!(
        "done: {} ticks, {} evaluations, {} failsafe ticks",
        summary.ticks,
        summary.evals,
        summary.failsafe_ticks
    );
    Ok(())
}

fn run_live(mut trainer: Trainer, cfg: &RunConfig, bridge: &BridgeArgs) -> Result<pvp_core::runner::RunSummary> {
    let runtime = tokio::runtime::Builder::new_multi_thread()
        .worker_threads(2)
        .enable_all()
        .build()?;
    let addr: SocketAddr = format!("{}:{}", bridge.host, bridge.port)
        .parse()
        .with_context(|| format!("bad bridge address {}:{}", bridge.host, bridge.port))?;
    let listener = runtime
        .block_on(tokio::net::TcpListener::bind(addr))
        .with_context(|| format!("cannot listen on {addr}"))?;
    let (handle, channel) = human_channel();
    let hub = Hub::new(handle);
    let service = ServiceConfig {
        static_dir: bridge.static_dir.clone(),
        runs_dir: bridge.runs_dir.clone().unwrap_or_else(|| {
            cfg.run.out_dir.parent().map(Path::to_path_buf).unwrap_or_else(|| PathBuf::from("."))
        }),
    };
    let app = router(hub.clone(), service);
    runtime.spawn(async move {
        if let Err(e) = crate::service::serve(listener, app).await {
            tracing::error!("bridge service stopped: {e}");
        }
    });
    tracing::info!("operator bridge on ws://{addr}/bridge");

    let (tx, rx) = sync_channel(16);
    let forwarder = spawn_forwarder(rx, hub);
    trainer = trainer.with_human(channel).with_telemetry(tx);
    let mut braking = false;
    let summary = trainer.run_until(cfg.run.total_steps, true, |r| {
        if r.failsafe != braking {
            braking = r.failsafe;
            if braking {
                tracing::warn!("no operator connected; braking with {FAILSAFE_ACTION:?} until one joins");
            } else {
                tracing::info!("operator in control of the gate");
            }
        }
    });
    drop(trainer);
    let _ = forwarder.join();
    let summary = summary?;
    if summary.deadline_misses > 0 {
        tracing::warn!(
            "{} of {} ticks overran the {} s control period",
            summary.deadline_misses,
            summary.ticks,
            cfg.run.live_tick
        );
    }
    runtime.shutdown_background();
    Ok(summary)
}

pub fn eval(args: EvalArgs) -> Result<()> {
    let run_dir = args.checkpoint.as_deref().map(run_dir_of);
    let cfg = load_config(args.config.as_deref(), run_dir.as_deref())?;
    let catalog = SceneCatalog::generate(&cfg.scenes).context("scene generation failed")?;
    let split = match args.split {
        SplitArg::Train => Split::Train,
        SplitArg::Test => Split::Test,
    };
    let seed = args.seed.unwrap_or(cfg.eval.seed);

    let mut step = 0;
    let nets;
    let mut expert;
    let mut brake = ConstantPolicy([0.0, -1.0]);
    let mut net_policy;
    let policy: &mut dyn Policy = match args.policy {
        EvalPolicy::Net => {
            let Some(ckpt) = &args.checkpoint else {
                bail!("evaluating a network needs a checkpoint directory");
            };
            let path = ckpt.join(NETS_FILE);
            let c = Checkpoint::load(&path).with_context(|| format!("cannot load {}", path.display()))?;
            nets = ActorCritic::from_checkpoint(&c).with_context(|| format!("corrupt checkpoint {}", path.display()))?;
            if let Ok(text) = std::fs::read_to_string(ckpt.join(STATE_FILE)) {
                if let Ok(state) = serde_json::from_str::<TrainerState>(&text) {
                    step = state.step;
                }
            }
            net_policy = NetPolicy(&nets.policy);
            &mut net_policy
        }
        EvalPolicy::Expert => {
            expert = ExpertPolicy::new(cfg.expert.clone());
            &mut expert
        }
        EvalPolicy::Brake => &mut brake,
    };
    let report = evaluate(policy, &catalog, split, &cfg.env, args.n, seed, step)?;
    println!("{}", serde_json::to_string_pretty(&report)?);
    let out = match (&args.out, &args.checkpoint) {
        (Some(p), _) => Some(p.clone()),
        (None, Some(ckpt)) => Some(ckpt.join(EvalReport::file_name(step))),
        (None, None) => None,
    };
    if let Some(path) = out {
        std::fs::write(&path, serde_json::to_string_pretty(&report)?)
            .with_context(|| format!("cannot write {}", path.display()))?;
        tracing::info!("report written to {}", path.display());
    }
    Ok(())
}

pub fn mapgen(args: MapgenArgs) -> Result<()> {
    let map = pg_generate(args.seed, args.blocks as usize)
        .with_context(|| format!("map generation failed for seed {}", args.seed))?;
    map.save(&args.out)
        .with_context(|| format!("cannot write {}", args.out.display()))?;
    if let Some(svg) = &args.preview {
        std::fs::write(svg, render_svg(&map, None)).with_context(|| format!("cannot write {}", svg.display()))?;
    }
    tracing::info!("seed {} with {} blocks -> {}", args.seed, args.blocks, args.out.display());
    Ok(())
}

pub fn replay(args: ReplayArgs) -> Result<()> {
    let recs = read_trajectory(&args.trajectory)
        .with_context(|| format!("cannot read {}", args.trajectory.display()))?;
    let steps = recs.len();
    let interventions = recs.iter().filter(|r| r.intervention).count();
    let reward: f64 = recs.iter().map(|r| r.reward).sum();
    let cost: f64 = recs.iter().map(|r| r.cost).sum();
    let path: Vec<Vec2> = recs.iter().map(|r| Vec2::new(r.x, r.y)).collect();
    let distance: f64 = path.windows(2).map(|w| w[1].dist(w[0])).sum();
    let summary = serde_json::json!({
        "steps": steps,
        "interventions": interventions,
        "return": reward,
        "cost": cost,
        "distance_m": distance,
        "mean_speed": if steps > 0 { recs.iter().map(|r| r.speed).sum::<f64>() / steps as f64 } else { 0.0 },
        "final": recs.last().map(|r| serde_json::json!({"x": r.x, "y": r.y, "heading": r.heading})),
    });
    println!("{}", serde_json::to_string_pretty(&summary)?);
    if let (Some(map_path), Some(svg)) = (&args.map, &args.svg) {
        let map = pvp_sim::load_map(map_path).with_context(|| format!("cannot load {}", map_path.display()))?;
        std::fs::write(svg, render_svg(&map, Some(&path))).with_context(|| format!("cannot write {}", svg.display()))?;
    }
    Ok(())
}
