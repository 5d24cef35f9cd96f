//! Held-out evaluation, per-seed aggregation and learning-curve export.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use pvp_nn::Mlp;
use pvp_sim::{DriveEnv, EnvConfig, SceneCatalog, Split, Termination};
use serde::{Deserialize, Serialize};

use crate::expert::ExpertPolicy;
use crate::learner::policy_action;
use crate::{Action, CoreError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalConfig {
    /// Evaluate after every this many environment interactions; 0 disables.
    pub every: u64,
    pub episodes: usize,
    pub seed: u64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            every: 200,
            episodes: 100,
            seed: 10_000,
        }
    }
}

/// Anything that maps the current scene to an action.
pub trait Policy {
    fn act(&mut self, env: &DriveEnv, obs: &[f64]) -> Result<Action, CoreError>;
}

pub struct NetPolicy<'a>(pub &'a Mlp);

impl Policy for NetPolicy<'_> {
    fn act(&mut self, _env: &DriveEnv, obs: &[f64]) -> Result<Action, CoreError> {
        policy_action(self.0, obs)
    }
}

impl Policy for ExpertPolicy {
    fn act(&mut self, env: &DriveEnv, _obs: &[f64]) -> Result<Action, CoreError> {
        Ok(ExpertPolicy::act(self, env).action)
    }
}

pub struct ConstantPolicy(pub Action);

impl Policy for ConstantPolicy {
    fn act(&mut self, _env: &DriveEnv, _obs: &[f64]) -> Result<Action, CoreError> {
        Ok(self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EpisodeEnd {
    Success,
    OutOfRoad,
    Timeout,
    /// The episode aborted on an error.
    Fault,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeMetrics {
    pub end: EpisodeEnd,
    pub steps: usize,
    pub cost: f64,
    pub reward: f64,
    pub interventions: u64,
    pub route_completion: f64,
    /// At least one collision event happened.
    pub crashed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub step: u64,
    pub seed: u64,
    pub episodes: usize,
    pub success_rate: f64,
    pub out_rate: f64,
    pub timeout_rate: f64,
    pub fault_rate: f64,
    pub crash_rate: f64,
    pub mean_cost: f64,
    pub mean_reward: f64,
    pub mean_interventions: f64,
    pub mean_route_completion: f64,
    /// Interventions during training up to `step`.
    pub cumulative_interventions: u64,
}

impl EvalReport {
    pub fn from_episodes(step: u64, seed: u64, eps: &[EpisodeMetrics]) -> Self {
        let n = eps.len();
        let frac = |f: &dyn Fn(&EpisodeMetrics) -> bool| {
            if n == 0 {
                0.0
            } else {
                eps.iter().filter(|e| f(e)).count() as f64 / n as f64
            }
        };
        let mean = |f: &dyn Fn(&EpisodeMetrics) -> f64| {
            if n == 0 {
                0.0
            } else {
                eps.iter().map(f).sum::<f64>() / n as f64
            }
        };
        EvalReport {
            step,
            seed,
            episodes: n,
            success_rate: frac(&|e| e.end == EpisodeEnd::Success),
            out_rate: frac(&|e| e.end == EpisodeEnd::OutOfRoad),
            timeout_rate: frac(&|e| e.end == EpisodeEnd::Timeout),
            fault_rate: frac(&|e| e.end == EpisodeEnd::Fault),
            crash_rate: frac(&|e| e.crashed),
            mean_cost: mean(&|e| e.cost),
            mean_reward: mean(&|e| e.reward),
            mean_interventions: mean(&|e| e.interventions as f64),
            mean_route_completion: mean(&|e| e.route_completion),
            cumulative_interventions: 0,
        }
    }

    pub fn file_name(step: u64) -> String {
        format!("eval_{step:08}.json")
    }

    pub fn save(&self, dir: &Path) -> Result<PathBuf, CoreError> {
        std::fs::create_dir_all(dir).map_err(|e| CoreError::io(dir, e))?;
        let path = dir.join(Self::file_name(self.step));
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(&path, text).map_err(|e| CoreError::io(&path, e))?;
        Ok(path)
    }

    /// Reports in `dir`, sorted by step. A missing directory yields none.
    pub fn load_dir(dir: &Path) -> Result<Vec<EvalReport>, CoreError> {
        if !dir.is_dir() {
            return Ok(Vec::new());
        }
        let mut out = Vec::new();
        for entry in std::fs::read_dir(dir).map_err(|e| CoreError::io(dir, e))? {
            let path = entry.map_err(|e| CoreError::io(dir, e))?.path();
            let is_report = path
                .file_name()
                .and_then(|n| n.to_str())
                .is_some_and(|n| n.starts_with("eval_") && n.ends_with(".json"));
            if is_report {
                let text = std::fs::read_to_string(&path).map_err(|e| CoreError::io(&path, e))?;
                out.push(serde_json::from_str::<EvalReport>(&text)?);
            }
        }
        out.sort_by_key(|r| r.step);
        Ok(out)
    }
}

/// Per-episode environment seed of evaluation episode `i`.
pub fn eval_episode_seed(seed: u64, i: usize) -> u64 {
    seed.wrapping_mul(1_000_003).wrapping_add(i as u64)
}

/// Runs one episode to its end with `policy` in control.
pub fn run_episode(env: &mut DriveEnv, policy: &mut dyn Policy, episode_seed: u64) -> EpisodeMetrics {
    let mut obs = env.reset(episode_seed).to_vec();
    let mut crashed = false;
    let mut steps = 0;
    let end = loop {
        let step = policy.act(env, &obs).and_then(|a| Ok(env.step(a)?));
        let out = match step {
            Ok(out) => out,
            Err(_) => break EpisodeEnd::Fault,
        };
        steps += 1;
        crashed |= out.events.any_collision();
        obs = out.observation.to_vec();
        if out.done {
            break match out.termination {
                Termination::Success => EpisodeEnd::Success,
                Termination::OutOfRoad => EpisodeEnd::OutOfRoad,
                _ => EpisodeEnd::Timeout,
            };
        }
    };
    let completion = match env.progress() {
        Some(s) if env.route_length() > 0.0 => (s / env.route_length()).clamp(0.0, 1.0),
        _ => 0.0,
    };
    EpisodeMetrics {
        end,
        steps,
        cost: env.episode_cost(),
        reward: env.episode_reward(),
        interventions: 0,
        route_completion: if end == EpisodeEnd::Success { 1.0 } else { completion },
        crashed,
    }
}

/// Rolls `policy` out for `n` episodes over `split`, cycling through its
/// scenes; episode `i` runs on scene `i mod |split|`. No gate is involved.
pub fn evaluate(
    policy: &mut dyn Policy,
    catalog: &SceneCatalog,
    split: Split,
    env_cfg: &EnvConfig,
    n: usize,
    seed: u64,
    step: u64,
) -> Result<EvalReport, CoreError> {
    if catalog.is_empty(split) {
        return Err(CoreError::Config(format!("no scenes in the {split:?} split")));
    }
    let mut envs: BTreeMap<usize, DriveEnv> = BTreeMap::new();
    let mut eps = Vec::with_capacity(n);
    for i in 0..n {
        let idx = i % catalog.len(split);
        if !envs.contains_key(&idx) {
            let (_, map) = catalog.by_index(split, idx);
            envs.insert(idx, DriveEnv::new(map, env_cfg.clone())?);
        }
        let env = envs.get_mut(&idx).expect("inserted above");
        eps.push(run_episode(env, policy, eval_episode_seed(seed, i)));
    }
    Ok(EvalReport::from_episodes(step, seed, &eps))
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

impl MeanStd {
    /// Sample mean and unbiased standard deviation; the deviation of a
    /// single value is 0.
    pub fn of(xs: &[f64]) -> Self {
        let n = xs.len();
        if n == 0 {
            return MeanStd { mean: f64::NAN, std: f64::NAN };
        }
        let mean = xs.iter().sum::<f64>() / n as f64;
        let std = if n > 1 {
            (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        MeanStd { mean, std }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregatePoint {
    pub step: u64,
    pub seeds: usize,
    pub success_rate: MeanStd,
    pub crash_rate: MeanStd,
    pub out_rate: MeanStd,
    pub mean_cost: MeanStd,
    pub cumulative_interventions: MeanStd,
}

fn aggregate_point(step: u64, rs: &[&EvalReport]) -> AggregatePoint {
    let col = |f: fn(&EvalReport) -> f64| MeanStd::of(&rs.iter().map(|r| f(r)).collect::<Vec<_>>());
    AggregatePoint {
        step,
        seeds: rs.len(),
        success_rate: col(|r| r.success_rate),
        crash_rate: col(|r| r.crash_rate),
        out_rate: col(|r| r.out_rate),
        mean_cost: col(|r| r.mean_cost),
        cumulative_interventions: col(|r| r.cumulative_interventions as f64),
    }
}

/// Mean and std across seeds at every evaluation step. Each inner vector
/// holds one seed's reports; all seeds must share the same step grid.
pub fn aggregate_seeds(per_seed: &[Vec<EvalReport>]) -> Result<Vec<AggregatePoint>, CoreError> {
    let Some(first) = per_seed.first() else {
        return Err(CoreError::Contract("aggregation needs at least one seed".into()));
    };
    let grid: Vec<u64> = first.iter().map(|r| r.step).collect();
    for (k, reports) in per_seed.iter().enumerate() {
        let steps: Vec<u64> = reports.iter().map(|r| r.step).collect();
        if steps != grid {
            return Err(CoreError::Contract(format!(
                "seed {k} evaluates at {steps:?}, expected {grid:?}"
            )));
        }
    }
    Ok(grid
        .iter()
        .enumerate()
        .map(|(i, &step)| aggregate_point(step, &per_seed.iter().map(|r| &r[i]).collect::<Vec<_>>()))
        .collect())
}

pub const CURVE_HEADER: &str =
    "env_steps,success_mean,success_std,cost_mean,cost_std,cumulative_interventions,seeds,gap";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub step: u64,
    pub success: MeanStd,
    pub cost: MeanStd,
    pub cumulative_interventions: f64,
    pub seeds: usize,
    /// Some seed has no report at this step.
    pub gap: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CurveTable {
    pub rows: Vec<CurveRow>,
}

impl CurveTable {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(CURVE_HEADER);
        out.push('\n');
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                r.step,
                r.success.mean,
                r.success.std,
                r.cost.mean,
                r.cost.std,
                r.cumulative_interventions,
                r.seeds,
                r.gap as u8
            );
        }
        out
    }
}

/// Seed runs under `dir`: the directory itself when it holds `evals/`,
/// otherwise each subdirectory that does.
fn seed_runs(dir: &Path) -> Result<Vec<PathBuf>, CoreError> {
    if dir.join("evals").is_dir() {
        return Ok(vec![dir.to_path_buf()]);
    }
    if !dir.is_dir() {
        return Ok(Vec::new());
    }
    let mut runs = Vec::new();
    for entry in std::fs::read_dir(dir).map_err(|e| CoreError::io(dir, e))? {
        let path = entry.map_err(|e| CoreError::io(dir, e))?.path();
        if path.join("evals").is_dir() {
            runs.push(path);
        }
    }
    runs.sort();
    Ok(runs)
}

/// Learning curve of a run directory (or a directory of per-seed runs).
/// Steps missing in some seeds are kept and flagged as gaps.
pub fn learning_curve_export(dir: &Path) -> Result<CurveTable, CoreError> {
    let per_seed: Vec<Vec<EvalReport>> = seed_runs(dir)?
        .iter()
        .map(|r| EvalReport::load_dir(&r.join("evals")))
        .collect::<Result<_, _>>()?;
    let steps: BTreeSet<u64> = per_seed.iter().flatten().map(|r| r.step).collect();
    let rows = steps
        .into_iter()
        .map(|step| {
            let at: Vec<&EvalReport> = per_seed.iter().filter_map(|rs| rs.iter().find(|r| r.step == step)).collect();
            let p = aggregate_point(step, &at);
            CurveRow {
                step,
                success: p.success_rate,
                cost: p.mean_cost,
                cumulative_interventions: p.cumulative_interventions.mean,
                seeds: at.len(),
                gap: at.len() < per_seed.len(),
            }
        })
        .collect();
    Ok(CurveTable { rows })
}
