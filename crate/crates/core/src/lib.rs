//! Human-in-the-loop driving learner built on a proxy value: the learner,
//! the intervention gate, a scripted expert, baselines, evaluation, and the
//! training runner.

pub mod bc;
pub mod buffer;
pub mod config;
pub mod eval;
pub mod experiment;
pub mod expert;
pub mod gate;
pub mod learner;
pub mod losses;
pub mod runner;
pub mod td3;

use pvp_nn::NnError;

pub use buffer::{DualBuffer, Fifo, Transition, TransitionError};
pub use expert::{ExpertAction, ExpertConfig, ExpertPolicy, FALLBACK_ACTION};
pub use gate::{
    human_channel, GateConfig, GateDecision, GateMode, HumanChannel, HumanHandle, HumanInput, HumanOverride,
    InterventionGate, MissingHumanAction, FAILSAFE_ACTION,
};
pub use learner::{ActorCritic, CriticBatch, LearnerConfig, LearnerState, PvpLearner, UpdateReport};

/// `[steer, accel]`, both in `[−1, 1]`.
pub type Action = [f64; 2];

#[derive(Debug, thiserror::Error)]
pub enum CoreError {
    #[error("contract violated: {0}")]
    Contract(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Transition(#[from] TransitionError),
    #[error(transparent)]
    MissingHuman(#[from] MissingHumanAction),
    #[error(transparent)]
    Env(#[from] pvp_sim::EnvError),
    #[error(transparent)]
    Scene(#[from] pvp_sim::SceneError),
    #[error("io error at {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Toml(#[from] toml::de::Error),
}

impl CoreError {
    pub fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        CoreError::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}
