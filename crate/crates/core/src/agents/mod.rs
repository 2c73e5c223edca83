//! Policies, the per-episode agent memory, and the training and evaluation
//! loops.

mod heuristic;
mod memory;
mod qlearn;

use std::sync::Arc;

use rand::{Rng, RngCore};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use heuristic::{HeuristicParams, HeuristicPolicy};
pub use memory::{
    extract_features, plan_bucket, recognized, AgentMemory, FeatureVector, DIRECTION_UNKNOWN, OPEN_VIEW_MASS,
};
pub use qlearn::{
    choose_epsilon_greedy, QParams, QPolicy, QTable, Transition, CHECKPOINT_HEADER, CHECKPOINT_VERSION, EVAL_EPSILON,
};

use crate::env::{Env, EnvError, EpisodeConfig, EpisodeLog};
use crate::gridworld::SceneContext;
use crate::seeding::{derive_seed, rng_for};

#[derive(Debug, Error)]
pub enum AgentError {
    #[error("invalid curriculum: {0}")]
    Curriculum(String),
    #[error("checkpoint line {line}: {msg}")]
    Checkpoint { line: usize, msg: String },
    #[error("checkpoint version {found} not supported (expected {expected})")]
    CheckpointVersion { found: u32, expected: u32 },
    #[error(transparent)]
    Env(#[from] EnvError),
}

/// Maps observations to actions. Implementations are read-only so a single
/// instance can serve many evaluation workers.
pub trait Policy: Sync {
    fn name(&self) -> &str;
    fn act(&self, obs: &crate::env::Observation, memory: &AgentMemory, rng: &mut dyn RngCore) -> crate::env::Action;
}

/// Uniform over the five actions.
#[derive(Debug, Clone, Copy, Default)]
pub struct RandomPolicy;

impl Policy for RandomPolicy {
    fn name(&self) -> &str {
        "random"
    }

    fn act(&self, _obs: &crate::env::Observation, _memory: &AgentMemory, rng: &mut dyn RngCore) -> crate::env::Action {
        crate::env::Action::from_index(rng.gen_range(0..crate::env::Action::COUNT))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Curriculum {
    pub eta_percent: u32,
    pub episodes: usize,
    pub train_categories: Vec<String>,
    pub eval_categories: Vec<String>,
}

impl Curriculum {
    pub fn validate(&self) -> Result<(), AgentError> {
        if self.eta_percent > 100 {
            return Err(AgentError::Curriculum(format!("eta {} exceeds 100", self.eta_percent)));
        }
        if self.train_categories.is_empty() {
            return Err(AgentError::Curriculum("no training categories".into()));
        }
        if let Some(c) = self.train_categories.iter().find(|c| self.eval_categories.contains(c)) {
            return Err(AgentError::Curriculum(format!("category `{c}` is both a training and a held-out category")));
        }
        Ok(())
    }
}

/// Memory decay an agent uses for a given episode configuration.
pub fn agent_decay(config: &EpisodeConfig) -> crate::uncertainty::DecayParams {
    AgentMemory::sharp_decay(config.recognition_range)
}

/// Runs one episode to completion with a fixed policy.
pub fn run_episode(
    ctx: Arc<SceneContext>,
    config: EpisodeConfig,
    policy: &dyn Policy,
    rng: &mut dyn RngCore,
) -> Result<EpisodeLog, AgentError> {
    let decay = agent_decay(&config);
    let close = config.success_radius;
    let (mut env, mut obs) = Env::reset(Arc::clone(&ctx), config)?;
    let mut memory = AgentMemory::new(ctx, decay, close);
    memory.begin(&obs);
    loop {
        let action = policy.act(&obs, &memory, rng);
        let result = env.step(action)?;
        memory.update(action, &result.observation);
        obs = result.observation;
        if result.done {
            break;
        }
    }
    let mut log = env.episode_log();
    log.summary.agent = Some(policy.name().to_string());
    Ok(log)
}

/// Runs one episode with epsilon-greedy action selection, updating `table`
/// after every step.
pub fn train_episode(
    ctx: Arc<SceneContext>,
    config: EpisodeConfig,
    table: &mut QTable,
    params: &QParams,
    epsilon: f64,
    rng: &mut dyn RngCore,
) -> Result<EpisodeLog, AgentError> {
    let decay = agent_decay(&config);
    let close = config.success_radius;
    let (mut env, obs) = Env::reset(Arc::clone(&ctx), config)?;
    let mut memory = AgentMemory::new(ctx, decay, close);
    memory.begin(&obs);
    let mut state = extract_features(&obs, &memory);
    loop {
        let action = choose_epsilon_greedy(table, &state, epsilon, rng);
        let result = env.step(action)?;
        memory.update(action, &result.observation);
        let next = extract_features(&result.observation, &memory);
        table.update(&Transition { state, action, reward: result.reward, next, done: result.done }, params);
        state = next;
        if result.done {
            break;
        }
    }
    let mut log = env.episode_log();
    log.summary.agent = Some("q".into());
    Ok(log)
}

/// Draws of the curriculum stream for one training episode.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EpisodeDraw {
    pub scene: usize,
    pub category: usize,
    pub teacher_present: bool,
}

/// Per-episode scene, target and teacher presence, all from one seeded stream.
pub fn curriculum_draws(curriculum: &Curriculum, scenes: usize, seed: u64) -> Vec<EpisodeDraw> {
    let mut rng = rng_for(seed, &[0xC0]);
    (0..curriculum.episodes)
        .map(|_| EpisodeDraw {
            scene: rng.gen_range(0..scenes),
            category: rng.gen_range(0..curriculum.train_categories.len()),
            teacher_present: rng.gen_range(0..100) < curriculum.eta_percent,
        })
        .collect()
}

/// Tabular Q-learning over the curriculum. `template` supplies everything
/// but target, teacher presence and seed. `on_episode` sees every log.
pub fn train(
    scenes: &[Arc<SceneContext>],
    curriculum: &Curriculum,
    template: &EpisodeConfig,
    params: &QParams,
    seed: u64,
    mut on_episode: impl FnMut(usize, &EpisodeLog),
) -> Result<QTable, AgentError> {
    curriculum.validate()?;
    if scenes.is_empty() {
        return Err(AgentError::Curriculum("empty scene pool".into()));
    }
    let draws = curriculum_draws(curriculum, scenes.len(), seed);
    let mut action_rng = rng_for(seed, &[0xAC]);
    let mut table = QTable::new();
    for (i, draw) in draws.iter().enumerate() {
        let config = EpisodeConfig {
            target_category: curriculum.train_categories[draw.category].clone(),
            teacher_present: draw.teacher_present,
            seed: derive_seed(seed, &[0xE9, i as u64]),
            ..template.clone()
        };
        let eps = params.epsilon(i, curriculum.episodes);
        let log = train_episode(Arc::clone(&scenes[draw.scene]), config, &mut table, params, eps, &mut action_rng)?;
        on_episode(i, &log);
    }
    Ok(table)
}

/// One evaluation episode: where, what, and how it is tagged.
#[derive(Debug, Clone)]
pub struct EvalJob {
    pub ctx: Arc<SceneContext>,
    pub config: EpisodeConfig,
    pub scene_seen: bool,
    pub object_seen: bool,
}

/// Runs jobs in parallel; results keep job order. Each job's action stream
/// is derived from its episode seed.
pub fn evaluate(jobs: &[EvalJob], policy: &dyn Policy) -> Result<Vec<EpisodeLog>, AgentError> {
    jobs.par_iter()
        .map(|job| {
            let mut rng = rng_for(job.config.seed, &[0xAC]);
            let mut log = run_episode(Arc::clone(&job.ctx), job.config.clone(), policy, &mut rng)?;
            log.summary.scene_seen = Some(job.scene_seen);
            log.summary.object_seen = Some(job.object_seen);
            Ok(log)
        })
        .collect()
}
