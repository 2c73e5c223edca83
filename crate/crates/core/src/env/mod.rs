//! Episode state machine: navigation, the ask action, teacher feedback and
//! the environment-side uncertainty ledger.

mod feedback;
mod log;
mod window;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use feedback::{
    frame_block, frame_position, ground_truth_mask, language_feedback, language_no_ask, make_feedback,
    not_asked_feedback, perturb_mask, read_language, Feedback, FeedbackKind, FeedbackSignal, FeedbackVariant,
    LanguageReading, NoiseParams, TargetView, POSITIONS,
};
pub use log::{
    read_episodes, replay_ledger, write_episode, EpisodeLog, EpisodeSummary, LedgerReplay, Outcome, StepRecord,
    SCHEMA_VERSION,
};
pub use window::{Mask, SlotContent, ViewWindow, WindowShape};

use crate::gridworld::{
    euclid_dist, plan_first_move, visible_cells, Cell, FovParams, GridScene, ObjectPlacement, Pose, SceneContext,
    SceneError, GEOM_EPS,
};
use crate::seeding::rng_for;
use crate::uncertainty::{DecayParams, LikelihoodMap, UncertaintyError};

#[derive(Debug, Error)]
pub enum EnvError {
    #[error("unknown target category `{0}`")]
    UnknownCategory(String),
    #[error("episode is done; no further steps accepted")]
    EpisodeDone,
    #[error("invalid episode config: {0}")]
    InvalidConfig(String),
    #[error("step {step} out of range for an episode of {steps} steps")]
    StepOutOfRange { step: usize, steps: usize },
    #[error("log schema version {found} does not match {expected}")]
    Schema { found: u32, expected: u32 },
    #[error("log error: {0}")]
    Log(String),
    #[error(transparent)]
    Scene(#[from] SceneError),
    #[error(transparent)]
    Uncertainty(#[from] UncertaintyError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Action {
    RotateLeft = 0,
    RotateRight = 1,
    MoveForward = 2,
    Stop = 3,
    Ask = 4,
}

impl Action {
    pub const ALL: [Action; 5] =
        [Action::RotateLeft, Action::RotateRight, Action::MoveForward, Action::Stop, Action::Ask];
    pub const COUNT: usize = 5;

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Action {
        Self::ALL[i]
    }

    pub fn class(self) -> ActionClass {
        match self {
            Action::RotateLeft | Action::RotateRight | Action::MoveForward => ActionClass::Nav,
            Action::Ask => ActionClass::Ask,
            Action::Stop => ActionClass::Terminal,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Action::RotateLeft => "rotate_left",
            Action::RotateRight => "rotate_right",
            Action::MoveForward => "move_forward",
            Action::Stop => "stop",
            Action::Ask => "ask",
        }
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Action {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Action::ALL.into_iter().find(|a| a.name() == s).ok_or_else(|| format!("unknown action `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActionClass {
    Nav,
    Ask,
    Terminal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeConfig {
    pub target_category: String,
    pub teacher_present: bool,
    pub feedback_variant: FeedbackVariant,
    pub max_steps: usize,
    pub success_radius: f64,
    pub step_penalty: f64,
    pub success_reward: f64,
    /// Extra cost per ask on top of the step penalty.
    pub ask_penalty: f64,
    pub seed: u64,
    /// Re-place every object on a random free cell at reset.
    pub randomize_objects: bool,
    /// Objects farther than this are shown as plain floor in the window.
    pub recognition_range: f64,
    pub decay: DecayParams,
    pub noise: NoiseParams,
    /// Attach the full likelihood map to every step record.
    pub store_maps: bool,
}

impl Default for EpisodeConfig {
    fn default() -> Self {
        EpisodeConfig {
            target_category: "apple".into(),
            teacher_present: true,
            feedback_variant: FeedbackVariant::Mask,
            max_steps: 500,
            success_radius: 1.0,
            step_penalty: -0.01,
            success_reward: 10.0,
            ask_penalty: 0.0,
            seed: 0,
            randomize_objects: true,
            recognition_range: 1.0,
            decay: DecayParams::default(),
            noise: NoiseParams::default(),
            store_maps: false,
        }
    }
}

impl EpisodeConfig {
    pub fn validate(&self, scene: &GridScene) -> Result<(), EnvError> {
        if scene.object(&self.target_category).is_none() {
            return Err(EnvError::UnknownCategory(self.target_category.clone()));
        }
        if self.max_steps == 0 {
            return Err(EnvError::InvalidConfig("max_steps must be at least 1".into()));
        }
        if self.success_radius.is_nan() || self.success_radius < 0.0 {
            return Err(EnvError::InvalidConfig(format!("success radius {}", self.success_radius)));
        }
        DecayParams::new(self.decay.alpha, self.decay.beta)?;
        let n = &self.noise;
        if !(0.0 < n.scale_min && n.scale_min <= n.scale_max && n.scale_max <= 1.0) || n.jitter_cells < 0 {
            return Err(EnvError::InvalidConfig(format!("noise parameters {n:?}")));
        }
        Ok(())
    }
}

/// What the agent receives after reset and after every step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    /// Agent localization (position and compass heading).
    pub pose: Pose,
    pub window: ViewWindow,
    pub target_category: String,
    pub teacher_present: bool,
    pub last_feedback: FeedbackSignal,
    pub steps: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepInfo {
    pub success: bool,
    pub lambda: f64,
    pub delta_lambda: f64,
    pub action_class: ActionClass,
    pub target_in_view: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub observation: Observation,
    pub reward: f64,
    pub done: bool,
    pub info: StepInfo,
}

/// Success test: within `success_radius` of the target and the target in view.
pub fn is_success(scene: &GridScene, pose: Pose, target: Cell, success_radius: f64, fov: &FovParams) -> bool {
    euclid_dist(pose.cell, target, scene.cell_size()) <= success_radius + GEOM_EPS
        && visible_cells(scene, pose, fov).contains(&target)
}

/// Builds the egocentric window for `pose` given the episode's object placements.
pub fn build_window(
    ctx: &SceneContext,
    objects: &BTreeMap<String, ObjectPlacement>,
    pose: Pose,
    recognition_range: f64,
) -> ViewWindow {
    let scene = ctx.scene();
    let shape = WindowShape::new(ctx.fov().range_cells(scene.cell_size()));
    let mut window = ViewWindow::unseen(shape);
    for cell in ctx.visible(pose) {
        if let Some((r, c)) = shape.slot_of(pose, *cell) {
            window.set(r, c, SlotContent::Free);
        }
    }
    for cell in ctx.walls(pose) {
        if let Some((r, c)) = shape.slot_of(pose, *cell) {
            window.set(r, c, SlotContent::Blocked);
        }
    }
    for (category, placement) in objects {
        if euclid_dist(pose.cell, placement.cell, scene.cell_size()) > recognition_range + GEOM_EPS {
            continue;
        }
        if !ctx.sees(pose, placement.cell) {
            continue;
        }
        if let Some((r, c)) = shape.slot_of(pose, placement.cell) {
            window.set(r, c, SlotContent::Object(category.clone()));
        }
    }
    window
}

/// One episode. Strictly sequential; independent instances may run in parallel.
pub struct Env {
    ctx: Arc<SceneContext>,
    config: EpisodeConfig,
    objects: BTreeMap<String, ObjectPlacement>,
    target: Cell,
    target_color: String,
    pose: Pose,
    map: LikelihoodMap,
    lambda0: f64,
    steps: usize,
    done: bool,
    success: bool,
    total_reward: f64,
    shortest: Option<u32>,
    noise_rng: ChaCha8Rng,
    records: Vec<StepRecord>,
}

impl Env {
    /// Starts an episode at the scene's start pose with a fresh likelihood map.
    pub fn reset(ctx: Arc<SceneContext>, config: EpisodeConfig) -> Result<(Env, Observation), EnvError> {
        let scene = ctx.scene();
        config.validate(scene)?;
        let objects = if config.randomize_objects {
            let mut rng = rng_for(config.seed, &[0]);
            let mut cells: Vec<Cell> = scene.free_cells().filter(|c| *c != scene.start().cell).collect();
            cells.shuffle(&mut rng);
            scene
                .objects()
                .iter()
                .zip(cells)
                .map(|((name, p), cell)| (name.clone(), ObjectPlacement { cell, color: p.color.clone() }))
                .collect()
        } else {
            scene.objects().clone()
        };
        let placement = &objects[&config.target_category];
        let target = placement.cell;
        let target_color = placement.color.clone();
        let start = scene.start();
        let radius = config.success_radius;
        let shortest = plan_first_move(scene, start, |pose| {
            euclid_dist(pose.cell, target, scene.cell_size()) <= radius + GEOM_EPS && ctx.sees(pose, target)
        })
        .map(|(d, _)| d);
        let map = LikelihoodMap::new(scene);
        let lambda0 = map.lambda();
        let noise_rng = rng_for(config.seed, &[1]);
        let env = Env {
            ctx,
            config,
            objects,
            target,
            target_color,
            pose: start,
            map,
            lambda0,
            steps: 0,
            done: false,
            success: false,
            total_reward: 0.0,
            shortest,
            noise_rng,
            records: Vec::new(),
        };
        let obs = env.observation(FeedbackSignal::Absent);
        Ok((env, obs))
    }

    fn observation(&self, last_feedback: FeedbackSignal) -> Observation {
        Observation {
            pose: self.pose,
            window: build_window(&self.ctx, &self.objects, self.pose, self.config.recognition_range),
            target_category: self.config.target_category.clone(),
            teacher_present: self.config.teacher_present,
            last_feedback,
            steps: self.steps,
        }
    }

    pub fn step(&mut self, action: Action) -> Result<StepResult, EnvError> {
        if self.done {
            return Err(EnvError::EpisodeDone);
        }
        self.steps += 1;
        let mut reward = self.config.step_penalty;
        let scene = self.ctx.scene();
        let decay = self.config.decay;
        let mut asked = false;
        let mut window = None;
        let mut signal = if self.config.teacher_present {
            not_asked_feedback(self.config.feedback_variant, &self.config.target_category)
        } else {
            FeedbackSignal::Absent
        };
        let delta = match action {
            Action::RotateLeft | Action::RotateRight | Action::MoveForward => {
                self.pose = match action {
                    Action::RotateLeft => Pose::new(self.pose.cell, self.pose.heading.rotate_left()),
                    Action::RotateRight => Pose::new(self.pose.cell, self.pose.heading.rotate_right()),
                    _ => match scene.ahead(self.pose) {
                        Some(cell) => Pose::new(cell, self.pose.heading),
                        None => self.pose,
                    },
                };
                self.map.update_on_nav(self.ctx.visible(self.pose), self.pose.cell, self.target, &decay)?
            }
            Action::Stop => {
                self.done = true;
                self.success = euclid_dist(self.pose.cell, self.target, scene.cell_size())
                    <= self.config.success_radius + GEOM_EPS
                    && self.ctx.sees(self.pose, self.target);
                if self.success {
                    reward += self.config.success_reward;
                }
                0.0
            }
            Action::Ask => {
                asked = true;
                reward += self.config.ask_penalty;
                if self.config.teacher_present {
                    let w = build_window(&self.ctx, &self.objects, self.pose, self.config.recognition_range);
                    let slot = if self.ctx.sees(self.pose, self.target) {
                        w.shape.slot_of(self.pose, self.target)
                    } else {
                        None
                    };
                    let view = TargetView {
                        category: &self.config.target_category,
                        color: &self.target_color,
                        slot,
                        dist: euclid_dist(self.pose.cell, self.target, scene.cell_size()),
                        close_within: self.config.success_radius,
                    };
                    let fb =
                        make_feedback(self.config.feedback_variant, &w, &view, &self.config.noise, &mut self.noise_rng);
                    signal = FeedbackSignal::Given(fb);
                    window = Some(w);
                    self.map.update_on_ask(self.ctx.visible(self.pose), self.pose.cell, self.target, &decay)?
                } else {
                    signal = FeedbackSignal::Absent;
                    0.0
                }
            }
        };
        if !self.done && self.steps >= self.config.max_steps {
            self.done = true;
        }
        self.total_reward += reward;
        let lambda = self.map.lambda();
        let target_in_view = self.ctx.sees(self.pose, self.target);
        self.records.push(StepRecord {
            t: self.steps,
            action,
            pose: self.pose,
            reward,
            lambda,
            delta_lambda: delta,
            action_class: action.class(),
            teacher_present: self.config.teacher_present,
            feedback_kind: signal.kind(),
            asked,
            target_in_view,
            map: self.config.store_maps.then(|| self.map.values().to_vec()),
        });
        let mut observation = match window {
            Some(w) => Observation {
                pose: self.pose,
                window: w,
                target_category: self.config.target_category.clone(),
                teacher_present: self.config.teacher_present,
                last_feedback: FeedbackSignal::Absent,
                steps: self.steps,
            },
            None => self.observation(FeedbackSignal::Absent),
        };
        observation.last_feedback = signal;
        Ok(StepResult {
            observation,
            reward,
            done: self.done,
            info: StepInfo {
                success: self.success,
                lambda,
                delta_lambda: delta,
                action_class: action.class(),
                target_in_view,
            },
        })
    }

    pub fn context(&self) -> &Arc<SceneContext> {
        &self.ctx
    }

    pub fn config(&self) -> &EpisodeConfig {
        &self.config
    }

    pub fn pose(&self) -> Pose {
        self.pose
    }

    pub fn target_cell(&self) -> Cell {
        self.target
    }

    pub fn objects(&self) -> &BTreeMap<String, ObjectPlacement> {
        &self.objects
    }

    pub fn likelihood(&self) -> &LikelihoodMap {
        &self.map
    }

    pub fn lambda(&self) -> f64 {
        self.map.lambda()
    }

    pub fn lambda0(&self) -> f64 {
        self.lambda0
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn is_done(&self) -> bool {
        self.done
    }

    pub fn shortest_path_len(&self) -> Option<u32> {
        self.shortest
    }

    pub fn records(&self) -> &[StepRecord] {
        &self.records
    }

    /// Per-step records plus trailer. Valid at any point; the outcome is a
    /// failure unless the episode ended with a successful stop.
    pub fn episode_log(&self) -> EpisodeLog {
        EpisodeLog {
            steps: self.records.clone(),
            summary: EpisodeSummary {
                schema: SCHEMA_VERSION,
                outcome: if self.success { Outcome::Success } else { Outcome::Failure },
                steps: self.steps,
                shortest_path_len: self.shortest,
                scene_id: self.ctx.scene().id().to_string(),
                target: self.config.target_category.clone(),
                target_cell: self.target,
                seed: self.config.seed,
                lambda_0: self.lambda0,
                teacher_present: self.config.teacher_present,
                feedback: self.config.feedback_variant,
                total_reward: self.total_reward,
                scene_seen: None,
                object_seen: None,
                agent: None,
                config_hash: None,
            },
        }
    }
}
