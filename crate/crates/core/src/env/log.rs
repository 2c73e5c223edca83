//! JSON-Lines episode logs: one `step` record per action followed by one
//! `episode` trailer.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::feedback::{FeedbackKind, FeedbackVariant};
use super::{Action, ActionClass, EnvError};
use crate::gridworld::{Cell, Pose, SceneContext};
use crate::uncertainty::{DecayParams, LikelihoodMap};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    /// 1-based step index.
    pub t: usize,
    pub action: Action,
    /// Pose after the action.
    pub pose: Pose,
    pub reward: f64,
    pub lambda: f64,
    pub delta_lambda: f64,
    pub action_class: ActionClass,
    pub teacher_present: bool,
    pub feedback_kind: FeedbackKind,
    pub asked: bool,
    pub target_in_view: bool,
    /// Row-major likelihoods after the step, when map capture is enabled.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub map: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Success,
    Failure,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeSummary {
    pub schema: u32,
    pub outcome: Outcome,
    pub steps: usize,
    pub shortest_path_len: Option<u32>,
    pub scene_id: String,
    pub target: String,
    pub target_cell: Cell,
    pub seed: u64,
    pub lambda_0: f64,
    pub teacher_present: bool,
    pub feedback: FeedbackVariant,
    pub total_reward: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scene_seen: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub object_seen: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub agent: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config_hash: Option<String>,
}

impl EpisodeSummary {
    pub fn success(&self) -> bool {
        self.outcome == Outcome::Success
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeLog {
    pub steps: Vec<StepRecord>,
    pub summary: EpisodeSummary,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum LogLine {
    Step(StepRecord),
    Episode(EpisodeSummary),
}

pub fn write_episode<W: Write>(out: &mut W, log: &EpisodeLog) -> Result<(), EnvError> {
    let io = |e: std::io::Error| EnvError::Log(e.to_string());
    for step in &log.steps {
        serde_json::to_writer(&mut *out, &LogLine::Step(step.clone())).map_err(|e| EnvError::Log(e.to_string()))?;
        out.write_all(b"\n").map_err(io)?;
    }
    serde_json::to_writer(&mut *out, &LogLine::Episode(log.summary.clone()))
        .map_err(|e| EnvError::Log(e.to_string()))?;
    out.write_all(b"\n").map_err(io)
}

/// Parses a JSON-Lines stream into episodes, checking schema version and
/// that each trailer's step count matches its records.
pub fn read_episodes<R: BufRead>(input: R) -> Result<Vec<EpisodeLog>, EnvError> {
    let mut episodes = Vec::new();
    let mut pending = Vec::new();
    for (n, line) in input.lines().enumerate() {
        let line = line.map_err(|e| EnvError::Log(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed: LogLine = serde_json::from_str(&line).map_err(|e| EnvError::Log(format!("line {}: {e}", n + 1)))?;
        match parsed {
            LogLine::Step(step) => pending.push(step),
            LogLine::Episode(summary) => {
                if summary.schema != SCHEMA_VERSION {
                    return Err(EnvError::Schema { found: summary.schema, expected: SCHEMA_VERSION });
                }
                if summary.steps != pending.len() {
                    return Err(EnvError::Log(format!(
                        "line {}: trailer reports {} steps, found {}",
                        n + 1,
                        summary.steps,
                        pending.len()
                    )));
                }
                episodes.push(EpisodeLog { steps: std::mem::take(&mut pending), summary });
            }
        }
    }
    if !pending.is_empty() {
        return Err(EnvError::Log(format!("{} step records without an episode trailer", pending.len())));
    }
    Ok(episodes)
}

/// Ledger state recomputed from a log's poses and actions.
#[derive(Debug, Clone)]
pub struct LedgerReplay {
    /// `(lambda, delta_lambda)` after each step.
    pub per_step: Vec<(f64, f64)>,
    /// Map after `upto` steps.
    pub map: LikelihoodMap,
}

/// Replays the ledger of `log` on `ctx` for the first `upto` steps (all
/// steps when `None`). Navigation actions apply the navigation update at
/// the logged pose; asks answered by a present teacher apply the ask update.
pub fn replay_ledger(
    ctx: &SceneContext,
    log: &EpisodeLog,
    decay: &DecayParams,
    upto: Option<usize>,
) -> Result<LedgerReplay, EnvError> {
    let upto = upto.unwrap_or(log.steps.len());
    if upto > log.steps.len() {
        return Err(EnvError::StepOutOfRange { step: upto, steps: log.steps.len() });
    }
    let mut map = LikelihoodMap::new(ctx.scene());
    let target = log.summary.target_cell;
    let mut per_step = Vec::with_capacity(upto);
    for record in &log.steps[..upto] {
        let view = ctx.visible(record.pose);
        let delta = match record.action {
            Action::RotateLeft | Action::RotateRight | Action::MoveForward => {
                map.update_on_nav(view, record.pose.cell, target, decay)?
            }
            Action::Ask if record.teacher_present => map.update_on_ask(view, record.pose.cell, target, decay)?,
            Action::Ask | Action::Stop => 0.0,
        };
        per_step.push((map.lambda(), delta));
    }
    Ok(LedgerReplay { per_step, map })
}
