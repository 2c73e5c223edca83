use serde::{Deserialize, Serialize};

use super::memory::AgentMemory;
use super::Policy;
use crate::env::{Action, Observation};
use crate::gridworld::{euclid_dist, plan_first_move, pose_distances, Cell, NavMove, Pose, GEOM_EPS};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeuristicParams {
    /// Minimum in-view likelihood mass that makes an ask worthwhile.
    pub ask_threshold: f64,
    /// Below this fraction of the initial lambda the agent heads for the argmax.
    pub commit_fraction: f64,
    pub success_radius: f64,
}

impl Default for HeuristicParams {
    fn default() -> Self {
        HeuristicParams { ask_threshold: 2.0, commit_fraction: 0.1, success_radius: 1.0 }
    }
}

/// Scripted agent planning over its own likelihood map.
#[derive(Debug, Clone, Default)]
pub struct HeuristicPolicy {
    pub params: HeuristicParams,
}

fn to_action(mv: NavMove) -> Action {
    match mv {
        NavMove::RotateLeft => Action::RotateLeft,
        NavMove::RotateRight => Action::RotateRight,
        NavMove::Forward => Action::MoveForward,
    }
}

impl HeuristicPolicy {
    pub fn new(params: HeuristicParams) -> Self {
        HeuristicPolicy { params }
    }

    pub fn plan(&self, obs: &Observation, memory: &AgentMemory) -> Action {
        let ctx = memory.context();
        let scene = ctx.scene();
        let pose = obs.pose;
        let radius = self.params.success_radius;
        let good_spot = |p: Pose, goal: Cell| {
            euclid_dist(p.cell, goal, scene.cell_size()) <= radius + GEOM_EPS && ctx.sees(p, goal)
        };

        if let Some(goal) = memory.believed_target() {
            if good_spot(pose, goal) {
                return Action::Stop;
            }
            if let Some((_, Some(mv))) = plan_first_move(scene, pose, |p| good_spot(p, goal)) {
                return to_action(mv);
            }
        }

        if obs.teacher_present
            && memory.last_ask_pose() != Some(pose)
            && memory.view_mass(pose) >= self.params.ask_threshold
        {
            return Action::Ask;
        }

        let ledger = memory.ledger();
        if ledger.lambda() < self.params.commit_fraction * memory.lambda0() {
            let goal = ledger.argmax();
            // Get close enough to recognise it; arrival settles the cell either way.
            if let Some((_, Some(mv))) = plan_first_move(scene, pose, |p| good_spot(p, goal)) {
                return to_action(mv);
            }
        }

        // Best gain per step over every reachable pose.
        let dist = pose_distances(scene, pose);
        let width = scene.width();
        let mut best: Option<(f64, usize)> = None;
        for (i, d) in dist.iter().enumerate() {
            let Some(d) = d else { continue };
            let p = Pose::from_state_index(i, width);
            let askable = obs.teacher_present && memory.last_ask_pose() != Some(p);
            let gain = match memory.view_mass(p) {
                m if askable && m >= self.params.ask_threshold => m,
                _ => memory.near_mass(p),
            };
            let score = gain / (*d as f64 + 1.0);
            if score > 0.0 && best.is_none_or(|(s, _)| score > s + 1e-12) {
                best = Some((score, i));
            }
        }
        if let Some((_, i)) = best {
            let target = Pose::from_state_index(i, width);
            if let Some((_, Some(mv))) = plan_first_move(scene, pose, |p| p == target) {
                return to_action(mv);
            }
            // Already at the best pose: look around.
            return Action::RotateLeft;
        }
        Action::RotateLeft
    }
}

impl Policy for HeuristicPolicy {
    fn name(&self) -> &str {
        "heuristic"
    }

    fn act(&self, obs: &Observation, memory: &AgentMemory, _rng: &mut dyn rand::RngCore) -> Action {
        self.plan(obs, memory)
    }
}
