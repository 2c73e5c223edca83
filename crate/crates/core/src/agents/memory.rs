use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::env::{
    frame_block, read_language, Action, Feedback, FeedbackSignal, LanguageReading, Mask, Observation, SlotContent,
    WindowShape,
};
use crate::gridworld::{euclid_dist, plan_first_move, Cell, NavMove, Pose, SceneContext, GEOM_EPS};
use crate::uncertainty::{DecayParams, LikelihoodMap};

/// Agent-side episode memory: its own likelihood map built from what it
/// actually perceived, plus the current guess of where the target is.
#[derive(Debug, Clone)]
pub struct AgentMemory {
    ctx: Arc<SceneContext>,
    decay: DecayParams,
    close_within: f64,
    ledger: LikelihoodMap,
    lambda0: f64,
    believed: Option<Cell>,
    seen_ever: bool,
    since_ask: Option<usize>,
    last_ask_pose: Option<Pose>,
}

impl AgentMemory {
    /// `decay` drives the agent's own map updates; `close_within` is the
    /// distance the teacher calls "close".
    pub fn new(ctx: Arc<SceneContext>, decay: DecayParams, close_within: f64) -> Self {
        let ledger = LikelihoodMap::new(ctx.scene());
        let lambda0 = ledger.lambda();
        AgentMemory {
            ctx,
            decay,
            close_within,
            ledger,
            lambda0,
            believed: None,
            seen_ever: false,
            since_ask: None,
            last_ask_pose: None,
        }
    }

    /// Decay matching what an agent can really conclude: cells within the
    /// recognition range are settled, farther cells are untouched.
    pub fn sharp_decay(recognition_range: f64) -> DecayParams {
        DecayParams { alpha: recognition_range, beta: recognition_range + 1e-6 }
    }

    pub fn context(&self) -> &Arc<SceneContext> {
        &self.ctx
    }

    pub fn ledger(&self) -> &LikelihoodMap {
        &self.ledger
    }

    pub fn lambda0(&self) -> f64 {
        self.lambda0
    }

    pub fn believed_target(&self) -> Option<Cell> {
        self.believed
    }

    pub fn seen_ever(&self) -> bool {
        self.seen_ever
    }

    pub fn steps_since_ask(&self) -> Option<usize> {
        self.since_ask
    }

    pub fn last_ask_pose(&self) -> Option<Pose> {
        self.last_ask_pose
    }

    /// Reads the first observation of an episode. No map update happens at reset.
    pub fn begin(&mut self, obs: &Observation) {
        if let Some(cell) = recognized(obs) {
            self.locate(cell);
        }
    }

    /// Updates the memory with the observation that followed `action`.
    pub fn update(&mut self, action: Action, obs: &Observation) {
        let pose = obs.pose;
        let ctx = Arc::clone(&self.ctx);
        let view = ctx.visible(pose);
        let seen = recognized(obs);
        match action {
            Action::RotateLeft | Action::RotateRight | Action::MoveForward => {
                self.apply(|l, d| l.update_on_nav_sighted(view, pose.cell, seen, d));
            }
            Action::Ask => {
                self.since_ask = Some(0);
                self.last_ask_pose = Some(pose);
                self.absorb_feedback(obs, view, seen);
            }
            Action::Stop => {}
        }
        if action != Action::Ask {
            self.since_ask = self.since_ask.map(|n| n + 1);
        }
        if let Some(cell) = seen {
            self.locate(cell);
        }
        if let Some(b) = self.believed {
            if self.ledger.get(b).unwrap_or(0.0) <= 0.0 {
                self.believed = None;
            }
        }
        if self.ledger.values().iter().all(|v| *v <= 0.0) {
            // Contradictory evidence (noisy feedback); start over.
            self.ledger = LikelihoodMap::new(self.ctx.scene());
            self.believed = None;
        }
    }

    fn apply(
        &mut self,
        f: impl FnOnce(&mut LikelihoodMap, &DecayParams) -> Result<f64, crate::uncertainty::UncertaintyError>,
    ) {
        let decay = self.decay;
        // Views come from the scene context, so cells are always in the domain.
        f(&mut self.ledger, &decay).expect("agent views stay inside the map domain");
    }

    fn absorb_feedback(&mut self, obs: &Observation, view: &[Cell], seen: Option<Cell>) {
        let pose = obs.pose;
        let FeedbackSignal::Given(fb) = &obs.last_feedback else {
            return;
        };
        match fb {
            Feedback::Mask(mask) | Feedback::NoisyMask(mask) => {
                let located = if mask.sum() == 0 { None } else { locate_mask(&self.ctx, pose, mask, view) };
                let sighted = seen.or(located);
                self.apply(|l, d| l.update_on_ask_sighted(view, pose.cell, sighted, d));
                if let Some(c) = located {
                    self.locate(c);
                }
            }
            Feedback::Binary(1) => {
                self.apply(|l, _| l.restrict_to(view));
            }
            Feedback::Binary(_) => {
                self.apply(|l, d| l.update_on_ask_sighted(view, pose.cell, seen, d));
            }
            Feedback::Language(text) => match read_language(text) {
                Some(LanguageReading::Absent) => {
                    self.apply(|l, d| l.update_on_ask_sighted(view, pose.cell, seen, d));
                }
                Some(LanguageReading::Present { close, block }) => {
                    let shape = obs.window.shape;
                    let size = self.ctx.scene().cell_size();
                    let candidates: Vec<Cell> = view
                        .iter()
                        .copied()
                        .filter(|c| {
                            let Some((r, col)) = shape.slot_of(pose, *c) else { return false };
                            let near = euclid_dist(pose.cell, *c, size) <= self.close_within + GEOM_EPS;
                            frame_block(shape, r, col) == block && near == close
                        })
                        .collect();
                    if !candidates.is_empty() {
                        self.apply(|l, _| l.restrict_to(&candidates));
                        if candidates.len() == 1 {
                            self.locate(candidates[0]);
                        }
                    }
                }
                Some(LanguageReading::NoAsk) | None => {}
            },
        }
    }

    fn locate(&mut self, cell: Cell) {
        self.believed = Some(cell);
        self.seen_ever = true;
    }

    /// Whether stopping at `pose` succeeds if the target is at `goal`.
    pub fn stop_ready(&self, pose: Pose, goal: Cell) -> bool {
        euclid_dist(pose.cell, goal, self.ctx.scene().cell_size()) <= self.close_within + GEOM_EPS
            && self.ctx.sees(pose, goal)
    }

    /// Shortest plan toward a stopping pose for `goal`.
    pub fn plan_to(&self, pose: Pose, goal: Cell) -> Option<(u32, Option<NavMove>)> {
        plan_first_move(self.ctx.scene(), pose, |p| self.stop_ready(p, goal))
    }

    /// Direction feature toward the believed target.
    pub fn direction(&self, pose: Pose) -> u8 {
        self.believed.map_or(DIRECTION_UNKNOWN, |goal| plan_bucket(self.plan_to(pose, goal)))
    }

    /// Likelihood mass inside the view from `pose`.
    pub fn view_mass(&self, pose: Pose) -> f64 {
        self.ctx.visible(pose).iter().map(|c| self.ledger.get(*c).unwrap_or(0.0)).sum()
    }

    /// Likelihood mass a navigation look from `pose` could settle.
    pub fn near_mass(&self, pose: Pose) -> f64 {
        let size = self.ctx.scene().cell_size();
        self.ctx
            .visible(pose)
            .iter()
            .filter(|c| euclid_dist(pose.cell, **c, size) <= self.decay.beta)
            .map(|c| {
                self.ledger.get(*c).unwrap_or(0.0)
                    * crate::uncertainty::psi(euclid_dist(pose.cell, *c, size), &self.decay)
            })
            .sum()
    }
}

/// Cell holding the target category in the observation window, if recognised.
pub fn recognized(obs: &Observation) -> Option<Cell> {
    let shape = obs.window.shape;
    obs.window.seen().find_map(|(r, c, s)| match s {
        SlotContent::Object(name) if *name == obs.target_category => shape.cell_at(obs.pose, r, c),
        _ => None,
    })
}

/// Visible cell best matching a mask: the marked visible cell nearest the
/// blob centroid, else the visible cell nearest the centroid.
fn locate_mask(ctx: &SceneContext, pose: Pose, mask: &Mask, view: &[Cell]) -> Option<Cell> {
    let shape = WindowShape::new(mask.depth - 1);
    let ones: Vec<(usize, usize)> = mask.ones().collect();
    let n = ones.len() as f64;
    let cr = ones.iter().map(|(r, _)| *r as f64).sum::<f64>() / n;
    let cc = ones.iter().map(|(_, c)| *c as f64).sum::<f64>() / n;
    let score = |c: &Cell| {
        let (r, col) = shape.slot_of(pose, *c).expect("visible cells lie in the window");
        let dr = r as f64 - cr;
        let dc = col as f64 - cc;
        dr * dr + dc * dc
    };
    let marked: Vec<Cell> = ones
        .iter()
        .filter_map(|(r, c)| shape.cell_at(pose, *r, *c))
        .filter(|c| ctx.scene().contains(*c) && ctx.sees(pose, *c))
        .collect();
    let pool: &[Cell] = if marked.is_empty() { view } else { &marked };
    pool.iter().copied().min_by(|a, b| score(a).total_cmp(&score(b)).then(a.cmp(b)))
}

/// Direction block toward a located target, `row * 3 + col`, read off the
/// shortest motion plan to a pose from which stopping succeeds. Columns
/// follow the first planned move (left turn, forward, right turn); rows
/// follow the remaining move count: far (6 or more), mid (1 to 5), and
/// near for "stop here". Unreachable targets fall back to far-left.
pub fn plan_bucket(plan: Option<(u32, Option<NavMove>)>) -> u8 {
    match plan {
        Some((_, None)) => 7,
        Some((moves, Some(mv))) => {
            let row = if moves >= 6 { 0 } else { 1 };
            let col = match mv {
                NavMove::RotateLeft => 0,
                NavMove::Forward => 1,
                NavMove::RotateRight => 2,
            };
            row * 3 + col
        }
        None => 0,
    }
}

pub const DIRECTION_UNKNOWN: u8 = 9;

/// In-view likelihood mass, one cell's worth, above which an ask can still settle something.
pub const OPEN_VIEW_MASS: f64 = 1.0;

/// Discrete state used by the tabular learner.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct FeatureVector {
    pub teacher: bool,
    pub seen: bool,
    /// 0..=8 direction block, 9 unknown.
    pub direction: u8,
    /// 0..=10
    pub lambda_decile: u8,
    /// 0: asked last step, 1: one step ago, 2: two to four, 3: five or more or never.
    pub ask_bucket: u8,
    /// Bits: 1 forward, 2 left, 4 right blocked.
    pub blockage: u8,
    /// The view holds at least `OPEN_VIEW_MASS` of unresolved likelihood.
    pub open_view: bool,
}

impl FeatureVector {
    pub const STATES: usize = 2 * 2 * 10 * 11 * 4 * 8 * 2;

    pub fn index(&self) -> usize {
        let mut i = self.teacher as usize;
        i = i * 2 + self.seen as usize;
        i = i * 10 + self.direction as usize;
        i = i * 11 + self.lambda_decile as usize;
        i = i * 4 + self.ask_bucket as usize;
        i = i * 8 + self.blockage as usize;
        i * 2 + self.open_view as usize
    }

    pub fn from_index(mut i: usize) -> FeatureVector {
        let open_view = i % 2 == 1;
        i /= 2;
        let blockage = (i % 8) as u8;
        i /= 8;
        let ask_bucket = (i % 4) as u8;
        i /= 4;
        let lambda_decile = (i % 11) as u8;
        i /= 11;
        let direction = (i % 10) as u8;
        i /= 10;
        let seen = i % 2 == 1;
        i /= 2;
        FeatureVector { teacher: i == 1, seen, direction, lambda_decile, ask_bucket, blockage, open_view }
    }

    pub fn is_valid(&self) -> bool {
        self.direction <= 9 && self.lambda_decile <= 10 && self.ask_bucket <= 3 && self.blockage <= 7
    }
}

pub fn extract_features(obs: &Observation, memory: &AgentMemory) -> FeatureVector {
    let pose = obs.pose;
    let direction = memory.direction(pose);
    let lambda0 = memory.lambda0();
    let lambda_decile = if lambda0 > 0.0 {
        ((10.0 * memory.ledger().lambda() / lambda0 + 1e-9).floor() as i64).clamp(0, 10) as u8
    } else {
        0
    };
    let ask_bucket = match memory.steps_since_ask() {
        Some(0) => 0,
        Some(1) => 1,
        Some(2..=4) => 2,
        _ => 3,
    };
    let scene = memory.context().scene();
    let blocked_towards = |h: crate::gridworld::Heading| scene.ahead(Pose::new(pose.cell, h)).is_none();
    let blockage = blocked_towards(pose.heading) as u8
        | (blocked_towards(pose.heading.rotate_left()) as u8) << 1
        | (blocked_towards(pose.heading.rotate_right()) as u8) << 2;
    FeatureVector {
        teacher: obs.teacher_present,
        seen: memory.seen_ever(),
        direction,
        lambda_decile,
        ask_bucket,
        blockage,
        open_view: memory.view_mass(pose) >= OPEN_VIEW_MASS,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn feature_index_roundtrip() {
        for i in [0, 1, 77, 5000, FeatureVector::STATES - 1] {
            let f = FeatureVector::from_index(i);
            assert!(f.is_valid());
            assert_eq!(f.index(), i);
        }
    }

    #[test]
    fn plan_buckets() {
        assert_eq!(plan_bucket(Some((0, None))), 7);
        assert_eq!(plan_bucket(Some((2, Some(NavMove::Forward)))), 4);
        assert_eq!(plan_bucket(Some((9, Some(NavMove::RotateLeft)))), 0);
        assert_eq!(plan_bucket(Some((5, Some(NavMove::RotateRight)))), 5);
        assert_eq!(plan_bucket(None), 0);
    }
}
