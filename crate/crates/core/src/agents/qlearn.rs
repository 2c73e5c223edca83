use std::fmt::Write as _;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::memory::{extract_features, AgentMemory, FeatureVector};
use super::{AgentError, Policy};
use crate::env::{Action, Observation};

pub const CHECKPOINT_HEADER: &str = "asknav-qtable";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QParams {
    pub learning_rate: f64,
    pub discount: f64,
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    /// Fraction of training over which epsilon decays linearly.
    pub decay_fraction: f64,
}

impl Default for QParams {
    fn default() -> Self {
        QParams { learning_rate: 0.1, discount: 0.99, epsilon_start: 1.0, epsilon_end: 0.05, decay_fraction: 0.5 }
    }
}

impl QParams {
    pub fn epsilon(&self, episode: usize, total: usize) -> f64 {
        let span = (total as f64 * self.decay_fraction).max(1.0);
        let t = (episode as f64 / span).min(1.0);
        self.epsilon_start + (self.epsilon_end - self.epsilon_start) * t
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition {
    pub state: FeatureVector,
    pub action: Action,
    pub reward: f64,
    pub next: FeatureVector,
    pub done: bool,
}

/// Dense action-value table over every feature state; unvisited entries are 0.
#[derive(Debug, Clone, PartialEq)]
pub struct QTable {
    values: Vec<f64>,
}

impl Default for QTable {
    fn default() -> Self {
        Self::new()
    }
}

impl QTable {
    pub fn new() -> Self {
        QTable { values: vec![0.0; FeatureVector::STATES * Action::COUNT] }
    }

    pub fn get(&self, state: &FeatureVector, action: Action) -> f64 {
        self.values[state.index() * Action::COUNT + action.index()]
    }

    pub fn set(&mut self, state: &FeatureVector, action: Action, value: f64) {
        self.values[state.index() * Action::COUNT + action.index()] = value;
    }

    pub fn row(&self, state: &FeatureVector) -> &[f64] {
        let i = state.index() * Action::COUNT;
        &self.values[i..i + Action::COUNT]
    }

    /// Highest-valued action; ties go to the lowest action index.
    pub fn greedy(&self, state: &FeatureVector) -> Action {
        let row = self.row(state);
        let mut best = 0;
        for (i, v) in row.iter().enumerate().skip(1) {
            if *v > row[best] {
                best = i;
            }
        }
        Action::from_index(best)
    }

    pub fn max_value(&self, state: &FeatureVector) -> f64 {
        self.row(state).iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn update(&mut self, t: &Transition, params: &QParams) {
        let future = if t.done { 0.0 } else { params.discount * self.max_value(&t.next) };
        let q = self.get(&t.state, t.action);
        self.set(&t.state, t.action, q + params.learning_rate * (t.reward + future - q));
    }

    pub fn nonzero(&self) -> usize {
        self.values.iter().filter(|v| **v != 0.0).count()
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("{CHECKPOINT_HEADER} v{CHECKPOINT_VERSION}\n");
        out.push_str("# (teacher,seen,direction,lambda_decile,ask_bucket,blockage,open_view) action value\n");
        for (i, v) in self.values.iter().enumerate() {
            if *v == 0.0 {
                continue;
            }
            let f = FeatureVector::from_index(i / Action::COUNT);
            let a = Action::from_index(i % Action::COUNT);
            writeln!(
                out,
                "({},{},{},{},{},{},{}) {} {:e}",
                f.teacher as u8,
                f.seen as u8,
                f.direction,
                f.lambda_decile,
                f.ask_bucket,
                f.blockage,
                f.open_view as u8,
                a,
                v
            )
            .expect("writing to a String cannot fail");
        }
        out
    }

    pub fn from_text(text: &str) -> Result<QTable, AgentError> {
        let mut lines = text.lines().enumerate();
        let header = lines.next().map(|(_, l)| l.trim()).unwrap_or("");
        let version = header
            .strip_prefix(CHECKPOINT_HEADER)
            .and_then(|rest| rest.trim().strip_prefix('v'))
            .and_then(|v| v.parse::<u32>().ok())
            .ok_or_else(|| AgentError::Checkpoint { line: 1, msg: format!("bad header `{header}`") })?;
        if version != CHECKPOINT_VERSION {
            return Err(AgentError::CheckpointVersion { found: version, expected: CHECKPOINT_VERSION });
        }
        let mut table = QTable::new();
        for (n, line) in lines {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let bad = |msg: String| AgentError::Checkpoint { line: n + 1, msg };
            let (tuple, rest) = line
                .strip_prefix('(')
                .and_then(|l| l.split_once(')'))
                .ok_or_else(|| bad("expected `(feature tuple)`".into()))?;
            let parts: Vec<u8> = tuple
                .split(',')
                .map(|p| p.trim().parse::<u8>())
                .collect::<Result<_, _>>()
                .map_err(|e| bad(format!("feature tuple: {e}")))?;
            let [t, s, d, l, a, b, o] = parts[..] else {
                return Err(bad(format!("feature tuple has {} fields, expected 7", parts.len())));
            };
            if t > 1 || s > 1 || o > 1 {
                return Err(bad("teacher, seen and open_view must be 0 or 1".into()));
            }
            let state = FeatureVector {
                teacher: t == 1,
                seen: s == 1,
                direction: d,
                lambda_decile: l,
                ask_bucket: a,
                blockage: b,
                open_view: o == 1,
            };
            if !state.is_valid() {
                return Err(bad(format!("feature tuple ({tuple}) out of range")));
            }
            let mut fields = rest.split_whitespace();
            let action: Action = fields.next().ok_or_else(|| bad("missing action".into()))?.parse().map_err(bad)?;
            let value: f64 = fields
                .next()
                .ok_or_else(|| bad("missing value".into()))?
                .parse()
                .map_err(|e| bad(format!("value: {e}")))?;
            if !value.is_finite() || fields.next().is_some() {
                return Err(bad("expected one finite value".into()));
            }
            table.set(&state, action, value);
        }
        Ok(table)
    }
}

/// Evaluation policy over a Q-table: greedy, except that with probability
/// `epsilon` it takes a uniformly random non-Stop action. The random branch
/// breaks the cycles a deterministic policy falls into on aliased states
/// without ever ending an episode by chance.
#[derive(Debug, Clone)]
pub struct QPolicy {
    pub table: QTable,
    pub epsilon: f64,
}

/// Default evaluation epsilon, equal to the final training epsilon.
pub const EVAL_EPSILON: f64 = 0.05;

impl QPolicy {
    pub fn greedy(table: QTable) -> Self {
        QPolicy { table, epsilon: 0.0 }
    }

    pub fn new(table: QTable) -> Self {
        QPolicy { table, epsilon: EVAL_EPSILON }
    }

    pub fn choose<R: Rng + ?Sized>(&self, state: &FeatureVector, rng: &mut R) -> Action {
        if self.epsilon > 0.0 && rng.gen::<f64>() < self.epsilon {
            const MOVES: [Action; 4] = [Action::RotateLeft, Action::RotateRight, Action::MoveForward, Action::Ask];
            MOVES[rng.gen_range(0..MOVES.len())]
        } else {
            self.table.greedy(state)
        }
    }
}

pub fn choose_epsilon_greedy<R: Rng + ?Sized>(
    table: &QTable,
    state: &FeatureVector,
    epsilon: f64,
    rng: &mut R,
) -> Action {
    if epsilon > 0.0 && rng.gen::<f64>() < epsilon {
        Action::from_index(rng.gen_range(0..Action::COUNT))
    } else {
        table.greedy(state)
    }
}

impl Policy for QPolicy {
    fn name(&self) -> &str {
        "q"
    }

    fn act(&self, obs: &Observation, memory: &AgentMemory, rng: &mut dyn rand::RngCore) -> Action {
        self.choose(&extract_features(obs, memory), rng)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn state(i: usize) -> FeatureVector {
        FeatureVector::from_index(i)
    }

    #[test]
    fn terminal_update_arithmetic() {
        let mut q = QTable::new();
        let t = Transition { state: state(3), action: Action::Stop, reward: 10.0, next: state(4), done: true };
        q.update(&t, &QParams::default());
        assert_eq!(q.get(&state(3), Action::Stop), 1.0);
    }

    #[test]
    fn ties_pick_lowest_index() {
        let mut q = QTable::new();
        assert_eq!(q.greedy(&state(0)), Action::RotateLeft);
        q.set(&state(0), Action::MoveForward, 1.0);
        q.set(&state(0), Action::Ask, 1.0);
        assert_eq!(q.greedy(&state(0)), Action::MoveForward);
    }

    #[test]
    fn checkpoint_roundtrip() {
        let mut q = QTable::new();
        q.set(&state(17), Action::Ask, -0.123456789012345);
        q.set(&state(14079), Action::Stop, 9.5);
        let text = q.to_text();
        assert_eq!(QTable::from_text(&text).unwrap(), q);
        let bumped = text.replacen("v1", "v2", 1);
        assert!(matches!(QTable::from_text(&bumped), Err(AgentError::CheckpointVersion { found: 2, .. })));
        let broken = format!("{text}(1,2,3) stop 1.0\n");
        assert!(matches!(QTable::from_text(&broken), Err(AgentError::Checkpoint { .. })));
    }

    #[test]
    fn epsilon_schedule() {
        let p = QParams::default();
        assert_eq!(p.epsilon(0, 100), 1.0);
        assert!((p.epsilon(25, 100) - 0.525).abs() < 1e-12);
        assert!((p.epsilon(50, 100) - 0.05).abs() < 1e-12);
        assert!((p.epsilon(99, 100) - 0.05).abs() < 1e-12);
    }
}
