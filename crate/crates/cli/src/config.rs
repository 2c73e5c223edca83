//! Flat `key = value` run configuration. Later sources win: defaults, then
//! the config file, then command-line flags.

use std::collections::BTreeMap;
use std::path::PathBuf;

use asknav_core::agents::{Curriculum, QParams};
use asknav_core::env::{EpisodeConfig, FeedbackVariant};
use asknav_core::gridworld::{ObjectCategory, SceneParams};
use asknav_core::metrics::TaxonomyParams;
use asknav_core::uncertainty::DecayParams;
use sha2::{Digest, Sha256};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AgentKind {
    Q,
    Heuristic,
    Random,
}

impl AgentKind {
    pub fn name(self) -> &'static str {
        match self {
            AgentKind::Q => "q",
            AgentKind::Heuristic => "heuristic",
            AgentKind::Random => "random",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub seed: u64,
    pub out: PathBuf,
    pub train_scenes: usize,
    pub test_scenes: usize,
    pub width: usize,
    pub height: usize,
    pub obstacle_density: f64,
    pub eta: u32,
    pub feedback: FeedbackVariant,
    pub episodes: usize,
    pub train_categories: Vec<String>,
    pub eval_categories: Vec<String>,
    pub decay: DecayParams,
    pub taxonomy: TaxonomyParams,
    pub max_steps: usize,
    pub q: QParams,
    pub full_train_logs: bool,
    pub eval_episodes: usize,
    pub eval_epsilon: f64,
    pub store_maps: bool,
    pub teacher_present: bool,
    pub agent: AgentKind,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            out: PathBuf::from("runs"),
            train_scenes: 10,
            test_scenes: 5,
            width: 8,
            height: 8,
            obstacle_density: SceneParams::default().obstacle_density,
            eta: 0,
            feedback: FeedbackVariant::Mask,
            episodes: 50_000,
            train_categories: ["apple", "bowl", "potato", "soap_bottle", "dish_sponge"].map(String::from).to_vec(),
            eval_categories: ["cup", "bread"].map(String::from).to_vec(),
            decay: DecayParams::default(),
            taxonomy: TaxonomyParams::default(),
            max_steps: 500,
            q: QParams::default(),
            full_train_logs: false,
            eval_episodes: 100,
            eval_epsilon: asknav_core::agents::EVAL_EPSILON,
            store_maps: false,
            teacher_present: true,
            agent: AgentKind::Q,
        }
    }
}

/// Every recognised key.
pub const KEYS: [&str; 28] = [
    "seed",
    "out",
    "scenes.train",
    "scenes.test",
    "scenes.width",
    "scenes.height",
    "scenes.density",
    "eta",
    "feedback",
    "episodes",
    "train_categories",
    "eval_categories",
    "decay.alpha",
    "decay.beta",
    "gamma",
    "vapid_fraction",
    "max_steps",
    "q.learning_rate",
    "q.discount",
    "q.epsilon_start",
    "q.epsilon_end",
    "q.decay_fraction",
    "train.full_logs",
    "eval.episodes",
    "eval.epsilon",
    "eval.store_maps",
    "teacher",
    "agent",
];

/// Parses `key = value` lines. Blank lines and `#` comments are skipped.
pub fn parse_pairs(text: &str) -> Result<Vec<(String, String)>, CliError> {
    let mut pairs = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("line {}: expected `key = value`, got `{line}`", n + 1)))?;
        pairs.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(pairs)
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, CliError>
where
    T::Err: std::fmt::Display,
{
    value.parse().map_err(|e| CliError::Config(format!("{key}: cannot parse `{value}`: {e}")))
}

fn list(value: &str) -> Vec<String> {
    value.split(',').map(str::trim).filter(|s| !s.is_empty()).map(String::from).collect()
}

impl RunConfig {
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        match key {
            "seed" => self.seed = parse(key, value)?,
            "out" => self.out = PathBuf::from(value),
            "scenes.train" => self.train_scenes = parse(key, value)?,
            "scenes.test" => self.test_scenes = parse(key, value)?,
            "scenes.width" => self.width = parse(key, value)?,
            "scenes.height" => self.height = parse(key, value)?,
            "scenes.density" => self.obstacle_density = parse(key, value)?,
            "eta" => self.eta = parse(key, value)?,
            "feedback" => self.feedback = parse(key, value)?,
            "episodes" => self.episodes = parse(key, value)?,
            "train_categories" => self.train_categories = list(value),
            "eval_categories" => self.eval_categories = list(value),
            "decay.alpha" => self.decay.alpha = parse(key, value)?,
            "decay.beta" => self.decay.beta = parse(key, value)?,
            "gamma" => self.taxonomy.gamma = parse(key, value)?,
            "vapid_fraction" => self.taxonomy.vapid_fraction = parse(key, value)?,
            "max_steps" => self.max_steps = parse(key, value)?,
            "q.learning_rate" => self.q.learning_rate = parse(key, value)?,
            "q.discount" => self.q.discount = parse(key, value)?,
            "q.epsilon_start" => self.q.epsilon_start = parse(key, value)?,
            "q.epsilon_end" => self.q.epsilon_end = parse(key, value)?,
            "q.decay_fraction" => self.q.decay_fraction = parse(key, value)?,
            "train.full_logs" => self.full_train_logs = parse(key, value)?,
            "eval.episodes" => self.eval_episodes = parse(key, value)?,
            "eval.epsilon" => self.eval_epsilon = parse(key, value)?,
            "eval.store_maps" => self.store_maps = parse(key, value)?,
            "teacher" => {
                self.teacher_present = match value {
                    "present" => true,
                    "absent" => false,
                    other => {
                        return Err(CliError::Config(format!("teacher: expected present or absent, got `{other}`")))
                    }
                }
            }
            "agent" => {
                self.agent = match value {
                    "q" => AgentKind::Q,
                    "heuristic" => AgentKind::Heuristic,
                    "random" => AgentKind::Random,
                    other => {
                        return Err(CliError::Config(format!("agent: expected q, heuristic or random, got `{other}`")))
                    }
                }
            }
            other => return Err(CliError::Config(format!("unknown config key `{other}`"))),
        }
        Ok(())
    }

    /// Defaults, then `file_text`, then `overrides`; validated at the end.
    pub fn resolve(file_text: Option<&str>, overrides: &[(String, String)]) -> Result<RunConfig, CliError> {
        let mut cfg = RunConfig::default();
        if let Some(text) = file_text {
            for (k, v) in parse_pairs(text)? {
                cfg.set(&k, &v)?;
            }
        }
        for (k, v) in overrides {
            cfg.set(k, v)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Config(m));
        if self.train_scenes == 0 || self.test_scenes == 0 {
            return bad("scenes.train and scenes.test must be positive".into());
        }
        if self.eta > 100 {
            return bad(format!("eta {} not in 0..=100", self.eta));
        }
        if self.max_steps == 0 {
            return bad("max_steps must be at least 1".into());
        }
        DecayParams::new(self.decay.alpha, self.decay.beta).map_err(|e| CliError::Config(e.to_string()))?;
        if !(self.taxonomy.gamma >= 0.0 && (0.0..=1.0).contains(&self.taxonomy.vapid_fraction)) {
            return bad("gamma must be >= 0 and vapid_fraction in [0, 1]".into());
        }
        if !(0.0..=1.0).contains(&self.eval_epsilon) {
            return bad(format!("eval.epsilon {} not in [0, 1]", self.eval_epsilon));
        }
        let known: Vec<String> = ObjectCategory::kitchen().into_iter().map(|c| c.name).collect();
        for c in self.train_categories.iter().chain(&self.eval_categories) {
            if !known.contains(c) {
                return bad(format!("unknown category `{c}` (known: {})", known.join(", ")));
            }
        }
        if self.width < 4 || self.height < 4 {
            return bad(format!("scene size {}x{} is below 4x4", self.width, self.height));
        }
        if !(0.0..=0.4).contains(&self.obstacle_density) {
            return bad(format!("scenes.density {} not in [0, 0.4]", self.obstacle_density));
        }
        self.curriculum().validate().map_err(|e| CliError::Config(e.to_string()))
    }

    /// Canonical `key = value` listing of every setting. `out` is left out
    /// so the same experiment in two directories hashes the same.
    pub fn canonical(&self) -> String {
        let mut m: BTreeMap<&str, String> = BTreeMap::new();
        m.insert("seed", self.seed.to_string());
        m.insert("scenes.train", self.train_scenes.to_string());
        m.insert("scenes.test", self.test_scenes.to_string());
        m.insert("scenes.width", self.width.to_string());
        m.insert("scenes.height", self.height.to_string());
        m.insert("scenes.density", format!("{:?}", self.obstacle_density));
        m.insert("eta", self.eta.to_string());
        m.insert("feedback", self.feedback.name().to_string());
        m.insert("episodes", self.episodes.to_string());
        m.insert("train_categories", self.train_categories.join(","));
        m.insert("eval_categories", self.eval_categories.join(","));
        m.insert("decay.alpha", format!("{:?}", self.decay.alpha));
        m.insert("decay.beta", format!("{:?}", self.decay.beta));
        m.insert("gamma", format!("{:?}", self.taxonomy.gamma));
        m.insert("vapid_fraction", format!("{:?}", self.taxonomy.vapid_fraction));
        m.insert("max_steps", self.max_steps.to_string());
        m.insert("q.learning_rate", format!("{:?}", self.q.learning_rate));
        m.insert("q.discount", format!("{:?}", self.q.discount));
        m.insert("q.epsilon_start", format!("{:?}", self.q.epsilon_start));
        m.insert("q.epsilon_end", format!("{:?}", self.q.epsilon_end));
        m.insert("q.decay_fraction", format!("{:?}", self.q.decay_fraction));
        m.insert("train.full_logs", self.full_train_logs.to_string());
        m.insert("eval.episodes", self.eval_episodes.to_string());
        m.insert("eval.epsilon", format!("{:?}", self.eval_epsilon));
        m.insert("eval.store_maps", self.store_maps.to_string());
        m.insert("teacher", if self.teacher_present { "present" } else { "absent" }.to_string());
        m.insert("agent", self.agent.name().to_string());
        m.into_iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }

    /// SHA-256 of the canonical form, hex encoded.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.canonical().as_bytes()))
    }

    pub fn scene_params(&self) -> SceneParams {
        SceneParams {
            width: self.width,
            height: self.height,
            obstacle_density: self.obstacle_density,
            ..SceneParams::default()
        }
    }

    pub fn curriculum(&self) -> Curriculum {
        Curriculum {
            eta_percent: self.eta,
            episodes: self.episodes,
            train_categories: self.train_categories.clone(),
            eval_categories: self.eval_categories.clone(),
        }
    }

    /// Episode settings shared by training and evaluation.
    pub fn episode_template(&self) -> EpisodeConfig {
        EpisodeConfig {
            target_category: self.train_categories[0].clone(),
            feedback_variant: self.feedback,
            max_steps: self.max_steps,
            decay: self.decay,
            teacher_present: self.teacher_present,
            ..EpisodeConfig::default()
        }
    }
}
