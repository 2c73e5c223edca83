use std::collections::BTreeSet;
use std::fs;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use asknav_core::agents::{self, evaluate, EvalJob, HeuristicPolicy, Policy, QPolicy, QTable, RandomPolicy};
use asknav_core::env::{read_episodes, replay_ledger, write_episode, EpisodeConfig, EpisodeLog};
use asknav_core::gridworld::{generate_scene, load_scene, scene_to_text, FovParams, SceneContext};
use asknav_core::metrics::{self, render_analysis, summary_json, Split};
use asknav_core::seeding::derive_seed;
use asknav_core::uncertainty::{heatmap, LikelihoodMap};

use crate::config::{AgentKind, RunConfig};
use crate::CliError;

pub const MANIFEST: &str = "manifest.txt";
const EVAL_CHUNK: usize = 512;

/// Writes `bytes` to a sibling temporary file and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    let tmp = tmp_path(path);
    fs::write(&tmp, bytes).map_err(|e| CliError::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| CliError::io(path, e))
}

fn tmp_path(path: &Path) -> PathBuf {
    let mut name = path.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".partial");
    path.with_file_name(name)
}

pub fn scene_seed(cfg: &RunConfig, test: bool, index: usize) -> u64 {
    derive_seed(cfg.seed, &[0x5C, test as u64, index as u64])
}

/// Writes the train and test scene pools plus a manifest into `dir`.
/// Returns the manifest path.
pub fn gen_scenes(cfg: &RunConfig, dir: &Path) -> Result<PathBuf, CliError> {
    let params = cfg.scene_params();
    let train: Vec<u64> = (0..cfg.train_scenes).map(|i| scene_seed(cfg, false, i)).collect();
    let test: Vec<u64> = (0..cfg.test_scenes).map(|i| scene_seed(cfg, true, i)).collect();
    let distinct: BTreeSet<u64> = train.iter().chain(&test).copied().collect();
    if distinct.len() != train.len() + test.len() {
        return Err(CliError::Config("scene seeds collide; pick another seed".into()));
    }
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let mut manifest = format!("# asknav scenes\n# config_hash {}\n", cfg.hash());
    for (split, seeds) in [("train", &train), ("test", &test)] {
        for (i, seed) in seeds.iter().enumerate() {
            let mut scene = generate_scene(*seed, &params)?;
            let id = format!("{split}-{i:02}");
            scene.set_id(&id);
            let file = format!("{id}.scene");
            write_atomic(&dir.join(&file), scene_to_text(&scene).as_bytes())?;
            manifest.push_str(&format!("{id} {split} {seed} {file}\n"));
        }
    }
    let path = dir.join(MANIFEST);
    write_atomic(&path, manifest.as_bytes())?;
    Ok(path)
}

/// Scene contexts listed by a manifest, split into the two pools.
#[derive(Debug, Clone)]
pub struct ScenePools {
    pub train: Vec<Arc<SceneContext>>,
    pub test: Vec<Arc<SceneContext>>,
}

impl ScenePools {
    pub fn find(&self, id: &str) -> Option<&Arc<SceneContext>> {
        self.train.iter().chain(&self.test).find(|c| c.scene().id() == id)
    }
}

pub fn load_scenes(dir: &Path) -> Result<ScenePools, CliError> {
    let path = dir.join(MANIFEST);
    let text = fs::read_to_string(&path)
        .map_err(|e| CliError::data(&path, format!("cannot read scene manifest ({e}); run gen-scenes first")))?;
    let mut pools = ScenePools { train: Vec::new(), test: Vec::new() };
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        let [id, split, _seed, file] = fields[..] else {
            return Err(CliError::data(&path, format!("line {}: expected `id split seed file`", n + 1)));
        };
        let scene = load_scene(&dir.join(file)).map_err(|e| CliError::data(&path, format!("line {}: {e}", n + 1)))?;
        if scene.id() != id {
            return Err(CliError::data(&path, format!("line {}: file holds scene `{}`", n + 1, scene.id())));
        }
        let ctx = Arc::new(SceneContext::new(scene, FovParams::default()));
        match split {
            "train" => pools.train.push(ctx),
            "test" => pools.test.push(ctx),
            other => return Err(CliError::data(&path, format!("line {}: unknown split `{other}`", n + 1))),
        }
    }
    if pools.train.is_empty() {
        return Err(CliError::data(&path, "manifest lists no training scenes"));
    }
    Ok(pools)
}

fn checkpoint_text(cfg: &RunConfig, table: &QTable) -> String {
    let body = table.to_text();
    let (header, rest) = body.split_once('\n').unwrap_or((&body, ""));
    format!("{header}\n# config_hash {}\n# eta {}\n# feedback {}\n{rest}", cfg.hash(), cfg.eta, cfg.feedback.name())
}

/// Summary of a finished training run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub checkpoint: PathBuf,
    pub log: PathBuf,
    pub episodes: usize,
    pub successes: usize,
}

/// Trains a Q-table on the training pool. The checkpoint appears only once
/// complete. The training log next to it holds one summary object per
/// episode, or full episode logs when `train.full_logs` is set.
pub fn train(cfg: &RunConfig, pools: &ScenePools, checkpoint: &Path) -> Result<TrainOutcome, CliError> {
    let hash = cfg.hash();
    let log_path = checkpoint.with_extension("train.jsonl");
    let tmp_log = tmp_path(&log_path);
    if let Some(dir) = log_path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    let file = fs::File::create(&tmp_log).map_err(|e| CliError::io(&tmp_log, e))?;
    let mut out = BufWriter::new(file);
    let mut failure = None;
    let mut successes = 0;
    let table = agents::train(&pools.train, &cfg.curriculum(), &cfg.episode_template(), &cfg.q, cfg.seed, |_, log| {
        if failure.is_some() {
            return;
        }
        successes += log.summary.success() as usize;
        let mut log = log.clone();
        log.summary.config_hash = Some(hash.clone());
        let written = if cfg.full_train_logs {
            write_episode(&mut out, &log).map_err(CliError::from)
        } else {
            serde_json::to_writer(&mut out, &log.summary)
                .map_err(|e| CliError::data(&tmp_log, e.to_string()))
                .and_then(|_| out.write_all(b"\n").map_err(|e| CliError::io(&tmp_log, e)))
        };
        if let Err(e) = written {
            failure = Some(e);
        }
    })?;
    if let Some(e) = failure {
        return Err(e);
    }
    out.flush().map_err(|e| CliError::io(&tmp_log, e))?;
    drop(out);
    fs::rename(&tmp_log, &log_path).map_err(|e| CliError::io(&log_path, e))?;
    write_atomic(checkpoint, checkpoint_text(cfg, &table).as_bytes())?;
    Ok(TrainOutcome { checkpoint: checkpoint.to_path_buf(), log: log_path, episodes: cfg.episodes, successes })
}

/// Loads a checkpoint and the agent label recorded with it.
pub fn load_checkpoint(path: &Path) -> Result<(QTable, String), CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let table = QTable::from_text(&text).map_err(|e| CliError::data(path, e.to_string()))?;
    let eta = text.lines().find_map(|l| l.strip_prefix("# eta ")).map(str::trim);
    let label = match eta {
        Some(eta) => format!("q-eta{eta}"),
        None => "q".to_string(),
    };
    Ok((table, label))
}

/// Evaluation jobs over the requested splits, in a fixed order: split,
/// scene, category, repetition. `per_cell` episodes per scene and category.
pub fn eval_jobs(cfg: &RunConfig, pools: &ScenePools, splits: &[Split], per_cell: usize) -> Vec<EvalJob> {
    let mut jobs = Vec::new();
    for split in Split::ALL.into_iter().filter(|s| splits.contains(s)) {
        let (scene_seen, object_seen) = match split {
            Split::BothSeen => (true, true),
            Split::UnseenScenes => (false, true),
            Split::UnseenObjects => (true, false),
            Split::BothUnseen => (false, false),
        };
        let scenes = if scene_seen { &pools.train } else { &pools.test };
        let categories = if object_seen { &cfg.train_categories } else { &cfg.eval_categories };
        for (si, ctx) in scenes.iter().enumerate() {
            for (ci, category) in categories.iter().enumerate() {
                for k in 0..per_cell {
                    let seed = derive_seed(
                        cfg.seed,
                        &[0xE7, !scene_seen as u64, si as u64, !object_seen as u64, ci as u64, k as u64],
                    );
                    jobs.push(EvalJob {
                        ctx: Arc::clone(ctx),
                        config: EpisodeConfig {
                            target_category: category.clone(),
                            seed,
                            store_maps: cfg.store_maps,
                            ..cfg.episode_template()
                        },
                        scene_seen,
                        object_seen,
                    });
                }
            }
        }
    }
    jobs
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalOutcome {
    pub log: PathBuf,
    pub agent: String,
    pub episodes: usize,
    pub successes: usize,
}

/// Evaluates one agent over all four splits and writes the episode logs.
pub fn eval(
    cfg: &RunConfig,
    pools: &ScenePools,
    checkpoint: Option<&Path>,
    log_path: &Path,
) -> Result<EvalOutcome, CliError> {
    let (policy, label): (Box<dyn Policy>, String) = match cfg.agent {
        AgentKind::Q => {
            let path = checkpoint.ok_or_else(|| CliError::Config("the q agent needs --checkpoint".into()))?;
            let (table, label) = load_checkpoint(path)?;
            (Box::new(QPolicy { table, epsilon: cfg.eval_epsilon }), label)
        }
        AgentKind::Heuristic => (Box::new(HeuristicPolicy::default()), "heuristic".into()),
        AgentKind::Random => (Box::new(RandomPolicy), "random".into()),
    };
    let jobs = eval_jobs(cfg, pools, &Split::ALL, cfg.eval_episodes);
    let hash = cfg.hash();
    let tmp = tmp_path(log_path);
    if let Some(dir) = log_path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    let mut out = BufWriter::new(fs::File::create(&tmp).map_err(|e| CliError::io(&tmp, e))?);
    let mut successes = 0;
    for chunk in jobs.chunks(EVAL_CHUNK) {
        for mut log in evaluate(chunk, policy.as_ref())? {
            successes += log.summary.success() as usize;
            log.summary.agent = Some(label.clone());
            log.summary.config_hash = Some(hash.clone());
            write_episode(&mut out, &log)?;
        }
    }
    out.flush().map_err(|e| CliError::io(&tmp, e))?;
    drop(out);
    fs::rename(&tmp, log_path).map_err(|e| CliError::io(log_path, e))?;
    Ok(EvalOutcome { log: log_path.to_path_buf(), agent: label, episodes: jobs.len(), successes })
}

pub fn read_log_file(path: &Path) -> Result<Vec<EpisodeLog>, CliError> {
    let file = fs::File::open(path).map_err(|e| CliError::io(path, e))?;
    read_episodes(BufReader::new(file)).map_err(|e| CliError::data(path, e.to_string()))
}

/// Renders the report for the given logs and writes the JSON summary.
pub fn analyze(cfg: &RunConfig, logs: &[PathBuf], summary: &Path) -> Result<String, CliError> {
    let mut all = Vec::new();
    for path in logs {
        all.extend(read_log_file(path)?);
    }
    if all.is_empty() {
        return Err(CliError::Config("no episodes in the given logs".into()));
    }
    let hashes: BTreeSet<&str> = all.iter().map(|l| l.summary.config_hash.as_deref().unwrap_or("-")).collect();
    let analysis = metrics::analyze(&all, &cfg.taxonomy)?;
    let mut report = format!("config_hash {}\n", cfg.hash());
    report.push_str(&format!("log config hashes {}\n", hashes.into_iter().collect::<Vec<_>>().join(" ")));
    report.push_str(&format!("episodes {}\n\n", all.len()));
    report.push_str(&render_analysis(&analysis));
    let json = format!("{{\"config_hash\":\"{}\",\"analysis\":{}}}\n", cfg.hash(), summary_json(&analysis));
    write_atomic(summary, json.as_bytes())?;
    Ok(report)
}

/// Heatmap of the likelihood map after `step` steps of episode `episode`
/// (0-based). Uses the stored map when the log has one.
pub fn render(
    cfg: &RunConfig,
    pools: &ScenePools,
    log_path: &Path,
    episode: usize,
    step: usize,
    out: &Path,
) -> Result<(), CliError> {
    let logs = read_log_file(log_path)?;
    let log = logs
        .get(episode)
        .ok_or_else(|| CliError::data(log_path, format!("episode {episode} out of range (log has {})", logs.len())))?;
    if step > log.steps.len() {
        return Err(CliError::data(
            log_path,
            format!("step {step} out of range (episode has {} steps)", log.steps.len()),
        ));
    }
    let ctx = pools
        .find(&log.summary.scene_id)
        .ok_or_else(|| CliError::data(log_path, format!("scene `{}` not in the manifest", log.summary.scene_id)))?;
    let stored = step.checked_sub(1).and_then(|i| log.steps[i].map.clone());
    let map = match stored {
        Some(values) => LikelihoodMap::from_values(ctx.scene(), values)?,
        None => replay_ledger(ctx, log, &cfg.decay, Some(step))?.map,
    };
    write_atomic(out, heatmap(&map, ctx.scene())?.as_bytes())
}
