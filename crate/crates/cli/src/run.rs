use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::commands;
use crate::config::RunConfig;
use crate::CliError;

#[derive(Debug, Parser)]
#[command(name = "asknav", version, about = "Grid-world object navigation with an optional teacher")]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct GlobalArgs {
    /// Run config file of `key = value` lines.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Any config key, e.g. `--set scenes.density=0.2`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    set: Vec<String>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate the train and test scene pools.
    GenScenes,
    /// Train a Q-table agent.
    Train {
        #[arg(long)]
        eta: Option<u32>,
        #[arg(long)]
        feedback: Option<String>,
        #[arg(long)]
        episodes: Option<usize>,
        /// Scene directory (default: <out>/scenes).
        #[arg(long)]
        scenes: Option<PathBuf>,
        /// Checkpoint path (default: <out>/qtable.txt).
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Evaluate an agent on all four seen/unseen splits.
    Eval {
        #[arg(long, value_parser = ["q", "heuristic", "random"])]
        agent: Option<String>,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long, value_parser = ["present", "absent"])]
        teacher: Option<String>,
        #[arg(long)]
        feedback: Option<String>,
        /// Episodes per scene and category.
        #[arg(long)]
        episodes: Option<usize>,
        #[arg(long)]
        scenes: Option<PathBuf>,
        /// Log path (default: <out>/eval-<agent>-<feedback>-<teacher>.jsonl).
        #[arg(long)]
        log: Option<PathBuf>,
    },
    /// Print the result tables for a set of episode logs.
    Analyze {
        #[arg(required = true)]
        logs: Vec<PathBuf>,
        #[arg(long)]
        gamma: Option<f64>,
        #[arg(long)]
        vapid_fraction: Option<f64>,
        /// JSON summary path (default: <out>/summary.json).
        #[arg(long)]
        summary: Option<PathBuf>,
    },
    /// Write the likelihood map of one logged step as a PGM heatmap.
    Render {
        #[arg(long)]
        log: PathBuf,
        /// 0-based episode index within the log.
        #[arg(long, default_value_t = 0)]
        episode: usize,
        /// Steps taken; 0 is the initial map.
        #[arg(long)]
        step: usize,
        #[arg(long)]
        scenes: Option<PathBuf>,
        /// Output image (default: <out>/heatmap-<episode>-<step>.pgm).
        #[arg(long)]
        image: Option<PathBuf>,
    },
}

fn push(overrides: &mut Vec<(String, String)>, key: &str, value: Option<String>) {
    if let Some(v) = value {
        overrides.push((key.to_string(), v));
    }
}

fn resolve(global: &GlobalArgs, command: &Command) -> Result<RunConfig, CliError> {
    let text = match &global.config {
        Some(path) => Some(std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?),
        None => None,
    };
    let mut overrides = Vec::new();
    for item in &global.set {
        let (k, v) =
            item.split_once('=').ok_or_else(|| CliError::Config(format!("--set expects KEY=VALUE, got `{item}`")))?;
        overrides.push((k.trim().to_string(), v.trim().to_string()));
    }
    push(&mut overrides, "seed", global.seed.map(|s| s.to_string()));
    push(&mut overrides, "out", global.out.as_ref().map(|p| p.display().to_string()));
    match command {
        Command::GenScenes | Command::Render { .. } => {}
        Command::Train { eta, feedback, episodes, .. } => {
            push(&mut overrides, "eta", eta.map(|v| v.to_string()));
            push(&mut overrides, "feedback", feedback.clone());
            push(&mut overrides, "episodes", episodes.map(|v| v.to_string()));
        }
        Command::Eval { agent, teacher, feedback, episodes, .. } => {
            push(&mut overrides, "agent", agent.clone());
            push(&mut overrides, "teacher", teacher.clone());
            push(&mut overrides, "feedback", feedback.clone());
            push(&mut overrides, "eval.episodes", episodes.map(|v| v.to_string()));
        }
        Command::Analyze { gamma, vapid_fraction, .. } => {
            push(&mut overrides, "gamma", gamma.map(|v| v.to_string()));
            push(&mut overrides, "vapid_fraction", vapid_fraction.map(|v| v.to_string()));
        }
    }
    RunConfig::resolve(text.as_deref(), &overrides)
}

fn scenes_dir(cfg: &RunConfig, given: &Option<PathBuf>) -> PathBuf {
    given.clone().unwrap_or_else(|| cfg.out.join("scenes"))
}

fn execute(cli: Cli, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<(), CliError> {
    let cfg = resolve(&cli.global, &cli.command)?;
    let say = |w: &mut dyn Write, msg: String| {
        let _ = writeln!(w, "{msg}");
    };
    match &cli.command {
        Command::GenScenes => {
            let dir = cfg.out.join("scenes");
            let manifest = commands::gen_scenes(&cfg, &dir)?;
            say(
                stderr,
                format!(
                    "wrote {} train and {} test scenes; manifest {}",
                    cfg.train_scenes,
                    cfg.test_scenes,
                    manifest.display()
                ),
            );
        }
        Command::Train { scenes, checkpoint, .. } => {
            let pools = commands::load_scenes(&scenes_dir(&cfg, scenes))?;
            let path = checkpoint.clone().unwrap_or_else(|| cfg.out.join("qtable.txt"));
            let t = commands::train(&cfg, &pools, &path)?;
            say(
                stderr,
                format!(
                    "trained {} episodes ({} successes); checkpoint {}; log {}",
                    t.episodes,
                    t.successes,
                    t.checkpoint.display(),
                    t.log.display()
                ),
            );
        }
        Command::Eval { checkpoint, scenes, log, .. } => {
            let pools = commands::load_scenes(&scenes_dir(&cfg, scenes))?;
            let teacher = if cfg.teacher_present { "present" } else { "absent" };
            let path = log.clone().unwrap_or_else(|| {
                cfg.out.join(format!("eval-{}-{}-{teacher}.jsonl", cfg.agent.name(), cfg.feedback.name()))
            });
            let e = commands::eval(&cfg, &pools, checkpoint.as_deref(), &path)?;
            say(
                stderr,
                format!("{}: {} episodes, {} successes; log {}", e.agent, e.episodes, e.successes, e.log.display()),
            );
        }
        Command::Analyze { logs, summary, .. } => {
            let path = summary.clone().unwrap_or_else(|| cfg.out.join("summary.json"));
            let report = commands::analyze(&cfg, logs, &path)?;
            stdout.write_all(report.as_bytes()).map_err(|e| CliError::io(Path::new("<stdout>"), e))?;
        }
        Command::Render { log, episode, step, scenes, image } => {
            let pools = commands::load_scenes(&scenes_dir(&cfg, scenes))?;
            let path = image.clone().unwrap_or_else(|| cfg.out.join(format!("heatmap-{episode}-{step}.pgm")));
            commands::render(&cfg, &pools, log, *episode, *step, &path)?;
            say(stderr, format!("wrote {}", path.display()));
        }
    }
    Ok(())
}

/// Parses `args` (program name first) and runs the command. Returns the
/// process exit code: 0 success, 1 usage error, 2 data or validation error.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            if e.use_stderr() {
                let _ = write!(stderr, "{}", e.render());
                return 1;
            }
            let _ = write!(stdout, "{}", e.render());
            return 0;
        }
    };
    match execute(cli, stdout, stderr) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.exit_code()
        }
    }
}
