use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use asknav_cli::{load_scenes, RunConfig};
use asknav_core::env::{read_episodes, SCHEMA_VERSION};

fn asknav(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_asknav")).args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = asknav(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Small pools and a short training run.
fn prepared(dir: &Path) -> PathBuf {
    let cfg = dir.join("run.cfg");
    fs::write(&cfg, "seed = 4\nscenes.train = 3\nscenes.test = 2\nepisodes = 400\neval.episodes = 1\n").unwrap();
    ok(&["--config", s(&cfg), "--out", s(dir), "gen-scenes"]);
    cfg
}

#[test]
fn gen_scenes_default_pools_are_disjoint_and_stable() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    ok(&["--out", s(&a), "gen-scenes"]);
    ok(&["--out", s(&b), "gen-scenes"]);
    let manifest = fs::read_to_string(a.join("scenes/manifest.txt")).unwrap();
    assert_eq!(manifest, fs::read_to_string(b.join("scenes/manifest.txt")).unwrap());
    let rows: Vec<Vec<&str>> =
        manifest.lines().filter(|l| !l.starts_with('#')).map(|l| l.split_whitespace().collect()).collect();
    assert_eq!(rows.iter().filter(|r| r[1] == "train").count(), 10);
    assert_eq!(rows.iter().filter(|r| r[1] == "test").count(), 5);
    let seeds: std::collections::BTreeSet<&str> = rows.iter().map(|r| r[2]).collect();
    assert_eq!(seeds.len(), 15);
    for r in &rows {
        assert_eq!(fs::read(a.join("scenes").join(r[3])).unwrap(), fs::read(b.join("scenes").join(r[3])).unwrap());
    }
    let pools = load_scenes(&a.join("scenes")).unwrap();
    assert_eq!((pools.train.len(), pools.test.len()), (10, 5));
}

#[test]
fn training_is_reproducible_and_leaves_no_partial_files() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = prepared(dir.path());
    let base = ["--config", s(&cfg), "--out", s(dir.path()), "train", "--eta", "25"];
    let a = dir.path().join("a.txt");
    let b = dir.path().join("b.txt");
    ok(&[&base[..], &["--checkpoint", s(&a)]].concat());
    ok(&[&base[..], &["--checkpoint", s(&b)]].concat());
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    assert_eq!(
        fs::read(dir.path().join("a.train.jsonl")).unwrap(),
        fs::read(dir.path().join("b.train.jsonl")).unwrap()
    );
    let leftovers: Vec<_> = fs::read_dir(dir.path())
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .filter(|n| n.ends_with(".partial"))
        .collect();
    assert!(leftovers.is_empty(), "{leftovers:?}");
    let text = fs::read_to_string(&a).unwrap();
    assert!(text.lines().nth(1).unwrap().starts_with("# config_hash "));
}

#[test]
fn eval_without_teacher_runs_and_tags_every_episode() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = prepared(dir.path());
    let ckpt = dir.path().join("q.txt");
    ok(&["--config", s(&cfg), "--out", s(dir.path()), "train", "--eta", "100", "--checkpoint", s(&ckpt)]);
    let log = dir.path().join("absent.jsonl");
    ok(&[
        "--config",
        s(&cfg),
        "--out",
        s(dir.path()),
        "eval",
        "--checkpoint",
        s(&ckpt),
        "--teacher",
        "absent",
        "--log",
        s(&log),
    ]);
    let logs = read_episodes(std::io::BufReader::new(fs::File::open(&log).unwrap())).unwrap();
    // 3 train scenes x 5 categories + 3 x 2 + 2 x 5 + 2 x 2, one episode each.
    assert_eq!(logs.len(), 35);
    let resolved = RunConfig::resolve(
        Some(&fs::read_to_string(&cfg).unwrap()),
        &[("teacher".into(), "absent".into()), ("out".into(), s(dir.path()).into())],
    )
    .unwrap();
    for l in &logs {
        assert!(l.summary.scene_seen.is_some() && l.summary.object_seen.is_some());
        assert_eq!(l.summary.config_hash.as_deref(), Some(resolved.hash().as_str()));
        assert_eq!(l.summary.agent.as_deref(), Some("q-eta100"));
        assert!(!l.summary.teacher_present);
    }
    let out = ok(&["--out", s(dir.path()), "analyze", s(&log)]);
    let report = String::from_utf8(out.stdout).unwrap();
    assert!(report.contains("q-eta100"));
    assert!(report.contains("gamma=2, vapid_fraction=0.1"));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(asknav(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(asknav(&["train", "--eta"]).status.code(), Some(1));
    assert_eq!(asknav(&["--help"]).status.code(), Some(0));

    let missing = asknav(&["--out", s(dir.path()), "train"]);
    assert_eq!(missing.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&missing.stderr).contains("manifest.txt"));
    assert_eq!(asknav(&["--out", s(dir.path()), "train", "--eta", "150"]).status.code(), Some(2));
    assert_eq!(asknav(&["--out", s(dir.path()), "--set", "colour=red", "gen-scenes"]).status.code(), Some(2));

    prepared(dir.path());
    let ckpt = dir.path().join("old.txt");
    fs::write(&ckpt, "asknav-qtable v99\n").unwrap();
    let code = asknav(&["--out", s(dir.path()), "eval", "--checkpoint", s(&ckpt), "--episodes", "1"]).status.code();
    assert_eq!(code, Some(2));

    let log = dir.path().join("future.jsonl");
    let trailer = format!(
        "{{\"kind\":\"episode\",\"schema\":{},\"outcome\":\"success\",\"steps\":0,\"shortest_path_len\":0,\
         \"scene_id\":\"x\",\"target\":\"apple\",\"target_cell\":{{\"x\":0,\"y\":0}},\"seed\":0,\"lambda_0\":1.0,\
         \"teacher_present\":true,\"feedback\":\"mask\",\"total_reward\":0.0}}\n",
        SCHEMA_VERSION + 1
    );
    fs::write(&log, trailer).unwrap();
    let out = asknav(&["--out", s(dir.path()), "analyze", s(&log)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("schema"));
}

#[test]
fn render_replays_and_matches_stored_maps() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = prepared(dir.path());
    let base = ["--config", s(&cfg), "--out", s(dir.path())];
    let stored = dir.path().join("stored.jsonl");
    let bare = dir.path().join("bare.jsonl");
    ok(&[&base[..], &["eval", "--agent", "heuristic", "--set", "eval.store_maps=true", "--log", s(&stored)]].concat());
    ok(&[&base[..], &["eval", "--agent", "heuristic", "--log", s(&bare)]].concat());

    let img = |log: &Path, step: usize, name: &str| {
        let path = dir.path().join(name);
        let step = step.to_string();
        ok(&[&base[..], &["render", "--log", s(log), "--episode", "2", "--step", &step, "--image", s(&path)]].concat());
        fs::read_to_string(path).unwrap()
    };
    let logs = read_episodes(std::io::BufReader::new(fs::File::open(&stored).unwrap())).unwrap();
    let n = logs[2].steps.len();
    for step in [0, 1, n / 2, n] {
        assert_eq!(img(&stored, step, "a.pgm"), img(&bare, step, "b.pgm"), "step {step}");
    }
    let initial = img(&bare, 0, "c.pgm");
    let pixels: Vec<&str> = initial.lines().skip(3).flat_map(|l| l.split(' ')).collect();
    assert!(pixels.iter().all(|p| *p == "255" || *p == "0"));
    let out = asknav(&[&base[..], &["render", "--log", s(&bare), "--step", "9999"]].concat());
    assert_eq!(out.status.code(), Some(2));
}
