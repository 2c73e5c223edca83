mod common;

use std::sync::Arc;

use asknav_core::agents::AgentMemory;
use asknav_core::env::{
    build_window, read_episodes, replay_ledger, write_episode, Action, Env, EpisodeConfig, Feedback, FeedbackKind,
    FeedbackSignal, FeedbackVariant, SlotContent,
};
use asknav_core::gridworld::{euclid_dist, FovParams, SceneContext};
use asknav_core::seeding::rng_for;
use rand::Rng;

use common::kitchen_scene;

fn context(seed: u64, density: f64) -> Arc<SceneContext> {
    Arc::new(SceneContext::new(kitchen_scene(seed, 8, 8, density), FovParams::default()))
}

fn random_run(ctx: &Arc<SceneContext>, config: EpisodeConfig, steps: usize, action_seed: u64) -> Env {
    let (mut env, _) = Env::reset(Arc::clone(ctx), config).unwrap();
    let mut rng = rng_for(action_seed, &[]);
    for _ in 0..steps {
        let a = Action::from_index(rng.gen_range(0..5));
        let a = if a == Action::Stop { Action::Ask } else { a };
        if env.step(a).unwrap().done {
            break;
        }
    }
    env
}

#[test]
fn replayed_ledger_matches_the_live_ledger() {
    for i in 0..12u64 {
        let ctx = context(20 + i, 0.2);
        let config = EpisodeConfig {
            teacher_present: i % 3 != 0,
            feedback_variant: [FeedbackVariant::Mask, FeedbackVariant::Binary, FeedbackVariant::Language]
                [i as usize % 3],
            seed: i,
            ..EpisodeConfig::default()
        };
        let env = random_run(&ctx, config.clone(), 60, 90 + i);
        let log = env.episode_log();
        let replay = replay_ledger(&ctx, &log, &config.decay, None).unwrap();
        assert_eq!(replay.map.values(), env.likelihood().values());
        for (record, (lambda, delta)) in log.steps.iter().zip(&replay.per_step) {
            assert!((record.lambda - lambda).abs() < 1e-12);
            assert!((record.delta_lambda - delta).abs() < 1e-12);
        }
    }
}

#[test]
fn log_file_roundtrip_through_disk() {
    let ctx = context(4, 0.1);
    let config = EpisodeConfig { store_maps: true, seed: 8, ..EpisodeConfig::default() };
    let env = random_run(&ctx, config, 25, 3);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("episodes.jsonl");
    let mut file = std::fs::File::create(&path).unwrap();
    write_episode(&mut file, &env.episode_log()).unwrap();
    write_episode(&mut file, &env.episode_log()).unwrap();
    drop(file);
    let logs = read_episodes(std::io::BufReader::new(std::fs::File::open(&path).unwrap())).unwrap();
    assert_eq!(logs.len(), 2);
    assert_eq!(logs[0], env.episode_log());
    assert_eq!(logs[0].steps.last().unwrap().map.as_deref(), Some(env.likelihood().values()));
}

#[test]
fn rewards_add_up() {
    let ctx = context(6, 0.15);
    let config = EpisodeConfig { ask_penalty: -0.5, seed: 2, ..EpisodeConfig::default() };
    let env = random_run(&ctx, config.clone(), 40, 12);
    let log = env.episode_log();
    let total: f64 = log.steps.iter().map(|s| s.reward).sum();
    assert!((total - log.summary.total_reward).abs() < 1e-9);
    for s in &log.steps {
        let expected = config.step_penalty + if s.action == Action::Ask { config.ask_penalty } else { 0.0 };
        assert!((s.reward - expected).abs() < 1e-12);
    }
}

#[test]
fn absent_teacher_never_answers() {
    for variant in
        [FeedbackVariant::Mask, FeedbackVariant::Binary, FeedbackVariant::NoisyMask, FeedbackVariant::Language]
    {
        let ctx = context(11, 0.1);
        let config = EpisodeConfig { teacher_present: false, feedback_variant: variant, ..EpisodeConfig::default() };
        let (mut env, _) = Env::reset(Arc::clone(&ctx), config).unwrap();
        for a in [Action::Ask, Action::RotateLeft, Action::Ask, Action::MoveForward, Action::Ask] {
            let before = env.lambda();
            let r = env.step(a).unwrap();
            assert_eq!(r.observation.last_feedback, FeedbackSignal::Absent);
            if a == Action::Ask {
                assert_eq!(r.info.delta_lambda, 0.0);
                assert_eq!(env.lambda(), before);
            }
        }
        assert!(env.records().iter().all(|s| s.feedback_kind == FeedbackKind::Absent));
    }
}

#[test]
fn mask_marks_exactly_the_visible_target() {
    let mut marked = 0;
    for i in 0..30u64 {
        let ctx = context(40 + i, 0.15);
        let config = EpisodeConfig { seed: i, ..EpisodeConfig::default() };
        let (mut env, _) = Env::reset(Arc::clone(&ctx), config).unwrap();
        let mut rng = rng_for(i, &[7]);
        for _ in 0..30 {
            let a = [Action::RotateLeft, Action::RotateRight, Action::MoveForward][rng.gen_range(0..3)];
            env.step(a).unwrap();
            let r = env.step(Action::Ask).unwrap();
            let FeedbackSignal::Given(Feedback::Mask(mask)) = &r.observation.last_feedback else {
                panic!("mask expected");
            };
            let pose = env.pose();
            let shape = r.observation.window.shape;
            if ctx.sees(pose, env.target_cell()) {
                let slot = shape.slot_of(pose, env.target_cell()).unwrap();
                assert_eq!(mask.sum(), 1);
                assert_eq!(mask.get(slot.0, slot.1), 1);
                marked += 1;
            } else {
                assert_eq!(mask.sum(), 0);
            }
        }
    }
    assert!(marked > 0);
}

#[test]
fn same_seed_same_episode() {
    let ctx = context(9, 0.2);
    for variant in [FeedbackVariant::NoisyMask, FeedbackVariant::Language] {
        let config = EpisodeConfig { feedback_variant: variant, seed: 77, ..EpisodeConfig::default() };
        let a = random_run(&ctx, config.clone(), 80, 5).episode_log();
        let b = random_run(&ctx, config, 80, 5).episode_log();
        assert_eq!(a, b);
    }
}

#[test]
fn agent_ledger_equals_env_ledger_when_agent_sees_everything() {
    for i in 0..10u64 {
        let ctx = context(60 + i, 0.2);
        let config = EpisodeConfig { recognition_range: 3.0, seed: i, ..EpisodeConfig::default() };
        let (mut env, obs) = Env::reset(Arc::clone(&ctx), config.clone()).unwrap();
        let mut memory = AgentMemory::new(Arc::clone(&ctx), config.decay, config.success_radius);
        memory.begin(&obs);
        let mut rng = rng_for(i, &[3]);
        for _ in 0..60 {
            let a = [Action::RotateLeft, Action::RotateRight, Action::MoveForward, Action::Ask][rng.gen_range(0..4)];
            let r = env.step(a).unwrap();
            memory.update(a, &r.observation);
            let (agent, truth) = (memory.ledger().values(), env.likelihood().values());
            assert!(agent.iter().zip(truth).all(|(x, y)| (x - y).abs() < 1e-12), "episode {i} step {}", env.steps());
        }
    }
}

#[test]
fn objects_beyond_recognition_range_are_not_named() {
    let ctx = context(13, 0.0);
    let config = EpisodeConfig { seed: 5, ..EpisodeConfig::default() };
    let env = random_run(&ctx, config.clone(), 1, 1);
    for pose in common::all_poses(ctx.scene()) {
        let window = build_window(&ctx, env.objects(), pose, config.recognition_range);
        for (row, col, content) in window.seen() {
            if let SlotContent::Object(name) = content {
                let cell = window.shape.cell_at(pose, row, col).unwrap();
                let d = euclid_dist(pose.cell, cell, ctx.scene().cell_size());
                assert!(d <= config.recognition_range + 1e-9, "{name} named at {d}");
            }
        }
    }
}
