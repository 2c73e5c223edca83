//! Independent reference implementations used by the integration tests.
//! Nothing here calls the library's geometry or search code.

#![allow(dead_code)]

use std::collections::BTreeSet;

use asknav_core::gridworld::{generate_scene, Cell, FovParams, GridScene, Heading, Pose, SceneParams};

pub const SAMPLE_STEP: f64 = 0.01;
const EDGE_EPS: f64 = 1e-9;

fn heading_vec(h: Heading) -> (f64, f64) {
    match h {
        Heading::North => (0.0, -1.0),
        Heading::East => (1.0, 0.0),
        Heading::South => (0.0, 1.0),
        Heading::West => (-1.0, 0.0),
    }
}

/// Interior cell under a point, or `None` when the point lies on (or within
/// 1e-9 of) a grid line.
fn interior_cell(x: f64, y: f64) -> Option<(i64, i64)> {
    let (fx, fy) = (x - x.floor(), y - y.floor());
    let on_line = |f: f64| !(EDGE_EPS..=1.0 - EDGE_EPS).contains(&f);
    if on_line(fx) || on_line(fy) {
        None
    } else {
        Some((x.floor() as i64, y.floor() as i64))
    }
}

fn blocked(scene: &GridScene, x: i64, y: i64) -> bool {
    x < 0
        || y < 0
        || x >= scene.width() as i64
        || y >= scene.height() as i64
        || scene.is_blocked(Cell::new(x as usize, y as usize))
}

/// Line of sight by sampling the centre-to-centre segment every 0.01 cells.
/// Only samples strictly inside a cell count; both end cells are ignored.
pub fn sampled_los(scene: &GridScene, a: Cell, b: Cell) -> bool {
    if blocked(scene, b.x as i64, b.y as i64) {
        return false;
    }
    let (ax, ay) = (a.x as f64 + 0.5, a.y as f64 + 0.5);
    let (bx, by) = (b.x as f64 + 0.5, b.y as f64 + 0.5);
    let len = ((bx - ax).powi(2) + (by - ay).powi(2)).sqrt();
    let n = (len / SAMPLE_STEP).ceil() as usize;
    for i in 0..=n {
        let t = i as f64 / n.max(1) as f64;
        let (x, y) = (ax + t * (bx - ax), ay + t * (by - ay));
        if let Some((cx, cy)) = interior_cell(x, y) {
            let end = (cx, cy) == (a.x as i64, a.y as i64) || (cx, cy) == (b.x as i64, b.y as i64);
            if !end && blocked(scene, cx, cy) {
                return false;
            }
        }
    }
    true
}

/// Angular cone test with `atan2`, inclusive at the boundary.
pub fn in_cone_angle(pose: Pose, cell: Cell, fov: &FovParams, cell_size: f64) -> bool {
    let dx = cell.x as f64 - pose.cell.x as f64;
    let dy = cell.y as f64 - pose.cell.y as f64;
    if dx == 0.0 && dy == 0.0 {
        return true;
    }
    if (dx * dx + dy * dy).sqrt() * cell_size > fov.max_range + 1e-9 {
        return false;
    }
    let (hx, hy) = heading_vec(pose.heading);
    let forward = dx * hx + dy * hy;
    let lateral = dx * -hy + dy * hx;
    lateral.atan2(forward).abs() <= fov.half_angle_deg.to_radians() + 1e-9
}

pub fn oracle_visible(scene: &GridScene, pose: Pose, fov: &FovParams) -> BTreeSet<Cell> {
    let mut out = BTreeSet::new();
    for y in 0..scene.height() {
        for x in 0..scene.width() {
            let c = Cell::new(x, y);
            if scene.is_blocked(c) {
                continue;
            }
            if c == pose.cell || (in_cone_angle(pose, c, fov, scene.cell_size()) && sampled_los(scene, pose.cell, c)) {
                out.insert(c);
            }
        }
    }
    out
}

fn oracle_step(scene: &GridScene, pose: Pose, m: usize) -> Pose {
    let order = [Heading::North, Heading::East, Heading::South, Heading::West];
    let k = order.iter().position(|h| *h == pose.heading).unwrap();
    match m {
        0 => Pose::new(pose.cell, order[(k + 3) % 4]),
        1 => Pose::new(pose.cell, order[(k + 1) % 4]),
        _ => {
            let (hx, hy) = heading_vec(pose.heading);
            let (nx, ny) = (pose.cell.x as i64 + hx as i64, pose.cell.y as i64 + hy as i64);
            if blocked(scene, nx, ny) {
                pose
            } else {
                Pose::new(Cell::new(nx as usize, ny as usize), pose.heading)
            }
        }
    }
}

/// Exhaustive shortest move count by relaxing every state until a fixed point.
pub fn oracle_shortest(scene: &GridScene, start: Pose, goal: Cell, radius: f64, fov: &FovParams) -> Option<u32> {
    let order = [Heading::North, Heading::East, Heading::South, Heading::West];
    let mut states = Vec::new();
    for y in 0..scene.height() {
        for x in 0..scene.width() {
            if !scene.is_blocked(Cell::new(x, y)) {
                for h in order {
                    states.push(Pose::new(Cell::new(x, y), h));
                }
            }
        }
    }
    let idx = |p: Pose| states.iter().position(|s| *s == p).unwrap();
    let mut dist = vec![u32::MAX; states.len()];
    dist[idx(start)] = 0;
    loop {
        let mut changed = false;
        for i in 0..states.len() {
            if dist[i] == u32::MAX {
                continue;
            }
            for m in 0..3 {
                let j = idx(oracle_step(scene, states[i], m));
                if dist[i] + 1 < dist[j] {
                    dist[j] = dist[i] + 1;
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }
    let size = scene.cell_size();
    states
        .iter()
        .zip(&dist)
        .filter(|(p, d)| {
            let dx = (p.cell.x as f64 - goal.x as f64) * size;
            let dy = (p.cell.y as f64 - goal.y as f64) * size;
            **d != u32::MAX
                && (dx * dx + dy * dy).sqrt() <= radius + 1e-9
                && oracle_visible(scene, **p, fov).contains(&goal)
        })
        .map(|(_, d)| *d)
        .min()
}

pub fn kitchen_scene(seed: u64, width: usize, height: usize, density: f64) -> GridScene {
    let params = SceneParams { width, height, obstacle_density: density, ..SceneParams::default() };
    generate_scene(seed, &params).expect("generator succeeds on small grids")
}

pub fn all_poses(scene: &GridScene) -> Vec<Pose> {
    scene.free_cells().flat_map(|c| Heading::ALL.into_iter().map(move |h| Pose::new(c, h))).collect()
}

/// Hand-built logs with known metrics.
pub mod fixtures {
    use asknav_core::env::{
        Action, EpisodeLog, EpisodeSummary, FeedbackKind, FeedbackVariant, Outcome, StepRecord, SCHEMA_VERSION,
    };
    use asknav_core::gridworld::{Cell, Heading, Pose};

    pub fn episode(
        steps: &[(Action, f64, f64)],
        success: bool,
        shortest: Option<u32>,
        lambda_0: f64,
        tags: Option<(bool, bool)>,
    ) -> EpisodeLog {
        let pose = Pose::new(Cell::new(1, 1), Heading::East);
        let steps: Vec<StepRecord> = steps
            .iter()
            .enumerate()
            .map(|(i, &(action, lambda, delta_lambda))| StepRecord {
                t: i + 1,
                action,
                pose,
                reward: -0.01,
                lambda,
                delta_lambda,
                action_class: action.class(),
                teacher_present: true,
                feedback_kind: if action == Action::Ask { FeedbackKind::Mask } else { FeedbackKind::Absent },
                asked: action == Action::Ask,
                target_in_view: false,
                map: None,
            })
            .collect();
        EpisodeLog {
            summary: EpisodeSummary {
                schema: SCHEMA_VERSION,
                outcome: if success { Outcome::Success } else { Outcome::Failure },
                steps: steps.len(),
                shortest_path_len: shortest,
                scene_id: "fixture".into(),
                target: "apple".into(),
                target_cell: Cell::new(2, 2),
                seed: 0,
                lambda_0,
                teacher_present: true,
                feedback: FeedbackVariant::Mask,
                total_reward: 0.0,
                scene_seen: tags.map(|t| t.0),
                object_seen: tags.map(|t| t.1),
                agent: Some("fixture".into()),
                config_hash: None,
            },
            steps,
        }
    }

    /// Three Both-Seen episodes and one Unseen-Objects episode.
    ///
    /// Episode A: success, shortest 4, 7 moves, lambda_0 20. Asks at t=2
    /// (delta exactly gamma), t=3 (consecutive, insignificant), t=5 (prior
    /// lambda exactly 0.1 * lambda_0, insignificant) and t=7 (vapid,
    /// insignificant).
    /// Episode B: failure after two moves, no asks.
    /// Episode C: immediate successful Stop with shortest 0.
    pub fn taxonomy_logs() -> Vec<EpisodeLog> {
        use Action::*;
        let seen = Some((true, true));
        vec![
            episode(
                &[
                    (MoveForward, 15.0, 5.0),
                    (Ask, 13.0, 2.0),
                    (Ask, 12.5, 0.5),
                    (RotateLeft, 2.0, 10.5),
                    (Ask, 2.0, 0.0),
                    (MoveForward, 1.0, 1.0),
                    (Ask, 1.0, 0.0),
                    (Stop, 1.0, 0.0),
                ],
                true,
                Some(4),
                20.0,
                seen,
            ),
            episode(&[(RotateRight, 8.0, 2.0), (MoveForward, 8.0, 0.0), (Stop, 8.0, 0.0)], false, Some(3), 10.0, seen),
            episode(&[(Stop, 5.0, 0.0)], true, Some(0), 5.0, seen),
            episode(&[(Ask, 4.0, 1.0), (Stop, 4.0, 0.0)], true, Some(2), 5.0, Some((true, false))),
        ]
    }
}
