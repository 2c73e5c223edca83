use std::collections::VecDeque;

use super::{euclid_dist, visible_cells, Cell, FovParams, GridScene, Pose, GEOM_EPS};

/// Primitive motion used by planners: 90 degree turns and one-cell moves.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NavMove {
    RotateLeft,
    RotateRight,
    Forward,
}

impl NavMove {
    pub const ALL: [NavMove; 3] = [NavMove::RotateLeft, NavMove::RotateRight, NavMove::Forward];

    /// Pose after the move; forward into a wall leaves the pose unchanged.
    pub fn apply(self, scene: &GridScene, pose: Pose) -> Pose {
        match self {
            NavMove::RotateLeft => Pose::new(pose.cell, pose.heading.rotate_left()),
            NavMove::RotateRight => Pose::new(pose.cell, pose.heading.rotate_right()),
            NavMove::Forward => match scene.ahead(pose) {
                Some(cell) => Pose::new(cell, pose.heading),
                None => pose,
            },
        }
    }
}

/// Breadth-first distances (in primitive moves) from `start` to every
/// `(cell, heading)` state, indexed by [`Pose::state_index`].
pub fn pose_distances(scene: &GridScene, start: Pose) -> Vec<Option<u32>> {
    let width = scene.width();
    let mut dist = vec![None; width * scene.height() * 4];
    dist[start.state_index(width)] = Some(0);
    let mut queue = VecDeque::from([start]);
    while let Some(pose) = queue.pop_front() {
        let d = dist[pose.state_index(width)].unwrap_or(0);
        for mv in NavMove::ALL {
            let next = mv.apply(scene, pose);
            let slot = &mut dist[next.state_index(width)];
            if slot.is_none() {
                *slot = Some(d + 1);
                queue.push_back(next);
            }
        }
    }
    dist
}

/// Length of the shortest move sequence from `start` to a pose satisfying
/// `is_goal`, together with the first move on such a path (`None` when the
/// start already qualifies). Moves are expanded in [`NavMove::ALL`] order.
pub fn plan_first_move(
    scene: &GridScene,
    start: Pose,
    mut is_goal: impl FnMut(Pose) -> bool,
) -> Option<(u32, Option<NavMove>)> {
    if is_goal(start) {
        return Some((0, None));
    }
    let width = scene.width();
    let mut first: Vec<Option<(u32, NavMove)>> = vec![None; width * scene.height() * 4];
    let mut seen = vec![false; first.len()];
    seen[start.state_index(width)] = true;
    let mut queue = VecDeque::new();
    for mv in NavMove::ALL {
        let next = mv.apply(scene, start);
        let i = next.state_index(width);
        if !seen[i] {
            seen[i] = true;
            first[i] = Some((1, mv));
            queue.push_back(next);
        }
    }
    while let Some(pose) = queue.pop_front() {
        let (d, mv0) = first[pose.state_index(width)].expect("queued states carry a first move");
        if is_goal(pose) {
            return Some((d, Some(mv0)));
        }
        for mv in NavMove::ALL {
            let next = mv.apply(scene, pose);
            let i = next.state_index(width);
            if !seen[i] {
                seen[i] = true;
                first[i] = Some((d + 1, mv0));
                queue.push_back(next);
            }
        }
    }
    None
}

/// Minimum number of primitive moves to reach a pose within `success_radius`
/// of `goal` that also has `goal` in view under the default field of view.
/// `None` means unreachable.
pub fn shortest_path_len(scene: &GridScene, start: Pose, goal: Cell, success_radius: f64) -> Option<u32> {
    shortest_path_len_with_fov(scene, start, goal, success_radius, &FovParams::default())
}

pub fn shortest_path_len_with_fov(
    scene: &GridScene,
    start: Pose,
    goal: Cell,
    success_radius: f64,
    fov: &FovParams,
) -> Option<u32> {
    if scene.is_blocked(goal) {
        return None;
    }
    plan_first_move(scene, start, |pose| {
        euclid_dist(pose.cell, goal, scene.cell_size()) <= success_radius + GEOM_EPS
            && visible_cells(scene, pose, fov).contains(&goal)
    })
    .map(|(d, _)| d)
}
