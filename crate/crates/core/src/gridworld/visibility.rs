use std::collections::BTreeSet;

use super::{Cell, FovParams, GridScene, Heading, Pose, GEOM_EPS};

/// Walks the cells whose open interior the segment between the centers of
/// `a` and `b` passes through, excluding both endpoints. Stops early when
/// `visit` returns `false`; returns whether the walk completed.
///
/// Integer-exact: boundary crossings are compared by cross multiplication,
/// and a crossing exactly through a lattice corner steps diagonally without
/// touching the two side cells.
fn walk_between(a: Cell, b: Cell, mut visit: impl FnMut(Cell) -> bool) -> bool {
    let dx = b.x as i64 - a.x as i64;
    let dy = b.y as i64 - a.y as i64;
    let (nx, ny) = (dx.abs(), dy.abs());
    let (sx, sy) = (dx.signum(), dy.signum());
    let (mut ix, mut iy) = (0i64, 0i64);
    let (mut x, mut y) = (a.x as i64, a.y as i64);
    while ix < nx || iy < ny {
        let (step_x, step_y) = if ix == nx {
            (false, true)
        } else if iy == ny {
            (true, false)
        } else {
            // crossing parameters t_x = (2ix+1)/(2nx) and t_y = (2iy+1)/(2ny)
            let tx = (2 * ix + 1) * ny;
            let ty = (2 * iy + 1) * nx;
            (tx <= ty, ty <= tx)
        };
        if step_x {
            x += sx;
            ix += 1;
        }
        if step_y {
            y += sy;
            iy += 1;
        }
        if ix == nx && iy == ny {
            break;
        }
        if !visit(Cell::new(x as usize, y as usize)) {
            return false;
        }
    }
    true
}

/// True iff `b` is free and no blocked cell lies strictly between the
/// centers of `a` and `b`. `a == b` is always visible.
pub fn line_of_sight(scene: &GridScene, a: Cell, b: Cell) -> bool {
    if a == b {
        return true;
    }
    scene.is_free(b) && walk_between(a, b, |c| scene.is_free(c))
}

fn in_cone(pose: Pose, target: Cell, cell_size: f64, fov: &FovParams) -> bool {
    let ox = target.x as f64 - pose.cell.x as f64;
    let oy = target.y as f64 - pose.cell.y as f64;
    if ox == 0.0 && oy == 0.0 {
        return true;
    }
    let norm = (ox * ox + oy * oy).sqrt();
    if cell_size * norm > fov.max_range + GEOM_EPS {
        return false;
    }
    let (hx, hy) = pose.heading.delta();
    let dot = ox * hx as f64 + oy * hy as f64;
    dot >= norm * fov.half_angle_deg.to_radians().cos() - GEOM_EPS
}

fn candidates<'a>(scene: &'a GridScene, pose: Pose, fov: &'a FovParams) -> impl Iterator<Item = Cell> + 'a {
    let range = fov.range_cells(scene.cell_size()) as i64;
    let (cx, cy) = (pose.cell.x as i64, pose.cell.y as i64);
    let fov = *fov;
    (cy - range..=cy + range)
        .flat_map(move |y| (cx - range..=cx + range).map(move |x| (x, y)))
        .filter(move |&(x, y)| x >= 0 && y >= 0 && (x as usize) < scene.width() && (y as usize) < scene.height())
        .map(|(x, y)| Cell::new(x as usize, y as usize))
        .filter(move |c| in_cone(pose, *c, scene.cell_size(), &fov))
}

/// Free cells inside the view cone with a clear line of sight, agent cell included.
pub fn visible_cells(scene: &GridScene, pose: Pose, fov: &FovParams) -> BTreeSet<Cell> {
    let mut out: BTreeSet<Cell> =
        candidates(scene, pose, fov).filter(|c| line_of_sight(scene, pose.cell, *c)).collect();
    out.insert(pose.cell);
    out
}

/// Blocked cells inside the view cone whose faces are seen: the segment
/// reaching them is clear up to, but excluding, the blocked cell itself.
pub fn visible_walls(scene: &GridScene, pose: Pose, fov: &FovParams) -> BTreeSet<Cell> {
    candidates(scene, pose, fov)
        .filter(|c| scene.is_blocked(*c) && walk_between(pose.cell, *c, |m| scene.is_free(m)))
        .collect()
}

/// A scene with per-pose visibility precomputed for one field of view.
/// Shared read-only between episodes.
#[derive(Debug, Clone)]
pub struct SceneContext {
    scene: GridScene,
    fov: FovParams,
    visible: Vec<Vec<Cell>>,
    walls: Vec<Vec<Cell>>,
}

impl SceneContext {
    pub fn new(scene: GridScene, fov: FovParams) -> Self {
        let states = scene.width() * scene.height() * 4;
        let mut visible = vec![Vec::new(); states];
        let mut walls = vec![Vec::new(); states];
        for cell in scene.free_cells().collect::<Vec<_>>() {
            for heading in Heading::ALL {
                let pose = Pose::new(cell, heading);
                let i = pose.state_index(scene.width());
                visible[i] = visible_cells(&scene, pose, &fov).into_iter().collect();
                walls[i] = visible_walls(&scene, pose, &fov).into_iter().collect();
            }
        }
        SceneContext { scene, fov, visible, walls }
    }

    pub fn scene(&self) -> &GridScene {
        &self.scene
    }

    pub fn fov(&self) -> &FovParams {
        &self.fov
    }

    /// Sorted visible free cells for a pose on a free cell.
    pub fn visible(&self, pose: Pose) -> &[Cell] {
        &self.visible[pose.state_index(self.scene.width())]
    }

    pub fn walls(&self, pose: Pose) -> &[Cell] {
        &self.walls[pose.state_index(self.scene.width())]
    }

    pub fn sees(&self, pose: Pose, cell: Cell) -> bool {
        self.visible(pose).binary_search(&cell).is_ok()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gridworld::ObjectPlacement;
    use std::collections::BTreeMap;

    fn scene_with(width: usize, height: usize, walls: &[(usize, usize)]) -> GridScene {
        let mut blocked = vec![false; width * height];
        for &(x, y) in walls {
            blocked[y * width + x] = true;
        }
        let objects: BTreeMap<String, ObjectPlacement> = BTreeMap::new();
        GridScene::new("t", width, height, 0.25, blocked, objects, Pose::new(Cell::new(0, 0), Heading::East)).unwrap()
    }

    #[test]
    fn identity_and_open_row() {
        let s = scene_with(8, 8, &[]);
        assert!(line_of_sight(&s, Cell::new(3, 3), Cell::new(3, 3)));
        assert!(line_of_sight(&s, Cell::new(0, 3), Cell::new(7, 3)));
    }

    #[test]
    fn wall_on_midpoint_blocks() {
        let s = scene_with(8, 8, &[(4, 3)]);
        assert!(!line_of_sight(&s, Cell::new(2, 3), Cell::new(6, 3)));
        assert!(!line_of_sight(&s, Cell::new(6, 3), Cell::new(2, 3)));
    }

    #[test]
    fn exact_corner_crossing_skips_side_cells() {
        // Diagonal through lattice corners never enters (3,2) or (2,3).
        let s = scene_with(8, 8, &[(3, 2), (2, 3)]);
        assert!(line_of_sight(&s, Cell::new(2, 2), Cell::new(4, 4)));
        let s = scene_with(8, 8, &[(3, 3)]);
        assert!(!line_of_sight(&s, Cell::new(2, 2), Cell::new(4, 4)));
    }

    #[test]
    fn behind_not_visible_self_visible() {
        let s = scene_with(8, 8, &[]);
        let pose = Pose::new(Cell::new(4, 4), Heading::East);
        let vis = visible_cells(&s, pose, &FovParams::default());
        assert!(vis.contains(&Cell::new(4, 4)));
        assert!(!vis.contains(&Cell::new(3, 4)));
        assert!(vis.contains(&Cell::new(7, 4)));
        // 45 degree diagonal is on the cone boundary, included.
        assert!(vis.contains(&Cell::new(6, 6)));
        assert!(!vis.contains(&Cell::new(5, 7)));
    }

    #[test]
    fn walls_are_seen_but_not_visible_cells() {
        let s = scene_with(8, 8, &[(6, 4)]);
        let pose = Pose::new(Cell::new(4, 4), Heading::East);
        let fov = FovParams::default();
        assert!(!visible_cells(&s, pose, &fov).contains(&Cell::new(6, 4)));
        assert!(!visible_cells(&s, pose, &fov).contains(&Cell::new(7, 4)));
        assert!(visible_walls(&s, pose, &fov).contains(&Cell::new(6, 4)));
    }
}
