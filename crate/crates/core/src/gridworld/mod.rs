//! Scenes, poses, visibility and path queries on a 2D occupancy grid.
//!
//! Rows grow downward: `North` decreases `y`, `East` increases `x`.

mod codec;
mod generate;
mod path;
mod visibility;

use std::collections::{BTreeMap, VecDeque};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use codec::{load_scene, save_scene, scene_from_text, scene_to_text};
pub use generate::{generate_scene, ObjectCategory, SceneParams};
pub use path::{plan_first_move, pose_distances, shortest_path_len, shortest_path_len_with_fov, NavMove};
pub use visibility::{line_of_sight, visible_cells, visible_walls, SceneContext};

/// Tolerance used for every distance and angle comparison.
pub const GEOM_EPS: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SceneError {
    #[error("scene dimensions {width}x{height} are invalid")]
    BadDimensions { width: usize, height: usize },
    #[error("cell size must be positive, got {0}")]
    BadCellSize(f64),
    #[error("cell ({x}, {y}) is out of bounds")]
    OutOfBounds { x: i64, y: i64 },
    #[error("start cell ({0}) is blocked")]
    StartBlocked(Cell),
    #[error("object `{category}` sits on blocked cell ({cell})")]
    ObjectBlocked { category: String, cell: Cell },
    #[error("objects `{first}` and `{second}` share cell ({cell})")]
    ObjectOverlap { first: String, second: String, cell: Cell },
    #[error("free cell ({0}) is not reachable from the start")]
    Unreachable(Cell),
    #[error("invalid generation parameters: {0}")]
    BadParams(String),
    #[error("could not generate a connected scene after {0} attempts")]
    GenerationFailed(usize),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("io error: {0}")]
    Io(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Cell {
    pub x: usize,
    pub y: usize,
}

impl Cell {
    pub const fn new(x: usize, y: usize) -> Self {
        Cell { x, y }
    }

    /// Cell displaced by `(dx, dy)`, or `None` when the result would be negative.
    pub fn offset(self, dx: i64, dy: i64) -> Option<Cell> {
        let x = self.x as i64 + dx;
        let y = self.y as i64 + dy;
        (x >= 0 && y >= 0).then(|| Cell::new(x as usize, y as usize))
    }
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}, {}", self.x, self.y)
    }
}

/// Euclidean center-to-center distance in length units.
pub fn euclid_dist(a: Cell, b: Cell, cell_size: f64) -> f64 {
    let dx = a.x as f64 - b.x as f64;
    let dy = a.y as f64 - b.y as f64;
    cell_size * (dx * dx + dy * dy).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Heading {
    North,
    East,
    South,
    West,
}

impl Heading {
    pub const ALL: [Heading; 4] = [Heading::North, Heading::East, Heading::South, Heading::West];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Heading {
        Self::ALL[i % 4]
    }

    pub fn rotate_left(self) -> Heading {
        Self::from_index(self.index() + 3)
    }

    pub fn rotate_right(self) -> Heading {
        Self::from_index(self.index() + 1)
    }

    /// Unit step `(dx, dy)` for this heading.
    pub fn delta(self) -> (i64, i64) {
        match self {
            Heading::North => (0, -1),
            Heading::East => (1, 0),
            Heading::South => (0, 1),
            Heading::West => (-1, 0),
        }
    }

    pub fn letter(self) -> char {
        match self {
            Heading::North => 'N',
            Heading::East => 'E',
            Heading::South => 'S',
            Heading::West => 'W',
        }
    }
}

impl FromStr for Heading {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "N" | "north" | "North" => Ok(Heading::North),
            "E" | "east" | "East" => Ok(Heading::East),
            "S" | "south" | "South" => Ok(Heading::South),
            "W" | "west" | "West" => Ok(Heading::West),
            other => Err(format!("unknown heading `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Pose {
    pub cell: Cell,
    pub heading: Heading,
}

impl Pose {
    pub const fn new(cell: Cell, heading: Heading) -> Self {
        Pose { cell, heading }
    }

    /// Dense index over `(cell, heading)` states of a `width`-wide grid.
    pub fn state_index(self, width: usize) -> usize {
        (self.cell.y * width + self.cell.x) * 4 + self.heading.index()
    }

    pub fn from_state_index(index: usize, width: usize) -> Pose {
        let cell_index = index / 4;
        Pose::new(Cell::new(cell_index % width, cell_index / width), Heading::from_index(index % 4))
    }
}

/// Field-of-view cone. Defaults: 45 degree half-angle, 3.0 units range.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FovParams {
    pub half_angle_deg: f64,
    pub max_range: f64,
}

impl Default for FovParams {
    fn default() -> Self {
        FovParams { half_angle_deg: 45.0, max_range: 3.0 }
    }
}

impl FovParams {
    pub fn new(half_angle_deg: f64, max_range: f64) -> Result<Self, SceneError> {
        if !(half_angle_deg > 0.0 && half_angle_deg <= 90.0) {
            return Err(SceneError::BadParams(format!("half angle {half_angle_deg} not in (0, 90]")));
        }
        if max_range.is_nan() || max_range <= 0.0 {
            return Err(SceneError::BadParams(format!("max range {max_range} must be positive")));
        }
        Ok(FovParams { half_angle_deg, max_range })
    }

    /// Range expressed in whole cells for a given cell size.
    pub fn range_cells(&self, cell_size: f64) -> usize {
        (self.max_range / cell_size + GEOM_EPS).floor() as usize
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectPlacement {
    pub cell: Cell,
    pub color: String,
}

/// An occupancy grid with one instance per object category and a start pose.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridScene {
    id: String,
    width: usize,
    height: usize,
    cell_size: f64,
    blocked: Vec<bool>,
    objects: BTreeMap<String, ObjectPlacement>,
    start: Pose,
}

impl GridScene {
    /// Builds and validates a scene.
    pub fn new(
        id: impl Into<String>,
        width: usize,
        height: usize,
        cell_size: f64,
        blocked: Vec<bool>,
        objects: BTreeMap<String, ObjectPlacement>,
        start: Pose,
    ) -> Result<Self, SceneError> {
        let scene = GridScene { id: id.into(), width, height, cell_size, blocked, objects, start };
        scene.validate()?;
        Ok(scene)
    }

    /// Skips validation; lets tests build deliberately broken layouts.
    #[cfg(test)]
    pub(crate) fn new_unchecked(width: usize, height: usize, blocked: Vec<bool>, start: Pose) -> GridScene {
        GridScene { id: "unchecked".into(), width, height, cell_size: 0.25, blocked, objects: BTreeMap::new(), start }
    }

    pub fn validate(&self) -> Result<(), SceneError> {
        if self.width == 0 || self.height == 0 || self.blocked.len() != self.width * self.height {
            return Err(SceneError::BadDimensions { width: self.width, height: self.height });
        }
        if !(self.cell_size > 0.0 && self.cell_size.is_finite()) {
            return Err(SceneError::BadCellSize(self.cell_size));
        }
        self.check_bounds(self.start.cell)?;
        if self.is_blocked(self.start.cell) {
            return Err(SceneError::StartBlocked(self.start.cell));
        }
        let mut owners: BTreeMap<Cell, &str> = BTreeMap::new();
        for (category, placement) in &self.objects {
            self.check_bounds(placement.cell)?;
            if self.is_blocked(placement.cell) {
                return Err(SceneError::ObjectBlocked { category: category.clone(), cell: placement.cell });
            }
            if let Some(first) = owners.insert(placement.cell, category) {
                return Err(SceneError::ObjectOverlap {
                    first: first.to_string(),
                    second: category.clone(),
                    cell: placement.cell,
                });
            }
        }
        let reach = self.reachable_from(self.start.cell);
        if let Some(cell) = self.free_cells().find(|c| !reach[self.index(*c)]) {
            return Err(SceneError::Unreachable(cell));
        }
        Ok(())
    }

    fn check_bounds(&self, cell: Cell) -> Result<(), SceneError> {
        if self.contains(cell) {
            Ok(())
        } else {
            Err(SceneError::OutOfBounds { x: cell.x as i64, y: cell.y as i64 })
        }
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn set_id(&mut self, id: impl Into<String>) {
        self.id = id.into();
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn cell_size(&self) -> f64 {
        self.cell_size
    }

    pub fn start(&self) -> Pose {
        self.start
    }

    pub fn objects(&self) -> &BTreeMap<String, ObjectPlacement> {
        &self.objects
    }

    pub fn object(&self, category: &str) -> Option<&ObjectPlacement> {
        self.objects.get(category)
    }

    pub fn contains(&self, cell: Cell) -> bool {
        cell.x < self.width && cell.y < self.height
    }

    /// Row-major index of an in-bounds cell.
    pub fn index(&self, cell: Cell) -> usize {
        cell.y * self.width + cell.x
    }

    pub fn cell_at(&self, index: usize) -> Cell {
        Cell::new(index % self.width, index / self.width)
    }

    /// Out-of-bounds cells count as blocked.
    pub fn is_blocked(&self, cell: Cell) -> bool {
        !self.contains(cell) || self.blocked[self.index(cell)]
    }

    pub fn is_free(&self, cell: Cell) -> bool {
        !self.is_blocked(cell)
    }

    /// Signed-coordinate lookup; anything outside the grid is not free.
    pub fn is_free_at(&self, x: i64, y: i64) -> bool {
        x >= 0 && y >= 0 && self.is_free(Cell::new(x as usize, y as usize))
    }

    pub fn blocked_cells(&self) -> impl Iterator<Item = Cell> + '_ {
        (0..self.blocked.len()).filter(|&i| self.blocked[i]).map(|i| self.cell_at(i))
    }

    /// Free cells in row-major order.
    pub fn free_cells(&self) -> impl Iterator<Item = Cell> + '_ {
        (0..self.blocked.len()).filter(|&i| !self.blocked[i]).map(|i| self.cell_at(i))
    }

    pub fn free_count(&self) -> usize {
        self.blocked.iter().filter(|b| !**b).count()
    }

    /// The free cell one step ahead of `pose`, if any.
    pub fn ahead(&self, pose: Pose) -> Option<Cell> {
        let (dx, dy) = pose.heading.delta();
        pose.cell.offset(dx, dy).filter(|c| self.is_free(*c))
    }

    /// 4-connected flood fill over free cells.
    pub fn reachable_from(&self, start: Cell) -> Vec<bool> {
        let mut seen = vec![false; self.blocked.len()];
        if self.is_blocked(start) {
            return seen;
        }
        let mut queue = VecDeque::from([start]);
        seen[self.index(start)] = true;
        while let Some(cell) = queue.pop_front() {
            for heading in Heading::ALL {
                let (dx, dy) = heading.delta();
                if let Some(next) = cell.offset(dx, dy) {
                    if self.is_free(next) && !seen[self.index(next)] {
                        seen[self.index(next)] = true;
                        queue.push_back(next);
                    }
                }
            }
        }
        seen
    }

    /// Same layout with objects moved to new cells; validated.
    pub fn with_objects(&self, objects: BTreeMap<String, ObjectPlacement>) -> Result<GridScene, SceneError> {
        let mut scene = self.clone();
        scene.objects = objects;
        scene.validate()?;
        Ok(scene)
    }
}
