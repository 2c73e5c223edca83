use serde::{Deserialize, Serialize};

use crate::gridworld::{Cell, Pose};

/// Content of one slot of the egocentric view window.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum SlotContent {
    Unseen,
    Free,
    Blocked,
    Object(String),
}

/// Egocentric grid covering the whole view cone: `depth = range + 1` rows
/// (row 0 is the farthest, the last row holds the agent) and
/// `width = 2 * range + 1` columns (the middle column is straight ahead).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowShape {
    pub range: usize,
}

impl WindowShape {
    pub fn new(range: usize) -> Self {
        WindowShape { range }
    }

    pub fn depth(&self) -> usize {
        self.range + 1
    }

    pub fn width(&self) -> usize {
        2 * self.range + 1
    }

    pub fn len(&self) -> usize {
        self.depth() * self.width()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Forward and lateral (positive = right) offsets of `cell` seen from `pose`.
    pub fn egocentric(pose: Pose, cell: Cell) -> (i64, i64) {
        let (fx, fy) = pose.heading.delta();
        let (rx, ry) = pose.heading.rotate_right().delta();
        let ox = cell.x as i64 - pose.cell.x as i64;
        let oy = cell.y as i64 - pose.cell.y as i64;
        (ox * fx + oy * fy, ox * rx + oy * ry)
    }

    pub fn slot_of(&self, pose: Pose, cell: Cell) -> Option<(usize, usize)> {
        let r = self.range as i64;
        let (f, l) = Self::egocentric(pose, cell);
        ((0..=r).contains(&f) && (-r..=r).contains(&l)).then(|| ((r - f) as usize, (r + l) as usize))
    }

    /// World cell under a window slot, if it has non-negative coordinates.
    pub fn cell_at(&self, pose: Pose, row: usize, col: usize) -> Option<Cell> {
        let r = self.range as i64;
        let f = r - row as i64;
        let l = col as i64 - r;
        let (fx, fy) = pose.heading.delta();
        let (rx, ry) = pose.heading.rotate_right().delta();
        pose.cell.offset(f * fx + l * rx, f * fy + l * ry)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ViewWindow {
    pub shape: WindowShape,
    pub slots: Vec<SlotContent>,
}

impl ViewWindow {
    pub fn unseen(shape: WindowShape) -> Self {
        ViewWindow { shape, slots: vec![SlotContent::Unseen; shape.len()] }
    }

    pub fn get(&self, row: usize, col: usize) -> &SlotContent {
        &self.slots[row * self.shape.width() + col]
    }

    pub fn set(&mut self, row: usize, col: usize, content: SlotContent) {
        let w = self.shape.width();
        self.slots[row * w + col] = content;
    }

    /// `(row, col, content)` for every slot that is not `Unseen`.
    pub fn seen(&self) -> impl Iterator<Item = (usize, usize, &SlotContent)> + '_ {
        let w = self.shape.width();
        self.slots.iter().enumerate().filter(|(_, s)| **s != SlotContent::Unseen).map(move |(i, s)| (i / w, i % w, s))
    }
}

/// Binary per-slot mask with the window's shape.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Mask {
    pub depth: usize,
    pub width: usize,
    pub bits: Vec<u8>,
}

impl Mask {
    pub fn zeros(depth: usize, width: usize) -> Self {
        Mask { depth, width, bits: vec![0; depth * width] }
    }

    pub fn get(&self, row: usize, col: usize) -> u8 {
        self.bits[row * self.width + col]
    }

    pub fn set(&mut self, row: usize, col: usize, value: u8) {
        self.bits[row * self.width + col] = value;
    }

    pub fn sum(&self) -> usize {
        self.bits.iter().map(|b| *b as usize).sum()
    }

    pub fn ones(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let w = self.width;
        self.bits.iter().enumerate().filter(|(_, b)| **b != 0).map(move |(i, _)| (i / w, i % w))
    }

    /// Inclusive `(row_min, row_max, col_min, col_max)` of the set bits.
    pub fn bounding_box(&self) -> Option<(usize, usize, usize, usize)> {
        self.ones().fold(None, |acc, (r, c)| {
            Some(match acc {
                None => (r, r, c, c),
                Some((r0, r1, c0, c1)) => (r0.min(r), r1.max(r), c0.min(c), c1.max(c)),
            })
        })
    }
}
