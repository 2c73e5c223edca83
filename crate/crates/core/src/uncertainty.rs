//! Per-cell likelihood that the target is at a position, the distance decay
//! applied to observations, and the lower-bound uncertainty `lambda`
//! (sum of likelihoods minus their maximum).
//!
//! Updates are subtractive on non-target cells, the target cell is never
//! decremented, and every value is clamped to `[0, 1]`. `lambda` is therefore
//! non-increasing along any action sequence.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gridworld::{euclid_dist, Cell, GridScene};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum UncertaintyError {
    #[error("likelihood map has an empty domain")]
    EmptyDomain,
    #[error("cell ({0}) is not a free cell of the map's scene")]
    OutsideDomain(Cell),
    #[error("map is bound to scene `{expected}`, got `{found}`")]
    SceneMismatch { expected: String, found: String },
    #[error("expected {expected} likelihood values, got {found}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("likelihood {0} outside [0, 1]")]
    OutOfRange(f64),
    #[error("decay parameters need 0 < alpha < beta, got alpha={alpha} beta={beta}")]
    BadDecay { alpha: f64, beta: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayParams {
    pub alpha: f64,
    pub beta: f64,
}

impl Default for DecayParams {
    fn default() -> Self {
        DecayParams { alpha: 1.0, beta: 2.0 }
    }
}

impl DecayParams {
    pub fn new(alpha: f64, beta: f64) -> Result<Self, UncertaintyError> {
        if alpha > 0.0 && alpha < beta && beta.is_finite() {
            Ok(DecayParams { alpha, beta })
        } else {
            Err(UncertaintyError::BadDecay { alpha, beta })
        }
    }
}

/// Piecewise-linear recognition decay: 1 up to `alpha`, linear to 0 at `beta`.
pub fn psi(dist: f64, params: &DecayParams) -> f64 {
    if dist <= params.alpha {
        1.0
    } else if dist <= params.beta {
        1.0 - (dist - params.alpha) / (params.beta - params.alpha)
    } else {
        0.0
    }
}

/// Sum minus maximum of a non-empty set of likelihoods.
pub fn lambda_of(values: &[f64]) -> Result<f64, UncertaintyError> {
    if values.is_empty() {
        return Err(UncertaintyError::EmptyDomain);
    }
    let sum: f64 = values.iter().sum();
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(sum - max)
}

fn clamp01(v: f64) -> f64 {
    v.clamp(0.0, 1.0)
}

/// Likelihood per free cell of one scene, stored in row-major order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LikelihoodMap {
    scene_id: String,
    width: usize,
    cell_size: f64,
    /// Row-major slot of each grid cell, `u32::MAX` for blocked cells.
    slots: Vec<u32>,
    cells: Vec<Cell>,
    values: Vec<f64>,
}

impl LikelihoodMap {
    /// Every free cell starts at likelihood 1.
    pub fn new(scene: &GridScene) -> Self {
        let cells: Vec<Cell> = scene.free_cells().collect();
        let mut slots = vec![u32::MAX; scene.width() * scene.height()];
        for (i, c) in cells.iter().enumerate() {
            slots[scene.index(*c)] = i as u32;
        }
        LikelihoodMap {
            scene_id: scene.id().to_string(),
            width: scene.width(),
            cell_size: scene.cell_size(),
            slots,
            values: vec![1.0; cells.len()],
            cells,
        }
    }

    /// Rebuilds a map from a row-major value array over the scene's free cells.
    pub fn from_values(scene: &GridScene, values: Vec<f64>) -> Result<Self, UncertaintyError> {
        let mut map = LikelihoodMap::new(scene);
        if values.len() != map.values.len() {
            return Err(UncertaintyError::LengthMismatch { expected: map.values.len(), found: values.len() });
        }
        if let Some(bad) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(UncertaintyError::OutOfRange(*bad));
        }
        map.values = values;
        Ok(map)
    }

    pub fn scene_id(&self) -> &str {
        &self.scene_id
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    /// Row-major likelihoods of the free cells.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    fn slot(&self, cell: Cell) -> Option<usize> {
        if cell.x >= self.width {
            return None;
        }
        self.slots.get(cell.y * self.width + cell.x).filter(|s| **s != u32::MAX).map(|s| *s as usize)
    }

    pub fn get(&self, cell: Cell) -> Option<f64> {
        self.slot(cell).map(|s| self.values[s])
    }

    /// Overwrites one likelihood (clamped).
    pub fn set(&mut self, cell: Cell, value: f64) -> Result<(), UncertaintyError> {
        let slot = self.slot(cell).ok_or(UncertaintyError::OutsideDomain(cell))?;
        self.values[slot] = clamp01(value);
        Ok(())
    }

    pub fn check_bound(&self, scene: &GridScene) -> Result<(), UncertaintyError> {
        if self.scene_id != scene.id() {
            return Err(UncertaintyError::SceneMismatch {
                expected: self.scene_id.clone(),
                found: scene.id().to_string(),
            });
        }
        if self.values.len() != scene.free_count() {
            return Err(UncertaintyError::LengthMismatch { expected: scene.free_count(), found: self.values.len() });
        }
        Ok(())
    }

    pub fn lambda(&self) -> f64 {
        lambda_of(&self.values).expect("maps built from scenes have at least one free cell")
    }

    /// Cell with the largest likelihood; ties go to the first in row-major order.
    pub fn argmax(&self) -> Cell {
        let mut best = 0;
        for (i, v) in self.values.iter().enumerate() {
            if *v > self.values[best] {
                best = i;
            }
        }
        self.cells[best]
    }

    fn view_mask(&self, view: &[Cell]) -> Result<Vec<bool>, UncertaintyError> {
        let mut in_view = vec![false; self.values.len()];
        for cell in view {
            in_view[self.slot(*cell).ok_or(UncertaintyError::OutsideDomain(*cell))?] = true;
        }
        Ok(in_view)
    }

    fn dist(&self, a: Cell, b: Cell) -> f64 {
        euclid_dist(a, b, self.cell_size)
    }

    /// Navigation observation from `agent` with the true target at `target`.
    /// Returns the decrease in `lambda`.
    pub fn update_on_nav(
        &mut self,
        view: &[Cell],
        agent: Cell,
        target: Cell,
        params: &DecayParams,
    ) -> Result<f64, UncertaintyError> {
        let t = self.slot(target).ok_or(UncertaintyError::OutsideDomain(target))?;
        let sighted = view.contains(&target).then_some(t);
        self.apply_nav(view, agent, sighted, params)
    }

    /// Navigation update where the caller already knows whether, and where,
    /// the target was sighted. `None` means the target was not in view.
    pub fn update_on_nav_sighted(
        &mut self,
        view: &[Cell],
        agent: Cell,
        sighted: Option<Cell>,
        params: &DecayParams,
    ) -> Result<f64, UncertaintyError> {
        let sighted = sighted.map(|c| self.slot(c).ok_or(UncertaintyError::OutsideDomain(c))).transpose()?;
        self.apply_nav(view, agent, sighted, params)
    }

    fn apply_nav(
        &mut self,
        view: &[Cell],
        agent: Cell,
        sighted: Option<usize>,
        params: &DecayParams,
    ) -> Result<f64, UncertaintyError> {
        let in_view = self.view_mask(view)?;
        if let Some(t) = sighted {
            if !in_view[t] {
                return Err(UncertaintyError::OutsideDomain(self.cells[t]));
            }
        }
        let before = self.lambda();
        let target_drop = sighted.map_or(0.0, |t| psi(self.dist(agent, self.cells[t]), params));
        for i in 0..self.values.len() {
            if Some(i) == sighted {
                continue;
            }
            let seen = if in_view[i] { psi(self.dist(agent, self.cells[i]), params) } else { 0.0 };
            self.values[i] = clamp01(self.values[i] - seen - target_drop);
        }
        Ok(before - self.lambda())
    }

    /// Ask answered by a ground-truth teacher. Returns the decrease in `lambda`.
    pub fn update_on_ask(
        &mut self,
        view: &[Cell],
        agent: Cell,
        target: Cell,
        params: &DecayParams,
    ) -> Result<f64, UncertaintyError> {
        let t = self.slot(target).ok_or(UncertaintyError::OutsideDomain(target))?;
        let sighted = view.contains(&target).then_some(t);
        self.apply_ask(view, agent, sighted, params)
    }

    pub fn update_on_ask_sighted(
        &mut self,
        view: &[Cell],
        agent: Cell,
        sighted: Option<Cell>,
        params: &DecayParams,
    ) -> Result<f64, UncertaintyError> {
        let sighted = sighted.map(|c| self.slot(c).ok_or(UncertaintyError::OutsideDomain(c))).transpose()?;
        self.apply_ask(view, agent, sighted, params)
    }

    fn apply_ask(
        &mut self,
        view: &[Cell],
        agent: Cell,
        sighted: Option<usize>,
        params: &DecayParams,
    ) -> Result<f64, UncertaintyError> {
        let in_view = self.view_mask(view)?;
        if let Some(t) = sighted {
            if !in_view[t] {
                return Err(UncertaintyError::OutsideDomain(self.cells[t]));
            }
        }
        let before = self.lambda();
        let target_drop = sighted.map_or(0.0, |t| psi(self.dist(agent, self.cells[t]), params));
        for i in 0..self.values.len() {
            if Some(i) == sighted {
                continue;
            }
            self.values[i] = if in_view[i] { 0.0 } else { clamp01(self.values[i] - target_drop) };
        }
        Ok(before - self.lambda())
    }

    /// Zeroes every cell outside `keep`; used when the agent learns the
    /// target is somewhere inside a region.
    pub fn restrict_to(&mut self, keep: &[Cell]) -> Result<f64, UncertaintyError> {
        let inside = self.view_mask(keep)?;
        let before = self.lambda();
        for (v, k) in self.values.iter_mut().zip(inside) {
            if !k {
                *v = 0.0;
            }
        }
        Ok(before - self.lambda())
    }
}

/// Plain-text graymap (`P2`), one pixel per cell, `round(255 * phi)` with
/// halves rounded up; blocked cells are 0.
pub fn heatmap(map: &LikelihoodMap, scene: &GridScene) -> Result<String, UncertaintyError> {
    map.check_bound(scene)?;
    let mut out = format!("P2\n{} {}\n255\n", scene.width(), scene.height());
    for y in 0..scene.height() {
        let row: Vec<String> = (0..scene.width())
            .map(|x| {
                let v = map.get(Cell::new(x, y)).unwrap_or(0.0);
                ((255.0 * v + 0.5).floor() as u32).min(255).to_string()
            })
            .collect();
        let _ = writeln!(out, "{}", row.join(" "));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gridworld::{Heading, Pose};
    use std::collections::BTreeMap;

    fn open(width: usize, height: usize) -> GridScene {
        GridScene::new(
            "u",
            width,
            height,
            0.25,
            vec![false; width * height],
            BTreeMap::new(),
            Pose::new(Cell::new(0, 0), Heading::East),
        )
        .unwrap()
    }

    #[test]
    fn psi_spot_values() {
        let p = DecayParams::default();
        assert_eq!(psi(0.5, &p), 1.0);
        assert_eq!(psi(1.0, &p), 1.0);
        assert_eq!(psi(1.5, &p), 0.5);
        assert_eq!(psi(2.0, &p), 0.0);
        assert_eq!(psi(3.7, &p), 0.0);
    }

    #[test]
    fn decay_params_validated() {
        assert!(DecayParams::new(2.0, 1.0).is_err());
        assert!(DecayParams::new(0.0, 1.0).is_err());
        assert!(DecayParams::new(1.0, 2.0).is_ok());
    }

    #[test]
    fn init_map_domain_and_lambda() {
        let map = LikelihoodMap::new(&open(3, 3));
        assert_eq!(map.len(), 9);
        assert!(map.values().iter().all(|v| *v == 1.0));
        assert_eq!(map.lambda(), 8.0);

        let mut blocked = vec![false; 64];
        for i in [9, 18, 27, 36, 45] {
            blocked[i] = true;
        }
        let scene =
            GridScene::new("b", 8, 8, 0.25, blocked, BTreeMap::new(), Pose::new(Cell::new(0, 0), Heading::East))
                .unwrap();
        let map = LikelihoodMap::new(&scene);
        assert_eq!(map.len(), 59);
        assert_eq!(map.lambda(), 58.0);
    }

    #[test]
    fn lambda_examples() {
        assert_eq!(lambda_of(&[1.0; 9]).unwrap(), 8.0);
        assert_eq!(lambda_of(&[0.0, 0.0, 0.7, 0.0]).unwrap(), 0.0);
        assert_eq!(lambda_of(&[1.0, 0.5, 0.25]).unwrap(), 0.75);
        assert_eq!(lambda_of(&[]), Err(UncertaintyError::EmptyDomain));
    }

    #[test]
    fn corridor_nav_update() {
        let scene = open(5, 1);
        let mut map = LikelihoodMap::new(&scene);
        let view = [Cell::new(0, 0), Cell::new(1, 0), Cell::new(2, 0)];
        let d = map.update_on_nav(&view, Cell::new(0, 0), Cell::new(4, 0), &DecayParams::default()).unwrap();
        assert_eq!(map.values(), &[0.0, 0.0, 0.0, 1.0, 1.0]);
        assert_eq!(map.lambda(), 1.0);
        assert_eq!(d, 3.0);
    }

    #[test]
    fn empty_view_changes_nothing() {
        let scene = open(3, 3);
        let mut map = LikelihoodMap::new(&scene);
        let d = map.update_on_nav(&[], Cell::new(0, 0), Cell::new(2, 2), &DecayParams::default()).unwrap();
        assert_eq!(d, 0.0);
        assert_eq!(map, LikelihoodMap::new(&scene));
    }

    #[test]
    fn target_close_in_view_collapses_nav_and_ask() {
        let scene = open(3, 3);
        let all: Vec<Cell> = scene.free_cells().collect();
        for ask in [false, true] {
            let mut map = LikelihoodMap::new(&scene);
            let target = Cell::new(1, 1);
            let agent = Cell::new(1, 0); // 0.25 units away
            let p = DecayParams::default();
            let d = if ask {
                map.update_on_ask(&all, agent, target, &p).unwrap()
            } else {
                map.update_on_nav(&all, agent, target, &p).unwrap()
            };
            assert_eq!(d, 8.0);
            assert_eq!(map.lambda(), 0.0);
            assert_eq!(map.get(target), Some(1.0));
        }
    }

    #[test]
    fn ask_without_target_is_ground_truth_and_idempotent() {
        let scene = open(5, 1);
        let mut map = LikelihoodMap::new(&scene);
        let view = [Cell::new(0, 0), Cell::new(1, 0), Cell::new(2, 0)];
        let p = DecayParams::default();
        assert_eq!(map.update_on_ask(&view, Cell::new(0, 0), Cell::new(4, 0), &p).unwrap(), 3.0);
        assert_eq!(map.update_on_ask(&view, Cell::new(0, 0), Cell::new(4, 0), &p).unwrap(), 0.0);
    }

    #[test]
    fn foreign_cells_rejected() {
        let scene = open(3, 3);
        let mut map = LikelihoodMap::new(&scene);
        let p = DecayParams::default();
        let err = map.update_on_nav(&[Cell::new(5, 5)], Cell::new(0, 0), Cell::new(1, 1), &p).unwrap_err();
        assert_eq!(err, UncertaintyError::OutsideDomain(Cell::new(5, 5)));
        assert!(map.check_bound(&open(4, 4)).is_err());
    }

    #[test]
    fn heatmap_rendering() {
        let scene = open(3, 1);
        let mut map = LikelihoodMap::new(&scene);
        assert_eq!(heatmap(&map, &scene).unwrap(), "P2\n3 1\n255\n255 255 255\n");
        map.set(Cell::new(0, 0), 0.5).unwrap();
        map.set(Cell::new(2, 0), 0.0).unwrap();
        assert_eq!(heatmap(&map, &scene).unwrap(), "P2\n3 1\n255\n128 255 0\n");
    }
}
