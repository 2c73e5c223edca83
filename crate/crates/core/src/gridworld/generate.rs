use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Cell, GridScene, Heading, ObjectPlacement, Pose, SceneError};

const MAX_ATTEMPTS: usize = 32;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObjectCategory {
    pub name: String,
    pub color: String,
}

impl ObjectCategory {
    pub fn new(name: impl Into<String>, color: impl Into<String>) -> Self {
        ObjectCategory { name: name.into(), color: color.into() }
    }

    /// The seven kitchen categories; the first five are the training set.
    pub fn kitchen() -> Vec<ObjectCategory> {
        [
            ("apple", "red"),
            ("bowl", "white"),
            ("potato", "brown"),
            ("soap_bottle", "blue"),
            ("dish_sponge", "yellow"),
            ("cup", "green"),
            ("bread", "tan"),
        ]
        .into_iter()
        .map(|(n, c)| ObjectCategory::new(n, c))
        .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneParams {
    pub width: usize,
    pub height: usize,
    pub obstacle_density: f64,
    pub cell_size: f64,
    pub categories: Vec<ObjectCategory>,
}

impl Default for SceneParams {
    fn default() -> Self {
        SceneParams {
            width: 8,
            height: 8,
            obstacle_density: 0.15,
            cell_size: 0.25,
            categories: ObjectCategory::kitchen(),
        }
    }
}

impl SceneParams {
    fn check(&self) -> Result<(), SceneError> {
        if self.width < 4 || self.height < 4 {
            return Err(SceneError::BadParams(format!("{}x{} is smaller than 4x4", self.width, self.height)));
        }
        if !(0.0..=0.4).contains(&self.obstacle_density) {
            return Err(SceneError::BadParams(format!("obstacle density {} not in [0, 0.4]", self.obstacle_density)));
        }
        if self.categories.is_empty() {
            return Err(SceneError::BadParams("category list is empty".into()));
        }
        let mut names: Vec<&str> = self.categories.iter().map(|c| c.name.as_str()).collect();
        names.sort_unstable();
        if names.windows(2).any(|w| w[0] == w[1]) {
            return Err(SceneError::BadParams("duplicate category names".into()));
        }
        if names.iter().any(|n| n.is_empty() || n.contains(char::is_whitespace)) {
            return Err(SceneError::BadParams("category names must be non-empty words".into()));
        }
        Ok(())
    }
}

fn connected(width: usize, blocked: &[bool]) -> bool {
    let Some(first) = blocked.iter().position(|b| !b) else {
        return false;
    };
    let free = blocked.iter().filter(|b| !**b).count();
    let height = blocked.len() / width;
    let mut seen = vec![false; blocked.len()];
    let mut stack = vec![first];
    seen[first] = true;
    let mut count = 0;
    while let Some(i) = stack.pop() {
        count += 1;
        let (x, y) = (i % width, i / width);
        let mut push = |j: usize| {
            if !blocked[j] && !seen[j] {
                seen[j] = true;
                stack.push(j);
            }
        };
        if x > 0 {
            push(i - 1);
        }
        if x + 1 < width {
            push(i + 1);
        }
        if y > 0 {
            push(i - width);
        }
        if y + 1 < height {
            push(i + width);
        }
    }
    count == free
}

/// Generates a connected scene. Obstacles are added one at a time in a
/// seeded random order, skipping any that would split the free space.
pub fn generate_scene(seed: u64, params: &SceneParams) -> Result<GridScene, SceneError> {
    params.check()?;
    let cells = params.width * params.height;
    let wanted = (params.obstacle_density * cells as f64).round() as usize;
    if cells - wanted < params.categories.len() + 1 {
        return Err(SceneError::BadParams("not enough free cells for all objects".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..MAX_ATTEMPTS {
        let mut blocked = vec![false; cells];
        let mut order: Vec<usize> = (0..cells).collect();
        order.shuffle(&mut rng);
        let mut placed = 0;
        for i in order {
            if placed == wanted {
                break;
            }
            blocked[i] = true;
            if connected(params.width, &blocked) {
                placed += 1;
            } else {
                blocked[i] = false;
            }
        }
        if placed < wanted {
            continue;
        }
        let mut free: Vec<usize> = (0..cells).filter(|&i| !blocked[i]).collect();
        free.shuffle(&mut rng);
        let to_cell = |i: usize| Cell::new(i % params.width, i / params.width);
        let start = Pose::new(to_cell(free[0]), Heading::from_index(rng.gen_range(0..4)));
        let objects: BTreeMap<String, ObjectPlacement> = params
            .categories
            .iter()
            .zip(&free[1..])
            .map(|(cat, &i)| (cat.name.clone(), ObjectPlacement { cell: to_cell(i), color: cat.color.clone() }))
            .collect();
        return GridScene::new(
            format!("scene-{seed}"),
            params.width,
            params.height,
            params.cell_size,
            blocked,
            objects,
            start,
        );
    }
    Err(SceneError::GenerationFailed(MAX_ATTEMPTS))
}
