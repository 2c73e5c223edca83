//! Line-oriented scene files:
//!
//! ```text
//! scene <id> <width> <height> <cell_size>
//! row <y> <. and # per column>
//! object <category> <color> <x> <y>
//! start <x> <y> <heading>
//! ```

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use super::{Cell, GridScene, Heading, ObjectPlacement, Pose, SceneError};

pub fn scene_to_text(scene: &GridScene) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "scene {} {} {} {}", scene.id(), scene.width(), scene.height(), scene.cell_size());
    for y in 0..scene.height() {
        let row: String =
            (0..scene.width()).map(|x| if scene.is_blocked(Cell::new(x, y)) { '#' } else { '.' }).collect();
        let _ = writeln!(out, "row {y} {row}");
    }
    for (category, placement) in scene.objects() {
        let _ = writeln!(out, "object {} {} {} {}", category, placement.color, placement.cell.x, placement.cell.y);
    }
    let start = scene.start();
    let _ = writeln!(out, "start {} {} {}", start.cell.x, start.cell.y, start.heading.letter());
    out
}

fn field<T: FromStr>(tokens: &[&str], i: usize, line: usize, name: &str) -> Result<T, SceneError> {
    let raw = tokens.get(i).ok_or_else(|| SceneError::Parse { line, msg: format!("missing field `{name}`") })?;
    raw.parse().map_err(|_| SceneError::Parse { line, msg: format!("field `{name}`: cannot parse `{raw}`") })
}

pub fn scene_from_text(text: &str) -> Result<GridScene, SceneError> {
    let mut header: Option<(String, usize, usize, f64)> = None;
    let mut rows: BTreeMap<usize, Vec<bool>> = BTreeMap::new();
    let mut objects = BTreeMap::new();
    let mut start = None;
    for (n, raw) in text.lines().enumerate() {
        let line = n + 1;
        let tokens: Vec<&str> = raw.split_whitespace().collect();
        let Some(&kind) = tokens.first() else { continue };
        let expect_len = |len: usize| {
            if tokens.len() == len {
                Ok(())
            } else {
                Err(SceneError::Parse {
                    line,
                    msg: format!("`{kind}` expects {} fields, got {}", len - 1, tokens.len() - 1),
                })
            }
        };
        match kind {
            "scene" => {
                expect_len(5)?;
                if header.is_some() {
                    return Err(SceneError::Parse { line, msg: "duplicate scene header".into() });
                }
                header = Some((
                    tokens[1].to_string(),
                    field(&tokens, 2, line, "width")?,
                    field(&tokens, 3, line, "height")?,
                    field(&tokens, 4, line, "cell_size")?,
                ));
            }
            "row" => {
                expect_len(3)?;
                let (_, width, _, _) =
                    header.as_ref().ok_or_else(|| SceneError::Parse { line, msg: "row before scene header".into() })?;
                let y: usize = field(&tokens, 1, line, "y")?;
                let cells = tokens[2]
                    .chars()
                    .map(|c| match c {
                        '.' => Ok(false),
                        '#' => Ok(true),
                        other => Err(SceneError::Parse { line, msg: format!("row: unexpected character `{other}`") }),
                    })
                    .collect::<Result<Vec<bool>, _>>()?;
                if cells.len() != *width {
                    return Err(SceneError::Parse {
                        line,
                        msg: format!("row: expected {width} cells, got {}", cells.len()),
                    });
                }
                if rows.insert(y, cells).is_some() {
                    return Err(SceneError::Parse { line, msg: format!("row: duplicate row {y}") });
                }
            }
            "object" => {
                expect_len(5)?;
                let placement = ObjectPlacement {
                    color: tokens[2].to_string(),
                    cell: Cell::new(field(&tokens, 3, line, "x")?, field(&tokens, 4, line, "y")?),
                };
                if objects.insert(tokens[1].to_string(), placement).is_some() {
                    return Err(SceneError::Parse { line, msg: format!("object: duplicate category `{}`", tokens[1]) });
                }
            }
            "start" => {
                expect_len(4)?;
                let heading = Heading::from_str(tokens[3]).map_err(|msg| SceneError::Parse { line, msg })?;
                start =
                    Some(Pose::new(Cell::new(field(&tokens, 1, line, "x")?, field(&tokens, 2, line, "y")?), heading));
            }
            other => return Err(SceneError::Parse { line, msg: format!("unknown record `{other}`") }),
        }
    }
    let last = text.lines().count();
    let (id, width, height, cell_size) =
        header.ok_or(SceneError::Parse { line: last, msg: "missing scene header".into() })?;
    if rows.len() != height || rows.keys().copied().ne(0..height) {
        return Err(SceneError::Parse { line: last, msg: format!("expected rows 0..{height}") });
    }
    let start = start.ok_or(SceneError::Parse { line: last, msg: "missing start record".into() })?;
    let blocked: Vec<bool> = rows.into_values().flatten().collect();
    GridScene::new(id, width, height, cell_size, blocked, objects, start)
}

pub fn save_scene(scene: &GridScene, path: &Path) -> Result<(), SceneError> {
    std::fs::write(path, scene_to_text(scene)).map_err(|e| SceneError::Io(format!("{}: {e}", path.display())))
}

pub fn load_scene(path: &Path) -> Result<GridScene, SceneError> {
    let text = std::fs::read_to_string(path).map_err(|e| SceneError::Io(format!("{}: {e}", path.display())))?;
    scene_from_text(&text)
}
