//! JSON scene files.

use serde::{Deserialize, Serialize};

use super::{LargeObject, Scene, SceneError, SmallObject};
use crate::classes::{HeightClass, LargeClass, SmallClass};
use crate::geometry::{Cell, Horizon, Pose, Rotation};

pub const SCENE_FORMAT: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneFile {
    pub format: u32,
    pub grid_size: usize,
    /// Row-major string of `0`/`1`.
    pub navigable: String,
    pub large_objects: Vec<LargeEntry>,
    pub small_objects: Vec<SmallEntry>,
    pub start: StartEntry,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LargeEntry {
    pub class: LargeClass,
    pub cells: Vec<[i32; 2]>,
    pub articulated: bool,
    pub height_class: HeightClass,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmallEntry {
    pub class: SmallClass,
    pub cell: [i32; 2],
    pub container: Option<usize>,
    pub height_class: HeightClass,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StartEntry {
    pub x: i32,
    pub y: i32,
    pub r: Rotation,
    #[serde(default = "initial_horizon")]
    pub h: Horizon,
}

fn initial_horizon() -> Horizon {
    Horizon::INITIAL
}

#[derive(Debug, thiserror::Error)]
pub enum SceneFileError {
    #[error("unsupported scene format {0}")]
    Format(u32),
    #[error("navigable string contains `{0}`; only 0 and 1 are allowed")]
    BadCell(char),
    #[error(transparent)]
    Invalid(#[from] SceneError),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

fn cell(c: [i32; 2]) -> Cell {
    Cell::new(c[0], c[1])
}

impl From<&Scene> for SceneFile {
    fn from(scene: &Scene) -> Self {
        SceneFile {
            format: SCENE_FORMAT,
            grid_size: scene.grid_size,
            navigable: scene.navigable.iter().map(|&n| if n { '1' } else { '0' }).collect(),
            large_objects: scene
                .large_objects
                .iter()
                .map(|o| LargeEntry {
                    class: o.class,
                    cells: o.footprint.iter().map(|c| [c.x, c.y]).collect(),
                    articulated: o.articulated,
                    height_class: o.height,
                })
                .collect(),
            small_objects: scene
                .small_objects
                .iter()
                .map(|o| SmallEntry {
                    class: o.class,
                    cell: [o.cell.x, o.cell.y],
                    container: o.container,
                    height_class: o.height,
                })
                .collect(),
            start: StartEntry { x: scene.start.x, y: scene.start.y, r: scene.start.r, h: scene.start.h },
        }
    }
}

impl TryFrom<SceneFile> for Scene {
    type Error = SceneFileError;

    fn try_from(file: SceneFile) -> Result<Self, Self::Error> {
        if file.format != SCENE_FORMAT {
            return Err(SceneFileError::Format(file.format));
        }
        let navigable = file
            .navigable
            .chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(SceneFileError::BadCell(other)),
            })
            .collect::<Result<Vec<_>, _>>()?;
        let large = file
            .large_objects
            .into_iter()
            .map(|e| LargeObject {
                class: e.class,
                footprint: e.cells.into_iter().map(cell).collect(),
                articulated: e.articulated,
                height: e.height_class,
            })
            .collect();
        let small = file
            .small_objects
            .into_iter()
            .map(|e| SmallObject { class: e.class, cell: cell(e.cell), container: e.container, height: e.height_class })
            .collect();
        let start = Pose::new(file.start.x, file.start.y, file.start.r, file.start.h);
        Ok(Scene::new(file.grid_size, navigable, large, small, start)?)
    }
}

impl Scene {
    pub fn to_json(&self) -> String {
        serde_json::to_string(&SceneFile::from(self)).expect("scene serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, SceneFileError> {
        let file: SceneFile = serde_json::from_str(text)?;
        Scene::try_from(file)
    }
}
