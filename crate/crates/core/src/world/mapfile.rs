//! TOML map format.
//!
//! ```toml
//! format_version = 1
//! robot_radius = 0.12
//! bounds = [0.0, 0.0, 16.0, 12.0]   # min_x, min_y, max_x, max_y
//!
//! [[obstacles]]
//! vertices = [[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]]
//!
//! [[landmarks]]
//! id = 3
//! x = 2.0
//! y = 0.5
//! ```

use std::path::Path;

use nalgebra::Point2;
use serde::{Deserialize, Serialize};

use super::{Bounds, Environment, Landmark, Polygon, PolygonDefect, WorldError};

pub const MAP_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapFile {
    pub format_version: u32,
    pub robot_radius: f64,
    pub bounds: [f64; 4],
    #[serde(default)]
    pub obstacles: Vec<ObstacleEntry>,
    #[serde(default)]
    pub landmarks: Vec<LandmarkEntry>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObstacleEntry {
    pub vertices: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LandmarkEntry {
    pub id: u32,
    pub x: f64,
    pub y: f64,
}

impl MapFile {
    pub fn from_environment(env: &Environment) -> Self {
        let b = env.bounds();
        Self {
            format_version: MAP_FORMAT_VERSION,
            robot_radius: env.robot_radius(),
            bounds: [b.min_x, b.min_y, b.max_x, b.max_y],
            obstacles: env
                .obstacles()
                .iter()
                .map(|o| ObstacleEntry {
                    vertices: o.vertices().iter().map(|v| [v.x, v.y]).collect(),
                })
                .collect(),
            landmarks: env
                .landmarks()
                .iter()
                .map(|l| LandmarkEntry {
                    id: l.id,
                    x: l.position.x,
                    y: l.position.y,
                })
                .collect(),
        }
    }

    pub fn into_environment(self) -> Result<Environment, WorldError> {
        if self.format_version != MAP_FORMAT_VERSION {
            return Err(WorldError::Version {
                found: self.format_version,
                expected: MAP_FORMAT_VERSION,
            });
        }
        let [min_x, min_y, max_x, max_y] = self.bounds;
        let obstacles = self
            .obstacles
            .into_iter()
            .enumerate()
            .map(|(i, o)| {
                let verts = o.vertices.iter().map(|v| Point2::new(v[0], v[1])).collect();
                Polygon::new(verts).map_err(|d| {
                    let why = match d {
                        PolygonDefect::TooFewVertices => "fewer than 3 vertices",
                        PolygonDefect::Degenerate => "zero area",
                        PolygonDefect::NotConvex => "not convex",
                    };
                    WorldError::Invalid(format!("obstacle {i}: {why}"))
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        let landmarks = self
            .landmarks
            .iter()
            .map(|l| Landmark::new(l.id, l.x, l.y))
            .collect();
        Environment::new(
            Bounds::new(min_x, min_y, max_x, max_y),
            obstacles,
            landmarks,
            self.robot_radius,
        )
    }
}

/// Parses map text and validates every environment invariant, including the
/// existence of free space.
pub fn parse_map(text: &str) -> Result<Environment, WorldError> {
    let file: MapFile = toml::from_str(text).map_err(|e| WorldError::Parse(e.to_string()))?;
    let env = file.into_environment()?;
    if !env.has_free_space() {
        return Err(WorldError::Invalid("no collision-free pose exists".into()));
    }
    Ok(env)
}

pub fn load_map(path: impl AsRef<Path>) -> Result<Environment, WorldError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| WorldError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_map(&text)
}

pub fn write_map(env: &Environment) -> String {
    toml::to_string(&MapFile::from_environment(env)).expect("map serializes")
}
