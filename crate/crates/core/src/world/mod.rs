//! Static environment: bounds, convex obstacles, signed landmarks and the
//! free-space queries used by the filter, the uniqueness graph and the planner.

mod geometry;
mod mapfile;
pub mod maze;

use nalgebra::Point2;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use geometry::{
    point_segment_distance, segment_polygon_distance, wrap_angle, Bounds, Polygon, PolygonDefect,
    Pose,
};
pub use mapfile::{load_map, parse_map, write_map, MapFile, MAP_FORMAT_VERSION};

/// Default interpolation step for segment collision checks, meters.
pub const DEFAULT_SEGMENT_STEP: f64 = 0.01;

/// Default rejection-sampling attempt cap.
pub const DEFAULT_SAMPLE_ATTEMPTS: usize = 100_000;

/// Landmark signature. Signatures repeat across the map by design.
pub type Signature = u32;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Landmark {
    pub id: Signature,
    pub position: Point2<f64>,
}

impl Landmark {
    pub fn new(id: Signature, x: f64, y: f64) -> Self {
        Self {
            id,
            position: Point2::new(x, y),
        }
    }
}

#[derive(Debug, Error)]
pub enum WorldError {
    #[error("failed to read map file {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("map parse error: {0}")]
    Parse(String),
    #[error("unsupported map format_version {found} (expected {expected})")]
    Version { found: u32, expected: u32 },
    #[error("invalid map: {0}")]
    Invalid(String),
    #[error("free-space sampling exhausted after {0} attempts")]
    SamplingExhausted(usize),
}

/// Immutable world model.
#[derive(Debug, Clone, PartialEq)]
pub struct Environment {
    bounds: Bounds,
    obstacles: Vec<Polygon>,
    landmarks: Vec<Landmark>,
    robot_radius: f64,
}

impl Environment {
    /// Builds an environment, checking the structural invariants: positive
    /// extent and robot radius, obstacles and landmarks inside the bounds.
    pub fn new(
        bounds: Bounds,
        obstacles: Vec<Polygon>,
        landmarks: Vec<Landmark>,
        robot_radius: f64,
    ) -> Result<Self, WorldError> {
        if !(bounds.width() > 0.0 && bounds.height() > 0.0) {
            return Err(WorldError::Invalid(format!(
                "bounds have non-positive extent: {bounds:?}"
            )));
        }
        if !(robot_radius > 0.0) || !robot_radius.is_finite() {
            return Err(WorldError::Invalid(format!(
                "robot_radius must be > 0, got {robot_radius}"
            )));
        }
        for (i, o) in obstacles.iter().enumerate() {
            if let Some(v) = o.vertices().iter().find(|v| !bounds.contains(v)) {
                return Err(WorldError::Invalid(format!(
                    "obstacle {i}: vertex ({}, {}) outside bounds",
                    v.x, v.y
                )));
            }
        }
        for (i, l) in landmarks.iter().enumerate() {
            if !bounds.contains(&l.position) {
                return Err(WorldError::Invalid(format!(
                    "landmark {i} (id {}): position ({}, {}) outside bounds",
                    l.id, l.position.x, l.position.y
                )));
            }
        }
        Ok(Self {
            bounds,
            obstacles,
            landmarks,
            robot_radius,
        })
    }

    pub fn bounds(&self) -> &Bounds {
        &self.bounds
    }

    pub fn obstacles(&self) -> &[Polygon] {
        &self.obstacles
    }

    pub fn landmarks(&self) -> &[Landmark] {
        &self.landmarks
    }

    pub fn robot_radius(&self) -> f64 {
        self.robot_radius
    }

    /// Distance from `p` to the nearest obstacle or bounding edge.
    pub fn clearance(&self, p: &Point2<f64>) -> f64 {
        self.obstacles
            .iter()
            .map(|o| o.distance(p))
            .fold(self.bounds.inner_clearance(p), f64::min)
    }

    /// Disc of `radius` at `p` lies in bounds and touches no obstacle.
    pub fn is_free_point(&self, p: &Point2<f64>, radius: f64) -> bool {
        if self.bounds.inner_clearance(p) < radius {
            return false;
        }
        self.obstacles.iter().all(|o| o.distance(p) > radius)
    }

    /// Robot disc collision test; the heading is ignored.
    pub fn is_free(&self, pose: &Pose) -> bool {
        self.is_free_point(&pose.position(), self.robot_radius)
    }

    /// Checks `is_free_point` at evenly spaced points no more than `step`
    /// apart, endpoints included. Symmetric in its endpoints.
    pub fn is_free_segment_with_radius(
        &self,
        a: &Point2<f64>,
        b: &Point2<f64>,
        step: f64,
        radius: f64,
    ) -> bool {
        assert!(step > 0.0, "segment step must be positive");
        // canonical ordering keeps the sample points identical for a->b and b->a
        let (a, b) = if (a.x, a.y) <= (b.x, b.y) {
            (a, b)
        } else {
            (b, a)
        };
        let len = (b - a).norm();
        let n = (len / step).ceil().max(1.0) as usize;
        (0..=n).all(|i| {
            let t = i as f64 / n as f64;
            let p = Point2::new(a.x + (b.x - a.x) * t, a.y + (b.y - a.y) * t);
            self.is_free_point(&p, radius)
        })
    }

    /// Exact version of `is_free_segment_with_radius` with an infinitely fine
    /// step: the disc swept along `a`-`b` stays in bounds and strictly clear.
    pub fn is_free_swept(&self, a: &Point2<f64>, b: &Point2<f64>, radius: f64) -> bool {
        if self.bounds.inner_clearance(a) < radius || self.bounds.inner_clearance(b) < radius {
            return false;
        }
        self.obstacles
            .iter()
            .all(|o| segment_polygon_distance(a, b, o) > radius)
    }

    pub fn is_free_segment(&self, a: &Pose, b: &Pose, step: f64) -> bool {
        self.is_free_segment_with_radius(&a.position(), &b.position(), step, self.robot_radius)
    }

    /// True when no obstacle interior lies between `a` and `b`.
    pub fn line_of_sight(&self, a: &Point2<f64>, b: &Point2<f64>) -> bool {
        !self.obstacles.iter().any(|o| o.blocks_segment(a, b))
    }

    /// Rejection-samples a collision-free pose, uniform over free (x, y) and
    /// uniform heading.
    pub fn sample_free_pose<R: Rng + ?Sized>(
        &self,
        rng: &mut R,
        max_attempts: usize,
    ) -> Result<Pose, WorldError> {
        let b = &self.bounds;
        for _ in 0..max_attempts {
            let x = rng.random_range(b.min_x..=b.max_x);
            let y = rng.random_range(b.min_y..=b.max_y);
            let theta = rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
            let pose = Pose::new(x, y, theta);
            if self.is_free(&pose) {
                return Ok(pose);
            }
        }
        Err(WorldError::SamplingExhausted(max_attempts))
    }

    /// Scans a regular grid for a free cell; used when validating map files.
    pub fn has_free_space(&self) -> bool {
        const N: usize = 200;
        let b = &self.bounds;
        (0..=N).any(|i| {
            (0..=N).any(|j| {
                let p = Point2::new(
                    b.min_x + b.width() * i as f64 / N as f64,
                    b.min_y + b.height() * j as f64 / N as f64,
                );
                self.is_free_point(&p, self.robot_radius)
            })
        })
    }
}
