use std::f64::consts::PI;

use nalgebra::{Point2, Vector2};
use serde::{Deserialize, Serialize};

/// Wraps an angle into `(-π, π]`.
pub fn wrap_angle(theta: f64) -> f64 {
    let a = (theta + PI).rem_euclid(2.0 * PI) - PI;
    if a <= -PI {
        a + 2.0 * PI
    } else {
        a
    }
}

/// Planar robot pose. The heading is wrapped on every construction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

impl Pose {
    pub fn new(x: f64, y: f64, theta: f64) -> Self {
        Self {
            x,
            y,
            theta: wrap_angle(theta),
        }
    }

    pub fn position(&self) -> Point2<f64> {
        Point2::new(self.x, self.y)
    }

    pub fn to_vector(&self) -> nalgebra::Vector3<f64> {
        nalgebra::Vector3::new(self.x, self.y, self.theta)
    }

    pub fn from_vector(v: &nalgebra::Vector3<f64>) -> Self {
        Self::new(v[0], v[1], v[2])
    }

    pub fn distance(&self, other: &Pose) -> f64 {
        (self.position() - other.position()).norm()
    }
}

/// Axis-aligned map bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub min_x: f64,
    pub min_y: f64,
    pub max_x: f64,
    pub max_y: f64,
}

impl Bounds {
    pub fn new(min_x: f64, min_y: f64, max_x: f64, max_y: f64) -> Self {
        Self {
            min_x,
            min_y,
            max_x,
            max_y,
        }
    }

    pub fn contains(&self, p: &Point2<f64>) -> bool {
        p.x >= self.min_x && p.x <= self.max_x && p.y >= self.min_y && p.y <= self.max_y
    }

    pub fn width(&self) -> f64 {
        self.max_x - self.min_x
    }

    pub fn height(&self) -> f64 {
        self.max_y - self.min_y
    }

    pub fn diagonal(&self) -> f64 {
        self.width().hypot(self.height())
    }

    /// Distance from `p` to the nearest bounding edge; negative when outside.
    pub fn inner_clearance(&self, p: &Point2<f64>) -> f64 {
        (p.x - self.min_x)
            .min(self.max_x - p.x)
            .min(p.y - self.min_y)
            .min(self.max_y - p.y)
    }
}

/// Convex polygon with counter-clockwise vertices.
#[derive(Debug, Clone, PartialEq)]
pub struct Polygon {
    vertices: Vec<Point2<f64>>,
}

/// Reasons a vertex list is not an acceptable convex polygon.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PolygonDefect {
    TooFewVertices,
    Degenerate,
    NotConvex,
}

impl Polygon {
    /// Builds a convex polygon, reordering clockwise input to counter-clockwise.
    pub fn new(mut vertices: Vec<Point2<f64>>) -> Result<Self, PolygonDefect> {
        if vertices.len() < 3 {
            return Err(PolygonDefect::TooFewVertices);
        }
        let area = signed_area(&vertices);
        if area.abs() < 1e-12 {
            return Err(PolygonDefect::Degenerate);
        }
        if area < 0.0 {
            vertices.reverse();
        }
        let n = vertices.len();
        for i in 0..n {
            let a = vertices[i];
            let b = vertices[(i + 1) % n];
            let c = vertices[(i + 2) % n];
            if cross(&(b - a), &(c - b)) < -1e-12 {
                return Err(PolygonDefect::NotConvex);
            }
        }
        Ok(Self { vertices })
    }

    pub fn rect(min_x: f64, min_y: f64, max_x: f64, max_y: f64) -> Self {
        Self::new(vec![
            Point2::new(min_x, min_y),
            Point2::new(max_x, min_y),
            Point2::new(max_x, max_y),
            Point2::new(min_x, max_y),
        ])
        .expect("rectangle with positive extent")
    }

    pub fn vertices(&self) -> &[Point2<f64>] {
        &self.vertices
    }

    fn edges(&self) -> impl Iterator<Item = (Point2<f64>, Point2<f64>)> + '_ {
        let n = self.vertices.len();
        (0..n).map(move |i| (self.vertices[i], self.vertices[(i + 1) % n]))
    }

    /// Closed containment test (boundary counts as inside).
    pub fn contains(&self, p: &Point2<f64>) -> bool {
        self.edges()
            .all(|(a, b)| cross(&(b - a), &(p - a)) >= -1e-12)
    }

    /// Euclidean distance from `p` to the polygon; zero when inside.
    pub fn distance(&self, p: &Point2<f64>) -> f64 {
        if self.contains(p) {
            return 0.0;
        }
        self.boundary_distance(p)
    }

    /// Distance from `p` to the polygon boundary.
    pub fn boundary_distance(&self, p: &Point2<f64>) -> f64 {
        self.edges()
            .map(|(a, b)| point_segment_distance(p, &a, &b))
            .fold(f64::INFINITY, f64::min)
    }

    /// True when the open segment `a`-`b` passes through the polygon interior.
    /// Touching the boundary, including ending on a face, does not count.
    pub fn blocks_segment(&self, a: &Point2<f64>, b: &Point2<f64>) -> bool {
        let d = b - a;
        let (mut t0, mut t1) = (0.0_f64, 1.0_f64);
        // Cyrus-Beck clipping against the inward half-planes.
        for (v0, v1) in self.edges() {
            let edge = v1 - v0;
            let num = cross(&edge, &(a - v0));
            let den = cross(&edge, &d);
            if den.abs() < 1e-15 {
                if num < 0.0 {
                    return false;
                }
                continue;
            }
            let t = -num / den;
            if den > 0.0 {
                t0 = t0.max(t);
            } else {
                t1 = t1.min(t);
            }
            if t0 > t1 {
                return false;
            }
        }
        if (t1 - t0) * d.norm() < 1e-9 {
            return false;
        }
        let mid = a + d * (0.5 * (t0 + t1));
        self.contains(&mid) && self.boundary_distance(&mid) > 1e-9
    }

    pub fn centroid(&self) -> Point2<f64> {
        let sum = self
            .vertices
            .iter()
            .fold(Vector2::zeros(), |acc, v| acc + v.coords);
        Point2::from(sum / self.vertices.len() as f64)
    }
}

fn signed_area(v: &[Point2<f64>]) -> f64 {
    let n = v.len();
    0.5 * (0..n)
        .map(|i| {
            let a = v[i];
            let b = v[(i + 1) % n];
            a.x * b.y - b.x * a.y
        })
        .sum::<f64>()
}

pub(crate) fn cross(a: &Vector2<f64>, b: &Vector2<f64>) -> f64 {
    a.x * b.y - a.y * b.x
}

pub fn point_segment_distance(p: &Point2<f64>, a: &Point2<f64>, b: &Point2<f64>) -> f64 {
    let ab = b - a;
    let len2 = ab.norm_squared();
    if len2 == 0.0 {
        return (p - a).norm();
    }
    let t = ((p - a).dot(&ab) / len2).clamp(0.0, 1.0);
    (p - (a + ab * t)).norm()
}

/// Distance between segment `a`-`b` and a convex polygon; zero on contact.
pub fn segment_polygon_distance(a: &Point2<f64>, b: &Point2<f64>, poly: &Polygon) -> f64 {
    if poly.contains(a) || poly.contains(b) || poly.blocks_segment(a, b) {
        return 0.0;
    }
    let v = poly.vertices();
    let mut d = f64::INFINITY;
    for i in 0..v.len() {
        let (p, q) = (&v[i], &v[(i + 1) % v.len()]);
        d = d
            .min(point_segment_distance(p, a, b))
            .min(point_segment_distance(a, p, q))
            .min(point_segment_distance(b, p, q));
    }
    d
}
