//! Planar poses, footprints, convex polygons and cubic segments.

use std::f64::consts::PI;

use nalgebra::{Point2, Vector2};
use serde::{Deserialize, Serialize};

use crate::error::GeomError;

/// Wraps an angle to `(-π, π]`.
pub fn wrap_angle(theta: f64) -> f64 {
    let mut a = theta.rem_euclid(2.0 * PI);
    if a > PI {
        a -= 2.0 * PI;
    }
    // rem_euclid maps -π to π already; guard the rounding case at exactly -π.
    if a <= -PI {
        a += 2.0 * PI;
    }
    a
}

/// A rigid planar pose. `theta` is kept in `(-π, π]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct Pose2 {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

impl Pose2 {
    pub fn new(x: f64, y: f64, theta: f64) -> Self {
        Self {
            x,
            y,
            theta: wrap_angle(theta),
        }
    }

    pub fn identity() -> Self {
        Self::default()
    }

    pub fn translation(&self) -> Vector2<f64> {
        Vector2::new(self.x, self.y)
    }

    /// `self ∘ child`: `child` expressed in `self`'s frame, returned in the parent frame.
    pub fn compose(&self, child: &Pose2) -> Pose2 {
        let (s, c) = self.theta.sin_cos();
        Pose2::new(
            self.x + c * child.x - s * child.y,
            self.y + s * child.x + c * child.y,
            self.theta + child.theta,
        )
    }

    pub fn inverse(&self) -> Pose2 {
        let (s, c) = self.theta.sin_cos();
        Pose2::new(
            -c * self.x - s * self.y,
            s * self.x - c * self.y,
            -self.theta,
        )
    }

    /// Expresses `other` in this pose's frame (`self⁻¹ ∘ other`).
    pub fn relative(&self, other: &Pose2) -> Pose2 {
        self.inverse().compose(other)
    }

    pub fn transform_point(&self, p: &Point2<f64>) -> Point2<f64> {
        let (s, c) = self.theta.sin_cos();
        Point2::new(self.x + c * p.x - s * p.y, self.y + s * p.x + c * p.y)
    }

    pub fn distance(&self, other: &Pose2) -> f64 {
        (self.translation() - other.translation()).norm()
    }
}

/// Free-function form of [`Pose2::compose`].
pub fn compose(parent: &Pose2, child: &Pose2) -> Pose2 {
    parent.compose(child)
}

/// Rectangular foot contact area centered on `pose`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Footprint {
    pub length: f64,
    pub width: f64,
    pub pose: Pose2,
}

impl Footprint {
    pub fn new(length: f64, width: f64, pose: Pose2) -> Result<Self, GeomError> {
        if !(length > 0.0 && width > 0.0) {
            return Err(GeomError::InvalidFootprint { length, width });
        }
        Ok(Self {
            length,
            width,
            pose,
        })
    }

    /// Corners in counter-clockwise order, starting at the rear-right corner.
    pub fn corners(&self) -> [Point2<f64>; 4] {
        let hl = self.length / 2.0;
        let hw = self.width / 2.0;
        [
            self.pose.transform_point(&Point2::new(-hl, -hw)),
            self.pose.transform_point(&Point2::new(hl, -hw)),
            self.pose.transform_point(&Point2::new(hl, hw)),
            self.pose.transform_point(&Point2::new(-hl, hw)),
        ]
    }

    pub fn half_diagonal(&self) -> f64 {
        0.5 * self.length.hypot(self.width)
    }

    pub fn polygon(&self) -> ConvexPolygon {
        ConvexPolygon {
            vertices: self.corners().to_vec(),
        }
    }
}

/// Convex polygon with counter-clockwise vertices and no three collinear.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvexPolygon {
    vertices: Vec<Point2<f64>>,
}

/// One half-plane `normal · p ≤ offset`, `normal` unit length.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HalfPlane {
    pub normal: Vector2<f64>,
    pub offset: f64,
}

impl HalfPlane {
    pub fn signed_distance(&self, p: &Point2<f64>) -> f64 {
        self.normal.dot(&p.coords) - self.offset
    }
}

fn cross(o: &Point2<f64>, a: &Point2<f64>, b: &Point2<f64>) -> f64 {
    (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x)
}

impl ConvexPolygon {
    /// Validates an already ordered vertex list.
    pub fn from_ccw(vertices: Vec<Point2<f64>>) -> Result<Self, GeomError> {
        let n = vertices.len();
        if n < 3 {
            return Err(GeomError::Degenerate("fewer than three vertices"));
        }
        for i in 0..n {
            let c = cross(&vertices[i], &vertices[(i + 1) % n], &vertices[(i + 2) % n]);
            if c <= 0.0 {
                return Err(GeomError::Degenerate("vertices not strictly convex counter-clockwise"));
            }
        }
        Ok(Self { vertices })
    }

    pub fn vertices(&self) -> &[Point2<f64>] {
        &self.vertices
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn area(&self) -> f64 {
        let n = self.vertices.len();
        (0..n)
            .map(|i| {
                let a = &self.vertices[i];
                let b = &self.vertices[(i + 1) % n];
                a.x * b.y - b.x * a.y
            })
            .sum::<f64>()
            / 2.0
    }

    pub fn centroid(&self) -> Point2<f64> {
        let n = self.vertices.len();
        let mut cx = 0.0;
        let mut cy = 0.0;
        for i in 0..n {
            let a = &self.vertices[i];
            let b = &self.vertices[(i + 1) % n];
            let w = a.x * b.y - b.x * a.y;
            cx += (a.x + b.x) * w;
            cy += (a.y + b.y) * w;
        }
        let k = 6.0 * self.area();
        Point2::new(cx / k, cy / k)
    }

    /// Point-in-polygon by edge orientation (boundary counts as inside).
    pub fn contains(&self, p: &Point2<f64>) -> bool {
        let n = self.vertices.len();
        (0..n).all(|i| cross(&self.vertices[i], &self.vertices[(i + 1) % n], p) >= 0.0)
    }

    pub fn halfplanes(&self) -> Vec<HalfPlane> {
        let n = self.vertices.len();
        (0..n)
            .map(|i| {
                let a = self.vertices[i];
                let b = self.vertices[(i + 1) % n];
                let e = b - a;
                // outward normal of a CCW edge
                let normal = Vector2::new(e.y, -e.x).normalize();
                HalfPlane {
                    normal,
                    offset: normal.dot(&a.coords),
                }
            })
            .collect()
    }
}

/// Free-function form of [`ConvexPolygon::halfplanes`].
pub fn halfplanes(poly: &ConvexPolygon) -> Vec<HalfPlane> {
    poly.halfplanes()
}

/// Andrew's monotone chain. Collinear and duplicate points are dropped.
pub fn convex_hull(points: &[Point2<f64>]) -> Result<ConvexPolygon, GeomError> {
    if points.len() < 3 {
        return Err(GeomError::Degenerate("fewer than three points"));
    }
    let mut pts: Vec<Point2<f64>> = points.to_vec();
    pts.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
    pts.dedup();

    let scale = pts
        .iter()
        .map(|p| p.x.abs().max(p.y.abs()))
        .fold(1.0_f64, f64::max);
    let eps = 1e-12 * scale * scale;

    let mut hull: Vec<Point2<f64>> = Vec::with_capacity(2 * pts.len());
    for p in pts.iter() {
        while hull.len() >= 2 && cross(&hull[hull.len() - 2], &hull[hull.len() - 1], p) <= eps {
            hull.pop();
        }
        hull.push(*p);
    }
    let lower_len = hull.len() + 1;
    for p in pts.iter().rev().skip(1) {
        while hull.len() >= lower_len && cross(&hull[hull.len() - 2], &hull[hull.len() - 1], p) <= eps
        {
            hull.pop();
        }
        hull.push(*p);
    }
    hull.pop();

    if hull.len() < 3 {
        return Err(GeomError::Degenerate("all points collinear"));
    }
    Ok(ConvexPolygon { vertices: hull })
}

/// Cubic `a0 + a1 t + a2 t² + a3 t³` on `[0, duration]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CubicSegment {
    pub coeffs: [f64; 4],
    pub duration: f64,
}

impl CubicSegment {
    pub fn constant(value: f64, duration: f64) -> Self {
        Self {
            coeffs: [value, 0.0, 0.0, 0.0],
            duration,
        }
    }

    pub fn value(&self, t: f64) -> f64 {
        let [a0, a1, a2, a3] = self.coeffs;
        a0 + t * (a1 + t * (a2 + t * a3))
    }

    pub fn velocity(&self, t: f64) -> f64 {
        let [_, a1, a2, a3] = self.coeffs;
        a1 + t * (2.0 * a2 + 3.0 * a3 * t)
    }

    pub fn acceleration(&self, t: f64) -> f64 {
        let [_, _, a2, a3] = self.coeffs;
        2.0 * a2 + 6.0 * a3 * t
    }
}

/// Hermite cubic matching value and velocity at both ends.
pub fn cubic_between(p0: f64, v0: f64, p1: f64, v1: f64, duration: f64) -> Result<CubicSegment, GeomError> {
    if !(duration > 0.0) || !duration.is_finite() {
        return Err(GeomError::InvalidDuration(duration));
    }
    let t = duration;
    let dp = p1 - p0;
    let a2 = (3.0 * dp - (2.0 * v0 + v1) * t) / (t * t);
    let a3 = (-2.0 * dp + (v0 + v1) * t) / (t * t * t);
    Ok(CubicSegment {
        coeffs: [p0, v0, a2, a3],
        duration,
    })
}
