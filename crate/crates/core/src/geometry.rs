//! Oriented bounding boxes for footprints and 3D placements.
//!
//! Yaw zero puts the length along +x and the width along +y; positive yaw
//! rotates counterclockwise. Trigonometry goes through `libm` so results do
//! not depend on the platform's math library.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::layout::{BevObject, Room, SceneObject3D};

/// Default collision epsilon, px.
pub const DEFAULT_COLLISION_EPSILON: f64 = 1.0;
/// Default out-of-bound tolerance, px.
pub const DEFAULT_BOUND_TOLERANCE: f64 = 0.5;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("box extents must be strictly positive and finite")]
    DegenerateExtent,
    #[error("box z interval must satisfy z_lo < z_hi")]
    DegenerateInterval,
    #[error("non-finite coordinate")]
    NonFinite,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    fn sub(self, o: Point) -> Point {
        Point::new(self.x - o.x, self.y - o.y)
    }

    fn dot(self, o: Point) -> f64 {
        self.x * o.x + self.y * o.y
    }

    fn cross(self, o: Point) -> f64 {
        self.x * o.y - self.y * o.x
    }

    fn norm_sq(self) -> f64 {
        self.dot(self)
    }
}

/// Sine and cosine of a yaw in degrees, exact at multiples of 90.
pub fn sin_cos_degrees(deg: f64) -> (f64, f64) {
    let d = deg.rem_euclid(360.0);
    if d == 0.0 {
        (0.0, 1.0)
    } else if d == 90.0 {
        (1.0, 0.0)
    } else if d == 180.0 {
        (0.0, -1.0)
    } else if d == 270.0 {
        (-1.0, 0.0)
    } else {
        let r = deg.to_radians();
        (libm::sin(r), libm::cos(r))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Footprint {
    center: Point,
    half_length: f64,
    half_width: f64,
    sin: f64,
    cos: f64,
}

impl Footprint {
    pub fn new(center: Point, length: f64, width: f64, yaw_degrees: f64) -> Result<Self, GeometryError> {
        if !(center.x.is_finite() && center.y.is_finite() && yaw_degrees.is_finite()) {
            return Err(GeometryError::NonFinite);
        }
        if !(length.is_finite() && width.is_finite()) || length <= 0.0 || width <= 0.0 {
            return Err(GeometryError::DegenerateExtent);
        }
        let (sin, cos) = sin_cos_degrees(yaw_degrees);
        Ok(Self {
            center,
            half_length: length / 2.0,
            half_width: width / 2.0,
            sin,
            cos,
        })
    }

    pub fn from_bev(obj: &BevObject) -> Result<Self, GeometryError> {
        Self::new(
            Point::new(obj.center_x, obj.center_y),
            obj.length,
            obj.width,
            obj.orientation,
        )
    }

    pub fn center(&self) -> Point {
        self.center
    }

    pub fn half_extents(&self) -> (f64, f64) {
        (self.half_length, self.half_width)
    }

    /// Unit vectors of the length and width directions.
    pub fn axes(&self) -> (Point, Point) {
        (
            Point::new(self.cos, self.sin),
            Point::new(-self.sin, self.cos),
        )
    }

    fn local_to_world(&self, u: f64, v: f64) -> Point {
        Point::new(
            self.center.x + self.cos * u - self.sin * v,
            self.center.y + self.sin * u + self.cos * v,
        )
    }

    /// Corners in counterclockwise order starting at local `(+l/2, +w/2)`.
    pub fn corners(&self) -> [Point; 4] {
        let (hl, hw) = (self.half_length, self.half_width);
        [
            self.local_to_world(hl, hw),
            self.local_to_world(-hl, hw),
            self.local_to_world(-hl, -hw),
            self.local_to_world(hl, -hw),
        ]
    }

    /// Closed-set membership.
    pub fn contains(&self, p: Point) -> bool {
        let d = p.sub(self.center);
        let (ax, ay) = self.axes();
        d.dot(ax).abs() <= self.half_length && d.dot(ay).abs() <= self.half_width
    }

    fn projection_radius(&self, axis: Point, shrink: f64) -> f64 {
        let (ax, ay) = self.axes();
        let hl = (self.half_length - shrink).max(0.0);
        let hw = (self.half_width - shrink).max(0.0);
        hl * axis.dot(ax).abs() + hw * axis.dot(ay).abs()
    }
}

pub fn footprint_corners(f: &Footprint) -> [Point; 4] {
    f.corners()
}

/// Separating-axis overlap test with both boxes shrunk by `epsilon / 2` on
/// every side; contact within `epsilon` is not overlap.
pub fn footprints_overlap(a: &Footprint, b: &Footprint, epsilon: f64) -> bool {
    let shrink = epsilon.max(0.0) / 2.0;
    let delta = b.center.sub(a.center);
    let (a0, a1) = a.axes();
    let (b0, b1) = b.axes();
    for axis in [a0, a1, b0, b1] {
        let distance = delta.dot(axis).abs();
        let reach = a.projection_radius(axis, shrink) + b.projection_radius(axis, shrink);
        if distance >= reach {
            return false;
        }
    }
    true
}

fn point_segment_distance_sq(p: Point, a: Point, b: Point) -> f64 {
    let ab = b.sub(a);
    let len_sq = ab.norm_sq();
    let t = if len_sq == 0.0 {
        0.0
    } else {
        (p.sub(a).dot(ab) / len_sq).clamp(0.0, 1.0)
    };
    let closest = Point::new(a.x + ab.x * t, a.y + ab.y * t);
    p.sub(closest).norm_sq()
}

fn segments_intersect(p1: Point, p2: Point, q1: Point, q2: Point) -> bool {
    let d1 = q2.sub(q1).cross(p1.sub(q1));
    let d2 = q2.sub(q1).cross(p2.sub(q1));
    let d3 = p2.sub(p1).cross(q1.sub(p1));
    let d4 = p2.sub(p1).cross(q2.sub(p1));
    ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
}

/// Euclidean distance between two segments.
pub fn segment_distance(p1: Point, p2: Point, q1: Point, q2: Point) -> f64 {
    if segments_intersect(p1, p2, q1, q2) {
        return 0.0;
    }
    point_segment_distance_sq(p1, q1, q2)
        .min(point_segment_distance_sq(p2, q1, q2))
        .min(point_segment_distance_sq(q1, p1, p2))
        .min(point_segment_distance_sq(q2, p1, p2))
        .sqrt()
}

/// Minimum distance between two filled rectangles; zero when they touch or
/// overlap.
pub fn min_footprint_distance(a: &Footprint, b: &Footprint) -> f64 {
    if footprints_overlap(a, b, 0.0) {
        return 0.0;
    }
    let ca = a.corners();
    let cb = b.corners();
    if ca.iter().any(|p| b.contains(*p)) || cb.iter().any(|p| a.contains(*p)) {
        return 0.0;
    }
    let mut best = f64::INFINITY;
    for i in 0..4 {
        for j in 0..4 {
            let d = segment_distance(ca[i], ca[(i + 1) % 4], cb[j], cb[(j + 1) % 4]);
            best = best.min(d);
        }
    }
    best
}

/// True iff any rotated corner leaves `[-tol, L + tol] x [-tol, W + tol]`.
pub fn is_out_of_bound(f: &Footprint, room: &Room, tolerance: f64) -> bool {
    let tol = tolerance.max(0.0);
    let max_x = f64::from(room.max_length) + tol;
    let max_y = f64::from(room.max_width) + tol;
    f.corners()
        .iter()
        .any(|p| p.x < -tol || p.x > max_x || p.y < -tol || p.y > max_y)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Box3D {
    pub footprint: Footprint,
    pub z_lo: f64,
    pub z_hi: f64,
}

impl Box3D {
    pub fn new(footprint: Footprint, z_lo: f64, z_hi: f64) -> Result<Self, GeometryError> {
        if !(z_lo.is_finite() && z_hi.is_finite()) {
            return Err(GeometryError::NonFinite);
        }
        if z_lo >= z_hi {
            return Err(GeometryError::DegenerateInterval);
        }
        Ok(Self {
            footprint,
            z_lo,
            z_hi,
        })
    }

    pub fn from_object(obj: &SceneObject3D) -> Result<Self, GeometryError> {
        let footprint = Footprint::new(
            Point::new(obj.center_x, obj.center_y),
            obj.length,
            obj.width,
            obj.orientation,
        )?;
        Self::new(footprint, obj.z_lo(), obj.z_hi())
    }
}

/// Footprints overlap and the z intervals share more than `epsilon`.
pub fn boxes_collide_3d(a: &Box3D, b: &Box3D, epsilon: f64) -> bool {
    let z_overlap = a.z_hi.min(b.z_hi) - a.z_lo.max(b.z_lo);
    z_overlap > epsilon.max(0.0) && footprints_overlap(&a.footprint, &b.footprint, epsilon)
}
