//! Planar rigid-transform algebra.
//!
//! [`Pose2`] serves both as a robot pose and as the local-to-global frame
//! transform estimated by the relocalizer. Angles are kept in `(-π, π]`.

use core::f64::consts::{PI, TAU};
use core::ops::{Add, Mul, Neg, Sub};

use arrayvec::ArrayVec;

use rand::Rng;
use thiserror::Error;

/// Minimum separation between two local features for a two-point
/// correspondence to define a transform.
pub const MIN_PAIR_SEPARATION: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum GeometryError {
    #[error("feature pair separation {separation} m is below the degeneracy gate")]
    DegenerateSample { separation: f64 },
    #[error("rectangle [{min_x}, {max_x}] x [{min_y}, {max_y}] has no area")]
    DegenerateRect {
        min_x: f64,
        max_x: f64,
        min_y: f64,
        max_y: f64,
    },
}

/// Wraps an angle into `(-π, π]`.
pub fn normalize_angle(angle: f64) -> f64 {
    let mut a = libm::fmod(angle, TAU);
    if a > PI {
        a -= TAU;
    } else if a <= -PI {
        a += TAU;
    }
    a
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const ORIGIN: Point2 = Point2 { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn from_polar(range: f64, angle: f64) -> Self {
        Self::new(range * libm::cos(angle), range * libm::sin(angle))
    }

    pub fn norm(self) -> f64 {
        libm::hypot(self.x, self.y)
    }

    pub fn norm_squared(self) -> f64 {
        self.x * self.x + self.y * self.y
    }

    pub fn distance(self, other: Point2) -> f64 {
        (self - other).norm()
    }

    pub fn distance_squared(self, other: Point2) -> f64 {
        (self - other).norm_squared()
    }

    /// Direction of the vector from the origin, in `(-π, π]`.
    pub fn angle(self) -> f64 {
        normalize_angle(libm::atan2(self.y, self.x))
    }

    pub fn rotated(self, theta: f64) -> Self {
        let (s, c) = libm::sincos(theta);
        Self::new(c * self.x - s * self.y, s * self.x + c * self.y)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl Add for Point2 {
    type Output = Point2;
    fn add(self, rhs: Point2) -> Point2 {
        Point2::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl Sub for Point2 {
    type Output = Point2;
    fn sub(self, rhs: Point2) -> Point2 {
        Point2::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl Neg for Point2 {
    type Output = Point2;
    fn neg(self) -> Point2 {
        Point2::new(-self.x, -self.y)
    }
}

impl Mul<f64> for Point2 {
    type Output = Point2;
    fn mul(self, rhs: f64) -> Point2 {
        Point2::new(self.x * rhs, self.y * rhs)
    }
}

/// Axis-aligned rectangle, inclusive on all edges.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub min: Point2,
    pub max: Point2,
}

impl Rect {
    pub const fn new(min_x: f64, min_y: f64, max_x: f64, max_y: f64) -> Self {
        Self {
            min: Point2::new(min_x, min_y),
            max: Point2::new(max_x, max_y),
        }
    }

    /// Smallest rectangle containing both `self` and `p`.
    pub fn expanded_to(&self, p: Point2) -> Rect {
        Rect::new(self.min.x.min(p.x), self.min.y.min(p.y), self.max.x.max(p.x), self.max.y.max(p.y))
    }

    pub fn width(&self) -> f64 {
        self.max.x - self.min.x
    }

    pub fn height(&self) -> f64 {
        self.max.y - self.min.y
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn center(&self) -> Point2 {
        Point2::new(
            0.5 * (self.min.x + self.max.x),
            0.5 * (self.min.y + self.max.y),
        )
    }

    /// Fails unless both extents are finite and strictly positive.
    pub fn validate(&self) -> Result<(), GeometryError> {
        let ok = self.min.is_finite()
            && self.max.is_finite()
            && self.width() > 0.0
            && self.height() > 0.0;
        if ok {
            Ok(())
        } else {
            Err(GeometryError::DegenerateRect {
                min_x: self.min.x,
                max_x: self.max.x,
                min_y: self.min.y,
                max_y: self.max.y,
            })
        }
    }

    pub fn contains(&self, p: Point2) -> bool {
        p.x >= self.min.x && p.x <= self.max.x && p.y >= self.min.y && p.y <= self.max.y
    }

    pub fn contains_rect(&self, other: &Rect) -> bool {
        self.contains(other.min) && self.contains(other.max)
    }

    /// Squared distance from `p` to the closest point of the rectangle.
    pub fn distance_squared(&self, p: Point2) -> f64 {
        let dx = (self.min.x - p.x).max(0.0).max(p.x - self.max.x);
        let dy = (self.min.y - p.y).max(0.0).max(p.y - self.max.y);
        dx * dx + dy * dy
    }

    pub fn sample_uniform<R: Rng + ?Sized>(&self, rng: &mut R) -> Point2 {
        Point2::new(
            self.min.x + rng.random::<f64>() * self.width(),
            self.min.y + rng.random::<f64>() * self.height(),
        )
    }

    /// Corners in counter-clockwise order, starting at `min`.
    pub fn corners(&self) -> [Point2; 4] {
        [
            self.min,
            Point2::new(self.max.x, self.min.y),
            self.max,
            Point2::new(self.min.x, self.max.y),
        ]
    }
}

fn cross(a: Point2, b: Point2) -> f64 {
    a.x * b.y - a.y * b.x
}

/// Vertex list of a quadrilateral clipped by a rectangle.
pub type ClippedQuad = ArrayVec<Point2, 8>;

/// The part of convex quadrilateral `quad` inside `rect`
/// (Sutherland-Hodgman). Empty when they do not overlap.
pub fn clip_convex(quad: &[Point2; 4], rect: &Rect) -> ClippedQuad {
    // (axis, bound, keep the side above the bound)
    let edges = [
        (0, rect.min.x, true),
        (0, rect.max.x, false),
        (1, rect.min.y, true),
        (1, rect.max.y, false),
    ];
    // each edge adds at most one vertex: 4 + 4
    let mut out: ClippedQuad = quad.iter().copied().collect();
    for (axis, bound, above) in edges {
        let coord = |p: Point2| if axis == 0 { p.x } else { p.y };
        let inside = |p: Point2| if above { coord(p) >= bound } else { coord(p) <= bound };
        let crossing = |a: Point2, b: Point2| a + (b - a) * ((bound - coord(a)) / (coord(b) - coord(a)));
        let input = core::mem::take(&mut out);
        let input = input.as_slice();
        for (i, &cur) in input.iter().enumerate() {
            let prev = input[(i + input.len() - 1) % input.len()];
            match (inside(prev), inside(cur)) {
                (true, true) => out.push(cur),
                (true, false) => out.push(crossing(prev, cur)),
                (false, true) => {
                    out.push(crossing(prev, cur));
                    out.push(cur);
                }
                (false, false) => {}
            }
        }
        if out.is_empty() {
            break;
        }
    }
    out
}

/// Uniform point inside a convex polygon; `None` when it has no area.
pub fn sample_convex<R: Rng + ?Sized>(poly: &[Point2], rng: &mut R) -> Option<Point2> {
    if poly.len() < 3 {
        return None;
    }
    let o = poly[0];
    let area = |i: usize| 0.5 * cross(poly[i] - o, poly[i + 1] - o).abs();
    let fan = 1..poly.len() - 1;
    let total: f64 = fan.clone().map(area).sum();
    if !(total > 0.0) {
        return None;
    }
    let mut pick = rng.random::<f64>() * total;
    let mut k = poly.len() - 2;
    for i in fan {
        if pick < area(i) {
            k = i;
            break;
        }
        pick -= area(i);
    }
    let (mut u, mut v) = (rng.random::<f64>(), rng.random::<f64>());
    if u + v > 1.0 {
        u = 1.0 - u;
        v = 1.0 - v;
    }
    Some(o + (poly[k] - o) * u + (poly[k + 1] - o) * v)
}

/// Rotation followed by translation: `p ↦ R(theta)·p + t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose2 {
    theta: f64,
    t: Point2,
}

impl Default for Pose2 {
    fn default() -> Self {
        Self::IDENTITY
    }
}

impl Pose2 {
    pub const IDENTITY: Pose2 = Pose2 {
        theta: 0.0,
        t: Point2::ORIGIN,
    };

    pub fn new(theta: f64, t: Point2) -> Self {
        Self {
            theta: normalize_angle(theta),
            t,
        }
    }

    pub fn from_xy_theta(x: f64, y: f64, theta: f64) -> Self {
        Self::new(theta, Point2::new(x, y))
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn translation(&self) -> Point2 {
        self.t
    }

    /// `self ∘ other`: applies `other` first, then `self`.
    pub fn compose(&self, other: &Pose2) -> Pose2 {
        Pose2::new(self.theta + other.theta, self.apply(other.t))
    }

    pub fn inverse(&self) -> Pose2 {
        Pose2::new(-self.theta, -self.t.rotated(-self.theta))
    }

    pub fn apply(&self, p: Point2) -> Point2 {
        p.rotated(self.theta) + self.t
    }

    pub fn is_finite(&self) -> bool {
        self.theta.is_finite() && self.t.is_finite()
    }

    /// Translation distance and absolute wrapped heading difference.
    pub fn error_to(&self, other: &Pose2) -> (f64, f64) {
        (
            self.t.distance(other.t),
            normalize_angle(self.theta - other.theta).abs(),
        )
    }
}

/// Rigid transform taking `f_a` onto `l_a` exactly and the direction
/// `f_b - f_a` onto `l_b - l_a`.
pub fn transform_from_two_correspondences(
    f_a: Point2,
    f_b: Point2,
    l_a: Point2,
    l_b: Point2,
) -> Result<Pose2, GeometryError> {
    let separation = f_a.distance(f_b);
    if !(separation >= MIN_PAIR_SEPARATION) {
        return Err(GeometryError::DegenerateSample { separation });
    }
    let theta = (l_b - l_a).angle() - (f_b - f_a).angle();
    let rotation_only = Pose2::new(theta, Point2::ORIGIN);
    Ok(Pose2::new(theta, l_a - rotation_only.apply(f_a)))
}
