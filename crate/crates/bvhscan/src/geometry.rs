//! Points, boxes and spheres, plus the distance and overlap predicates the
//! hierarchy and the clustering code are built on.
//!
//! Coordinates are single precision. Distances accumulate squared terms in
//! double precision and round the final root back to `f32`, so every module
//! comparing a distance against `eps` sees the same value for the same pair.

use std::ops::Index;

/// A point in `D`-dimensional space.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Point<const D: usize>(pub [f32; D]);

impl<const D: usize> Point<D> {
    pub const fn new(coords: [f32; D]) -> Self {
        Self(coords)
    }

    pub fn coords(&self) -> &[f32; D] {
        &self.0
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|c| c.is_finite())
    }
}

impl<const D: usize> Index<usize> for Point<D> {
    type Output = f32;

    fn index(&self, axis: usize) -> &f32 {
        &self.0[axis]
    }
}

impl<const D: usize> From<[f32; D]> for Point<D> {
    fn from(coords: [f32; D]) -> Self {
        Self(coords)
    }
}

/// Axis-aligned bounding box.
///
/// [`Aabb::empty`] has `min = +MAX` and `max = -MAX` on every axis and is
/// the identity of [`Aabb::expand`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Aabb<const D: usize> {
    pub min: Point<D>,
    pub max: Point<D>,
}

impl<const D: usize> Default for Aabb<D> {
    fn default() -> Self {
        Self::empty()
    }
}

impl<const D: usize> Aabb<D> {
    pub const fn new(min: Point<D>, max: Point<D>) -> Self {
        Self { min, max }
    }

    pub const fn empty() -> Self {
        Self {
            min: Point([f32::MAX; D]),
            max: Point([-f32::MAX; D]),
        }
    }

    /// Degenerate box around a single point.
    pub const fn from_point(p: Point<D>) -> Self {
        Self { min: p, max: p }
    }

    pub fn is_empty(&self) -> bool {
        (0..D).any(|k| self.min[k] > self.max[k])
    }

    pub fn is_finite(&self) -> bool {
        self.min.is_finite() && self.max.is_finite()
    }

    /// Smallest box containing both `self` and `other`.
    pub fn expand(&self, other: &Aabb<D>) -> Aabb<D> {
        let mut out = *self;
        for k in 0..D {
            out.min.0[k] = out.min.0[k].min(other.min[k]);
            out.max.0[k] = out.max.0[k].max(other.max[k]);
        }
        out
    }

    pub fn expand_point(&self, p: &Point<D>) -> Aabb<D> {
        self.expand(&Aabb::from_point(*p))
    }

    pub fn centroid(&self) -> Point<D> {
        let mut c = [0.0f32; D];
        for (k, c) in c.iter_mut().enumerate() {
            *c = ((self.min[k] as f64 + self.max[k] as f64) * 0.5) as f32;
        }
        Point(c)
    }

    /// True if the boxes overlap or touch on every axis.
    pub fn intersects(&self, other: &Aabb<D>) -> bool {
        (0..D).all(|k| self.min[k] <= other.max[k] && other.min[k] <= self.max[k])
    }

    pub fn intersects_sphere(&self, sphere: &Sphere<D>) -> bool {
        min_distance(&sphere.center, self) <= sphere.radius
    }

    /// True if `other` lies entirely inside `self` (boundaries included).
    pub fn contains(&self, other: &Aabb<D>) -> bool {
        (0..D).all(|k| self.min[k] <= other.min[k] && other.max[k] <= self.max[k])
    }

    pub fn contains_point(&self, p: &Point<D>) -> bool {
        (0..D).all(|k| self.min[k] <= p[k] && p[k] <= self.max[k])
    }
}

/// Closed ball, used as the range predicate of an `eps` search.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Sphere<const D: usize> {
    pub center: Point<D>,
    pub radius: f32,
}

impl<const D: usize> Sphere<D> {
    pub const fn new(center: Point<D>, radius: f32) -> Self {
        Self { center, radius }
    }
}

#[inline]
fn finish(sum_sq: f64) -> f32 {
    sum_sq.sqrt() as f32
}

/// Euclidean distance between two points.
#[inline]
pub fn distance<const D: usize>(a: &Point<D>, b: &Point<D>) -> f32 {
    let mut sum = 0.0f64;
    for k in 0..D {
        let d = a[k] as f64 - b[k] as f64;
        sum += d * d;
    }
    finish(sum)
}

/// Distance from `p` to the closest point of `b`; zero when `p` is inside.
///
/// For a degenerate point box this is bit-identical to [`distance`].
#[inline]
pub fn min_distance<const D: usize>(p: &Point<D>, b: &Aabb<D>) -> f32 {
    let mut sum = 0.0f64;
    for k in 0..D {
        let x = p[k] as f64;
        let lo = b.min[k] as f64;
        let hi = b.max[k] as f64;
        let d = if x < lo {
            lo - x
        } else if x > hi {
            x - hi
        } else {
            0.0
        };
        sum += d * d;
    }
    finish(sum)
}

/// Box over a set of points; [`Aabb::empty`] for an empty slice.
pub fn bounding_box<const D: usize>(points: &[Point<D>]) -> Aabb<D> {
    points
        .iter()
        .fold(Aabb::empty(), |acc, p| acc.expand_point(p))
}
