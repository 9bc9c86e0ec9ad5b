//! Planar primitives and the instrumented collision predicates.
//!
//! Obstacles are closed axis-aligned rectangles and the robot is a point, so
//! every feasibility question reduces to "does this closed segment touch this
//! closed rectangle". One such test is the unit of the collision-check (C.C.)
//! metric: every call that evaluates a segment against a rectangle bumps the
//! [`CollisionCounter`] by exactly one.

use std::ops::{Add, Mul, Sub};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("path needs at least 2 points, got {0}")]
    PathTooShort(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn dist(self, other: Point2) -> f64 {
        (self - other).norm()
    }

    pub fn dist_sq(self, other: Point2) -> f64 {
        let d = self - other;
        d.x * d.x + d.y * d.y
    }

    /// `self + t * (other - self)`.
    pub fn lerp(self, other: Point2, t: f64) -> Point2 {
        Point2::new(self.x + t * (other.x - self.x), self.y + t * (other.y - self.y))
    }

    /// Moves at most `step` from `self` toward `target`; lands exactly on the
    /// target when it is closer than `step`.
    pub fn step_toward(self, target: Point2, step: f64) -> Point2 {
        let d = self.dist(target);
        if d <= step {
            target
        } else {
            self.lerp(target, step / d)
        }
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl From<[f64; 2]> for Point2 {
    fn from(v: [f64; 2]) -> Self {
        Point2::new(v[0], v[1])
    }
}

impl From<Point2> for [f64; 2] {
    fn from(p: Point2) -> Self {
        [p.x, p.y]
    }
}

impl Add for Point2 {
    type Output = Point2;
    fn add(self, o: Point2) -> Point2 {
        Point2::new(self.x + o.x, self.y + o.y)
    }
}

impl Sub for Point2 {
    type Output = Point2;
    fn sub(self, o: Point2) -> Point2 {
        Point2::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<f64> for Point2 {
    type Output = Point2;
    fn mul(self, s: f64) -> Point2 {
        Point2::new(self.x * s, self.y * s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub a: Point2,
    pub b: Point2,
}

impl Segment {
    pub const fn new(a: Point2, b: Point2) -> Self {
        Self { a, b }
    }

    pub fn length(&self) -> f64 {
        self.a.dist(self.b)
    }

    pub fn reversed(&self) -> Segment {
        Segment::new(self.b, self.a)
    }

    pub fn at(&self, t: f64) -> Point2 {
        self.a.lerp(self.b, t)
    }
}

/// Closed axis-aligned rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "RectRepr", into = "RectRepr")]
pub struct Rect {
    pub center: Point2,
    pub half_w: f64,
    pub half_h: f64,
}

#[derive(Serialize, Deserialize)]
struct RectRepr {
    center: Point2,
    half: [f64; 2],
}

impl From<RectRepr> for Rect {
    fn from(r: RectRepr) -> Self {
        Rect::new(r.center, r.half[0], r.half[1])
    }
}

impl From<Rect> for RectRepr {
    fn from(r: Rect) -> Self {
        RectRepr { center: r.center, half: [r.half_w, r.half_h] }
    }
}

impl Rect {
    pub const fn new(center: Point2, half_w: f64, half_h: f64) -> Self {
        Self { center, half_w, half_h }
    }

    pub fn square(center: Point2, side: f64) -> Self {
        Self::new(center, side / 2.0, side / 2.0)
    }

    pub fn from_min_max(min: Point2, max: Point2) -> Self {
        Self::new(
            Point2::new((min.x + max.x) / 2.0, (min.y + max.y) / 2.0),
            (max.x - min.x) / 2.0,
            (max.y - min.y) / 2.0,
        )
    }

    pub fn min(&self) -> Point2 {
        Point2::new(self.center.x - self.half_w, self.center.y - self.half_h)
    }

    pub fn max(&self) -> Point2 {
        Point2::new(self.center.x + self.half_w, self.center.y + self.half_h)
    }

    pub fn width(&self) -> f64 {
        2.0 * self.half_w
    }

    pub fn height(&self) -> f64 {
        2.0 * self.half_h
    }

    pub fn is_valid(&self) -> bool {
        self.center.is_finite()
            && self.half_w.is_finite()
            && self.half_h.is_finite()
            && self.half_w > 0.0
            && self.half_h > 0.0
    }

    /// Closed membership: boundary points are inside.
    pub fn contains(&self, p: Point2) -> bool {
        (p.x - self.center.x).abs() <= self.half_w && (p.y - self.center.y).abs() <= self.half_h
    }

    /// Open membership: boundary points are outside.
    pub fn contains_strict(&self, p: Point2) -> bool {
        (p.x - self.center.x).abs() < self.half_w && (p.y - self.center.y).abs() < self.half_h
    }

    /// Whether the interiors of the two rectangles overlap.
    pub fn overlaps_strict(&self, other: &Rect) -> bool {
        (self.center.x - other.center.x).abs() < self.half_w + other.half_w
            && (self.center.y - other.center.y).abs() < self.half_h + other.half_h
    }

    /// Whether `other` lies entirely inside `self` (closed).
    pub fn encloses(&self, other: &Rect) -> bool {
        let (a, b) = (self.min(), self.max());
        let (c, d) = (other.min(), other.max());
        c.x >= a.x && c.y >= a.y && d.x <= b.x && d.y <= b.y
    }

    /// Euclidean distance from `p` to the closed rectangle; zero inside.
    pub fn distance_to(&self, p: Point2) -> f64 {
        let dx = ((p.x - self.center.x).abs() - self.half_w).max(0.0);
        let dy = ((p.y - self.center.y).abs() - self.half_h).max(0.0);
        dx.hypot(dy)
    }

    pub fn clamp(&self, p: Point2) -> Point2 {
        let (lo, hi) = (self.min(), self.max());
        Point2::new(p.x.clamp(lo.x, hi.x), p.y.clamp(lo.y, hi.y))
    }
}

/// Per-trial count of segment-vs-rectangle tests.
#[derive(Debug, Default, Clone, Copy, PartialEq, Eq)]
pub struct CollisionCounter {
    count: u64,
}

impl CollisionCounter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self) -> u64 {
        self.count
    }

    #[inline]
    fn bump(&mut self) {
        self.count += 1;
    }
}

/// Smallest parameter `t` in `[0, 1]` at which the closed segment touches the
/// closed rectangle (Liang-Barsky clipping). Uncounted.
fn entry_parameter(seg: &Segment, r: &Rect) -> Option<f64> {
    let (lo, hi) = (r.min(), r.max());
    let d = seg.b - seg.a;
    let mut t0 = 0.0_f64;
    let mut t1 = 1.0_f64;
    for (p, q) in [
        (-d.x, seg.a.x - lo.x),
        (d.x, hi.x - seg.a.x),
        (-d.y, seg.a.y - lo.y),
        (d.y, hi.y - seg.a.y),
    ] {
        if p == 0.0 {
            // parallel to this pair of edges: inside the slab or never
            if q < 0.0 {
                return None;
            }
        } else {
            let t = q / p;
            if p < 0.0 {
                if t > t1 {
                    return None;
                }
                t0 = t0.max(t);
            } else {
                if t < t0 {
                    return None;
                }
                t1 = t1.min(t);
            }
        }
    }
    Some(t0)
}

/// True iff the closed segment intersects the closed rectangle. Counts one check.
pub fn seg_intersects_rect(seg: &Segment, r: &Rect, counter: &mut CollisionCounter) -> bool {
    segment_entry(seg, r, counter).is_some()
}

/// Parameter along `seg` of its first contact with `r`, if any. Counts one check.
pub fn segment_entry(seg: &Segment, r: &Rect, counter: &mut CollisionCounter) -> Option<f64> {
    counter.bump();
    entry_parameter(seg, r)
}

/// Whether `seg` avoids every obstacle. Stops at the first hit, so the counter
/// grows by the number of rectangles actually examined.
pub fn segment_clear(seg: &Segment, obstacles: &[Rect], counter: &mut CollisionCounter) -> bool {
    !obstacles.iter().any(|r| seg_intersects_rect(seg, r, counter))
}

/// Earliest contact parameter of `seg` over all obstacles. Every obstacle is
/// tested because the nearest contact may come from any of them.
pub fn first_contact(seg: &Segment, obstacles: &[Rect], counter: &mut CollisionCounter) -> Option<f64> {
    obstacles
        .iter()
        .filter_map(|r| segment_entry(seg, r, counter))
        .fold(None, |best: Option<f64>, t| Some(best.map_or(t, |b| b.min(t))))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Feasibility {
    Free,
    /// Index `i` of the first colliding segment `path[i] -> path[i + 1]`,
    /// counted from the robot end.
    Blocked { segment: usize },
}

impl Feasibility {
    pub fn is_free(&self) -> bool {
        matches!(self, Feasibility::Free)
    }
}

/// Scans segments from the robot end and reports the first one that collides.
pub fn path_feasible(
    path: &[Point2],
    obstacles: &[Rect],
    counter: &mut CollisionCounter,
) -> Result<Feasibility, GeometryError> {
    if path.len() < 2 {
        return Err(GeometryError::PathTooShort(path.len()));
    }
    for (i, w) in path.windows(2).enumerate() {
        if !segment_clear(&Segment::new(w[0], w[1]), obstacles, counter) {
            return Ok(Feasibility::Blocked { segment: i });
        }
    }
    Ok(Feasibility::Free)
}

/// Sum of Euclidean distances between consecutive points.
pub fn path_length(path: &[Point2]) -> f64 {
    path.windows(2).map(|w| w[0].dist(w[1])).sum()
}
