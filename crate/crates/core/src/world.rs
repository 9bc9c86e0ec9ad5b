//! Dynamic environment: static walls, bouncing movers, obstacles that only
//! appear once the robot gets close, and the robot itself.
//!
//! Time is a discrete tick counter. All randomness (mover placement, speeds
//! and headings) is drawn when the world is built, so [`World::update`] is a
//! pure function of the world state.

use std::collections::BTreeMap;
use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::geometry::{segment_clear, CollisionCounter, Point2, Rect, Segment};

const PLACEMENT_ATTEMPTS: usize = 10_000;

#[derive(Debug, Error)]
pub enum MapError {
    #[error("schema violation: {0}")]
    Schema(#[from] serde_json::Error),
    #[error("invalid field `{field}`: {reason}")]
    Invalid { field: String, reason: String },
    #[error("robot start {0:?} lies inside a wall")]
    StartInWall(Point2),
    #[error("goal {0:?} lies inside a wall")]
    GoalInWall(Point2),
    #[error("hidden obstacle {0} covers the start or goal")]
    HiddenCoversEndpoint(usize),
    #[error("mover {0} overlaps the robot start")]
    MoverOverlapsStart(usize),
    #[error("could not place mover {0} clear of walls, start and goal")]
    MoverPlacement(usize),
}

fn invalid(field: &str, reason: impl Into<String>) -> MapError {
    MapError::Invalid { field: field.to_string(), reason: reason.into() }
}

#[derive(Debug, Error, PartialEq)]
pub enum WorldError {
    #[error("path starts at {path_start:?} but the robot is at {robot:?}")]
    PathNotAtRobot { path_start: Point2, robot: Point2 },
    #[error("empty path")]
    EmptyPath,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct RobotSpec {
    pub start: Point2,
    pub speed: f64,
    #[serde(default = "one")]
    pub size: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct MoverSpec {
    pub count: usize,
    #[serde(default = "one")]
    pub size_factor: f64,
    #[serde(default = "default_speed_range")]
    pub speed_range: [f64; 2],
    /// Name of the top-level document field holding the placement seed.
    #[serde(default = "default_seed_field")]
    pub placement_seed_field: String,
    /// Re-draw each mover's heading every this many ticks. Off when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub heading_change_every: Option<u64>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct HiddenSpec {
    pub center: Point2,
    pub size_factor: f64,
}

fn one() -> f64 {
    1.0
}

fn default_speed_range() -> [f64; 2] {
    [0.10, 0.55]
}

fn default_seed_field() -> String {
    "seed".to_string()
}

/// The JSON map document.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct MapDocument {
    pub bounds: [f64; 2],
    pub robot: RobotSpec,
    pub goal: Point2,
    #[serde(default)]
    pub walls: Vec<Rect>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub movers: Option<MoverSpec>,
    #[serde(default)]
    pub hidden: Vec<HiddenSpec>,
    /// Reveal distance for hidden obstacles; 3x robot size when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reveal_radius: Option<f64>,
    /// Remaining top-level fields, including the placement seed.
    #[serde(flatten)]
    pub extra: BTreeMap<String, Value>,
}

impl MapDocument {
    pub fn parse(text: &str) -> Result<Self, MapError> {
        let doc: MapDocument = serde_json::from_str(text)?;
        doc.validate()?;
        Ok(doc)
    }

    pub fn bounds_rect(&self) -> Rect {
        Rect::from_min_max(Point2::new(0.0, 0.0), Point2::new(self.bounds[0], self.bounds[1]))
    }

    /// Placement seed named by `movers.placement_seed_field` (default 0).
    pub fn seed(&self) -> Result<u64, MapError> {
        let field = self.movers.as_ref().map_or("seed", |m| m.placement_seed_field.as_str());
        match self.extra.get(field) {
            None => Ok(0),
            Some(v) => v.as_u64().ok_or_else(|| invalid(field, "seed must be a non-negative integer")),
        }
    }

    pub fn validate(&self) -> Result<(), MapError> {
        let [w, h] = self.bounds;
        if !(w.is_finite() && h.is_finite() && w > 0.0 && h > 0.0) {
            return Err(invalid("bounds", "width and height must be positive"));
        }
        let bounds = self.bounds_rect();
        let r = &self.robot;
        if !(r.speed.is_finite() && r.speed > 0.0) {
            return Err(invalid("robot.speed", "must be positive"));
        }
        if !(r.size.is_finite() && r.size > 0.0) {
            return Err(invalid("robot.size", "must be positive"));
        }
        if !r.start.is_finite() || !bounds.contains(r.start) {
            return Err(invalid("robot.start", "must lie inside bounds"));
        }
        if !self.goal.is_finite() || !bounds.contains(self.goal) {
            return Err(invalid("goal", "must lie inside bounds"));
        }
        for (i, wall) in self.walls.iter().enumerate() {
            if !wall.is_valid() {
                return Err(invalid(&format!("walls[{i}].half"), "half extents must be positive"));
            }
            if wall.contains(r.start) {
                return Err(MapError::StartInWall(r.start));
            }
            if wall.contains(self.goal) {
                return Err(MapError::GoalInWall(self.goal));
            }
        }
        if let Some(m) = &self.movers {
            if !(m.size_factor.is_finite() && m.size_factor > 0.0) {
                return Err(invalid("movers.size_factor", "must be positive"));
            }
            let [lo, hi] = m.speed_range;
            if !(lo.is_finite() && hi.is_finite() && 0.0 <= lo && lo <= hi) {
                return Err(invalid("movers.speed_range", "need 0 <= min <= max"));
            }
            if m.heading_change_every == Some(0) {
                return Err(invalid("movers.heading_change_every", "must be at least 1"));
            }
            let side = m.size_factor * r.size;
            if m.count > 0 && (side >= w || side >= h) {
                return Err(invalid("movers.size_factor", "movers do not fit inside bounds"));
            }
        }
        for (i, hs) in self.hidden.iter().enumerate() {
            let shape = Rect::square(hs.center, hs.size_factor * r.size);
            if !shape.is_valid() {
                return Err(invalid(&format!("hidden[{i}].size_factor"), "must be positive"));
            }
            if shape.contains(r.start) || shape.contains(self.goal) {
                return Err(MapError::HiddenCoversEndpoint(i));
            }
        }
        if let Some(rr) = self.reveal_radius {
            if !(rr.is_finite() && rr >= 0.0) {
                return Err(invalid("reveal_radius", "must be non-negative"));
            }
        }
        self.seed()?;
        Ok(())
    }

    /// Builds the world with movers drawn from the document seed.
    pub fn build(&self) -> Result<World, MapError> {
        self.build_with_seed(self.seed()?)
    }

    /// Builds the world with movers drawn from the document seed mixed with
    /// `trial_seed`, so each trial of a suite sees a different crowd.
    pub fn build_for_trial(&self, trial_seed: u64) -> Result<World, MapError> {
        self.build_with_seed(splitmix64(self.seed()? ^ splitmix64(trial_seed)))
    }

    fn build_with_seed(&self, seed: u64) -> Result<World, MapError> {
        self.validate()?;
        let bounds = self.bounds_rect();
        let size = self.robot.size;
        let mut world = World::new(bounds, self.robot.start, self.goal, self.robot.speed, size);
        world.walls = self.walls.clone();
        let reveal_radius = self.reveal_radius.unwrap_or(3.0 * size);
        world.hidden = self
            .hidden
            .iter()
            .map(|h| HiddenObstacle {
                shape: Rect::square(h.center, h.size_factor * size),
                revealed: false,
                reveal_radius,
            })
            .collect();

        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        if let Some(spec) = &self.movers {
            let side = spec.size_factor * size;
            let half = side / 2.0;
            let inner = Rect::new(bounds.center, bounds.half_w - half, bounds.half_h - half);
            let [lo, hi] = spec.speed_range;
            for i in 0..spec.count {
                let speed_fraction = if hi > lo { rng.random_range(lo..=hi) } else { lo };
                let heading = rng.random_range(0.0..TAU);
                let speed = speed_fraction * self.robot.speed;
                let velocity = Point2::new(speed * heading.cos(), speed * heading.sin());
                let shape = (0..PLACEMENT_ATTEMPTS)
                    .map(|_| {
                        let (a, b) = (inner.min(), inner.max());
                        Rect::square(
                            Point2::new(rng.random_range(a.x..=b.x), rng.random_range(a.y..=b.y)),
                            side,
                        )
                    })
                    .find(|s| {
                        s.distance_to(self.robot.start) > 2.0 * size
                            && s.distance_to(self.goal) > 2.0 * size
                            && !world.walls.iter().any(|w| w.overlaps_strict(s))
                    })
                    .ok_or(MapError::MoverPlacement(i))?;
                world.movers.push(MovingObstacle { shape, velocity, speed_fraction });
            }
            if let Some(every) = spec.heading_change_every {
                world.heading_change = Some(HeadingChange { every, rng: ChaCha8Rng::seed_from_u64(rng.random()) });
            }
        }
        if let Some(i) = world.movers.iter().position(|m| m.shape.contains(world.robot_pos)) {
            return Err(MapError::MoverOverlapsStart(i));
        }
        Ok(world)
    }
}

/// Parses, validates and builds a world from a map document.
pub fn load_map(text: &str) -> Result<World, MapError> {
    MapDocument::parse(text)?.build()
}

pub(crate) fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MovingObstacle {
    pub shape: Rect,
    /// World units per tick.
    pub velocity: Point2,
    pub speed_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HiddenObstacle {
    pub shape: Rect,
    pub revealed: bool,
    pub reveal_radius: f64,
}

#[derive(Debug, Clone)]
struct HeadingChange {
    every: u64,
    rng: ChaCha8Rng,
}

#[derive(Debug, Clone)]
pub struct World {
    pub bounds: Rect,
    pub walls: Vec<Rect>,
    pub movers: Vec<MovingObstacle>,
    pub hidden: Vec<HiddenObstacle>,
    pub robot_pos: Point2,
    pub goal: Point2,
    /// World units per tick.
    pub robot_speed: f64,
    pub robot_size: f64,
    pub clock: u64,
    heading_change: Option<HeadingChange>,
}

impl World {
    pub fn new(bounds: Rect, start: Point2, goal: Point2, robot_speed: f64, robot_size: f64) -> Self {
        Self {
            bounds,
            walls: Vec::new(),
            movers: Vec::new(),
            hidden: Vec::new(),
            robot_pos: start,
            goal,
            robot_speed,
            robot_size,
            clock: 0,
            heading_change: None,
        }
    }

    pub fn at_goal(&self) -> bool {
        self.robot_pos.dist(self.goal) <= 1e-9
    }

    /// Walls, movers and revealed hidden obstacles, in that order.
    pub fn known_obstacles(&self) -> Vec<Rect> {
        let mut out = self.walls.clone();
        out.extend(self.dynamic_obstacles());
        out
    }

    /// Known obstacles that can invalidate previously checked geometry:
    /// movers and revealed hidden obstacles.
    pub fn dynamic_obstacles(&self) -> Vec<Rect> {
        self.movers
            .iter()
            .map(|m| m.shape)
            .chain(self.hidden.iter().filter(|h| h.revealed).map(|h| h.shape))
            .collect()
    }

    /// Advances the simulation clock by `dt` ticks.
    pub fn update(&mut self, dt: u64) {
        for _ in 0..dt {
            self.clock += 1;
            if let Some(hc) = &mut self.heading_change {
                if self.clock.is_multiple_of(hc.every) {
                    for m in &mut self.movers {
                        let speed = m.velocity.norm();
                        let heading = hc.rng.random_range(0.0..TAU);
                        m.velocity = Point2::new(speed * heading.cos(), speed * heading.sin());
                    }
                }
            }
            for m in &mut self.movers {
                step_mover(m, &self.bounds, &self.walls);
            }
            self.reveal();
        }
    }

    fn reveal(&mut self) {
        let robot = self.robot_pos;
        for h in self.hidden.iter_mut().filter(|h| !h.revealed) {
            if h.shape.distance_to(robot) <= h.reveal_radius {
                h.revealed = true;
            }
        }
    }

    /// Moves the robot along `path` for `dt` ticks and returns the unconsumed
    /// remainder, starting at the new robot position.
    ///
    /// Each traversed piece is checked against the obstacles known right now;
    /// the robot halts before the first piece that collides, so a blocked
    /// first segment leaves it where it is. These checks are simulator work
    /// and do not count toward any planner's collision metric.
    pub fn advance_robot(&mut self, path: &[Point2], dt: u64) -> Result<Vec<Point2>, WorldError> {
        let first = *path.first().ok_or(WorldError::EmptyPath)?;
        if first.dist(self.robot_pos) > 1e-9 {
            return Err(WorldError::PathNotAtRobot { path_start: first, robot: self.robot_pos });
        }
        let obstacles = self.known_obstacles();
        let mut scratch = CollisionCounter::new();
        let mut budget = self.robot_speed * dt as f64;
        let mut pos = self.robot_pos;
        let mut next = 1;
        while next < path.len() && budget > 0.0 {
            let target = path[next];
            let d = pos.dist(target);
            let dest = if d <= budget { target } else { pos.lerp(target, budget / d) };
            if !segment_clear(&Segment::new(pos, dest), &obstacles, &mut scratch) {
                break;
            }
            if d <= budget {
                budget -= d;
                next += 1;
            } else {
                budget = 0.0;
            }
            pos = dest;
        }
        self.robot_pos = pos;
        let mut rest = Vec::with_capacity(path.len() - next + 1);
        rest.push(pos);
        rest.extend_from_slice(&path[next..]);
        Ok(rest)
    }
}

/// Constant-velocity step with specular reflection off the bounds and walls,
/// handled one axis at a time.
fn step_mover(m: &mut MovingObstacle, bounds: &Rect, walls: &[Rect]) {
    let old = m.shape.center;
    let (lo, hi) = (bounds.min(), bounds.max());

    let (x, vx) = reflect_axis(old.x, m.velocity.x, lo.x + m.shape.half_w, hi.x - m.shape.half_w);
    m.velocity.x = vx;
    m.shape.center.x = x;
    if walls.iter().any(|w| w.overlaps_strict(&m.shape)) {
        m.shape.center.x = old.x;
        m.velocity.x = -m.velocity.x;
    }

    let (y, vy) = reflect_axis(old.y, m.velocity.y, lo.y + m.shape.half_h, hi.y - m.shape.half_h);
    m.velocity.y = vy;
    m.shape.center.y = y;
    if walls.iter().any(|w| w.overlaps_strict(&m.shape)) {
        m.shape.center.y = old.y;
        m.velocity.y = -m.velocity.y;
    }
}

fn reflect_axis(pos: f64, vel: f64, lo: f64, hi: f64) -> (f64, f64) {
    let next = pos + vel;
    if next > hi {
        ((2.0 * hi - next).clamp(lo, hi), -vel)
    } else if next < lo {
        ((2.0 * lo - next).clamp(lo, hi), -vel)
    } else {
        (next, vel)
    }
}
