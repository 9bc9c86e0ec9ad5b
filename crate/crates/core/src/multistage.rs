//! Multi-stage planner: an RRT seed path, informed local search (arc and
//! mutation operators) to repair it when obstacles cut it, a greedy shortcut
//! pass, and an RRT restart when the local search stays stuck.
//!
//! ```text
//!  SEEDING --path found--> NAVIGATING --stuck_window failures--> SEEDING
//!                             |   ^
//!                             +---+  blocked: arc, mut, post_process
//!                                    free:    post_process
//! ```

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{path_feasible, segment_clear, CollisionCounter, Feasibility, Point2, Rect, Segment};
use crate::planner::{Planner, PlannerRng};
use crate::rrt::{grow_bidirectional, Counters, RrtParams, Tree};
use crate::world::World;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OperatorError {
    #[error("index {index} outside the operator's range for a path of {len} points")]
    IndexOutOfRange { index: usize, len: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MultiStageConfig {
    /// Half-width of the offset draws of arc and mut; 4x robot size when unset.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub vicinity: Option<f64>,
    /// Consecutive failed repair iterations before the RRT restarts.
    pub stuck_window: usize,
    /// Apply mut even when arc already detoured around the collision.
    pub mutate_after_repair: bool,
}

impl Default for MultiStageConfig {
    fn default() -> Self {
        Self { vicinity: None, stuck_window: 50, mutate_after_repair: false }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    X,
    Y,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArcOutcome {
    /// Both detour points were inserted.
    Arc,
    /// Only the first detour point fit.
    Single,
    Unchanged,
}

/// Tries to route around the colliding segment `path[first_col] ->
/// path[first_col + 1]` with a square detour.
///
/// Both endpoints are shifted by the same offset along one axis. If the three
/// detour segments are free the two new points are inserted; otherwise the
/// second point is dropped and the single point is kept when both of its
/// segments are free.
pub fn arc_with(
    path: &mut Vec<Point2>,
    first_col: usize,
    axis: Axis,
    offset: f64,
    obstacles: &[Rect],
    cc: &mut CollisionCounter,
) -> Result<ArcOutcome, OperatorError> {
    if first_col + 1 >= path.len() {
        return Err(OperatorError::IndexOutOfRange { index: first_col, len: path.len() });
    }
    let b = path[first_col];
    let c = path[first_col + 1];
    let shift = match axis {
        Axis::X => Point2::new(offset, 0.0),
        Axis::Y => Point2::new(0.0, offset),
    };
    let (n1, n2) = (b + shift, c + shift);
    let free = |s: Segment, cc: &mut CollisionCounter| segment_clear(&s, obstacles, cc);

    if free(Segment::new(b, n1), cc) && free(Segment::new(n1, n2), cc) && free(Segment::new(n2, c), cc) {
        path.splice(first_col + 1..first_col + 1, [n1, n2]);
        return Ok(ArcOutcome::Arc);
    }
    if free(Segment::new(b, n1), cc) && free(Segment::new(n1, c), cc) {
        path.insert(first_col + 1, n1);
        return Ok(ArcOutcome::Single);
    }
    Ok(ArcOutcome::Unchanged)
}

/// [`arc_with`] with the offset drawn uniformly from `(-vicinity, vicinity)`
/// and a fair coin choosing the axis.
pub fn arc<R: Rng + ?Sized>(
    path: &mut Vec<Point2>,
    first_col: usize,
    vicinity: f64,
    obstacles: &[Rect],
    rng: &mut R,
    cc: &mut CollisionCounter,
) -> Result<ArcOutcome, OperatorError> {
    let offset = rng.random_range(-vicinity..vicinity);
    let axis = if rng.random::<bool>() { Axis::X } else { Axis::Y };
    arc_with(path, first_col, axis, offset, obstacles, cc)
}

/// Moves interior point `index` by `offset` if the segments on both sides of
/// the moved point are free. Returns whether the move was accepted.
pub fn mutate_with(
    path: &mut [Point2],
    index: usize,
    offset: Point2,
    obstacles: &[Rect],
    cc: &mut CollisionCounter,
) -> Result<bool, OperatorError> {
    if index == 0 || index + 1 >= path.len() {
        return Err(OperatorError::IndexOutOfRange { index, len: path.len() });
    }
    let moved = path[index] + offset;
    let ok = segment_clear(&Segment::new(path[index - 1], moved), obstacles, cc)
        && segment_clear(&Segment::new(moved, path[index + 1]), obstacles, cc);
    if ok {
        path[index] = moved;
    }
    Ok(ok)
}

/// [`mutate_with`] with both offsets drawn uniformly from `(-vicinity, vicinity)`.
pub fn mutate<R: Rng + ?Sized>(
    path: &mut [Point2],
    index: usize,
    vicinity: f64,
    obstacles: &[Rect],
    rng: &mut R,
    cc: &mut CollisionCounter,
) -> Result<bool, OperatorError> {
    if index == 0 || index + 1 >= path.len() {
        return Err(OperatorError::IndexOutOfRange { index, len: path.len() });
    }
    let dx = rng.random_range(-vicinity..vicinity);
    let dy = rng.random_range(-vicinity..vicinity);
    mutate_with(path, index, Point2::new(dx, dy), obstacles, cc)
}

/// Greedy shortcut pass over any sequence whose items map to points.
///
/// Whenever `items[i] -> items[i + 2]` is free the middle item is deleted.
/// After a deletion the scan steps back one position, because the triple
/// ending at the new `items[i + 1]` has not been checked yet; this leaves no
/// removable point behind, so a second pass is a no-op.
pub fn shortcut<T, F>(items: &mut Vec<T>, point: F, obstacles: &[Rect], cc: &mut CollisionCounter)
where
    F: Fn(&T) -> Point2,
{
    let mut i = 0;
    while i + 2 < items.len() {
        if segment_clear(&Segment::new(point(&items[i]), point(&items[i + 2])), obstacles, cc) {
            items.remove(i + 1);
            i = i.saturating_sub(1);
        } else {
            i += 1;
        }
    }
}

/// Removes intermediate points whenever skipping them stays collision-free.
/// Endpoints are never touched.
pub fn post_process(path: &mut Vec<Point2>, obstacles: &[Rect], cc: &mut CollisionCounter) {
    shortcut(path, |p| *p, obstacles, cc);
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Seeding,
    Navigating,
}

#[derive(Debug, Clone)]
pub struct MultiStageState {
    pub phase: Phase,
    pub t_init: Tree,
    pub t_goal: Tree,
    pub path: Vec<Point2>,
    pub vicinity: f64,
    pub stuck_window: usize,
    pub consecutive_failures: usize,
    pub restarts: u64,
    pub mutate_after_repair: bool,
    pub rrt: RrtParams,
    /// The last navigation iteration ended after a repair attempt, so the
    /// next feasibility check tells whether that attempt failed.
    repair_pending: bool,
}

impl MultiStageState {
    pub fn new(world: &World, config: &MultiStageConfig, rrt: RrtParams) -> Self {
        Self {
            phase: Phase::Seeding,
            t_init: Tree::new(world.robot_pos),
            t_goal: Tree::new(world.goal),
            path: Vec::new(),
            vicinity: config.vicinity.unwrap_or(4.0 * world.robot_size),
            stuck_window: config.stuck_window.max(1),
            consecutive_failures: 0,
            restarts: 0,
            mutate_after_repair: config.mutate_after_repair,
            rrt,
            repair_pending: false,
        }
    }

    /// Throws the path away and seeds fresh trees at the robot and the goal.
    pub fn restart(&mut self, world: &World) {
        self.phase = Phase::Seeding;
        self.t_init = Tree::new(world.robot_pos);
        self.t_goal = Tree::new(world.goal);
        self.path.clear();
        self.consecutive_failures = 0;
        self.repair_pending = false;
        self.restarts += 1;
    }

    fn install(&mut self, mut path: Vec<Point2>, robot: Point2) {
        if path[0] != robot {
            path.insert(0, robot);
        }
        self.path = path;
        self.phase = Phase::Navigating;
        self.consecutive_failures = 0;
        self.repair_pending = false;
    }

    /// Runs planning iterations for one tick.
    ///
    /// Seeding consumes the budget in RRT slices. Navigation checks the path:
    /// a free path is shortcut and the call returns, since further iterations
    /// in an unchanged world would repeat the same work; a blocked path gets
    /// one arc + mut + shortcut round per iteration. An iteration that starts
    /// blocked right after a repair counts that repair as failed, and
    /// `stuck_window` failures in a row restart the RRT from the robot.
    pub fn process<R: Rng + ?Sized>(&mut self, world: &World, budget: usize, rng: &mut R, counters: &mut Counters) {
        let obstacles = world.known_obstacles();
        let mut used = 0;
        while used < budget {
            match self.phase {
                Phase::Seeding => {
                    let slice = self.rrt.max_iterations_per_slice.min(budget - used);
                    let growth = grow_bidirectional(
                        &mut self.t_init,
                        &mut self.t_goal,
                        &world.bounds,
                        &self.rrt,
                        &obstacles,
                        slice,
                        rng,
                        counters,
                    );
                    used += growth.iterations;
                    if let Some(path) = growth.path {
                        self.install(path, world.robot_pos);
                    }
                }
                Phase::Navigating => {
                    if self.path.len() < 2 {
                        return;
                    }
                    used += 1;
                    let report = path_feasible(&self.path, &obstacles, &mut counters.cc).expect("path has 2+ points");
                    match report {
                        Feasibility::Free => {
                            self.consecutive_failures = 0;
                            self.repair_pending = false;
                            post_process(&mut self.path, &obstacles, &mut counters.cc);
                            return;
                        }
                        Feasibility::Blocked { segment } => {
                            if self.repair_pending {
                                self.consecutive_failures += 1;
                            }
                            if self.consecutive_failures >= self.stuck_window {
                                self.restart(world);
                                continue;
                            }
                            self.repair(segment, &obstacles, rng, &mut counters.cc);
                            self.repair_pending = true;
                        }
                    }
                }
            }
        }
    }

    fn repair<R: Rng + ?Sized>(&mut self, first_col: usize, obstacles: &[Rect], rng: &mut R, cc: &mut CollisionCounter) {
        let outcome = arc(&mut self.path, first_col, self.vicinity, obstacles, rng, cc).expect("segment index in range");
        if outcome == ArcOutcome::Unchanged || self.mutate_after_repair {
            // the robot end is fixed; fall back to the far end of the segment
            let target = if first_col == 0 { 1 } else { first_col };
            if target + 1 < self.path.len() {
                mutate(&mut self.path, target, self.vicinity, obstacles, rng, cc).expect("interior index");
            }
        }
        post_process(&mut self.path, obstacles, cc);
    }
}

/// [`MultiStageState`] driven through the [`Planner`] interface.
#[derive(Debug, Clone)]
pub struct MultiStagePlanner {
    pub state: MultiStageState,
}

impl MultiStagePlanner {
    pub fn new(world: &World, config: &MultiStageConfig, rrt: RrtParams) -> Self {
        Self { state: MultiStageState::new(world, config, rrt) }
    }
}

impl Planner for MultiStagePlanner {
    fn name(&self) -> &'static str {
        "multistage"
    }

    fn step(&mut self, world: &World, budget: usize, rng: &mut PlannerRng, counters: &mut Counters) -> Option<Vec<Point2>> {
        self.state.process(world, budget, rng, counters);
        match self.state.phase {
            Phase::Navigating if self.state.path.len() >= 2 => Some(self.state.path.clone()),
            _ => None,
        }
    }

    fn robot_moved(&mut self, _world: &World, remaining: &[Point2]) {
        if self.state.phase == Phase::Navigating {
            self.state.path = remaining.to_vec();
        }
    }

    fn restarts(&self) -> u64 {
        self.state.restarts
    }

    fn tree_edges(&self) -> Vec<Segment> {
        match self.state.phase {
            Phase::Seeding => {
                self.state.t_init.edges().chain(self.state.t_goal.edges()).map(|(_, s)| s).collect()
            }
            Phase::Navigating => Vec::new(),
        }
    }
}
