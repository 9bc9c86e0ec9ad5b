//! Tree-repair replanners used as comparison points.
//!
//! * [`Drrt`] keeps one tree rooted at the goal. Branches cut by obstacles are
//!   trimmed together with everything below them, and regrowth is pulled
//!   toward the trimmed region through a waypoint cache.
//! * [`MpRrt`] keeps one tree rooted at the robot plus a bounded forest of
//!   valid subtrees that trimming cut loose, and periodically tries to
//!   reconnect them.
//!
//! Both come in two flavours ([`Advance`]): `NoAdv` only moves along a
//! complete path to the goal, `Adv` also moves toward the most promising
//! node while the robot is disconnected.

use std::collections::VecDeque;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::geometry::{segment_clear, CollisionCounter, Point2, Rect, Segment};
use crate::multistage::shortcut;
use crate::planner::{Planner, PlannerRng};
use crate::rrt::{connect, sample, Counters, Extension, RrtParams, Tree};
use crate::world::World;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BaselineConfig {
    /// DRRT: probability of sampling near a cached waypoint.
    pub waypoint_p: f64,
    /// MP-RRT: probability of trying to reconnect a forest tree.
    pub reuse_p: f64,
    pub forest_cap: usize,
    /// Smallest orphan subtree kept in the forest.
    pub min_subtree: usize,
    pub cache_capacity: usize,
    /// Half-side of the square sampled around a cached waypoint; 4x robot
    /// size when unset.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub waypoint_vicinity: Option<f64>,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        Self {
            waypoint_p: 0.4,
            reuse_p: 0.1,
            forest_cap: 25,
            min_subtree: 5,
            cache_capacity: 100,
            waypoint_vicinity: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Advance {
    Adv,
    NoAdv,
}

/// How often a biased choice was taken out of the draws where it was possible.
#[derive(Debug, Default, Clone, Copy, PartialEq, Eq)]
pub struct DrawStats {
    pub eligible: u64,
    pub chosen: u64,
}

impl DrawStats {
    pub fn frequency(&self) -> Option<f64> {
        (self.eligible > 0).then(|| self.chosen as f64 / self.eligible as f64)
    }

    pub fn merge(&mut self, other: DrawStats) {
        self.eligible += other.eligible;
        self.chosen += other.chosen;
    }
}

/// Fixed-capacity point store with random replacement once full.
#[derive(Debug, Clone, PartialEq)]
pub struct WaypointCache {
    points: Vec<Point2>,
    capacity: usize,
}

impl WaypointCache {
    pub fn new(capacity: usize) -> Self {
        Self { points: Vec::with_capacity(capacity), capacity }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Point2] {
        &self.points
    }

    pub fn insert<R: Rng + ?Sized>(&mut self, p: Point2, rng: &mut R) {
        if self.capacity == 0 {
            return;
        }
        if self.points.len() < self.capacity {
            self.points.push(p);
        } else {
            let i = rng.random_range(0..self.capacity);
            self.points[i] = p;
        }
    }
}

/// Where a DRRT growth sample came from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DrrtSample {
    /// Uniform in a square around a cached waypoint.
    Waypoint(Point2),
    /// The robot position (goal bias of a goal-rooted tree).
    Robot(Point2),
    Uniform(Point2),
}

impl DrrtSample {
    pub fn point(&self) -> Point2 {
        match *self {
            DrrtSample::Waypoint(p) | DrrtSample::Robot(p) | DrrtSample::Uniform(p) => p,
        }
    }
}

/// DRRT sampling rule: with probability `waypoint_p` (when the cache is
/// non-empty) a point near a random cached waypoint, otherwise the usual
/// robot-biased uniform sample.
#[allow(clippy::too_many_arguments)]
pub fn drrt_sample<R: Rng + ?Sized>(
    cache: &WaypointCache,
    bounds: &Rect,
    robot: Point2,
    waypoint_p: f64,
    goal_bias: f64,
    vicinity: f64,
    rng: &mut R,
    stats: &mut DrawStats,
) -> DrrtSample {
    if !cache.is_empty() {
        stats.eligible += 1;
        if rng.random::<f64>() < waypoint_p {
            stats.chosen += 1;
            let w = cache.points[rng.random_range(0..cache.len())];
            let q = Point2::new(
                w.x + rng.random_range(-vicinity..=vicinity),
                w.y + rng.random_range(-vicinity..=vicinity),
            );
            return DrrtSample::Waypoint(bounds.clamp(q));
        }
    }
    let q = sample(bounds, Some(robot), goal_bias, rng);
    if q == robot {
        DrrtSample::Robot(q)
    } else {
        DrrtSample::Uniform(q)
    }
}

/// Flags every non-root node whose parent edge touches an obstacle.
fn invalid_edges(tree: &Tree, obstacles: &[Rect], cc: &mut CollisionCounter) -> Vec<bool> {
    let mut removed = vec![false; tree.len()];
    for (i, seg) in tree.edges() {
        removed[i] = !segment_clear(&seg, obstacles, cc);
    }
    removed
}

/// After a connect toward some point, the node it ended on, if any.
fn landed(ext: Extension) -> Option<usize> {
    match ext {
        Extension::Reached(n) | Extension::Added { node: n, .. } => Some(n),
        Extension::Blocked => None,
    }
}

/// Dynamic RRT: a single tree grown from the goal toward the robot.
#[derive(Debug, Clone)]
pub struct Drrt {
    pub tree: Tree,
    pub cache: WaypointCache,
    pub waypoint_stats: DrawStats,
    /// Nodes removed by the most recent trim.
    pub last_trimmed: usize,
    robot_node: Option<usize>,
    /// Tree nodes of the last command, after the robot point.
    route: Vec<usize>,
    advance: Advance,
    rrt: RrtParams,
    config: BaselineConfig,
    vicinity: f64,
}

impl Drrt {
    pub fn new(world: &World, config: &BaselineConfig, rrt: RrtParams, advance: Advance) -> Self {
        Self {
            tree: Tree::new(world.goal),
            cache: WaypointCache::new(config.cache_capacity),
            waypoint_stats: DrawStats::default(),
            last_trimmed: 0,
            robot_node: None,
            route: Vec::new(),
            advance,
            rrt,
            config: *config,
            vicinity: config.waypoint_vicinity.unwrap_or(4.0 * world.robot_size),
        }
    }

    pub fn robot_node(&self) -> Option<usize> {
        self.robot_node
    }

    /// Removes every node whose parent edge is cut by a dynamic obstacle,
    /// along with all of its descendants. Removed points go to the cache.
    pub fn trim<R: Rng + ?Sized>(&mut self, world: &World, rng: &mut R, cc: &mut CollisionCounter) {
        self.last_trimmed = 0;
        let dynamic = world.dynamic_obstacles();
        if dynamic.is_empty() {
            return;
        }
        let removed = invalid_edges(&self.tree, &dynamic, cc);
        if !removed.contains(&true) {
            return;
        }
        let split = self.tree.split(&removed);
        for (i, m) in split.map.iter().enumerate() {
            if m.is_none() {
                self.cache.insert(self.tree.point(i), rng);
                self.last_trimmed += 1;
            }
        }
        self.robot_node = self.robot_node.and_then(|n| split.map[n]);
        self.tree = split.main.expect("root is never flagged");
    }

    fn check_connection(&mut self, world: &World, known: &[Rect], cc: &mut CollisionCounter) -> bool {
        let Some(n) = self.robot_node else { return false };
        let np = self.tree.point(n);
        if np == world.robot_pos || segment_clear(&Segment::new(world.robot_pos, np), known, cc) {
            return true;
        }
        self.robot_node = None;
        false
    }

    /// Trims invalid branches, then grows until the tree reaches the robot or
    /// the budget runs out. Returns whether the robot is connected.
    pub fn replan<R: Rng + ?Sized>(&mut self, world: &World, budget: usize, rng: &mut R, counters: &mut Counters) -> bool {
        let known = world.known_obstacles();
        self.trim(world, rng, &mut counters.cc);
        if self.check_connection(world, &known, &mut counters.cc) {
            return true;
        }
        let robot = world.robot_pos;
        for _ in 0..budget {
            let draw = drrt_sample(
                &self.cache,
                &world.bounds,
                robot,
                self.config.waypoint_p,
                self.rrt.goal_bias,
                self.vicinity,
                rng,
                &mut self.waypoint_stats,
            );
            let ext = connect(&mut self.tree, draw.point(), &self.rrt, &known, counters);
            let Some(node) = landed(ext) else { continue };
            if matches!((draw, ext), (DrrtSample::Robot(_), Extension::Reached(_))) {
                self.robot_node = Some(node);
                return true;
            }
            let np = self.tree.point(node);
            if np.dist(robot) <= self.rrt.step_size
                && segment_clear(&Segment::new(np, robot), &known, &mut counters.cc)
            {
                self.robot_node = Some(self.tree.push(robot, node));
                return true;
            }
        }
        false
    }

    /// Motion decision for this tick.
    pub fn command(&mut self, world: &World, connected: bool, counters: &mut Counters) -> Option<Vec<Point2>> {
        self.route.clear();
        let robot = world.robot_pos;
        if connected {
            let n = self.robot_node.expect("connected implies a robot node");
            let mut route = self.tree.root_path_indices(n).expect("valid node");
            route.reverse();
            let known = world.known_obstacles();
            let tree = &self.tree;
            shortcut(&mut route, |&i| tree.point(i), &known, &mut counters.cc);
            if self.tree.point(route[0]) == robot {
                route.remove(0);
            }
            self.route = route;
        } else if self.advance == Advance::Adv {
            let n = self.tree.nearest(robot, &mut counters.nn);
            if self.tree.point(n) != robot {
                self.route = vec![n];
            }
        }
        if self.route.is_empty() {
            return None;
        }
        let mut path = vec![robot];
        path.extend(self.route.iter().map(|&i| self.tree.point(i)));
        Some(path)
    }
}

impl Planner for Drrt {
    fn name(&self) -> &'static str {
        match self.advance {
            Advance::Adv => "drrt-adv",
            Advance::NoAdv => "drrt-noadv",
        }
    }

    fn step(&mut self, world: &World, budget: usize, rng: &mut PlannerRng, counters: &mut Counters) -> Option<Vec<Point2>> {
        let connected = self.replan(world, budget, rng, counters);
        self.command(world, connected, counters)
    }

    fn robot_moved(&mut self, _world: &World, remaining: &[Point2]) {
        if self.route.is_empty() {
            return;
        }
        // commanded path was [robot, route...]; remaining is [pos, unreached...]
        let next = self.route.len() + 2 - remaining.len();
        self.robot_node = Some(self.route[(next - 1).min(self.route.len() - 1)]);
        self.route.clear();
    }

    fn tree_edges(&self) -> Vec<Segment> {
        self.tree.edges().map(|(_, s)| s).collect()
    }
}

/// Bounded FIFO of detached subtrees; the oldest tree is evicted first.
#[derive(Debug, Clone, PartialEq)]
pub struct Forest {
    trees: VecDeque<Tree>,
    capacity: usize,
    min_size: usize,
}

impl Forest {
    pub fn new(capacity: usize, min_size: usize) -> Self {
        Self { trees: VecDeque::new(), capacity, min_size }
    }

    pub fn len(&self) -> usize {
        self.trees.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trees.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn min_size(&self) -> usize {
        self.min_size
    }

    pub fn trees(&self) -> impl Iterator<Item = &Tree> {
        self.trees.iter()
    }

    /// Stores `tree` if it is large enough, evicting the oldest tree when
    /// full. Returns whether it was kept.
    pub fn offer(&mut self, tree: Tree) -> bool {
        if tree.len() < self.min_size || self.capacity == 0 {
            return false;
        }
        if self.trees.len() == self.capacity {
            self.trees.pop_front();
        }
        self.trees.push_back(tree);
        true
    }

    pub fn take(&mut self, i: usize) -> Tree {
        self.trees.remove(i).expect("forest index in range")
    }

    /// Removes invalid nodes from every stored tree. Surviving pieces keep
    /// their tree's age slot; pieces below the minimum size are dropped.
    fn trim(&mut self, obstacles: &[Rect], cc: &mut CollisionCounter) {
        let old = std::mem::take(&mut self.trees);
        for tree in old {
            let mut removed = invalid_edges(&tree, obstacles, cc);
            removed[0] = !segment_clear(&Segment::new(tree.root(), tree.root()), obstacles, cc);
            if !removed.contains(&true) {
                self.trees.push_back(tree);
                continue;
            }
            let split = tree.split(&removed);
            for piece in split.main.into_iter().chain(split.orphans) {
                if piece.len() >= self.min_size {
                    self.trees.push_back(piece);
                }
            }
        }
        while self.trees.len() > self.capacity {
            self.trees.pop_front();
        }
    }
}

/// Multipartite RRT: a tree rooted at the robot and a forest of reusable
/// detached subtrees.
#[derive(Debug, Clone)]
pub struct MpRrt {
    pub tree: Tree,
    pub forest: Forest,
    pub reuse_stats: DrawStats,
    goal: Point2,
    goal_node: Option<usize>,
    /// Tree nodes of the last command; `route[0]` is the root.
    route: Vec<usize>,
    advance: Advance,
    rrt: RrtParams,
    config: BaselineConfig,
}

impl MpRrt {
    pub fn new(world: &World, config: &BaselineConfig, rrt: RrtParams, advance: Advance) -> Self {
        Self {
            tree: Tree::new(world.robot_pos),
            forest: Forest::new(config.forest_cap, config.min_subtree),
            reuse_stats: DrawStats::default(),
            goal: world.goal,
            goal_node: None,
            route: Vec::new(),
            advance,
            rrt,
            config: *config,
        }
    }

    pub fn goal_node(&self) -> Option<usize> {
        self.goal_node
    }

    /// Deletes invalid nodes from the main tree and the forest. Valid subtrees
    /// cut off from the main tree are offered to the forest.
    pub fn trim(&mut self, world: &World, cc: &mut CollisionCounter) {
        let dynamic = world.dynamic_obstacles();
        if dynamic.is_empty() {
            return;
        }
        self.forest.trim(&dynamic, cc);
        let removed = invalid_edges(&self.tree, &dynamic, cc);
        if !removed.contains(&true) {
            return;
        }
        let split = self.tree.split(&removed);
        self.goal_node = self.goal_node.and_then(|g| split.map[g]);
        self.tree = split.main.expect("root is never flagged");
        for orphan in split.orphans {
            self.forest.offer(orphan);
        }
    }

    /// With probability `reuse_p`, and only when the forest is non-empty,
    /// picks a forest tree to reconnect.
    pub fn choose_reuse<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Option<usize> {
        if self.forest.is_empty() {
            return None;
        }
        self.reuse_stats.eligible += 1;
        if rng.random::<f64>() < self.config.reuse_p {
            self.reuse_stats.chosen += 1;
            Some(rng.random_range(0..self.forest.len()))
        } else {
            None
        }
    }

    /// Connects the main tree toward the root of forest tree `i`; on success
    /// the subtree joins the main tree and leaves the forest.
    pub fn reconnect(&mut self, i: usize, obstacles: &[Rect], counters: &mut Counters) -> bool {
        let target = self.forest.trees[i].root();
        let Extension::Reached(n) = connect(&mut self.tree, target, &self.rrt, obstacles, counters) else {
            return false;
        };
        let sub = self.forest.take(i);
        let before = self.tree.len();
        self.tree.graft(n, &sub);
        if self.goal_node.is_none() {
            self.goal_node = std::iter::once(n).chain(before..self.tree.len()).find(|&j| self.tree.point(j) == self.goal);
        }
        true
    }

    /// Trims, then grows until the main tree holds the goal or the budget runs
    /// out. Returns whether a goal node exists.
    pub fn replan<R: Rng + ?Sized>(&mut self, world: &World, budget: usize, rng: &mut R, counters: &mut Counters) -> bool {
        let known = world.known_obstacles();
        self.trim(world, &mut counters.cc);
        if self.goal_node.is_some() {
            return true;
        }
        let goal = self.goal;
        for _ in 0..budget {
            if let Some(i) = self.choose_reuse(rng) {
                self.reconnect(i, &known, counters);
            } else {
                let q = sample(&world.bounds, Some(goal), self.rrt.goal_bias, rng);
                let ext = connect(&mut self.tree, q, &self.rrt, &known, counters);
                if let Some(node) = landed(ext) {
                    let np = self.tree.point(node);
                    if np == goal {
                        self.goal_node = Some(node);
                    } else if np.dist(goal) <= self.rrt.step_size
                        && segment_clear(&Segment::new(np, goal), &known, &mut counters.cc)
                    {
                        self.goal_node = Some(self.tree.push(goal, node));
                    }
                }
            }
            if self.goal_node.is_some() {
                return true;
            }
        }
        false
    }

    /// Motion decision for this tick: the shortcut root-to-goal path when
    /// connected; under `Adv`, the shortcut path to the node nearest the goal.
    pub fn command(&mut self, world: &World, counters: &mut Counters) -> Option<Vec<Point2>> {
        self.route.clear();
        let target = match (self.goal_node, self.advance) {
            (Some(g), _) => g,
            (None, Advance::Adv) => self.tree.nearest(world.goal, &mut counters.nn),
            (None, Advance::NoAdv) => return None,
        };
        if target == 0 {
            return None;
        }
        let mut route = self.tree.root_path_indices(target).expect("valid node");
        let known = world.known_obstacles();
        let tree = &self.tree;
        shortcut(&mut route, |&i| tree.point(i), &known, &mut counters.cc);
        let path = route.iter().map(|&i| self.tree.point(i)).collect();
        self.route = route;
        Some(path)
    }
}

impl Planner for MpRrt {
    fn name(&self) -> &'static str {
        match self.advance {
            Advance::Adv => "mprrt-adv",
            Advance::NoAdv => "mprrt-noadv",
        }
    }

    fn step(&mut self, world: &World, budget: usize, rng: &mut PlannerRng, counters: &mut Counters) -> Option<Vec<Point2>> {
        self.replan(world, budget, rng, counters);
        self.command(world, counters)
    }

    /// Re-roots the main tree at the robot's new position.
    fn robot_moved(&mut self, _world: &World, remaining: &[Point2]) {
        if self.route.len() < 2 {
            self.route.clear();
            return;
        }
        let pos = remaining[0];
        // index into route of the first waypoint not yet reached
        let next = self.route.len() + 1 - remaining.len();
        let reached = self.route[next - 1];
        if next == 1 && pos == self.tree.point(reached) {
            self.route.clear();
            return;
        }
        let (tree, map) = if pos == self.tree.point(reached) {
            self.tree.reroot(reached)
        } else {
            let (t, m) = self.tree.reroot(self.route[next]);
            (t.hang_below(pos), m.into_iter().map(|i| i + 1).collect())
        };
        self.goal_node = self.goal_node.map(|g| map[g]);
        self.tree = tree;
        self.route.clear();
    }

    fn tree_edges(&self) -> Vec<Segment> {
        self.tree
            .edges()
            .map(|(_, s)| s)
            .chain(self.forest.trees().flat_map(|t| t.edges().map(|(_, s)| s)))
            .collect()
    }
}
