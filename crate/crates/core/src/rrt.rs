//! RRT building blocks shared by every planner: the parent-linked tree,
//! counted nearest-neighbour queries, the midpoint EXTEND step and
//! two-tree growth.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{first_contact, CollisionCounter, Point2, Rect, Segment};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RrtError {
    #[error("node index {index} out of range for tree of {len} nodes")]
    InvalidIndex { index: usize, len: usize },
    #[error("invalid RRT parameter: {0}")]
    InvalidParams(&'static str),
}

/// Per-trial count of nearest-node queries (N.N. metric).
#[derive(Debug, Default, Clone, Copy, PartialEq, Eq)]
pub struct NnCounter {
    count: u64,
}

impl NnCounter {
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

/// Both cost counters of a trial.
#[derive(Debug, Default, Clone, Copy, PartialEq, Eq)]
pub struct Counters {
    pub cc: CollisionCounter,
    pub nn: NnCounter,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RrtParams {
    /// Maximum edge length added by one EXTEND.
    pub step_size: f64,
    pub goal_bias: f64,
    /// Iterations handed to one growth slice before control returns.
    pub max_iterations_per_slice: usize,
}

impl Default for RrtParams {
    fn default() -> Self {
        Self::for_robot(1.0)
    }
}

impl RrtParams {
    pub fn for_robot(robot_size: f64) -> Self {
        Self { step_size: 2.0 * robot_size, goal_bias: 0.05, max_iterations_per_slice: 50 }
    }

    pub fn validate(&self) -> Result<(), RrtError> {
        if !(self.step_size.is_finite() && self.step_size > 0.0) {
            return Err(RrtError::InvalidParams("step_size must be positive"));
        }
        if !(0.0..=1.0).contains(&self.goal_bias) {
            return Err(RrtError::InvalidParams("goal_bias must lie in [0, 1]"));
        }
        if self.max_iterations_per_slice == 0 {
            return Err(RrtError::InvalidParams("max_iterations_per_slice must be at least 1"));
        }
        Ok(())
    }

    /// Edges shorter than this are never inserted by the midpoint rule.
    pub fn min_edge(&self) -> f64 {
        1e-3 * self.step_size
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Node {
    pub point: Point2,
    pub parent: Option<usize>,
}

/// Tree stored as a node list where every parent index is smaller than its
/// child's index. Node 0 is the root.
#[derive(Debug, Clone, PartialEq)]
pub struct Tree {
    nodes: Vec<Node>,
}

/// Result of removing nodes from a tree.
#[derive(Debug, Clone, PartialEq)]
pub struct Split {
    /// Surviving component that still contains the root; `None` when the
    /// root itself was removed.
    pub main: Option<Tree>,
    /// Old index -> index in `main`, `None` when the node is not in `main`.
    pub map: Vec<Option<usize>>,
    /// Surviving components cut off from the root, ordered by the old index
    /// of their top node.
    pub orphans: Vec<Tree>,
}

impl Tree {
    pub fn new(root: Point2) -> Self {
        Self { nodes: vec![Node { point: root, parent: None }] }
    }

    pub fn root(&self) -> Point2 {
        self.nodes[0].point
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    /// Trees always hold their root.
    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn point(&self, i: usize) -> Point2 {
        self.nodes[i].point
    }

    pub fn parent(&self, i: usize) -> Option<usize> {
        self.nodes[i].parent
    }

    pub fn push(&mut self, point: Point2, parent: usize) -> usize {
        assert!(parent < self.nodes.len(), "parent {parent} not in tree");
        self.nodes.push(Node { point, parent: Some(parent) });
        self.nodes.len() - 1
    }

    /// Index of the node closest to `q`, lowest index on ties.
    pub fn nearest(&self, q: Point2, nn: &mut NnCounter) -> usize {
        nn.bump();
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (i, n) in self.nodes.iter().enumerate() {
            let d = n.point.dist_sq(q);
            if d < best_d {
                best = i;
                best_d = d;
            }
        }
        best
    }

    /// Node indices from the root down to `leaf`.
    pub fn root_path_indices(&self, leaf: usize) -> Result<Vec<usize>, RrtError> {
        if leaf >= self.nodes.len() {
            return Err(RrtError::InvalidIndex { index: leaf, len: self.nodes.len() });
        }
        let mut out = vec![leaf];
        let mut cur = leaf;
        while let Some(p) = self.nodes[cur].parent {
            out.push(p);
            cur = p;
        }
        out.reverse();
        Ok(out)
    }

    /// Points from the root down to `leaf`.
    pub fn root_path(&self, leaf: usize) -> Result<Vec<Point2>, RrtError> {
        Ok(self.root_path_indices(leaf)?.into_iter().map(|i| self.nodes[i].point).collect())
    }

    /// `(child index, parent -> child segment)` for every non-root node.
    pub fn edges(&self) -> impl Iterator<Item = (usize, Segment)> + '_ {
        self.nodes
            .iter()
            .enumerate()
            .filter_map(|(i, n)| n.parent.map(|p| (i, Segment::new(self.nodes[p].point, n.point))))
    }

    pub fn children(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.nodes.len()];
        for (i, n) in self.nodes.iter().enumerate() {
            if let Some(p) = n.parent {
                out[p].push(i);
            }
        }
        out
    }

    /// Deletes the flagged nodes and separates what is left into connected
    /// components.
    pub fn split(&self, removed: &[bool]) -> Split {
        assert_eq!(removed.len(), self.nodes.len());
        // component id per node; the root, if kept, lands in component 0
        let mut comp: Vec<Option<usize>> = vec![None; self.nodes.len()];
        let mut local: Vec<usize> = vec![0; self.nodes.len()];
        let mut parts: Vec<Vec<Node>> = Vec::new();
        for (i, n) in self.nodes.iter().enumerate() {
            if removed[i] {
                continue;
            }
            let (c, parent) = match n.parent.and_then(|p| comp[p].map(|c| (c, p))) {
                Some((c, p)) => (c, Some(local[p])),
                None => {
                    parts.push(Vec::new());
                    (parts.len() - 1, None)
                }
            };
            comp[i] = Some(c);
            local[i] = parts[c].len();
            parts[c].push(Node { point: n.point, parent });
        }
        let main_comp = (!removed[0]).then_some(0);
        let map = comp
            .iter()
            .zip(&local)
            .map(|(c, &l)| (c.is_some() && *c == main_comp).then_some(l))
            .collect();
        let mut parts = parts.into_iter().map(|nodes| Tree { nodes });
        let main = if removed[0] { None } else { parts.next() };
        Split { main, map, orphans: parts.collect() }
    }

    /// The same undirected tree rooted at node `at`, renumbered breadth-first.
    /// Returns the tree and the old -> new index map.
    pub fn reroot(&self, at: usize) -> (Tree, Vec<usize>) {
        let n = self.nodes.len();
        let mut adj = vec![Vec::new(); n];
        for (i, node) in self.nodes.iter().enumerate() {
            if let Some(p) = node.parent {
                adj[p].push(i);
                adj[i].push(p);
            }
        }
        let mut map = vec![usize::MAX; n];
        let mut nodes = Vec::with_capacity(n);
        let mut queue = std::collections::VecDeque::from([(at, None)]);
        map[at] = 0;
        nodes.push(Node { point: self.nodes[at].point, parent: None });
        while let Some((cur, _)) = queue.pop_front() {
            for &next in &adj[cur] {
                if map[next] == usize::MAX {
                    map[next] = nodes.len();
                    nodes.push(Node { point: self.nodes[next].point, parent: Some(map[cur]) });
                    queue.push_back((next, Some(cur)));
                }
            }
        }
        (Tree { nodes }, map)
    }

    /// A tree with a new root at `point` whose only child is the old root.
    /// Old index `i` becomes `i + 1`.
    pub fn hang_below(&self, point: Point2) -> Tree {
        let mut nodes = Vec::with_capacity(self.nodes.len() + 1);
        nodes.push(Node { point, parent: None });
        nodes.extend(
            self.nodes.iter().map(|n| Node { point: n.point, parent: Some(n.parent.map_or(0, |p| p + 1)) }),
        );
        Tree { nodes }
    }

    /// Attaches `other` by identifying its root with node `at`. The tree grows
    /// by `other.len() - 1` nodes.
    pub fn graft(&mut self, at: usize, other: &Tree) {
        assert!(at < self.nodes.len());
        let offset = self.nodes.len() - 1;
        for n in &other.nodes[1..] {
            let parent = match n.parent {
                Some(0) => at,
                Some(p) => offset + p,
                None => unreachable!("only the root has no parent"),
            };
            self.nodes.push(Node { point: n.point, parent: Some(parent) });
        }
    }
}

/// With probability `goal_bias` returns `bias_target` (when given), otherwise
/// a uniform point in `bounds`.
pub fn sample<R: Rng + ?Sized>(bounds: &Rect, bias_target: Option<Point2>, goal_bias: f64, rng: &mut R) -> Point2 {
    if let Some(t) = bias_target {
        if rng.random::<f64>() < goal_bias {
            return t;
        }
    }
    uniform_in(bounds, rng)
}

pub fn uniform_in<R: Rng + ?Sized>(bounds: &Rect, rng: &mut R) -> Point2 {
    let (lo, hi) = (bounds.min(), bounds.max());
    Point2::new(rng.random_range(lo.x..=hi.x), rng.random_range(lo.y..=hi.y))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Extension {
    /// The tree now holds the target point at this index.
    Reached(usize),
    /// A node was appended. `partial` marks the midpoint rule: the full step
    /// collided and the node sits halfway to the first contact.
    Added { node: usize, partial: bool },
    Blocked,
}

/// One EXTEND step of at most `step_size` from the nearest node toward `target`.
///
/// When the step collides, the midpoint between the nearest node and the
/// first contact point is inserted instead, unless that edge would be shorter
/// than [`RrtParams::min_edge`].
pub fn extend(
    tree: &mut Tree,
    target: Point2,
    params: &RrtParams,
    obstacles: &[Rect],
    counters: &mut Counters,
) -> Extension {
    let near = tree.nearest(target, &mut counters.nn);
    let q_near = tree.point(near);
    if q_near == target {
        return Extension::Reached(near);
    }
    let q_new = q_near.step_toward(target, params.step_size);
    let edge = Segment::new(q_near, q_new);
    match first_contact(&edge, obstacles, &mut counters.cc) {
        None => {
            let node = tree.push(q_new, near);
            if q_new == target {
                Extension::Reached(node)
            } else {
                Extension::Added { node, partial: false }
            }
        }
        Some(t) => {
            // [0, t) is free since t is the earliest contact
            let half = t / 2.0;
            if edge.length() * half < params.min_edge() {
                Extension::Blocked
            } else {
                let node = tree.push(edge.at(half), near);
                Extension::Added { node, partial: true }
            }
        }
    }
}

/// Repeats [`extend`] toward `target` until it is reached or a collision stops
/// progress.
pub fn connect(
    tree: &mut Tree,
    target: Point2,
    params: &RrtParams,
    obstacles: &[Rect],
    counters: &mut Counters,
) -> Extension {
    loop {
        match extend(tree, target, params, obstacles, counters) {
            Extension::Added { partial: false, .. } => continue,
            other => return other,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Growth {
    pub path: Option<Vec<Point2>>,
    pub iterations: usize,
}

/// Grows both trees toward shared random samples for up to `budget`
/// iterations. Samples are biased toward the goal tree's root.
///
/// Each iteration connects both trees toward the same sample; when both reach
/// it the trees are joined there and the root-to-root path is returned (from
/// `t_init`'s root to `t_goal`'s root). Trees are kept between calls.
#[allow(clippy::too_many_arguments)]
pub fn grow_bidirectional<R: Rng + ?Sized>(
    t_init: &mut Tree,
    t_goal: &mut Tree,
    bounds: &Rect,
    params: &RrtParams,
    obstacles: &[Rect],
    budget: usize,
    rng: &mut R,
    counters: &mut Counters,
) -> Growth {
    for i in 0..budget {
        let q = sample(bounds, Some(t_goal.root()), params.goal_bias, rng);
        let a = connect(t_init, q, params, obstacles, counters);
        let b = connect(t_goal, q, params, obstacles, counters);
        if let (Extension::Reached(ia), Extension::Reached(ib)) = (a, b) {
            let mut path = t_init.root_path(ia).expect("valid index");
            let back = t_goal.root_path(ib).expect("valid index");
            path.extend(back.into_iter().rev().skip(1));
            return Growth { path: Some(path), iterations: i + 1 };
        }
    }
    Growth { path: None, iterations: budget }
}
