//! Common interface the simulator drives, and the factory for the five
//! planner variants.

use std::fmt;
use std::str::FromStr;

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::baselines::{Advance, BaselineConfig, Drrt, MpRrt};
use crate::geometry::{Point2, Segment};
use crate::multistage::{MultiStageConfig, MultiStagePlanner};
use crate::rrt::{Counters, RrtError, RrtParams};
use crate::world::World;

/// Generator used for every planner stream: portable and seedable.
pub type PlannerRng = ChaCha8Rng;

pub trait Planner: Send {
    fn name(&self) -> &'static str;

    /// Plans for one tick and returns the path the robot should follow now,
    /// starting at the robot position, or `None` to stay put.
    fn step(&mut self, world: &World, budget: usize, rng: &mut PlannerRng, counters: &mut Counters) -> Option<Vec<Point2>>;

    /// Reports where the robot ended up after following the last command:
    /// `remaining` starts at the new robot position.
    fn robot_moved(&mut self, world: &World, remaining: &[Point2]);

    fn restarts(&self) -> u64 {
        0
    }

    /// Tree edges for visualisation.
    fn tree_edges(&self) -> Vec<Segment> {
        Vec::new()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum PlannerKind {
    MultiStage,
    DrrtNoAdv,
    DrrtAdv,
    MpRrtNoAdv,
    MpRrtAdv,
}

impl PlannerKind {
    pub const ALL: [PlannerKind; 5] =
        [PlannerKind::MultiStage, PlannerKind::DrrtNoAdv, PlannerKind::DrrtAdv, PlannerKind::MpRrtNoAdv, PlannerKind::MpRrtAdv];

    pub fn as_str(&self) -> &'static str {
        match self {
            PlannerKind::MultiStage => "multistage",
            PlannerKind::DrrtNoAdv => "drrt-noadv",
            PlannerKind::DrrtAdv => "drrt-adv",
            PlannerKind::MpRrtNoAdv => "mprrt-noadv",
            PlannerKind::MpRrtAdv => "mprrt-adv",
        }
    }

    pub fn is_baseline(&self) -> bool {
        !matches!(self, PlannerKind::MultiStage)
    }
}

impl fmt::Display for PlannerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnknownPlanner(pub String);

impl fmt::Display for UnknownPlanner {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<_> = PlannerKind::ALL.iter().map(PlannerKind::as_str).collect();
        write!(f, "unknown planner `{}` (expected one of: {})", self.0, names.join(", "))
    }
}

impl std::error::Error for UnknownPlanner {}

impl FromStr for PlannerKind {
    type Err = UnknownPlanner;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        PlannerKind::ALL.into_iter().find(|k| k.as_str() == s).ok_or_else(|| UnknownPlanner(s.to_string()))
    }
}

impl TryFrom<String> for PlannerKind {
    type Error = UnknownPlanner;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<PlannerKind> for String {
    fn from(k: PlannerKind) -> Self {
        k.as_str().to_string()
    }
}

/// Parameter blocks for every planner. Unset RRT parameters are derived from
/// the robot size of the world being planned in.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlannerSettings {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rrt: Option<RrtParams>,
    pub multistage: MultiStageConfig,
    pub baselines: BaselineConfig,
}

impl PlannerSettings {
    pub fn rrt_for(&self, world: &World) -> RrtParams {
        self.rrt.unwrap_or_else(|| RrtParams::for_robot(world.robot_size))
    }

    pub fn validate(&self) -> Result<(), RrtError> {
        if let Some(r) = &self.rrt {
            r.validate()?;
        }
        Ok(())
    }

    pub fn build(&self, kind: PlannerKind, world: &World) -> Box<dyn Planner> {
        let rrt = self.rrt_for(world);
        match kind {
            PlannerKind::MultiStage => Box::new(MultiStagePlanner::new(world, &self.multistage, rrt)),
            PlannerKind::DrrtNoAdv => Box::new(Drrt::new(world, &self.baselines, rrt, Advance::NoAdv)),
            PlannerKind::DrrtAdv => Box::new(Drrt::new(world, &self.baselines, rrt, Advance::Adv)),
            PlannerKind::MpRrtNoAdv => Box::new(MpRrt::new(world, &self.baselines, rrt, Advance::NoAdv)),
            PlannerKind::MpRrtAdv => Box::new(MpRrt::new(world, &self.baselines, rrt, Advance::Adv)),
        }
    }
}
