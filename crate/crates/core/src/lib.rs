//! Path planning for a point robot among static, moving and initially
//! unknown rectangular obstacles.

pub mod baselines;
pub mod bench;
pub mod geometry;
pub mod maps;
pub mod multistage;
pub mod planner;
pub mod rrt;
pub mod trace;
pub mod world;

pub use bench::{run_suite, run_trial, Execution, SuiteConfig, TrialOptions, TrialResult};
pub use geometry::{CollisionCounter, Point2, Rect, Segment};
pub use planner::{Planner, PlannerKind, PlannerSettings};
pub use world::{load_map, MapDocument, World};
