//! Active multi-hypothesis localization: world and sensor models, Gaussian
//! mixture belief, uniqueness graph, policy planner and simulator.
// negated comparisons are used on purpose so that NaN fails validation
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod belief;
pub mod models;
pub mod planner;
pub mod sim;
pub mod trace;
pub mod uniqueness_graph;
pub mod world;

pub use belief::{Belief, FilterConfig, GaussianMode, MhtFilter};
pub use models::{Control, ControlLimits, MotionNoise, ObsNoiseParams, Observation};
pub use planner::{PlannerError, Policy};
pub use trace::{TraceLog, TraceRecord};
pub use uniqueness_graph::{UGraphNode, UniquenessGraph};
pub use world::{Environment, Landmark, Pose};
