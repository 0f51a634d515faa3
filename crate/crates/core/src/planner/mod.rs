//! Online planner: per-mode targets from the uniqueness graph, RRT*
//! candidate policies, information-gain scoring and the receding-horizon
//! executive.

mod executive;
mod gain;
mod rrt;
mod targets;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::models::{Control, ControlLimits};
use crate::world::{wrap_angle, Pose};

pub use executive::{m3p_run, ExecutiveParams, Robot, RobotCollision, RunOutcome};
pub use gain::{choose_policy, expected_information_gain, rollout_start, GainParams};
pub use rrt::{path_length, plan_candidate, rrt_star, snap_goal, unicycle_reference, RrtParams};
pub use targets::{neighborhoods, select_targets};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PlannerError {
    #[error("mode {mode} (id {mode_id}) has an empty graph neighborhood")]
    EmptyNeighborhood { mode: usize, mode_id: u64 },
    #[error("no path found within {iterations} iterations")]
    Timeout { iterations: usize },
}

/// One reference step: hold `control` for `dt` starting from `pose`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Waypoint {
    pub pose: Pose,
    pub control: Control,
    pub dt: f64,
}

/// Gains of the tracking law on along-track, cross-track and heading error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrackingGains {
    pub k_along: f64,
    pub k_cross: f64,
    pub k_heading: f64,
}

impl Default for TrackingGains {
    fn default() -> Self {
        Self {
            k_along: 1.0,
            k_cross: 2.0,
            k_heading: 2.0,
        }
    }
}

/// A local feedback controller tracking a reference trajectory planned for
/// one mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Policy {
    pub mode_id: u64,
    pub mode_index: usize,
    pub target_node: usize,
    pub waypoints: Vec<Waypoint>,
    pub gains: TrackingGains,
}

impl Policy {
    pub fn len(&self) -> usize {
        self.waypoints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.waypoints.is_empty()
    }

    pub fn duration(&self) -> f64 {
        self.waypoints.iter().map(|w| w.dt).sum()
    }
}

/// Nominal control of step `k` plus a proportional correction toward the
/// reference, saturated to `limits`.
///
/// Errors are taken in the estimate's body frame: `e_along` ahead,
/// `e_cross` to the left, `e_heading` counter-clockwise.
pub fn feedback_control(p: &Policy, x_est: &Pose, k: usize, limits: &ControlLimits) -> Control {
    let w = &p.waypoints[k];
    let r = &w.pose;
    let (dx, dy) = (r.x - x_est.x, r.y - x_est.y);
    let (s, c) = x_est.theta.sin_cos();
    let e_along = c * dx + s * dy;
    let e_cross = -s * dx + c * dy;
    let e_heading = wrap_angle(r.theta - x_est.theta);
    let g = &p.gains;
    let u = Control::new(
        w.control.v * e_heading.cos() + g.k_along * e_along,
        w.control.omega + g.k_cross * w.control.v * e_cross + g.k_heading * e_heading.sin(),
    );
    limits.saturate(u)
}
