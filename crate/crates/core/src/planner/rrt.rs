//! RRT* in the plane, converted to a turn-then-drive unicycle reference.

use nalgebra::Point2;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::models::{propagate, Control, ControlLimits};
use crate::world::{wrap_angle, Environment, Pose};

use super::{PlannerError, Policy, TrackingGains, Waypoint};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RrtParams {
    pub iterations: usize,
    /// Longest tree edge, meters.
    pub step: f64,
    pub goal_tolerance: f64,
    pub goal_bias: f64,
    /// Rewiring radius is `min(gamma * sqrt(ln n / n), step)`.
    pub gamma: f64,
    /// Disc radius used for edge collision checks.
    pub clearance: f64,
}

impl Default for RrtParams {
    fn default() -> Self {
        Self {
            iterations: 2000,
            step: 0.8,
            goal_tolerance: 0.1,
            goal_bias: 0.05,
            gamma: 6.0,
            clearance: 0.24,
        }
    }
}

struct Tree {
    pts: Vec<Point2<f64>>,
    parent: Vec<usize>,
    cost: Vec<f64>,
}

impl Tree {
    fn nearest(&self, p: &Point2<f64>) -> usize {
        let mut best = (f64::INFINITY, 0);
        for (i, q) in self.pts.iter().enumerate() {
            let d = (q - p).norm_squared();
            if d < best.0 {
                best = (d, i);
            }
        }
        best.1
    }

    fn near(&self, p: &Point2<f64>, r: f64) -> Vec<usize> {
        let r2 = r * r;
        (0..self.pts.len())
            .filter(|&i| (self.pts[i] - p).norm_squared() <= r2)
            .collect()
    }
}

/// Shortest collision-free position path found by RRT* from `start` to
/// within `goal_tolerance` of `goal`, endpoints included. The last point is
/// the goal itself when it can be connected directly.
pub fn rrt_star<R: Rng + ?Sized>(
    env: &Environment,
    start: &Point2<f64>,
    goal: &Point2<f64>,
    params: &RrtParams,
    rng: &mut R,
) -> Result<Vec<Point2<f64>>, PlannerError> {
    let free = |a: &Point2<f64>, b: &Point2<f64>| env.is_free_swept(a, b, params.clearance);
    if (goal - start).norm() <= params.goal_tolerance {
        return Ok(vec![*start]);
    }
    if free(start, goal) {
        return Ok(vec![*start, *goal]);
    }
    let bounds = env.bounds();
    let mut tree = Tree {
        pts: vec![*start],
        parent: vec![0],
        cost: vec![0.0],
    };
    let mut best_goal: Option<(f64, usize)> = None;
    for _ in 0..params.iterations {
        let sample = if rng.random::<f64>() < params.goal_bias {
            *goal
        } else {
            Point2::new(
                rng.random_range(bounds.min_x..=bounds.max_x),
                rng.random_range(bounds.min_y..=bounds.max_y),
            )
        };
        let near_i = tree.nearest(&sample);
        let from = tree.pts[near_i];
        let d = (sample - from).norm();
        if d < 1e-9 {
            continue;
        }
        let new = if d > params.step {
            from + (sample - from) * (params.step / d)
        } else {
            sample
        };
        if !free(&from, &new) {
            continue;
        }
        let n = tree.pts.len() as f64 + 1.0;
        let radius = (params.gamma * (n.ln() / n).sqrt())
            .min(params.step)
            .max(1e-3);
        let near = tree.near(&new, radius);
        let mut parent = near_i;
        let mut cost = tree.cost[near_i] + (new - from).norm();
        for &j in &near {
            let c = tree.cost[j] + (new - tree.pts[j]).norm();
            if c < cost && free(&tree.pts[j], &new) {
                parent = j;
                cost = c;
            }
        }
        let k = tree.pts.len();
        tree.pts.push(new);
        tree.parent.push(parent);
        tree.cost.push(cost);
        for &j in &near {
            if j == parent {
                continue;
            }
            let c = cost + (tree.pts[j] - new).norm();
            if c < tree.cost[j] && free(&new, &tree.pts[j]) {
                let delta = tree.cost[j] - c;
                tree.parent[j] = k;
                propagate_cost(&mut tree, j, delta);
            }
        }
        if (new - goal).norm() <= params.goal_tolerance && best_goal.is_none_or(|(c, _)| cost < c) {
            best_goal = Some((cost, k));
        }
        // a goal node's cost may have dropped through rewiring
        if let Some((_, g)) = best_goal {
            best_goal = Some((tree.cost[g], g));
        }
    }
    // pick the cheapest node inside the goal disc after all rewiring
    let mut best = best_goal.map(|(_, g)| g);
    for i in 0..tree.pts.len() {
        if (tree.pts[i] - goal).norm() <= params.goal_tolerance
            && best.is_none_or(|b| tree.cost[i] < tree.cost[b])
        {
            best = Some(i);
        }
    }
    let Some(mut i) = best else {
        return Err(PlannerError::Timeout {
            iterations: params.iterations,
        });
    };
    let mut path = vec![tree.pts[i]];
    while i != 0 {
        i = tree.parent[i];
        path.push(tree.pts[i]);
    }
    path.reverse();
    if path.last() != Some(goal) && free(path.last().unwrap(), goal) {
        path.push(*goal);
    }
    Ok(shortcut(path, &free))
}

fn propagate_cost(tree: &mut Tree, root: usize, delta: f64) {
    // children are found by scanning; trees here are small
    let mut stack = vec![root];
    tree.cost[root] -= delta;
    while let Some(p) = stack.pop() {
        for c in 0..tree.pts.len() {
            if c != p && tree.parent[c] == p && c != 0 {
                tree.cost[c] -= delta;
                stack.push(c);
            }
        }
    }
}

/// Greedy line-of-sight shortcutting; never lengthens the path.
fn shortcut(
    path: Vec<Point2<f64>>,
    free: &impl Fn(&Point2<f64>, &Point2<f64>) -> bool,
) -> Vec<Point2<f64>> {
    if path.len() <= 2 {
        return path;
    }
    let mut out = vec![path[0]];
    let mut i = 0;
    while i < path.len() - 1 {
        let mut j = path.len() - 1;
        while j > i + 1 && !free(&path[i], &path[j]) {
            j -= 1;
        }
        out.push(path[j]);
        i = j;
    }
    out
}

pub fn path_length(path: &[Point2<f64>]) -> f64 {
    path.windows(2).map(|w| (w[1] - w[0]).norm()).sum()
}

/// Turn-in-place then straight-drive reference through `path`, sampled at
/// `dt`. Turns use the full turn rate and drives the full speed, with a
/// shortened final step so every vertex is hit exactly.
pub fn unicycle_reference(
    start: &Pose,
    path: &[Point2<f64>],
    limits: &ControlLimits,
    dt: f64,
) -> Vec<Waypoint> {
    let mut wps = Vec::new();
    let mut x = *start;
    let mut push = |x: &mut Pose, u: Control| {
        wps.push(Waypoint {
            pose: *x,
            control: u,
            dt,
        });
        *x = propagate(x, &u, &nalgebra::Vector2::zeros(), dt);
    };
    for w in path.windows(2) {
        let d = w[1] - w[0];
        let len = d.norm();
        if len < 1e-9 {
            continue;
        }
        let mut turn = wrap_angle(d.y.atan2(d.x) - x.theta);
        while turn.abs() > 1e-12 {
            let dth = turn.clamp(-limits.omega_max * dt, limits.omega_max * dt);
            push(&mut x, Control::new(0.0, dth / dt));
            turn -= dth;
        }
        let mut left = len;
        while left > 1e-12 {
            let ds = left.min(limits.v_max * dt);
            push(&mut x, Control::new(ds / dt, 0.0));
            left -= ds;
        }
    }
    wps
}

/// Plans from `start` to the position of `goal`. The policy is truncated to
/// `max_steps` reference steps.
#[allow(clippy::too_many_arguments)]
/// Nearest point to `goal` that keeps `clearance` from every wall, searched
/// on rings 2 cm apart out to half a meter. Graph nodes only guarantee the
/// robot radius, so targets close to walls are moved off them.
pub fn snap_goal(env: &Environment, goal: &Point2<f64>, clearance: f64) -> Option<Point2<f64>> {
    const RING_STEP: f64 = 0.02;
    const MAX_SHIFT: f64 = 0.5;
    const DIRECTIONS: usize = 32;
    if env.is_free_point(goal, clearance) {
        return Some(*goal);
    }
    let rings = (MAX_SHIFT / RING_STEP).round() as usize;
    (1..=rings).find_map(|k| {
        let r = k as f64 * RING_STEP;
        (0..DIRECTIONS)
            .map(|j| {
                let a = j as f64 * std::f64::consts::TAU / DIRECTIONS as f64;
                goal + nalgebra::Vector2::new(a.cos(), a.sin()) * r
            })
            .find(|p| env.is_free_point(p, clearance))
    })
}

#[allow(clippy::too_many_arguments)]
pub fn plan_candidate<R: Rng + ?Sized>(
    env: &Environment,
    start: &Pose,
    goal: &Pose,
    target_node: usize,
    params: &RrtParams,
    limits: &ControlLimits,
    gains: &TrackingGains,
    dt: f64,
    max_steps: usize,
    rng: &mut R,
) -> Result<Policy, PlannerError> {
    let goal = snap_goal(env, &goal.position(), params.clearance).ok_or(PlannerError::Timeout {
        iterations: params.iterations,
    })?;
    let path = rrt_star(env, &start.position(), &goal, params, rng)?;
    let mut waypoints = unicycle_reference(start, &path, limits, dt);
    waypoints.truncate(max_steps);
    Ok(Policy {
        mode_id: 0,
        mode_index: 0,
        target_node,
        waypoints,
        gains: *gains,
    })
}
