use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::belief::{Belief, MhtFilter};
use crate::models::{propagate, Control, ControlLimits, Observation};
use crate::trace::{snapshot, GainReport, Phase, ReplanReason, TraceLog, TraceRecord};
use crate::uniqueness_graph::UniquenessGraph;
use crate::world::{Environment, Pose};

use super::{
    choose_policy, expected_information_gain, feedback_control, plan_candidate, select_targets,
    GainParams, PlannerError, Policy, RrtParams, TrackingGains,
};

/// The robot being localized, real or simulated.
pub trait Robot {
    /// Applies `u` for `dt` and returns the reading taken at the new pose.
    fn apply(&mut self, u: &Control, dt: f64) -> Result<Vec<Observation>, RobotCollision>;
    /// Ground truth, when known; logged only.
    fn truth(&self) -> Pose;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RobotCollision {
    pub pose: Pose,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExecutiveParams {
    pub neighborhood_radius: f64,
    /// Times an empty neighborhood is retried with the radius grown by half.
    pub neighborhood_retries: usize,
    pub rrt: RrtParams,
    pub limits: ControlLimits,
    pub gains: TrackingGains,
    pub c_fail: f64,
    pub horizon_s: f64,
    pub epoch_cap: usize,
    pub dt: f64,
    /// Minimum clearance any mode mean may be predicted to reach on the next
    /// step before execution stops.
    pub safety_margin: f64,
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub belief: Belief,
    pub converged: bool,
    pub epochs: usize,
    pub steps: usize,
    pub collided: bool,
}

struct Clock<'a> {
    step: &'a mut usize,
    dt: f64,
}

impl Clock<'_> {
    fn tick(&mut self) -> f64 {
        *self.step += 1;
        self.now()
    }

    fn now(&self) -> f64 {
        *self.step as f64 * self.dt
    }
}

fn targets_with_retries(
    b: &Belief,
    g: &UniquenessGraph,
    p: &ExecutiveParams,
) -> Option<Vec<usize>> {
    let mut r = p.neighborhood_radius;
    for _ in 0..=p.neighborhood_retries {
        match select_targets(b, g, r) {
            Ok(t) => return Some(t),
            Err(PlannerError::EmptyNeighborhood { .. }) => r *= 1.5,
            Err(_) => return None,
        }
    }
    None
}

fn violates(env: &Environment, b: &Belief, u: &Control, p: &ExecutiveParams) -> bool {
    b.modes.iter().any(|m| {
        let next = propagate(&m.mean, u, &nalgebra::Vector2::zeros(), p.dt);
        !env.is_free_point(&next.position(), p.safety_margin)
    })
}

/// Receding-horizon disambiguation loop. Each epoch picks targets, plans one
/// candidate per mode, scores them and executes the best until the mode count
/// changes, a constraint violation is anticipated or the horizon is reached.
///
/// `step` is the global step counter used for trace timestamps.
#[allow(clippy::too_many_arguments)]
pub fn m3p_run(
    b0: &Belief,
    env: &Environment,
    g: &UniquenessGraph,
    filter: &MhtFilter,
    robot: &mut dyn Robot,
    params: &ExecutiveParams,
    trace: &mut TraceLog,
    step: &mut usize,
) -> RunOutcome {
    let mut clock = Clock {
        step,
        dt: params.dt,
    };
    let start_step = *clock.step;
    let mut b = b0.clone();
    let mut epoch = 0;
    let gain_params = GainParams {
        c_fail: params.c_fail,
        dt: params.dt,
        limits: params.limits,
    };
    let max_steps = (params.horizon_s / params.dt).round() as usize;

    macro_rules! outcome {
        ($converged:expr, $collided:expr) => {
            RunOutcome {
                converged: $converged,
                epochs: epoch,
                steps: *clock.step - start_step,
                collided: $collided,
                belief: b,
            }
        };
    }

    loop {
        if filter.is_localized(&b) {
            return outcome!(true, false);
        }
        if epoch >= params.epoch_cap {
            return outcome!(false, false);
        }
        epoch += 1;

        let targets = targets_with_retries(&b, g, params);
        let policies: Vec<Option<Policy>> = match &targets {
            Some(t) => b
                .modes
                .par_iter()
                .enumerate()
                .map(|(i, m)| {
                    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
                    rng.set_stream(((epoch as u64) << 24) | i as u64);
                    let goal = g.nodes()[t[i]].pose;
                    plan_candidate(
                        env,
                        &m.mean,
                        &goal,
                        t[i],
                        &params.rrt,
                        &params.limits,
                        &params.gains,
                        params.dt,
                        max_steps,
                        &mut rng,
                    )
                    .ok()
                    .filter(|p| !p.is_empty())
                    .map(|mut p| {
                        p.mode_id = m.id;
                        p.mode_index = i;
                        p
                    })
                })
                .collect(),
            None => vec![None; b.len()],
        };
        let candidates: Vec<&Policy> = policies.iter().flatten().collect();
        let reports: Vec<GainReport> = candidates
            .par_iter()
            .enumerate()
            .map(|(k, p)| expected_information_gain(&b, p, k, env, filter, &gain_params))
            .collect();

        // best-ranked candidate whose first step is admissible
        let mut pool: Vec<GainReport> = reports.clone();
        let mut chosen: Option<usize> = None;
        while !pool.is_empty() {
            let k = pool[choose_policy(&pool)].policy_index;
            let p = candidates[k];
            let u0 = feedback_control(p, &b.modes[p.mode_index].mean, 0, &params.limits);
            if !violates(env, &b, &u0, params) {
                chosen = Some(k);
                break;
            }
            pool.retain(|r| r.policy_index != k);
        }

        let mut tgt: Vec<Option<usize>> = vec![None; b.len()];
        for p in &candidates {
            tgt[p.mode_index] = Some(p.target_node);
        }
        trace.push(TraceRecord::Plan {
            t: clock.now(),
            epoch,
            targets: tgt,
            gains: reports,
            chosen,
            path: chosen
                .map(|k| {
                    candidates[k]
                        .waypoints
                        .iter()
                        .map(|w| [w.pose.x, w.pose.y])
                        .collect()
                })
                .unwrap_or_default(),
        });

        let n0 = b.len();
        // with nothing admissible, take one stationary reading and replan
        let idle = Policy {
            mode_id: b.modes[0].id,
            mode_index: 0,
            target_node: 0,
            waypoints: vec![super::Waypoint {
                pose: b.modes[0].mean,
                control: Control::ZERO,
                dt: params.dt,
            }],
            gains: params.gains,
        };
        let policy = chosen.map_or(&idle, |k| candidates[k]);
        let mut reason = ReplanReason::Horizon;
        for k in 0..policy.len() {
            let u = if chosen.is_some() {
                let est = match b.position_of(policy.mode_id) {
                    Some(i) => i,
                    None => {
                        reason = ReplanReason::ModeCountChange;
                        break;
                    }
                };
                feedback_control(policy, &b.modes[est].mean, k, &params.limits)
            } else {
                Control::ZERO
            };
            if chosen.is_some() && violates(env, &b, &u, params) {
                reason = ReplanReason::ConstraintViolation;
                break;
            }
            let z = match robot.apply(&u, params.dt) {
                Ok(z) => z,
                Err(c) => {
                    trace.push(TraceRecord::Failure {
                        t: clock.tick(),
                        message: format!(
                            "ground truth collided at ({:.3}, {:.3})",
                            c.pose.x, c.pose.y
                        ),
                    });
                    return outcome!(false, true);
                }
            };
            let out = filter.step(env, &b, &u, &z, params.dt);
            b = out.belief;
            trace.push(TraceRecord::Step {
                t: clock.tick(),
                phase: Phase::Active,
                truth: robot.truth(),
                control: u,
                observations: z,
                belief: snapshot(&b),
            });
            if b.len() != n0 {
                reason = if out.pruned == 0 && out.merged > 0 {
                    ReplanReason::Merge
                } else {
                    ReplanReason::ModeCountChange
                };
                break;
            }
            if filter.is_localized(&b) {
                break;
            }
            if (k + 1) as f64 * params.dt >= params.horizon_s - 1e-9 {
                reason = ReplanReason::Horizon;
                break;
            }
        }
        if !filter.is_localized(&b) {
            trace.push(TraceRecord::Replan {
                t: clock.now(),
                epoch,
                reason,
            });
        }
    }
}
