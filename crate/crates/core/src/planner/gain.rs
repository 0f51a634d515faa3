use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::belief::{Belief, MhtFilter};
use crate::models::{observe, propagate, ControlLimits};
use crate::trace::GainReport;
use crate::world::Environment;

use super::{feedback_control, Policy};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GainParams {
    pub c_fail: f64,
    pub dt: f64,
    pub limits: ControlLimits,
}

/// Most-likely rollout of `policy` assuming the robot starts at the mean of
/// mode `start`. Returns the gain and the 1-based step of the first predicted
/// collision of any mode mean.
pub fn rollout_start(
    b: &Belief,
    policy: &Policy,
    start: usize,
    env: &Environment,
    filter: &MhtFilter,
    params: &GainParams,
) -> (f64, Option<usize>) {
    let mut truth = b.modes[start].mean;
    let mut cur = b.clone();
    let before = b.len();
    let mut collision = None;
    for k in 0..policy.len() {
        if filter.is_localized(&cur) {
            break;
        }
        let est = cur
            .position_of(policy.mode_id)
            .or_else(|| cur.argmax())
            .expect("belief is never empty");
        let u = feedback_control(policy, &cur.modes[est].mean, k, &params.limits);
        truth = propagate(&truth, &u, &nalgebra::Vector2::zeros(), params.dt);
        let z = observe::<rand_chacha::ChaCha8Rng>(env, &truth, &filter.config.sensor, None);
        cur = filter.step(env, &cur, &u, &z, params.dt).belief;
        if cur.modes.iter().any(|m| !env.is_free(&m.mean)) {
            collision = Some(k + 1);
            break;
        }
    }
    let mut gain = before as f64 - cur.len() as f64;
    if let Some(t) = collision {
        gain -= params.c_fail / t as f64;
    }
    (gain, collision)
}

/// Weighted most-likely gain of `policy` over every start hypothesis.
pub fn expected_information_gain(
    b: &Belief,
    policy: &Policy,
    policy_index: usize,
    env: &Environment,
    filter: &MhtFilter,
    params: &GainParams,
) -> GainReport {
    let runs: Vec<(f64, Option<usize>)> = (0..b.len())
        .into_par_iter()
        .map(|j| rollout_start(b, policy, j, env, filter, params))
        .collect();
    let delta_i = runs
        .iter()
        .zip(&b.modes)
        .map(|((g, _), m)| m.weight * g)
        .sum();
    GainReport {
        policy_index,
        mode_id: policy.mode_id,
        mode_weight: b
            .position_of(policy.mode_id)
            .map_or(0.0, |i| b.modes[i].weight),
        delta_i,
        per_start: runs.iter().map(|r| r.0).collect(),
        collision_step: runs.iter().map(|r| r.1).collect(),
    }
}

/// Gain-maximizing report; ties go to the heavier originating mode, then the
/// lowest index.
pub fn choose_policy(reports: &[GainReport]) -> usize {
    assert!(!reports.is_empty(), "no candidate policies");
    let mut best = 0;
    for (i, r) in reports.iter().enumerate().skip(1) {
        let b = &reports[best];
        if r.delta_i > b.delta_i || (r.delta_i == b.delta_i && r.mode_weight > b.mode_weight) {
            best = i;
        }
    }
    best
}
