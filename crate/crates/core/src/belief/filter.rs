use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    ekf_predict, ekf_update_iterated, is_unimodal, merge_similar, predict_for_mode, prune,
    update_weights, Belief, GaussianMode, MatchedObservation, WeightDiagnostics,
};
use crate::models::{associate, Control, MotionNoise, ObsNoiseParams, Observation};
use crate::world::Environment;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterConfig {
    pub sensor: ObsNoiseParams,
    pub motion: MotionNoise,
    /// Chi-square gate on the squared innovation distance.
    pub gate: f64,
    pub gamma_scale: f64,
    pub delta_w: f64,
    pub w_loc: f64,
    /// Modes closer than this are moment-matched together. `None` disables.
    pub merge_distance: Option<f64>,
    pub ekf_iterations: usize,
}

#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub belief: Belief,
    /// Per-mode diagnostics, aligned with the belief before pruning.
    pub diagnostics: Vec<WeightDiagnostics>,
    pub pruned: usize,
    pub merged: usize,
}

/// Multi-hypothesis EKF: one filter step is time update, per-mode
/// association and measurement update, weight update, prune, merge.
#[derive(Debug, Clone)]
pub struct MhtFilter {
    pub config: FilterConfig,
}

impl MhtFilter {
    pub fn new(config: FilterConfig) -> Self {
        Self { config }
    }

    pub fn predict(&self, b: &Belief, u: &Control, dt: f64) -> Belief {
        Belief::new(
            b.modes
                .iter()
                .map(|m| ekf_predict(m, u, &self.config.motion, dt))
                .collect(),
        )
    }

    /// Per-mode measurement update. A mode whose update is singular keeps its
    /// predicted estimate.
    pub fn correct(&self, env: &Environment, b: &Belief, z: &[Observation]) -> Belief {
        let c = &self.config;
        let modes: Vec<GaussianMode> = b
            .modes
            .par_iter()
            .map(|m| {
                let preds = predict_for_mode(env, m, &c.sensor);
                let a = associate(z, &preds, c.gate);
                let matched: Vec<MatchedObservation> = a
                    .matches
                    .iter()
                    .map(|&(i, j)| MatchedObservation {
                        z: z[i],
                        landmark_index: preds[j].landmark_index,
                    })
                    .collect();
                ekf_update_iterated(m, &matched, env, &c.sensor, c.ekf_iterations)
                    .unwrap_or_else(|_| m.clone())
            })
            .collect();
        Belief::new(modes)
    }

    pub fn step(
        &self,
        env: &Environment,
        b: &Belief,
        u: &Control,
        z: &[Observation],
        dt: f64,
    ) -> StepOutcome {
        let predicted = self.predict(b, u, dt);
        self.measurement_step(env, &predicted, z, dt)
    }

    /// Step for a robot known to be at rest: no time update, so the
    /// covariance is not inflated by process noise.
    pub fn stationary_step(
        &self,
        env: &Environment,
        b: &Belief,
        z: &[Observation],
        dt: f64,
    ) -> StepOutcome {
        self.measurement_step(env, b, z, dt)
    }

    fn measurement_step(
        &self,
        env: &Environment,
        predicted: &Belief,
        z: &[Observation],
        dt: f64,
    ) -> StepOutcome {
        let c = &self.config;
        let corrected = self.correct(env, predicted, z);
        let (weighted, diagnostics) =
            update_weights(&corrected, z, env, &c.sensor, dt, c.gamma_scale, c.gate);
        let pruned_b = prune(&weighted, c.delta_w);
        let pruned = weighted.len() - pruned_b.len();
        let (belief, merged) = match c.merge_distance {
            Some(d) if pruned_b.len() > 1 => merge_similar(&pruned_b, d),
            _ => (pruned_b, 0),
        };
        StepOutcome {
            belief,
            diagnostics,
            pruned,
            merged,
        }
    }

    pub fn is_localized(&self, b: &Belief) -> bool {
        is_unimodal(b, self.config.w_loc)
    }
}
