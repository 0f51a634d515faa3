//! Closed-loop simulation: a seeded ground-truth robot, stationary initial
//! filtering, then the receding-horizon planner.

mod config;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::belief::{init_belief, Belief, MhtFilter};
use crate::models::{observe, propagate, Control, MotionNoise, ObsNoiseParams, Observation};
use crate::planner::{m3p_run, Robot, RobotCollision};
use crate::trace::{header, snapshot, Phase, TraceLog, TraceRecord};
use crate::world::{Environment, Pose, DEFAULT_SAMPLE_ATTEMPTS};

pub use config::{
    default_sensor, FilterSection, GraphSection, InitialBeliefSection, MotionNoiseSection,
    OutputSection, Phase1Section, PlannerSection, Scenario, ScenarioConfig, ScenarioError,
    StartSection, TruthSection,
};
use config::{stream_rng, streams};

/// Propagates the true pose with sampled actuation noise; a pose whose disc
/// touches an obstacle is a collision.
pub fn step_truth<R: Rng + ?Sized>(
    env: &Environment,
    x: &Pose,
    u: &Control,
    q: &MotionNoise,
    dt: f64,
    rng: &mut R,
) -> Result<Pose, RobotCollision> {
    assert!(dt > 0.0, "dt must be positive");
    let next = propagate(x, u, &q.sample(rng), dt);
    if env.is_free(&next) {
        Ok(next)
    } else {
        Err(RobotCollision { pose: next })
    }
}

/// Simulated robot with its own noise stream.
pub struct SimRobot<'a> {
    pub env: &'a Environment,
    pub truth: Pose,
    pub motion: MotionNoise,
    pub sensor: ObsNoiseParams,
    pub rng: ChaCha8Rng,
}

impl SimRobot<'_> {
    pub fn sense(&mut self) -> Vec<Observation> {
        observe(self.env, &self.truth, &self.sensor, Some(&mut self.rng))
    }
}

impl Robot for SimRobot<'_> {
    fn apply(&mut self, u: &Control, dt: f64) -> Result<Vec<Observation>, RobotCollision> {
        self.truth = step_truth(self.env, &self.truth, u, &self.motion, dt, &mut self.rng)?;
        Ok(self.sense())
    }

    fn truth(&self) -> Pose {
        self.truth
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub converged: bool,
    pub collided: bool,
    pub epochs: usize,
    pub steps: usize,
    pub initial_modes: usize,
    pub phase1_modes: usize,
    pub final_modes: usize,
    pub final_max_weight: f64,
    pub final_truth: Pose,
    pub final_estimate: Pose,
}

#[derive(Debug, Clone)]
pub struct ScenarioResult {
    pub trace: TraceLog,
    pub summary: RunSummary,
    pub belief: Belief,
}

/// Runs both phases with the scenario's own initial belief.
pub fn run_scenario(s: &Scenario) -> Result<ScenarioResult, ScenarioError> {
    let cfg = &s.config;
    let b0 = init_belief(
        &s.env,
        cfg.initial_belief.samples,
        cfg.initial_cov(),
        &mut stream_rng(cfg.seed, streams::BELIEF),
        DEFAULT_SAMPLE_ATTEMPTS,
    )?;
    Ok(run_scenario_from(s, b0))
}

/// Runs both phases from a given initial belief.
pub fn run_scenario_from(s: &Scenario, b0: Belief) -> ScenarioResult {
    let cfg = &s.config;
    let filter = MhtFilter::new(cfg.filter_config());
    let mut robot = SimRobot {
        env: &s.env,
        truth: s.start,
        motion: cfg.motion_noise().scaled(cfg.truth.motion_scale),
        sensor: cfg.sensor.scaled_noise(cfg.truth.sensor_scale),
        rng: stream_rng(cfg.seed, streams::TRUTH),
    };
    let mut trace = TraceLog::default();
    trace.push(header(cfg.seed, cfg.dt, &s.env));
    let initial_modes = b0.len();
    let mut step = 0usize;

    // phase 1: the robot stays put while the belief settles
    let mut b = b0;
    let mut stable = 0;
    for _ in 0..cfg.phase1.max_steps {
        let z = robot.sense();
        let n = b.len();
        b = filter.stationary_step(&s.env, &b, &z, cfg.dt).belief;
        step += 1;
        trace.push(TraceRecord::Step {
            t: step as f64 * cfg.dt,
            phase: Phase::Initial,
            truth: robot.truth,
            control: Control::ZERO,
            observations: z,
            belief: snapshot(&b),
        });
        stable = if b.len() == n { stable + 1 } else { 0 };
        if stable >= cfg.phase1.dwell {
            break;
        }
    }
    let phase1_modes = b.len();

    let outcome = m3p_run(
        &b,
        &s.env,
        &s.graph,
        &filter,
        &mut robot,
        &cfg.executive_params(s.env.robot_radius()),
        &mut trace,
        &mut step,
    );
    let best = outcome.belief.argmax().expect("belief is never empty");
    let summary = RunSummary {
        converged: outcome.converged,
        collided: outcome.collided,
        epochs: outcome.epochs,
        steps: step,
        initial_modes,
        phase1_modes,
        final_modes: outcome.belief.len(),
        final_max_weight: outcome.belief.max_weight(),
        final_truth: robot.truth,
        final_estimate: outcome.belief.modes[best].mean,
    };
    trace.push(TraceRecord::Summary {
        converged: summary.converged,
        epochs: summary.epochs,
        steps: summary.steps,
        initial_modes,
        final_modes: summary.final_modes,
        final_max_weight: summary.final_max_weight,
    });
    ScenarioResult {
        trace,
        summary,
        belief: outcome.belief,
    }
}
