//! Scenario files. One TOML file describes a complete, reproducible run;
//! relative paths are resolved against the file's directory.

use std::path::{Path, PathBuf};

use nalgebra::{Matrix3, Vector3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::belief::FilterConfig;
use crate::models::{chi2_2dof_quantile, ControlLimits, MotionNoise, ObsNoiseParams};
use crate::planner::{ExecutiveParams, RrtParams, TrackingGains};
use crate::uniqueness_graph::UniquenessGraph;
use crate::world::{load_map, Environment, Pose, WorldError, DEFAULT_SAMPLE_ATTEMPTS};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("failed to read scenario {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("scenario parse error: {0}")]
    Parse(String),
    #[error("invalid scenario: {0}")]
    Invalid(String),
    #[error(transparent)]
    World(#[from] WorldError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub seed: u64,
    #[serde(default = "defaults::dt")]
    pub dt: f64,
    pub map: PathBuf,
    #[serde(default)]
    pub graph: GraphSection,
    pub start: StartSection,
    #[serde(default)]
    pub initial_belief: InitialBeliefSection,
    #[serde(default)]
    pub motion_noise: MotionNoiseSection,
    #[serde(default = "defaults::sensor")]
    pub sensor: ObsNoiseParams,
    #[serde(default)]
    pub truth: TruthSection,
    #[serde(default)]
    pub filter: FilterSection,
    #[serde(default)]
    pub planner: PlannerSection,
    #[serde(default)]
    pub phase1: Phase1Section,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GraphSection {
    /// Prebuilt graph file; built from `nodes` and `seed` when absent.
    pub path: Option<PathBuf>,
    pub nodes: usize,
    pub seed: u64,
    /// Restrict node visibility to the sensor's field of view.
    pub use_fov: bool,
}

impl Default for GraphSection {
    fn default() -> Self {
        Self {
            path: None,
            nodes: 1000,
            seed: 0,
            use_fov: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StartSection {
    /// `[x, y, theta]`.
    pub pose: Option<[f64; 3]>,
    #[serde(default)]
    pub random: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InitialBeliefSection {
    pub samples: usize,
    /// Standard deviations of the initial covariance, `[x, y, theta]`.
    pub sigma: [f64; 3],
}

impl Default for InitialBeliefSection {
    fn default() -> Self {
        Self {
            samples: 60,
            sigma: [0.8, 0.8, 1.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MotionNoiseSection {
    pub sigma_v: f64,
    pub sigma_omega: f64,
}

impl Default for MotionNoiseSection {
    fn default() -> Self {
        Self {
            sigma_v: 0.02,
            sigma_omega: 0.02,
        }
    }
}

/// Ground-truth noise as multiples of the filter's models.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TruthSection {
    pub motion_scale: f64,
    pub sensor_scale: f64,
}

impl Default for TruthSection {
    fn default() -> Self {
        Self {
            motion_scale: 1.0,
            sensor_scale: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FilterSection {
    pub delta_w: f64,
    pub w_loc: f64,
    pub gamma_scale: f64,
    pub gate_confidence: f64,
    pub merge_distance: Option<f64>,
    pub ekf_iterations: usize,
}

impl Default for FilterSection {
    fn default() -> Self {
        Self {
            delta_w: 0.01,
            w_loc: 0.99,
            gamma_scale: 1e-4,
            gate_confidence: 0.999,
            merge_distance: None,
            ekf_iterations: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PlannerSection {
    pub neighborhood_radius: f64,
    pub neighborhood_retries: usize,
    pub rrt_iterations: usize,
    pub rrt_step: f64,
    pub rrt_goal_bias: f64,
    pub rrt_gamma: f64,
    pub rrt_goal_tolerance: f64,
    /// Planning clearance as a multiple of the robot radius.
    pub clearance_factor: f64,
    /// Anticipated-violation margin as a multiple of the robot radius.
    pub safety_factor: f64,
    pub c_fail: f64,
    pub rhc_horizon_s: f64,
    pub epoch_cap: usize,
    pub v_max: f64,
    pub omega_max: f64,
    pub k_along: f64,
    pub k_cross: f64,
    pub k_heading: f64,
}

impl Default for PlannerSection {
    fn default() -> Self {
        let g = TrackingGains::default();
        Self {
            neighborhood_radius: 3.0,
            neighborhood_retries: 3,
            rrt_iterations: 2000,
            rrt_step: 0.8,
            rrt_goal_bias: 0.05,
            rrt_gamma: 6.0,
            rrt_goal_tolerance: 0.1,
            clearance_factor: 2.0,
            safety_factor: 1.5,
            c_fail: 1e6,
            rhc_horizon_s: 60.0,
            epoch_cap: 30,
            v_max: 0.5,
            omega_max: 1.0,
            k_along: g.k_along,
            k_cross: g.k_cross,
            k_heading: g.k_heading,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Phase1Section {
    /// Steps with an unchanged mode count that end stationary filtering.
    pub dwell: usize,
    pub max_steps: usize,
}

impl Default for Phase1Section {
    fn default() -> Self {
        Self {
            dwell: 20,
            max_steps: 3000,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub trace: Option<PathBuf>,
    pub summary: Option<PathBuf>,
}

mod defaults {
    pub use super::default_sensor as sensor;

    pub fn dt() -> f64 {
        0.1
    }
}

/// Sensor used when a scenario omits the `[sensor]` table.
pub fn default_sensor() -> ObsNoiseParams {
    ObsNoiseParams {
        eta_r: 0.01,
        eta_theta: 0.005,
        sigma_b_r: 0.05,
        sigma_b_theta: 0.02,
        max_range: 5.0,
        fov: 2.0 * std::f64::consts::PI,
    }
}

impl ScenarioConfig {
    pub fn parse(text: &str) -> Result<Self, ScenarioError> {
        let cfg: Self = toml::from_str(text).map_err(|e| ScenarioError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a scenario and resolves its relative paths against the file's
    /// directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, ScenarioError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let mut cfg = Self::parse(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve_paths(base);
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let join = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        join(&mut self.map);
        if let Some(p) = self.graph.path.as_mut() {
            join(p);
        }
        if let Some(p) = self.output.trace.as_mut() {
            join(p);
        }
        if let Some(p) = self.output.summary.as_mut() {
            join(p);
        }
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        let bad = |m: String| Err(ScenarioError::Invalid(m));
        if !(self.dt > 0.0) {
            return bad(format!("dt must be > 0, got {}", self.dt));
        }
        match (&self.start.pose, self.start.random) {
            (Some(_), true) => return bad("start: give either pose or random, not both".into()),
            (None, false) => return bad("start: pose or random = true is required".into()),
            _ => {}
        }
        if self.initial_belief.samples == 0 {
            return bad("initial_belief.samples must be >= 1".into());
        }
        if self.initial_belief.sigma.iter().any(|s| !(*s >= 0.0)) {
            return bad("initial_belief.sigma entries must be >= 0".into());
        }
        self.sensor
            .validate()
            .map_err(|e| ScenarioError::Invalid(format!("sensor: {e}")))?;
        let f = &self.filter;
        if !(0.0..1.0).contains(&f.delta_w) {
            return bad(format!(
                "filter.delta_w must be in [0, 1), got {}",
                f.delta_w
            ));
        }
        if !(f.w_loc > 0.0 && f.w_loc <= 1.0) {
            return bad(format!("filter.w_loc must be in (0, 1], got {}", f.w_loc));
        }
        if !(f.gate_confidence > 0.0 && f.gate_confidence < 1.0) {
            return bad(format!(
                "filter.gate_confidence must be in (0, 1), got {}",
                f.gate_confidence
            ));
        }
        if !(f.gamma_scale >= 0.0) {
            return bad("filter.gamma_scale must be >= 0".into());
        }
        if f.ekf_iterations == 0 {
            return bad("filter.ekf_iterations must be >= 1".into());
        }
        let p = &self.planner;
        if !(p.neighborhood_radius > 0.0) {
            return bad("planner.neighborhood_radius must be > 0".into());
        }
        if !(p.rhc_horizon_s > 0.0) || !(p.v_max > 0.0) || !(p.omega_max > 0.0) {
            return bad("planner horizon and control limits must be > 0".into());
        }
        if !(p.c_fail >= 0.0) {
            return bad("planner.c_fail must be >= 0".into());
        }
        if self.graph.path.is_none() && self.graph.nodes == 0 {
            return bad("graph.nodes must be >= 1".into());
        }
        if self.phase1.dwell == 0 {
            return bad("phase1.dwell must be >= 1".into());
        }
        Ok(())
    }

    pub fn filter_config(&self) -> FilterConfig {
        let f = &self.filter;
        FilterConfig {
            sensor: self.sensor,
            motion: self.motion_noise(),
            gate: chi2_2dof_quantile(f.gate_confidence),
            gamma_scale: f.gamma_scale,
            delta_w: f.delta_w,
            w_loc: f.w_loc,
            merge_distance: f.merge_distance,
            ekf_iterations: f.ekf_iterations,
        }
    }

    pub fn motion_noise(&self) -> MotionNoise {
        MotionNoise::diagonal(self.motion_noise.sigma_v, self.motion_noise.sigma_omega)
    }

    pub fn executive_params(&self, robot_radius: f64) -> ExecutiveParams {
        let p = &self.planner;
        ExecutiveParams {
            neighborhood_radius: p.neighborhood_radius,
            neighborhood_retries: p.neighborhood_retries,
            rrt: RrtParams {
                iterations: p.rrt_iterations,
                step: p.rrt_step,
                goal_tolerance: p.rrt_goal_tolerance,
                goal_bias: p.rrt_goal_bias,
                gamma: p.rrt_gamma,
                clearance: p.clearance_factor * robot_radius,
            },
            limits: ControlLimits {
                v_max: p.v_max,
                omega_max: p.omega_max,
            },
            gains: TrackingGains {
                k_along: p.k_along,
                k_cross: p.k_cross,
                k_heading: p.k_heading,
            },
            c_fail: p.c_fail,
            horizon_s: p.rhc_horizon_s,
            epoch_cap: p.epoch_cap,
            dt: self.dt,
            safety_margin: p.safety_factor * robot_radius,
            seed: self.seed,
        }
    }

    pub fn initial_cov(&self) -> Matrix3<f64> {
        let s = self.initial_belief.sigma;
        Matrix3::from_diagonal(&Vector3::new(s[0] * s[0], s[1] * s[1], s[2] * s[2]))
    }

    /// Sensor used when building the graph.
    pub fn graph_sensor(&self) -> ObsNoiseParams {
        if self.graph.use_fov {
            self.sensor
        } else {
            self.sensor.with_fov(2.0 * std::f64::consts::PI)
        }
    }
}

/// A scenario with its map and graph loaded and its start pose fixed.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub config: ScenarioConfig,
    pub env: Environment,
    pub graph: UniquenessGraph,
    pub start: Pose,
}

/// RNG stream ids derived from the master seed.
pub(crate) mod streams {
    pub const START: u64 = 1;
    pub const BELIEF: u64 = 2;
    pub const TRUTH: u64 = 3;
}

pub(crate) fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

impl Scenario {
    pub fn load(config_path: impl AsRef<Path>) -> Result<Self, ScenarioError> {
        Self::from_config(ScenarioConfig::load(config_path)?)
    }

    pub fn from_config(config: ScenarioConfig) -> Result<Self, ScenarioError> {
        let env = load_map(&config.map)?;
        let graph = match &config.graph.path {
            Some(p) => UniquenessGraph::load(p)?,
            None => {
                let mut rng = ChaCha8Rng::seed_from_u64(config.graph.seed);
                UniquenessGraph::build(&env, config.graph.nodes, &config.graph_sensor(), &mut rng)?
            }
        };
        Self::with_parts(config, env, graph)
    }

    pub fn with_parts(
        config: ScenarioConfig,
        env: Environment,
        graph: UniquenessGraph,
    ) -> Result<Self, ScenarioError> {
        config.validate()?;
        graph
            .validate(&env)
            .map_err(|e| ScenarioError::Invalid(format!("graph does not fit the map: {e}")))?;
        let start = match config.start.pose {
            Some([x, y, th]) => {
                let p = Pose::new(x, y, th);
                if !env.is_free(&p) {
                    return Err(ScenarioError::Invalid(format!(
                        "start pose ({x}, {y}) is not collision-free"
                    )));
                }
                p
            }
            None => env.sample_free_pose(
                &mut stream_rng(config.seed, streams::START),
                DEFAULT_SAMPLE_ATTEMPTS,
            )?,
        };
        Ok(Self {
            config,
            env,
            graph,
            start,
        })
    }
}
