//! Line-delimited run log. One JSON object per line; the first line is a
//! header carrying the schema version.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::belief::{Belief, GaussianMode};
use crate::models::{Control, Observation};
use crate::world::{Environment, Pose};

pub const TRACE_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    /// Stationary filtering before any motion.
    Initial,
    Active,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReplanReason {
    ModeCountChange,
    ConstraintViolation,
    Horizon,
    Merge,
}

impl ReplanReason {
    pub fn tag(&self) -> &'static str {
        match self {
            ReplanReason::ModeCountChange => "mode_count_change",
            ReplanReason::ConstraintViolation => "constraint_violation",
            ReplanReason::Horizon => "horizon",
            ReplanReason::Merge => "merge",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeSnapshot {
    pub id: u64,
    pub mean: Pose,
    /// Row-major 3x3.
    pub cov: [[f64; 3]; 3],
    pub weight: f64,
    pub beta: f64,
}

impl From<&GaussianMode> for ModeSnapshot {
    fn from(m: &GaussianMode) -> Self {
        let mut cov = [[0.0; 3]; 3];
        for (r, row) in cov.iter_mut().enumerate() {
            for (c, v) in row.iter_mut().enumerate() {
                *v = m.cov[(r, c)];
            }
        }
        Self {
            id: m.id,
            mean: m.mean,
            cov,
            weight: m.weight,
            beta: m.beta,
        }
    }
}

impl ModeSnapshot {
    pub fn to_mode(&self) -> GaussianMode {
        let mut m = GaussianMode::new(
            self.id,
            self.mean,
            nalgebra::Matrix3::from_fn(|r, c| self.cov[r][c]),
            self.weight,
        );
        m.beta = self.beta;
        m
    }

    pub fn sigma_diag(&self) -> [f64; 3] {
        [self.cov[0][0], self.cov[1][1], self.cov[2][2]]
    }
}

/// Header record describing `env`.
pub fn header(seed: u64, dt: f64, env: &Environment) -> TraceRecord {
    let b = env.bounds();
    TraceRecord::Header {
        schema_version: TRACE_SCHEMA_VERSION,
        seed,
        dt,
        bounds: [b.min_x, b.min_y, b.max_x, b.max_y],
        obstacles: env
            .obstacles()
            .iter()
            .map(|o| o.vertices().iter().map(|v| [v.x, v.y]).collect())
            .collect(),
        landmarks: env
            .landmarks()
            .iter()
            .map(|l| (l.id, l.position.x, l.position.y))
            .collect(),
    }
}

pub fn snapshot(b: &Belief) -> Vec<ModeSnapshot> {
    b.modes.iter().map(ModeSnapshot::from).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GainReport {
    pub policy_index: usize,
    /// Mode the policy was planned for.
    pub mode_id: u64,
    pub mode_weight: f64,
    pub delta_i: f64,
    /// Gain under each start hypothesis, in belief order.
    pub per_start: Vec<f64>,
    /// First step (1-based) of a predicted collision, per start hypothesis.
    pub collision_step: Vec<Option<usize>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TraceRecord {
    Header {
        schema_version: u32,
        seed: u64,
        dt: f64,
        /// `[min_x, min_y, max_x, max_y]`.
        bounds: [f64; 4],
        obstacles: Vec<Vec<[f64; 2]>>,
        /// `(id, x, y)`.
        landmarks: Vec<(u32, f64, f64)>,
    },
    Step {
        t: f64,
        phase: Phase,
        truth: Pose,
        control: Control,
        observations: Vec<Observation>,
        belief: Vec<ModeSnapshot>,
    },
    Plan {
        t: f64,
        epoch: usize,
        /// Target node per mode, in belief order; `None` when planning failed.
        targets: Vec<Option<usize>>,
        gains: Vec<GainReport>,
        chosen: Option<usize>,
        /// Reference positions of the chosen policy.
        path: Vec<[f64; 2]>,
    },
    Replan {
        t: f64,
        epoch: usize,
        reason: ReplanReason,
    },
    Failure {
        t: f64,
        message: String,
    },
    Summary {
        converged: bool,
        epochs: usize,
        steps: usize,
        initial_modes: usize,
        final_modes: usize,
        final_max_weight: f64,
    },
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TraceLog {
    pub records: Vec<TraceRecord>,
}

#[derive(Debug, thiserror::Error)]
pub enum TraceError {
    #[error("trace io: {0}")]
    Io(#[from] std::io::Error),
    #[error("trace line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("trace schema version {found}, expected {expected}")]
    Version { found: u32, expected: u32 },
    #[error("trace has no header")]
    MissingHeader,
}

impl TraceLog {
    pub fn push(&mut self, r: TraceRecord) {
        self.records.push(r);
    }

    pub fn steps(&self) -> impl Iterator<Item = &TraceRecord> {
        self.records
            .iter()
            .filter(|r| matches!(r, TraceRecord::Step { .. }))
    }

    pub fn write_jsonl<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for r in &self.records {
            serde_json::to_writer(&mut w, r)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn to_jsonl(&self) -> String {
        let mut buf = Vec::new();
        self.write_jsonl(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("json is utf-8")
    }

    /// Reads a trace and checks its header version.
    pub fn read_jsonl<R: BufRead>(r: R) -> Result<Self, TraceError> {
        let mut records = Vec::new();
        for (i, line) in r.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            if records.is_empty() {
                let v: serde_json::Value =
                    serde_json::from_str(&line).map_err(|e| TraceError::Parse {
                        line: i + 1,
                        message: e.to_string(),
                    })?;
                if v.get("kind").and_then(|k| k.as_str()) != Some("header") {
                    return Err(TraceError::MissingHeader);
                }
                let found = v
                    .get("schema_version")
                    .and_then(|s| s.as_u64())
                    .unwrap_or(0) as u32;
                if found != TRACE_SCHEMA_VERSION {
                    return Err(TraceError::Version {
                        found,
                        expected: TRACE_SCHEMA_VERSION,
                    });
                }
            }
            let rec: TraceRecord = serde_json::from_str(&line).map_err(|e| TraceError::Parse {
                line: i + 1,
                message: e.to_string(),
            })?;
            records.push(rec);
        }
        Ok(Self { records })
    }
}
