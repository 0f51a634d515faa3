//! Unicycle motion model, range-bearing-signature sensor, their
//! linearizations, and signature-constrained gated data association.

use std::f64::consts::PI;

use nalgebra::{Matrix2, Matrix2x3, Matrix3, Matrix3x2, Point2, Vector2};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::world::{wrap_angle, Environment, Pose, Signature};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Control {
    pub v: f64,
    pub omega: f64,
}

impl Control {
    pub const ZERO: Control = Control { v: 0.0, omega: 0.0 };

    pub fn new(v: f64, omega: f64) -> Self {
        Self { v, omega }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControlLimits {
    pub v_max: f64,
    pub omega_max: f64,
}

impl ControlLimits {
    pub fn saturate(&self, u: Control) -> Control {
        Control {
            v: u.v.clamp(-self.v_max, self.v_max),
            omega: u.omega.clamp(-self.omega_max, self.omega_max),
        }
    }

    pub fn admits(&self, u: &Control) -> bool {
        u.v.abs() <= self.v_max + 1e-12 && u.omega.abs() <= self.omega_max + 1e-12
    }
}

/// Covariance of the additive velocity noise `(n_v, n_omega)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MotionNoise {
    pub q: Matrix2<f64>,
}

impl MotionNoise {
    pub fn diagonal(sigma_v: f64, sigma_omega: f64) -> Self {
        Self {
            q: Matrix2::new(sigma_v * sigma_v, 0.0, 0.0, sigma_omega * sigma_omega),
        }
    }

    pub fn zero() -> Self {
        Self {
            q: Matrix2::zeros(),
        }
    }

    /// Same noise with every standard deviation multiplied by `k`.
    pub fn scaled(&self, k: f64) -> Self {
        Self {
            q: self.q * (k * k),
        }
    }

    /// Draws `(n_v, n_omega)` through a Cholesky factor of `q`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vector2<f64> {
        let l = psd_sqrt2(&self.q);
        let e = Vector2::new(rng.sample(StandardNormal), rng.sample(StandardNormal));
        l * e
    }
}

/// Lower-triangular square root of a 2x2 PSD matrix, tolerant of zero diagonals.
fn psd_sqrt2(q: &Matrix2<f64>) -> Matrix2<f64> {
    let a = q[(0, 0)].max(0.0);
    let l00 = a.sqrt();
    let l10 = if l00 > 0.0 { q[(1, 0)] / l00 } else { 0.0 };
    let l11 = (q[(1, 1)] - l10 * l10).max(0.0).sqrt();
    Matrix2::new(l00, 0.0, l10, l11)
}

/// Range-bearing sensor parameters. Noise standard deviations grow affinely
/// with the distance to the landmark.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObsNoiseParams {
    pub eta_r: f64,
    pub eta_theta: f64,
    pub sigma_b_r: f64,
    pub sigma_b_theta: f64,
    pub max_range: f64,
    pub fov: f64,
}

impl ObsNoiseParams {
    pub fn validate(&self) -> Result<(), String> {
        let fields = [
            ("eta_r", self.eta_r),
            ("eta_theta", self.eta_theta),
            ("sigma_b_r", self.sigma_b_r),
            ("sigma_b_theta", self.sigma_b_theta),
            ("max_range", self.max_range),
        ];
        for (name, v) in fields {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(format!(
                    "{name} must be a finite non-negative number, got {v}"
                ));
            }
        }
        if !(self.fov > 0.0 && self.fov <= 2.0 * PI + 1e-12) {
            return Err(format!("fov must lie in (0, 2pi], got {}", self.fov));
        }
        Ok(())
    }

    pub fn scaled_noise(&self, k: f64) -> Self {
        Self {
            eta_r: self.eta_r * k,
            eta_theta: self.eta_theta * k,
            sigma_b_r: self.sigma_b_r * k,
            sigma_b_theta: self.sigma_b_theta * k,
            ..*self
        }
    }

    pub fn with_fov(&self, fov: f64) -> Self {
        Self { fov, ..*self }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub landmark_id: Signature,
    pub range: f64,
    pub bearing: f64,
}

impl Observation {
    pub fn as_vector(&self) -> Vector2<f64> {
        Vector2::new(self.range, self.bearing)
    }
}

/// Noiseless observation of a landmark predicted from a hypothesized pose,
/// with the covariance used to gate associations against it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    pub landmark_index: usize,
    pub obs: Observation,
    pub gate_cov: Matrix2<f64>,
}

/// Unicycle step: position advances along the current heading.
pub fn propagate(x: &Pose, u: &Control, w: &Vector2<f64>, dt: f64) -> Pose {
    let v = u.v + w[0];
    let omega = u.omega + w[1];
    Pose::new(
        x.x + v * dt * x.theta.cos(),
        x.y + v * dt * x.theta.sin(),
        x.theta + omega * dt,
    )
}

/// Jacobians of `propagate` with respect to the state and to the noise,
/// evaluated at zero noise.
pub fn motion_jacobians(x: &Pose, u: &Control, dt: f64) -> (Matrix3<f64>, Matrix3x2<f64>) {
    let (s, c) = x.theta.sin_cos();
    let a = Matrix3::new(
        1.0,
        0.0,
        -u.v * dt * s, //
        0.0,
        1.0,
        u.v * dt * c, //
        0.0,
        0.0,
        1.0,
    );
    let g = Matrix3x2::new(
        dt * c,
        0.0, //
        dt * s,
        0.0, //
        0.0,
        dt,
    );
    (a, g)
}

/// Per-landmark sensor covariance at range `d`.
pub fn observation_noise_cov(d: f64, p: &ObsNoiseParams) -> Matrix2<f64> {
    let sr = p.eta_r * d + p.sigma_b_r;
    let sb = p.eta_theta * d + p.sigma_b_theta;
    Matrix2::new(sr * sr, 0.0, 0.0, sb * sb)
}

/// Noiseless range and bearing of `landmark` from `x`.
pub fn measure(x: &Pose, landmark: &Point2<f64>) -> (f64, f64) {
    let d = landmark - x.position();
    (d.norm(), wrap_angle(d.y.atan2(d.x) - x.theta))
}

/// Jacobian of `(range, bearing)` with respect to the pose.
pub fn observation_jacobian(x: &Pose, landmark: &Point2<f64>) -> Matrix2x3<f64> {
    let d = landmark - x.position();
    let q = d.norm_squared().max(1e-12);
    let r = q.sqrt();
    Matrix2x3::new(
        -d.x / r,
        -d.y / r,
        0.0, //
        d.y / q,
        -d.x / q,
        -1.0,
    )
}

/// Range, field of view and line of sight.
pub fn is_visible(env: &Environment, x: &Pose, landmark: &Point2<f64>, p: &ObsNoiseParams) -> bool {
    let (r, b) = measure(x, landmark);
    if r > p.max_range {
        return false;
    }
    if p.fov < 2.0 * PI && b.abs() > 0.5 * p.fov {
        return false;
    }
    env.line_of_sight(&x.position(), landmark)
}

/// Noiseless observations `h(x, 0)` of every visible landmark, in landmark order.
pub fn predict_observations(env: &Environment, x: &Pose, p: &ObsNoiseParams) -> Vec<Prediction> {
    env.landmarks()
        .iter()
        .enumerate()
        .filter(|(_, l)| is_visible(env, x, &l.position, p))
        .map(|(i, l)| {
            let (range, bearing) = measure(x, &l.position);
            Prediction {
                landmark_index: i,
                obs: Observation {
                    landmark_id: l.id,
                    range,
                    bearing,
                },
                gate_cov: observation_noise_cov(range, p),
            }
        })
        .collect()
}

/// Sensor reading at `x`. With an rng, each visible landmark gets noise drawn
/// from its range-dependent covariance; without one the reading is `h(x, 0)`.
pub fn observe<R: Rng + ?Sized>(
    env: &Environment,
    x: &Pose,
    p: &ObsNoiseParams,
    rng: Option<&mut R>,
) -> Vec<Observation> {
    let preds = predict_observations(env, x, p);
    match rng {
        None => preds.into_iter().map(|pr| pr.obs).collect(),
        Some(rng) => preds
            .into_iter()
            .map(|pr| {
                let sr = p.eta_r * pr.obs.range + p.sigma_b_r;
                let sb = p.eta_theta * pr.obs.range + p.sigma_b_theta;
                let nr: f64 = rng.sample(StandardNormal);
                let nb: f64 = rng.sample(StandardNormal);
                Observation {
                    landmark_id: pr.obs.landmark_id,
                    range: (pr.obs.range + sr * nr).max(0.0),
                    bearing: wrap_angle(pr.obs.bearing + sb * nb),
                }
            })
            .collect(),
    }
}

/// Innovation `z - z_pred` with the bearing component wrapped.
pub fn innovation(z: &Observation, z_pred: &Observation) -> Vector2<f64> {
    Vector2::new(
        z.range - z_pred.range,
        wrap_angle(z.bearing - z_pred.bearing),
    )
}

/// 2-DOF chi-square quantile at `confidence`.
pub fn chi2_2dof_quantile(confidence: f64) -> f64 {
    -2.0 * (1.0 - confidence).ln()
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Association {
    /// `(observation index, prediction index)` pairs.
    pub matches: Vec<(usize, usize)>,
    pub n_z: usize,
    pub n_pred: usize,
}

impl Association {
    pub fn n_matched(&self) -> usize {
        self.matches.len()
    }

    /// Every observation and prediction took part in a match.
    pub fn is_complete(&self) -> bool {
        self.n_pred == self.n_z && self.n_pred == self.n_matched()
    }
}

/// Greedy gated nearest-neighbour association.
///
/// Only equal signatures may pair. Candidate pairs passing the gate are taken
/// in increasing Mahalanobis distance (ties by observation, then prediction
/// index), each observation and prediction at most once.
pub fn associate(z: &[Observation], preds: &[Prediction], gate: f64) -> Association {
    let mut cands: Vec<(f64, usize, usize)> = Vec::new();
    for (i, zi) in z.iter().enumerate() {
        for (j, pj) in preds.iter().enumerate() {
            if zi.landmark_id != pj.obs.landmark_id {
                continue;
            }
            let nu = innovation(zi, &pj.obs);
            let Some(inv) = pj.gate_cov.try_inverse() else {
                continue;
            };
            let d2 = (nu.transpose() * inv * nu)[0];
            if d2 < gate {
                cands.push((d2, i, j));
            }
        }
    }
    cands.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut z_used = vec![false; z.len()];
    let mut p_used = vec![false; preds.len()];
    let mut matches = Vec::new();
    for (_, i, j) in cands {
        if !z_used[i] && !p_used[j] {
            z_used[i] = true;
            p_used[j] = true;
            matches.push((i, j));
        }
    }
    matches.sort();
    Association {
        matches,
        n_z: z.len(),
        n_pred: preds.len(),
    }
}
