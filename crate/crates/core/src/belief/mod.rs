//! Gaussian-mixture belief: per-mode EKF, likelihood and negative-information
//! weight update, pruning, merging.

mod filter;

use nalgebra::{DMatrix, DVector, Matrix3, Vector3};
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::models::{
    innovation, measure, motion_jacobians, observation_jacobian, observation_noise_cov,
    predict_observations, propagate, Control, MotionNoise, ObsNoiseParams, Observation, Prediction,
};
use crate::world::{wrap_angle, Environment, Pose, WorldError};

pub use filter::{FilterConfig, MhtFilter, StepOutcome};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BeliefError {
    #[error("innovation covariance is not invertible")]
    SingularInnovation,
    #[error("sensor covariance is not invertible for landmark {0}")]
    SingularNoise(usize),
}

/// One hypothesis of the mixture.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianMode {
    /// Stable identity, preserved through updates and merges.
    pub id: u64,
    pub mean: Pose,
    pub cov: Matrix3<f64>,
    pub weight: f64,
    /// Seconds of accumulated observation discrepancy.
    pub beta: f64,
}

impl GaussianMode {
    pub fn new(id: u64, mean: Pose, cov: Matrix3<f64>, weight: f64) -> Self {
        Self {
            id,
            mean,
            cov,
            weight,
            beta: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Belief {
    pub modes: Vec<GaussianMode>,
}

impl Belief {
    pub fn new(modes: Vec<GaussianMode>) -> Self {
        Self { modes }
    }

    /// Equal-weight mixture with one mode per mean.
    pub fn uniform(means: &[Pose], cov: Matrix3<f64>) -> Self {
        let w = 1.0 / means.len() as f64;
        Self::new(
            means
                .iter()
                .enumerate()
                .map(|(i, m)| GaussianMode::new(i as u64, *m, cov, w))
                .collect(),
        )
    }

    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    pub fn weight_sum(&self) -> f64 {
        self.modes.iter().map(|m| m.weight).sum()
    }

    /// Index of the heaviest mode, lowest index on ties.
    pub fn argmax(&self) -> Option<usize> {
        let mut best: Option<usize> = None;
        for (i, m) in self.modes.iter().enumerate() {
            if best.is_none_or(|b| m.weight > self.modes[b].weight) {
                best = Some(i);
            }
        }
        best
    }

    pub fn max_weight(&self) -> f64 {
        self.modes.iter().map(|m| m.weight).fold(0.0, f64::max)
    }

    pub fn position_of(&self, id: u64) -> Option<usize> {
        self.modes.iter().position(|m| m.id == id)
    }

    fn normalize(&mut self) {
        let s = self.weight_sum();
        if s > 0.0 && s.is_finite() {
            for m in &mut self.modes {
                m.weight /= s;
            }
        } else {
            let w = 1.0 / self.modes.len() as f64;
            for m in &mut self.modes {
                m.weight = w;
            }
        }
    }

    /// Checks every mixture invariant; returns the first violation.
    pub fn check_invariants(&self) -> Result<(), String> {
        if self.modes.is_empty() {
            return Err("belief has no modes".into());
        }
        let s = self.weight_sum();
        if (s - 1.0).abs() > 1e-9 {
            return Err(format!("weights sum to {s}"));
        }
        for m in &self.modes {
            if !(0.0..=1.0).contains(&m.weight) {
                return Err(format!("mode {} weight {} outside [0, 1]", m.id, m.weight));
            }
            if !(m.beta >= 0.0) {
                return Err(format!("mode {} has negative beta {}", m.id, m.beta));
            }
            check_cov(&m.cov).map_err(|e| format!("mode {}: {e}", m.id))?;
        }
        Ok(())
    }
}

/// Symmetric within 1e-12 and PSD within -1e-10.
pub fn check_cov(c: &Matrix3<f64>) -> Result<(), String> {
    let asym = (c - c.transpose()).abs().max();
    if asym > 1e-12 {
        return Err(format!("covariance asymmetric by {asym}"));
    }
    let min_eig = c.symmetric_eigenvalues().min();
    if min_eig < -1e-10 {
        return Err(format!("covariance has eigenvalue {min_eig}"));
    }
    Ok(())
}

fn symmetrize(c: &Matrix3<f64>) -> Matrix3<f64> {
    (c + c.transpose()) * 0.5
}

/// Initial belief from uniform free-space samples with a shared covariance.
pub fn init_belief<R: Rng + ?Sized>(
    env: &Environment,
    n_samples: usize,
    cov0: Matrix3<f64>,
    rng: &mut R,
    max_attempts: usize,
) -> Result<Belief, WorldError> {
    assert!(n_samples >= 1, "need at least one sample");
    let means = (0..n_samples)
        .map(|_| env.sample_free_pose(rng, max_attempts))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Belief::uniform(&means, cov0))
}

/// EKF time update; weight and beta are untouched.
pub fn ekf_predict(m: &GaussianMode, u: &Control, q: &MotionNoise, dt: f64) -> GaussianMode {
    let (a, g) = motion_jacobians(&m.mean, u, dt);
    let cov = a * m.cov * a.transpose() + g * q.q * g.transpose();
    GaussianMode {
        mean: propagate(&m.mean, u, &nalgebra::Vector2::zeros(), dt),
        cov: symmetrize(&cov),
        ..m.clone()
    }
}

/// An observation paired with the map landmark it was associated to.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatchedObservation {
    pub z: Observation,
    pub landmark_index: usize,
}

/// Predictions at the mode mean, gated by the innovation covariance
/// `H Σ Hᵀ + R`.
pub fn predict_for_mode(
    env: &Environment,
    m: &GaussianMode,
    p: &ObsNoiseParams,
) -> Vec<Prediction> {
    let mut preds = predict_observations(env, &m.mean, p);
    for pr in &mut preds {
        let h = observation_jacobian(&m.mean, &env.landmarks()[pr.landmark_index].position);
        let s = h * m.cov * h.transpose() + pr.gate_cov;
        pr.gate_cov = (s + s.transpose()) * 0.5;
    }
    preds
}

/// Stacked-innovation EKF measurement update.
pub fn ekf_update(
    m: &GaussianMode,
    matched: &[MatchedObservation],
    env: &Environment,
    p: &ObsNoiseParams,
) -> Result<GaussianMode, BeliefError> {
    ekf_update_iterated(m, matched, env, p, 1)
}

/// Iterated EKF update: relinearizes the measurement model about the running
/// posterior estimate `iterations` times. One iteration is the plain EKF.
pub fn ekf_update_iterated(
    m: &GaussianMode,
    matched: &[MatchedObservation],
    env: &Environment,
    p: &ObsNoiseParams,
    iterations: usize,
) -> Result<GaussianMode, BeliefError> {
    if matched.is_empty() {
        return Ok(m.clone());
    }
    let n = matched.len();
    let prior = m.mean.to_vector();
    let mut est = prior;
    let mut h = DMatrix::<f64>::zeros(2 * n, 3);
    let mut r = DMatrix::<f64>::zeros(2 * n, 2 * n);
    let mut k = DMatrix::<f64>::zeros(3, 2 * n);
    let sigma = DMatrix::from_iterator(3, 3, m.cov.iter().copied());
    for _ in 0..iterations.max(1) {
        let at = Pose::from_vector(&est);
        let mut nu = DVector::<f64>::zeros(2 * n);
        for (i, mo) in matched.iter().enumerate() {
            let lm = &env.landmarks()[mo.landmark_index].position;
            let (range, bearing) = measure(&at, lm);
            let hi = observation_jacobian(&at, lm);
            let ri = observation_noise_cov(range, p);
            // relinearized residual: z - h(est) - H (prior - est)
            let dx = Vector3::new(
                prior[0] - est[0],
                prior[1] - est[1],
                wrap_angle(prior[2] - est[2]),
            );
            let corr = hi * dx;
            nu[2 * i] = mo.z.range - range - corr[0];
            nu[2 * i + 1] = wrap_angle(mo.z.bearing - bearing) - corr[1];
            h.view_mut((2 * i, 0), (2, 3)).copy_from(&hi);
            r.view_mut((2 * i, 2 * i), (2, 2)).copy_from(&ri);
        }
        let s = &h * &sigma * h.transpose() + &r;
        let s_inv = s.try_inverse().ok_or(BeliefError::SingularInnovation)?;
        k = &sigma * h.transpose() * s_inv;
        let dx = &k * nu;
        est = Vector3::new(
            prior[0] + dx[0],
            prior[1] + dx[1],
            wrap_angle(prior[2] + dx[2]),
        );
    }
    // Joseph form keeps the posterior PSD
    let ikh = DMatrix::<f64>::identity(3, 3) - &k * &h;
    let post = &ikh * &sigma * ikh.transpose() + &k * &r * k.transpose();
    let cov = Matrix3::from_iterator(post.iter().copied());
    Ok(GaussianMode {
        mean: Pose::from_vector(&est),
        cov: symmetrize(&cov),
        ..m.clone()
    })
}

/// Squared Mahalanobis distance between the matched sensor readings and the
/// most-likely readings at the mode mean, weighted by the sensor covariance.
pub fn mahalanobis_sq(
    matched: &[MatchedObservation],
    m: &GaussianMode,
    env: &Environment,
    p: &ObsNoiseParams,
) -> Result<f64, BeliefError> {
    let mut d2 = 0.0;
    for mo in matched {
        let lm = &env.landmarks()[mo.landmark_index];
        let (range, bearing) = measure(&m.mean, &lm.position);
        let pred = Observation {
            landmark_id: lm.id,
            range,
            bearing,
        };
        let nu = innovation(&mo.z, &pred);
        let r_inv = observation_noise_cov(range, p)
            .try_inverse()
            .ok_or(BeliefError::SingularNoise(mo.landmark_index))?;
        d2 += (nu.transpose() * r_inv * nu)[0];
    }
    Ok(d2)
}

/// Association counts and likelihood term for one mode in a weight update.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightDiagnostics {
    pub n_z: usize,
    pub n_pred: usize,
    pub n_matched: usize,
    pub d2: f64,
    pub alpha: f64,
    pub gamma: f64,
}

/// Discrepancy factor for a mode with the given association counts.
/// Returns `(alpha, new_beta, gamma)`; alpha is zero when the counts agree.
pub fn negative_information(
    n_z: usize,
    n_pred: usize,
    n_matched: usize,
    beta: f64,
    dt: f64,
    gamma_scale: f64,
) -> (f64, f64, f64) {
    if n_pred != n_z || n_pred != n_matched {
        let alpha = (1 + n_z - n_matched).max(1 + n_pred - n_matched) as f64;
        let beta = beta + dt;
        (alpha, beta, (-alpha * beta * gamma_scale).exp())
    } else {
        (0.0, 0.0, 1.0)
    }
}

/// Mixture weight update from one sensor reading.
///
/// Each mode predicts its reading, associates it, scales its weight by the
/// Gaussian likelihood of the matched pairs and normalizes; count mismatches
/// accumulate `beta` and apply the discrepancy factor, after which the mixture
/// is normalized again. Computed in the log domain so that sharp likelihoods
/// cannot underflow every weight.
pub fn update_weights(
    b: &Belief,
    z: &[Observation],
    env: &Environment,
    p: &ObsNoiseParams,
    dt: f64,
    gamma_scale: f64,
    gate: f64,
) -> (Belief, Vec<WeightDiagnostics>) {
    let diags: Vec<WeightDiagnostics> = b
        .modes
        .iter()
        .map(|m| {
            let preds = predict_for_mode(env, m, p);
            let a = crate::models::associate(z, &preds, gate);
            let matched: Vec<MatchedObservation> = a
                .matches
                .iter()
                .map(|&(i, j)| MatchedObservation {
                    z: z[i],
                    landmark_index: preds[j].landmark_index,
                })
                .collect();
            // a singular sensor covariance only occurs at zero range with zero bias
            let d2 = mahalanobis_sq(&matched, m, env, p).unwrap_or(0.0);
            WeightDiagnostics {
                n_z: a.n_z,
                n_pred: a.n_pred,
                n_matched: a.n_matched(),
                d2,
                alpha: 0.0,
                gamma: 1.0,
            }
        })
        .collect();
    apply_weight_update(b, diags, dt, gamma_scale)
}

/// Weight arithmetic given each mode's counts and squared distance.
pub fn apply_weight_update(
    b: &Belief,
    mut diags: Vec<WeightDiagnostics>,
    dt: f64,
    gamma_scale: f64,
) -> (Belief, Vec<WeightDiagnostics>) {
    let mut out = b.clone();
    let mut logw: Vec<f64> = b
        .modes
        .iter()
        .zip(&diags)
        .map(|(m, d)| m.weight.ln() - 0.5 * d.d2)
        .collect();
    log_normalize(&mut logw);
    for ((m, d), lw) in out
        .modes
        .iter_mut()
        .zip(diags.iter_mut())
        .zip(logw.iter_mut())
    {
        let (alpha, beta, gamma) =
            negative_information(d.n_z, d.n_pred, d.n_matched, m.beta, dt, gamma_scale);
        d.alpha = alpha;
        d.gamma = gamma;
        m.beta = beta;
        *lw += -alpha * beta * gamma_scale;
    }
    log_normalize(&mut logw);
    for (m, lw) in out.modes.iter_mut().zip(&logw) {
        m.weight = lw.exp();
    }
    out.normalize();
    (out, diags)
}

fn log_normalize(logw: &mut [f64]) {
    let max = logw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        let u = -(logw.len() as f64).ln();
        logw.iter_mut().for_each(|l| *l = u);
        return;
    }
    let lse = max + logw.iter().map(|l| (l - max).exp()).sum::<f64>().ln();
    logw.iter_mut().for_each(|l| *l -= lse);
}

/// Drops modes with weight at or below `delta_w` and renormalizes. If every
/// mode would go, the heaviest one is kept.
pub fn prune(b: &Belief, delta_w: f64) -> Belief {
    let kept: Vec<GaussianMode> = b
        .modes
        .iter()
        .filter(|m| m.weight > delta_w)
        .cloned()
        .collect();
    let mut out = if kept.is_empty() {
        let best = b.argmax().expect("belief is never empty");
        Belief::new(vec![b.modes[best].clone()])
    } else {
        Belief::new(kept)
    };
    out.normalize();
    out
}

/// Distance between two modes' means under their summed covariance.
pub fn mode_distance(a: &GaussianMode, b: &GaussianMode) -> f64 {
    let d = mean_difference(&b.mean, &a.mean);
    match (a.cov + b.cov).try_inverse() {
        Some(inv) => (d.transpose() * inv * d)[0].max(0.0).sqrt(),
        None => {
            if d.norm() == 0.0 {
                0.0
            } else {
                f64::INFINITY
            }
        }
    }
}

fn mean_difference(a: &Pose, b: &Pose) -> Vector3<f64> {
    Vector3::new(a.x - b.x, a.y - b.y, wrap_angle(a.theta - b.theta))
}

/// Moment-matched merge of modes closer than `d_merge`. Groups form around the
/// heaviest remaining mode, which lends its id. Returns the number of modes
/// absorbed.
pub fn merge_similar(b: &Belief, d_merge: f64) -> (Belief, usize) {
    let n = b.modes.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        b.modes[j]
            .weight
            .total_cmp(&b.modes[i].weight)
            .then(i.cmp(&j))
    });
    let mut taken = vec![false; n];
    let mut groups: Vec<(usize, Vec<usize>)> = Vec::new();
    for &i in &order {
        if taken[i] {
            continue;
        }
        taken[i] = true;
        let mut g = vec![i];
        for &j in &order {
            if !taken[j] && mode_distance(&b.modes[i], &b.modes[j]) < d_merge {
                taken[j] = true;
                g.push(j);
            }
        }
        groups.push((i, g));
    }
    groups.sort_by_key(|(rep, _)| *rep);
    let absorbed = n - groups.len();
    let modes = groups
        .into_iter()
        .map(|(rep, g)| moment_match(&b.modes[rep], g.iter().map(|&k| &b.modes[k])))
        .collect();
    (Belief::new(modes), absorbed)
}

/// Weight-sum, weighted mean and spread-augmented covariance of a group;
/// headings are averaged on the tangent space at the representative.
pub fn moment_match<'a>(
    rep: &GaussianMode,
    group: impl Iterator<Item = &'a GaussianMode> + Clone,
) -> GaussianMode {
    let w: f64 = group.clone().map(|m| m.weight).sum();
    let base = rep.mean.to_vector();
    let offset = |m: &GaussianMode| mean_difference(&m.mean, &rep.mean);
    let mean_off: Vector3<f64> = group
        .clone()
        .map(|m| offset(m) * m.weight)
        .sum::<Vector3<f64>>()
        / w;
    let mut cov = Matrix3::zeros();
    let mut beta = 0.0;
    for m in group {
        let d = offset(m) - mean_off;
        cov += (m.cov + d * d.transpose()) * m.weight;
        beta += m.beta * m.weight;
    }
    GaussianMode {
        id: rep.id,
        mean: Pose::from_vector(&(base + mean_off)),
        cov: symmetrize(&(cov / w)),
        weight: w,
        beta: beta / w,
    }
}

pub fn is_unimodal(b: &Belief, w_loc: f64) -> bool {
    b.max_weight() >= w_loc
}
