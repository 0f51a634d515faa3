use m3p_core::belief::{ekf_predict, ekf_update, GaussianMode, MatchedObservation};
use m3p_core::models::{
    measure, motion_jacobians, observation_jacobian, observation_noise_cov, propagate, Control,
    MotionNoise, ObsNoiseParams, Observation,
};
use m3p_core::world::{wrap_angle, Bounds, Environment, Landmark, Pose};
use nalgebra::{Matrix2x3, Matrix3, Matrix3x2, Point2, Vector2, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const FD_STEP: f64 = 1e-6;
pub const JACOBIAN_RTOL: f64 = 1e-6;
pub const KF_TOL: f64 = 1e-9;

pub fn sensor() -> ObsNoiseParams {
    ObsNoiseParams {
        eta_r: 0.02,
        eta_theta: 0.01,
        sigma_b_r: 0.05,
        sigma_b_theta: 0.02,
        max_range: 50.0,
        fov: std::f64::consts::TAU,
    }
}

pub fn random_pose(rng: &mut ChaCha8Rng) -> Pose {
    Pose::new(
        rng.random_range(-10.0..10.0),
        rng.random_range(-10.0..10.0),
        rng.random_range(-3.1..3.1),
    )
}

pub fn random_spd(rng: &mut ChaCha8Rng) -> Matrix3<f64> {
    let a = Matrix3::from_fn(|_, _| rng.random_range(-0.5..0.5));
    a * a.transpose() + Matrix3::identity() * 0.05
}

pub fn close(a: f64, b: f64, rtol: f64) -> bool {
    (a - b).abs() <= rtol * a.abs().max(b.abs()).max(1.0)
}

pub fn open_env(landmarks: Vec<Landmark>) -> Environment {
    Environment::new(
        Bounds::new(-20.0, -20.0, 20.0, 20.0),
        vec![],
        landmarks,
        0.1,
    )
    .unwrap()
}

pub fn motion_jacobians_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..1000 {
        let x = random_pose(&mut rng);
        let u = Control::new(rng.random_range(-1.0..1.0), rng.random_range(-2.0..2.0));
        let dt = rng.random_range(0.01..0.5);
        let (a, g) = motion_jacobians(&x, &u, dt);
        let f = |p: Vector3<f64>, w: Vector2<f64>| {
            propagate(&Pose::new(p[0], p[1], p[2]), &u, &w, dt).to_vector()
        };
        let p0 = x.to_vector();
        let mut a_fd = Matrix3::zeros();
        for j in 0..3 {
            let mut e = Vector3::zeros();
            e[j] = FD_STEP;
            let col = (f(p0 + e, Vector2::zeros()) - f(p0 - e, Vector2::zeros())) / (2.0 * FD_STEP);
            a_fd.set_column(j, &col);
        }
        let mut g_fd = Matrix3x2::zeros();
        for j in 0..2 {
            let mut e = Vector2::zeros();
            e[j] = FD_STEP;
            let col = (f(p0, e) - f(p0, -e)) / (2.0 * FD_STEP);
            g_fd.set_column(j, &col);
        }
        for (an, fd) in a.iter().zip(a_fd.iter()) {
            assert!(close(*an, *fd, JACOBIAN_RTOL), "A {a} vs {a_fd}");
        }
        for (an, fd) in g.iter().zip(g_fd.iter()) {
            assert!(close(*an, *fd, JACOBIAN_RTOL), "G {g} vs {g_fd}");
        }
    }
}
pub fn observation_jacobian_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut checked = 0;
    while checked < 1000 {
        let x = random_pose(&mut rng);
        let lm = Point2::new(rng.random_range(-10.0..10.0), rng.random_range(-10.0..10.0));
        let (r, b) = measure(&x, &lm);
        // keep away from the singular point and the bearing wrap
        if r < 0.5 || b.abs() > 3.0 {
            continue;
        }
        checked += 1;
        let h = observation_jacobian(&x, &lm);
        let p0 = x.to_vector();
        let mut h_fd = Matrix2x3::zeros();
        for j in 0..3 {
            let mut e = Vector3::zeros();
            e[j] = FD_STEP;
            let (rp, bp) = measure(&Pose::from_vector(&(p0 + e)), &lm);
            let (rm, bm) = measure(&Pose::from_vector(&(p0 - e)), &lm);
            h_fd[(0, j)] = (rp - rm) / (2.0 * FD_STEP);
            h_fd[(1, j)] = wrap_angle(bp - bm) / (2.0 * FD_STEP);
        }
        for (an, fd) in h.iter().zip(h_fd.iter()) {
            assert!(close(*an, *fd, JACOBIAN_RTOL), "H {h} vs {h_fd}");
        }
    }
}

pub fn ekf_update_matches_information_form_kalman_filter() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let p = sensor();
    for _ in 0..300 {
        let n = rng.random_range(1..5);
        let landmarks: Vec<Landmark> = (0..n)
            .map(|i| {
                Landmark::new(
                    i as u32,
                    rng.random_range(-10.0..10.0),
                    rng.random_range(-10.0..10.0),
                )
            })
            .collect();
        let env = open_env(landmarks);
        let mean = Pose::new(
            rng.random_range(-2.0..2.0),
            rng.random_range(-2.0..2.0),
            0.3,
        );
        let cov = random_spd(&mut rng);
        let m = GaussianMode::new(0, mean, cov, 1.0);
        let matched: Vec<MatchedObservation> = env
            .landmarks()
            .iter()
            .enumerate()
            .filter_map(|(i, l)| {
                let (r, b) = measure(&mean, &l.position);
                (r > 0.5 && b.abs() < 2.8).then(|| MatchedObservation {
                    z: Observation {
                        landmark_id: l.id,
                        range: r + rng.random_range(-0.1..0.1),
                        bearing: b + rng.random_range(-0.05..0.05),
                    },
                    landmark_index: i,
                })
            })
            .collect();
        if matched.is_empty() {
            continue;
        }
        let post = ekf_update(&m, &matched, &env, &p).unwrap();

        // linear surrogate about the prior mean, in information form
        let mut info = cov.try_inverse().unwrap();
        let mut info_vec = Vector3::zeros();
        for mo in &matched {
            let lm = env.landmarks()[mo.landmark_index].position;
            let h = observation_jacobian(&mean, &lm);
            let (r, b) = measure(&mean, &lm);
            let ri = observation_noise_cov(r, &p).try_inverse().unwrap();
            let nu = Vector2::new(mo.z.range - r, wrap_angle(mo.z.bearing - b));
            info += h.transpose() * ri * h;
            info_vec += h.transpose() * ri * nu;
        }
        let sigma_post = info.try_inverse().unwrap();
        let mu_post = mean.to_vector() + sigma_post * info_vec;
        for (a, b) in post.cov.iter().zip(sigma_post.iter()) {
            assert!((a - b).abs() < KF_TOL, "{} vs {}", post.cov, sigma_post);
        }
        assert!((post.mean.x - mu_post[0]).abs() < KF_TOL);
        assert!((post.mean.y - mu_post[1]).abs() < KF_TOL);
        assert!(wrap_angle(post.mean.theta - mu_post[2]).abs() < KF_TOL);
    }
}
pub fn ekf_predict_matches_linearized_propagation() {
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    for _ in 0..300 {
        let mean = random_pose(&mut rng);
        let cov = random_spd(&mut rng);
        let u = Control::new(rng.random_range(0.0..0.5), rng.random_range(-1.0..1.0));
        let dt = 0.1;
        let q = MotionNoise::diagonal(rng.random_range(0.0..0.1), rng.random_range(0.0..0.1));
        let m = GaussianMode::new(0, mean, cov, 1.0);
        let out = ekf_predict(&m, &u, &q, dt);
        let (s, c) = mean.theta.sin_cos();
        let a = Matrix3::new(
            1.0,
            0.0,
            -u.v * dt * s,
            0.0,
            1.0,
            u.v * dt * c,
            0.0,
            0.0,
            1.0,
        );
        let g = Matrix3x2::new(dt * c, 0.0, dt * s, 0.0, 0.0, dt);
        let expect = a * cov * a.transpose() + g * q.q * g.transpose();
        for (x, y) in out.cov.iter().zip(expect.iter()) {
            assert!((x - y).abs() < KF_TOL);
        }
        assert!((out.mean.x - (mean.x + u.v * dt * c)).abs() < KF_TOL);
        assert!((out.mean.y - (mean.y + u.v * dt * s)).abs() < KF_TOL);
        assert_eq!(out.weight, 1.0);
    }
}
