use m3p_core::belief::{Belief, FilterConfig, GaussianMode, MhtFilter};
use m3p_core::models::{observe, propagate, Control, ControlLimits, MotionNoise, ObsNoiseParams};
use m3p_core::planner::{
    expected_information_gain, feedback_control, select_targets, GainParams, PlannerError, Policy,
    TrackingGains, Waypoint,
};
use m3p_core::uniqueness_graph::{shared_count, UGraphNode, UniquenessGraph};
use m3p_core::world::{Bounds, Environment, Landmark, Polygon, Pose};
use nalgebra::{Matrix3, Vector2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Target selection written as the literal nested loops: for every node of
/// mode i's neighborhood, for every other neighborhood, for every edge of the
/// node, for every node of that neighborhood, add the edge weight when the
/// edge lands on it. Strict improvement only, so the first minimum wins.
pub fn brute_force_targets(nodes: &[UGraphNode], means: &[(f64, f64)], radius: f64) -> Vec<usize> {
    let hood = |c: (f64, f64)| -> Vec<usize> {
        (0..nodes.len())
            .filter(|&v| {
                let p = nodes[v].pose;
                ((p.x - c.0).powi(2) + (p.y - c.1).powi(2)).sqrt() <= radius
            })
            .collect()
    };
    let hoods: Vec<Vec<usize>> = means.iter().map(|&c| hood(c)).collect();
    let mut out = Vec::new();
    for i in 0..means.len() {
        let mut min_weight = u64::MAX;
        let mut target = usize::MAX;
        for &v in &hoods[i] {
            let mut w = 0u64;
            for (j, nj) in hoods.iter().enumerate() {
                if j == i {
                    continue;
                }
                for u in 0..nodes.len() {
                    let ew = shared_count(&nodes[v].signatures, &nodes[u].signatures);
                    if u == v || ew == 0 {
                        continue;
                    }
                    for &p in nj {
                        if p == u {
                            w += ew as u64;
                        }
                    }
                }
            }
            if w < min_weight {
                min_weight = w;
                target = v;
            }
        }
        out.push(target);
    }
    out
}

pub fn target_selection_matches_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let mut compared = 0;
    let mut attempts = 0;
    while compared < 100 {
        attempts += 1;
        assert!(attempts < 10_000);
        let n = rng.random_range(1..=30);
        let nodes: Vec<UGraphNode> = (0..n)
            .map(|_| {
                let k = rng.random_range(0..5);
                let mut sig: Vec<u32> = (0..k).map(|_| rng.random_range(0..8)).collect();
                sig.sort();
                sig.dedup();
                UGraphNode {
                    pose: Pose::new(
                        rng.random_range(0.0..10.0),
                        rng.random_range(0.0..10.0),
                        0.0,
                    ),
                    signatures: sig,
                }
            })
            .collect();
        let m = rng.random_range(1..=4);
        let means: Vec<(f64, f64)> = (0..m)
            .map(|_| (rng.random_range(0.0..10.0), rng.random_range(0.0..10.0)))
            .collect();
        let radius = rng.random_range(1.0..5.0);
        let g = UniquenessGraph::from_nodes(nodes.clone());
        let poses: Vec<Pose> = means.iter().map(|&(x, y)| Pose::new(x, y, 0.0)).collect();
        let b = Belief::uniform(&poses, Matrix3::identity() * 0.01);
        match select_targets(&b, &g, radius) {
            Ok(t) => {
                assert_eq!(t, brute_force_targets(&nodes, &means, radius));
                compared += 1;
            }
            Err(PlannerError::EmptyNeighborhood { mode, .. }) => {
                assert!(brute_force_targets(&nodes, &means, radius)[mode] == usize::MAX);
            }
            Err(e) => panic!("{e}"),
        }
    }
}

pub const C_FAIL: f64 = 1e6;
pub const DT: f64 = 0.1;

pub fn toy_world(wall_x: Option<f64>) -> Environment {
    let obstacles = wall_x
        .map(|x| vec![Polygon::rect(x, 0.0, x + 0.5, 4.0)])
        .unwrap_or_default();
    Environment::new(
        Bounds::new(0.0, 0.0, 24.0, 4.0),
        obstacles,
        vec![
            Landmark::new(1, 5.0, 3.5),
            Landmark::new(1, 15.0, 3.5),
            Landmark::new(7, 8.5, 3.5),
        ],
        0.2,
    )
    .unwrap()
}

pub fn toy_filter() -> MhtFilter {
    MhtFilter::new(FilterConfig {
        sensor: ObsNoiseParams {
            eta_r: 0.01,
            eta_theta: 0.005,
            sigma_b_r: 0.05,
            sigma_b_theta: 0.02,
            max_range: 2.0,
            fov: std::f64::consts::TAU,
        },
        motion: MotionNoise::diagonal(0.01, 0.01),
        gate: 13.8,
        gamma_scale: 3.0,
        delta_w: 0.01,
        w_loc: 0.99,
        merge_distance: None,
        ekf_iterations: 1,
    })
}

pub fn toy_belief() -> Belief {
    Belief::new(vec![
        GaussianMode::new(
            10,
            Pose::new(5.0, 2.0, 0.0),
            Matrix3::identity() * 1e-4,
            0.6,
        ),
        GaussianMode::new(
            20,
            Pose::new(15.0, 2.0, 0.0),
            Matrix3::identity() * 1e-4,
            0.4,
        ),
    ])
}

/// Drives straight along +x at 0.5 m/s from mode 10's mean.
pub fn straight_policy(steps: usize) -> Policy {
    let u = Control::new(0.5, 0.0);
    let mut x = Pose::new(5.0, 2.0, 0.0);
    let mut waypoints = Vec::new();
    for _ in 0..steps {
        waypoints.push(Waypoint {
            pose: x,
            control: u,
            dt: DT,
        });
        x = propagate(&x, &u, &Vector2::zeros(), DT);
    }
    Policy {
        mode_id: 10,
        mode_index: 0,
        target_node: 0,
        waypoints,
        gains: TrackingGains::default(),
    }
}

pub fn limits() -> ControlLimits {
    ControlLimits {
        v_max: 0.5,
        omega_max: 1.0,
    }
}

/// Step-by-step most-likely rollout from each start mode, accumulating the
/// weighted gain by hand.
pub fn hand_rollout(
    b: &Belief,
    p: &Policy,
    env: &Environment,
    f: &MhtFilter,
) -> (f64, Vec<f64>, Vec<Option<usize>>) {
    let mut total = 0.0;
    let mut per_start = Vec::new();
    let mut collisions = Vec::new();
    for start in &b.modes {
        let mut truth = start.mean;
        let mut cur = b.clone();
        let mut t_fail = None;
        for k in 0..p.len() {
            if cur.max_weight() >= f.config.w_loc {
                break;
            }
            let est = cur
                .position_of(p.mode_id)
                .unwrap_or_else(|| cur.argmax().unwrap());
            let u = feedback_control(p, &cur.modes[est].mean, k, &limits());
            truth = propagate(&truth, &u, &Vector2::zeros(), DT);
            let z = observe::<ChaCha8Rng>(env, &truth, &f.config.sensor, None);
            cur = f.step(env, &cur, &u, &z, DT).belief;
            if cur.modes.iter().any(|m| !env.is_free(&m.mean)) {
                t_fail = Some(k + 1);
                break;
            }
        }
        let mut gain = (b.len() - cur.len()) as f64;
        if let Some(t) = t_fail {
            gain -= C_FAIL / t as f64;
        }
        total += start.weight * gain;
        per_start.push(gain);
        collisions.push(t_fail);
    }
    (total, per_start, collisions)
}

pub fn params() -> GainParams {
    GainParams {
        c_fail: C_FAIL,
        dt: DT,
        limits: limits(),
    }
}

pub fn gain_matches_hand_rollout_without_collision() {
    let env = toy_world(None);
    let f = toy_filter();
    let b = toy_belief();
    let p = straight_policy(80);
    let r = expected_information_gain(&b, &p, 0, &env, &f, &params());
    let (total, per_start, collisions) = hand_rollout(&b, &p, &env, &f);
    assert_eq!(r.delta_i, total);
    assert_eq!(r.per_start, per_start);
    assert_eq!(r.collision_step, collisions);
    // both starts end with one mode after the unique landmark comes into view
    assert_eq!(per_start, vec![1.0, 1.0]);
    assert_eq!(r.delta_i, 1.0);
    assert_eq!(r.mode_weight, 0.6);
}

pub fn gain_matches_hand_rollout_with_collision() {
    // mode 20 sweeps x from 15 and its disc first touches the wall at 17.03
    // once its centre passes 16.83, which is step 37 at 5 cm per step
    let env = toy_world(Some(17.03));
    let f = toy_filter();
    let b = toy_belief();
    let p = straight_policy(80);
    let r = expected_information_gain(&b, &p, 0, &env, &f, &params());
    let (total, per_start, collisions) = hand_rollout(&b, &p, &env, &f);
    assert_eq!(r.delta_i, total);
    assert_eq!(r.per_start, per_start);
    assert_eq!(collisions, vec![Some(37), Some(37)]);
    assert_eq!(r.collision_step, collisions);
    let expect = -C_FAIL / 37.0;
    assert_eq!(per_start, vec![expect, expect]);
    assert!((r.delta_i - expect).abs() < 1e-9);
}
