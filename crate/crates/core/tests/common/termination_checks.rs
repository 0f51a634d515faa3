use m3p_core::belief::Belief;
use m3p_core::sim::{run_scenario_from, Scenario, ScenarioConfig};
use m3p_core::uniqueness_graph::UniquenessGraph;
use m3p_core::world::maze::random_room_row;
use nalgebra::Matrix3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const MAPS: usize = 50;

pub fn config(seed: u64, start: [f64; 3]) -> ScenarioConfig {
    ScenarioConfig::parse(&format!(
        r#"
seed = {seed}
map = "unused.toml"
[start]
pose = [{}, {}, {}]
[motion_noise]
sigma_v = 0.01
sigma_omega = 0.01
[truth]
motion_scale = 0.0
sensor_scale = 0.0
[filter]
gamma_scale = 3.0
[planner]
neighborhood_radius = 3.0
rrt_iterations = 1500
[phase1]
dwell = 5
"#,
        start[0], start[1], start[2]
    ))
    .unwrap()
}

pub fn zero_noise_rows_localize_within_n_minus_one_epochs() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let mut failures = Vec::new();
    for k in 0..MAPS {
        let rooms = rng.random_range(2..=5);
        let row = random_room_row(&mut rng, rooms);
        let mut grng = ChaCha8Rng::seed_from_u64(k as u64);
        let graph = UniquenessGraph::build(
            &row.env,
            150 * rooms,
            &m3p_core::sim::default_sensor(),
            &mut grng,
        )
        .unwrap();
        let s = row.start;
        let scenario = Scenario::with_parts(
            config(k as u64, [s.x, s.y, s.theta]),
            row.env.clone(),
            graph,
        )
        .unwrap();
        let b0 = Belief::uniform(&row.hypotheses(), Matrix3::identity() * 1e-4);
        let r = run_scenario_from(&scenario, b0);
        let ok = r.summary.converged
            && r.summary.phase1_modes == rooms
            // at most n - 1 epochs
            && r.summary.epochs < rooms
            && (r.summary.final_estimate.position() - r.summary.final_truth.position()).norm()
                < 0.1;
        if !ok {
            failures.push((k, rooms, r.summary.clone()));
        }
    }
    assert!(failures.is_empty(), "{failures:#?}");
}
