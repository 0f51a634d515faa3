//! Shared fixtures for the benchmarks: the eight-room maze with a belief of
//! one mode per room.

use m3p_core::belief::{Belief, MhtFilter};
use m3p_core::sim::ScenarioConfig;
use m3p_core::world::maze::{eight_room_equivalents, eight_room_maze, eight_room_start};
use m3p_core::world::Environment;
use nalgebra::Matrix3;

pub struct Fixture {
    pub env: Environment,
    pub config: ScenarioConfig,
    pub filter: MhtFilter,
    pub belief: Belief,
}

pub fn maze_fixture() -> Fixture {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/../../scenarios/maze8.toml");
    let config = ScenarioConfig::load(path).expect("maze scenario");
    let filter = MhtFilter::new(config.filter_config());
    let belief = Belief::uniform(
        &eight_room_equivalents(&eight_room_start()),
        Matrix3::identity() * 1e-3,
    );
    Fixture {
        env: eight_room_maze(),
        config,
        filter,
        belief,
    }
}
