//! Prints the eight-room maze in map-file format.
//!
//! cargo run -p m3p-core --example write_maze > maps/maze8.toml

fn main() {
    print!(
        "{}",
        m3p_core::world::write_map(&m3p_core::world::maze::eight_room_maze())
    );
}
