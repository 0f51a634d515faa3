//! Procedural maps: the symmetric eight-room maze and randomized rows of
//! identical rooms, each with one private nook holding a distinctive landmark.

use rand::Rng;

use super::{Bounds, Environment, Landmark, Polygon, Pose};

const WALL: f64 = 0.1;
const HALF: f64 = WALL / 2.0;

/// Layout constants of the eight-room maze.
pub mod eight_room {
    pub const WIDTH: f64 = 16.0;
    pub const HEIGHT: f64 = 12.0;
    pub const ROOM: f64 = 4.0;
    pub const DOOR_HALF_WIDTH: f64 = 0.6;
    /// Central block pair; the passage between them is `PASSAGE_Y`.
    pub const BLOCK_X: (f64, f64) = (6.0, 10.0);
    pub const LOWER_BLOCK_Y: (f64, f64) = (4.9, 5.7);
    pub const UPPER_BLOCK_Y: (f64, f64) = (6.3, 7.1);
    pub const PASSAGE_Y: (f64, f64) = (5.7, 6.3);
    pub const NOTCH_HALF_WIDTH: f64 = 0.2;
    pub const NOTCH_DEPTH: f64 = 0.3;
    /// Signatures that appear exactly once in the maze.
    pub const UNIQUE_IDS: [u32; 4] = [40, 41, 42, 43];
    pub const ROBOT_RADIUS: f64 = 0.12;
}

/// Room index of a position in the eight-room maze: 0..4 are the top row
/// left to right, 4..8 the bottom row left to right; `None` in the hallway.
pub fn eight_room_index(x: f64, y: f64) -> Option<usize> {
    use eight_room::*;
    let col = ((x / ROOM).floor() as i64).clamp(0, 3) as usize;
    if y >= 2.0 * ROOM + HALF {
        Some(col)
    } else if y <= ROOM - HALF {
        Some(4 + col)
    } else {
        None
    }
}

/// True when (x, y) lies inside the unique-landmark passage or its notches.
pub fn in_eight_room_passage(x: f64, y: f64) -> bool {
    use eight_room::*;
    x >= BLOCK_X.0
        && x <= BLOCK_X.1
        && y >= PASSAGE_Y.0 - NOTCH_DEPTH
        && y <= PASSAGE_Y.1 + NOTCH_DEPTH
}

/// Builds the eight-room maze.
///
/// Four rooms along the top and four along the bottom open onto a shared
/// hallway. Every room carries the same interior landmark layout, and the
/// bottom row is the half-turn image of the top row about the map centre, so
/// interior views cannot tell the rooms apart. Landmarks on the hallway side
/// repeat under the half-turn only, which leaves pairs of rooms ambiguous;
/// four single-use landmarks recessed into the walls of the central passage
/// break that last symmetry.
pub fn eight_room_maze() -> Environment {
    use eight_room::*;
    let mut walls: Vec<(f64, f64, f64, f64)> = Vec::new();
    let mut top_landmarks: Vec<(u32, f64, f64)> = Vec::new();

    // top half; the bottom half is generated by the half-turn below
    walls.push((0.0, HEIGHT - HALF, WIDTH, HEIGHT));
    walls.push((0.0, 2.0 * ROOM, HALF, HEIGHT - HALF));
    walls.push((WIDTH - HALF, 2.0 * ROOM, WIDTH, HEIGHT - HALF));
    for j in 1..4 {
        let x = ROOM * j as f64;
        walls.push((x - HALF, 2.0 * ROOM + HALF, x + HALF, HEIGHT - HALF));
    }
    // front wall with doors
    let mut x = 0.0;
    for j in 0..4 {
        let door_c = ROOM * j as f64 + ROOM / 2.0;
        walls.push((
            x,
            2.0 * ROOM - HALF,
            door_c - DOOR_HALF_WIDTH,
            2.0 * ROOM + HALF,
        ));
        x = door_c + DOOR_HALF_WIDTH;
    }
    walls.push((x, 2.0 * ROOM - HALF, WIDTH, 2.0 * ROOM + HALF));
    // hallway end wall; its half-turn image closes the other end
    walls.push((0.0, ROOM + HALF, HALF, 2.0 * ROOM - HALF));

    for j in 0..4 {
        let x0 = ROOM * j as f64;
        let front = 2.0 * ROOM + HALF;
        let back = HEIGHT - HALF;
        // interior layout shared by every room
        top_landmarks.push((1, x0 + 1.0, back));
        top_landmarks.push((2, x0 + 2.8, back));
        top_landmarks.push((3, x0 + HALF, 10.8));
        top_landmarks.push((4, x0 + ROOM - HALF, 9.6));
        top_landmarks.push((5, x0 + 0.7, front));
        // hallway face of the front wall, one signature per column
        top_landmarks.push((10 + j as u32 + 1, x0 + 3.2, 2.0 * ROOM - HALF));
    }
    // outer faces of the upper block, and the hallway end wall
    // kept out of the view cones through the doors from every room corner
    top_landmarks.push((20, 7.4, UPPER_BLOCK_Y.1));
    top_landmarks.push((21, 8.4, UPPER_BLOCK_Y.1));
    top_landmarks.push((30, HALF, 6.6));
    top_landmarks.push((31, HALF, 4.9));

    let rot = |x: f64, y: f64| (WIDTH - x, HEIGHT - y);
    let mut obstacles: Vec<Polygon> = Vec::new();
    for &(x0, y0, x1, y1) in &walls {
        obstacles.push(Polygon::rect(x0, y0, x1, y1));
        let (a0, b0) = rot(x1, y1);
        let (a1, b1) = rot(x0, y0);
        obstacles.push(Polygon::rect(a0, b0, a1, b1));
    }
    // each passage landmark sits at the back of a notch in a block face, so
    // it is only in view from inside the passage
    let lower_notches = [(40, 7.0), (41, 9.0)];
    let upper_notches = [(42, 7.5), (43, 8.5)];
    let lower_back = LOWER_BLOCK_Y.1 - NOTCH_DEPTH;
    let upper_back = UPPER_BLOCK_Y.0 + NOTCH_DEPTH;
    obstacles.push(Polygon::rect(
        BLOCK_X.0,
        LOWER_BLOCK_Y.0,
        BLOCK_X.1,
        lower_back,
    ));
    obstacles.push(Polygon::rect(
        BLOCK_X.0,
        upper_back,
        BLOCK_X.1,
        UPPER_BLOCK_Y.1,
    ));
    for (notches, y0, y1) in [
        (lower_notches, lower_back, LOWER_BLOCK_Y.1),
        (upper_notches, UPPER_BLOCK_Y.0, upper_back),
    ] {
        let mut x = BLOCK_X.0;
        for &(_, c) in &notches {
            obstacles.push(Polygon::rect(x, y0, c - NOTCH_HALF_WIDTH, y1));
            x = c + NOTCH_HALF_WIDTH;
        }
        obstacles.push(Polygon::rect(x, y0, BLOCK_X.1, y1));
    }

    let mut landmarks: Vec<Landmark> = Vec::new();
    for &(id, x, y) in &top_landmarks {
        landmarks.push(Landmark::new(id, x, y));
        let (rx, ry) = rot(x, y);
        landmarks.push(Landmark::new(id, rx, ry));
    }
    // not repeated under the half-turn
    for (id, x) in lower_notches {
        landmarks.push(Landmark::new(id, x, lower_back));
    }
    for (id, x) in upper_notches {
        landmarks.push(Landmark::new(id, x, upper_back));
    }

    Environment::new(
        Bounds::new(0.0, 0.0, WIDTH, HEIGHT),
        obstacles,
        landmarks,
        ROBOT_RADIUS,
    )
    .expect("eight-room maze is valid")
}

/// Default start pose: back corner of the bottom-right room, where no
/// landmark outside the room is in line of sight.
pub fn eight_room_start() -> Pose {
    Pose::new(15.3, 0.9, 2.4)
}

/// The images of `p` in all eight rooms, ordered by room index, for a pose
/// `p` in one of the bottom rooms.
pub fn eight_room_equivalents(p: &Pose) -> Vec<Pose> {
    use eight_room::*;
    let col = ((p.x / ROOM).floor() as i64).clamp(0, 3) as f64;
    let bottom: Vec<Pose> = (0..4)
        .map(|j| Pose::new(p.x + ROOM * (j as f64 - col), p.y, p.theta))
        .collect();
    let mut out: Vec<Pose> = bottom
        .iter()
        .rev()
        .map(|b| {
            Pose::new(
                WIDTH - b.x,
                HEIGHT - b.y,
                super::wrap_angle(b.theta + std::f64::consts::PI),
            )
        })
        .collect();
    out.extend(bottom);
    out
}

/// A row of identical rooms under a shared corridor.
#[derive(Debug, Clone)]
pub struct RoomRow {
    pub env: Environment,
    pub room_width: f64,
    pub room_depth: f64,
    pub rooms: usize,
    /// Start pose in room 0; its translates are the initial hypotheses.
    pub start: Pose,
    /// Signature of the distinctive nook landmark of room `j` is
    /// `DISTINCTIVE_BASE + j`.
    pub distinctive_ids: Vec<u32>,
}

pub const DISTINCTIVE_BASE: u32 = 100;

impl RoomRow {
    /// The translate of `start` in every room.
    pub fn hypotheses(&self) -> Vec<Pose> {
        (0..self.rooms)
            .map(|j| {
                Pose::new(
                    self.start.x + self.room_width * j as f64,
                    self.start.y,
                    self.start.theta,
                )
            })
            .collect()
    }
}

/// Randomized map where every room owns one distinctive landmark that is
/// hidden from the start pose but reachable: it sits at the back of a nook
/// screened by a divider wall.
pub fn random_room_row<R: Rng + ?Sized>(rng: &mut R, rooms: usize) -> RoomRow {
    assert!(rooms >= 1);
    let w: f64 = rng.random_range(3.6..4.6);
    let d: f64 = rng.random_range(3.2..4.2);
    let corridor: f64 = rng.random_range(1.6..2.2);
    let width = w * rooms as f64;
    let height = d + corridor;
    let door_c_rel = rng.random_range(0.22..0.34) * w;
    let divider_rel = 0.62 * w;
    let divider_top = 0.6 * d;

    let mut obstacles = vec![
        Polygon::rect(0.0, 0.0, width, HALF),
        Polygon::rect(0.0, height - HALF, width, height),
        Polygon::rect(0.0, HALF, HALF, height - HALF),
        Polygon::rect(width - HALF, HALF, width, height - HALF),
    ];
    let mut landmarks = Vec::new();
    let a1 = rng.random_range(0.15..0.45);
    let b2 = rng.random_range(0.2..0.8);
    let c3 = rng.random_range(0.2..0.8);
    let e4 = rng.random_range(0.1..0.3);
    for j in 0..rooms {
        let x0 = w * j as f64;
        if j > 0 {
            obstacles.push(Polygon::rect(x0 - HALF, HALF, x0 + HALF, d - HALF));
        }
        let door_c = x0 + door_c_rel;
        let left = if j == 0 { HALF } else { x0 };
        obstacles.push(Polygon::rect(left, d - HALF, door_c - 0.5, d + HALF));
        let right = if j + 1 == rooms { width - HALF } else { x0 + w };
        obstacles.push(Polygon::rect(door_c + 0.5, d - HALF, right, d + HALF));
        obstacles.push(Polygon::rect(
            x0 + divider_rel - HALF,
            HALF,
            x0 + divider_rel + HALF,
            divider_top,
        ));
        landmarks.push(Landmark::new(1, x0 + HALF + a1 * divider_rel, HALF));
        landmarks.push(Landmark::new(2, x0 + HALF, HALF + b2 * (d - WALL)));
        landmarks.push(Landmark::new(
            3,
            x0 + divider_rel - HALF,
            HALF + c3 * (divider_top - HALF),
        ));
        landmarks.push(Landmark::new(4, x0 + (0.7 + e4) * w, d - HALF));
        landmarks.push(Landmark::new(
            DISTINCTIVE_BASE + j as u32,
            x0 + 0.5 * (divider_rel + w),
            HALF,
        ));
        landmarks.push(Landmark::new(50, x0 + 0.5 * w, height - HALF));
        landmarks.push(Landmark::new(51, x0 + door_c_rel + 1.0, d + HALF));
    }
    let env = Environment::new(
        Bounds::new(0.0, 0.0, width, height),
        obstacles,
        landmarks,
        0.12,
    )
    .expect("room row is valid");

    // start low in the main part, behind the divider relative to the nook
    let start = loop {
        let p = Pose::new(
            rng.random_range(0.4..(divider_rel - 0.4)),
            rng.random_range(0.4..(0.5 * d)),
            rng.random_range(-std::f64::consts::PI..std::f64::consts::PI),
        );
        if env.clearance(&p.position()) > 0.3 {
            break p;
        }
    };
    RoomRow {
        env,
        room_width: w,
        room_depth: d,
        rooms,
        start,
        distinctive_ids: (0..rooms as u32).map(|j| DISTINCTIVE_BASE + j).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeMap;

    #[test]
    fn maze_has_eight_congruent_rooms() {
        let env = eight_room_maze();
        let mut per_room: BTreeMap<usize, Vec<u32>> = BTreeMap::new();
        for l in env.landmarks() {
            if let Some(r) = eight_room_index(l.position.x, l.position.y) {
                per_room.entry(r).or_default().push(l.id);
            }
        }
        assert_eq!(per_room.len(), 8);
        for ids in per_room.values() {
            let mut ids = ids.clone();
            ids.sort();
            assert_eq!(ids, vec![1, 2, 3, 4, 5]);
        }
    }

    #[test]
    fn passage_ids_are_unique() {
        let env = eight_room_maze();
        for id in eight_room::UNIQUE_IDS {
            let hits: Vec<_> = env.landmarks().iter().filter(|l| l.id == id).collect();
            assert_eq!(hits.len(), 1);
            let p = hits[0].position;
            assert!(p.x > eight_room::BLOCK_X.0 && p.x < eight_room::BLOCK_X.1);
            assert!(p.y > eight_room::LOWER_BLOCK_Y.0 && p.y < eight_room::UPPER_BLOCK_Y.1);
        }
    }

    #[test]
    fn passage_landmarks_hidden_outside_passage() {
        let env = eight_room_maze();
        let unique: Vec<_> = env
            .landmarks()
            .iter()
            .filter(|l| eight_room::UNIQUE_IDS.contains(&l.id))
            .collect();
        let mut seen_inside = 0;
        for i in 0..320 {
            for j in 0..240 {
                let p = Pose::new(0.025 + 0.05 * i as f64, 0.025 + 0.05 * j as f64, 0.0);
                if !env.is_free(&p) {
                    continue;
                }
                let visible = unique
                    .iter()
                    .any(|l| env.line_of_sight(&nalgebra::Point2::new(p.x, p.y), &l.position));
                if in_eight_room_passage(p.x, p.y) {
                    seen_inside += visible as usize;
                } else {
                    assert!(!visible, "passage landmark visible from ({}, {})", p.x, p.y);
                }
            }
        }
        assert!(seen_inside > 0);
    }

    #[test]
    fn start_pose_is_free_and_in_corner_room() {
        let env = eight_room_maze();
        let s = eight_room_start();
        assert!(env.is_free(&s));
        assert_eq!(eight_room_index(s.x, s.y), Some(7));
    }

    #[test]
    fn start_views_agree_in_every_room() {
        let env = eight_room_maze();
        let sensor = crate::models::ObsNoiseParams {
            eta_r: 0.01,
            eta_theta: 0.005,
            sigma_b_r: 0.05,
            sigma_b_theta: 0.02,
            max_range: 5.0,
            fov: std::f64::consts::TAU,
        };
        let eq = eight_room_equivalents(&eight_room_start());
        assert_eq!(eq.len(), 8);
        let view = |p: &Pose| {
            let mut v: Vec<(u32, i64, i64)> =
                crate::models::observe::<rand_chacha::ChaCha8Rng>(&env, p, &sensor, None)
                    .iter()
                    .map(|o| {
                        (
                            o.landmark_id,
                            (o.range * 1e6).round() as i64,
                            (o.bearing * 1e6).round() as i64,
                        )
                    })
                    .collect();
            v.sort();
            v
        };
        let base = view(&eq[7]);
        assert_eq!(base.len(), 5);
        for (r, p) in eq.iter().enumerate() {
            assert!(env.is_free(p));
            assert_eq!(eight_room_index(p.x, p.y), Some(r));
            assert_eq!(view(p), base, "room {r}");
        }
    }

    #[test]
    fn room_row_hypotheses_are_free() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for n in 2..=4 {
            let row = random_room_row(&mut rng, n);
            for h in row.hypotheses() {
                assert!(row.env.is_free(&h));
            }
        }
    }
}
