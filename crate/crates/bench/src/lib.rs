//! Shared fixtures for the navigation benchmarks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use objnav_core::episode::EpisodeSpec;
use objnav_core::planner::Costmap;
use objnav_core::world::{generate_scene, render_depth, DepthImage, SceneParams};
use objnav_core::{CellRect, Config, Pose, Scene};

pub const OBJECTS: [&str; 3] = ["bed", "chair", "plant"];

pub fn scene(seed: u64, rooms: usize, size: usize) -> Scene {
    generate_scene(seed, &SceneParams::new(rooms, size, size, &OBJECTS)).expect("fixture scene generates")
}

/// Random obstacle field with the top-left and bottom-right corners kept free.
pub fn random_costmap(seed: u64, size: i64, density: f64) -> Costmap {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let bits: Vec<bool> = (0..size * size).map(|_| rng.gen_bool(density)).collect();
    Costmap::from_fn(CellRect::new(0, 0, size, size), 0.05, |c| {
        let corner = (c.row < 2 && c.col < 2) || (c.row >= size - 2 && c.col >= size - 2);
        !corner && bits[(c.row * size + c.col) as usize]
    })
}

/// A depth frame from the sampled start of `scene`.
pub fn start_frame(scene: &Scene, goal: &str, config: &Config) -> (Pose, DepthImage) {
    let spec = EpisodeSpec::sample(scene, goal, 1, config).expect("fixture goal is reachable");
    let depth = render_depth(scene, &spec.start, &config.intrinsics());
    (spec.start, depth)
}
