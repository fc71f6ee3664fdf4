//! Ground-truth simulated environment.

mod generate;
mod geodesic;
mod scene;
mod sensor;

pub use generate::{generate_scene, generate_scene_with_layout, object_template, Layout, SceneParams};
pub use geodesic::geodesic_shortest_length;
pub(crate) use geodesic::NEIGHBORS;
pub use scene::{step_action, Action, ObjectInstance, Occupant, Scene, StepOutcome, DEFAULT_WALL_HEIGHT};
pub use sensor::{render, render_depth, render_isolated, render_semantic, CameraIntrinsics, DepthImage, SemanticImage};

#[cfg(test)]
pub(crate) use scene::test_scenes;
