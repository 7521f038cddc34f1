//! Deterministic synthetic shapes and depth scenes.

mod scene_io;
mod scenes;
mod shapes;

pub use scene_io::{read_scene, scene_from_toml, scene_to_toml, write_scene, SCENE_FORMAT};
pub use scenes::{
    ball_points, generate_scene, render_depth, scene_camera, Aabb, GroundTruth, SceneKind, SceneSpec, FOCAL_LENGTH,
    IMAGE_HEIGHT, IMAGE_WIDTH,
};
pub use shapes::{generate_shape, star_outline, ShapeKind, ShapeSpec, DEFAULT_SHAPE_COUNT, DEFAULT_SHAPE_NOISE};
