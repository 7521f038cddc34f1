//! Scene files: a TOML document plus a binary depth file beside it.
//!
//! ```toml
//! format = "sdi-scene/1"
//! name = "drawer"
//! depth_file = "drawer.depth"
//!
//! [camera]
//! fx = 300.0
//! fy = 300.0
//! cx = 159.5
//! cy = 119.5
//! rotation = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]
//! translation = [0.0, 0.0, 0.0]
//!
//! [limits]
//! z = [0.15, 0.42]
//! omega = [0.0, 6.283185307179586]
//!
//! [[sketch]]
//! label = "roi"
//! vertices = [[10.0, 10.0], [40.0, 10.0], [40.0, 30.0]]
//! ```

use std::path::{Path, PathBuf};

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use super::scenes::{GroundTruth, SceneSpec};
use crate::error::{Error, Result};
use crate::geometry::{CameraModel, DepthGrid, Label, Sketch};

pub const SCENE_FORMAT: &str = "sdi-scene/1";

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SceneFile {
    format: String,
    name: String,
    depth_file: String,
    camera: CameraBlock,
    limits: LimitsBlock,
    #[serde(default)]
    sketch: Vec<SketchBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    ground_truth: Option<GroundTruth>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CameraBlock {
    fx: f64,
    fy: f64,
    cx: f64,
    cy: f64,
    rotation: [[f64; 3]; 3],
    translation: [f64; 3],
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LimitsBlock {
    z: [f64; 2],
    omega: [f64; 2],
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SketchBlock {
    label: String,
    vertices: Vec<[f64; 2]>,
}

/// Serializes the scene document; the depth payload is referenced by `depth_file`.
pub fn scene_to_toml(scene: &SceneSpec, depth_file: &str) -> Result<String> {
    let r = scene.camera.rotation();
    let t = scene.camera.translation();
    let file = SceneFile {
        format: SCENE_FORMAT.into(),
        name: scene.name.clone(),
        depth_file: depth_file.into(),
        camera: CameraBlock {
            fx: scene.camera.fx(),
            fy: scene.camera.fy(),
            cx: scene.camera.cx(),
            cy: scene.camera.cy(),
            rotation: [0, 1, 2].map(|i| [r[(i, 0)], r[(i, 1)], r[(i, 2)]]),
            translation: [t.x, t.y, t.z],
        },
        limits: LimitsBlock { z: [scene.z_limits.0, scene.z_limits.1], omega: [scene.omega_limits.0, scene.omega_limits.1] },
        sketch: scene
            .sketches
            .iter()
            .map(|s| SketchBlock { label: s.label().to_string(), vertices: s.vertices().iter().map(|&(u, v)| [u, v]).collect() })
            .collect(),
        ground_truth: scene.ground_truth.clone(),
    };
    toml::to_string(&file).map_err(|e| Error::format("scene", e.to_string()))
}

/// Parses a scene document, reading its depth payload via `load_depth`.
pub fn scene_from_toml(text: &str, load_depth: impl FnOnce(&str) -> Result<DepthGrid>) -> Result<SceneSpec> {
    let file: SceneFile = toml::from_str(text).map_err(|e| Error::format("scene", e.to_string().replace('\n', " ")))?;
    if file.format != SCENE_FORMAT {
        return Err(Error::format("scene", format!("unsupported format {:?}", file.format)));
    }
    let c = &file.camera;
    let rotation = Matrix3::from_fn(|i, j| c.rotation[i][j]);
    let camera = CameraModel::new(c.fx, c.fy, c.cx, c.cy, rotation, Vector3::from(c.translation))?;
    let depth = load_depth(&file.depth_file)?;
    let sketches = file
        .sketch
        .iter()
        .map(|s| {
            let label: Label = s.label.parse()?;
            Ok(Sketch::unchecked(s.vertices.iter().map(|v| (v[0], v[1])).collect(), label))
        })
        .collect::<Result<Vec<_>>>()?;
    let scene = SceneSpec {
        name: file.name,
        camera,
        depth,
        sketches,
        z_limits: (file.limits.z[0], file.limits.z[1]),
        omega_limits: (file.limits.omega[0], file.limits.omega[1]),
        ground_truth: file.ground_truth,
    };
    scene.validate()?;
    Ok(scene)
}

/// Writes `path` and the depth file `<stem>.depth` next to it.
pub fn write_scene(scene: &SceneSpec, path: impl AsRef<Path>) -> Result<PathBuf> {
    let path = path.as_ref();
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("scene");
    let depth_name = format!("{stem}.depth");
    let depth_path = path.with_file_name(&depth_name);
    scene.depth.write(&depth_path)?;
    let text = scene_to_toml(scene, &depth_name)?;
    std::fs::write(path, text).map_err(|e| Error::io(path, e))?;
    Ok(depth_path)
}

/// Reads a scene file; `depth_file` resolves relative to the scene file.
pub fn read_scene(path: impl AsRef<Path>) -> Result<SceneSpec> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
    scene_from_toml(&text, |name| DepthGrid::read(dir.join(name)))
}
