use std::f64::consts::TAU;
use std::fmt;
use std::str::FromStr;

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::geometry::{project_sketch, CameraModel, DepthGrid, Label, PointSet, Sketch};

pub const IMAGE_WIDTH: usize = 480;
pub const IMAGE_HEIGHT: usize = 360;
pub const FOCAL_LENGTH: f64 = 300.0;
/// Fraction of each patch side trimmed before sketching, keeping sketch
/// edges off the patch borders; at most [`MAX_SKETCH_INSET`] meters.
const SKETCH_INSET: f64 = 0.1;
const MAX_SKETCH_INSET: f64 = 0.04;
/// Maximum seeded jitter of sketch vertices, in pixels.
const SKETCH_JITTER: f64 = 0.25;

/// Axis-aligned box; a zero-height box is a horizontal patch.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Aabb {
    pub min: [f64; 3],
    pub max: [f64; 3],
}

impl Aabb {
    pub fn new(min: [f64; 3], max: [f64; 3]) -> Self {
        Self { min, max }
    }

    pub fn center(&self) -> Vector3<f64> {
        Vector3::from_fn(|i, _| 0.5 * (self.min[i] + self.max[i]))
    }

    pub fn contains(&self, p: &Vector3<f64>, tol: f64) -> bool {
        (0..3).all(|i| p[i] >= self.min[i] - tol && p[i] <= self.max[i] + tol)
    }

    /// Entry distance of the ray `origin + t dir`, if it hits.
    pub fn ray_entry(&self, origin: &Vector3<f64>, dir: &Vector3<f64>) -> Option<f64> {
        let (mut t0, mut t1) = (0.0f64, f64::INFINITY);
        for i in 0..3 {
            if dir[i].abs() < 1e-15 {
                if origin[i] < self.min[i] || origin[i] > self.max[i] {
                    return None;
                }
                continue;
            }
            let a = (self.min[i] - origin[i]) / dir[i];
            let b = (self.max[i] - origin[i]) / dir[i];
            t0 = t0.max(a.min(b));
            t1 = t1.min(a.max(b));
        }
        (t0 <= t1 && t0 > 0.0).then_some(t0)
    }

    /// The four corners of the top face, counter-clockwise seen from above.
    fn top_corners(&self, inset: f64) -> [Vector3<f64>; 4] {
        let dx = ((self.max[0] - self.min[0]) * inset).min(MAX_SKETCH_INSET);
        let dy = ((self.max[1] - self.min[1]) * inset).min(MAX_SKETCH_INSET);
        let (x0, x1, y0, y1, z) = (self.min[0] + dx, self.max[0] - dx, self.min[1] + dy, self.max[1] - dy, self.max[2]);
        [Vector3::new(x0, y0, z), Vector3::new(x1, y0, z), Vector3::new(x1, y1, z), Vector3::new(x0, y1, z)]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SceneKind {
    TablesA,
    TablesB,
    Drawer,
    Mixed,
}

impl SceneKind {
    pub const ALL: [SceneKind; 4] = [Self::TablesA, Self::TablesB, Self::Drawer, Self::Mixed];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::TablesA => "tables-a",
            Self::TablesB => "tables-b",
            Self::Drawer => "drawer",
            Self::Mixed => "mixed",
        }
    }
}

impl fmt::Display for SceneKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SceneKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL.into_iter().find(|k| k.as_str() == s).ok_or_else(|| Error::Config(format!("unknown scene {s:?}")))
    }
}

/// Known world geometry behind a generated scene.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct GroundTruth {
    /// Solid furniture boxes.
    pub boxes: Vec<Aabb>,
    /// Horizontal ROI patches (zero height).
    pub roi: Vec<Aabb>,
    /// Floor rectangle the base may occupy.
    pub permissible: Aabb,
}

/// Everything the pipeline needs: image data, camera, sketches and limits.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneSpec {
    pub name: String,
    pub camera: CameraModel,
    pub depth: DepthGrid,
    pub sketches: Vec<Sketch>,
    pub z_limits: (f64, f64),
    pub omega_limits: (f64, f64),
    pub ground_truth: Option<GroundTruth>,
}

impl SceneSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.z_limits.0 <= self.z_limits.1) {
            return Err(Error::InvalidScene("z limits must satisfy min <= max".into()));
        }
        if !(self.omega_limits.0 <= self.omega_limits.1) {
            return Err(Error::InvalidScene("omega limits must satisfy min <= max".into()));
        }
        if !self.sketches.iter().any(|s| s.label() == Label::RegionOfInterest) {
            return Err(Error::InvalidScene("scene has no ROI sketch".into()));
        }
        for s in &self.sketches {
            s.validate(self.depth.width(), self.depth.height())?;
        }
        Ok(())
    }

    fn project_label(&self, label: Label) -> Result<Option<PointSet>> {
        let sets = self
            .sketches
            .iter()
            .filter(|s| s.label() == label)
            .map(|s| project_sketch(&self.camera, &self.depth, s))
            .collect::<Result<Vec<_>>>()?;
        if sets.is_empty() {
            return Ok(None);
        }
        PointSet::merge(&sets).map(Some)
    }

    /// All ROI sketches back-projected and merged.
    pub fn roi_points(&self) -> Result<PointSet> {
        self.project_label(Label::RegionOfInterest)?.ok_or_else(|| Error::InvalidScene("scene has no ROI sketch".into()))
    }

    /// All permissible-region sketches back-projected and merged, if any.
    pub fn permissible_points(&self) -> Result<Option<PointSet>> {
        self.project_label(Label::Permissible)
    }

    /// ROI points of each sketch separately.
    pub fn roi_clusters(&self) -> Result<Vec<PointSet>> {
        self.sketches
            .iter()
            .filter(|s| s.label() == Label::RegionOfInterest)
            .map(|s| project_sketch(&self.camera, &self.depth, s))
            .collect()
    }
}

fn furniture_box(x: (f64, f64), y: (f64, f64), z: (f64, f64)) -> Aabb {
    Aabb::new([x.0, y.0, z.0], [x.1, y.1, z.1])
}

fn patch(x: (f64, f64), y: (f64, f64), z: f64) -> Aabb {
    Aabb::new([x.0, y.0, z], [x.1, y.1, z])
}

/// An open drawer centered at `x` whose bottom surface sits at `z`.
fn drawer(x: f64, z: f64) -> Vec<Aabb> {
    vec![
        furniture_box((x - 0.4, x + 0.4), (0.6, 1.0), (0.0, 0.65)),
        furniture_box((x - 0.3, x + 0.3), (0.2, 0.6), (z - 0.02, z)),
        furniture_box((x - 0.3, x + 0.3), (0.18, 0.2), (z - 0.02, z + 0.08)),
        furniture_box((x - 0.32, x - 0.3), (0.18, 0.6), (z - 0.02, z + 0.08)),
        furniture_box((x + 0.3, x + 0.32), (0.18, 0.6), (z - 0.02, z + 0.08)),
    ]
}

fn table(x: (f64, f64)) -> Aabb {
    furniture_box(x, (0.25, 0.85), (0.0, 0.45))
}

fn layout(kind: SceneKind) -> GroundTruth {
    match kind {
        SceneKind::TablesA => GroundTruth {
            boxes: vec![table((-0.8, -0.2)), table((0.2, 0.8))],
            roi: vec![patch((-0.65, -0.35), (0.3, 0.5), 0.45), patch((0.35, 0.65), (0.3, 0.5), 0.45)],
            permissible: patch((-0.9, 0.9), (-2.0, 0.1), 0.0),
        },
        SceneKind::TablesB => GroundTruth {
            boxes: vec![table((-1.65, -0.25)), table((0.25, 1.65))],
            roi: vec![patch((-1.55, -0.35), (0.3, 0.5), 0.45), patch((0.35, 1.55), (0.3, 0.5), 0.45)],
            permissible: patch((-1.4, 1.4), (-2.0, 0.1), 0.0),
        },
        SceneKind::Drawer => GroundTruth {
            boxes: drawer(0.0, 0.3),
            roi: vec![patch((-0.2, 0.2), (0.3, 0.5), 0.3)],
            permissible: patch((-0.7, 0.7), (-2.0, 0.05), 0.0),
        },
        SceneKind::Mixed => {
            let mut boxes = vec![table((-0.95, -0.35))];
            boxes.extend(drawer(0.6, 0.3));
            GroundTruth {
                boxes,
                roi: vec![patch((-0.75, -0.55), (0.3, 0.45), 0.45), patch((0.35, 0.85), (0.25, 0.55), 0.3)],
                permissible: patch((-1.1, 1.1), (-2.0, 0.1), 0.0),
            }
        }
    }
}

/// The fixed camera shared by all builtin scenes.
pub fn scene_camera() -> CameraModel {
    CameraModel::look_at(
        FOCAL_LENGTH,
        FOCAL_LENGTH,
        (IMAGE_WIDTH as f64 - 1.0) / 2.0,
        (IMAGE_HEIGHT as f64 - 1.0) / 2.0,
        Vector3::new(0.0, -3.2, 3.2),
        Vector3::new(0.0, -0.2, 0.2),
        Vector3::z(),
    )
    .expect("scene camera is valid")
}

/// Z-buffered depth of the floor plane `z = 0` and the given boxes.
pub fn render_depth(camera: &CameraModel, boxes: &[Aabb], width: usize, height: usize) -> Result<DepthGrid> {
    let origin = *camera.translation();
    let mut values = Vec::with_capacity(width * height);
    for v in 0..height {
        for u in 0..width {
            let dir = camera.pixel_ray(u as f64, v as f64);
            let mut t = if dir.z < 0.0 { -origin.z / dir.z } else { f64::INFINITY };
            for b in boxes {
                if let Some(tb) = b.ray_entry(&origin, &dir) {
                    t = t.min(tb);
                }
            }
            // The ray direction has unit camera-frame z, so t is the z-depth.
            values.push(if t.is_finite() { t as f32 } else { f32::NAN });
        }
    }
    DepthGrid::from_values(width, height, values)
}

fn sketch_patch<R: Rng>(camera: &CameraModel, patch: &Aabb, label: Label, rng: &mut R) -> Result<Sketch> {
    let mut vertices = Vec::with_capacity(4);
    for c in patch.top_corners(SKETCH_INSET) {
        let (u, v, _) = camera.project_point(&c).ok_or_else(|| Error::InvalidScene("patch behind camera".into()))?;
        vertices.push((
            u + rng.random_range(-SKETCH_JITTER..=SKETCH_JITTER),
            v + rng.random_range(-SKETCH_JITTER..=SKETCH_JITTER),
        ));
    }
    Sketch::new(vertices, label, IMAGE_WIDTH, IMAGE_HEIGHT)
}

/// Synthesizes a builtin scene: rendered depth, camera, one sketch per ROI
/// patch plus one floor sketch, and the ground truth behind them.
pub fn generate_scene(kind: SceneKind, seed: u64) -> Result<SceneSpec> {
    let truth = layout(kind);
    let camera = scene_camera();
    let depth = render_depth(&camera, &truth.boxes, IMAGE_WIDTH, IMAGE_HEIGHT)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sketches = Vec::with_capacity(truth.roi.len() + 1);
    for p in &truth.roi {
        sketches.push(sketch_patch(&camera, p, Label::RegionOfInterest, &mut rng)?);
    }
    sketches.push(sketch_patch(&camera, &truth.permissible, Label::Permissible, &mut rng)?);
    let scene = SceneSpec {
        name: kind.as_str().to_string(),
        camera,
        depth,
        sketches,
        z_limits: (0.15, 0.42),
        omega_limits: (0.0, TAU),
        ground_truth: Some(truth),
    };
    scene.validate()?;
    Ok(scene)
}

/// Uniform points inside a ball.
pub fn ball_points(center: Vector3<f64>, radius: f64, count: usize, seed: u64) -> Result<PointSet> {
    if !(radius > 0.0) || count == 0 {
        return Err(Error::Config("ball needs a positive radius and count".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points = Vec::with_capacity(count);
    while points.len() < count {
        let p = Vector3::new(rng.random_range(-1.0..=1.0), rng.random_range(-1.0..=1.0), rng.random_range(-1.0..=1.0));
        if p.norm_squared() <= 1.0 {
            points.push(center + p * radius);
        }
    }
    PointSet::new(points, Label::RegionOfInterest)
}
