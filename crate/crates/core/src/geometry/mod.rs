//! Sketch rasterization and pinhole back-projection into world-frame
//! point sets.

mod camera;
mod cluster;
mod depth;
mod sketch;

pub use camera::{rotation_z, CameraModel};
pub use cluster::linkage_components;
pub use depth::DepthGrid;
pub use sketch::{enclosed_pixels, is_simple, signed_area, Label, Sketch};

use nalgebra::{Vector2, Vector3};

use crate::error::{Error, Result};

/// 3D points projected from one sketch.
#[derive(Debug, Clone, PartialEq)]
pub struct PointSet {
    points: Vec<Vector3<f64>>,
    label: Label,
}

impl PointSet {
    pub fn new(points: Vec<Vector3<f64>>, label: Label) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::EmptyPointSet);
        }
        if points.iter().any(|p| p.iter().any(|c| !c.is_finite())) {
            return Err(Error::Config("point set contains non-finite coordinates".into()));
        }
        Ok(Self { points, label })
    }

    pub fn points(&self) -> &[Vector3<f64>] {
        &self.points
    }

    pub fn label(&self) -> Label {
        self.label
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Horizontal `(x, y)` components, used for the base constraint map.
    pub fn xy(&self) -> Vec<Vector2<f64>> {
        self.points.iter().map(|p| p.xy()).collect()
    }

    /// Concatenates point sets sharing a label.
    pub fn merge(sets: &[PointSet]) -> Result<Self> {
        let first = sets.first().ok_or(Error::EmptyPointSet)?;
        if sets.iter().any(|s| s.label != first.label) {
            return Err(Error::Config("cannot merge point sets with different labels".into()));
        }
        Self::new(sets.iter().flat_map(|s| s.points.iter().copied()).collect(), first.label)
    }

    pub fn centroid(&self) -> Vector3<f64> {
        self.points.iter().sum::<Vector3<f64>>() / self.points.len() as f64
    }

    /// Axis-aligned bounds `(min, max)`.
    pub fn bounds(&self) -> (Vector3<f64>, Vector3<f64>) {
        let mut lo = Vector3::repeat(f64::INFINITY);
        let mut hi = Vector3::repeat(f64::NEG_INFINITY);
        for p in &self.points {
            lo = lo.inf(p);
            hi = hi.sup(p);
        }
        (lo, hi)
    }
}

/// Back-projects one pixel; see [`CameraModel::project_pixel`].
pub fn project_pixel(camera: &CameraModel, u: f64, v: f64, z: f64) -> Result<Vector3<f64>> {
    camera.project_pixel(u, v, z)
}

/// Projects every enclosed pixel with a valid depth reading.
pub fn project_sketch(camera: &CameraModel, depth: &DepthGrid, sketch: &Sketch) -> Result<PointSet> {
    let pixels = enclosed_pixels(sketch, depth.width(), depth.height())?;
    let points = pixels
        .into_iter()
        .filter_map(|(u, v)| depth.get(u, v).map(|z| camera.project_pixel(u as f64, v as f64, z as f64)))
        .collect::<Result<Vec<_>>>()?;
    PointSet::new(points, sketch.label())
}
