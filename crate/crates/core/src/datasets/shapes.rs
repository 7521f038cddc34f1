use std::f64::consts::{PI, TAU};
use std::fmt;
use std::str::FromStr;

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::geometry::{Label, PointSet};

pub const DEFAULT_SHAPE_COUNT: usize = 5000;
pub const DEFAULT_SHAPE_NOISE: f64 = 0.005;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ShapeKind {
    Cuboid,
    Plane,
    Circle,
    PlaneCircle,
    Star,
}

impl ShapeKind {
    pub const ALL: [ShapeKind; 5] = [Self::Cuboid, Self::Plane, Self::Circle, Self::PlaneCircle, Self::Star];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Cuboid => "cuboid",
            Self::Plane => "plane",
            Self::Circle => "circle",
            Self::PlaneCircle => "plane+circle",
            Self::Star => "star",
        }
    }

    /// Desk-scale extents used by [`ShapeSpec::new`].
    pub fn default_extents(self) -> [f64; 3] {
        match self {
            Self::Cuboid => [0.3, 0.2, 0.15],
            Self::Plane => [0.4, 0.3, 0.0],
            Self::Circle => [0.3, 0.3, 0.0],
            Self::PlaneCircle => [0.4, 0.3, 0.2],
            Self::Star => [0.4, 0.4, 0.0],
        }
    }
}

impl fmt::Display for ShapeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ShapeKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.as_str() == s || (s == "plane-circle" && *k == Self::PlaneCircle))
            .ok_or_else(|| Error::Config(format!("unknown shape {s:?}")))
    }
}

/// Synthetic point-cloud recipe.
///
/// Meaning of `extents` by kind: cuboid the surface of an `x * y * z` box; plane sheet
/// `x * y` at height 0; circle ring of diameter `x`; plane+circle a plane
/// `x * y` plus a ring of diameter `x / 2` floating `z` above it; star a
/// filled five-pointed star of outer diameter `x`.
#[derive(Debug, Clone, PartialEq)]
pub struct ShapeSpec {
    pub kind: ShapeKind,
    pub extents: [f64; 3],
    pub count: usize,
    pub noise: f64,
    pub seed: u64,
}

impl ShapeSpec {
    pub fn new(kind: ShapeKind, seed: u64) -> Self {
        Self { kind, extents: kind.default_extents(), count: DEFAULT_SHAPE_COUNT, noise: DEFAULT_SHAPE_NOISE, seed }
    }

    pub fn validate(&self) -> Result<()> {
        if self.count == 0 {
            return Err(Error::Config("shape sample count must be positive".into()));
        }
        if !(self.noise >= 0.0 && self.noise.is_finite()) {
            return Err(Error::Config("shape noise must be non-negative".into()));
        }
        if self.extents.iter().any(|e| !(e.is_finite() && *e >= 0.0)) {
            return Err(Error::Config("shape extents must be non-negative".into()));
        }
        Ok(())
    }
}

/// Vertices of the star outline, outer radius `r`, inner radius `0.4 r`.
pub fn star_outline(r: f64) -> Vec<(f64, f64)> {
    (0..10)
        .map(|i| {
            let a = PI / 2.0 + i as f64 * PI / 5.0;
            let rad = if i % 2 == 0 { r } else { 0.4 * r };
            (rad * a.cos(), rad * a.sin())
        })
        .collect()
}

fn inside_polygon(poly: &[(f64, f64)], x: f64, y: f64) -> bool {
    let mut inside = false;
    let n = poly.len();
    for i in 0..n {
        let (x0, y0) = poly[i];
        let (x1, y1) = poly[(i + 1) % n];
        if (y0 > y) != (y1 > y) && x < x0 + (y - y0) / (y1 - y0) * (x1 - x0) {
            inside = !inside;
        }
    }
    inside
}

fn ring<R: Rng>(rng: &mut R, radius: f64, center: Vector3<f64>) -> Vector3<f64> {
    let a = rng.random_range(0.0..TAU);
    center + Vector3::new(radius * a.cos(), radius * a.sin(), 0.0)
}

/// Uniform point on the surface of an origin-centered box.
fn box_surface<R: Rng>(rng: &mut R, e: [f64; 3]) -> Vector3<f64> {
    let areas = [e[1] * e[2], e[0] * e[2], e[0] * e[1]];
    let total: f64 = areas.iter().sum();
    let mut pick = rng.random_range(0.0..total.max(f64::MIN_POSITIVE));
    let mut axis = 2;
    for (k, a) in areas.iter().enumerate() {
        if pick < *a {
            axis = k;
            break;
        }
        pick -= a;
    }
    let mut p = Vector3::from_fn(|i, _| rng.random_range(-0.5..=0.5) * e[i]);
    p[axis] = if rng.random::<bool>() { 0.5 * e[axis] } else { -0.5 * e[axis] };
    p
}

fn sheet<R: Rng>(rng: &mut R, sx: f64, sy: f64, z: f64) -> Vector3<f64> {
    Vector3::new(rng.random_range(-0.5..=0.5) * sx, rng.random_range(-0.5..=0.5) * sy, z)
}

/// Seeded draw of `spec.count` points, uniform on the ideal shape plus
/// isotropic Gaussian noise.
pub fn generate_shape(spec: &ShapeSpec) -> Result<PointSet> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let [ex, ey, ez] = spec.extents;
    let star = star_outline(ex / 2.0);
    let mut points = Vec::with_capacity(spec.count);
    for i in 0..spec.count {
        let p = match spec.kind {
            ShapeKind::Cuboid => box_surface(&mut rng, [ex, ey, ez]),
            ShapeKind::Plane => sheet(&mut rng, ex, ey, 0.0),
            ShapeKind::Circle => ring(&mut rng, ex / 2.0, Vector3::zeros()),
            ShapeKind::PlaneCircle => {
                if i % 2 == 0 {
                    sheet(&mut rng, ex, ey, 0.0)
                } else {
                    ring(&mut rng, ex / 4.0, Vector3::new(0.0, 0.0, ez))
                }
            }
            ShapeKind::Star => loop {
                let (x, y) = (rng.random_range(-0.5..=0.5) * ex, rng.random_range(-0.5..=0.5) * ex);
                if inside_polygon(&star, x, y) {
                    break Vector3::new(x, y, 0.0);
                }
            },
        };
        let noise = if spec.noise > 0.0 {
            Vector3::new(rng.sample(StandardNormal), rng.sample(StandardNormal), rng.sample(StandardNormal)) * spec.noise
        } else {
            Vector3::zeros()
        };
        points.push(p + noise);
    }
    PointSet::new(points, Label::RegionOfInterest)
}
