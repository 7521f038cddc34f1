use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};

const ORTHONORMAL_TOL: f64 = 1e-9;

/// Pinhole intrinsics plus the camera pose in the world frame.
///
/// `rotation` and `translation` map camera-frame coordinates (x right,
/// y down, z along the optical axis) into the world frame.
#[derive(Debug, Clone, PartialEq)]
pub struct CameraModel {
    fx: f64,
    fy: f64,
    cx: f64,
    cy: f64,
    rotation: Matrix3<f64>,
    translation: Vector3<f64>,
}

impl CameraModel {
    pub fn new(
        fx: f64,
        fy: f64,
        cx: f64,
        cy: f64,
        rotation: Matrix3<f64>,
        translation: Vector3<f64>,
    ) -> Result<Self> {
        if !(fx > 0.0 && fy > 0.0 && fx.is_finite() && fy.is_finite()) {
            return Err(Error::InvalidCamera(format!("focal lengths must be positive, got ({fx}, {fy})")));
        }
        if !(cx.is_finite() && cy.is_finite()) || translation.iter().any(|t| !t.is_finite()) {
            return Err(Error::InvalidCamera("non-finite principal point or translation".into()));
        }
        let gram = rotation.transpose() * rotation;
        let off = (gram - Matrix3::identity()).abs().max();
        if !(off <= ORTHONORMAL_TOL) || (rotation.determinant() - 1.0).abs() > ORTHONORMAL_TOL {
            return Err(Error::InvalidCamera("rotation is not a proper orthonormal matrix".into()));
        }
        Ok(Self { fx, fy, cx, cy, rotation, translation })
    }

    /// Camera with identity extrinsics.
    pub fn from_intrinsics(fx: f64, fy: f64, cx: f64, cy: f64) -> Result<Self> {
        Self::new(fx, fy, cx, cy, Matrix3::identity(), Vector3::zeros())
    }

    /// Camera at `eye` looking at `target`, with image "up" roughly along `up`.
    pub fn look_at(
        fx: f64,
        fy: f64,
        cx: f64,
        cy: f64,
        eye: Vector3<f64>,
        target: Vector3<f64>,
        up: Vector3<f64>,
    ) -> Result<Self> {
        let forward = (target - eye).normalize();
        let right = forward.cross(&up).normalize();
        let down = forward.cross(&right);
        let rotation = Matrix3::from_columns(&[right, down, forward]);
        Self::new(fx, fy, cx, cy, rotation, eye)
    }

    pub fn fx(&self) -> f64 {
        self.fx
    }

    pub fn fy(&self) -> f64 {
        self.fy
    }

    pub fn cx(&self) -> f64 {
        self.cx
    }

    pub fn cy(&self) -> f64 {
        self.cy
    }

    pub fn rotation(&self) -> &Matrix3<f64> {
        &self.rotation
    }

    pub fn translation(&self) -> &Vector3<f64> {
        &self.translation
    }

    /// Same intrinsics with different extrinsics.
    pub fn with_pose(&self, rotation: Matrix3<f64>, translation: Vector3<f64>) -> Result<Self> {
        Self::new(self.fx, self.fy, self.cx, self.cy, rotation, translation)
    }

    /// Back-projects pixel `(u, v)` with z-depth `z` into the world frame.
    pub fn project_pixel(&self, u: f64, v: f64, z: f64) -> Result<Vector3<f64>> {
        if !(z.is_finite() && z > 0.0) {
            return Err(Error::InvalidDepth(z));
        }
        let ray = Vector3::new((u - self.cx) / self.fx * z, (v - self.cy) / self.fy * z, z);
        Ok(self.rotation * ray + self.translation)
    }

    /// Forward pinhole projection of a world point: `(u, v, z)`.
    ///
    /// Returns `None` for points at or behind the sensor plane.
    pub fn project_point(&self, world: &Vector3<f64>) -> Option<(f64, f64, f64)> {
        let cam = self.rotation.transpose() * (world - self.translation);
        if cam.z <= 0.0 {
            return None;
        }
        Some((self.fx * cam.x / cam.z + self.cx, self.fy * cam.y / cam.z + self.cy, cam.z))
    }

    /// Camera-frame ray direction through pixel `(u, v)`, scaled to unit z.
    pub fn pixel_ray(&self, u: f64, v: f64) -> Vector3<f64> {
        self.rotation * Vector3::new((u - self.cx) / self.fx, (v - self.cy) / self.fy, 1.0)
    }
}

/// Rotation about the world z axis.
pub fn rotation_z(angle: f64) -> Matrix3<f64> {
    let (s, c) = angle.sin_cos();
    Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn principal_point_ray() {
        let cam = CameraModel::from_intrinsics(100.0, 100.0, 50.0, 40.0).unwrap();
        let p = cam.project_pixel(50.0, 40.0, 2.0).unwrap();
        assert_eq!(p, Vector3::new(0.0, 0.0, 2.0));
    }

    #[test]
    fn off_axis_pixel() {
        let cam = CameraModel::from_intrinsics(100.0, 100.0, 50.0, 50.0).unwrap();
        let p = cam.project_pixel(150.0, 50.0, 1.0).unwrap();
        assert_relative_eq!(p, Vector3::new(1.0, 0.0, 1.0), epsilon = 1e-15);
    }

    #[test]
    fn rotated_and_translated() {
        let cam = CameraModel::new(
            100.0,
            100.0,
            50.0,
            50.0,
            rotation_z(FRAC_PI_2),
            Vector3::new(1.0, 0.0, 0.0),
        )
        .unwrap();
        let p = cam.project_pixel(50.0, 50.0, 1.0).unwrap();
        assert_relative_eq!(p, Vector3::new(1.0, 0.0, 1.0), epsilon = 1e-15);
    }

    #[test]
    fn rejects_bad_depth() {
        let cam = CameraModel::from_intrinsics(1.0, 1.0, 0.0, 0.0).unwrap();
        for z in [0.0, -1.0, f64::NAN, f64::INFINITY] {
            assert!(matches!(cam.project_pixel(0.0, 0.0, z), Err(Error::InvalidDepth(_))));
        }
    }

    #[test]
    fn rejects_bad_intrinsics_and_rotation() {
        assert!(CameraModel::from_intrinsics(0.0, 1.0, 0.0, 0.0).is_err());
        let skew = Matrix3::new(1.0, 0.1, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0);
        assert!(CameraModel::new(1.0, 1.0, 0.0, 0.0, skew, Vector3::zeros()).is_err());
        let mirror = Matrix3::new(-1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0);
        assert!(CameraModel::new(1.0, 1.0, 0.0, 0.0, mirror, Vector3::zeros()).is_err());
    }

    #[test]
    fn look_at_is_proper_rotation() {
        let cam = CameraModel::look_at(
            120.0,
            120.0,
            80.0,
            60.0,
            Vector3::new(0.0, -1.0, 2.0),
            Vector3::new(0.0, 1.0, 0.3),
            Vector3::z(),
        )
        .unwrap();
        let target = Vector3::new(0.0, 1.0, 0.3);
        let (u, v, _) = cam.project_point(&target).unwrap();
        assert_relative_eq!(u, 80.0, epsilon = 1e-9);
        assert_relative_eq!(v, 60.0, epsilon = 1e-9);
    }
}
