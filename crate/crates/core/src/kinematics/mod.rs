//! Serial-chain forward kinematics on a yaw-only mobile base.

mod parser;

pub use parser::{load_chain, parse_chain};

use nalgebra::{Isometry3, Matrix3, Matrix3x4, Translation3, UnitQuaternion, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::geometry::rotation_z;

/// Text of the bundled six-joint example arm.
pub const BUNDLED_ARM: &str = include_str!("../../data/arm6.chain");

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JointKind {
    Revolute,
    Prismatic,
}

#[derive(Debug, Clone, PartialEq)]
pub struct JointSpec {
    pub name: String,
    pub kind: JointKind,
    pub axis: Vector3<f64>,
    pub limits: (f64, f64),
    /// Fixed transform from the parent link to the joint frame.
    pub origin: Isometry3<f64>,
}

impl JointSpec {
    pub fn new(name: impl Into<String>, kind: JointKind, axis: Vector3<f64>, limits: (f64, f64), origin: Isometry3<f64>) -> Result<Self> {
        let name = name.into();
        if (axis.norm() - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!("joint {name}: axis must be a unit vector")));
        }
        if !(limits.0.is_finite() && limits.1.is_finite() && limits.0 <= limits.1) {
            return Err(Error::Config(format!("joint {name}: invalid limits [{}, {}]", limits.0, limits.1)));
        }
        Ok(Self { name, kind, axis, limits, origin })
    }

    /// Joint motion for coordinate `q`.
    pub fn motion(&self, q: f64) -> Isometry3<f64> {
        match self.kind {
            JointKind::Revolute => Isometry3::from_parts(
                Translation3::identity(),
                UnitQuaternion::from_axis_angle(&nalgebra::Unit::new_unchecked(self.axis), q),
            ),
            JointKind::Prismatic => Isometry3::from_parts(Translation3::from(self.axis * q), UnitQuaternion::identity()),
        }
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.limits.0 + self.limits.1)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KinematicChain {
    joints: Vec<JointSpec>,
    mount: Isometry3<f64>,
    ee_offset: Vector3<f64>,
}

/// Base configuration: position plus yaw.
#[derive(Debug, Clone, Copy, PartialEq, Default, serde::Serialize, serde::Deserialize)]
pub struct BaseConfig {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub omega: f64,
}

impl BaseConfig {
    pub fn new(x: f64, y: f64, z: f64, omega: f64) -> Self {
        Self { x, y, z, omega }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite() && self.omega.is_finite()
    }

    pub fn translation(&self) -> Vector3<f64> {
        Vector3::new(self.x, self.y, self.z)
    }

    pub fn rotation(&self) -> Matrix3<f64> {
        rotation_z(self.omega)
    }

    /// World transform `translation(x, y, z) * rotation_z(omega)`.
    pub fn isometry(&self) -> Isometry3<f64> {
        Isometry3::from_parts(
            Translation3::new(self.x, self.y, self.z),
            UnitQuaternion::from_axis_angle(&Vector3::z_axis(), self.omega),
        )
    }

    /// Maps an arm-frame point to the world.
    pub fn apply(&self, local: &Vector3<f64>) -> Vector3<f64> {
        let (s, c) = self.omega.sin_cos();
        Vector3::new(c * local.x - s * local.y + self.x, s * local.x + c * local.y + self.y, local.z + self.z)
    }

    /// Maps a world point into the arm frame.
    pub fn inverse_apply(&self, world: &Vector3<f64>) -> Vector3<f64> {
        let (s, c) = self.omega.sin_cos();
        let (dx, dy) = (world.x - self.x, world.y - self.y);
        Vector3::new(c * dx + s * dy, -s * dx + c * dy, world.z - self.z)
    }

    pub fn as_array(&self) -> [f64; 4] {
        [self.x, self.y, self.z, self.omega]
    }

    pub fn from_array(a: [f64; 4]) -> Self {
        Self::new(a[0], a[1], a[2], a[3])
    }
}

/// `d rotation_z(omega) / d omega * p`.
pub fn yaw_derivative(omega: f64, p: &Vector3<f64>) -> Vector3<f64> {
    let (s, c) = omega.sin_cos();
    Vector3::new(-s * p.x - c * p.y, c * p.x - s * p.y, 0.0)
}

impl KinematicChain {
    pub fn new(joints: Vec<JointSpec>, mount: Isometry3<f64>, ee_offset: Vector3<f64>) -> Result<Self> {
        if joints.is_empty() {
            return Err(Error::Config("chain needs at least one joint".into()));
        }
        Ok(Self { joints, mount, ee_offset })
    }

    /// The bundled six-joint example arm.
    pub fn bundled_arm() -> Self {
        parse_chain(BUNDLED_ARM).expect("bundled arm parses")
    }

    pub fn joints(&self) -> &[JointSpec] {
        &self.joints
    }

    pub fn dof(&self) -> usize {
        self.joints.len()
    }

    pub fn mount(&self) -> &Isometry3<f64> {
        &self.mount
    }

    pub fn ee_offset(&self) -> &Vector3<f64> {
        &self.ee_offset
    }

    pub fn midpoint(&self) -> Vec<f64> {
        self.joints.iter().map(JointSpec::midpoint).collect()
    }

    pub fn check(&self, q: &[f64]) -> Result<()> {
        if q.len() != self.dof() {
            return Err(Error::Shape { expected: self.dof(), got: q.len() });
        }
        for (j, (&v, spec)) in q.iter().zip(&self.joints).enumerate() {
            if !(v >= spec.limits.0 && v <= spec.limits.1) {
                return Err(Error::JointLimit { joint: j, value: v, min: spec.limits.0, max: spec.limits.1 });
            }
        }
        Ok(())
    }

    /// Flange-to-mount pose in the arm frame, before the end-effector offset.
    fn flange(&self, q: &[f64]) -> Isometry3<f64> {
        let mut pose = self.mount;
        for (spec, &v) in self.joints.iter().zip(q) {
            pose = pose * spec.origin * spec.motion(v);
        }
        pose
    }

    /// End-effector pose in the arm (base) frame.
    pub fn local_pose(&self, q: &[f64]) -> Result<Isometry3<f64>> {
        self.check(q)?;
        Ok(self.flange(q) * Translation3::from(self.ee_offset))
    }

    /// End-effector position in the arm frame; independent of the base.
    pub fn local_position(&self, q: &[f64]) -> Result<Vector3<f64>> {
        self.check(q)?;
        Ok(self.flange(q) * nalgebra::Point3::from(self.ee_offset)).map(|p| p.coords)
    }

    /// Full end-effector pose in the world.
    pub fn forward_pose(&self, q: &[f64], base: &BaseConfig) -> Result<Isometry3<f64>> {
        Ok(base.isometry() * self.local_pose(q)?)
    }

    /// End-effector position in the world.
    pub fn forward(&self, q: &[f64], base: &BaseConfig) -> Result<Vector3<f64>> {
        Ok(base.apply(&self.local_position(q)?))
    }

    /// `d position / d (x, y, z, omega)`.
    pub fn base_jacobian(&self, q: &[f64], base: &BaseConfig) -> Result<Matrix3x4<f64>> {
        let p = self.local_position(q)?;
        let mut j = Matrix3x4::zeros();
        j.fixed_view_mut::<3, 3>(0, 0).copy_from(&Matrix3::identity());
        j.set_column(3, &yaw_derivative(base.omega, &p));
        Ok(j)
    }

    /// End-effector position and its `3 x dof` Jacobian with respect to the
    /// joints, both in the world frame.
    pub fn joint_jacobian(&self, q: &[f64], base: &BaseConfig) -> Result<(Vector3<f64>, nalgebra::Matrix3xX<f64>)> {
        self.check(q)?;
        let mut pose = base.isometry() * self.mount;
        let mut frames = Vec::with_capacity(self.dof());
        for (spec, &v) in self.joints.iter().zip(q) {
            pose *= spec.origin;
            frames.push((pose.translation.vector, pose.rotation * spec.axis));
            pose *= spec.motion(v);
        }
        let p = (pose * nalgebra::Point3::from(self.ee_offset)).coords;
        let mut jac = nalgebra::Matrix3xX::zeros(self.dof());
        for (k, (spec, (origin, axis))) in self.joints.iter().zip(&frames).enumerate() {
            let col = match spec.kind {
                JointKind::Revolute => axis.cross(&(p - origin)),
                JointKind::Prismatic => *axis,
            };
            jac.set_column(k, &col);
        }
        Ok((p, jac))
    }

    /// Upper bound on the distance from the mount origin to the end effector.
    pub fn reach_bound(&self) -> f64 {
        let mut bound = self.ee_offset.norm();
        for spec in &self.joints {
            bound += spec.origin.translation.vector.norm();
            if spec.kind == JointKind::Prismatic {
                bound += spec.limits.0.abs().max(spec.limits.1.abs());
            }
        }
        bound
    }

    /// Arm-frame position of the mount origin.
    pub fn mount_origin(&self) -> Vector3<f64> {
        self.mount.translation.vector
    }

    /// Uniform joint vectors, each coordinate independent on its limits.
    pub fn sample_joints(&self, count: usize, seed: u64) -> Vec<Vec<f64>> {
        self.sample_joints_with(count, &mut ChaCha8Rng::seed_from_u64(seed))
    }

    pub fn sample_joints_with<R: Rng>(&self, count: usize, rng: &mut R) -> Vec<Vec<f64>> {
        (0..count).map(|_| self.random_joints(rng)).collect()
    }

    pub fn random_joints<R: Rng>(&self, rng: &mut R) -> Vec<f64> {
        self.joints
            .iter()
            .map(|s| if s.limits.1 > s.limits.0 { rng.random_range(s.limits.0..=s.limits.1) } else { s.limits.0 })
            .collect()
    }

    /// Arm-frame end-effector positions of `count` uniform joint samples.
    pub fn sample_local_positions(&self, count: usize, seed: u64) -> Vec<Vector3<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..count)
            .map(|_| {
                let q = self.random_joints(&mut rng);
                (self.flange(&q) * nalgebra::Point3::from(self.ee_offset)).coords
            })
            .collect()
    }

    /// Empirical reach: largest end-effector distance from the arm-frame origin.
    pub fn empirical_reach(&self, count: usize, seed: u64) -> f64 {
        self.sample_local_positions(count, seed).iter().map(|p| p.norm()).fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_PI_2, PI};

    /// One revolute z joint with a unit x link.
    pub(crate) fn unit_arm() -> KinematicChain {
        let j = JointSpec::new("j", JointKind::Revolute, Vector3::z(), (-PI, PI), Isometry3::identity()).unwrap();
        KinematicChain::new(vec![j], Isometry3::identity(), Vector3::x()).unwrap()
    }

    fn close(a: &Vector3<f64>, b: &Vector3<f64>, tol: f64) -> bool {
        (a - b).amax() <= tol
    }

    #[test]
    fn unit_arm_examples() {
        let arm = unit_arm();
        let origin = BaseConfig::default();
        assert!(close(&arm.forward(&[0.0], &origin).unwrap(), &Vector3::new(1.0, 0.0, 0.0), 1e-15));
        assert!(close(&arm.forward(&[FRAC_PI_2], &origin).unwrap(), &Vector3::new(0.0, 1.0, 0.0), 1e-15));
        let base = BaseConfig::new(1.0, 2.0, 0.3, FRAC_PI_2);
        assert!(close(&arm.forward(&[0.0], &base).unwrap(), &Vector3::new(1.0, 3.0, 0.3), 1e-15));
    }

    #[test]
    fn limit_and_shape_errors() {
        let arm = unit_arm();
        assert!(matches!(arm.forward(&[4.0], &BaseConfig::default()), Err(Error::JointLimit { joint: 0, .. })));
        assert!(matches!(arm.forward(&[0.0, 0.0], &BaseConfig::default()), Err(Error::Shape { .. })));
    }

    #[test]
    fn jacobian_examples() {
        let arm = unit_arm();
        let j = arm.base_jacobian(&[0.0], &BaseConfig::default()).unwrap();
        assert_eq!(j.column(0).into_owned(), Vector3::x());
        assert!(close(&j.column(3).into_owned(), &Vector3::y(), 1e-15));

        // Folded onto the yaw axis: a link along z only.
        let j0 = JointSpec::new("j", JointKind::Revolute, Vector3::y(), (-PI, PI), Isometry3::identity()).unwrap();
        let folded = KinematicChain::new(vec![j0], Isometry3::identity(), Vector3::new(0.0, 0.0, 0.5)).unwrap();
        let jf = folded.base_jacobian(&[0.0], &BaseConfig::new(0.3, 0.1, 0.2, 1.1)).unwrap();
        assert_eq!(jf.column(3).into_owned(), Vector3::zeros());
    }

    #[test]
    fn degenerate_limits_sample_constant() {
        let j = JointSpec::new("j", JointKind::Prismatic, Vector3::z(), (0.25, 0.25), Isometry3::identity()).unwrap();
        let chain = KinematicChain::new(vec![j], Isometry3::identity(), Vector3::zeros()).unwrap();
        assert!(chain.sample_joints(100, 3).iter().all(|q| q[0] == 0.25));
    }

    #[test]
    fn sample_means_near_midpoints() {
        let arm = KinematicChain::bundled_arm();
        let qs = arm.sample_joints(100_000, 11);
        for (k, spec) in arm.joints().iter().enumerate() {
            let mean = qs.iter().map(|q| q[k]).sum::<f64>() / qs.len() as f64;
            let width = spec.limits.1 - spec.limits.0;
            assert!((mean - spec.midpoint()).abs() <= 0.01 * width, "joint {k}: {mean}");
            assert!(qs.iter().all(|q| q[k] >= spec.limits.0 && q[k] <= spec.limits.1));
        }
        assert_eq!(arm.sample_joints(5, 2), arm.sample_joints(5, 2));
    }

    #[test]
    fn bundled_arm_reach() {
        let arm = KinematicChain::bundled_arm();
        assert_eq!(arm.dof(), 6);
        let reach = arm.empirical_reach(100_000, 0);
        assert!((0.5..=1.0).contains(&reach), "reach {reach}");
        assert!(reach <= arm.reach_bound() + 1e-12);
    }

    #[test]
    fn deep_composition_stays_orthonormal() {
        let joints = (0..16)
            .map(|i| {
                let axis = Vector3::new(1.0, i as f64 * 0.3, -0.7).normalize();
                let origin = Isometry3::new(Vector3::new(0.1, 0.02, 0.05), Vector3::new(0.3, -0.2, 0.1 * i as f64));
                JointSpec::new(format!("j{i}"), JointKind::Revolute, axis, (-PI, PI), origin).unwrap()
            })
            .collect();
        let chain = KinematicChain::new(joints, Isometry3::identity(), Vector3::x()).unwrap();
        let q: Vec<f64> = (0..16).map(|i| 0.37 * i as f64 - 2.5).collect();
        let pose = chain.forward_pose(&q, &BaseConfig::new(0.1, 0.2, 0.3, 2.0)).unwrap();
        let r = pose.rotation.to_rotation_matrix().into_inner();
        assert!((r.transpose() * r - Matrix3::identity()).amax() <= 1e-12);
    }

    fn arb_base() -> impl Strategy<Value = BaseConfig> {
        (-3.0f64..3.0, -3.0f64..3.0, 0.0f64..0.5, -7.0f64..7.0).prop_map(|(x, y, z, w)| BaseConfig::new(x, y, z, w))
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]
        #[test]
        fn base_jacobian_matches_finite_differences(base in arb_base(), seed in any::<u64>()) {
            let arm = KinematicChain::bundled_arm();
            let q = arm.sample_joints(1, seed).remove(0);
            let jac = arm.base_jacobian(&q, &base).unwrap();
            let h = 1e-6;
            for k in 0..4 {
                let mut plus = base.as_array();
                let mut minus = base.as_array();
                plus[k] += h;
                minus[k] -= h;
                let fd = (arm.forward(&q, &BaseConfig::from_array(plus)).unwrap()
                    - arm.forward(&q, &BaseConfig::from_array(minus)).unwrap()) / (2.0 * h);
                prop_assert!((fd - jac.column(k)).amax() <= 1e-6);
            }
        }

        #[test]
        fn rigid_motion_consistency(base in arb_base(), seed in any::<u64>()) {
            let arm = KinematicChain::bundled_arm();
            let q = arm.sample_joints(1, seed).remove(0);
            let world = arm.forward(&q, &base).unwrap();
            let local = arm.forward(&q, &BaseConfig::default()).unwrap();
            prop_assert!((world - (base.isometry() * nalgebra::Point3::from(local)).coords).amax() <= 1e-12);
            prop_assert!((base.inverse_apply(&world) - local).amax() <= 1e-12);
        }

        #[test]
        fn joint_jacobian_matches_finite_differences(base in arb_base(), seed in any::<u64>()) {
            let arm = KinematicChain::bundled_arm();
            let mut q = arm.sample_joints(1, seed).remove(0);
            for (v, s) in q.iter_mut().zip(arm.joints()) {
                *v = v.clamp(s.limits.0 + 1e-4, s.limits.1 - 1e-4);
            }
            let (p, jac) = arm.joint_jacobian(&q, &base).unwrap();
            prop_assert!((p - arm.forward(&q, &base).unwrap()).amax() <= 1e-12);
            let h = 1e-6;
            for k in 0..q.len() {
                let mut plus = q.clone();
                let mut minus = q.clone();
                plus[k] += h;
                minus[k] -= h;
                let fd = (arm.forward(&plus, &base).unwrap() - arm.forward(&minus, &base).unwrap()) / (2.0 * h);
                prop_assert!((fd - jac.column(k)).amax() <= 1e-6);
            }
        }
    }
}
