//! End-effector poses, wrenches, and the pose residual.
//!
//! Twist-like 6-vectors throughout the crate are ordered translation first:
//! `[vx, vy, vz, wx, wy, wz]`. Wrenches pair with them as `[Fx, Fy, Fz,
//! Mx, My, Mz]`, so `wrench · twist` is mechanical power.

use nalgebra::{Matrix3, Rotation3, UnitQuaternion, Vector3, Vector6};

/// A rigid placement of the end-effector frame in world coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct Pose {
    /// World position of the frame origin.
    pub position: Vector3<f64>,
    /// World orientation (orthonormal, right-handed).
    pub rotation: Rotation3<f64>,
}

impl Pose {
    /// Frame coincident with the world frame.
    pub fn identity() -> Self {
        Self {
            position: Vector3::zeros(),
            rotation: Rotation3::identity(),
        }
    }

    pub fn new(position: Vector3<f64>, rotation: Rotation3<f64>) -> Self {
        Self { position, rotation }
    }

    /// Orientation as a plain 3x3 matrix.
    pub fn rotation_matrix(&self) -> Matrix3<f64> {
        *self.rotation.matrix()
    }

    /// Rigid-transform composition `self * other`.
    pub fn compose(&self, other: &Pose) -> Pose {
        Pose {
            position: self.position + self.rotation * other.position,
            rotation: self.rotation * other.rotation,
        }
    }

    /// Applies a small world-frame displacement: the translation adds to the
    /// position and the rotational part left-multiplies as an exponential.
    pub fn displaced(&self, twist: &Vector6<f64>) -> Pose {
        let dv = Vector3::new(twist[0], twist[1], twist[2]);
        let dw = Vector3::new(twist[3], twist[4], twist[5]);
        Pose {
            position: self.position + dv,
            rotation: Rotation3::new(dw) * self.rotation,
        }
    }

    /// Geodesic interpolation from `from` (`alpha = 0`) to `to` (`alpha = 1`):
    /// linear in position, exponential in orientation.
    pub fn interpolate(from: &Pose, to: &Pose, alpha: f64) -> Pose {
        let dw = rotation_log(&(to.rotation * from.rotation.inverse()));
        Pose {
            position: from.position + alpha * (to.position - from.position),
            rotation: Rotation3::new(alpha * dw) * from.rotation,
        }
    }
}

/// Logarithm of a rotation as an axis-times-angle vector.
///
/// Routed through the quaternion form, which stays well-conditioned at the
/// half-turn where the matrix antisymmetric part vanishes; at exactly pi any
/// valid axis is acceptable and the quaternion picks one.
pub fn rotation_log(rotation: &Rotation3<f64>) -> Vector3<f64> {
    UnitQuaternion::from_rotation_matrix(rotation).scaled_axis()
}

/// Pose discrepancy `target - actual` as a world-frame 6-vector: position
/// difference stacked over the rotation log of `R_target * R_actual^T`.
///
/// This is the linearisation-consistent residual for geometric Jacobians
/// whose columns are world twists taken at the end-effector point.
pub fn pose_residual(target: &Pose, actual: &Pose) -> Vector6<f64> {
    let dp = target.position - actual.position;
    let dw = rotation_log(&(target.rotation * actual.rotation.inverse()));
    Vector6::new(dp.x, dp.y, dp.z, dw.x, dw.y, dw.z)
}

/// A force and moment applied to the end-effector, world frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Wrench {
    pub force: Vector3<f64>,
    pub moment: Vector3<f64>,
}

impl Wrench {
    pub fn zero() -> Self {
        Self {
            force: Vector3::zeros(),
            moment: Vector3::zeros(),
        }
    }

    pub fn from_force(force: Vector3<f64>) -> Self {
        Self {
            force,
            moment: Vector3::zeros(),
        }
    }

    pub fn from_vector(v: &Vector6<f64>) -> Self {
        Self {
            force: Vector3::new(v[0], v[1], v[2]),
            moment: Vector3::new(v[3], v[4], v[5]),
        }
    }

    /// `[Fx, Fy, Fz, Mx, My, Mz]`, pairing with translation-first twists.
    pub fn as_vector(&self) -> Vector6<f64> {
        Vector6::new(
            self.force.x,
            self.force.y,
            self.force.z,
            self.moment.x,
            self.moment.y,
            self.moment.z,
        )
    }

    pub fn norm(&self) -> f64 {
        self.as_vector().norm()
    }
}

impl std::ops::Add for Wrench {
    type Output = Wrench;
    fn add(self, rhs: Wrench) -> Wrench {
        Wrench {
            force: self.force + rhs.force,
            moment: self.moment + rhs.moment,
        }
    }
}
