//! Ego-centered coordinate frame anchored at the Stomach joint.

use super::PreprocessError;
use crate::scalar::Real;
use crate::skeleton::{Joint3D, JointMap, SkeletonFrame};

/// Orthonormal body frame: origin at the Stomach, `y` toward the left hip,
/// `z` toward the Stomach from its projection on the hip line, `x = y × z`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EgoFrameBasis<T> {
    pub origin: Joint3D<T>,
    /// Projection of the Stomach on the hip line.
    pub hip_projection: Joint3D<T>,
    pub x_e: Joint3D<T>,
    pub y_e: Joint3D<T>,
    pub z_e: Joint3D<T>,
    /// Reference-from-ego rotation; column `k` is the `k`-th basis vector.
    pub rotation: [[T; 3]; 3],
}

impl<T: Real> EgoFrameBasis<T> {
    /// Reference coordinates of a point given in the ego frame.
    pub fn to_reference(&self, ego: Joint3D<T>) -> Joint3D<T> {
        let r = &self.rotation;
        let [x, y, z] = ego.to_array();
        Joint3D::new(
            r[0][0] * x + r[0][1] * y + r[0][2] * z,
            r[1][0] * x + r[1][1] * y + r[1][2] * z,
            r[2][0] * x + r[2][1] * y + r[2][2] * z,
        ) + self.origin
    }

    /// Ego coordinates of a point given in the reference frame.
    pub fn to_ego(&self, reference: Joint3D<T>) -> Joint3D<T> {
        let d = reference - self.origin;
        Joint3D::new(self.x_e.dot(d), self.y_e.dot(d), self.z_e.dot(d))
    }

    pub fn determinant(&self) -> T {
        self.x_e.dot(self.y_e.cross(self.z_e))
    }
}

/// Builds the ego basis from the Stomach (`J1`), right hip (`J2`) and left
/// hip (`J3`) of `frame`.
pub fn compute_ego_basis<T: Real>(
    frame: &SkeletonFrame<T>,
    map: &JointMap,
) -> Result<EgoFrameBasis<T>, PreprocessError> {
    compute_ego_basis_tol(frame, map, T::degeneracy_tol())
}

pub(crate) fn compute_ego_basis_tol<T: Real>(
    frame: &SkeletonFrame<T>,
    map: &JointMap,
    tol: T,
) -> Result<EgoFrameBasis<T>, PreprocessError> {
    let j1 = frame.joints[map.stomach];
    let j2 = frame.joints[map.right_hip];
    let j3 = frame.joints[map.left_hip];

    let hips = j3 - j2;
    let hip_len = hips.norm();
    if !(hip_len >= tol) {
        return Err(PreprocessError::DegenerateHips);
    }
    // Line J2 + t·N; t fixed by (Jn - J1)·(J3 - J2) = 0.
    let n = hips * (T::one() / hip_len);
    let t = (j1 - j2).dot(n);
    let jn = j2 + n * t;

    let to_left = j3 - jn;
    let to_stomach = j1 - jn;
    let c = to_left.cross(to_stomach);
    let c_len = c.norm();
    if !(c_len >= tol) {
        return Err(PreprocessError::CollinearStomach);
    }
    let x_e = c * (T::one() / c_len);
    let y_e = to_left * (T::one() / to_left.norm());
    let z_e = to_stomach * (T::one() / to_stomach.norm());
    let rotation = [
        [x_e.x, y_e.x, z_e.x],
        [x_e.y, y_e.y, z_e.y],
        [x_e.z, y_e.z, z_e.z],
    ];
    Ok(EgoFrameBasis {
        origin: j1,
        hip_projection: jn,
        x_e,
        y_e,
        z_e,
        rotation,
    })
}

/// Re-expresses every joint of `frame` in its own ego frame.
pub fn to_ego_frame<T: Real>(
    frame: &SkeletonFrame<T>,
    map: &JointMap,
) -> Result<SkeletonFrame<T>, PreprocessError> {
    to_ego_frame_tol(frame, map, T::degeneracy_tol())
}

pub(crate) fn to_ego_frame_tol<T: Real>(
    frame: &SkeletonFrame<T>,
    map: &JointMap,
    tol: T,
) -> Result<SkeletonFrame<T>, PreprocessError> {
    let basis = compute_ego_basis_tol(frame, map, tol)?;
    Ok(SkeletonFrame::new(
        frame.joints.iter().map(|&j| basis.to_ego(j)).collect(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn frame_with(map: &JointMap, j1: [f64; 3], j2: [f64; 3], j3: [f64; 3]) -> SkeletonFrame<f64> {
        let mut joints = vec![Joint3D::new(0.3, 0.2, 0.1); map.joint_count()];
        joints[map.stomach] = Joint3D::new(j1[0], j1[1], j1[2]);
        joints[map.right_hip] = Joint3D::new(j2[0], j2[1], j2[2]);
        joints[map.left_hip] = Joint3D::new(j3[0], j3[1], j3[2]);
        SkeletonFrame::new(joints)
    }

    #[test]
    fn hand_evaluated_basis() {
        let map = JointMap::kinect20();
        let f = frame_with(&map, [0.0, 0.0, 1.0], [1.0, 0.0, 0.0], [-1.0, 0.0, 0.0]);
        let b = compute_ego_basis(&f, &map).unwrap();
        assert_eq!(b.hip_projection.to_array(), [0.0, 0.0, 0.0]);
        assert_eq!(b.x_e.to_array(), [0.0, 1.0, 0.0]);
        assert_eq!(b.y_e.to_array(), [-1.0, 0.0, 0.0]);
        assert_eq!(b.z_e.to_array(), [0.0, 0.0, 1.0]);
        assert!((b.determinant() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn hand_evaluated_transform() {
        let map = JointMap::kinect20();
        let mut f = frame_with(&map, [0.0, 0.0, 1.0], [1.0, 0.0, 0.0], [-1.0, 0.0, 0.0]);
        f.joints[0] = Joint3D::new(0.0, 1.0, 1.0);
        let e = to_ego_frame(&f, &map).unwrap();
        assert_eq!(e.joints[0].to_array(), [1.0, 0.0, 0.0]);
        assert_eq!(e.joints[map.stomach].to_array(), [0.0, 0.0, 0.0]);
    }

    #[test]
    fn degenerate_configurations() {
        let map = JointMap::kinect20();
        let f = frame_with(&map, [0.0, 0.0, 1.0], [1.0, 0.0, 0.0], [1.0, 0.0, 0.0]);
        assert!(matches!(
            compute_ego_basis(&f, &map),
            Err(PreprocessError::DegenerateHips)
        ));
        let f = frame_with(&map, [0.5, 0.0, 0.0], [1.0, 0.0, 0.0], [-1.0, 0.0, 0.0]);
        assert!(matches!(
            compute_ego_basis(&f, &map),
            Err(PreprocessError::CollinearStomach)
        ));
    }

    #[test]
    fn round_trip_through_reference_frame() {
        let map = JointMap::florence15();
        let f = frame_with(&map, [0.1, 1.2, 2.9], [0.25, 0.8, 3.05], [-0.1, 0.82, 2.95]);
        let b = compute_ego_basis(&f, &map).unwrap();
        let e = to_ego_frame(&f, &map).unwrap();
        for (orig, ego) in f.joints.iter().zip(&e.joints) {
            assert!((b.to_reference(*ego) - *orig).norm() < 1e-9);
        }
    }
}
