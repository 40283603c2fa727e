//! Rotation-group primitives.
//!
//! Everything here works on plain `nalgebra` 3-vectors and 3×3 matrices. The
//! only domain newtype is [`RotationMatrix`], which guarantees membership in
//! SO(3) at construction time.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Vec3 = Vector3<f64>;
pub type Mat3 = Matrix3<f64>;

/// Tolerance used to decide whether a matrix is a rotation.
pub const ROTATION_TOL: f64 = 1e-9;

/// Largest symmetric-part norm accepted by [`vee`].
pub const VEE_TOL: f64 = 1e-6;

const EXP_TAYLOR_THRESHOLD: f64 = 1e-8;

/// Skew-symmetric matrix of `v`, so that `hat(v) * w == v.cross(w)`.
pub fn hat(v: &Vec3) -> Mat3 {
    Mat3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

/// Inverse of [`hat`]. Rejects matrices whose symmetric part is not negligible.
pub fn vee(a: &Mat3) -> Result<Vec3> {
    let sym = proj_s(a).norm();
    if !(sym <= VEE_TOL) {
        return Err(Error::NotAntisymmetric(sym));
    }
    Ok(vee_unchecked(a))
}

/// Reads the axial vector of `a` without checking antisymmetry. Callers pass
/// matrices that are antisymmetric by construction (e.g. `proj_a(..)`).
pub fn vee_unchecked(a: &Mat3) -> Vec3 {
    Vec3::new(a[(2, 1)], a[(0, 2)], a[(1, 0)])
}

/// Antisymmetric part `(A - Aᵀ)/2`.
pub fn proj_a(a: &Mat3) -> Mat3 {
    (a - a.transpose()) * 0.5
}

/// Symmetric part `(A + Aᵀ)/2`.
pub fn proj_s(a: &Mat3) -> Mat3 {
    (a + a.transpose()) * 0.5
}

/// Frobenius inner product `tr(AᵀB)`.
pub fn inner(a: &Mat3, b: &Mat3) -> f64 {
    a.component_mul(b).sum()
}

/// Axial vector of the antisymmetric part, `proj_a(A)^∨`.
pub fn skew_vee(a: &Mat3) -> Vec3 {
    vee_unchecked(&proj_a(a))
}

/// A 3×3 matrix known to lie in SO(3) to within [`ROTATION_TOL`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Mat3", into = "Mat3")]
pub struct RotationMatrix(Mat3);

impl RotationMatrix {
    pub fn identity() -> Self {
        RotationMatrix(Mat3::identity())
    }

    pub fn new(m: Mat3) -> Result<Self> {
        let orthogonality = (m.transpose() * m - Mat3::identity()).norm();
        let det = m.determinant();
        if !(orthogonality <= ROTATION_TOL) || !((det - 1.0).abs() <= ROTATION_TOL) {
            return Err(Error::NotRotation { orthogonality, det });
        }
        Ok(RotationMatrix(m))
    }

    /// Wraps `m` without validation. Intended for matrices produced by
    /// products and exponentials of rotations.
    pub fn new_unchecked(m: Mat3) -> Self {
        RotationMatrix(m)
    }

    pub fn matrix(&self) -> &Mat3 {
        &self.0
    }

    pub fn transpose(&self) -> Self {
        RotationMatrix(self.0.transpose())
    }

    /// Frobenius norm of `RᵀR - I`.
    pub fn orthogonality_defect(&self) -> f64 {
        (self.0.transpose() * self.0 - Mat3::identity()).norm()
    }

    pub fn is_valid(&self, tol: f64) -> bool {
        self.orthogonality_defect() <= tol && (self.0.determinant() - 1.0).abs() <= tol
    }

    /// Nearest rotation in the Frobenius sense (polar factor via SVD). Never
    /// called implicitly by the integrators.
    pub fn orthonormalized(&self) -> Self {
        let svd = self.0.svd(true, true);
        let (u, vt) = (svd.u.unwrap(), svd.v_t.unwrap());
        let mut d = Mat3::identity();
        if (u * vt).determinant() < 0.0 {
            d[(2, 2)] = -1.0;
        }
        RotationMatrix(u * d * vt)
    }

    /// Left-multiplicative update `exp(w^×) R`.
    pub fn left_exp(&self, w: &Vec3) -> Self {
        RotationMatrix(exp_so3(w).0 * self.0)
    }
}

impl std::ops::Mul for RotationMatrix {
    type Output = RotationMatrix;
    fn mul(self, rhs: RotationMatrix) -> RotationMatrix {
        RotationMatrix(self.0 * rhs.0)
    }
}

impl std::ops::Mul<Vec3> for &RotationMatrix {
    type Output = Vec3;
    fn mul(self, rhs: Vec3) -> Vec3 {
        self.0 * rhs
    }
}

impl TryFrom<Mat3> for RotationMatrix {
    type Error = Error;
    fn try_from(m: Mat3) -> Result<Self> {
        RotationMatrix::new(m)
    }
}

impl From<RotationMatrix> for Mat3 {
    fn from(r: RotationMatrix) -> Mat3 {
        r.0
    }
}

/// Exponential map so(3) → SO(3) (Rodrigues, with a second-order Taylor
/// expansion near the identity).
pub fn exp_so3(w: &Vec3) -> RotationMatrix {
    let theta2 = w.norm_squared();
    let theta = theta2.sqrt();
    let k = hat(w);
    let k2 = k * k;
    let (a, b) = if theta < EXP_TAYLOR_THRESHOLD {
        (1.0 - theta2 / 6.0, 0.5 - theta2 / 24.0)
    } else {
        (theta.sin() / theta, (1.0 - theta.cos()) / theta2)
    };
    RotationMatrix(Mat3::identity() + k * a + k2 * b)
}

/// Rotation error `R_dᵀ R`.
pub fn rotation_error(r: &RotationMatrix, r_d: &RotationMatrix) -> RotationMatrix {
    RotationMatrix(r_d.0.transpose() * r.0)
}

/// Rotation-error potential `tr(I - R_e)`, which lies in `[0, 4]`.
pub fn rotation_potential(r_e: &RotationMatrix) -> f64 {
    3.0 - r_e.0.trace()
}

/// Squared scalar part of the unit quaternion of `r_e`, `(1 + tr R_e)/4`.
pub fn quaternion_scalar_sq(r_e: &RotationMatrix) -> f64 {
    1.0 - rotation_potential(r_e) / 4.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    fn lcg_vec(seed: &mut u64) -> Vec3 {
        let mut next = || {
            *seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((*seed >> 11) as f64 / (1u64 << 53) as f64) * 4.0 - 2.0
        };
        Vec3::new(next(), next(), next())
    }

    #[test]
    fn hat_matches_displayed_matrix() {
        let h = hat(&Vec3::new(1.0, 2.0, 3.0));
        let expected = Mat3::new(0.0, -3.0, 2.0, 3.0, 0.0, -1.0, -2.0, 1.0, 0.0);
        assert_eq!(h, expected);
        assert_eq!(hat(&Vec3::zeros()), Mat3::zeros());
    }

    #[test]
    fn hat_is_cross_product() {
        let mut seed = 3;
        for _ in 0..100 {
            let v = lcg_vec(&mut seed);
            let w = lcg_vec(&mut seed);
            assert!((hat(&v) * w - v.cross(&w)).norm() < 1e-14);
            assert!((vee(&hat(&v)).unwrap() - v).norm() < 1e-12);
        }
    }

    #[test]
    fn vee_rejects_symmetric_input() {
        assert!(matches!(vee(&Mat3::identity()), Err(Error::NotAntisymmetric(_))));
        assert_eq!(vee(&Mat3::zeros()).unwrap(), Vec3::zeros());
    }

    #[test]
    fn projections_split_identity_and_hat() {
        let i = Mat3::identity();
        assert_eq!(proj_a(&i), Mat3::zeros());
        assert_eq!(proj_s(&i), i);
        let h = hat(&Vec3::new(0.3, -1.0, 2.0));
        assert_eq!(proj_a(&h), h);
        assert_eq!(proj_s(&h), Mat3::zeros());
    }

    #[test]
    fn inner_product_values() {
        assert_eq!(inner(&Mat3::identity(), &Mat3::identity()), 3.0);
        // tr(hat(e1)ᵀ hat(e1)) = 2 = 2‖e1‖²
        let h = hat(&Vec3::x());
        assert_eq!(inner(&h, &h), 2.0);
        let h2 = h * 2.0;
        assert_eq!(inner(&h2, &h2), 8.0);
    }

    #[test]
    fn exp_quarter_turn_about_z() {
        let r = exp_so3(&Vec3::new(0.0, 0.0, FRAC_PI_2));
        let expected = Mat3::new(0.0, -1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0);
        assert!((r.matrix() - expected).norm() < 1e-15);
        assert_eq!(*exp_so3(&Vec3::zeros()).matrix(), Mat3::identity());
    }

    #[test]
    fn exp_is_valid_across_magnitudes() {
        let axis = Vec3::new(1.0, -2.0, 0.5).normalize();
        for mag in [0.0, 1e-12, 1e-6, 1.0, 10.0] {
            let r = exp_so3(&(axis * mag));
            assert!(r.is_valid(ROTATION_TOL), "magnitude {mag}");
        }
        // Continuity across the Taylor switch.
        let below = exp_so3(&(axis * 0.999e-8));
        let above = exp_so3(&(axis * 1.001e-8));
        assert!((below.matrix() - above.matrix()).norm() < 1e-10);
    }

    #[test]
    fn exp_inverse_identity() {
        let mut seed = 11;
        for _ in 0..100 {
            let w = lcg_vec(&mut seed);
            let p = *exp_so3(&w).matrix() * exp_so3(&-w).matrix();
            assert!((p - Mat3::identity()).norm() < 1e-12);
        }
    }

    #[test]
    fn rotation_error_basics() {
        let r = exp_so3(&Vec3::new(0.2, 0.4, -0.1));
        let e = rotation_error(&r, &r);
        assert!((e.matrix() - Mat3::identity()).norm() < 1e-14);
        let theta = 0.7;
        let rz = exp_so3(&Vec3::new(0.0, 0.0, theta));
        let e = rotation_error(&rz, &RotationMatrix::identity());
        assert_eq!(e, rz);
    }

    #[test]
    fn rotation_new_validates() {
        assert!(RotationMatrix::new(Mat3::identity() * 2.0).is_err());
        let reflect = Mat3::from_diagonal(&Vec3::new(1.0, 1.0, -1.0));
        assert!(RotationMatrix::new(reflect).is_err());
        assert!(RotationMatrix::new(*exp_so3(&Vec3::new(1.0, 2.0, 3.0)).matrix()).is_ok());
    }

    #[test]
    fn orthonormalize_repairs_drift() {
        let r = exp_so3(&Vec3::new(0.4, 0.1, -0.3));
        let drifted = RotationMatrix::new_unchecked(r.matrix() + Mat3::from_element(1e-6));
        assert!(!drifted.is_valid(ROTATION_TOL));
        let fixed = drifted.orthonormalized();
        assert!(fixed.is_valid(1e-12));
        assert!((fixed.matrix() - r.matrix()).norm() < 1e-5);
    }
}
