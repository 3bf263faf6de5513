//! Small 3×3 helpers on top of nalgebra.

use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};
use crate::real::Real;

/// Singular value decomposition with `U` and `V` proper rotations.
///
/// `m = u * diag(sigma) * vᵀ`. When `det m < 0` one singular value is
/// negative (the smallest in magnitude).
#[derive(Debug, Clone, Copy)]
pub struct RotSvd<T: Real> {
    pub u: Matrix3<T>,
    pub sigma: Vector3<T>,
    pub v: Matrix3<T>,
}

impl<T: Real> RotSvd<T> {
    pub fn new(m: &Matrix3<T>) -> Self {
        let svd = m.svd(true, true);
        let mut u = svd.u.expect("u requested");
        let mut v = svd.v_t.expect("v_t requested").transpose();
        let mut sigma = svd.singular_values;

        let k = sigma.iamin();
        if u.determinant() < T::zero() {
            u.column_mut(k).neg_mut();
            sigma[k] = -sigma[k];
        }
        if v.determinant() < T::zero() {
            v.column_mut(k).neg_mut();
            sigma[k] = -sigma[k];
        }
        RotSvd { u, sigma, v }
    }

    /// Rebuilds `u * diag(s) * vᵀ` with replacement singular values.
    pub fn compose(&self, s: &Vector3<T>) -> Matrix3<T> {
        self.u * Matrix3::from_diagonal(s) * self.v.transpose()
    }

    /// Like [`RotSvd::new`] but rejects non-invertible or inverted inputs.
    pub fn of_deformation(f: &Matrix3<T>) -> Result<Self> {
        let det = f.determinant();
        if !(det > T::zero()) || !det.is_finite() {
            return Err(Error::DegenerateGradient {
                det: det.to_f64_lossy(),
            });
        }
        let svd = Self::new(f);
        if svd.sigma.iter().any(|s| !(*s > T::zero())) {
            return Err(Error::DegenerateGradient {
                det: det.to_f64_lossy(),
            });
        }
        Ok(svd)
    }
}

pub fn symmetrize<T: Real>(m: &Matrix3<T>) -> Matrix3<T> {
    (m + m.transpose()) * T::of(0.5)
}

/// Cross-product matrix `[w]×`, so that `[w]× r = w × r`.
pub fn skew<T: Real>(w: &Vector3<T>) -> Matrix3<T> {
    Matrix3::new(
        T::zero(),
        -w.z,
        w.y,
        w.z,
        T::zero(),
        -w.x,
        -w.y,
        w.x,
        T::zero(),
    )
}

/// Packs a symmetric matrix as `[xx, xy, xz, yy, yz, zz]`.
pub fn sym_to_array<T: Real>(m: &Matrix3<T>) -> [T; 6] {
    [m[(0, 0)], m[(0, 1)], m[(0, 2)], m[(1, 1)], m[(1, 2)], m[(2, 2)]]
}

pub fn sym_from_array<T: Real>(a: &[T; 6]) -> Matrix3<T> {
    Matrix3::new(a[0], a[1], a[2], a[1], a[3], a[4], a[2], a[4], a[5])
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Rotation3;

    #[test]
    fn rot_svd_reconstructs_with_proper_rotations() {
        let f: Matrix3<f64> = Matrix3::new(1.2, 0.1, -0.3, 0.05, 0.9, 0.2, 0.0, -0.1, 1.1);
        let svd = RotSvd::new(&f);
        assert!((svd.u.determinant() - 1.0).abs() < 1e-12);
        assert!((svd.v.determinant() - 1.0).abs() < 1e-12);
        assert!((svd.compose(&svd.sigma) - f).norm() < 1e-12);
        assert!(svd.sigma.iter().all(|s| *s > 0.0));
    }

    #[test]
    fn reflection_gets_one_negative_singular_value() {
        let f = Matrix3::from_diagonal(&Vector3::new(1.0, 2.0, -0.5));
        let svd = RotSvd::new(&f);
        assert_eq!(svd.sigma.iter().filter(|s| **s < 0.0).count(), 1);
        assert!((svd.compose(&svd.sigma) - f).norm() < 1e-12);
        assert!(RotSvd::of_deformation(&f).is_err());
    }

    #[test]
    fn skew_matches_cross_product() {
        let w = Vector3::new(0.3, -1.0, 2.0);
        let r = Vector3::new(1.0, 0.5, -0.25);
        assert!((skew(&w) * r - w.cross(&r)).norm() < 1e-15);
        let rot = Rotation3::from_axis_angle(&Vector3::z_axis(), 0.3).into_inner();
        assert!((symmetrize(&rot) - symmetrize(&rot.transpose())).norm() < 1e-15);
    }
}
