//! Simulation state → renderable splat attributes.

use nalgebra::{Matrix3, Vector3};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{symmetrize, RotSvd};
use crate::model::{GaussianParticle, ShCoeffs};
use crate::real::Real;

/// `F A Fᵀ`, symmetrized.
pub fn update_covariance<T: Real>(static_cov: &Matrix3<T>, def_grad: &Matrix3<T>) -> Matrix3<T> {
    symmetrize(&(def_grad * static_cov * def_grad.transpose()))
}

/// Rotation factor `R` of the polar decomposition `F = R S`.
pub fn extract_rotation<T: Real>(def_grad: &Matrix3<T>) -> Result<Matrix3<T>> {
    let det = def_grad.determinant();
    if !(det > T::zero()) || !det.is_finite() {
        return Err(Error::DegenerateGradient { det: det.to_f64_lossy() });
    }
    let svd = RotSvd::new(def_grad);
    Ok(svd.u * svd.v.transpose())
}

/// Rotates band-1 coefficients; band 0 and bands ≥ 2 are returned as is.
///
/// With the usual real basis, band 1 evaluates to `C₁ (-c₀ y + c₁ z - c₂ x)`,
/// so per channel the vector `w = (-c₂, -c₀, c₁)` satisfies `f(d) = C₁ w·d`
/// and rotating the function by `R` maps `w` to `R w`.
pub fn rotate_sh<T: Real>(sh: &ShCoeffs<T>, rotation: &Matrix3<T>) -> ShCoeffs<T> {
    let mut out = sh.clone();
    if sh.coeffs.len() < 4 {
        return out;
    }
    for ch in 0..3 {
        let c = [sh.coeffs[1][ch], sh.coeffs[2][ch], sh.coeffs[3][ch]];
        let w = rotation * Vector3::new(-c[2], -c[0], c[1]);
        out.coeffs[1][ch] = -w.y;
        out.coeffs[2][ch] = w.z;
        out.coeffs[3][ch] = -w.x;
    }
    out
}

/// Copy of each particle with `dynamic_cov` refreshed and SH rotated into
/// the current frame, as published after every simulated frame.
pub fn publish<T: Real>(particles: &[GaussianParticle<T>]) -> Result<Vec<GaussianParticle<T>>> {
    let all: Vec<Result<GaussianParticle<T>>> = particles
        .par_iter()
        .enumerate()
        .map(|(i, p)| {
            let r = extract_rotation(&p.def_grad).map_err(|e| e.at_particle(i))?;
            Ok(GaussianParticle {
                dynamic_cov: update_covariance(&p.static_cov, &p.def_grad),
                sh: rotate_sh(&p.sh, &r),
                ..p.clone()
            })
        })
        .collect();
    all.into_iter().collect()
}
