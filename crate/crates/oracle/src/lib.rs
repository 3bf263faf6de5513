//! Slow, independent reference implementations for checking `splatmpm`.
//!
//! Nothing in the production crates depends on this one; it is pulled in
//! as a dev-dependency only.

use nalgebra::{Matrix3, Vector3};
use splatmpm::model::{ElasticModel, NaccMaterial, YieldPoint};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OracleError {
    #[error("oracle not applicable: {0}")]
    Inapplicable(&'static str),
}

/// Bisection stops once the bracket in the segment parameter is this narrow.
pub const BISECTION_WIDTH: f64 = 1e-14;

fn yield_value(p: f64, q: f64, p0: f64, m: &NaccMaterial<f64>) -> f64 {
    let b = m.beta;
    (1.0 + 2.0 * b) * q * q + m.slope_m * m.slope_m * (p + b * p0) * (p - p0)
}

/// Interior-branch return map by bisection along the dynamic-centre segment.
///
/// Only valid for trials with `y > 0` and `-β p0 <= p <= p0`.
pub fn oracle_return_map(
    trial: &YieldPoint<f64>,
    p0: f64,
    m: &NaccMaterial<f64>,
    k: f64,
) -> Result<YieldPoint<f64>, OracleError> {
    let beta = m.beta;
    if !(p0 > 0.0) || trial.p > p0 || trial.p < -beta * p0 {
        return Err(OracleError::Inapplicable("trial outside the interior pressure band"));
    }
    let center = (1.0 - beta) / 2.0 * p0;
    let phi = ((trial.p - center) / (p0 - center)).abs().powf(k);
    let start = center + phi * (trial.p - center);
    let at = |t: f64| (start + t * (trial.p - start), t * trial.q);

    let g = |t: f64| {
        let (p, q) = at(t);
        yield_value(p, q, p0, m)
    };
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    if g(hi) == 0.0 {
        let (p, q) = at(1.0);
        return Ok(YieldPoint { p, q });
    }
    if !(g(lo) <= 0.0 && g(hi) > 0.0) {
        return Err(OracleError::Inapplicable("no sign change along the segment"));
    }
    while hi - lo > BISECTION_WIDTH {
        let mid = 0.5 * (lo + hi);
        if g(mid) <= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let (p, q) = at(0.5 * (lo + hi));
    Ok(YieldPoint { p, q })
}

/// Splat density `Σ σ exp(-½ dᵀ A⁻¹ d)` summed over every splat, no cut-off.
pub fn oracle_density(splats: &[(Vector3<f64>, Matrix3<f64>, f64)], query: &Vector3<f64>) -> f64 {
    splats
        .iter()
        .map(|(center, cov, opacity)| {
            let inv = cov.try_inverse().expect("invertible covariance");
            let d = query - center;
            opacity * (-0.5 * (d.transpose() * inv * d)[(0, 0)]).exp()
        })
        .sum()
}

/// Elastic energy from the eigenvalues of `C = FᵀF` (no SVD involved).
pub fn energy(f: &Matrix3<f64>, m: &NaccMaterial<f64>) -> f64 {
    let mu = m.youngs_modulus / (2.0 * (1.0 + m.poisson_ratio));
    let lambda = m.youngs_modulus * m.poisson_ratio / ((1.0 + m.poisson_ratio) * (1.0 - 2.0 * m.poisson_ratio));
    let c = f.transpose() * f;
    let ln_j = f.determinant().ln();
    match m.elastic_model {
        ElasticModel::StvkHencky => {
            let eig = c.symmetric_eigenvalues();
            let eps = eig.map(|l| 0.5 * l.ln());
            mu * eps.norm_squared() + 0.5 * lambda * eps.sum().powi(2)
        }
        ElasticModel::NeoHookean => 0.5 * mu * (c.trace() - 3.0) - mu * ln_j + 0.5 * lambda * ln_j * ln_j,
    }
}

/// Kirchhoff stress `P Fᵀ` with `P` from central differences of [`energy`].
pub fn oracle_fd_stress(f: &Matrix3<f64>, m: &NaccMaterial<f64>, h: f64) -> Matrix3<f64> {
    let mut piola = Matrix3::zeros();
    for i in 0..3 {
        for j in 0..3 {
            let mut fp = *f;
            let mut fm = *f;
            fp[(i, j)] += h;
            fm[(i, j)] -= h;
            piola[(i, j)] = (energy(&fp, m) - energy(&fm, m)) / (2.0 * h);
        }
    }
    piola * f.transpose()
}
