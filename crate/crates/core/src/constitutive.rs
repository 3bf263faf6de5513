//! NACC elastoplasticity: elastic stress, the (p, q) yield surface, the
//! continuous return map with a dynamic projection centre, hardening, and
//! the fluid limit.
//!
//! Sign convention: `p = -tr(τ)/3` is positive in compression. The yield
//! ellipse spans `p ∈ [-β p0, p0]` on the p axis.

use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};
use crate::linalg::RotSvd;
use crate::model::{ElasticModel, NaccMaterial, YieldPoint};
use crate::real::Real;

/// Default exponent of the dynamic projection centre.
pub const DEFAULT_K: f64 = 2.0;

/// Which branch of the return map produced a result.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ReturnCase {
    Elastic,
    /// Projected onto the compressive tip `(p0, 0)`.
    TipUpper,
    /// Projected onto the tensile tip `(-β p0, 0)`.
    TipLower,
    /// Intersection of the centre–trial line with the ellipse.
    Interior,
}

/// Outcome of the (p, q)-plane projection alone.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Projection<T: Real> {
    pub projected: YieldPoint<T>,
    pub case: ReturnCase,
}

/// Full plastic correction of one particle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReturnMapResult<T: Real> {
    pub trial: YieldPoint<T>,
    pub projected: YieldPoint<T>,
    pub case: ReturnCase,
    pub new_def_grad: Matrix3<T>,
    pub delta_alpha: T,
}

/// SVD of F with its principal Hencky strains, shared by the routines below.
#[derive(Debug, Clone, Copy)]
struct Principal<T: Real> {
    svd: RotSvd<T>,
    strain: Vector3<T>,
}

impl<T: Real> Principal<T> {
    fn of(f: &Matrix3<T>) -> Result<Self> {
        let svd = RotSvd::of_deformation(f)?;
        let strain = svd.sigma.map(|s| s.ln());
        Ok(Principal { svd, strain })
    }

    fn stress(&self, m: &NaccMaterial<T>) -> Vector3<T> {
        principal_stress(&self.strain, m)
    }
}

/// Principal Kirchhoff stresses from principal Hencky strains.
fn principal_stress<T: Real>(strain: &Vector3<T>, m: &NaccMaterial<T>) -> Vector3<T> {
    let (mu, lambda) = (m.mu(), m.lambda());
    let tr = strain.sum();
    match m.elastic_model {
        ElasticModel::StvkHencky => strain.map(|e| T::of(2.0) * mu * e + lambda * tr),
        ElasticModel::NeoHookean => strain.map(|e| mu * ((T::of(2.0) * e).exp() - T::one()) + lambda * tr),
    }
}

fn pq_of_principal<T: Real>(tau: &Vector3<T>) -> YieldPoint<T> {
    let p = -tau.sum() / T::of(3.0);
    let dev = tau.add_scalar(p);
    YieldPoint {
        p,
        q: (T::of(1.5)).sqrt() * dev.norm(),
    }
}

/// Kirchhoff stress `τ = (∂ψ/∂F) Fᵀ` of the elastic model.
pub fn kirchhoff_stress<T: Real>(f: &Matrix3<T>, m: &NaccMaterial<T>) -> Result<Matrix3<T>> {
    let pr = Principal::of(f)?;
    let tau = pr.stress(m);
    let u = &pr.svd.u;
    Ok(u * Matrix3::from_diagonal(&tau) * u.transpose())
}

/// Stored elastic energy density per unit reference volume.
pub fn elastic_energy<T: Real>(f: &Matrix3<T>, m: &NaccMaterial<T>) -> Result<T> {
    let pr = Principal::of(f)?;
    let (mu, lambda) = (m.mu(), m.lambda());
    let tr = pr.strain.sum();
    let half = T::of(0.5);
    Ok(match m.elastic_model {
        ElasticModel::StvkHencky => mu * pr.strain.norm_squared() + half * lambda * tr * tr,
        ElasticModel::NeoHookean => {
            let i1 = pr.svd.sigma.norm_squared();
            half * mu * (i1 - T::of(3.0)) - mu * tr + half * lambda * tr * tr
        }
    })
}

/// `p = -tr(τ)/3`, `q = sqrt(3/2) |dev τ|`.
pub fn pq_of_stress<T: Real>(tau: &Matrix3<T>) -> YieldPoint<T> {
    let p = -tau.trace() / T::of(3.0);
    let dev = tau + Matrix3::identity() * p;
    YieldPoint {
        p,
        q: T::of(1.5).sqrt() * dev.norm(),
    }
}

pub fn pq_of<T: Real>(f: &Matrix3<T>, m: &NaccMaterial<T>) -> Result<YieldPoint<T>> {
    Ok(pq_of_principal(&Principal::of(f)?.stress(m)))
}

/// Hardening law `p0 = κ sinh(ξ max(-α, 0))`.
pub fn p0_of<T: Real>(alpha: T, m: &NaccMaterial<T>) -> T {
    m.kappa() * (m.xi * (-alpha).max(T::zero())).sinh()
}

/// NACC yield function; `y <= 0` is the elastic region.
pub fn yield_function<T: Real>(pt: &YieldPoint<T>, p0: T, m: &NaccMaterial<T>) -> T {
    let beta = m.beta;
    let m2 = m.slope_m * m.slope_m;
    pt.q * pt.q * (T::one() + T::of(2.0) * beta) + m2 * (pt.p + beta * p0) * (pt.p - p0)
}

/// Residual tolerance for points the return map places on the surface.
pub fn surface_tolerance<T: Real>(p0: T, m: &NaccMaterial<T>) -> T {
    let s = m.slope_m * p0;
    T::of(1e-8) * (s * s).max(T::one())
}

/// Centre of the yield ellipse on the p axis.
pub fn ellipse_center<T: Real>(p0: T, beta: T) -> T {
    (T::one() - beta) / T::of(2.0) * p0
}

/// Dynamic projection centre `p_c + φ_k (p_tr - p_c)`, `φ_k = |(p_tr - p_c)/(p0 - p_c)|^k`.
pub fn dynamic_center<T: Real>(p_trial: T, p0: T, beta: T, k: T) -> T {
    let pc = ellipse_center(p0, beta);
    let half_axis = p0 - pc;
    if !(half_axis > T::zero()) {
        return pc;
    }
    let phi = ((p_trial - pc) / half_axis).abs().powf(k);
    pc + phi * (p_trial - pc)
}

/// Projects a trial (p, q) state onto the yield surface.
///
/// Elastic trials are returned unchanged. Beyond the tips the trial snaps
/// to the tip; in between it moves along the line through the dynamic
/// centre `(p_c', 0)` until it meets the ellipse. With `p0 = 0` every
/// non-trivial trial collapses to the origin.
pub fn return_map<T: Real>(trial: &YieldPoint<T>, p0: T, m: &NaccMaterial<T>, k: T) -> Projection<T> {
    let elastic = Projection {
        projected: *trial,
        case: ReturnCase::Elastic,
    };
    if yield_function(trial, p0, m) <= T::zero() {
        return elastic;
    }
    let beta = m.beta;
    if !(p0 > T::zero()) {
        let case = if trial.p >= T::zero() {
            ReturnCase::TipUpper
        } else {
            ReturnCase::TipLower
        };
        return Projection {
            projected: YieldPoint::default(),
            case,
        };
    }
    if trial.p > p0 {
        return Projection {
            projected: YieldPoint { p: p0, q: T::zero() },
            case: ReturnCase::TipUpper,
        };
    }
    let lower = -beta * p0;
    if trial.p < lower {
        return Projection {
            projected: YieldPoint { p: lower, q: T::zero() },
            case: ReturnCase::TipLower,
        };
    }

    // segment s(t) = (c + t (p_tr - c), t q_tr); y(s(t)) = a t² + b t + c0
    let center = dynamic_center(trial.p, p0, beta, k);
    let dp = trial.p - center;
    let m2 = m.slope_m * m.slope_m;
    let one_2b = T::one() + T::of(2.0) * beta;
    let (u, w) = (center + beta * p0, center - p0);
    let a = one_2b * trial.q * trial.q + m2 * dp * dp;
    let b = m2 * dp * (u + w);
    let c0 = m2 * u * w;
    let disc = (b * b - T::of(4.0) * a * c0).max(T::zero()).sqrt();
    // c0 <= 0 so the roots straddle zero; take the non-negative one without cancellation
    let t = if b > T::zero() {
        T::of(-2.0) * c0 / (b + disc)
    } else {
        (disc - b) / (T::of(2.0) * a)
    };
    let t = t.max(T::zero()).min(T::one());
    Projection {
        projected: YieldPoint {
            p: center + t * dp,
            q: t * trial.q,
        },
        case: ReturnCase::Interior,
    }
}

/// Elastic volume ratio implied by pressure, `sqrt(1 - 2p/κ)`.
pub fn elastic_volume<T: Real>(p: T, m: &NaccMaterial<T>) -> Result<T> {
    let radicand = T::one() - T::of(2.0) * p / m.kappa();
    if !(radicand > T::zero()) {
        return Err(Error::PressureOverflow {
            pressure: p.to_f64_lossy(),
            radicand: radicand.to_f64_lossy(),
        });
    }
    Ok(radicand.sqrt())
}

/// Hardening increment `ln(J_E(p_trial) / J_E(p_new))`.
pub fn delta_alpha<T: Real>(p_trial: T, p_new: T, m: &NaccMaterial<T>) -> Result<T> {
    let jt = elastic_volume(p_trial, m)?;
    let jn = elastic_volume(p_new, m)?;
    if p_trial == p_new {
        return Ok(T::zero());
    }
    Ok((jt / jn).ln())
}

pub fn update_alpha<T: Real>(alpha: T, p_trial: T, p_new: T, m: &NaccMaterial<T>) -> Result<T> {
    Ok(alpha + delta_alpha(p_trial, p_new, m)?)
}

/// Rebuilds an elastic deformation gradient whose (p, q) equals `projected`.
///
/// The rotations of the trial SVD and the direction of the deviatoric
/// Hencky strain are kept; only the volumetric and deviatoric magnitudes
/// change.
pub fn reconstruct_def_grad<T: Real>(
    trial_def_grad: &Matrix3<T>,
    projected: &YieldPoint<T>,
    m: &NaccMaterial<T>,
) -> Result<Matrix3<T>> {
    let pr = Principal::of(trial_def_grad)?;
    Ok(reconstruct_from(&pr, projected, m))
}

fn reconstruct_from<T: Real>(pr: &Principal<T>, target: &YieldPoint<T>, m: &NaccMaterial<T>) -> Matrix3<T> {
    let three = T::of(3.0);
    let trace = pr.strain.sum();
    let dev = pr.strain.add_scalar(-trace / three);
    let dev_norm = dev.norm();
    let dir = if dev_norm > T::zero() {
        dev / dev_norm
    } else {
        Vector3::zeros()
    };
    let (vol, mag) = match m.elastic_model {
        ElasticModel::StvkHencky => {
            let mag = if dev_norm > T::zero() {
                target.q / (T::of(1.5).sqrt() * T::of(2.0) * m.mu())
            } else {
                T::zero()
            };
            (-target.p / m.kappa(), mag)
        }
        ElasticModel::NeoHookean => neo_hookean_strain(&dir, dev_norm > T::zero(), target, m, trace, dev_norm),
    };
    let strain = dir * mag + Vector3::repeat(vol / three);
    pr.svd.compose(&strain.map(|e| e.exp()))
}

/// Solves for (ln J, |dev ε|) hitting `target` under Neo-Hookean elasticity
/// along a fixed deviatoric direction.
fn neo_hookean_strain<T: Real>(
    dir: &Vector3<T>,
    has_dev: bool,
    target: &YieldPoint<T>,
    m: &NaccMaterial<T>,
    vol0: T,
    mag0: T,
) -> (T, T) {
    let (mu, lambda) = (m.mu(), m.lambda());
    let two = T::of(2.0);
    let three = T::of(3.0);
    let sq32 = T::of(1.5).sqrt();
    let shape = |s: T| -> (T, T) {
        // mean and deviator norm of exp(2 s d)
        let e = dir.map(|d| (two * s * d).exp());
        let mean = e.sum() / three;
        (mean, e.add_scalar(-mean).norm())
    };
    let mut vol = vol0;
    let mut mag = if has_dev { mag0 } else { T::zero() };
    for _ in 0..60 {
        let scale = (two * vol / three).exp();
        let new_mag = if has_dev && target.q > T::zero() {
            let want = target.q / (sq32 * mu * scale);
            let mut hi = mag.max(T::of(1e-3));
            while shape(hi).1 < want && hi < T::of(50.0) {
                hi *= two;
            }
            bracketed_root(|s| shape(s).1 - want, T::zero(), hi)
        } else {
            T::zero()
        };
        let mean = shape(new_mag).0;
        let pressure = |a: T| -mu * ((two * a / three).exp() * mean - T::one()) - lambda * a - target.p;
        let (mut lo, mut hi) = (vol - T::one(), vol + T::one());
        while pressure(lo) < T::zero() {
            lo -= T::one();
        }
        while pressure(hi) > T::zero() {
            hi += T::one();
        }
        let new_vol = bracketed_root(pressure, lo, hi);
        let done = (new_vol - vol).abs() <= T::of(1e-15) * (T::one() + vol.abs())
            && (new_mag - mag).abs() <= T::of(1e-15) * (T::one() + mag.abs());
        vol = new_vol;
        mag = new_mag;
        if done {
            break;
        }
    }
    (vol, mag)
}

/// Root of a continuous function with a sign change on `[lo, hi]`
/// (Illinois false position).
fn bracketed_root<T: Real>(f: impl Fn(T) -> T, mut lo: T, mut hi: T) -> T {
    let mut flo = f(lo);
    let mut fhi = f(hi);
    if flo == T::zero() {
        return lo;
    }
    if fhi == T::zero() {
        return hi;
    }
    let mut side = 0i8;
    let mut x = lo;
    for _ in 0..200 {
        x = (lo * fhi - hi * flo) / (fhi - flo);
        if !(x > lo && x < hi) {
            x = (lo + hi) * T::of(0.5);
        }
        let fx = f(x);
        if fx == T::zero() || (hi - lo) <= T::eps() * T::of(4.0) * (T::one() + x.abs()) {
            break;
        }
        if (fx > T::zero()) == (flo > T::zero()) {
            lo = x;
            flo = fx;
            if side == -1 {
                fhi *= T::of(0.5);
            }
            side = -1;
        } else {
            hi = x;
            fhi = fx;
            if side == 1 {
                flo *= T::of(0.5);
            }
            side = 1;
        }
    }
    x
}

/// Trial → projection → rebuilt F and hardening increment, for one particle.
pub fn plastic_update<T: Real>(
    trial_def_grad: &Matrix3<T>,
    alpha: T,
    m: &NaccMaterial<T>,
    k: T,
) -> Result<ReturnMapResult<T>> {
    let pr = Principal::of(trial_def_grad)?;
    let trial = pq_of_principal(&pr.stress(m));
    let p0 = p0_of(alpha, m);
    let proj = return_map(&trial, p0, m, k);
    if proj.case == ReturnCase::Elastic {
        return Ok(ReturnMapResult {
            trial,
            projected: trial,
            case: ReturnCase::Elastic,
            new_def_grad: *trial_def_grad,
            delta_alpha: T::zero(),
        });
    }
    let delta = delta_alpha(trial.p, proj.projected.p, m)?;
    Ok(ReturnMapResult {
        trial,
        projected: proj.projected,
        case: proj.case,
        new_def_grad: reconstruct_from(&pr, &proj.projected, m),
        delta_alpha: delta,
    })
}

/// Copy of `m` pushed to the fluid limit (`p0 → 0`): α₀ = -1e-6, β = 1e-3.
pub fn fluid_params<T: Real>(m: &NaccMaterial<T>) -> NaccMaterial<T> {
    NaccMaterial {
        alpha0: T::of(-1e-6),
        beta: T::of(1e-3),
        ..*m
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::presets;
    use nalgebra::Rotation3;
    use proptest::prelude::*;

    fn unit_material(beta: f64) -> NaccMaterial<f64> {
        NaccMaterial {
            youngs_modulus: 3000.0,
            poisson_ratio: 0.25,
            density: 1000.0,
            beta,
            alpha0: -0.04,
            xi: 2.0,
            slope_m: 2.36,
            elastic_model: ElasticModel::StvkHencky,
        }
    }

    #[test]
    fn identity_is_stress_free() {
        let m = presets::jelly::<f64>();
        let tau = kirchhoff_stress(&Matrix3::identity(), &m).unwrap();
        assert_eq!(tau, Matrix3::zeros());
        let pq = pq_of(&Matrix3::identity(), &m).unwrap();
        assert_eq!((pq.p, pq.q), (0.0, 0.0));
    }

    #[test]
    fn isotropic_stretch_gives_hydrostatic_stress() {
        let m = presets::jelly::<f64>();
        let c = 1.1f64;
        let tau = kirchhoff_stress(&(Matrix3::identity() * c), &m).unwrap();
        let expect = (3.0 * m.lambda() + 2.0 * m.mu()) * c.ln();
        for i in 0..3 {
            assert!((tau[(i, i)] - expect).abs() < 1e-10 * expect.abs());
        }
        assert!(tau[(0, 1)].abs() < 1e-10 && tau[(1, 2)].abs() < 1e-10);
        assert!(pq_of(&(Matrix3::identity() * c), &m).unwrap().q < 1e-9);
    }

    #[test]
    fn isochoric_shear_has_no_pressure() {
        let m = presets::jelly::<f64>();
        let mut f = Matrix3::identity();
        f[(0, 1)] = 0.01;
        let pq = pq_of(&f, &m).unwrap();
        assert!(pq.p.abs() < 1e-9 * m.kappa());
        assert!(pq.q > 0.0);
        // small-strain shear: q ≈ sqrt(3) μ γ
        assert!((pq.q - 3f64.sqrt() * m.mu() * 0.01).abs() < 1e-3 * pq.q);
    }

    #[test]
    fn degenerate_gradient_is_rejected() {
        let m = presets::jelly::<f64>();
        let f = Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, 0.0));
        assert!(matches!(kirchhoff_stress(&f, &m), Err(Error::DegenerateGradient { .. })));
        assert!(pq_of(&(-Matrix3::identity()), &m).is_err());
    }

    #[test]
    fn p0_hardening_law() {
        let mut m = unit_material(1.0);
        m.xi = 2.0;
        // κ = 1000
        m.youngs_modulus = 1500.0;
        m.poisson_ratio = 0.25;
        assert!((m.kappa() - 1000.0).abs() < 1e-12);
        assert_eq!(p0_of(0.0, &m), 0.0);
        assert_eq!(p0_of(0.5, &m), 0.0);
        assert!((p0_of(-0.04, &m) - 80.085_360_644).abs() < 1e-8);
        assert!(p0_of(-0.2, &m) > p0_of(-0.1, &m));
    }

    #[test]
    fn yield_function_roots_and_value() {
        let m = unit_material(1.0);
        let p0 = 1.0;
        assert_eq!(yield_function(&YieldPoint::new(p0, 0.0), p0, &m), 0.0);
        assert_eq!(yield_function(&YieldPoint::new(-p0, 0.0), p0, &m), 0.0);
        let y = yield_function(&YieldPoint::new(0.0, 10.0), p0, &m);
        assert!((y - 294.4304).abs() < 1e-9);
    }

    #[test]
    fn return_map_cases() {
        let m = unit_material(1.0);
        let inside = YieldPoint::new(0.2, 0.1);
        let r = return_map(&inside, 1.0, &m, 2.0);
        assert_eq!(r.case, ReturnCase::Elastic);
        assert_eq!(r.projected, inside);

        let r = return_map(&YieldPoint::new(2.0, 0.5), 1.0, &m, 2.0);
        assert_eq!(r.case, ReturnCase::TipUpper);
        assert_eq!(r.projected, YieldPoint::new(1.0, 0.0));

        let r = return_map(&YieldPoint::new(-2.0, 0.5), 1.0, &m, 2.0);
        assert_eq!(r.case, ReturnCase::TipLower);
        assert_eq!(r.projected, YieldPoint::new(-1.0, 0.0));

        // centre is 0 and φ = 0: vertical projection onto q = M p0 / sqrt(3)
        let r = return_map(&YieldPoint::new(0.0, 10.0), 1.0, &m, 2.0);
        assert_eq!(r.case, ReturnCase::Interior);
        assert!(r.projected.p.abs() < 1e-15);
        assert!((r.projected.q - 2.36 / 3f64.sqrt()).abs() < 1e-12);
        assert!((r.projected.q - 1.36254).abs() < 1e-5);
    }

    #[test]
    fn zero_p0_collapses_to_origin() {
        let m = unit_material(1.0);
        for trial in [YieldPoint::new(0.3, 0.0), YieldPoint::new(-0.3, 2.0), YieldPoint::new(0.0, 1.0)] {
            let r = return_map(&trial, 0.0, &m, 2.0);
            assert_ne!(r.case, ReturnCase::Elastic);
            assert_eq!(r.projected, YieldPoint::new(0.0, 0.0));
        }
        assert_eq!(return_map(&YieldPoint::new(0.0, 0.0), 0.0, &m, 2.0).case, ReturnCase::Elastic);
    }

    #[test]
    fn continuity_across_the_right_tip() {
        let m = unit_material(1.0);
        // the left projection sits at p ≈ p0 - (k+1)ε, so the gap behaves like M·sqrt(2ε)
        let mut last = f64::INFINITY;
        for eps in [1e-3, 1e-4, 1e-5, 1e-6, 1e-7, 1e-8] {
            let a = return_map(&YieldPoint::new(1.0 - eps, 1e3), 1.0, &m, 2.0).projected;
            let b = return_map(&YieldPoint::new(1.0 + eps, 1e3), 1.0, &m, 2.0).projected;
            let gap = a.distance(&b);
            let asymptote = 2.36 * (2.0 * eps).sqrt();
            assert!(gap < last);
            if eps <= 1e-5 {
                assert!((gap / asymptote - 1.0).abs() < 1e-2, "eps {eps}: gap {gap}");
            }
            last = gap;
        }
    }

    #[test]
    fn alpha_update_values() {
        let mut m = unit_material(1.0);
        m.youngs_modulus = 1500.0;
        assert_eq!(delta_alpha(100.0, 100.0, &m).unwrap(), 0.0);
        let d = delta_alpha(100.0, 80.0, &m).unwrap();
        let expect = (0.8f64.sqrt() / 0.84f64.sqrt()).ln();
        assert!((d - expect).abs() < 1e-15);
        assert!((d + 0.024_395).abs() < 1e-6);
        assert!(delta_alpha(-50.0, 10.0, &m).unwrap() > 0.0);
        assert!(matches!(delta_alpha(600.0, 10.0, &m), Err(Error::PressureOverflow { .. })));
        assert_eq!(update_alpha(-0.04, 3.0, 3.0, &m).unwrap(), -0.04);
    }

    #[test]
    fn fluid_copy_keeps_elasticity() {
        let m = presets::jelly::<f64>();
        let f = fluid_params(&m);
        assert_eq!((f.youngs_modulus, f.poisson_ratio, f.density), (m.youngs_modulus, m.poisson_ratio, m.density));
        assert_eq!((f.alpha0, f.beta), (-1e-6, 1e-3));
        let p0 = p0_of(f.alpha0, &f);
        assert!((p0 - f.kappa() * (f.xi * 1e-6).sinh()).abs() <= 1e-12 * p0);
        assert!(p0 < 1e-5 * f.kappa() * f.xi);
    }

    #[test]
    fn reconstruct_with_own_pq_is_identity() {
        for model in [ElasticModel::StvkHencky, ElasticModel::NeoHookean] {
            let m = presets::jelly::<f64>().with_model(model);
            let f = Matrix3::new(1.05, 0.02, -0.01, 0.0, 0.97, 0.03, 0.01, 0.0, 1.02);
            let pq = pq_of(&f, &m).unwrap();
            let g = reconstruct_def_grad(&f, &pq, &m).unwrap();
            assert!((g - f).norm() < 1e-12, "{model:?}: {}", (g - f).norm());

            let vol = Matrix3::identity() * 0.95;
            let pq = pq_of(&vol, &m).unwrap();
            let g = reconstruct_def_grad(&vol, &YieldPoint::new(pq.p, 0.0), &m).unwrap();
            assert!((g - vol).norm() < 1e-12);
        }
    }

    #[test]
    fn elastic_trial_leaves_state_untouched() {
        let m = presets::jelly::<f64>();
        let f = Matrix3::new(1.001, 0.0005, 0.0, 0.0, 0.999, 0.0, 0.0, 0.0, 1.0);
        let r = plastic_update(&f, m.alpha0, &m, 2.0).unwrap();
        assert_eq!(r.case, ReturnCase::Elastic);
        assert_eq!(r.new_def_grad, f);
        assert_eq!(r.delta_alpha, 0.0);
    }

    #[test]
    fn works_in_single_precision() {
        let m = presets::kiwi::<f32>();
        let p0 = p0_of(m.alpha0, &m);
        let trial = YieldPoint::new(0.3 * p0, 5.0 * p0);
        let r = return_map(&trial, p0, &m, 2.0);
        assert_eq!(r.case, ReturnCase::Interior);
        let y = yield_function(&r.projected, p0, &m);
        assert!(y.abs() < 1e-4 * (m.slope_m * p0).powi(2));
        let f = Matrix3::<f32>::identity() * 1.01;
        assert!(pq_of(&f, &m).unwrap().p < 0.0);
    }

    fn deformation() -> impl Strategy<Value = Matrix3<f64>> {
        (
            prop::array::uniform3(-3.2f64..3.2),
            prop::array::uniform3(0.6f64..1.5),
            prop::array::uniform3(-3.2f64..3.2),
        )
            .prop_map(|(a, s, b)| {
                let u = Rotation3::from_euler_angles(a[0], a[1], a[2]).into_inner();
                let v = Rotation3::from_euler_angles(b[0], b[1], b[2]).into_inner();
                u * Matrix3::from_diagonal(&Vector3::from(s)) * v.transpose()
            })
    }

    proptest! {
        #[test]
        fn projection_lands_on_surface(
            beta in 0.0f64..6.0,
            p0 in 1e-3f64..1e3,
            p_rel in -8.0f64..4.0,
            q_rel in 0.0f64..50.0,
            k in prop::sample::select(vec![1.0, 2.0, 4.0, 200.0]),
        ) {
            let m = unit_material(beta);
            let trial = YieldPoint::new(p_rel * p0, q_rel * p0);
            let r = return_map(&trial, p0, &m, k);
            if r.case == ReturnCase::Elastic {
                prop_assert!(yield_function(&trial, p0, &m) <= 0.0);
            } else {
                let y = yield_function(&r.projected, p0, &m);
                prop_assert!(y.abs() <= surface_tolerance(p0, &m), "y = {y:e}");
                prop_assert!(r.projected.p >= -beta * p0 * (1.0 + 1e-12) && r.projected.p <= p0 * (1.0 + 1e-12));
                prop_assert!(r.projected.q >= 0.0);
            }
        }

        #[test]
        fn case_is_scale_invariant(
            beta in 0.0f64..6.0,
            p_rel in -8.0f64..4.0,
            q_rel in 0.0f64..50.0,
            s in prop::sample::select(vec![0.5, 2.0, 8.0, 1024.0]),
        ) {
            let m = unit_material(beta);
            let trial = YieldPoint::new(p_rel, q_rel);
            let y1 = yield_function(&trial, 1.0, &m);
            let y2 = yield_function(&trial.scaled(s), s, &m);
            prop_assert!((y2 - s * s * y1).abs() <= 1e-12 * (1.0 + y2.abs()));
            let c1 = return_map(&trial, 1.0, &m, 2.0).case;
            let c2 = return_map(&trial.scaled(s), s, &m, 2.0).case;
            prop_assert_eq!(c1, c2);
        }

        #[test]
        fn reconstruct_hits_projected_point(f in deformation(), neo in any::<bool>()) {
            let model = if neo { ElasticModel::NeoHookean } else { ElasticModel::StvkHencky };
            let m = presets::kiwi::<f64>().with_model(model);
            let trial = pq_of(&f, &m).unwrap();
            let p0 = p0_of(m.alpha0, &m);
            let r = return_map(&trial, p0, &m, 2.0);
            let g = reconstruct_def_grad(&f, &r.projected, &m).unwrap();
            let back = pq_of(&g, &m).unwrap();
            let scale = r.projected.p.abs().max(r.projected.q).max(1e-9 * m.kappa());
            prop_assert!((back.p - r.projected.p).abs() <= 1e-6 * scale, "{:?} vs {:?}", back, r.projected);
            prop_assert!((back.q - r.projected.q).abs() <= 1e-6 * scale, "{:?} vs {:?}", back, r.projected);
        }
    }
}
