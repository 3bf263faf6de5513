use super::{GaussianParticle, NaccMaterial};
use crate::real::Real;

/// One invariant violation found by [`validate`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    /// Offending particle, or `None` for material-table problems.
    pub particle: Option<usize>,
    pub message: String,
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self.particle {
            Some(i) => write!(f, "particle {i}: {}", self.message),
            None => write!(f, "{}", self.message),
        }
    }
}

/// Reports every invariant violation in a particle set. Never mutates.
pub fn validate<T: Real>(particles: &[GaussianParticle<T>], materials: &[NaccMaterial<T>]) -> Vec<Violation> {
    let mut out = Vec::new();
    for (i, m) in materials.iter().enumerate() {
        for msg in m.violations() {
            out.push(Violation {
                particle: None,
                message: format!("material {i}: {msg}"),
            });
        }
    }
    let tol = T::of(1e-9);
    for (i, p) in particles.iter().enumerate() {
        let mut bad = |message: &str| {
            out.push(Violation {
                particle: Some(i),
                message: message.to_string(),
            })
        };
        if !(p.opacity >= T::zero() && p.opacity <= T::one()) {
            bad("opacity out of [0,1]");
        }
        if !(p.mass > T::zero()) {
            bad("mass must be > 0");
        }
        if !(p.initial_volume > T::zero()) {
            bad("initial volume must be > 0");
        }
        if !(p.def_grad.determinant() > T::zero()) {
            bad("degenerate deformation gradient");
        }
        let a = &p.static_cov;
        let scale = a.norm().max(T::min_value().unwrap_or(T::zero()));
        if (a - a.transpose()).norm() > tol * scale {
            bad("static covariance not symmetric");
        } else {
            let eig = a.symmetric_eigenvalues();
            if eig.iter().any(|l| !(*l > T::zero())) {
                bad("static covariance not positive definite");
            }
        }
        if p.material_id >= materials.len() {
            bad("material id has no entry in the material table");
        }
        let finite = p.position.iter().chain(p.velocity.iter()).all(|v| v.is_finite());
        if !finite {
            bad("non-finite position or velocity");
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::presets;
    use nalgebra::{Matrix3, Vector3};

    fn particle() -> GaussianParticle<f64> {
        GaussianParticle::at_rest(Vector3::zeros(), 1e-6, 1000.0, Matrix3::identity() * 1e-6, 0, -0.5)
    }

    #[test]
    fn reports_opacity_and_degenerate_gradient() {
        let mats = [presets::jelly()];
        let mut a = particle();
        a.opacity = 1.2;
        let mut b = particle();
        b.def_grad = Matrix3::zeros();
        let report = validate(&[a, b], &mats);
        assert_eq!(report.len(), 2);
        assert_eq!(report[0].message, "opacity out of [0,1]");
        assert_eq!(report[0].particle, Some(0));
        assert_eq!(report[1].message, "degenerate deformation gradient");
    }

    #[test]
    fn well_formed_set_is_clean() {
        let mats = [presets::jelly()];
        let set: Vec<_> = (0..8).map(|_| particle()).collect();
        assert!(validate(&set, &mats).is_empty());
    }

    #[test]
    fn material_lookup_must_be_total() {
        let mut p = particle();
        p.material_id = 3;
        let report = validate(&[p], &[presets::jelly()]);
        assert_eq!(report.len(), 1);
        assert!(report[0].message.contains("material id"));
    }
}
