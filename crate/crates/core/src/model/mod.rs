//! Shared domain types: particles, materials, the background grid and the
//! declarative scene description. No physics lives here.

mod config;
mod grid;
pub mod presets;
mod validate;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::real::Real;

pub use config::{
    substep_ratio, CameraSpec, ColorBand, ColorRule, ConfigViolation, Domain, LightSpec,
    Lighting, MaterialAssignment, MaterialSpec, SceneConfig, SplatSource, Visibility,
    SCHEMA_VERSION,
};
pub use grid::{MpmGrid, NodeBox};
pub use validate::{validate, Violation};

/// Real spherical-harmonic colour coefficients, coefficient-major.
///
/// Entry `k` holds the RGB weights of basis function `k` in the usual
/// band ordering (`k = 0` is band 0, `1..4` band 1, `4..9` band 2, ...).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ShCoeffs<T: Real> {
    pub coeffs: Vec<[T; 3]>,
}

/// Largest SH degree read from or written to splat files.
pub const MAX_SH_DEGREE: usize = 3;

impl<T: Real> ShCoeffs<T> {
    pub fn band0(dc: [T; 3]) -> Self {
        ShCoeffs { coeffs: vec![dc] }
    }

    /// All-zero coefficients up to and including `degree`.
    pub fn zeros(degree: usize) -> Self {
        ShCoeffs {
            coeffs: vec![[T::zero(); 3]; (degree + 1) * (degree + 1)],
        }
    }

    /// Highest complete band present, or `None` when empty.
    pub fn degree(&self) -> Option<usize> {
        let n = self.coeffs.len();
        if n == 0 {
            return None;
        }
        let mut d = 0;
        while (d + 2) * (d + 2) <= n {
            d += 1;
        }
        Some(d)
    }

    pub fn dc(&self) -> [T; 3] {
        self.coeffs.first().copied().unwrap_or([T::zero(); 3])
    }
}

/// Per-splat physical and appearance state.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianParticle<T: Real> {
    pub mass: T,
    pub initial_volume: T,
    pub ref_position: Vector3<T>,
    pub position: Vector3<T>,
    pub velocity: Vector3<T>,
    /// Elastic deformation gradient. Plastic flow is folded in by the return map.
    pub def_grad: Matrix3<T>,
    pub static_cov: Matrix3<T>,
    pub dynamic_cov: Matrix3<T>,
    pub opacity: T,
    pub sh: ShCoeffs<T>,
    pub alpha: T,
    pub material_id: usize,
}

impl<T: Real> GaussianParticle<T> {
    /// Particle at rest in its reference configuration.
    pub fn at_rest(
        position: Vector3<T>,
        volume: T,
        density: T,
        static_cov: Matrix3<T>,
        material_id: usize,
        alpha: T,
    ) -> Self {
        GaussianParticle {
            mass: density * volume,
            initial_volume: volume,
            ref_position: position,
            position,
            velocity: Vector3::zeros(),
            def_grad: Matrix3::identity(),
            static_cov,
            dynamic_cov: static_cov,
            opacity: T::one(),
            sh: ShCoeffs::band0([T::zero(); 3]),
            alpha,
            material_id,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ElasticModel {
    /// St. Venant–Kirchhoff on Hencky (logarithmic) strain.
    #[default]
    StvkHencky,
    NeoHookean,
}

/// Elastic moduli plus NACC fracture parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NaccMaterial<T: Real> {
    pub youngs_modulus: T,
    pub poisson_ratio: T,
    pub density: T,
    /// Tensile-cap ratio: the yield ellipse spans `[-beta p0, p0]`.
    pub beta: T,
    pub alpha0: T,
    /// Hardening rate.
    pub xi: T,
    /// Critical-state slope.
    pub slope_m: T,
    #[serde(default)]
    pub elastic_model: ElasticModel,
}

impl<T: Real> NaccMaterial<T> {
    pub fn mu(&self) -> T {
        self.youngs_modulus / (T::of(2.0) * (T::one() + self.poisson_ratio))
    }

    pub fn lambda(&self) -> T {
        let nu = self.poisson_ratio;
        self.youngs_modulus * nu / ((T::one() + nu) * (T::one() - T::of(2.0) * nu))
    }

    /// Bulk modulus `E / (3 (1 - 2ν))`.
    pub fn kappa(&self) -> T {
        self.youngs_modulus / (T::of(3.0) * (T::one() - T::of(2.0) * self.poisson_ratio))
    }

    pub fn with_model(mut self, model: ElasticModel) -> Self {
        self.elastic_model = model;
        self
    }

    pub fn with_beta(mut self, beta: T) -> Self {
        self.beta = beta;
        self
    }

    /// Invariant violations, empty when the material is usable.
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        let nu = self.poisson_ratio;
        if !(self.youngs_modulus > T::zero()) {
            out.push("youngs_modulus must be > 0".into());
        }
        if !(nu > T::zero() && nu < T::of(0.5)) {
            out.push("poisson_ratio must lie in (0, 0.5)".into());
        }
        if !(self.density > T::zero()) {
            out.push("density must be > 0".into());
        }
        if !(self.beta >= T::zero()) {
            out.push("beta must be >= 0".into());
        }
        if !(self.xi > T::zero()) {
            out.push("xi must be > 0".into());
        }
        if !(self.slope_m > T::zero()) {
            out.push("slope_m must be > 0".into());
        }
        if !self.alpha0.is_finite() {
            out.push("alpha0 must be finite".into());
        }
        if out.is_empty() {
            for (name, v) in [("mu", self.mu()), ("lambda", self.lambda()), ("kappa", self.kappa())] {
                if !(v.is_finite() && v > T::zero()) {
                    out.push(format!("derived {name} must be finite and positive"));
                }
            }
        }
        out
    }
}

/// Point in the (p, q) plane. `q` is never negative.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct YieldPoint<T: Real> {
    pub p: T,
    pub q: T,
}

impl<T: Real> YieldPoint<T> {
    pub fn new(p: T, q: T) -> Self {
        debug_assert!(!(q < T::zero()), "q must be non-negative");
        YieldPoint { p, q }
    }

    pub fn distance(&self, other: &Self) -> T {
        (self.p - other.p).hypot(self.q - other.q)
    }

    pub fn scaled(&self, s: T) -> Self {
        YieldPoint {
            p: self.p * s,
            q: self.q * s,
        }
    }
}
