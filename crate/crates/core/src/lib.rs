//! Elastoplastic material point method on Gaussian-splat particle clouds.
//!
//! Every numeric type is generic over [`Real`] (`f32` or `f64`); the
//! aliases below fix the scalar to `f64`, which is what the CLI uses.

pub mod analysis;
pub mod constitutive;
pub mod engine;
pub mod error;
pub mod evolution;
pub mod fill;
pub mod linalg;
pub mod model;
pub mod real;
pub mod shading;

pub use error::{Error, Result};
pub use real::Real;

pub type Scalar = f64;
pub type Vec3 = nalgebra::Vector3<Scalar>;
pub type Mat3 = nalgebra::Matrix3<Scalar>;
pub type Particle = model::GaussianParticle<Scalar>;
pub type Material = model::NaccMaterial<Scalar>;
pub type Grid = model::MpmGrid<Scalar>;
pub type Scene = model::SceneConfig<Scalar>;
