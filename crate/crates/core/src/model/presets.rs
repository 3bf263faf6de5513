//! Published per-scene parameter rows (material, grid spacing, time steps).
//!
//! The density column is given as 2 g/cm³ and stored here in kg/m³.

use super::{ColorBand, ColorRule, ElasticModel, NaccMaterial};
use crate::real::Real;

pub const DENSITY: f64 = 2000.0;
pub const SLOPE_M: f64 = 2.36;

#[derive(Debug, Clone, PartialEq)]
pub struct SceneRow<T: Real> {
    pub name: &'static str,
    pub frame_dt: T,
    pub grid_spacing: T,
    pub step_dt: T,
    /// One entry per part; watermelon lists rind, flesh, seed.
    pub materials: Vec<NaccMaterial<T>>,
}

fn nacc<T: Real>(e: f64, nu: f64, alpha0: f64, beta: f64, xi: f64) -> NaccMaterial<T> {
    NaccMaterial {
        youngs_modulus: T::of(e),
        poisson_ratio: T::of(nu),
        density: T::of(DENSITY),
        beta: T::of(beta),
        alpha0: T::of(alpha0),
        xi: T::of(xi),
        slope_m: T::of(SLOPE_M),
        elastic_model: ElasticModel::StvkHencky,
    }
}

fn row<T: Real>(name: &'static str, frame_dt: f64, dx: f64, dt: f64, m: Vec<NaccMaterial<T>>) -> SceneRow<T> {
    SceneRow {
        name,
        frame_dt: T::of(frame_dt),
        grid_spacing: T::of(dx),
        step_dt: T::of(dt),
        materials: m,
    }
}

pub fn watermelon_rind<T: Real>() -> NaccMaterial<T> {
    nacc(2000.0, 0.38, -0.04, 2.0, 2.0)
}
pub fn watermelon_flesh<T: Real>() -> NaccMaterial<T> {
    nacc(1000.0, 0.38, -0.04, 0.6, 2.0)
}
pub fn watermelon_seed<T: Real>() -> NaccMaterial<T> {
    nacc(1.0e4, 0.38, -0.04, 5.0, 2.0)
}
pub fn jelly<T: Real>() -> NaccMaterial<T> {
    nacc(2000.0, 0.45, -0.5, 1.0, 2.0)
}
pub fn kiwi<T: Real>() -> NaccMaterial<T> {
    nacc(2000.0, 0.42, -0.04, 1.0, 2.0)
}
pub fn sandcastle<T: Real>() -> NaccMaterial<T> {
    nacc(50.0, 0.05, -0.04, 0.01, 1.0)
}

pub fn all<T: Real>() -> Vec<SceneRow<T>> {
    vec![
        row("watermelon", 1.0 / 50.0, 3e-3, 1e-4, vec![watermelon_rind(), watermelon_flesh(), watermelon_seed()]),
        row("jelly", 1.0 / 500.0, 3e-3, 1e-5, vec![jelly()]),
        row("pumpkin", 1.0 / 50.0, 3e-3, 1e-4, vec![nacc(4000.0, 0.40, -0.04, 1.0, 2.0)]),
        row("kiwi", 1.0 / 50.0, 1e-2, 1e-4, vec![kiwi()]),
        row("pineapple", 1.0 / 50.0, 1e-2, 1e-4, vec![nacc(5000.0, 0.39, -0.04, 1.0, 2.0)]),
        row("dragonfruit", 1.0 / 50.0, 1e-2, 1e-4, vec![nacc(2000.0, 0.42, -0.04, 1.0, 2.0)]),
        row("tosta", 1.0 / 50.0, 5e-3, 1e-4, vec![nacc(2000.0, 0.38, -0.1, 1.0, 2.0)]),
        row("sandcastle", 1.0 / 50.0, 1e-2, 1e-4, vec![sandcastle()]),
    ]
}

/// Rind / flesh / seed split by colour: near-black → seed (2), saturated
/// red → flesh (1), anything else → rind (0). Ids index [`all`]'s watermelon row.
pub fn watermelon_color_rule<T: Real>() -> ColorRule<T> {
    let c = |a: [f64; 3]| a.map(T::of);
    ColorRule {
        bands: vec![
            ColorBand {
                min: c([0.0, 0.0, 0.0]),
                max: c([0.2, 0.2, 0.2]),
                material: 2,
            },
            ColorBand {
                min: c([0.6, 0.0, 0.0]),
                max: c([1.0, 0.4, 0.4]),
                material: 1,
            },
        ],
        default_material: 0,
    }
}

pub fn by_name<T: Real>(name: &str) -> Option<SceneRow<T>> {
    all().into_iter().find(|r| r.name.eq_ignore_ascii_case(name))
}
