use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::{ElasticModel, NaccMaterial};
use crate::engine::boundary::{BoundaryCondition, ScriptedObstacle};
use crate::real::Real;

pub const SCHEMA_VERSION: u32 = 1;

fn default_flip<T: Real>() -> T {
    T::of(0.95)
}
fn default_k<T: Real>() -> T {
    T::of(2.0)
}
fn default_one<T: Real>() -> T {
    T::one()
}
fn default_shininess<T: Real>() -> T {
    T::of(32.0)
}

/// Declarative scene: what to load, how it behaves and how it is lit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneConfig<T: Real> {
    pub schema_version: u32,
    pub sources: Vec<SplatSource<T>>,
    pub materials: Vec<MaterialSpec<T>>,
    #[serde(default)]
    pub color_rule: Option<ColorRule<T>>,
    pub gravity: Vector3<T>,
    pub domain: Domain<T>,
    pub grid_spacing: T,
    #[serde(default)]
    pub boundaries: Vec<BoundaryCondition<T>>,
    #[serde(default)]
    pub obstacles: Vec<ScriptedObstacle<T>>,
    pub frames: usize,
    pub frame_dt: T,
    pub step_dt: T,
    #[serde(default = "default_flip")]
    pub flip_ratio: T,
    /// Exponent of the dynamic projection centre.
    #[serde(default = "default_k")]
    pub return_map_k: T,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub lighting: Option<Lighting<T>>,
    #[serde(default)]
    pub camera: Option<CameraSpec<T>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplatSource<T: Real> {
    pub path: String,
    #[serde(default)]
    pub material: MaterialAssignment,
    /// Per-particle rest volume (m³) when the file carries none.
    #[serde(default)]
    pub particle_volume: Option<T>,
    #[serde(default = "Vector3::zeros")]
    pub offset: Vector3<T>,
    #[serde(default = "Vector3::zeros")]
    pub velocity: Vector3<T>,
}

/// How a source's particles pick their material.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum MaterialAssignment {
    /// Use the file's `material_id` property (0 when absent).
    #[default]
    FromFile,
    /// Every particle gets this id.
    Explicit(usize),
    /// First matching band of the scene's `color_rule`.
    ByColor,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaterialSpec<T: Real> {
    #[serde(default)]
    pub name: Option<String>,
    pub youngs_modulus: T,
    pub poisson_ratio: T,
    pub density: T,
    pub alpha0: T,
    pub beta: T,
    pub xi: T,
    pub slope_m: T,
    #[serde(default)]
    pub elastic_model: ElasticModel,
    /// Degenerate to the fluid limit (see `constitutive::fluid_params`).
    #[serde(default)]
    pub fluid: bool,
}

impl<T: Real> MaterialSpec<T> {
    pub fn material(&self) -> NaccMaterial<T> {
        let m = NaccMaterial {
            youngs_modulus: self.youngs_modulus,
            poisson_ratio: self.poisson_ratio,
            density: self.density,
            beta: self.beta,
            alpha0: self.alpha0,
            xi: self.xi,
            slope_m: self.slope_m,
            elastic_model: self.elastic_model,
        };
        if self.fluid {
            crate::constitutive::fluid_params(&m)
        } else {
            m
        }
    }
}

impl<T: Real> From<NaccMaterial<T>> for MaterialSpec<T> {
    fn from(m: NaccMaterial<T>) -> Self {
        MaterialSpec {
            name: None,
            youngs_modulus: m.youngs_modulus,
            poisson_ratio: m.poisson_ratio,
            density: m.density,
            alpha0: m.alpha0,
            beta: m.beta,
            xi: m.xi,
            slope_m: m.slope_m,
            elastic_model: m.elastic_model,
            fluid: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Domain<T: Real> {
    pub min: Vector3<T>,
    pub max: Vector3<T>,
}

/// Inclusive RGB box mapped to a material.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ColorBand<T: Real> {
    pub min: [T; 3],
    pub max: [T; 3],
    pub material: usize,
}

impl<T: Real> ColorBand<T> {
    pub fn matches(&self, rgb: &[T; 3]) -> bool {
        (0..3).all(|c| rgb[c] >= self.min[c] && rgb[c] <= self.max[c])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ColorRule<T: Real> {
    pub bands: Vec<ColorBand<T>>,
    pub default_material: usize,
}

impl<T: Real> ColorRule<T> {
    pub fn material_for(&self, rgb: &[T; 3]) -> usize {
        self.bands
            .iter()
            .find(|b| b.matches(rgb))
            .map_or(self.default_material, |b| b.material)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Visibility {
    /// Every light fully visible.
    #[default]
    Constant,
    /// Transmittance through the splat density field along the light ray.
    DensityOcclusion,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LightSpec<T: Real> {
    pub position: Vector3<T>,
    pub color: [T; 3],
    #[serde(default = "default_one")]
    pub intensity: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Lighting<T: Real> {
    pub lights: Vec<LightSpec<T>>,
    #[serde(default)]
    pub ambient: [T; 3],
    #[serde(default = "default_shininess")]
    pub shininess: T,
    #[serde(default)]
    pub visibility: Visibility,
}

/// Orthographic camera.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CameraSpec<T: Real> {
    /// Viewing direction (camera looks along this vector).
    pub direction: Vector3<T>,
    #[serde(default = "Vector3::z")]
    pub up: Vector3<T>,
    pub center: Vector3<T>,
    /// Width of the view in metres; height follows the aspect ratio.
    pub width: T,
    pub resolution: [u32; 2],
}

/// Semantic config problem located by a JSON pointer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigViolation {
    pub pointer: String,
    pub message: String,
}

impl std::fmt::Display for ConfigViolation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.pointer, self.message)
    }
}

impl<T: Real> SceneConfig<T> {
    pub fn materials(&self) -> Vec<NaccMaterial<T>> {
        self.materials.iter().map(MaterialSpec::material).collect()
    }

    /// Substeps per frame, when `frame_dt / step_dt` is a positive integer.
    pub fn substeps_per_frame(&self) -> Option<usize> {
        substep_ratio(self.frame_dt, self.step_dt)
    }

    /// Checks every semantic invariant; schema errors are the parser's job.
    pub fn violations(&self) -> Vec<ConfigViolation> {
        let mut out = Vec::new();
        let mut bad = |pointer: String, message: &str| {
            out.push(ConfigViolation {
                pointer,
                message: message.to_string(),
            })
        };
        if self.schema_version != SCHEMA_VERSION {
            bad("/schema_version".into(), "unsupported schema version");
        }
        if self.materials.is_empty() {
            bad("/materials".into(), "at least one material is required");
        }
        for (i, m) in self.materials.iter().enumerate() {
            for v in m.material().violations() {
                let field = v.split_whitespace().next().unwrap_or("");
                let field = if field == "derived" { "" } else { field };
                bad(format!("/materials/{i}/{field}"), &v);
            }
        }
        let n_mat = self.materials.len();
        for (i, s) in self.sources.iter().enumerate() {
            if let MaterialAssignment::Explicit(id) = s.material {
                if id >= n_mat {
                    bad(format!("/sources/{i}/material"), "material id out of range");
                }
            }
            if s.material == MaterialAssignment::ByColor && self.color_rule.is_none() {
                bad(format!("/sources/{i}/material"), "by_color requires a color_rule");
            }
            if let Some(v) = s.particle_volume {
                if !(v > T::zero()) {
                    bad(format!("/sources/{i}/particle_volume"), "must be > 0");
                }
            }
        }
        if let Some(rule) = &self.color_rule {
            if rule.default_material >= n_mat {
                bad("/color_rule/default_material".into(), "material id out of range");
            }
            for (i, b) in rule.bands.iter().enumerate() {
                if b.material >= n_mat {
                    bad(format!("/color_rule/bands/{i}/material"), "material id out of range");
                }
            }
        }
        if !(self.grid_spacing > T::zero()) {
            bad("/grid_spacing".into(), "must be > 0");
        }
        if (0..3).any(|a| !(self.domain.max[a] > self.domain.min[a])) {
            bad("/domain".into(), "max must exceed min on every axis");
        }
        if !(self.step_dt > T::zero()) {
            bad("/step_dt".into(), "must be > 0");
        }
        if !(self.frame_dt >= self.step_dt) {
            bad("/frame_dt".into(), "must be >= step_dt");
        } else if self.substeps_per_frame().is_none() {
            bad("/frame_dt".into(), "frame_dt / step_dt must be a positive integer");
        }
        if !(self.flip_ratio >= T::zero() && self.flip_ratio <= T::one()) {
            bad("/flip_ratio".into(), "must lie in [0, 1]");
        }
        if !(self.return_map_k > T::zero()) {
            bad("/return_map_k".into(), "must be > 0");
        }
        for (i, b) in self.boundaries.iter().enumerate() {
            if !b.shape.is_valid() {
                bad(format!("/boundaries/{i}/shape"), "plane normal must be unit length / box min <= max");
            }
        }
        for (i, o) in self.obstacles.iter().enumerate() {
            if !o.keyframes_valid() {
                bad(format!("/obstacles/{i}/keyframes"), "keyframe times must be strictly increasing");
            }
            if !o.shape.is_valid() {
                bad(format!("/obstacles/{i}/shape"), "plane normal must be unit length / box min <= max");
            }
        }
        if let Some(l) = &self.lighting {
            for (i, light) in l.lights.iter().enumerate() {
                if light.color.iter().any(|c| *c < T::zero()) {
                    bad(format!("/lighting/lights/{i}/color"), "components must be >= 0");
                }
            }
            if !(l.shininess > T::zero()) {
                bad("/lighting/shininess".into(), "must be > 0");
            }
        }
        if let Some(c) = &self.camera {
            if c.resolution.iter().any(|r| *r == 0 || *r > 4096) {
                bad("/camera/resolution".into(), "each side must be in 1..=4096");
            }
            if !(c.direction.norm() > T::zero()) {
                bad("/camera/direction".into(), "must be non-zero");
            }
            if !(c.width > T::zero()) {
                bad("/camera/width".into(), "must be > 0");
            }
        }
        out
    }
}

/// `frame_dt / step_dt` rounded, if it is a positive integer to 1e-9 relative.
pub fn substep_ratio<T: Real>(frame_dt: T, step_dt: T) -> Option<usize> {
    let r = (frame_dt / step_dt).to_f64_lossy();
    let n = r.round();
    (n >= 1.0 && (r - n).abs() <= 1e-9 * n).then_some(n as usize)
}
