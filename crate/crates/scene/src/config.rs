//! JSON scene and fill configuration.

use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use splatmpm::fill::{InteriorColor, DEFAULT_SUPPORT_MULT, DEFAULT_TAU_D};
use splatmpm::model::{ColorRule, MaterialAssignment, MaterialSpec, SplatSource, SCHEMA_VERSION};
use splatmpm::{Particle, Scene};

use crate::error::SceneError;
use crate::splats::{load_splats, Layout};

fn pointer_of(path: &serde_path_to_error::Path) -> String {
    use serde_path_to_error::Segment;
    let mut out = String::new();
    for seg in path.iter() {
        out.push('/');
        match seg {
            Segment::Seq { index } => out.push_str(&index.to_string()),
            Segment::Map { key } => out.push_str(&key.replace('~', "~0").replace('/', "~1")),
            Segment::Enum { variant } => out.push_str(variant),
            Segment::Unknown => out.push('?'),
        }
    }
    if out.is_empty() {
        out.push('/');
    }
    out
}

/// Parses JSON, reporting schema errors with the JSON pointer of the offending field.
pub fn parse_json<T: DeserializeOwned>(text: &str, path: &Path) -> Result<T, SceneError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let pointer = pointer_of(e.path());
        let inner = e.into_inner();
        SceneError::Config {
            path: path.to_path_buf(),
            pointer,
            message: inner.to_string(),
        }
    })
}

fn read_text(path: &Path) -> Result<String, SceneError> {
    std::fs::read_to_string(path).map_err(|e| SceneError::io(path, e))
}

pub fn parse_scene(text: &str, path: &Path) -> Result<Scene, SceneError> {
    let scene: Scene = parse_json(text, path)?;
    if let Some(v) = scene.violations().into_iter().next() {
        return Err(SceneError::Config {
            path: path.to_path_buf(),
            pointer: v.pointer,
            message: v.message,
        });
    }
    Ok(scene)
}

pub fn load_scene(path: &Path) -> Result<Scene, SceneError> {
    parse_scene(&read_text(path)?, path)
}

/// Every semantic problem in a scene, not just the first.
pub fn scene_report(path: &Path) -> Result<(Scene, Vec<String>), SceneError> {
    let scene: Scene = parse_json(&read_text(path)?, path)?;
    let report = scene.violations().iter().map(|v| v.to_string()).collect();
    Ok((scene, report))
}

fn resolve(base: &Path, p: &str) -> PathBuf {
    let p = Path::new(p);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.parent().unwrap_or(Path::new(".")).join(p)
    }
}

/// Applies a source's placement and material rules to freshly loaded splats.
///
/// Files without engine state get `mass = ρ V`, `α = α₀` and `F = I`, with
/// `V` from the file's `volume` or the source's `particle_volume`.
pub fn prepare_source(
    scene: &Scene,
    source: &SplatSource<f64>,
    mut particles: Vec<Particle>,
    layout: Layout,
    has_volume: bool,
) -> Result<Vec<Particle>, String> {
    let materials = scene.materials();
    let keep_state = layout == Layout::State && source.material == MaterialAssignment::FromFile;
    for (i, p) in particles.iter_mut().enumerate() {
        p.position += source.offset;
        p.ref_position += source.offset;
        p.velocity += source.velocity;
        if keep_state {
            continue;
        }
        p.material_id = match source.material {
            MaterialAssignment::FromFile => p.material_id,
            MaterialAssignment::Explicit(id) => id,
            MaterialAssignment::ByColor => {
                let rule = scene.color_rule.as_ref().ok_or("material 'by_color' needs a color_rule")?;
                rule.material_for(&splatmpm::fill::color_from_sh0(&p.sh.dc()))
            }
        };
        let m = materials
            .get(p.material_id)
            .ok_or_else(|| format!("particle {i}: material {} not in the material table", p.material_id))?;
        if layout != Layout::State {
            if !has_volume {
                p.initial_volume = source
                    .particle_volume
                    .ok_or_else(|| format!("{}: file has no 'volume' and the source sets no particle_volume", source.path))?;
            }
            p.def_grad = nalgebra::Matrix3::identity();
            p.dynamic_cov = p.static_cov;
            p.ref_position = p.position;
        }
        p.mass = m.density * p.initial_volume;
        p.alpha = m.alpha0;
    }
    Ok(particles)
}

/// Loads and prepares every source of `scene`; relative paths are taken
/// from the directory of `config_path`.
pub fn load_particles(scene: &Scene, config_path: &Path) -> Result<Vec<Particle>, SceneError> {
    let mut all = Vec::new();
    for (s, source) in scene.sources.iter().enumerate() {
        let file = load_splats(&resolve(config_path, &source.path))?;
        let ps = prepare_source(scene, source, file.particles, file.layout, file.has_volume).map_err(|message| {
            SceneError::Config {
                path: config_path.to_path_buf(),
                pointer: format!("/sources/{s}"),
                message,
            }
        })?;
        all.extend(ps);
    }
    Ok(all)
}

fn default_tau() -> f64 {
    DEFAULT_TAU_D
}
fn default_mult() -> f64 {
    DEFAULT_SUPPORT_MULT
}
fn default_ppc() -> usize {
    8
}

/// Settings for the `fill` subcommand.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FillConfig {
    pub schema_version: u32,
    /// Cells per axis of the density grid.
    pub resolution: usize,
    #[serde(default = "default_tau")]
    pub tau_d: f64,
    #[serde(default = "default_mult")]
    pub support_mult: f64,
    #[serde(default = "default_ppc")]
    pub particles_per_cell: usize,
    pub interior_color: InteriorColor<f64>,
    pub materials: Vec<MaterialSpec<f64>>,
    #[serde(default)]
    pub color_rule: Option<ColorRule<f64>>,
    #[serde(default)]
    pub seed: u64,
}

impl FillConfig {
    pub fn rule(&self) -> ColorRule<f64> {
        self.color_rule.clone().unwrap_or(ColorRule {
            bands: Vec::new(),
            default_material: 0,
        })
    }

    pub fn violations(&self) -> Vec<(String, String)> {
        let mut out = Vec::new();
        if self.schema_version != SCHEMA_VERSION {
            out.push(("/schema_version".into(), "unsupported schema version".into()));
        }
        if self.resolution < 3 {
            out.push(("/resolution".into(), "must be at least 3".into()));
        }
        if !(self.tau_d >= 0.0) {
            out.push(("/tau_d".into(), "must be non-negative".into()));
        }
        if !(self.support_mult > 0.0) {
            out.push(("/support_mult".into(), "must be positive".into()));
        }
        if self.particles_per_cell == 0 {
            out.push(("/particles_per_cell".into(), "must be at least 1".into()));
        }
        if self.materials.is_empty() {
            out.push(("/materials".into(), "at least one material is required".into()));
        }
        for (i, m) in self.materials.iter().enumerate() {
            for msg in m.material().violations() {
                out.push((format!("/materials/{i}"), msg));
            }
        }
        let rule = self.rule();
        let n = self.materials.len();
        if rule.default_material >= n {
            out.push(("/color_rule/default_material".into(), "no such material".into()));
        }
        for (i, b) in rule.bands.iter().enumerate() {
            if b.material >= n {
                out.push((format!("/color_rule/bands/{i}/material"), "no such material".into()));
            }
        }
        out
    }
}

pub fn load_fill_config(path: &Path) -> Result<FillConfig, SceneError> {
    let cfg: FillConfig = parse_json(&read_text(path)?, path)?;
    if let Some((pointer, message)) = cfg.violations().into_iter().next() {
        return Err(SceneError::Config {
            path: path.to_path_buf(),
            pointer,
            message,
        });
    }
    Ok(cfg)
}
