//! The work behind each subcommand, callable without the argument parser.

use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use splatmpm::constitutive::{p0_of, return_map, ReturnCase};
use splatmpm::engine::{ExecMode, Simulation, StepStats};
use splatmpm::evolution::publish;
use splatmpm::fill::{assign_materials_by_color, classify, density_field, seed_interior};
use splatmpm::model::{validate, CameraSpec, Lighting, YieldPoint};
use splatmpm::shading::{shade_frame, DEFAULT_K_NEIGHBORS};
use splatmpm::{Error, Material, Particle, Scene};

use crate::config::{load_fill_config, load_particles, FillConfig};
use crate::error::SceneError;
use crate::frame::{base_colors, export_frame, FrameSnapshot};
use crate::preview::{rasterize_preview, save_png};
use crate::splats::{load_splats, save_state, Layout};

pub const STATS_HEADER: &str =
    "frame,substep,total_mass,momentum_x,momentum_y,momentum_z,max_speed,plastic_count,cfl,cfl_warning,clamped,halved";

pub fn stats_row(frame: usize, s: &StepStats<f64>) -> String {
    let m = s.total_momentum;
    format!(
        "{frame},{},{:e},{:e},{:e},{:e},{:e},{},{:e},{},{},{}",
        s.substep, s.total_mass, m.x, m.y, m.z, s.max_speed, s.plastic_count, s.cfl, s.cfl_warning as u8, s.clamped, s.halved as u8
    )
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulateOptions {
    pub out: PathBuf,
    pub mode: ExecMode,
    pub threads: Option<usize>,
    pub frames: Option<usize>,
    pub preview: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulateSummary {
    pub frames_written: usize,
    pub particles: usize,
    pub substeps: usize,
}

/// Display colours for one frame: shaded when the scene has lighting and a
/// camera, band-0 colour otherwise.
pub fn frame_colors(particles: &[Particle], scene: &Scene) -> Result<Vec<[f64; 3]>, Error> {
    match (&scene.lighting, &scene.camera) {
        (Some(l), Some(c)) => shade(particles, l, c, scene.grid_spacing),
        _ => Ok(base_colors(particles)),
    }
}

fn shade(particles: &[Particle], lighting: &Lighting<f64>, camera: &CameraSpec<f64>, step: f64) -> Result<Vec<[f64; 3]>, Error> {
    let k = DEFAULT_K_NEIGHBORS.min(particles.len().saturating_sub(1)).max(4);
    Ok(shade_frame(particles, lighting, camera, k, step)?
        .into_iter()
        .map(|c| c.map(|v| v.clamp(0.0, 1.0)))
        .collect())
}

fn write_failure(dir: &Path, err: &Error, time: f64) -> Result<(), SceneError> {
    let (frame, substep) = match err {
        Error::FrameAbort { frame, substep, .. } => (Some(*frame), Some(*substep)),
        _ => (None, None),
    };
    let record = serde_json::json!({
        "frame": frame,
        "substep": substep,
        "time": time,
        "kind": err.kind(),
        "message": err.to_string(),
    });
    let path = dir.join("failure.json");
    let text = serde_json::to_string_pretty(&record).expect("plain json value");
    std::fs::write(&path, text + "\n").map_err(|e| SceneError::io(&path, e))
}

/// Runs a scene, writing `frame_%05d.ply`, `stats.csv` and optional PNG
/// previews into `opts.out`. On a frame abort the frames already written are
/// kept and `failure.json` records where and why the run stopped.
pub fn simulate(config: &Path, opts: &SimulateOptions) -> Result<SimulateSummary, SceneError> {
    let scene = crate::config::load_scene(config)?;
    let particles = load_particles(&scene, config)?;
    let materials = scene.materials();
    check_particles(&particles, &materials)?;
    match opts.threads {
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| SceneError::Usage(format!("cannot build a {n}-thread pool: {e}")))?;
            pool.install(|| run_scene(&scene, particles, opts))
        }
        None => run_scene(&scene, particles, opts),
    }
}

fn check_particles(particles: &[Particle], materials: &[Material]) -> Result<(), SceneError> {
    let report = validate(particles, materials);
    if report.is_empty() {
        return Ok(());
    }
    let mut text = String::new();
    for v in report.iter().take(20) {
        let _ = writeln!(text, "  {v}");
    }
    if report.len() > 20 {
        let _ = writeln!(text, "  ... and {} more", report.len() - 20);
    }
    Err(SceneError::Particles(text))
}

fn run_scene(scene: &Scene, particles: Vec<Particle>, opts: &SimulateOptions) -> Result<SimulateSummary, SceneError> {
    let dir = &opts.out;
    std::fs::create_dir_all(dir).map_err(|e| SceneError::io(dir, e))?;
    let substeps = scene
        .substeps_per_frame()
        .ok_or_else(|| SceneError::Usage("frame_dt / step_dt is not a positive integer".into()))?;
    let frames = opts.frames.unwrap_or(scene.frames);
    let stats_path = dir.join("stats.csv");
    let mut stats_file = std::fs::File::create(&stats_path).map_err(|e| SceneError::io(&stats_path, e))?;
    writeln!(stats_file, "{STATS_HEADER}").map_err(|e| SceneError::io(&stats_path, e))?;

    let n = particles.len();
    let mut sim = Simulation::from_config(scene, particles, opts.mode);
    let mut io_error: Option<SceneError> = None;
    let mut written = 0;
    let result = sim.run(frames, substeps, |frame, s, stats| {
        let mut rows = String::new();
        for st in stats {
            rows.push_str(&stats_row(frame, st));
            rows.push('\n');
        }
        if let Err(e) = stats_file.write_all(rows.as_bytes()) {
            io_error = Some(SceneError::io(&stats_path, e));
            return Err(Error::InvalidConfig("output failed".into()));
        }
        let published = publish(&s.particles)?;
        let colors = frame_colors(&published, scene)?;
        let snapshot = FrameSnapshot {
            frame,
            time: s.time,
            particles: published,
            colors,
        };
        let saved = export_frame(&snapshot, dir).and_then(|_| match (&scene.camera, opts.preview) {
            (Some(cam), true) => save_png(&rasterize_preview(&snapshot, cam), &dir.join(format!("frame_{frame:05}.png"))),
            _ => Ok(()),
        });
        if let Err(e) = saved {
            io_error = Some(e);
            return Err(Error::InvalidConfig("output failed".into()));
        }
        written += 1;
        Ok(())
    });
    let _ = stats_file.flush();
    if let Some(e) = io_error {
        return Err(e);
    }
    if let Err(e) = result {
        write_failure(dir, &e, sim.time)?;
        return Err(e.into());
    }
    Ok(SimulateSummary {
        frames_written: written,
        particles: n,
        substeps: sim.substep,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct FillSummary {
    pub surface: usize,
    pub interior: usize,
    pub interior_cells: usize,
}

/// Surface splats followed by seeded interior particles, in engine-state form.
pub fn fill_particles(mut surface: Vec<Particle>, has_volume: bool, layout: Layout, cfg: &FillConfig) -> Result<(Vec<Particle>, FillSummary), SceneError> {
    let materials: Vec<Material> = cfg.materials.iter().map(|m| m.material()).collect();
    let field = classify(density_field(&surface, cfg.resolution, cfg.support_mult)?, cfg.tau_d);
    let rule = cfg.rule();
    let interior = seed_interior(&field, cfg.particles_per_cell, &cfg.interior_color, &rule, &materials, cfg.seed)?;
    let seeded_volume = field.cell_volume() / cfg.particles_per_cell as f64;
    if layout != Layout::State || cfg.color_rule.is_some() {
        assign_materials_by_color(&mut surface, &rule);
    }
    for p in surface.iter_mut() {
        let m = &materials[p.material_id.min(materials.len() - 1)];
        p.material_id = p.material_id.min(materials.len() - 1);
        if layout != Layout::State {
            if !has_volume {
                p.initial_volume = seeded_volume;
            }
            p.def_grad = nalgebra::Matrix3::identity();
            p.dynamic_cov = p.static_cov;
            p.ref_position = p.position;
            p.alpha = m.alpha0;
        }
        p.mass = m.density * p.initial_volume;
    }
    let summary = FillSummary {
        surface: surface.len(),
        interior: interior.len(),
        interior_cells: field.count(splatmpm::fill::CellClass::Interior),
    };
    surface.extend(interior);
    Ok((surface, summary))
}

pub fn fill(splats: &Path, config: &Path, out: &Path) -> Result<FillSummary, SceneError> {
    let cfg = load_fill_config(config)?;
    let file = load_splats(splats)?;
    let (all, summary) = fill_particles(file.particles, file.has_volume, file.layout, &cfg)?;
    save_state(&all, out)?;
    Ok(summary)
}

/// Re-shades a written frame with a scene's lights and camera.
pub fn shade_file(frame: &Path, config: &Path, out: &Path, png: Option<&Path>) -> Result<usize, SceneError> {
    let scene = crate::config::load_scene(config)?;
    let (Some(lighting), Some(camera)) = (&scene.lighting, &scene.camera) else {
        return Err(SceneError::Config {
            path: config.to_path_buf(),
            pointer: "/lighting".into(),
            message: "shading needs both 'lighting' and 'camera'".into(),
        });
    };
    let file = load_splats(frame)?;
    let colors = shade(&file.particles, lighting, camera, scene.grid_spacing)?;
    let snapshot = FrameSnapshot {
        frame: 0,
        time: 0.0,
        particles: file.particles,
        colors,
    };
    std::fs::write(out, crate::frame::encode_frame(&snapshot)).map_err(|e| SceneError::io(out, e))?;
    if let Some(png) = png {
        save_png(&rasterize_preview(&snapshot, camera), png)?;
    }
    Ok(snapshot.particles.len())
}

pub const RETURNMAP_HEADER: &str = "p_trial,q_trial,p_new,q_new,case";

fn case_name(c: ReturnCase) -> &'static str {
    match c {
        ReturnCase::Elastic => "elastic",
        ReturnCase::TipUpper => "tip_upper",
        ReturnCase::TipLower => "tip_lower",
        ReturnCase::Interior => "interior",
    }
}

/// Projection of an `n × n` grid of trial points covering the yield surface
/// with a 50% margin on every side.
pub fn returnmap_csv(m: &Material, alpha: f64, k: f64, n: usize) -> String {
    let p0 = p0_of(alpha, m);
    let b = m.beta;
    let q_apex = m.slope_m * (1.0 + b) * p0 / 2.0 / (1.0 + 2.0 * b).sqrt();
    let (p_lo, p_hi) = (-b * p0, p0);
    let pad = 0.5 * (p_hi - p_lo);
    let mut out = String::from(RETURNMAP_HEADER);
    out.push('\n');
    let steps = n.max(2) - 1;
    for i in 0..=steps {
        let p = p_lo - pad + (p_hi - p_lo + 2.0 * pad) * i as f64 / steps as f64;
        for j in 0..=steps {
            let q = 1.5 * q_apex * j as f64 / steps as f64;
            let r = return_map(&YieldPoint::new(p, q), p0, m, k);
            let _ = writeln!(
                out,
                "{p:e},{q:e},{:e},{:e},{}",
                r.projected.p,
                r.projected.q,
                case_name(r.case)
            );
        }
    }
    out
}

/// Checks a scene file and the particle sets it references; returns the
/// human-readable report lines on success.
pub fn validate_scene(config: &Path) -> Result<Vec<String>, SceneError> {
    let (scene, problems) = crate::config::scene_report(config)?;
    if !problems.is_empty() {
        return Err(SceneError::Config {
            path: config.to_path_buf(),
            pointer: "/".into(),
            message: format!("{} problem(s):\n  {}", problems.len(), problems.join("\n  ")),
        });
    }
    let particles = load_particles(&scene, config)?;
    check_particles(&particles, &scene.materials())?;
    Ok(vec![
        format!("sources: {}", scene.sources.len()),
        format!("particles: {}", particles.len()),
        format!("materials: {}", scene.materials.len()),
        format!("substeps per frame: {}", scene.substeps_per_frame().unwrap_or(0)),
    ])
}
