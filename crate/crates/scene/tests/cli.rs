use std::path::{Path, PathBuf};

use nalgebra::{Matrix3, Vector3};
use splatmpm::fill::sh0_init;
use splatmpm::model::ShCoeffs;
use splatmpm::Particle;
use splatmpm_scene::cli::run;
use splatmpm_scene::splats::{load_splats, save_state, Layout};

struct Outcome {
    code: i32,
    stdout: String,
    stderr: String,
}

fn cli(args: &[&str]) -> Outcome {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let code = run(std::iter::once("splatmpm").chain(args.iter().copied()), &mut out, &mut err);
    Outcome {
        code,
        stdout: String::from_utf8(out).unwrap(),
        stderr: String::from_utf8(err).unwrap(),
    }
}

fn block(n: usize, h: f64, corner: Vector3<f64>) -> Vec<Particle> {
    let mut out = Vec::new();
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                let x = corner + Vector3::new(i as f64, j as f64, k as f64) * h;
                let mut p = Particle::at_rest(x, h * h * h, 2000.0, Matrix3::identity() * (h * h * 0.25), 0, -0.04);
                p.sh = ShCoeffs::band0(sh0_init(&[0.8, 0.3, 0.2]).unwrap());
                out.push(p);
            }
        }
    }
    out
}

const MATERIAL: &str = r#"{"youngs_modulus": 2000, "poisson_ratio": 0.42, "density": 2000,
    "alpha0": -0.04, "beta": 1, "xi": 2, "slope_m": 2.36}"#;

fn scene_json(source: &str, extra: &str) -> String {
    format!(
        r#"{{
  "schema_version": 1,
  "sources": [{{"path": "{source}", "material": "from_file"}}],
  "materials": [{MATERIAL}],
  "gravity": [0, 0, -9.8],
  "domain": {{"min": [0, 0, 0], "max": [0.3, 0.3, 0.3]}},
  "grid_spacing": 0.02,
  "boundaries": [{{"shape": {{"plane": {{"point": [0, 0, 0.05], "normal": [0, 0, 1]}}}}, "mode": "slip"}}],
  "frames": 2, "frame_dt": 1e-3, "step_dt": 2.5e-4{extra}
}}"#
    )
}

/// Scene directory with `block.ply` and `scene.json`.
fn good_scene(dir: &Path, extra: &str) -> PathBuf {
    save_state(&block(4, 0.02, Vector3::new(0.12, 0.12, 0.08)), &dir.join("block.ply")).unwrap();
    let path = dir.join("scene.json");
    std::fs::write(&path, scene_json("block.ply", extra)).unwrap();
    path
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn validate_good_scene_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = good_scene(dir.path(), "");
    let o = cli(&["validate", s(&cfg)]);
    assert_eq!(o.code, 0, "{}", o.stderr);
    assert!(o.stdout.contains("particles: 64"));
}

#[test]
fn missing_config_exits_one_with_path() {
    let o = cli(&["simulate", "definitely/missing.json", "--out", "/tmp/unused"]);
    assert_eq!(o.code, 1);
    assert!(o.stderr.contains("missing.json"), "{}", o.stderr);
}

#[test]
fn unknown_flag_prints_usage_and_exits_one() {
    let o = cli(&["simulate", "a.json", "--out", "x", "--warp-speed"]);
    assert_eq!(o.code, 1);
    assert!(o.stderr.contains("Usage"), "{}", o.stderr);
    assert_eq!(cli(&["frobnicate"]).code, 1);
    assert_eq!(cli(&[]).code, 1);
    assert_eq!(cli(&["--help"]).code, 0);
}

#[test]
fn schema_error_names_json_pointer() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = good_scene(dir.path(), "");
    let text = std::fs::read_to_string(&cfg).unwrap().replace("\"poisson_ratio\": 0.42", "\"poisson_ratio\": \"x\"");
    std::fs::write(&cfg, text).unwrap();
    let o = cli(&["validate", s(&cfg)]);
    assert_eq!(o.code, 1);
    assert!(o.stderr.contains("/materials/0/poisson_ratio"), "{}", o.stderr);
}

#[test]
fn simulate_writes_frames_and_stats() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = good_scene(dir.path(), "");
    let out = dir.path().join("out");
    let o = cli(&["simulate", s(&cfg), "--out", s(&out), "--deterministic"]);
    assert_eq!(o.code, 0, "{}", o.stderr);
    for f in 0..=2 {
        let frame = load_splats(&out.join(format!("frame_{f:05}.ply"))).unwrap();
        assert_eq!(frame.layout, Layout::Covariance);
        assert_eq!(frame.particles.len(), 64);
    }
    assert!(!out.join("frame_00003.ply").exists());
    let stats = std::fs::read_to_string(out.join("stats.csv")).unwrap();
    let lines: Vec<&str> = stats.lines().collect();
    assert!(lines[0].starts_with("frame,substep,total_mass"));
    assert_eq!(lines.len(), 1 + 2 * 4);
    let mass: f64 = lines[1].split(',').nth(2).unwrap().parse().unwrap();
    assert!((mass - 64.0 * 2000.0 * 0.02f64.powi(3)).abs() < 1e-12);
}

#[test]
fn frames_flag_overrides_scene() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = good_scene(dir.path(), "");
    let out = dir.path().join("out");
    assert_eq!(cli(&["simulate", s(&cfg), "--out", s(&out), "--frames", "1"]).code, 0);
    assert!(out.join("frame_00001.ply").exists());
    assert!(!out.join("frame_00002.ply").exists());
}

#[test]
fn deterministic_runs_match_across_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = good_scene(dir.path(), "");
    let mut frames = Vec::new();
    for threads in ["1", "3"] {
        let out = dir.path().join(format!("out{threads}"));
        let o = cli(&["simulate", s(&cfg), "--out", s(&out), "--deterministic", "--threads", threads]);
        assert_eq!(o.code, 0, "{}", o.stderr);
        frames.push(std::fs::read(out.join("frame_00002.ply")).unwrap());
    }
    assert_eq!(frames[0], frames[1]);
}

#[test]
fn pressure_overflow_exits_two_and_keeps_partial_frames() {
    let dir = tempfile::tempdir().unwrap();
    let mut ps = block(4, 0.02, Vector3::new(0.12, 0.12, 0.08));
    // far beyond the pressure the elastic volume relation can represent
    ps[21].def_grad = Matrix3::identity() * 0.3;
    save_state(&ps, &dir.path().join("block.ply")).unwrap();
    let cfg = dir.path().join("scene.json");
    std::fs::write(&cfg, scene_json("block.ply", "")).unwrap();
    let out = dir.path().join("out");
    let o = cli(&["simulate", s(&cfg), "--out", s(&out), "--deterministic"]);
    assert_eq!(o.code, 2, "{}", o.stderr);
    assert!(o.stderr.contains("pressure overflow"), "{}", o.stderr);
    assert!(out.join("frame_00000.ply").exists());
    assert!(!out.join("frame_00001.ply").exists());
    let failure: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("failure.json")).unwrap()).unwrap();
    assert_eq!(failure["kind"], "pressure_overflow");
    assert_eq!(failure["frame"], 1);
    assert_eq!(failure["substep"], 0);
}

#[test]
fn preview_pngs_follow_frames() {
    let dir = tempfile::tempdir().unwrap();
    let camera = r#", "camera": {"direction": [0, 1, 0], "center": [0.15, 0.15, 0.15], "width": 0.3, "resolution": [32, 32]}"#;
    let cfg = good_scene(dir.path(), camera);
    let out = dir.path().join("out");
    let o = cli(&["simulate", s(&cfg), "--out", s(&out), "--frames", "1", "--preview"]);
    assert_eq!(o.code, 0, "{}", o.stderr);
    let img = image::open(out.join("frame_00001.png")).unwrap().to_rgb8();
    assert_eq!(img.dimensions(), (32, 32));
    assert!(img.pixels().any(|p| p.0 != [0, 0, 0]));
}

#[test]
fn shade_recolours_a_frame() {
    let dir = tempfile::tempdir().unwrap();
    let lit = r#", "camera": {"direction": [0, 0, -1], "up": [0, 1, 0], "center": [0.15, 0.15, 0.15], "width": 0.3, "resolution": [16, 16]},
  "lighting": {"lights": [{"position": [0.15, 0.15, 1.0], "color": [1, 1, 1], "intensity": 0.5}], "ambient": [0.1, 0.1, 0.1]}"#;
    let cfg = good_scene(dir.path(), lit);
    let out = dir.path().join("out");
    assert_eq!(cli(&["simulate", s(&cfg), "--out", s(&out), "--frames", "0"]).code, 0);
    let shaded = dir.path().join("shaded.ply");
    let png = dir.path().join("shaded.png");
    let o = cli(&["shade", s(&out.join("frame_00000.ply")), "--config", s(&cfg), "--out", s(&shaded), "--png", s(&png)]);
    assert_eq!(o.code, 0, "{}", o.stderr);
    assert_eq!(load_splats(&shaded).unwrap().particles.len(), 64);
    assert!(png.exists());
}

#[test]
fn fill_seeds_a_closed_shell() {
    let dir = tempfile::tempdir().unwrap();
    // points on a sphere of radius 0.1
    let n = 600;
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    let shell: Vec<Particle> = (0..n)
        .map(|i| {
            let z = 1.0 - 2.0 * (i as f64 + 0.5) / n as f64;
            let r = (1.0 - z * z).sqrt();
            let t = golden * i as f64;
            let x = Vector3::new(r * t.cos(), r * t.sin(), z) * 0.1;
            let mut p = Particle::at_rest(x, 1e-6, 2000.0, Matrix3::identity() * 1e-4, 0, -0.04);
            p.sh = ShCoeffs::band0(sh0_init(&[0.1, 0.8, 0.1]).unwrap());
            p
        })
        .collect();
    let splats = dir.path().join("shell.ply");
    save_state(&shell, &splats).unwrap();
    let fill = dir.path().join("fill.json");
    std::fs::write(
        &fill,
        format!(
            r#"{{"schema_version": 1, "resolution": 24, "particles_per_cell": 2,
                "interior_color": {{"uniform": {{"color": [0.9, 0.1, 0.1]}}}},
                "materials": [{MATERIAL}, {MATERIAL}],
                "color_rule": {{"bands": [{{"min": [0.5, 0, 0], "max": [1, 0.3, 0.3], "material": 1}}], "default_material": 0}},
                "seed": 7}}"#
        ),
    )
    .unwrap();
    let out = dir.path().join("filled.ply");
    let o = cli(&["fill", s(&splats), "--config", s(&fill), "--out", s(&out)]);
    assert_eq!(o.code, 0, "{}", o.stderr);
    let filled = load_splats(&out).unwrap();
    assert_eq!(filled.layout, Layout::State);
    let interior = &filled.particles[n..];
    assert!(!interior.is_empty());
    assert!(interior.iter().all(|p| p.position.norm() < 0.1 && p.material_id == 1));
    assert!(filled.particles[..n].iter().all(|p| p.material_id == 0));

    // same seed, same bytes
    let again = dir.path().join("again.ply");
    assert_eq!(cli(&["fill", s(&splats), "--config", s(&fill), "--out", s(&again)]).code, 0);
    assert_eq!(std::fs::read(&out).unwrap(), std::fs::read(&again).unwrap());
}

#[test]
fn diag_returnmap_writes_csv() {
    let o = cli(&["diag-returnmap", "--material", "kiwi", "--n", "5"]);
    assert_eq!(o.code, 0, "{}", o.stderr);
    let lines: Vec<&str> = o.stdout.lines().collect();
    assert_eq!(lines[0], "p_trial,q_trial,p_new,q_new,case");
    assert_eq!(lines.len(), 1 + 25);
    for case in ["elastic", "tip_upper", "tip_lower", "interior"] {
        assert!(lines.iter().any(|l| l.ends_with(case)), "no {case} row");
    }
    assert_eq!(cli(&["diag-returnmap", "--material", "granite"]).code, 1);
}
