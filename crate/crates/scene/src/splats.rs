//! Particle sets in PLY files.
//!
//! Three vertex layouts are recognised, checked in this order:
//!
//! * **state**: everything the engine tracks (`ref_x`, `f_00`, `cov_xx`, ...);
//!   written by `fill` and read back bit-exactly.
//! * **covariance**: `cov_xx cov_xy cov_xz cov_yy cov_yz cov_zz` and a
//!   linear `opacity`; this is also the frame layout.
//! * **3DGS**: `scale_0..2` (log), `rot_0..3` (quaternion w, x, y, z) and a
//!   logit `opacity`, as written by Gaussian-splatting trainers.
//!
//! Colour is read from `f_dc_*`/`f_rest_*` (channel-major rest coefficients)
//! and falls back to `red green blue` (0–255 for integers, 0–1 for floats).

use std::path::Path;

use nalgebra::{Matrix3, Quaternion, UnitQuaternion, Vector3};
use splatmpm::fill::sh0_init;
use splatmpm::linalg::{sym_from_array, sym_to_array};
use splatmpm::model::{GaussianParticle, ShCoeffs, MAX_SH_DEGREE};
use splatmpm::Particle;

use crate::error::SceneError;
use crate::ply::{read_vertices, PlyError, PlyWriter, ScalarType, VertexTable};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Layout {
    State,
    Covariance,
    Gaussian3d,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SplatFile {
    pub particles: Vec<Particle>,
    pub layout: Layout,
    /// The file carried a per-particle `volume`.
    pub has_volume: bool,
    pub has_material: bool,
}

pub const COV_NAMES: [&str; 6] = ["cov_xx", "cov_xy", "cov_xz", "cov_yy", "cov_yz", "cov_zz"];
const DCOV_NAMES: [&str; 6] = ["dcov_xx", "dcov_xy", "dcov_xz", "dcov_yy", "dcov_yz", "dcov_zz"];
const F_NAMES: [&str; 9] = ["f_00", "f_01", "f_02", "f_10", "f_11", "f_12", "f_20", "f_21", "f_22"];

/// Name of the `k`-th (1-based, k ≥ 1) rest coefficient of channel `ch` when
/// `n` coefficients per channel are stored.
pub fn rest_name(ch: usize, k: usize, n: usize) -> String {
    format!("f_rest_{}", ch * (n - 1) + (k - 1))
}

fn need(t: &VertexTable, name: &str) -> Result<usize, PlyError> {
    t.column(name).ok_or_else(|| PlyError {
        offset: 0,
        message: format!("missing vertex property '{name}'"),
    })
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

pub fn logit(p: f64) -> f64 {
    let p = p.clamp(1e-12, 1.0 - 1e-12);
    (p / (1.0 - p)).ln()
}

/// Decodes a vertex table into particles at rest (unit volume and mass
/// unless the layout carries them).
pub fn from_table(t: &VertexTable) -> Result<SplatFile, PlyError> {
    let xyz = [need(t, "x")?, need(t, "y")?, need(t, "z")?];
    let layout = if t.has("ref_x") && t.has("f_00") && t.has("cov_xx") {
        Layout::State
    } else if t.has("cov_xx") {
        Layout::Covariance
    } else if t.has("scale_0") || t.has("rot_0") {
        Layout::Gaussian3d
    } else {
        return Err(PlyError {
            offset: 0,
            message: "missing vertex property 'cov_xx' (and no 'scale_0'/'rot_0' alternative)".into(),
        });
    };
    let cov_cols: Vec<usize> = match layout {
        Layout::Gaussian3d => {
            let mut cols = Vec::new();
            for name in ["scale_0", "scale_1", "scale_2", "rot_0", "rot_1", "rot_2", "rot_3"] {
                cols.push(need(t, name)?);
            }
            cols
        }
        _ => COV_NAMES.iter().map(|n| need(t, n)).collect::<Result<_, _>>()?,
    };
    let opacity = t.column("opacity");

    // SH: count complete bands present
    let dc = ["f_dc_0", "f_dc_1", "f_dc_2"].map(|n| t.column(n));
    let rest_total = (0..).take_while(|i| t.has(&format!("f_rest_{i}"))).count();
    let mut per_channel = 1;
    for d in 1..=MAX_SH_DEGREE {
        let n = (d + 1) * (d + 1);
        if rest_total >= 3 * (n - 1) {
            per_channel = n;
        }
    }
    let stored_per_channel = if rest_total > 0 { rest_total / 3 + 1 } else { 1 };
    let rgb = ["red", "green", "blue"].map(|n| t.column(n));

    let state_cols = if layout == Layout::State {
        let mut v = Vec::new();
        for n in ["vx", "vy", "vz", "ref_x", "ref_y", "ref_z", "mass", "volume", "alpha"] {
            v.push(need(t, n)?);
        }
        for n in F_NAMES.iter().chain(DCOV_NAMES.iter()) {
            v.push(need(t, n)?);
        }
        v
    } else {
        Vec::new()
    };
    let volume = t.column("volume");
    let material = t.column("material_id");

    let mut particles = Vec::with_capacity(t.rows);
    for r in 0..t.rows {
        let row_err = |message: String| PlyError { offset: 0, message: format!("vertex {r}: {message}") };
        let g = |c: usize| t.get(r, c);
        let position = Vector3::new(g(xyz[0]), g(xyz[1]), g(xyz[2]));
        let (cov, alpha_op) = match layout {
            Layout::Gaussian3d => {
                let s = Vector3::new(g(cov_cols[0]).exp(), g(cov_cols[1]).exp(), g(cov_cols[2]).exp());
                let q = Quaternion::new(g(cov_cols[3]), g(cov_cols[4]), g(cov_cols[5]), g(cov_cols[6]));
                if q.norm() == 0.0 {
                    return Err(row_err("zero rotation quaternion".into()));
                }
                let rot = UnitQuaternion::from_quaternion(q).to_rotation_matrix().into_inner();
                let s2 = Matrix3::from_diagonal(&s.component_mul(&s));
                (rot * s2 * rot.transpose(), opacity.map_or(1.0, |c| sigmoid(g(c))))
            }
            _ => {
                let a: [f64; 6] = std::array::from_fn(|i| g(cov_cols[i]));
                (sym_from_array(&a), opacity.map_or(1.0, g))
            }
        };
        let sh = if let Some(dc) = dc.iter().copied().collect::<Option<Vec<usize>>>() {
            let mut sh = ShCoeffs::zeros(0);
            sh.coeffs = vec![[0.0; 3]; per_channel];
            for ch in 0..3 {
                sh.coeffs[0][ch] = g(dc[ch]);
                for k in 1..per_channel {
                    sh.coeffs[k][ch] = g(need(t, &rest_name(ch, k, stored_per_channel))?);
                }
            }
            sh
        } else if let Some(rgb) = rgb.iter().copied().collect::<Option<Vec<usize>>>() {
            let scale = if t.types[rgb[0]].is_integer() { 255.0 } else { 1.0 };
            let c = [g(rgb[0]) / scale, g(rgb[1]) / scale, g(rgb[2]) / scale];
            ShCoeffs::band0(sh0_init(&c).map_err(|e| row_err(e.to_string()))?)
        } else {
            ShCoeffs::band0([0.0; 3])
        };
        let mut p = GaussianParticle::at_rest(position, 1.0, 1.0, cov, 0, 0.0);
        p.opacity = alpha_op;
        p.sh = sh;
        if let Some(c) = volume {
            p.initial_volume = g(c);
            p.mass = g(c);
        }
        if let Some(c) = material {
            let m = g(c);
            if m < 0.0 || m.fract() != 0.0 {
                return Err(row_err(format!("material_id {m} is not a non-negative integer")));
            }
            p.material_id = m as usize;
        }
        if layout == Layout::State {
            let s: Vec<f64> = state_cols.iter().map(|c| g(*c)).collect();
            p.velocity = Vector3::new(s[0], s[1], s[2]);
            p.ref_position = Vector3::new(s[3], s[4], s[5]);
            p.mass = s[6];
            p.initial_volume = s[7];
            p.alpha = s[8];
            p.def_grad = Matrix3::from_row_slice(&s[9..18]);
            p.dynamic_cov = sym_from_array(&std::array::from_fn(|i| s[18 + i]));
        }
        particles.push(p);
    }
    Ok(SplatFile {
        particles,
        layout,
        has_volume: volume.is_some(),
        has_material: material.is_some(),
    })
}

pub fn read_splats(bytes: &[u8]) -> Result<SplatFile, PlyError> {
    from_table(&read_vertices(bytes)?)
}

pub fn load_splats(path: &Path) -> Result<SplatFile, SceneError> {
    let bytes = std::fs::read(path).map_err(|e| SceneError::io(path, e))?;
    read_splats(&bytes).map_err(|e| SceneError::Ply {
        path: path.to_path_buf(),
        source: e,
    })
}

/// Most coefficients per channel over a particle set (at least 1).
pub fn sh_len(particles: &[Particle]) -> usize {
    let max_deg = particles.iter().filter_map(|p| p.sh.degree()).max().unwrap_or(0).min(MAX_SH_DEGREE);
    (max_deg + 1) * (max_deg + 1)
}

pub fn sh_properties(n: usize) -> Vec<(String, ScalarType)> {
    let mut props: Vec<(String, ScalarType)> = (0..3).map(|c| (format!("f_dc_{c}"), ScalarType::F64)).collect();
    for i in 0..3 * (n - 1) {
        props.push((format!("f_rest_{i}"), ScalarType::F64));
    }
    props
}

/// Pushes SH values in the property order of [`sh_properties`], zero-padded.
pub fn push_sh(sh: &ShCoeffs<f64>, n: usize, out: &mut Vec<f64>) {
    let c = |k: usize, ch: usize| sh.coeffs.get(k).map_or(0.0, |v| v[ch]);
    out.extend((0..3).map(|ch| c(0, ch)));
    for ch in 0..3 {
        out.extend((1..n).map(|k| c(k, ch)));
    }
}

pub fn state_writer(sh_n: usize) -> PlyWriter {
    let d = ScalarType::F64;
    let mut props: Vec<(String, ScalarType)> = ["x", "y", "z", "vx", "vy", "vz", "ref_x", "ref_y", "ref_z", "mass", "volume", "opacity", "alpha"]
        .iter()
        .map(|n| (n.to_string(), d))
        .collect();
    props.push(("material_id".into(), ScalarType::I32));
    for n in F_NAMES.iter().chain(COV_NAMES.iter()).chain(DCOV_NAMES.iter()) {
        props.push((n.to_string(), d));
    }
    props.extend(sh_properties(sh_n));
    PlyWriter::new(props).comment("splatmpm particle state")
}

/// Full particle state as binary PLY.
pub fn encode_state(particles: &[Particle]) -> Vec<u8> {
    let n = sh_len(particles);
    state_writer(n).encode(particles.len(), |i, v| {
        let p = &particles[i];
        v.extend(p.position.iter());
        v.extend(p.velocity.iter());
        v.extend(p.ref_position.iter());
        v.extend([p.mass, p.initial_volume, p.opacity, p.alpha, p.material_id as f64]);
        v.extend(p.def_grad.transpose().iter());
        v.extend(sym_to_array(&p.static_cov));
        v.extend(sym_to_array(&p.dynamic_cov));
        push_sh(&p.sh, n, v);
    })
}

pub fn save_state(particles: &[Particle], path: &Path) -> Result<(), SceneError> {
    std::fs::write(path, encode_state(particles)).map_err(|e| SceneError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn particle(i: usize) -> Particle {
        let x = i as f64;
        let cov = Matrix3::new(2.0, 0.1, 0.0, 0.1, 1.0, -0.2, 0.0, -0.2, 0.7) * (1e-4 * (1.0 + x));
        let mut p = GaussianParticle::at_rest(Vector3::new(0.1 * x, -0.3, 1.0 / 3.0), 1.7e-7, 1234.5, cov, i % 3, -0.04);
        p.velocity = Vector3::new(1.0, 2.0, x);
        p.def_grad = Matrix3::new(1.01, 0.02, 0.0, -0.01, 0.99, 0.03, 0.0, 0.0, 1.0 + 1e-9 * x);
        let d = p.def_grad * cov * p.def_grad.transpose();
        p.dynamic_cov = (d + d.transpose()) * 0.5;
        p.opacity = 0.625;
        p.alpha = -0.04 - 1e-3 * x;
        p.sh = ShCoeffs::zeros(1);
        for (k, c) in p.sh.coeffs.iter_mut().enumerate() {
            *c = [k as f64 * 0.1, -0.2, x];
        }
        p
    }

    #[test]
    fn state_round_trips_exactly() {
        let ps: Vec<Particle> = (0..5).map(particle).collect();
        let f = read_splats(&encode_state(&ps)).unwrap();
        assert_eq!(f.layout, Layout::State);
        assert_eq!(f.particles, ps);
    }

    #[test]
    fn empty_file_is_valid() {
        let f = read_splats(&encode_state(&[])).unwrap();
        assert!(f.particles.is_empty());
    }

    #[test]
    fn gaussian_layout_decodes_scale_rotation_opacity() {
        let names = ["x", "y", "z", "f_dc_0", "f_dc_1", "f_dc_2", "opacity", "scale_0", "scale_1", "scale_2", "rot_0", "rot_1", "rot_2", "rot_3"];
        let w = PlyWriter::new(names.iter().map(|n| (n.to_string(), ScalarType::F32)).collect());
        let half = std::f64::consts::FRAC_1_SQRT_2;
        let bytes = w.encode(1, |_, v| {
            v.extend([0.0, 1.0, 2.0, 0.5, 0.0, -0.5, 0.0, (0.1f64).ln(), (0.2f64).ln(), (0.3f64).ln(), half, 0.0, 0.0, half])
        });
        let f = read_splats(&bytes).unwrap();
        assert_eq!(f.layout, Layout::Gaussian3d);
        let p = &f.particles[0];
        assert!((p.opacity - 0.5).abs() < 1e-7);
        // 90° about z swaps the x and y variances
        let expect = Matrix3::from_diagonal(&Vector3::new(0.04, 0.01, 0.09));
        assert!((p.static_cov - expect).norm() < 1e-7, "{}", p.static_cov);
        assert!((p.sh.coeffs[0][0] - 0.5).abs() < 1e-7);
    }

    #[test]
    fn missing_covariance_is_named() {
        let w = PlyWriter::new(["x", "y", "z", "opacity"].iter().map(|n| (n.to_string(), ScalarType::F32)).collect());
        let e = read_splats(&w.encode(1, |_, v| v.extend([0.0; 4]))).unwrap_err();
        assert!(e.message.contains("cov_xx"), "{e}");
        let w = PlyWriter::new(["x", "y", "z", "scale_0", "scale_1", "scale_2", "rot_0"].iter().map(|n| (n.to_string(), ScalarType::F32)).collect());
        let e = read_splats(&w.encode(1, |_, v| v.extend([0.0; 7]))).unwrap_err();
        assert!(e.message.contains("rot_1"), "{e}");
    }

    #[test]
    fn rgb_colors_become_band0() {
        let text = "ply\nformat ascii 1.0\nelement vertex 1\nproperty float x\nproperty float y\nproperty float z\nproperty float cov_xx\nproperty float cov_xy\nproperty float cov_xz\nproperty float cov_yy\nproperty float cov_yz\nproperty float cov_zz\nproperty uchar red\nproperty uchar green\nproperty uchar blue\nend_header\n0 0 0 1 0 0 1 0 1 255 0 0\n";
        let f = read_splats(text.as_bytes()).unwrap();
        let c = splatmpm::fill::color_from_sh0(&f.particles[0].sh.dc());
        assert!((c[0] - 1.0).abs() < 1e-12 && c[1].abs() < 1e-12);
        assert_eq!(f.particles[0].opacity, 1.0);
    }
}
