//! Per-frame snapshots and their PLY export.

use std::path::{Path, PathBuf};

use splatmpm::fill::color_from_sh0;
use splatmpm::linalg::sym_to_array;
use splatmpm::Particle;

use crate::error::SceneError;
use crate::ply::{PlyWriter, ScalarType};
use crate::splats::{push_sh, sh_len, sh_properties, COV_NAMES};

/// Published state of one output frame.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameSnapshot {
    pub frame: usize,
    pub time: f64,
    /// Particles with `dynamic_cov` refreshed and SH rotated.
    pub particles: Vec<Particle>,
    /// Display colour per particle, already in `[0, 1]`.
    pub colors: Vec<[f64; 3]>,
}

/// Band-0 colour clamped to `[0, 1]`; used when no lighting is configured.
pub fn base_colors(particles: &[Particle]) -> Vec<[f64; 3]> {
    particles.iter().map(|p| color_from_sh0(&p.sh.dc()).map(|c| c.clamp(0.0, 1.0))).collect()
}

pub fn frame_file_name(frame: usize) -> String {
    format!("frame_{frame:05}.ply")
}

fn frame_writer(sh_n: usize, frame: usize, time: f64) -> PlyWriter {
    let d = ScalarType::F64;
    let mut props: Vec<(String, ScalarType)> = ["x", "y", "z"].iter().map(|n| (n.to_string(), d)).collect();
    props.extend(COV_NAMES.iter().map(|n| (n.to_string(), d)));
    props.push(("opacity".into(), d));
    props.extend(sh_properties(sh_n));
    props.extend(["red", "green", "blue"].iter().map(|n| (n.to_string(), d)));
    props.push(("material_id".into(), ScalarType::I32));
    props.push(("alpha".into(), d));
    PlyWriter::new(props)
        .comment(format!("frame {frame}"))
        .comment(format!("time {time:e}"))
}

/// Exact byte size `encode_frame` will produce.
pub fn predicted_size(snapshot: &FrameSnapshot) -> usize {
    frame_writer(sh_len(&snapshot.particles), snapshot.frame, snapshot.time).encoded_len(snapshot.particles.len())
}

pub fn encode_frame(snapshot: &FrameSnapshot) -> Vec<u8> {
    let ps = &snapshot.particles;
    let n = sh_len(ps);
    frame_writer(n, snapshot.frame, snapshot.time).encode(ps.len(), |i, v| {
        let p = &ps[i];
        v.extend(p.position.iter());
        v.extend(sym_to_array(&p.dynamic_cov));
        v.push(p.opacity);
        push_sh(&p.sh, n, v);
        v.extend(snapshot.colors[i]);
        v.push(p.material_id as f64);
        v.push(p.alpha);
    })
}

/// Writes `dir/frame_%05d.ply` and returns its path.
pub fn export_frame(snapshot: &FrameSnapshot, dir: &Path) -> Result<PathBuf, SceneError> {
    let path = dir.join(frame_file_name(snapshot.frame));
    std::fs::write(&path, encode_frame(snapshot)).map_err(|e| SceneError::io(&path, e))?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::splats::{read_splats, Layout};
    use nalgebra::{Matrix3, Vector3};

    fn snapshot(n: usize) -> FrameSnapshot {
        let particles: Vec<Particle> = (0..n)
            .map(|i| {
                let mut p = Particle::at_rest(Vector3::new(i as f64, 0.5, -1.0), 1e-6, 1000.0, Matrix3::identity() * 1e-4, i % 2, -0.04);
                p.dynamic_cov[(0, 1)] = 1e-5;
                p.dynamic_cov[(1, 0)] = 1e-5;
                p
            })
            .collect();
        let colors = base_colors(&particles);
        FrameSnapshot { frame: 7, time: 0.35, particles, colors }
    }

    #[test]
    fn names_are_zero_padded() {
        assert_eq!(frame_file_name(7), "frame_00007.ply");
        assert_eq!(frame_file_name(123456), "frame_123456.ply");
    }

    #[test]
    fn size_matches_prediction() {
        for n in [0, 1, 1000] {
            let s = snapshot(n);
            assert_eq!(encode_frame(&s).len(), predicted_size(&s));
        }
    }

    #[test]
    fn frames_read_back_as_covariance_layout() {
        let s = snapshot(5);
        let f = read_splats(&encode_frame(&s)).unwrap();
        assert_eq!(f.layout, Layout::Covariance);
        assert_eq!(f.particles.len(), 5);
        for (a, b) in f.particles.iter().zip(&s.particles) {
            assert_eq!(a.position, b.position);
            assert_eq!(a.static_cov, b.dynamic_cov);
            assert_eq!(a.material_id, b.material_id);
        }
    }
}
