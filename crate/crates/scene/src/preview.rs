//! Orthographic point-sprite previews.

use std::path::Path;

use image::{Rgb, RgbImage};
use nalgebra::{SymmetricEigen, Vector3};
use rayon::prelude::*;
use splatmpm::model::CameraSpec;

use crate::error::SceneError;
use crate::frame::FrameSnapshot;

const BAND_ROWS: usize = 16;

#[derive(Debug, Clone, Copy)]
struct Sprite {
    cx: f64,
    cy: f64,
    radius: f64,
    depth: f64,
    index: usize,
}

fn basis(camera: &CameraSpec<f64>) -> (Vector3<f64>, Vector3<f64>, Vector3<f64>) {
    let dir = camera.direction.normalize();
    let mut right = dir.cross(&camera.up);
    if right.norm() < 1e-12 {
        // up parallel to the view; pick any perpendicular
        let alt = if dir.x.abs() < 0.9 { Vector3::x() } else { Vector3::y() };
        right = dir.cross(&alt);
    }
    let right = right.normalize();
    (dir, right, right.cross(&dir))
}

fn sprites(snapshot: &FrameSnapshot, camera: &CameraSpec<f64>) -> Vec<Sprite> {
    let (dir, right, up) = basis(camera);
    let [w, h] = camera.resolution.map(|r| r as f64);
    let px_per_m = w / camera.width;
    let height = camera.width * h / w;
    snapshot
        .particles
        .iter()
        .enumerate()
        .map(|(index, p)| {
            let rel = p.position - camera.center;
            let (sx, sy) = (rel.dot(&right), rel.dot(&up));
            let lmax = SymmetricEigen::new(p.dynamic_cov).eigenvalues.max().max(0.0);
            Sprite {
                cx: (sx / camera.width + 0.5) * w,
                cy: (0.5 - sy / height) * h,
                radius: (lmax.sqrt() * px_per_m).max(1.0),
                depth: rel.dot(&dir),
                index,
            }
        })
        .collect()
}

/// Depth-tested opaque sprites on a black background. Pixel `(x, y)` is hit
/// when its centre lies within the sprite radius; ties in depth go to the
/// lower particle index.
pub fn rasterize_preview(snapshot: &FrameSnapshot, camera: &CameraSpec<f64>) -> RgbImage {
    let [w, h] = camera.resolution;
    let (w, h) = (w as usize, h as usize);
    let sprites = sprites(snapshot, camera);
    let mut pixels = vec![0u8; w * h * 3];
    pixels.par_chunks_mut(w * 3 * BAND_ROWS).enumerate().for_each(|(band, out)| {
        let y0 = band * BAND_ROWS;
        let rows = out.len() / (w * 3);
        let mut zbuf: Vec<Option<(f64, usize)>> = vec![None; rows * w];
        for s in &sprites {
            let ylo = (s.cy - s.radius - 0.5).floor().max(y0 as f64) as isize;
            let yhi = ((s.cy + s.radius - 0.5).ceil() as isize).min((y0 + rows) as isize - 1);
            let xlo = (s.cx - s.radius - 0.5).floor().max(0.0) as isize;
            let xhi = ((s.cx + s.radius - 0.5).ceil() as isize).min(w as isize - 1);
            for y in ylo..=yhi {
                for x in xlo..=xhi {
                    let (dx, dy) = (x as f64 + 0.5 - s.cx, y as f64 + 0.5 - s.cy);
                    if dx * dx + dy * dy > s.radius * s.radius {
                        continue;
                    }
                    let slot = &mut zbuf[(y as usize - y0) * w + x as usize];
                    let key = (s.depth, s.index);
                    if slot.is_none_or(|cur| key.0 < cur.0 || (key.0 == cur.0 && key.1 < cur.1)) {
                        *slot = Some(key);
                    }
                }
            }
        }
        for (i, slot) in zbuf.iter().enumerate() {
            if let Some((_, idx)) = slot {
                let c = snapshot.colors[*idx];
                for ch in 0..3 {
                    out[i * 3 + ch] = (c[ch].clamp(0.0, 1.0) * 255.0).round() as u8;
                }
            }
        }
    });
    RgbImage::from_raw(w as u32, h as u32, pixels).expect("buffer sized from the resolution")
}

pub fn save_png(image: &RgbImage, path: &Path) -> Result<(), SceneError> {
    image.save_with_format(path, image::ImageFormat::Png).map_err(|e| match e {
        image::ImageError::IoError(io) => SceneError::io(path, io),
        other => SceneError::io(path, std::io::Error::other(other)),
    })
}

pub fn pixel(image: &RgbImage, x: u32, y: u32) -> [u8; 3] {
    let Rgb(c) = *image.get_pixel(x, y);
    c
}
