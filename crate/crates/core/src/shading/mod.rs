//! Per-splat normals from local PCA and Blinn-Phong point-light shading.

pub mod knn;

use nalgebra::{Matrix3, Vector3};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fill::{color_from_sh0, density_field_on, DensityField, DEFAULT_SUPPORT_MULT};
use crate::model::{CameraSpec, GaussianParticle, LightSpec, Lighting, Visibility};
use crate::real::Real;
use knn::PointGrid;

pub const DEFAULT_K_NEIGHBORS: usize = 16;
pub const DEFAULT_SHININESS: f64 = 32.0;

/// Flips `v` so that its largest-magnitude component (first on ties) is positive.
fn canonical_sign<T: Real>(v: Vector3<T>) -> Vector3<T> {
    let mut lead = 0;
    for a in 1..3 {
        if v[a].abs() > v[lead].abs() {
            lead = a;
        }
    }
    if v[lead] < T::zero() {
        -v
    } else {
        v
    }
}

/// Unit eigenvector of the smallest eigenvalue; equal eigenvalues are
/// ordered by the lexicographically smaller (sign-normalised) eigenvector.
fn smallest_eigenvector<T: Real>(cov: &Matrix3<T>) -> Vector3<T> {
    let eig = cov.symmetric_eigen();
    let scale = eig.eigenvalues.amax();
    let tie = scale * T::of(1e-12);
    let mut pairs: Vec<(T, Vector3<T>)> = (0..3)
        .map(|i| (eig.eigenvalues[i], canonical_sign(eig.eigenvectors.column(i).normalize())))
        .collect();
    pairs.sort_by(|a, b| {
        if (a.0 - b.0).abs() <= tie {
            let (x, y) = (a.1.as_slice(), b.1.as_slice());
            x.partial_cmp(y).unwrap_or(std::cmp::Ordering::Equal)
        } else {
            a.0.partial_cmp(&b.0).unwrap_or(std::cmp::Ordering::Equal)
        }
    });
    pairs[0].1
}

/// Surface normal per point: smallest principal axis of the covariance of
/// the point and its `k` nearest neighbours, oriented away from the cloud
/// centroid (points level with the centroid keep the canonical sign).
pub fn pca_normals<T: Real>(positions: &[Vector3<T>], k: usize) -> Result<Vec<Vector3<T>>> {
    if k < 4 {
        return Err(Error::InvalidConfig(format!("k_neighbors must be at least 4, got {k}")));
    }
    if positions.len() < k + 1 {
        return Err(Error::InsufficientNeighbors {
            need: k + 1,
            have: positions.len(),
        });
    }
    let n = T::of(positions.len() as f64);
    let centroid = positions.iter().fold(Vector3::zeros(), |a, p| a + p) / n;
    let index = PointGrid::new(positions, k);
    Ok(positions
        .par_iter()
        .map(|x| {
            let near = index.nearest(x, k + 1);
            let m = T::of(near.len() as f64);
            let mean = near.iter().fold(Vector3::zeros(), |a, (_, i)| a + positions[*i]) / m;
            let cov = near.iter().fold(Matrix3::zeros(), |a, (_, i)| {
                let d = positions[*i] - mean;
                a + d * d.transpose()
            }) / m;
            let normal = smallest_eigenvector(&cov);
            let out = x - centroid;
            let s = normal.dot(&out);
            if s < -T::of(1e-12) * out.norm() {
                -normal
            } else {
                normal
            }
        })
        .collect())
}

/// Light intensity `I_L = color · intensity`.
pub fn light_radiance<T: Real>(light: &LightSpec<T>) -> [T; 3] {
    light.color.map(|c| c * light.intensity)
}

/// `c₀⊙I_a + Σ_m T_m (c₀⊙I_L,m) (D_m + S_m) / r_m²` with `D = max(n·l, 0)`
/// and `S = max(n·h, 0)^p`. No clamping.
#[allow(clippy::too_many_arguments)]
pub fn blinn_phong<T: Real>(
    base: &[T; 3],
    normal: &Vector3<T>,
    position: &Vector3<T>,
    view_dir: &Vector3<T>,
    lights: &[LightSpec<T>],
    ambient: &[T; 3],
    shininess: T,
    visibility: &[T],
) -> Result<[T; 3]> {
    let mut out: [T; 3] = std::array::from_fn(|c| base[c] * ambient[c]);
    for (m, light) in lights.iter().enumerate() {
        let to_light = light.position - position;
        let r2 = to_light.norm_squared();
        if r2 == T::zero() {
            return Err(Error::CoincidentLight { light: m });
        }
        let l = to_light / r2.sqrt();
        let diffuse = normal.dot(&l).max(T::zero());
        let sum = l + view_dir;
        let spec = if sum.norm_squared() > T::zero() {
            normal.dot(&sum.normalize()).max(T::zero()).powf(shininess)
        } else {
            T::zero()
        };
        let t = visibility.get(m).copied().unwrap_or_else(T::one);
        let scale = t * (diffuse + spec) / r2;
        let radiance = light_radiance(light);
        for c in 0..3 {
            out[c] += base[c] * radiance[c] * scale;
        }
    }
    Ok(out)
}

/// Transmittance `exp(-Σ d(x_k))` with samples every `step` along the segment
/// to the light, starting `2·step` from the point.
pub fn transmittance<T: Real>(field: &DensityField<T>, from: &Vector3<T>, to: &Vector3<T>, step: T) -> T {
    let dir = to - from;
    let len = dir.norm();
    if len == T::zero() {
        return T::one();
    }
    let dir = dir / len;
    let mut s = step * T::of(2.0);
    let mut depth = T::zero();
    while s < len {
        depth += field.sample(&(from + dir * s));
        s += step;
    }
    (-depth).exp()
}

/// Density field of the current frame (dynamic covariances) on a grid of
/// the given spacing covering the particles.
pub fn occlusion_field<T: Real>(particles: &[GaussianParticle<T>], spacing: T) -> Result<DensityField<T>> {
    let frame: Vec<GaussianParticle<T>> = particles
        .iter()
        .map(|p| GaussianParticle {
            static_cov: p.dynamic_cov,
            ..p.clone()
        })
        .collect();
    let mult = T::of(DEFAULT_SUPPORT_MULT);
    let mut lo = Vector3::repeat(T::zero());
    let mut hi = lo;
    if let Some(first) = frame.first() {
        lo = first.position;
        hi = lo;
    }
    let mut reach = T::zero();
    for p in &frame {
        lo = lo.inf(&p.position);
        hi = hi.sup(&p.position);
        for a in 0..3 {
            reach = reach.max(mult * p.static_cov[(a, a)].max(T::zero()).sqrt());
        }
    }
    let lo = lo.add_scalar(-reach - spacing);
    let dims = std::array::from_fn(|a| ((hi[a] + reach + spacing - lo[a]) / spacing).ceil().to_f64_lossy() as usize + 1);
    density_field_on(&frame, lo, spacing, dims, mult)
}

/// Shaded colour per particle for one frame. Base colour comes from band-0
/// SH; the viewer looks along `camera.direction`.
pub fn shade_frame<T: Real>(
    particles: &[GaussianParticle<T>],
    lighting: &Lighting<T>,
    camera: &CameraSpec<T>,
    k_neighbors: usize,
    occlusion_step: T,
) -> Result<Vec<[T; 3]>> {
    if particles.is_empty() {
        return Ok(Vec::new());
    }
    let positions: Vec<Vector3<T>> = particles.iter().map(|p| p.position).collect();
    let normals = pca_normals(&positions, k_neighbors)?;
    let view = -camera.direction.normalize();
    let field = match lighting.visibility {
        Visibility::Constant => None,
        Visibility::DensityOcclusion => Some(occlusion_field(particles, occlusion_step)?),
    };
    let all: Vec<Result<[T; 3]>> = particles
        .par_iter()
        .zip(&normals)
        .map(|(p, n)| {
            let base = color_from_sh0(&p.sh.dc());
            let vis: Vec<T> = match &field {
                None => Vec::new(),
                Some(f) => lighting
                    .lights
                    .iter()
                    .map(|l| transmittance(f, &p.position, &l.position, occlusion_step))
                    .collect(),
            };
            blinn_phong(&base, n, &p.position, &view, &lighting.lights, &lighting.ambient, lighting.shininess, &vis)
        })
        .collect();
    all.into_iter().collect()
}
