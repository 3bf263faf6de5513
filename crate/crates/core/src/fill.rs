//! Interior filling of splat shells: density field, inside/outside
//! classification and seeding of new interior particles.

use std::collections::VecDeque;

use nalgebra::{Cholesky, Matrix3, Vector3};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ColorRule, GaussianParticle, NaccMaterial, ShCoeffs};
use crate::real::Real;

pub const DEFAULT_TAU_D: f64 = 0.2;
pub const DEFAULT_SUPPORT_MULT: f64 = 3.0;

/// Band-0 SH normalisation `1 / (2√π)`.
pub const SH_C0: f64 = 0.282_094_791_773_878_14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CellClass {
    Exterior,
    Boundary,
    Interior,
}

/// Cell-centred density samples on a regular grid. Cell `(i, j, k)` has its
/// centre at `origin + spacing * (i + ½, j + ½, k + ½)`; storage is x-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityField<T: Real> {
    pub origin: Vector3<T>,
    pub spacing: T,
    pub dims: [usize; 3],
    pub density: Vec<T>,
    pub class: Vec<CellClass>,
}

impl<T: Real> DensityField<T> {
    pub fn new(origin: Vector3<T>, spacing: T, dims: [usize; 3]) -> Self {
        let n = dims[0] * dims[1] * dims[2];
        DensityField {
            origin,
            spacing,
            dims,
            density: vec![T::zero(); n],
            class: vec![CellClass::Exterior; n],
        }
    }

    pub fn len(&self) -> usize {
        self.density.len()
    }

    pub fn is_empty(&self) -> bool {
        self.density.is_empty()
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        (i * self.dims[1] + j) * self.dims[2] + k
    }

    pub fn coords(&self, idx: usize) -> [usize; 3] {
        let k = idx % self.dims[2];
        let j = (idx / self.dims[2]) % self.dims[1];
        [idx / (self.dims[1] * self.dims[2]), j, k]
    }

    pub fn cell_corner(&self, idx: usize) -> Vector3<T> {
        let c = self.coords(idx);
        self.origin + Vector3::from_fn(|a, _| T::of(c[a] as f64)) * self.spacing
    }

    pub fn cell_center(&self, idx: usize) -> Vector3<T> {
        self.cell_corner(idx).add_scalar(self.spacing * T::of(0.5))
    }

    pub fn cell_volume(&self) -> T {
        self.spacing * self.spacing * self.spacing
    }

    pub fn count(&self, class: CellClass) -> usize {
        self.class.iter().filter(|c| **c == class).count()
    }

    /// Density of the cell containing `x`; zero outside the field.
    pub fn sample(&self, x: &Vector3<T>) -> T {
        let mut c = [0usize; 3];
        for a in 0..3 {
            let local = ((x[a] - self.origin[a]) / self.spacing).floor();
            if local < T::zero() || local >= T::of(self.dims[a] as f64) {
                return T::zero();
            }
            c[a] = local.to_f64_lossy() as usize;
        }
        self.density[self.index(c[0], c[1], c[2])]
    }
}

/// Cubic `n³` box around the splat centres, padded by the largest support
/// radius so that every truncated Gaussian lies inside.
pub fn field_bounds<T: Real>(splats: &[GaussianParticle<T>], n: usize, support_mult: T) -> (Vector3<T>, T) {
    let n = n.max(1);
    if splats.is_empty() {
        return (Vector3::zeros(), T::one() / T::of(n as f64));
    }
    let mut lo = splats[0].position;
    let mut hi = lo;
    let mut reach = T::zero();
    for s in splats {
        lo = lo.inf(&s.position);
        hi = hi.sup(&s.position);
        for a in 0..3 {
            reach = reach.max(support_mult * s.static_cov[(a, a)].max(T::zero()).sqrt());
        }
    }
    let side = (hi - lo).max() + reach * T::of(2.0);
    // one spare cell on each side keeps the domain edge outside every shell
    let spacing = side / T::of(n.saturating_sub(2).max(1) as f64);
    let side = spacing * T::of(n as f64);
    let center = (lo + hi) * T::of(0.5);
    (center.add_scalar(-side * T::of(0.5)), spacing)
}

/// Splat density `Σ σ exp(-½ dᵀA⁻¹d)` at each cell centre of an `n³` field
/// enclosing the splats; contributions beyond `support_mult` Mahalanobis
/// units are dropped.
pub fn density_field<T: Real>(splats: &[GaussianParticle<T>], n: usize, support_mult: T) -> Result<DensityField<T>> {
    let (origin, spacing) = field_bounds(splats, n, support_mult);
    let n = n.max(1);
    density_field_on(splats, origin, spacing, [n; 3], support_mult)
}

/// [`density_field`] on an explicitly placed grid.
pub fn density_field_on<T: Real>(
    splats: &[GaussianParticle<T>],
    origin: Vector3<T>,
    spacing: T,
    dims: [usize; 3],
    support_mult: T,
) -> Result<DensityField<T>> {
    let mut field = DensityField::new(origin, spacing, dims);
    let cut = support_mult * support_mult;
    let inverses: Vec<Matrix3<T>> = splats
        .iter()
        .enumerate()
        .map(|(i, s)| {
            Cholesky::new(s.static_cov)
                .map(|c| c.inverse())
                .ok_or(Error::DegenerateCovariance { index: i })
        })
        .collect::<Result<_>>()?;

    // cell index range touched by each splat's support box, per axis
    let ranges: Vec<[(usize, usize); 3]> = splats
        .iter()
        .map(|s| {
            let mut r = [(1, 0); 3];
            for a in 0..3 {
                let half = support_mult * s.static_cov[(a, a)].sqrt();
                let lo = ((s.position[a] - half - origin[a]) / spacing - T::of(0.5)).ceil();
                let hi = ((s.position[a] + half - origin[a]) / spacing - T::of(0.5)).floor();
                let lo = lo.max(T::zero()).to_f64_lossy();
                let hi = hi.min(T::of(dims[a] as f64 - 1.0)).to_f64_lossy();
                if lo <= hi {
                    r[a] = (lo as usize, hi as usize);
                }
            }
            r
        })
        .collect();
    let mut by_plane: Vec<Vec<usize>> = vec![Vec::new(); dims[0]];
    for (s, r) in ranges.iter().enumerate() {
        if r.iter().all(|(lo, hi)| lo <= hi) {
            for plane in &mut by_plane[r[0].0..=r[0].1] {
                plane.push(s);
            }
        }
    }

    let half = T::of(0.5);
    let plane_len = dims[1] * dims[2];
    field
        .density
        .par_chunks_mut(plane_len.max(1))
        .enumerate()
        .for_each(|(i, plane)| {
            let x = origin[0] + (T::of(i as f64) + half) * spacing;
            for &s in &by_plane[i] {
                let sp = &splats[s];
                let inv = &inverses[s];
                let r = &ranges[s];
                for j in r[1].0..=r[1].1 {
                    let y = origin[1] + (T::of(j as f64) + half) * spacing;
                    for k in r[2].0..=r[2].1 {
                        let z = origin[2] + (T::of(k as f64) + half) * spacing;
                        let d = Vector3::new(x, y, z) - sp.position;
                        let m = d.dot(&(inv * d));
                        if m <= cut {
                            plane[j * dims[2] + k] += sp.opacity * (-half * m).exp();
                        }
                    }
                }
            }
        });
    Ok(field)
}

/// Marks `d ≥ tau_d` as Boundary, floods Exterior inward from every
/// domain-edge cell through non-Boundary cells, and calls the rest Interior.
pub fn classify<T: Real>(mut field: DensityField<T>, tau_d: T) -> DensityField<T> {
    let [nx, ny, nz] = field.dims;
    const UNSEEN: u8 = 0;
    const WALL: u8 = 1;
    const OUT: u8 = 2;
    let mut state: Vec<u8> = field
        .density
        .iter()
        .map(|d| if *d >= tau_d { WALL } else { UNSEEN })
        .collect();
    let mut queue = VecDeque::new();
    for idx in 0..field.len() {
        let [i, j, k] = field.coords(idx);
        let edge = i == 0 || j == 0 || k == 0 || i + 1 == nx || j + 1 == ny || k + 1 == nz;
        if edge && state[idx] == UNSEEN {
            state[idx] = OUT;
            queue.push_back(idx);
        }
    }
    while let Some(idx) = queue.pop_front() {
        let [i, j, k] = field.coords(idx);
        let mut visit = |i: usize, j: usize, k: usize| {
            let n = (i * ny + j) * nz + k;
            if state[n] == UNSEEN {
                state[n] = OUT;
                queue.push_back(n);
            }
        };
        if i > 0 {
            visit(i - 1, j, k);
        }
        if i + 1 < nx {
            visit(i + 1, j, k);
        }
        if j > 0 {
            visit(i, j - 1, k);
        }
        if j + 1 < ny {
            visit(i, j + 1, k);
        }
        if k > 0 {
            visit(i, j, k - 1);
        }
        if k + 1 < nz {
            visit(i, j, k + 1);
        }
    }
    field.class = state
        .iter()
        .map(|s| match *s {
            WALL => CellClass::Boundary,
            OUT => CellClass::Exterior,
            _ => CellClass::Interior,
        })
        .collect();
    field
}

/// Procedural colour for seeded interior particles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum InteriorColor<T: Real> {
    Uniform { color: [T; 3] },
    /// Linear blend from `inner` at `center` to `outer` at `radius` and beyond.
    Radial {
        center: Vector3<T>,
        radius: T,
        inner: [T; 3],
        outer: [T; 3],
    },
    /// `base` with a random `fraction` of particles set to `speck`.
    Speckle { base: [T; 3], speck: [T; 3], fraction: T },
}

impl<T: Real> InteriorColor<T> {
    fn color_at<R: Rng>(&self, x: &Vector3<T>, rng: &mut R) -> [T; 3] {
        match self {
            InteriorColor::Uniform { color } => *color,
            InteriorColor::Radial {
                center,
                radius,
                inner,
                outer,
            } => {
                let t = ((x - center).norm() / *radius).min(T::one());
                std::array::from_fn(|c| inner[c] + (outer[c] - inner[c]) * t)
            }
            InteriorColor::Speckle { base, speck, fraction } => {
                if T::of(rng.random::<f64>()) < *fraction {
                    *speck
                } else {
                    *base
                }
            }
        }
    }
}

/// Band-0 SH for an RGB colour: `(c - ½) / C₀` per channel.
pub fn sh0_init<T: Real>(color: &[T; 3]) -> Result<[T; 3]> {
    if let Some(bad) = color.iter().find(|c| !(**c >= T::zero() && **c <= T::one())) {
        return Err(Error::ColorRange { value: bad.to_f64_lossy() });
    }
    Ok(color.map(|c| (c - T::of(0.5)) / T::of(SH_C0)))
}

/// Inverse of [`sh0_init`] (no clamping).
pub fn color_from_sh0<T: Real>(sh0: &[T; 3]) -> [T; 3] {
    sh0.map(|s| s * T::of(SH_C0) + T::of(0.5))
}

/// Places `particles_per_cell` jittered, stratified particles in every
/// Interior cell. Each gets volume `cell_volume / particles_per_cell`, a
/// spherical covariance of radius `(3V/4π)^⅓`, opacity 1, the colour from
/// `color`, and the material chosen by `rule` from that colour.
pub fn seed_interior<T: Real>(
    field: &DensityField<T>,
    particles_per_cell: usize,
    color: &InteriorColor<T>,
    rule: &ColorRule<T>,
    materials: &[NaccMaterial<T>],
    seed: u64,
) -> Result<Vec<GaussianParticle<T>>> {
    if particles_per_cell == 0 {
        return Err(Error::InvalidConfig("particles_per_cell must be at least 1".into()));
    }
    let volume = field.cell_volume() / T::of(particles_per_cell as f64);
    let radius = (T::of(3.0) * volume / (T::of(4.0) * T::pi())).cbrt();
    let cov = Matrix3::identity() * (radius * radius);
    let strata = (1..).find(|s: &usize| s * s * s >= particles_per_cell).unwrap_or(1);
    let sub = field.spacing / T::of(strata as f64);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut slots: Vec<usize> = (0..strata * strata * strata).collect();
    let mut out = Vec::new();
    for idx in 0..field.len() {
        if field.class[idx] != CellClass::Interior {
            continue;
        }
        let corner = field.cell_corner(idx);
        slots.shuffle(&mut rng);
        for &slot in &slots[..particles_per_cell] {
            let s = [slot / (strata * strata), (slot / strata) % strata, slot % strata];
            let x = corner
                + Vector3::from_fn(|a, _| {
                    let u: f64 = rng.sample(rand::distr::Open01);
                    (T::of(s[a] as f64) + T::of(u)) * sub
                });
            let rgb = color.color_at(&x, &mut rng);
            let material_id = rule.material_for(&rgb);
            let m = materials.get(material_id).ok_or_else(|| {
                Error::InvalidConfig(format!("colour rule picks material {material_id}, table has {}", materials.len()))
            })?;
            let mut p = GaussianParticle::at_rest(x, volume, m.density, cov, material_id, m.alpha0);
            p.sh = ShCoeffs::band0(sh0_init(&rgb)?);
            out.push(p);
        }
    }
    Ok(out)
}

/// Sets each particle's material from its band-0 colour.
pub fn assign_materials_by_color<T: Real>(particles: &mut [GaussianParticle<T>], rule: &ColorRule<T>) {
    for p in particles {
        p.material_id = rule.material_for(&color_from_sh0(&p.sh.dc()));
    }
}
