//! Quadratic B-spline transfer kernel on the 3×3×3 node stencil.

use nalgebra::Vector3;

use crate::error::{Error, Result};
use crate::model::MpmGrid;
use crate::real::Real;

/// Per-particle interpolation data: lowest stencil node plus 1D weights
/// and their spatial derivatives on each axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stencil<T: Real> {
    pub base: [usize; 3],
    pub w: [[T; 3]; 3],
    pub dw: [[T; 3]; 3],
}

impl<T: Real> Stencil<T> {
    #[inline(always)]
    pub fn weight(&self, a: usize, b: usize, c: usize) -> T {
        self.w[0][a] * self.w[1][b] * self.w[2][c]
    }

    #[inline(always)]
    pub fn gradient(&self, a: usize, b: usize, c: usize) -> Vector3<T> {
        let (w, dw) = (&self.w, &self.dw);
        Vector3::new(
            dw[0][a] * w[1][b] * w[2][c],
            w[0][a] * dw[1][b] * w[2][c],
            w[0][a] * w[1][b] * dw[2][c],
        )
    }

    #[inline(always)]
    pub fn node(&self, grid: &MpmGrid<T>, a: usize, b: usize, c: usize) -> usize {
        grid.index(self.base[0] + a, self.base[1] + b, self.base[2] + c)
    }
}

/// 1D quadratic B-spline weights and derivatives for fractional offset
/// `fx = x/Δx - base ∈ [0.5, 1.5)`.
#[inline(always)]
pub fn weights_1d<T: Real>(fx: T) -> ([T; 3], [T; 3]) {
    let half = T::of(0.5);
    let d0 = T::of(1.5) - fx;
    let d1 = fx - T::one();
    let d2 = fx - half;
    (
        [half * d0 * d0, T::of(0.75) - d1 * d1, half * d2 * d2],
        [-d0, T::of(-2.0) * d1, d2],
    )
}

/// True when `x` is at least 1.5 cells inside the outermost nodes.
pub fn in_margin<T: Real>(x: &Vector3<T>, grid: &MpmGrid<T>) -> bool {
    let inv = T::one() / grid.spacing;
    (0..3).all(|a| {
        let local = (x[a] - grid.origin[a]) * inv;
        local >= T::of(1.5) && local <= T::of(grid.dims[a] as f64 - 2.5)
    })
}

pub fn stencil<T: Real>(x: &Vector3<T>, grid: &MpmGrid<T>) -> Result<Stencil<T>> {
    if !in_margin(x, grid) {
        return Err(Error::OutOfDomain {
            x: x.x.to_f64_lossy(),
            y: x.y.to_f64_lossy(),
            z: x.z.to_f64_lossy(),
        });
    }
    let inv = T::one() / grid.spacing;
    let mut st = Stencil {
        base: [0; 3],
        w: [[T::zero(); 3]; 3],
        dw: [[T::zero(); 3]; 3],
    };
    for a in 0..3 {
        let local = (x[a] - grid.origin[a]) * inv;
        let base = (local - T::of(0.5)).floor();
        let (w, dw) = weights_1d(local - base);
        st.base[a] = base.to_f64_lossy() as usize;
        st.w[a] = w;
        st.dw[a] = dw.map(|d| d * inv);
    }
    Ok(st)
}

/// Node index, weight and weight gradient for the 27 stencil nodes.
pub fn bspline_weights<T: Real>(x: &Vector3<T>, grid: &MpmGrid<T>) -> Result<Vec<(usize, T, Vector3<T>)>> {
    let st = stencil(x, grid)?;
    let mut out = Vec::with_capacity(27);
    for a in 0..3 {
        for b in 0..3 {
            for c in 0..3 {
                out.push((st.node(grid, a, b, c), st.weight(a, b, c), st.gradient(a, b, c)));
            }
        }
    }
    Ok(out)
}
