//! Particle → node accumulation in fixed (serial) or slab-binned (parallel) order.

use nalgebra::Vector4;
use rayon::prelude::*;

use super::kernel::Stencil;
use super::ExecMode;
use crate::model::NodeBox;
use crate::real::Real;

/// Particles are binned by the x index of their stencil base; a bin covers
/// `SLAB` base planes and therefore writes to `SLAB + 2` node planes.
const SLAB: usize = 4;
const SPAN: usize = SLAB + 2;

/// Smallest node box holding every stencil, or `None` without particles.
pub fn stencil_box<T: Real>(stencils: &[Stencil<T>]) -> Option<NodeBox> {
    let first = stencils.first()?;
    let mut lo = first.base;
    let mut hi = first.base;
    for st in stencils {
        for a in 0..3 {
            lo[a] = lo[a].min(st.base[a]);
            hi[a] = hi[a].max(st.base[a]);
        }
    }
    Some(NodeBox {
        lo,
        hi: hi.map(|h| h + 3),
    })
}

/// Sums `value(p, a, b, c)` into node `base_p + (a, b, c)` for every
/// particle. The result is indexed box-locally (see [`NodeBox::local`]).
///
/// In [`ExecMode::Deterministic`] particles are visited in index order. In
/// [`ExecMode::Parallel`] each slab accumulates privately in index order and
/// the private buffers are then merged plane by plane in slab order, so the
/// result is independent of thread count and differs from the serial sum
/// only in floating-point association.
pub fn scatter<T, F>(bx: &NodeBox, stencils: &[Stencil<T>], mode: ExecMode, value: F) -> Vec<Vector4<T>>
where
    T: Real,
    F: Fn(usize, usize, usize, usize) -> Vector4<T> + Sync,
{
    let mut out = vec![Vector4::zeros(); bx.len()];
    match mode {
        ExecMode::Deterministic => {
            let [_, ey, ez] = bx.extent();
            for (p, st) in stencils.iter().enumerate() {
                let l = bx.local(st.base[0], st.base[1], st.base[2]);
                for a in 0..3 {
                    for b in 0..3 {
                        let row = l + (a * ey + b) * ez;
                        for c in 0..3 {
                            out[row + c] += value(p, a, b, c);
                        }
                    }
                }
            }
        }
        ExecMode::Parallel => scatter_slabs(bx, stencils, &value, &mut out),
    }
    out
}

fn scatter_slabs<T, F>(bx: &NodeBox, stencils: &[Stencil<T>], value: &F, out: &mut [Vector4<T>])
where
    T: Real,
    F: Fn(usize, usize, usize, usize) -> Vector4<T> + Sync,
{
    let [nx, ey, ez] = bx.extent();
    let plane = ey * ez;
    let n_slabs = nx.div_ceil(SLAB);
    let slab_of = |st: &Stencil<T>| (st.base[0] - bx.lo[0]) / SLAB;

    // counting sort keeps particle-index order inside each slab
    let mut counts = vec![0usize; n_slabs + 1];
    for st in stencils {
        counts[slab_of(st) + 1] += 1;
    }
    for s in 0..n_slabs {
        counts[s + 1] += counts[s];
    }
    let mut order = vec![0usize; stencils.len()];
    let mut fill = counts.clone();
    for (p, st) in stencils.iter().enumerate() {
        let s = slab_of(st);
        order[fill[s]] = p;
        fill[s] += 1;
    }

    let locals: Vec<Option<Vec<Vector4<T>>>> = (0..n_slabs)
        .into_par_iter()
        .map(|s| {
            let members = &order[counts[s]..counts[s + 1]];
            if members.is_empty() {
                return None;
            }
            let x0 = bx.lo[0] + s * SLAB;
            let mut buf = vec![Vector4::zeros(); SPAN * plane];
            for &p in members {
                let st = &stencils[p];
                for a in 0..3 {
                    let row = (st.base[0] + a - x0) * plane;
                    for b in 0..3 {
                        let line = row + (st.base[1] + b - bx.lo[1]) * ez + st.base[2] - bx.lo[2];
                        for c in 0..3 {
                            buf[line + c] += value(p, a, b, c);
                        }
                    }
                }
            }
            Some(buf)
        })
        .collect();

    out.par_chunks_mut(plane).enumerate().for_each(|(i, dst)| {
        let s = i / SLAB;
        // slab s-1 reaches planes 4(s-1) .. 4(s-1)+5, i.e. the first two planes of slab s
        let mut sources = Vec::with_capacity(2);
        if s > 0 && i - (s - 1) * SLAB < SPAN {
            sources.push((s - 1, i - (s - 1) * SLAB));
        }
        sources.push((s, i - s * SLAB));
        for (src, off) in sources {
            if let Some(Some(buf)) = locals.get(src) {
                for (d, v) in dst.iter_mut().zip(&buf[off * plane..(off + 1) * plane]) {
                    *d += v;
                }
            }
        }
    });
}
