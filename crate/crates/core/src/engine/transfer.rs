//! The four grid/particle transfer stages of one explicit substep.

use nalgebra::{Matrix3, Vector3, Vector4};
use rayon::prelude::*;

use super::kernel::{stencil, Stencil};
use super::scatter::{scatter, stencil_box};
use super::ExecMode;
use crate::constitutive::{kirchhoff_stress, plastic_update, ReturnCase};
use crate::engine::boundary::BoundaryCondition;
use crate::error::Result;
use crate::model::{GaussianParticle, MpmGrid, NaccMaterial, NodeBox};
use crate::real::Real;

/// Runs `f` on every index in parallel and returns the results in order,
/// or the error of the lowest failing index.
pub(crate) fn try_map<T, F>(n: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync,
{
    let all: Vec<Result<T>> = (0..n).into_par_iter().map(|p| f(p).map_err(|e| e.at_particle(p))).collect();
    all.into_iter().collect()
}

pub fn stencils<T: Real>(particles: &[GaussianParticle<T>], grid: &MpmGrid<T>) -> Result<Vec<Stencil<T>>> {
    try_map(particles.len(), |p| stencil(&particles[p].position, grid))
}

/// Scatters mass and momentum; sets `velocity = momentum / mass` on loaded
/// nodes. The grid must be clear; its active box is set to the touched nodes.
pub fn p2g<T: Real>(particles: &[GaussianParticle<T>], grid: &mut MpmGrid<T>, mode: ExecMode) -> Result<Vec<Stencil<T>>> {
    let st = stencils(particles, grid)?;
    let Some(bx) = stencil_box(&st) else {
        grid.active = Some(NodeBox { lo: [0; 3], hi: [0; 3] });
        return Ok(st);
    };
    let acc = scatter(&bx, &st, mode, |p, a, b, c| {
        let part = &particles[p];
        let mw = part.mass * st[p].weight(a, b, c);
        let mv = part.velocity * mw;
        Vector4::new(mw, mv.x, mv.y, mv.z)
    });
    grid.active = Some(bx);
    for (i, v) in bx.nodes(&*grid).collect::<Vec<_>>().into_iter().zip(&acc) {
        grid.mass[i] = v[0];
        grid.momentum[i] = Vector3::new(v[1], v[2], v[3]);
        grid.velocity[i] = if v[0] > T::zero() {
            grid.momentum[i] / v[0]
        } else {
            Vector3::zeros()
        };
    }
    Ok(st)
}

/// `f_i = -Σ_p V_p⁰ τ_p ∇N_ip + m_i g`.
pub fn grid_forces<T: Real>(
    particles: &[GaussianParticle<T>],
    st: &[Stencil<T>],
    grid: &mut MpmGrid<T>,
    materials: &[NaccMaterial<T>],
    gravity: &Vector3<T>,
    mode: ExecMode,
) -> Result<()> {
    let weighted: Vec<Matrix3<T>> = try_map(particles.len(), |p| {
        let part = &particles[p];
        let tau = kirchhoff_stress(&part.def_grad, &materials[part.material_id])?;
        Ok(tau * (-part.initial_volume))
    })?;
    let Some(bx) = grid.active.filter(|b| !b.is_empty()) else {
        return Ok(());
    };
    let acc = scatter(&bx, st, mode, |p, a, b, c| {
        let f = weighted[p] * st[p].gradient(a, b, c);
        Vector4::new(T::zero(), f.x, f.y, f.z)
    });
    for (i, v) in bx.nodes(&*grid).collect::<Vec<_>>().into_iter().zip(&acc) {
        grid.force[i] = Vector3::new(v[1], v[2], v[3]) + gravity * grid.mass[i];
    }
    Ok(())
}

/// Explicit Euler on loaded nodes followed by boundary projection. Only the
/// active box is visited when the grid records one.
pub fn grid_update<T: Real>(grid: &mut MpmGrid<T>, dt: T, boundaries: &[BoundaryCondition<T>]) {
    let nodes: Vec<usize> = match &grid.active {
        Some(b) => b.nodes(&*grid).collect(),
        None => (0..grid.len()).collect(),
    };
    let g = &*grid;
    let updated: Vec<Vector3<T>> = nodes
        .par_iter()
        .map(|&i| {
            if g.mass[i] <= T::zero() {
                return Vector3::zeros();
            }
            let mut v = g.velocity[i] + g.force[i] * (dt / g.mass[i]);
            if !boundaries.is_empty() {
                let x = g.node_position(i);
                for b in boundaries {
                    b.apply(&x, &mut v);
                }
            }
            v
        })
        .collect();
    for (i, v) in nodes.into_iter().zip(updated) {
        grid.velocity_new[i] = v;
    }
}

/// New particle state proposed by [`g2p`]; committed only if every particle succeeds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParticleUpdate<T: Real> {
    pub velocity: Vector3<T>,
    pub position: Vector3<T>,
    pub def_grad: Matrix3<T>,
    pub alpha: T,
    pub case: ReturnCase,
}

/// Gathers velocity and its gradient, blends PIC/FLIP, applies the trial
/// deformation update and the plastic return, and advects.
pub fn g2p<T: Real>(
    grid: &MpmGrid<T>,
    particles: &[GaussianParticle<T>],
    st: &[Stencil<T>],
    dt: T,
    flip_ratio: T,
    materials: &[NaccMaterial<T>],
    k: T,
) -> Result<Vec<ParticleUpdate<T>>> {
    try_map(particles.len(), |p| {
        let part = &particles[p];
        let s = &st[p];
        let mut v_pic = Vector3::zeros();
        let mut v_old = Vector3::zeros();
        let mut grad_v = Matrix3::zeros();
        for a in 0..3 {
            for b in 0..3 {
                for c in 0..3 {
                    let i = s.node(grid, a, b, c);
                    let w = s.weight(a, b, c);
                    let vn = grid.velocity_new[i];
                    v_pic += vn * w;
                    v_old += grid.velocity[i] * w;
                    grad_v += vn * s.gradient(a, b, c).transpose();
                }
            }
        }
        let v_flip = part.velocity + (v_pic - v_old);
        let velocity = v_flip * flip_ratio + v_pic * (T::one() - flip_ratio);
        let f_trial = (Matrix3::identity() + grad_v * dt) * part.def_grad;
        let r = plastic_update(&f_trial, part.alpha, &materials[part.material_id], k)?;
        Ok(ParticleUpdate {
            velocity,
            position: part.position + velocity * dt,
            def_grad: r.new_def_grad,
            alpha: part.alpha + r.delta_alpha,
            case: r.case,
        })
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::boundary::BoundaryMode;
    use crate::model::presets;

    fn grid() -> MpmGrid<f64> {
        MpmGrid::new(Vector3::zeros(), 0.1, [12, 12, 12])
    }

    fn particle(x: Vector3<f64>, v: Vector3<f64>) -> GaussianParticle<f64> {
        let mut p = GaussianParticle::at_rest(x, 1e-3, 1000.0, nalgebra::Matrix3::identity() * 1e-4, 0, -0.04);
        p.velocity = v;
        p
    }

    #[test]
    fn p2g_on_node_deposits_centre_weight() {
        for mode in [ExecMode::Deterministic, ExecMode::Parallel] {
            let mut g = grid();
            let node = g.index(5, 6, 4);
            let mut p = particle(g.node_position(node), Vector3::x());
            p.mass = 1.0;
            p2g(&[p], &mut g, mode).unwrap();
            assert!((g.mass[node] - 0.421875).abs() < 1e-12);
            assert!((g.momentum[node] - Vector3::new(0.421875, 0.0, 0.0)).norm() < 1e-12);
            assert!((g.total_mass() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn p2g_of_nothing_is_zero() {
        let mut g = grid();
        p2g::<f64>(&[], &mut g, ExecMode::Parallel).unwrap();
        assert!(g.mass.iter().all(|m| *m == 0.0));
    }

    #[test]
    fn unstressed_forces_are_gravity() {
        let mut g = grid();
        let ps: Vec<_> = (0..20)
            .map(|i| particle(Vector3::new(0.3 + 0.02 * i as f64, 0.5, 0.55), Vector3::zeros()))
            .collect();
        let m = [presets::jelly()];
        let gravity = Vector3::new(0.0, 0.0, -9.8);
        let st = p2g(&ps, &mut g, ExecMode::Deterministic).unwrap();
        grid_forces(&ps, &st, &mut g, &m, &gravity, ExecMode::Deterministic).unwrap();
        for i in 0..g.len() {
            assert!((g.force[i] - gravity * g.mass[i]).norm() < 1e-14);
        }
    }

    #[test]
    fn sticky_and_slip_nodes() {
        let mut g = grid();
        let n = g.len();
        g.mass = vec![1.0; n];
        g.velocity = vec![Vector3::new(1.0, 0.0, -2.0); n];
        grid_update(&mut g, 0.1, &[BoundaryCondition::ground(0.25, BoundaryMode::Slip)]);
        assert_eq!(g.velocity_new[g.index(3, 3, 2)], Vector3::new(1.0, 0.0, 0.0));
        assert_eq!(g.velocity_new[g.index(3, 3, 3)], Vector3::new(1.0, 0.0, -2.0));
        grid_update(&mut g, 0.1, &[BoundaryCondition::ground(0.25, BoundaryMode::Sticky)]);
        assert_eq!(g.velocity_new[g.index(3, 3, 1)], Vector3::zeros());
        // zero force leaves velocity unchanged
        grid_update(&mut g, 0.1, &[]);
        assert_eq!(g.velocity_new, g.velocity);
    }

    #[test]
    fn uniform_field_moves_particles_rigidly() {
        let mut g = grid();
        let c = Vector3::new(0.3, -0.2, 0.1);
        let n = g.len();
        g.mass = vec![1.0; n];
        g.velocity = vec![c; n];
        g.velocity_new = vec![c; n];
        let ps = vec![particle(Vector3::new(0.43, 0.51, 0.66), c)];
        let st = stencils(&ps, &g).unwrap();
        let up = g2p(&g, &ps, &st, 1e-3, 0.95, &[presets::jelly()], 2.0).unwrap();
        assert!((up[0].velocity - c).norm() < 1e-14);
        assert!((up[0].def_grad - Matrix3::identity()).norm() < 1e-12);
    }

    #[test]
    fn rotational_field_gives_skew_gradient() {
        let mut g = grid();
        let omega = Vector3::new(0.0, 0.0, 2.0);
        let center = Vector3::new(0.55, 0.55, 0.55);
        for i in 0..g.len() {
            let v = omega.cross(&(g.node_position(i) - center));
            g.velocity[i] = v;
            g.velocity_new[i] = v;
        }
        let ps = vec![particle(Vector3::new(0.52, 0.61, 0.47), Vector3::zeros())];
        let st = stencils(&ps, &g).unwrap();
        let dt = 1e-4;
        let up = g2p(&g, &ps, &st, dt, 0.0, &[presets::jelly()], 2.0).unwrap();
        let expect = Matrix3::identity() + crate::linalg::skew(&omega) * dt;
        assert!((up[0].def_grad - expect).norm() < 1e-12);
    }
}
