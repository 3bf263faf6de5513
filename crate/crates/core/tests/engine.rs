//! Whole-substep properties of the MPM engine.

use nalgebra::{Matrix3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use splatmpm::engine::{grid_update, p2g, BoundaryCondition, BoundaryMode, ExecMode, Simulation, StepParams};
use splatmpm::model::{presets, GaussianParticle, MpmGrid};

type P = GaussianParticle<f64>;

const H: f64 = 1.0 / 32.0;

/// Jittered block spinning about z and drifting in x.
fn spinning_block(n: usize, corner: Vector3<f64>, seed: u64) -> Vec<P> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let h = H / 2.0;
    let center = corner + Vector3::repeat(n as f64 * h / 2.0);
    let mut out = Vec::new();
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                let jitter = Vector3::from_fn(|_, _| rng.random_range(-0.2..0.2)) * h;
                let x = corner + Vector3::new(i as f64, j as f64, k as f64) * h + jitter;
                let mut p = GaussianParticle::at_rest(x, h * h * h, 1000.0, Matrix3::identity() * (h * h * 0.1), 0, -0.04);
                let r = x - center;
                p.velocity = Vector3::new(0.3 - 4.0 * r.y, 4.0 * r.x, 0.1);
                out.push(p);
            }
        }
    }
    out
}

fn sim(particles: Vec<P>, mode: ExecMode, gravity: f64, boundaries: Vec<BoundaryCondition<f64>>) -> Simulation<f64> {
    let grid = MpmGrid::new(Vector3::zeros(), H, [33, 33, 33]);
    let mut params = StepParams::new(1e-4, Vector3::new(0.0, 0.0, gravity));
    params.boundaries = boundaries;
    Simulation::new(particles, vec![presets::kiwi()], grid, params, mode)
}

fn positions(s: &Simulation<f64>) -> Vec<Vector3<f64>> {
    s.particles.iter().map(|p| p.position).collect()
}

#[test]
fn p2g_conserves_mass_and_momentum_in_both_modes() {
    let ps = spinning_block(12, Vector3::repeat(0.3), 1);
    let mass: f64 = ps.iter().map(|p| p.mass).sum();
    let momentum: Vector3<f64> = ps.iter().map(|p| p.velocity * p.mass).sum();
    for (mode, tol) in [(ExecMode::Deterministic, 1e-13), (ExecMode::Parallel, 1e-10)] {
        let mut grid = MpmGrid::new(Vector3::zeros(), H, [33, 33, 33]);
        p2g(&ps, &mut grid, mode).unwrap();
        assert!((grid.total_mass() - mass).abs() <= tol * mass, "{mode:?}");
        assert!((grid.total_momentum() - momentum).norm() <= tol * momentum.norm(), "{mode:?}");
    }
}

#[test]
fn free_grid_update_keeps_momentum() {
    let ps = spinning_block(8, Vector3::repeat(0.3), 2);
    let mut grid = MpmGrid::new(Vector3::zeros(), H, [33, 33, 33]);
    p2g(&ps, &mut grid, ExecMode::Deterministic).unwrap();
    grid_update(&mut grid, 1e-3, &[]);
    for i in 0..grid.len() {
        if grid.mass[i] > 0.0 {
            assert_eq!(grid.velocity_new[i] * grid.mass[i], grid.velocity[i] * grid.mass[i]);
        }
    }
}

#[test]
fn whole_cell_translation_shifts_the_motion() {
    let shift = Vector3::new(4.0, 2.0, 3.0) * H;
    let ground = |z: f64| vec![BoundaryCondition::ground(z, BoundaryMode::Slip)];
    let base = spinning_block(8, Vector3::new(0.25, 0.25, 0.2), 3);
    let moved: Vec<P> = base
        .iter()
        .cloned()
        .map(|mut p| {
            p.position += shift;
            p.ref_position += shift;
            p
        })
        .collect();
    let mut a = sim(base, ExecMode::Deterministic, -9.8, ground(0.19));
    let mut b = sim(moved, ExecMode::Deterministic, -9.8, ground(0.19 + shift.z));
    for _ in 0..200 {
        a.step().unwrap();
        b.step().unwrap();
    }
    for (pa, pb) in a.particles.iter().zip(&b.particles) {
        assert!((pb.position - shift - pa.position).norm() < 1e-12, "{} vs {}", pa.position, pb.position - shift);
        assert!((pb.def_grad - pa.def_grad).norm() < 1e-10);
    }
}

#[test]
fn deterministic_reruns_are_bit_identical() {
    let run = || {
        let mut s = sim(spinning_block(10, Vector3::repeat(0.3), 4), ExecMode::Deterministic, -9.8, vec![]);
        for _ in 0..50 {
            s.step().unwrap();
        }
        s.particles
    };
    assert_eq!(run(), run());
}

#[test]
fn parallel_mode_tracks_deterministic_mode() {
    let ps = spinning_block(14, Vector3::repeat(0.3), 5);
    let mut a = sim(ps.clone(), ExecMode::Deterministic, -9.8, vec![]);
    let mut b = sim(ps, ExecMode::Parallel, -9.8, vec![]);
    for _ in 0..50 {
        a.step().unwrap();
        b.step().unwrap();
    }
    let (xa, xb) = (positions(&a), positions(&b));
    let center = xa.iter().sum::<Vector3<f64>>() / xa.len() as f64;
    let diff: f64 = xa.iter().zip(&xb).map(|(p, q)| (p - q).norm_squared()).sum();
    let spread: f64 = xa.iter().map(|p| (p - center).norm_squared()).sum();
    assert!((diff / spread).sqrt() < 1e-6);
}

#[test]
fn fast_motion_raises_cfl_warning_without_error() {
    let mut ps = spinning_block(3, Vector3::repeat(0.4), 6);
    for p in &mut ps {
        p.velocity = Vector3::new(400.0, 0.0, 0.0);
    }
    let mut s = sim(ps, ExecMode::Deterministic, 0.0, vec![]);
    let stats = s.step().unwrap();
    assert!(stats.cfl > 1.0 && stats.cfl_warning);
}

#[test]
fn sticky_box_obstacle_carries_particles() {
    let ps = spinning_block(6, Vector3::repeat(0.4), 7)
        .into_iter()
        .map(|mut p| {
            p.velocity = Vector3::zeros();
            p
        })
        .collect();
    let wall = BoundaryCondition {
        shape: splatmpm::engine::BoundaryShape::Box {
            min: Vector3::repeat(0.0),
            max: Vector3::repeat(1.0),
        },
        mode: BoundaryMode::Sticky,
        velocity: Vector3::new(0.0, 0.5, 0.0),
    };
    let mut s = sim(ps, ExecMode::Deterministic, 0.0, vec![wall]);
    s.step().unwrap();
    for p in &s.particles {
        assert!((p.velocity - Vector3::new(0.0, 0.5, 0.0)).norm() < 1e-12);
    }
}
