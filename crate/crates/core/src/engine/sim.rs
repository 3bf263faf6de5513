use nalgebra::Vector3;

use super::boundary::{BoundaryCondition, ScriptedObstacle};
use super::transfer::{g2p, grid_forces, grid_update, p2g, ParticleUpdate};
use super::ExecMode;
use crate::constitutive::{ReturnCase, DEFAULT_K};
use crate::error::{Error, Result};
use crate::model::{GaussianParticle, MpmGrid, NaccMaterial, SceneConfig};
use crate::real::Real;

/// Per-substep scalars that do not change between substeps.
#[derive(Debug, Clone, PartialEq)]
pub struct StepParams<T: Real> {
    pub dt: T,
    pub gravity: Vector3<T>,
    pub flip_ratio: T,
    pub return_map_k: T,
    pub boundaries: Vec<BoundaryCondition<T>>,
    pub obstacles: Vec<ScriptedObstacle<T>>,
}

impl<T: Real> StepParams<T> {
    pub fn new(dt: T, gravity: Vector3<T>) -> Self {
        StepParams {
            dt,
            gravity,
            flip_ratio: T::of(0.95),
            return_map_k: T::of(DEFAULT_K),
            boundaries: Vec::new(),
            obstacles: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepStats<T: Real> {
    pub substep: usize,
    /// Grid totals right after P2G.
    pub total_mass: T,
    pub total_momentum: Vector3<T>,
    pub max_speed: T,
    pub plastic_count: usize,
    /// `max |v| Δt / Δx`; above 1 the step is flagged but still taken.
    pub cfl: T,
    pub cfl_warning: bool,
    /// Particles pushed back inside the grid margin this substep.
    pub clamped: usize,
    /// The substep was retried as two half steps after a pressure overflow.
    pub halved: bool,
}

/// Particles, materials and grid advanced together.
#[derive(Debug, Clone)]
pub struct Simulation<T: Real> {
    pub particles: Vec<GaussianParticle<T>>,
    pub materials: Vec<NaccMaterial<T>>,
    pub grid: MpmGrid<T>,
    pub params: StepParams<T>,
    pub mode: ExecMode,
    pub time: T,
    pub substep: usize,
}

struct Outcome<T: Real> {
    total_mass: T,
    total_momentum: Vector3<T>,
    plastic: usize,
    clamped: usize,
    /// Before margin clamping.
    max_speed: T,
}

impl<T: Real> Simulation<T> {
    pub fn new(
        particles: Vec<GaussianParticle<T>>,
        materials: Vec<NaccMaterial<T>>,
        grid: MpmGrid<T>,
        params: StepParams<T>,
        mode: ExecMode,
    ) -> Self {
        Simulation {
            particles,
            materials,
            grid,
            params,
            mode,
            time: T::zero(),
            substep: 0,
        }
    }

    pub fn from_config(config: &SceneConfig<T>, particles: Vec<GaussianParticle<T>>, mode: ExecMode) -> Self {
        let grid = MpmGrid::covering(config.domain.min, config.domain.max, config.grid_spacing);
        let params = StepParams {
            dt: config.step_dt,
            gravity: config.gravity,
            flip_ratio: config.flip_ratio,
            return_map_k: config.return_map_k,
            boundaries: config.boundaries.clone(),
            obstacles: config.obstacles.clone(),
        };
        Self::new(particles, config.materials(), grid, params, mode)
    }

    fn boundaries_at(&self, t: T) -> Vec<BoundaryCondition<T>> {
        let mut out = self.params.boundaries.clone();
        out.extend(self.params.obstacles.iter().filter_map(|o| o.boundary_at(t)));
        out
    }

    /// One substep of length `dt`; particles are only modified on success.
    fn advance(&mut self, dt: T) -> Result<Outcome<T>> {
        let boundaries = self.boundaries_at(self.time);
        let grid = &mut self.grid;
        grid.clear();
        let st = p2g(&self.particles, grid, self.mode)?;
        let total_mass = grid.total_mass();
        let total_momentum = grid.total_momentum();
        grid_forces(&self.particles, &st, grid, &self.materials, &self.params.gravity, self.mode)?;
        grid_update(grid, dt, &boundaries);
        let updates = g2p(
            grid,
            &self.particles,
            &st,
            dt,
            self.params.flip_ratio,
            &self.materials,
            self.params.return_map_k,
        )?;

        let inset = grid.spacing * T::of(1e-6);
        let lo = grid.interior_min().add_scalar(inset);
        let hi = grid.interior_max().add_scalar(-inset);
        let (mut plastic, mut clamped) = (0, 0);
        let max_speed = updates.iter().map(|u| u.velocity.norm()).fold(T::zero(), |a, b| a.max(b));
        for (p, u) in self.particles.iter_mut().zip(updates) {
            let ParticleUpdate {
                mut velocity,
                mut position,
                def_grad,
                alpha,
                case,
            } = u;
            if (0..3).any(|a| position[a] < lo[a] || position[a] > hi[a]) {
                position = Vector3::from_fn(|a, _| position[a].max(lo[a]).min(hi[a]));
                velocity = Vector3::zeros();
                clamped += 1;
            }
            if case != ReturnCase::Elastic {
                plastic += 1;
            }
            p.velocity = velocity;
            p.position = position;
            p.def_grad = def_grad;
            p.alpha = alpha;
        }
        self.time += dt;
        Ok(Outcome {
            total_mass,
            total_momentum,
            plastic,
            clamped,
            max_speed,
        })
    }

    /// Advances one substep. A pressure overflow is retried once as two
    /// half steps; a second failure is returned.
    pub fn step(&mut self) -> Result<StepStats<T>> {
        let dt = self.params.dt;
        let (out, halved) = match self.advance(dt) {
            Ok(o) => (o, false),
            Err(e) if matches!(e.root(), Error::PressureOverflow { .. }) => {
                let half = dt * T::of(0.5);
                let a = self.advance(half)?;
                let b = self.advance(half)?;
                let merged = Outcome {
                    plastic: a.plastic.max(b.plastic),
                    clamped: a.clamped + b.clamped,
                    max_speed: a.max_speed.max(b.max_speed),
                    ..a
                };
                (merged, true)
            }
            Err(e) => return Err(e),
        };
        let max_speed = out.max_speed;
        let cfl = max_speed * dt / self.grid.spacing;
        let stats = StepStats {
            substep: self.substep,
            total_mass: out.total_mass,
            total_momentum: out.total_momentum,
            max_speed,
            plastic_count: out.plastic,
            cfl,
            cfl_warning: cfl > T::one(),
            clamped: out.clamped,
            halved,
        };
        self.substep += 1;
        Ok(stats)
    }

    /// Runs `frames × substeps_per_frame` substeps, calling `on_frame` with
    /// the frame index (0 is the initial state) and that frame's step stats.
    /// Errors inside a frame are wrapped in [`Error::FrameAbort`].
    pub fn run<F>(&mut self, frames: usize, substeps_per_frame: usize, mut on_frame: F) -> Result<()>
    where
        F: FnMut(usize, &Self, &[StepStats<T>]) -> Result<()>,
    {
        on_frame(0, self, &[])?;
        let mut stats = Vec::with_capacity(substeps_per_frame);
        for frame in 1..=frames {
            stats.clear();
            for sub in 0..substeps_per_frame {
                let s = self.step().map_err(|e| Error::FrameAbort {
                    frame,
                    substep: sub,
                    source: Box::new(e),
                })?;
                stats.push(s);
            }
            on_frame(frame, self, &stats)?;
        }
        Ok(())
    }
}
