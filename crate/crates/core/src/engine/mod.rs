//! Explicit MPM time stepping.

pub mod boundary;
pub mod kernel;
pub mod scatter;
mod sim;
pub mod transfer;

pub use boundary::{BoundaryCondition, BoundaryMode, BoundaryShape, Keyframe, ScriptedObstacle};
pub use kernel::bspline_weights;
pub use sim::{Simulation, StepParams, StepStats};
pub use transfer::{g2p, grid_forces, grid_update, p2g};

/// How node accumulations are ordered.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ExecMode {
    /// Serial accumulation in particle-index order; bit-reproducible.
    #[default]
    Deterministic,
    /// Slab-binned accumulation across threads. Reproducible for a fixed
    /// particle set regardless of thread count, but summation order differs
    /// from [`ExecMode::Deterministic`].
    Parallel,
}
