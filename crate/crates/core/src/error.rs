use thiserror::Error;

/// Errors raised by the physics, geometry and shading routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("degenerate deformation gradient (det = {det:e})")]
    DegenerateGradient { det: f64 },

    #[error("pressure overflow: elastic volume radicand {radicand:e} <= 0 at p = {pressure:e}")]
    PressureOverflow { pressure: f64, radicand: f64 },

    #[error("position ({x}, {y}, {z}) lies outside the grid interior margin")]
    OutOfDomain { x: f64, y: f64, z: f64 },

    #[error("degenerate covariance on splat {index}")]
    DegenerateCovariance { index: usize },

    #[error("need at least {need} particles for the neighbour query, have {have}")]
    InsufficientNeighbors { need: usize, have: usize },

    #[error("light {light} coincides with the shaded point")]
    CoincidentLight { light: usize },

    #[error("color component {value} outside [0, 1]")]
    ColorRange { value: f64 },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("particle {index}: {source}")]
    Particle {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("frame {frame} aborted at substep {substep}: {source}")]
    FrameAbort {
        frame: usize,
        substep: usize,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub fn at_particle(self, index: usize) -> Self {
        Error::Particle {
            index,
            source: Box::new(self),
        }
    }

    /// Innermost error, skipping particle/frame attribution layers.
    pub fn root(&self) -> &Error {
        match self {
            Error::Particle { source, .. } | Error::FrameAbort { source, .. } => source.root(),
            e => e,
        }
    }

    /// Stable snake_case name of the root variant.
    pub fn kind(&self) -> &'static str {
        match self.root() {
            Error::DegenerateGradient { .. } => "degenerate_gradient",
            Error::PressureOverflow { .. } => "pressure_overflow",
            Error::OutOfDomain { .. } => "out_of_domain",
            Error::DegenerateCovariance { .. } => "degenerate_covariance",
            Error::InsufficientNeighbors { .. } => "insufficient_neighbors",
            Error::CoincidentLight { .. } => "coincident_light",
            Error::ColorRange { .. } => "color_range",
            Error::InvalidConfig(_) => "invalid_config",
            Error::Particle { .. } | Error::FrameAbort { .. } => unreachable!("root strips wrappers"),
        }
    }

    /// True for failures caused by numerical breakdown rather than bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self.root(),
            Error::DegenerateGradient { .. } | Error::PressureOverflow { .. }
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
