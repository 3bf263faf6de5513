//! File formats, scene configuration and the command-line driver.

pub mod cli;
pub mod config;
pub mod driver;
pub mod error;
pub mod frame;
pub mod ply;
pub mod preview;
pub mod splats;

pub use error::SceneError;
