//! Argument parsing and exit codes for the `splatmpm` binary.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};
use splatmpm::constitutive::DEFAULT_K;
use splatmpm::engine::ExecMode;
use splatmpm::model::presets;

use crate::driver::{self, SimulateOptions};
use crate::error::SceneError;

#[derive(Debug, Parser)]
#[command(name = "splatmpm", version, about = "Elastoplastic simulation of Gaussian-splat objects")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run a scene and write per-frame PLY snapshots plus stats.csv.
    Simulate {
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Serial scatter in particle order; bit-identical across runs and thread counts.
        #[arg(long)]
        deterministic: bool,
        #[arg(long)]
        threads: Option<usize>,
        /// Override the scene's frame count.
        #[arg(long)]
        frames: Option<usize>,
        /// Also write frame_%05d.png using the scene camera.
        #[arg(long)]
        preview: bool,
    },
    /// Seed interior particles inside a surface splat set.
    Fill {
        splats: PathBuf,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Recolour a frame PLY with the scene's lights and camera.
    Shade {
        frame: PathBuf,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        png: Option<PathBuf>,
    },
    /// Dump the return-map projection of a grid of trial (p, q) points as CSV.
    DiagReturnmap {
        /// Preset name (watermelon, jelly, kiwi, sandcastle).
        #[arg(long, default_value = "kiwi")]
        material: String,
        /// Part index within the preset.
        #[arg(long, default_value_t = 0)]
        part: usize,
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long, default_value_t = DEFAULT_K)]
        k: f64,
        #[arg(long, default_value_t = 41)]
        n: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check a scene file and the particle sets it references.
    Validate { config: PathBuf },
}

fn execute(command: Command, stdout: &mut dyn Write) -> Result<(), SceneError> {
    match command {
        Command::Simulate {
            config,
            out,
            deterministic,
            threads,
            frames,
            preview,
        } => {
            if threads == Some(0) {
                return Err(SceneError::Usage("--threads must be at least 1".into()));
            }
            let opts = SimulateOptions {
                out,
                mode: if deterministic { ExecMode::Deterministic } else { ExecMode::Parallel },
                threads,
                frames,
                preview,
            };
            let s = driver::simulate(&config, &opts)?;
            let _ = writeln!(stdout, "wrote {} frames of {} particles ({} substeps)", s.frames_written, s.particles, s.substeps);
        }
        Command::Fill { splats, config, out } => {
            let s = driver::fill(&splats, &config, &out)?;
            let _ = writeln!(
                stdout,
                "{} surface + {} interior particles ({} interior cells) -> {}",
                s.surface,
                s.interior,
                s.interior_cells,
                out.display()
            );
        }
        Command::Shade { frame, config, out, png } => {
            let n = driver::shade_file(&frame, &config, &out, png.as_deref())?;
            let _ = writeln!(stdout, "shaded {n} particles -> {}", out.display());
        }
        Command::DiagReturnmap {
            material,
            part,
            alpha,
            k,
            n,
            out,
        } => {
            let row = presets::by_name::<f64>(&material)
                .ok_or_else(|| SceneError::Usage(format!("unknown material preset '{material}'")))?;
            let m = row
                .materials
                .get(part)
                .ok_or_else(|| SceneError::Usage(format!("preset '{material}' has {} part(s)", row.materials.len())))?;
            if !(k > 0.0) || n < 2 {
                return Err(SceneError::Usage("need --k > 0 and --n >= 2".into()));
            }
            let csv = driver::returnmap_csv(m, alpha.unwrap_or(m.alpha0), k, n);
            match out {
                Some(path) => std::fs::write(&path, csv).map_err(|e| SceneError::io(&path, e))?,
                None => {
                    let _ = stdout.write_all(csv.as_bytes());
                }
            }
        }
        Command::Validate { config } => {
            for line in driver::validate_scene(&config)? {
                let _ = writeln!(stdout, "{line}");
            }
            let _ = writeln!(stdout, "ok");
        }
    }
    Ok(())
}

/// Parses `args` (including the program name) and runs the subcommand.
/// Returns 0 on success, 1 for usage and input errors, 2 for numerical aborts.
pub fn run<I, S>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let text = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = stdout.write_all(text.as_bytes());
                    0
                }
                _ => {
                    let _ = stderr.write_all(text.as_bytes());
                    1
                }
            };
        }
    };
    match execute(cli.command, stdout) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.exit_code()
        }
    }
}
