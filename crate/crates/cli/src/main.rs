use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::Parser;
use dwr_core::{dwr_loop, parse_parameter_file};

/// Goal-oriented space-time adaptive solver for the rotating-cone diffusion
/// benchmark on the L-shaped domain.
#[derive(Debug, Parser)]
#[command(version)]
struct Args {
    /// Parameter file (`subsection` / `set` / `end` format).
    parameter_file: PathBuf,
    /// Output directory; overrides the parameter file.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Maximum number of adaptive loops; overrides the parameter file.
    #[arg(long)]
    max_loops: Option<usize>,
    /// Write VTK files every k loops (0 disables); overrides the parameter file.
    #[arg(long)]
    vtk_every: Option<usize>,
}

fn run(args: Args) -> anyhow::Result<bool> {
    let mut config = parse_parameter_file(&args.parameter_file)
        .with_context(|| format!("reading {}", args.parameter_file.display()))?;
    if let Some(dir) = args.out {
        config.output.directory = dir;
    }
    if let Some(n) = args.max_loops {
        config.adapt.max_loops = n;
    }
    if let Some(k) = args.vtk_every {
        config.output.vtk_every = k;
    }
    config.validate()?;
    let outcome = dwr_loop(&config, Some(&config.output.directory))?;
    for r in &outcome.records {
        println!(
            "loop {:>2}: {:>4} slabs {:>6} cells  goal error {:.4e}  eta {}  I_eff {}",
            r.loop_index,
            r.n_slabs,
            r.max_cells,
            r.goal_error,
            r.eta.map_or("-".to_string(), |e| format!("{e:.4e}")),
            r.i_eff.map_or("-".to_string(), |e| format!("{e:.3}")),
        );
    }
    Ok(outcome.converged)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Args::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            log::warn!("goal tolerance not reached within max_loops");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
