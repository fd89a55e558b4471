use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use tensegrity_cli::error::{EXIT_OK, EXIT_USAGE};
use tensegrity_cli::{
    evaluate, plot, simulate, track, EvaluateArgs, PlotArgs, SimulateArgs, TrackArgs,
};

/// Constrained pose tracking for tensegrity robots from RGB-D and cable
/// length measurements.
#[derive(Parser, Debug)]
#[command(name = "tensegrity", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Render a synthetic dataset with ground truth.
    Simulate {
        /// Simulation settings (TOML); defaults to the noisy rolling gait.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Dataset directory to create.
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        max_frames: Option<usize>,
        #[arg(long)]
        quiet: bool,
    },
    /// Track a dataset and write a trajectory plus run manifest.
    Track {
        /// Dataset directory.
        dataset: PathBuf,
        /// Tracker settings (TOML), or a previous run's manifest.json.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
        /// proposed, naive_icp, rigid_body, post_hoc_correction,
        /// no_constraints, no_rod_constraints or static_weights.
        #[arg(long)]
        ablation: Option<String>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        max_frames: Option<usize>,
        #[arg(long)]
        quiet: bool,
    },
    /// Compare a trajectory with the dataset's ground truth.
    Evaluate {
        trajectory: PathBuf,
        dataset: PathBuf,
        /// Report file (JSON); defaults to report.json next to the trajectory.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        max_frames: Option<usize>,
        #[arg(long)]
        quiet: bool,
    },
    /// Cable-length and rod-error plots (SVG) with their CSV series.
    Plot {
        trajectory: PathBuf,
        dataset: PathBuf,
        /// Output directory, created if missing.
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        max_frames: Option<usize>,
        #[arg(long)]
        quiet: bool,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            return ExitCode::from(code as u8);
        }
    };
    let result = match cli.command {
        Command::Simulate {
            config,
            out,
            seed,
            max_frames,
            quiet,
        } => simulate(&SimulateArgs {
            config,
            out,
            seed,
            max_frames,
            quiet,
        })
        .map(|_| ()),
        Command::Track {
            dataset,
            config,
            out,
            ablation,
            seed,
            max_frames,
            quiet,
        } => track(&TrackArgs {
            dataset,
            config,
            out,
            ablation,
            seed,
            max_frames,
            quiet,
        })
        .map(|_| ()),
        Command::Evaluate {
            trajectory,
            dataset,
            out,
            max_frames,
            quiet,
        } => evaluate(&EvaluateArgs {
            trajectory,
            dataset,
            out,
            max_frames,
            quiet,
        })
        .map(|_| ()),
        Command::Plot {
            trajectory,
            dataset,
            out,
            max_frames,
            quiet,
        } => plot(&PlotArgs {
            trajectory,
            dataset,
            out,
            max_frames,
            quiet,
        })
        .map(|_| ()),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
