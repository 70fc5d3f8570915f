use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use opinf_schwarz::experiment::{self, SweepAxis};
use opinf_schwarz::{ExperimentConfig, Result};

/// Finite-element and operator-inference models coupled by overlapping Schwarz.
#[derive(Parser, Debug)]
#[command(name = "opinf-schwarz", version)]
struct Cli {
    /// Experiment configuration (flat `key = value` file).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory, overrides the config.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Timing repeats averaged into online_seconds, overrides the config.
    #[arg(long, global = true)]
    repeats: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve the full-domain FE problem and store the snapshot file.
    Monolithic,
    /// One coupled run against the stored snapshots.
    Run,
    /// One coupled run per value of a parameter.
    Sweep {
        /// data, overlap or rank
        #[arg(long)]
        axis: SweepAxis,
        /// Comma-separated list, e.g. 10,20,30
        #[arg(long)]
        values: String,
    },
    /// Grayscale heatmap of one time of a nodal CSV.
    Render {
        /// Snapshot or merged-solution CSV.
        input: PathBuf,
        #[arg(long)]
        time: f64,
    },
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig> {
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::from_file(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(out) = &cli.out {
        cfg.out = out.clone();
    }
    if let Some(repeats) = cli.repeats {
        cfg.repeats = repeats;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn execute(cli: &Cli) -> Result<()> {
    let cfg = load_config(cli)?;
    match &cli.command {
        Command::Monolithic => {
            let out = experiment::cmd_monolithic(&cfg)?;
            println!(
                "wrote {} ({} snapshots, {:.3} s)",
                out.snapshot_path.display(),
                out.snapshots.n_times(),
                out.wall_seconds
            );
        }
        Command::Run => {
            let out = experiment::cmd_run(&cfg)?;
            let s = &out.stats;
            println!(
                "e_avg {:.4e}  e_max {:.4e}  e_proj_avg {:.4e}  avg_sweeps {:.2}  online {:.4} s",
                s.e_avg, s.e_max, s.e_proj_avg, s.avg_sweeps, s.online_seconds
            );
        }
        Command::Sweep { axis, values } => {
            let values = experiment::parse_values(values)?;
            let out = experiment::cmd_sweep(&cfg, *axis, &values)?;
            for (v, row) in &out.rows {
                match row {
                    Ok(s) => println!("{}={v}: e_avg {:.4e}  avg_sweeps {:.2}", axis.name(), s.e_avg, s.avg_sweeps),
                    Err(e) => println!("{}={v}: error: {e}", axis.name()),
                }
            }
            println!("wrote {} and {}", out.sweep_path.display(), out.pareto_path.display());
        }
        Command::Render { input, time } => {
            let path = experiment::cmd_render(&cfg, input, *time)?;
            println!("wrote {}", path.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
