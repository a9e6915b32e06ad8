use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use riskcbf_cli::{cmd_check, cmd_plot, cmd_run, parse_dims, threads_from_env, CliError, PlotOptions, RunOptions};

#[derive(Parser)]
#[command(name = "riskcbf", version, about = "Risk-aware CBF controllers under partial observation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate a scenario file.
    Check { config: PathBuf },
    /// Run a Monte Carlo ensemble and write trajectories and metrics.
    Run {
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// proposed_m1, proposed_m2, ignore[_m1|_m2], expected_value[_m1|_m2]
        #[arg(long)]
        controller: Option<String>,
        /// Dotted config key and value, e.g. sim.num_runs=10. Repeatable.
        #[arg(long = "override", value_name = "K=V")]
        overrides: Vec<String>,
    },
    /// Draw a phase portrait of the runs in an output directory.
    Plot {
        dir: PathBuf,
        /// Run index or stream seed.
        #[arg(long)]
        run: Option<u64>,
        /// One-based state components to plot, e.g. 1,2.
        #[arg(long)]
        dims: Option<String>,
        /// SVG path (default DIR/phase_portrait.svg).
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

fn execute(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Check { config } => {
            let cfg = cmd_check(&config)?;
            println!(
                "ok: n={} m={} n_y={}, controller {}",
                cfg.system.n(),
                cfg.system.m(),
                cfg.system.ny(),
                cfg.controller.kind.name()
            );
        }
        Command::Run {
            config,
            out,
            controller,
            overrides,
        } => {
            let opts = RunOptions {
                config,
                out: out.clone(),
                controller,
                overrides,
                threads: threads_from_env()?,
            };
            let summary = cmd_run(&opts)?;
            let m = &summary.metrics;
            println!(
                "{}: {} runs, violation rate {}, mean min h {:.4}, mean terminal norm {:.4} -> {}",
                m.controller,
                m.num_runs,
                m.violation_rate,
                m.mean_min_h,
                m.mean_terminal_norm,
                out.display()
            );
        }
        Command::Plot { dir, run, dims, output } => {
            let dims = dims.as_deref().map(parse_dims).transpose()?;
            let path = cmd_plot(&PlotOptions { dir, run, dims, output })?;
            println!("wrote {}", path.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("riskcbf: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
