use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use krotov_spectral::cli::{self, ExitStatus};
use krotov_spectral::scenario::{parse_config, parse_config_unchecked};

#[derive(Parser)]
#[command(version, about = "Krotov pulse optimisation with spectral constraints")]
struct Args {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Optimise the pulse described by a scenario file.
    Optimize {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Force the fixed-summation-order mode regardless of the config.
        #[arg(long)]
        deterministic: bool,
    },
    /// Report the minimum of the spectral kernel and the per-band margins.
    CheckKernel {
        #[arg(long)]
        config: PathBuf,
    },
    /// Spectrum of a pulse file.
    Spectrum {
        #[arg(long)]
        pulse: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Populations under a given pulse.
    Propagate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        pulse: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn run(args: Args) -> krotov_spectral::Result<ExitStatus> {
    match args.command {
        Command::Optimize {
            config,
            out,
            deterministic,
        } => {
            let mut cfg = parse_config(&config)?;
            if deterministic {
                cfg.run.deterministic = true;
            }
            let report = cli::run_optimize(&cfg, &out, |r| {
                eprintln!(
                    "iter {:4}  J_T = {:.12}  J_a = {:.3e}  J = {:.12}{}",
                    r.iteration,
                    r.j_t,
                    r.j_a,
                    r.j,
                    if r.monotone { "" } else { "  (non-monotone)" }
                );
            })?;
            let s = &report.summary;
            println!(
                "{} after {} iterations: error {:e}, monotonicity violations {}, refinement passes <= {}, {:.2} s",
                if s.converged { "converged" } else { "stopped at max_iterations" },
                s.iterations,
                s.final_error,
                s.monotonicity_violations,
                s.max_refinement_passes,
                s.wall_time_seconds
            );
            Ok(report.exit_status())
        }
        Command::CheckKernel { config } => {
            let report = cli::run_check_kernel(&parse_config_unchecked(&config)?)?;
            println!("{report}");
            Ok(if report.psd.is_psd {
                ExitStatus::Success
            } else {
                ExitStatus::Failure
            })
        }
        Command::Spectrum { pulse, out } => {
            let s = cli::run_spectrum(&pulse, &out)?;
            println!("wrote {} frequencies to {}", s.len(), out.display());
            Ok(ExitStatus::Success)
        }
        Command::Propagate { config, pulse, out } => {
            let cfg = parse_config(&config)?;
            let r = cli::run_propagate(&cfg, &pulse, &out)?;
            println!("target population {:.12}", r.fidelity);
            for (label, p) in cfg.labels.iter().zip(&r.final_populations) {
                println!("  {label:>6}: {p:.12}");
            }
            Ok(ExitStatus::Success)
        }
    }
}

fn main() -> ExitCode {
    match run(Args::parse()) {
        Ok(status) => ExitCode::from(status.code() as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(ExitStatus::Failure.code() as u8)
        }
    }
}
