//! Thin CLI over the library pipeline.

use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

use foilopt::driver::{self, RunConfig};

#[derive(Parser)]
#[command(name = "foilopt", about = "2D aerodynamic shape optimization toolkit", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate the mesh and configuration without computing.
    Validate { config: PathBuf },
    /// Steady solve; writes field, surface Cp, and convergence CSVs.
    Solve { config: PathBuf },
    /// Converged solve plus adjoint design gradients of Cd, Cl, A.
    Adjoint { config: PathBuf },
    /// Adjoint gradient vs full nonlinear finite differences.
    GradCheck { config: PathBuf },
    /// Full drag-minimization loop with per-iteration checkpoints.
    Optimize {
        config: PathBuf,
        /// Continue from the last checkpoint in the output directory.
        #[arg(long)]
        resume: bool,
    },
    /// Deformation-only dry run; writes the deformed mesh and a report.
    Deform { config: PathBuf },
}

fn run() -> foilopt::Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Validate { config } => {
            let cfg = RunConfig::parse_file(&config)?;
            let summary = driver::cmd_validate(&cfg)?;
            println!("{summary}");
        }
        Command::Solve { config } => {
            let cfg = RunConfig::parse_file(&config)?;
            let values = driver::cmd_solve(&cfg)?;
            println!(
                "converged: Cd = {:.6e}, Cl = {:.6e}, A = {:.6e}",
                values.cd, values.cl, values.area
            );
            println!("outputs in {}", cfg.output.display());
        }
        Command::Adjoint { config } => {
            let cfg = RunConfig::parse_file(&config)?;
            let path = driver::cmd_adjoint(&cfg)?;
            println!("gradients written to {}", path.display());
        }
        Command::GradCheck { config } => {
            let cfg = RunConfig::parse_file(&config)?;
            let result = driver::cmd_grad_check(&cfg)?;
            for row in &result.rows {
                println!(
                    "i = {:2}  adjoint {:+.8e}  fd {:+.8e}  rel_err {:.3e}",
                    row.i, row.adjoint, row.fd, row.rel_err
                );
            }
            println!("gradient check passed (tol {:.1e})", result.tol);
        }
        Command::Optimize { config, resume } => {
            let cfg = RunConfig::parse_file(&config)?;
            let outcome = driver::cmd_optimize(&cfg, resume)?;
            println!(
                "Cd {:.6e} -> {:.6e} ({:+.1}%), Cl {:.6e} -> {:.6e}, A {:.6e} -> {:.6e}",
                outcome.initial.cd,
                outcome.final_values.cd,
                100.0 * (outcome.final_values.cd - outcome.initial.cd) / outcome.initial.cd,
                outcome.initial.cl,
                outcome.final_values.cl,
                outcome.initial.area,
                outcome.final_values.area,
            );
            println!(
                "{} iterations, stop: {:?}, total implicit steps: {}",
                outcome.iterations, outcome.stop, outcome.total_steps
            );
        }
        Command::Deform { config } => {
            let cfg = RunConfig::parse_file(&config)?;
            let path = driver::cmd_deform(&cfg)?;
            println!("deformed mesh written to {}", path.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
