use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use passnet_cli::{
    cmd_certify, cmd_indices, cmd_report, cmd_simulate, load_spec, CliError, RunArtifacts,
    SimOverrides, EXIT_INPUT, EXIT_OK,
};

#[derive(Parser)]
#[command(name = "passnet", version, about = "Passivity certificates and consensus simulation for LTI agent networks")]
struct Cli {
    /// Directory for reports and CSV outputs.
    #[arg(long, global = true, env = "PASSNET_OUT", default_value = "passnet-out")]
    out: PathBuf,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate the IFP index of every agent from its transfer function.
    Indices {
        /// Network spec (JSON).
        spec: PathBuf,
    },
    /// Evaluate the passivity-compensation and consensus certificates.
    Certify {
        /// Network spec (JSON).
        spec: PathBuf,
        /// Certify with estimated instead of declared indices.
        #[arg(long)]
        use_computed_indices: bool,
    },
    /// Simulate the closed-loop network.
    Simulate {
        /// Network spec (JSON).
        spec: PathBuf,
        /// Override the noise seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the horizon in seconds.
        #[arg(long = "t-final")]
        t_final: Option<f64>,
    },
    /// Certify, simulate and write one combined report.
    Report {
        /// Network spec (JSON).
        spec: PathBuf,
        /// Certify with estimated instead of declared indices.
        #[arg(long)]
        use_computed_indices: bool,
        /// Override the noise seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the horizon in seconds.
        #[arg(long = "t-final")]
        t_final: Option<f64>,
    },
}

fn dispatch(command: &Command, out: &Path) -> Result<RunArtifacts, CliError> {
    match command {
        Command::Indices { spec } => cmd_indices(&load_spec(spec)?, out),
        Command::Certify {
            spec,
            use_computed_indices,
        } => cmd_certify(&load_spec(spec)?, *use_computed_indices, out),
        Command::Simulate {
            spec,
            seed,
            t_final,
        } => cmd_simulate(
            &load_spec(spec)?,
            &SimOverrides {
                seed: *seed,
                t_final: *t_final,
            },
            out,
        ),
        Command::Report {
            spec,
            use_computed_indices,
            seed,
            t_final,
        } => cmd_report(
            &load_spec(spec)?,
            *use_computed_indices,
            &SimOverrides {
                seed: *seed,
                t_final: *t_final,
            },
            out,
        ),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            // clap's own usage-error code would collide with "certificate negative"
            return ExitCode::from(if e.use_stderr() { EXIT_INPUT as u8 } else { EXIT_OK as u8 });
        }
    };
    match dispatch(&cli.command, &cli.out) {
        Ok(run) => {
            print!("{}", run.report.render_text());
            for f in &run.files {
                eprintln!("wrote {}", f.display());
            }
            ExitCode::from(run.exit_code as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
