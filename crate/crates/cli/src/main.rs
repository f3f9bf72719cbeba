use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use cart_cli::commands::{self, KArg};
use cart_cli::scenario::Choice;
use cart_cli::CliError;
use cart_core::par::Execution;

#[derive(Parser)]
#[command(name = "cartsim", version, about = "Tumor / CAR T cell dynamics with backstepping activation control")]
struct Cli {
    /// Seed for the jittered grid used when estimating k (default: regular grid).
    #[arg(long, global = true)]
    seed: Option<u64>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate a scenario and write the trajectory CSV.
    Simulate {
        scenario: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Report equilibria, eigenvalues and stability for the scenario's parameters.
    Equilibria { scenario: PathBuf },
    /// Compute τ, k and ξ for a backstepping gain and check the certificate.
    Design {
        scenario: PathBuf,
        #[arg(long)]
        a: f64,
        #[arg(long, conflicts_with = "estimate_k")]
        k: Option<f64>,
        #[arg(long)]
        estimate_k: bool,
        /// A number or `auto`.
        #[arg(long, default_value = "auto", value_parser = parse_xi)]
        xi: Choice,
    },
    /// Run one scenario per value of a field and write per-cell outcomes.
    Sweep {
        scenario: PathBuf,
        /// Parameter name, `a`, `tau`, `dose`, `initial.x1`.. or `horizon`.
        #[arg(long)]
        vary: String,
        #[arg(long, allow_negative_numbers = true)]
        from: f64,
        #[arg(long, allow_negative_numbers = true)]
        to: f64,
        #[arg(long)]
        steps: usize,
        #[arg(short, long)]
        output: PathBuf,
        /// Run cells on the calling thread.
        #[arg(long)]
        sequential: bool,
    },
    /// Draw a trajectory CSV as an SVG line chart.
    Plot {
        csv: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
        #[arg(long)]
        log: bool,
    },
}

fn parse_xi(s: &str) -> Result<Choice, String> {
    if s == "auto" {
        return Ok(Choice::Auto);
    }
    s.parse()
        .map(Choice::Value)
        .map_err(|_| format!("expected a number or `auto`, got `{s}`"))
}

fn run(cli: Cli) -> Result<(), CliError> {
    let mut out = std::io::stdout().lock();
    match cli.command {
        Command::Simulate { scenario, output } => commands::simulate(&scenario, &output, cli.seed, &mut out),
        Command::Equilibria { scenario } => commands::equilibria(&scenario, &mut out),
        Command::Design {
            scenario,
            a,
            k,
            estimate_k,
            xi,
        } => {
            let k = match (k, estimate_k) {
                (Some(v), _) => KArg::Value(v),
                (None, true) => KArg::Estimate,
                (None, false) => KArg::Scenario,
            };
            commands::design(&scenario, a, k, xi, cli.seed, &mut out)
        }
        Command::Sweep {
            scenario,
            vary,
            from,
            to,
            steps,
            output,
            sequential,
        } => {
            let exec = if sequential {
                Execution::Sequential
            } else {
                Execution::Parallel
            };
            commands::sweep(&scenario, &vary, from, to, steps, &output, exec, &mut out)
        }
        Command::Plot { csv, output, log } => commands::plot(&csv, &output, log),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
