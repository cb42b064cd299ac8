use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use critflow::scenario::{CoefficientSpec, ExitStatus};

mod commands;

#[derive(Debug, Parser)]
#[command(name = "critflow", version, about = "Flow-line solver for critical-exponent Dirichlet problems")]
struct Cli {
    /// Seed for the random flow start; overrides the scenario seed.
    #[arg(long, global = true, env = "CRITFLOW_SEED")]
    seed: Option<u64>,
    /// Number of flows run concurrently.
    #[arg(long, global = true, default_value_t = 1)]
    jobs: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Print the scalar thresholds as JSON.
    Constants {
        #[command(flatten)]
        problem: ProblemArgs,
        /// Use this value for L instead of estimating it with the flow.
        #[arg(long)]
        l_est: Option<f64>,
    },
    /// Print the leading Dirichlet eigenvalues as JSON.
    Eigen {
        #[command(flatten)]
        mesh: MeshArgs,
        #[arg(long, default_value_t = 8)]
        count: usize,
    },
    /// Run one flow line and print its summary.
    Flow {
        #[command(flatten)]
        problem: ProblemArgs,
        #[command(flatten)]
        flow: FlowArgs,
        /// eig, bump, or file:<path> with a field dump.
        #[arg(long, default_value = "bump")]
        init: String,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Multi-start flow, constants, extraction and verification.
    Solve {
        #[command(flatten)]
        problem: ProblemArgs,
        #[command(flatten)]
        flow: FlowArgs,
        #[command(flatten)]
        out: OutputArgs,
        /// Write the JSON report here instead of stdout.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Estimate L and compare it with the concentration threshold.
    CheckLions {
        #[command(flatten)]
        problem: ProblemArgs,
        #[command(flatten)]
        flow: FlowArgs,
        #[arg(long)]
        l_est: Option<f64>,
    },
    /// Check a dumped field against the equation and the energy window.
    Verify {
        #[command(flatten)]
        problem: ProblemArgs,
        #[command(flatten)]
        flow: FlowArgs,
        /// Field dump to verify.
        #[arg(long)]
        load: PathBuf,
        #[arg(long)]
        l_est: Option<f64>,
    },
    /// Run a bundled scenario by name, or a scenario JSON file.
    Scenario {
        name: String,
        /// Directory the scenario outputs are written to.
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum DomainKind {
    Ball,
    Box,
}

#[derive(Debug, Clone, Args)]
struct MeshArgs {
    #[arg(long, value_enum, default_value_t = DomainKind::Ball)]
    domain: DomainKind,
    /// Dimension of the ball.
    #[arg(long, default_value_t = 3)]
    n: usize,
    #[arg(long, default_value_t = 1.0)]
    radius: f64,
    /// Box edge lengths, one value or three comma separated.
    #[arg(long, default_value = "1")]
    edges: String,
    /// Radial intervals of a ball, or box intervals per axis (one value or
    /// three). Defaults to 2000 for a ball and 32 for a box.
    #[arg(long)]
    nodes: Option<String>,
}

#[derive(Debug, Clone, Args)]
struct ProblemArgs {
    #[command(flatten)]
    mesh: MeshArgs,
    /// Absolute value of μ.
    #[arg(long, conflicts_with = "mu_fraction")]
    mu: Option<f64>,
    /// μ as a fraction of μ₁ (default 0.5).
    #[arg(long)]
    mu_fraction: Option<f64>,
    /// const:<v>, or example1:<eps0,eta,beta>, example1:<d0,eps0,eta,beta>,
    /// example1:<x,y,z,d0,eps0,eta,beta>.
    #[arg(long = "K", default_value = "const:1")]
    k: CoefficientSpec,
    /// Allow μ = μ₁.
    #[arg(long)]
    first_eigenvalue_branch: bool,
    #[arg(long, default_value_t = 8)]
    eigenpairs: usize,
}

#[derive(Debug, Clone, Args)]
struct FlowArgs {
    /// Convergence tolerance on the quotient gradient.
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    max_iter: Option<usize>,
    /// Turn off the nodewise absolute value.
    #[arg(long)]
    no_positivity: bool,
}

#[derive(Debug, Clone, Args)]
struct OutputArgs {
    /// CSV trace of the flow.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Text dump of the final field.
    #[arg(long)]
    dump: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { ExitStatus::ConfigError.code() as u8 } else { 0 });
        }
    };
    match commands::run(cli) {
        Ok(status) => ExitCode::from(status.code() as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(ExitStatus::for_error(&e).code() as u8)
        }
    }
}
