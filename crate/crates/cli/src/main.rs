//! `mg`: batch solver for Bayesian games and payoff-transformation
//! meta-games described in TOML files, plus sweep and example harnesses for
//! the built-in parameterized families.

use clap::{Args, Parser, Subcommand, ValueEnum};
use metagame::SolveMethod;
use metagame::Strictness;
use metagame_cli::commands::{self, CmdResult, Family};
use metagame_cli::report::Format;
use std::path::PathBuf;

#[derive(Parser)]
#[command(name = "mg", version, about = "Bayesian game and meta-game solver")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    /// Exhaustive support enumeration; finds every equilibrium.
    Enumerate,
    /// Damped best-reply iteration from a seeded random start.
    Br,
    /// Logit homotopy continuation.
    Logit,
}

impl From<MethodArg> for SolveMethod {
    fn from(m: MethodArg) -> SolveMethod {
        match m {
            MethodArg::Enumerate => SolveMethod::Enumerate,
            MethodArg::Br => SolveMethod::BestReply,
            MethodArg::Logit => SolveMethod::Logit,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    /// Aligned tables for reading.
    Human,
    /// Line-delimited JSON records, byte-identical across identical runs.
    Records,
}

#[derive(Args)]
struct OutputOpts {
    #[arg(long, value_enum, default_value_t = FormatArg::Human)]
    format: FormatArg,
    /// Write the report to a file instead of stdout.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SolveOpts {
    #[arg(long, value_enum, default_value_t = MethodArg::Enumerate)]
    method: MethodArg,
    /// Stream seed for the iterative methods' starting profile.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Equilibrium tolerance.
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
}

#[derive(Subcommand)]
enum Command {
    /// Solve a Bayesian game file for its equilibria.
    Solve {
        file: PathBuf,
        #[command(flatten)]
        solve: SolveOpts,
        #[command(flatten)]
        output: OutputOpts,
    },
    /// Solve the meta-game layered over a game file.
    SolveMeta {
        file: PathBuf,
        #[command(flatten)]
        solve: SolveOpts,
        /// Reject analytic uniqueness certificates; demand audited ones.
        #[arg(long)]
        strict_uniqueness: bool,
        #[command(flatten)]
        output: OutputOpts,
    },
    /// Audit every transformation's game for equilibrium uniqueness.
    Audit {
        file: PathBuf,
        /// Equilibrium tolerance.
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
        #[command(flatten)]
        output: OutputOpts,
    },
    /// Run a family of random instances and check its ordering claim.
    Sweep {
        #[arg(value_enum)]
        family: Family,
        /// Number of instances; parallelism follows RAYON_NUM_THREADS.
        #[arg(short = 'n', long = "instances", default_value_t = 30)]
        instances: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
        /// Cyber only: force equal mismatch losses across the two postures.
        #[arg(long)]
        equal_losses: bool,
        #[command(flatten)]
        output: OutputOpts,
    },
    /// Solve one family instance at its default parameters and print the
    /// claim verdict.
    Example {
        #[arg(value_enum)]
        family: Family,
        /// Override a parameter, e.g. --set subsidy=1.5; repeatable.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
        #[command(flatten)]
        output: OutputOpts,
    },
}

fn main() {
    let cli = Cli::parse();
    let (result, output) = match cli.command {
        Command::Solve { file, solve, output } => (
            commands::cmd_solve(&file, solve.method.into(), solve.seed, solve.tol),
            output,
        ),
        Command::SolveMeta { file, solve, strict_uniqueness, output } => {
            let strictness =
                if strict_uniqueness { Strictness::Strict } else { Strictness::Lenient };
            (
                commands::cmd_solve_meta(
                    &file,
                    solve.method.into(),
                    solve.seed,
                    solve.tol,
                    strictness,
                ),
                output,
            )
        }
        Command::Audit { file, tol, output } => (commands::cmd_audit(&file, tol), output),
        Command::Sweep { family, instances, seed, tol, equal_losses, output } => {
            (commands::cmd_sweep(family, instances, seed, tol, equal_losses), output)
        }
        Command::Example { family, set, seed, tol, output } => {
            (commands::cmd_example(family, &set, seed, tol), output)
        }
    };
    let CmdResult { report, exit } = result;
    let format = match output.format {
        FormatArg::Human => Format::Human,
        FormatArg::Records => Format::Records,
    };
    let text = report.render(format);
    match &output.out {
        None => print!("{text}"),
        Some(path) => {
            if let Err(e) = std::fs::write(path, &text) {
                eprintln!("error: {}: {e}", path.display());
                std::process::exit(commands::EXIT_SCHEMA);
            }
        }
    }
    std::process::exit(exit);
}
