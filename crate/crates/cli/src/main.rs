//! `qpcalc`: batch front end for quivers with potential.
//!
//! Every subcommand prints a text report or, with `--format json`, one JSON document.
//! Exit status is 0 on success, 1 on input errors and 2 on mathematical infeasibility.

mod commands;
mod io;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::io::CliError;

#[derive(Parser, Debug)]
#[command(name = "qpcalc", version, about = "Quivers with potential: mutation, Jacobi algebras, flows, representations and torus algebra")]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Global {
    /// Output format.
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    pub format: Format,
    /// Truncation degree; overrides the degree stored in input potentials.
    #[arg(long, global = true, value_parser = parse_positive)]
    pub trunc: Option<usize>,
    /// Seed for randomized checks.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Tolerance for finite-difference and time-discretization comparisons.
    #[arg(long, global = true, default_value_t = 1e-6)]
    pub tol_fd: f64,
    /// Tolerance for exact-versus-float comparisons.
    #[arg(long, global = true, default_value_t = 1e-9)]
    pub tol_abs: f64,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Json,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum Rule {
    Averaged,
    Earliest,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum Method {
    Order,
    Trees,
    Both,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum Class {
    Y,
    Specialized,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Mutate a quiver with potential at a node.
    Mutate {
        /// Node id.
        #[arg(long)]
        at: String,
        #[arg(long, value_enum, default_value_t = Rule::Averaged)]
        rule: Rule,
        /// Quiver-with-potential file.
        qp: PathBuf,
    },
    /// Split off the trivial part of a potential.
    Reduce {
        #[arg(long, value_enum, default_value_t = Rule::Averaged)]
        rule: Rule,
        qp: PathBuf,
    },
    /// Invert an endomorphism given as `{"quiver": ..., "endo": ...}`.
    Invert {
        #[arg(long, value_enum, default_value_t = Method::Order)]
        method: Method,
        file: PathBuf,
    },
    /// Graded dimensions, finiteness certificate and quasi-homogeneity of the Jacobi algebra.
    Jacobi {
        /// Emit the module of standard paths from this node instead.
        #[arg(long)]
        module: Option<String>,
        qp: PathBuf,
    },
    /// Integrate a derivation field, or run Moser's trick between two potentials.
    Flow {
        /// Derivation family file; needs `--quiver`.
        #[arg(long, conflicts_with = "moser", requires = "quiver")]
        field: Option<PathBuf>,
        #[arg(long)]
        quiver: Option<PathBuf>,
        /// Two potentials `Θ_0`, `Θ_1`; the flow follows `Θ_t = Θ_0 + t·(Θ_1 − Θ_0)`.
        #[arg(long, num_args = 2, value_names = ["QP0", "QP1"])]
        moser: Option<Vec<PathBuf>>,
        #[arg(long, default_value_t = 0.0)]
        from: f64,
        #[arg(long, default_value_t = 1.0)]
        to: f64,
        #[arg(long, default_value_t = 100, value_parser = parse_positive)]
        steps: usize,
    },
    /// Compare the algebraic Chern–Simons gradient with central differences.
    CsCheck {
        /// Module file; without it a random nilpotent representation is drawn.
        #[arg(long, conflicts_with = "dims")]
        module: Option<PathBuf>,
        /// Dimension vector of the random representation, e.g. `1,1,1`.
        #[arg(long, value_delimiter = ',')]
        dims: Option<Vec<usize>>,
        /// Finite-difference step.
        #[arg(long, default_value_t = 1e-5)]
        h: f64,
        qp: PathBuf,
    },
    /// F-series of a module by finite-field point counts.
    Fseries {
        #[arg(long, value_delimiter = ',', default_value = "2,3,5,7")]
        primes: Vec<u64>,
        /// Largest number of candidate subspaces examined per count.
        #[arg(long, default_value_t = qpcalc_core::repmod::DEFAULT_COUNT_BUDGET)]
        budget: u128,
        /// Module file; needs `--quiver`.
        #[arg(long, conflicts_with = "jacobi", requires = "quiver")]
        module: Option<PathBuf>,
        #[arg(long)]
        quiver: Option<PathBuf>,
        /// Quiver-with-potential file; counts the Jacobi module at `--node`.
        #[arg(long, requires = "node")]
        jacobi: Option<PathBuf>,
        #[arg(long)]
        node: Option<String>,
    },
    /// Semiclassical torus computations.
    Torus {
        #[command(subcommand)]
        command: TorusCommand,
    },
    /// Coefficient growth diagnostics of a potential.
    Growth { qp: PathBuf },
    /// Search mutation sequences for surviving 2-cycles.
    Probe {
        #[arg(long, default_value_t = 3)]
        depth: usize,
        #[arg(long, value_enum, default_value_t = Rule::Averaged)]
        rule: Rule,
        qp: PathBuf,
    },
}

#[derive(Subcommand, Debug)]
pub enum TorusCommand {
    /// Cluster variables along a mutation sequence.
    Exchange {
        #[arg(long)]
        quiver: PathBuf,
        /// Node ids.
        #[arg(long, value_delimiter = ',')]
        seq: Vec<String>,
        /// Accepted for uniformity with `cc`; exchange polynomials are computed exactly.
        #[arg(long)]
        deg: Option<usize>,
    },
    /// Character `x^g · Σ_v f(v)·class(v)` of an F-series.
    Cc {
        #[arg(long)]
        quiver: PathBuf,
        /// Exponent vector, e.g. `--g=-1,0`.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        g: Vec<i64>,
        #[arg(long)]
        fseries: PathBuf,
        #[arg(long, value_enum, default_value_t = Class::Y)]
        class: Class,
        /// Bound on the total y-degree.
        #[arg(long, default_value_t = 6)]
        deg: usize,
    },
}

fn parse_positive(s: &str) -> Result<usize, String> {
    match s.parse::<usize>() {
        Ok(n) if n >= 1 => Ok(n),
        _ => Err(format!("{s:?} is not a positive integer")),
    }
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(value) = std::env::var("QPCALC_THREADS") else {
        return Ok(());
    };
    let n: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&n| n >= 1)
        .ok_or_else(|| CliError::input(format!("QPCALC_THREADS={value:?} is not a positive integer")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::input(format!("cannot configure thread pool: {e}")))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let outcome = configure_threads().and_then(|()| commands::run(&cli));
    match outcome {
        Ok(report) => {
            match cli.global.format {
                Format::Text => print!("{}", report.text),
                Format::Json => println!("{}", serde_json::to_string_pretty(&report.json).expect("JSON values serialize")),
            }
            if let Some(reason) = &report.infeasible {
                eprintln!("infeasible: {reason}");
                return ExitCode::from(2);
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code)
        }
    }
}
