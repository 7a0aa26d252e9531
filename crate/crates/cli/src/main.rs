//! `martin-lab`: command-line front end for `martin-core`.
//!
//! Exit codes: 0 success, 1 domain or precondition error, 2 resource or
//! tolerance error, 64 usage error.

mod free_cmd;
mod kernel_cmd;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};

use output::{CliError, Ctx};

/// Environment variable consulted when `--threads` is absent.
pub const THREADS_ENV: &str = "MARTIN_LAB_THREADS";

#[derive(Parser, Debug)]
#[command(name = "martin-lab", version, about = "Green functions, limit theorems and Martin boundaries of invariant random walks")]
struct Cli {
    #[command(flatten)]
    global: GlobalOpts,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct GlobalOpts {
    /// Seed for every Monte Carlo stream.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads; defaults to the MARTIN_LAB_THREADS variable, then to
    /// the available parallelism.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Artifact path (CSV or JSON); a manifest is written beside it.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Target accuracy for iterative estimates.
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    /// Cell, state or episode budget, depending on the command.
    #[arg(long, global = true)]
    pub budget: Option<u64>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Kernels on Z^d × {1..N}.
    #[command(subcommand)]
    Kernel(kernel_cmd::KernelCmd),
    /// Walks on free products Z^d1 ⋆ Z^d2.
    #[command(subcommand)]
    Free(free_cmd::FreeCmd),
}

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().collect();
    let cli = match Cli::try_parse_from(&args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(64),
            };
        }
    };
    if let Err(e) = init_threads(cli.global.threads) {
        eprintln!("error: {e}");
        return ExitCode::from(e.exit_code());
    }
    let name = match &cli.command {
        Command::Kernel(k) => format!("kernel {}", k.name()),
        Command::Free(f) => format!("free {}", f.name()),
    };
    let mut ctx = Ctx::new(cli.global.clone(), name, args.into_iter().skip(1).collect());
    let outcome = match &cli.command {
        Command::Kernel(k) => kernel_cmd::run(k, &mut ctx),
        Command::Free(f) => free_cmd::run(f, &mut ctx),
    };
    match outcome.and_then(|o| ctx.finish(o)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn init_threads(flag: Option<usize>) -> Result<(), CliError> {
    let n = match flag {
        Some(n) => Some(n),
        None => match std::env::var(THREADS_ENV) {
            Ok(v) => Some(v.trim().parse().map_err(|_| CliError::Usage(format!("{THREADS_ENV}={v} is not a thread count")))?),
            Err(_) => None,
        },
    };
    if let Some(n) = n {
        if n == 0 {
            return Err(CliError::Usage("thread count must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Usage(e.to_string()))?;
    }
    Ok(())
}

/// A comma-separated real vector such as `1.5,-2`.
#[derive(Debug, Clone, PartialEq)]
pub struct Vector(pub Vec<f64>);

pub fn parse_vec(s: &str) -> Result<Vector, String> {
    s.split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|_| format!("`{t}` is not a number")))
        .collect::<Result<_, _>>()
        .map(Vector)
}

/// A comma-separated list of counts such as `256,4096`.
#[derive(Debug, Clone, PartialEq)]
pub struct Counts(pub Vec<usize>);

pub fn parse_counts(s: &str) -> Result<Counts, String> {
    s.split(',')
        .map(|t| t.trim().parse::<usize>().map_err(|_| format!("`{t}` is not a count")))
        .collect::<Result<_, _>>()
        .map(Counts)
}

/// A lattice state `x1,..,xd,k` with a 1-based level `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct Point {
    pub x: Vec<i64>,
    pub level: usize,
}

impl Point {
    pub fn as_ref(&self) -> (&[i64], usize) {
        (&self.x, self.level)
    }
}

pub fn parse_point(s: &str) -> Result<Point, String> {
    let parts: Vec<i64> = s
        .split(',')
        .map(|t| t.trim().parse::<i64>().map_err(|_| format!("`{t}` is not an integer")))
        .collect::<Result<_, _>>()?;
    match parts.split_last() {
        Some((&k, x)) if !x.is_empty() && k >= 1 => Ok(Point { x: x.to_vec(), level: k as usize - 1 }),
        _ => Err(format!("`{s}` is not of the form x1,..,xd,level with level ≥ 1")),
    }
}

/// Words separated by `;`, e.g. `a;b^-1;a b`.
#[derive(Debug, Clone, PartialEq)]
pub struct Words(pub Vec<martin_core::free::FreeWord>);

pub fn parse_words(s: &str) -> Result<Words, String> {
    s.split(';')
        .map(|t| t.parse().map_err(|e: martin_core::Error| e.to_string()))
        .collect::<Result<_, _>>()
        .map(Words)
}

pub fn parse_word(s: &str) -> Result<martin_core::free::FreeWord, String> {
    s.parse().map_err(|e: martin_core::Error| e.to_string())
}
