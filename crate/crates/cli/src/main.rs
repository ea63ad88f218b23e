use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Parser, Subcommand};

use subdiag_cli::commands;
use subdiag_cli::report::Report;
use subdiag_cli::spec::InstanceSpec;
use subdiag_cli::suites::{run_suites, SuiteConfig, SuiteName};
use subdiag_cli::HarnessError;

#[derive(Parser)]
#[command(
    name = "subdiag",
    version,
    about = "Invariant-subspace decomposition and inner-outer factorization over finite von Neumann algebras"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Decompose the named subspaces of an instance into their type parts.
    Decompose {
        instance: PathBuf,
        /// Subspace name (defaults to every subspace in the instance).
        #[arg(long)]
        subspace: Option<String>,
        #[arg(long)]
        tol: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Inner-outer factorization of the named elements.
    Factorize {
        instance: PathBuf,
        /// Element name (defaults to every element in the instance).
        #[arg(long)]
        element: Option<String>,
        #[arg(long)]
        tol: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Tracial and maximal-subdiagonality diagnostics of the subalgebra.
    CheckSubdiagonal {
        instance: PathBuf,
        #[arg(long)]
        tol: Option<f64>,
        /// Probe budget for the extension-property witness search.
        #[arg(long, default_value_t = 64)]
        trials: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run named property suites over the instance.
    PropertySuite {
        instance: PathBuf,
        /// Comma-separated suite names.
        #[arg(long, value_delimiter = ',', required = true)]
        suite: Vec<String>,
        #[arg(long)]
        trials: Option<usize>,
        /// Comma-separated exponent grid for the norm suites.
        #[arg(long, value_delimiter = ',')]
        p: Option<Vec<f64>>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        tol: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Emit a seeded random instance file.
    Gen {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 3)]
        max_blocks: usize,
        #[arg(long, default_value_t = 5)]
        max_dim: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn load(path: &Path, tol: Option<f64>) -> Result<InstanceSpec, HarnessError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| HarnessError::Invalid(format!("cannot read {}: {e}", path.display())))?;
    let mut spec = InstanceSpec::parse(&text)?;
    if let Some(t) = tol {
        spec.tolerance = t;
    }
    Ok(spec)
}

fn deliver(report: &Report, out: Option<&Path>) -> Result<ExitCode, HarnessError> {
    print!("{}", report.render_text());
    if let Some(path) = out {
        let json = serde_json::to_string_pretty(report)?;
        std::fs::write(path, json)
            .map_err(|e| HarnessError::Invalid(format!("cannot write {}: {e}", path.display())))?;
    }
    Ok(if report.all_passed() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}

fn run() -> Result<ExitCode, HarnessError> {
    let cli = Cli::parse();
    match cli.command {
        Command::Decompose {
            instance,
            subspace,
            tol,
            out,
        } => {
            let spec = load(&instance, tol)?;
            let report = commands::decompose(&spec, subspace.as_deref())?;
            deliver(&report, out.as_deref())
        }
        Command::Factorize {
            instance,
            element,
            tol,
            out,
        } => {
            let spec = load(&instance, tol)?;
            let report = commands::factorize(&spec, element.as_deref())?;
            deliver(&report, out.as_deref())
        }
        Command::CheckSubdiagonal {
            instance,
            tol,
            trials,
            out,
        } => {
            let spec = load(&instance, tol)?;
            let report = commands::check_subdiagonal(&spec, trials)?;
            deliver(&report, out.as_deref())
        }
        Command::PropertySuite {
            instance,
            suite,
            trials,
            p,
            seed,
            tol,
            out,
        } => {
            let spec = load(&instance, tol)?;
            let suites = suite
                .iter()
                .map(|s| SuiteName::from_str(s))
                .collect::<Result<Vec<_>, _>>()?;
            let cfg = SuiteConfig {
                trials,
                p_grid: p,
                seed,
            };
            let report = run_suites(&spec, &suites, &cfg)?;
            deliver(&report, out.as_deref())
        }
        Command::Gen {
            seed,
            max_blocks,
            max_dim,
            out,
        } => {
            let spec = commands::generate(seed, max_blocks, max_dim);
            let text = spec.emit()?;
            match out {
                Some(path) => std::fs::write(&path, &text).map_err(|e| {
                    HarnessError::Invalid(format!("cannot write {}: {e}", path.display()))
                })?,
                None => println!("{text}"),
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_usage() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
