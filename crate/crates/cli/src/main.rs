use std::fs::File;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use trellis::comm::ranks_from_env;
use trellis::harness::{run_benchmark, write_csv, BenchConfig, BenchmarkRow, Partition, ProblemSpec};
use trellis::timeint::{standard_order_study, Stepper};
use trellis::Error;

const EXIT_OK: u8 = 0;
const EXIT_RUNTIME: u8 = 1;
const EXIT_UNCONVERGED: u8 = 2;
const EXIT_CONFIG: u8 = 3;

#[derive(Parser)]
#[command(name = "trellis", version, about = "Sparse solver stack driver")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one linear system and print a result row.
    Solve {
        /// Matrix Market file, or gen:poisson2d:NX,NY / gen:poisson1d:N.
        #[arg(long)]
        matrix: String,
        /// JSON with "solver" and "preconditioner" sublists.
        #[arg(long)]
        config: PathBuf,
        /// Rank count; defaults to TRELLIS_RANKS or 4.
        #[arg(long)]
        ranks: Option<usize>,
        /// Also write the row as CSV here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a benchmark configuration and write a CSV table.
    Bench {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print the observed convergence order of a time stepper.
    Order {
        /// Stepper name, or "all".
        #[arg(long)]
        stepper: String,
    },
}

fn is_config_error(e: &Error) -> bool {
    matches!(
        e,
        Error::Param(_)
            | Error::UnknownType { .. }
            | Error::InvalidArgument(_)
            | Error::MatrixMarket(_)
            | Error::Io(_)
    )
}

fn fail(e: &Error) -> u8 {
    eprintln!("error: {e}");
    if is_config_error(e) {
        EXIT_CONFIG
    } else {
        EXIT_RUNTIME
    }
}

fn parse_matrix(spec: &str) -> Result<ProblemSpec, Error> {
    let Some(rest) = spec.strip_prefix("gen:") else {
        return Ok(ProblemSpec::MatrixMarket { path: spec.into() });
    };
    let bad = || Error::InvalidArgument(format!("cannot parse matrix generator {spec:?}"));
    let (kind, dims) = rest.split_once(':').ok_or_else(bad)?;
    let dims: Vec<u64> = dims
        .split(',')
        .map(|d| d.trim().parse::<u64>().map_err(|_| bad()))
        .collect::<Result<_, _>>()?;
    match (kind, dims.as_slice()) {
        ("poisson2d", &[nx, ny]) if nx >= 2 && ny >= 2 => Ok(ProblemSpec::Poisson2d {
            nx,
            ny,
            partition: Partition::Contiguous,
        }),
        ("poisson1d", &[n]) if n >= 2 => Ok(ProblemSpec::Poisson1d { n }),
        _ => Err(bad()),
    }
}

fn read_json(path: &Path) -> Result<serde_json::Value, Error> {
    let text = std::fs::read_to_string(path)?;
    let v: serde_json::Value = serde_json::from_str(&text)
        .map_err(|e| Error::InvalidArgument(format!("{}: {e}", path.display())))?;
    if !v.is_object() {
        return Err(Error::InvalidArgument(format!(
            "{}: expected a JSON object",
            path.display()
        )));
    }
    Ok(v)
}

fn write_rows(rows: &[BenchmarkRow], path: Option<&Path>) -> Result<(), Error> {
    match path {
        Some(p) => write_csv(rows, File::create(p)?),
        None => write_csv(rows, io::stdout().lock()),
    }
}

fn exit_for(rows: &[BenchmarkRow]) -> u8 {
    let mut code = EXIT_OK;
    for r in rows {
        let c = match r.status.as_str() {
            "converged" => EXIT_OK,
            "factory_error" | "problem_error" => EXIT_CONFIG,
            "run_error" => EXIT_RUNTIME,
            _ => EXIT_UNCONVERGED,
        };
        if c == EXIT_CONFIG || (code != EXIT_CONFIG && c != EXIT_OK) {
            code = c;
        }
    }
    code
}

fn solve(matrix: &str, config: &Path, ranks: Option<usize>, out: Option<&Path>) -> Result<u8, Error> {
    let problem = parse_matrix(matrix)?;
    let entry = read_json(config)?;
    let ranks = ranks.unwrap_or_else(ranks_from_env);
    if ranks == 0 {
        return Err(Error::InvalidArgument("--ranks must be at least 1".into()));
    }
    let cfg = BenchConfig {
        problems: vec![problem],
        ranks: vec![ranks],
        solvers: vec![entry],
    };
    let rows = run_benchmark(&cfg);
    write_rows(&rows, None)?;
    if out.is_some() {
        write_rows(&rows, out)?;
    }
    Ok(exit_for(&rows))
}

fn bench(config: &Path, out: &Path) -> Result<u8, Error> {
    let cfg = BenchConfig::from_file(config)?;
    let rows = run_benchmark(&cfg);
    write_rows(&rows, Some(out))?;
    Ok(exit_for(&rows))
}

fn order(name: &str) -> Result<u8, Error> {
    let steppers = if name.eq_ignore_ascii_case("all") {
        Stepper::NAMES.iter().map(|n| Stepper::by_name(n)).collect::<Result<Vec<_>, _>>()?
    } else {
        vec![Stepper::by_name(name)?]
    };
    let mut out = io::stdout().lock();
    writeln!(out, "{:<18} {:<12} {:>10} {:>14} {:>8}", "stepper", "problem", "h", "error", "order")?;
    for s in &steppers {
        for rep in standard_order_study(s)? {
            for (i, (h, e)) in rep.step_sizes.iter().zip(&rep.errors).enumerate() {
                let local = if i == 0 {
                    "-".to_string()
                } else {
                    let r = (rep.errors[i - 1] / e).ln() / (rep.step_sizes[i - 1] / h).ln();
                    format!("{r:.3}")
                };
                writeln!(out, "{:<18} {:<12} {:>10.5} {:>14.6e} {:>8}", rep.stepper, rep.problem, h, e, local)?;
            }
            writeln!(
                out,
                "{:<18} {:<12} {:>10} {:>14} {:>8.3}",
                rep.stepper, rep.problem, "fit", "", rep.observed_order
            )?;
        }
    }
    Ok(EXIT_OK)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Solve {
            matrix,
            config,
            ranks,
            out,
        } => solve(matrix, config, *ranks, out.as_deref()),
        Command::Bench { config, out } => bench(config, out),
        Command::Order { stepper } => order(stepper),
    };
    ExitCode::from(result.unwrap_or_else(|e| fail(&e)))
}
