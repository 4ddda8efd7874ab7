use std::io::Write;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::Instant;

use serde::Deserialize;
use serde_json::Value as Json;

use crate::comm::{launch, ranks_from_env, Comm};
use crate::error::{Error, Result};
use crate::krylov::SolveStatus;
use crate::linalg::{Map, MultiVector};
use crate::paramlist::ParameterList;

use super::factory::build_solver;
use super::matrix_market::mm_read;
use super::problems::{gen_convection_diffusion_2d_on, gen_poisson_1d_on, gen_poisson_2d_on, ProblemInstance};
use super::rcb::{grid_points, partition_map, rcb_partition};

/// One problem of a benchmark configuration.
#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProblemSpec {
    Poisson1d {
        n: u64,
    },
    Poisson2d {
        nx: u64,
        ny: u64,
        #[serde(default)]
        partition: Partition,
    },
    ConvectionDiffusion2d {
        nx: u64,
        ny: u64,
        velocity: [f64; 2],
        epsilon: f64,
        #[serde(default)]
        partition: Partition,
    },
    MatrixMarket {
        path: PathBuf,
    },
}

#[derive(Clone, Copy, Debug, Default, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum Partition {
    #[default]
    Contiguous,
    /// Recursive coordinate bisection; needs a power-of-two rank count.
    Rcb,
}

impl ProblemSpec {
    pub fn tag(&self) -> String {
        match self {
            ProblemSpec::Poisson1d { .. } => "poisson1d".into(),
            ProblemSpec::Poisson2d { .. } => "poisson2d".into(),
            ProblemSpec::ConvectionDiffusion2d { .. } => "convdiff2d".into(),
            ProblemSpec::MatrixMarket { path } => path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "matrix".into()),
        }
    }

    pub fn grid(&self) -> String {
        match self {
            ProblemSpec::Poisson1d { n } => n.to_string(),
            ProblemSpec::Poisson2d { nx, ny, .. } | ProblemSpec::ConvectionDiffusion2d { nx, ny, .. } => {
                format!("{nx}x{ny}")
            }
            ProblemSpec::MatrixMarket { .. } => "file".into(),
        }
    }

    /// Build the problem on `comm`. Collective.
    pub fn build(&self, comm: &Comm) -> Result<ProblemInstance> {
        let grid_map = |nx: u64, ny: u64, part: Partition| -> Result<Map> {
            match part {
                Partition::Contiguous => Ok(Map::contiguous(nx * ny, comm)),
                Partition::Rcb => {
                    let parts = rcb_partition(&grid_points(nx, ny), comm.size())?;
                    partition_map(&parts, comm)
                }
            }
        };
        match self {
            ProblemSpec::Poisson1d { n } => gen_poisson_1d_on(*n, &Map::contiguous(*n, comm)),
            ProblemSpec::Poisson2d { nx, ny, partition } => {
                gen_poisson_2d_on(*nx, *ny, &grid_map(*nx, *ny, *partition)?)
            }
            ProblemSpec::ConvectionDiffusion2d {
                nx,
                ny,
                velocity,
                epsilon,
                partition,
            } => gen_convection_diffusion_2d_on(
                *nx,
                *ny,
                (velocity[0], velocity[1]),
                *epsilon,
                &grid_map(*nx, *ny, *partition)?,
            ),
            ProblemSpec::MatrixMarket { path } => {
                let a = mm_read(path, comm)?;
                let ones = MultiVector::constant(a.domain_map(), 1, 1.0);
                let mut b = MultiVector::zeros(a.row_map(), 1);
                a.apply(&ones, &mut b, 1.0, 0.0)?;
                Ok(ProblemInstance {
                    a: Arc::new(a),
                    b,
                    exact: Some(ones),
                    coords: Vec::new(),
                    tag: self.tag(),
                })
            }
        }
    }
}

/// Problems × solver configurations × rank counts.
#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct BenchConfig {
    #[serde(default)]
    pub problems: Vec<ProblemSpec>,
    /// Defaults to `TRELLIS_RANKS`.
    #[serde(default)]
    pub ranks: Vec<usize>,
    /// Each entry holds "solver" and "preconditioner" sublists and an
    /// optional "name".
    #[serde(default)]
    pub solvers: Vec<Json>,
}

impl BenchConfig {
    pub fn from_text(text: &str) -> Result<BenchConfig> {
        let mut cfg: BenchConfig = serde_json::from_str(text)
            .map_err(|e| Error::InvalidArgument(format!("benchmark config: {e}")))?;
        if cfg.ranks.is_empty() {
            cfg.ranks.push(ranks_from_env());
        }
        if cfg.ranks.contains(&0) {
            return Err(Error::InvalidArgument("benchmark config: rank count 0".into()));
        }
        for s in &cfg.solvers {
            if !s.is_object() {
                return Err(Error::InvalidArgument(
                    "benchmark config: each solver entry must be an object".into(),
                ));
            }
        }
        Ok(cfg)
    }

    pub fn from_file(path: &std::path::Path) -> Result<BenchConfig> {
        BenchConfig::from_text(&std::fs::read_to_string(path)?)
    }
}

/// One benchmark result.
#[derive(Clone, Debug, PartialEq)]
pub struct BenchmarkRow {
    pub problem: String,
    pub grid: String,
    pub ranks: usize,
    pub solver: String,
    pub preconditioner: String,
    /// converged, max_iterations, false_convergence, factory_error,
    /// problem_error, solve_error or run_error.
    pub status: String,
    pub iterations: Option<usize>,
    pub residual: Option<f64>,
    pub setup_ms: u128,
    pub solve_ms: u128,
}

pub const CSV_HEADER: [&str; 10] = [
    "problem",
    "grid",
    "ranks",
    "solver",
    "preconditioner",
    "status",
    "iterations",
    "residual",
    "setup_ms",
    "solve_ms",
];

/// Columns excluded from determinism comparisons.
pub const TIMING_COLUMNS: [&str; 2] = ["setup_ms", "solve_ms"];

fn tags(entry: &Json) -> (String, String) {
    let get = |list: &str| {
        entry
            .get(list)
            .and_then(|s| s.get("type"))
            .and_then(|t| t.as_str())
            .map(|t| t.to_ascii_lowercase())
    };
    let solver = get("solver").unwrap_or_else(|| "gmres".into());
    let prec = get("preconditioner").unwrap_or_else(|| "none".into());
    (solver, prec)
}

fn status_name(s: SolveStatus) -> &'static str {
    match s {
        SolveStatus::Converged => "converged",
        SolveStatus::MaxIterations => "max_iterations",
        SolveStatus::FalseConvergence => "false_convergence",
    }
}

struct Outcome {
    status: String,
    iterations: Option<usize>,
    residual: Option<f64>,
    setup_ms: u128,
    solve_ms: u128,
    solver: Option<String>,
}

fn failed(status: &str, err: &Error) -> Outcome {
    log::warn!("{status}: {err}");
    Outcome {
        status: status.into(),
        iterations: None,
        residual: None,
        setup_ms: 0,
        solve_ms: 0,
        solver: None,
    }
}

fn run_one(comm: &Comm, problem: &ProblemSpec, entry: &Json) -> Outcome {
    let params = match ParameterList::from_json(entry) {
        Ok(p) => p,
        Err(e) => return failed("factory_error", &e.into()),
    };
    // the display name is metadata, not a solver parameter
    let _ = params.get_text("name", "");
    let inst = match problem.build(comm) {
        Ok(p) => p,
        Err(e) => return failed("problem_error", &e),
    };
    let t0 = Instant::now();
    let stack = match build_solver(inst.a.clone(), &params) {
        Ok(s) => s,
        Err(e) => return failed("factory_error", &e),
    };
    let setup_ms = t0.elapsed().as_millis();
    let mut x = MultiVector::zeros(inst.a.domain_map(), 1);
    let t1 = Instant::now();
    let rep = match stack.solve(&inst.b, &mut x) {
        Ok(r) => r,
        Err(e) => return failed("solve_error", &e),
    };
    Outcome {
        status: status_name(rep.status).into(),
        iterations: Some(rep.iterations),
        residual: Some(rep.residual),
        setup_ms,
        solve_ms: t1.elapsed().as_millis(),
        solver: Some(stack.solver_tag().into()),
    }
}

/// Run every combination; failures are recorded per row and the run
/// continues. Rows are ordered problem-major, then rank count, then
/// solver entry.
pub fn run_benchmark(cfg: &BenchConfig) -> Vec<BenchmarkRow> {
    let mut rows = Vec::new();
    for problem in &cfg.problems {
        for &p in &cfg.ranks {
            for entry in &cfg.solvers {
                let (solver_tag, prec_tag) = tags(entry);
                let out = launch(p, |c| Ok(run_one(c, problem, entry)))
                    .map(|mut v| v.swap_remove(0))
                    .unwrap_or_else(|e| failed("run_error", &e));
                rows.push(BenchmarkRow {
                    problem: problem.tag(),
                    grid: problem.grid(),
                    ranks: p,
                    solver: out.solver.unwrap_or(solver_tag),
                    preconditioner: prec_tag,
                    status: out.status,
                    iterations: out.iterations,
                    residual: out.residual,
                    setup_ms: out.setup_ms,
                    solve_ms: out.solve_ms,
                });
            }
        }
    }
    rows
}

/// Six significant digits in scientific notation.
pub fn format_residual(r: f64) -> String {
    format!("{r:.5e}")
}

/// Write rows as CSV with the fixed [`CSV_HEADER`] columns.
pub fn write_csv<W: Write>(rows: &[BenchmarkRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| Error::Io(e.to_string());
    w.write_record(CSV_HEADER).map_err(io)?;
    for r in rows {
        w.write_record([
            r.problem.clone(),
            r.grid.clone(),
            r.ranks.to_string(),
            r.solver.clone(),
            r.preconditioner.clone(),
            r.status.clone(),
            r.iterations.map(|i| i.to_string()).unwrap_or_default(),
            r.residual.map(format_residual).unwrap_or_default(),
            r.setup_ms.to_string(),
            r.solve_ms.to_string(),
        ])
        .map_err(io)?;
    }
    w.flush()?;
    Ok(())
}

/// CSV text with the timing columns removed, for determinism checks.
pub fn strip_timings(csv_text: &str) -> Result<String> {
    let mut rd = csv::ReaderBuilder::new()
        .has_headers(false)
        .from_reader(csv_text.as_bytes());
    let mut out = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| Error::Io(e.to_string());
    let mut keep: Vec<usize> = Vec::new();
    for (i, rec) in rd.records().enumerate() {
        let rec = rec.map_err(io)?;
        if i == 0 {
            keep = (0..rec.len())
                .filter(|&j| !TIMING_COLUMNS.contains(&&rec[j]))
                .collect();
        }
        out.write_record(keep.iter().map(|&j| &rec[j])).map_err(io)?;
    }
    String::from_utf8(out.into_inner().map_err(|e| Error::Io(e.to_string()))?)
        .map_err(|e| Error::Io(e.to_string()))
}
