//! Problem generators, Matrix Market I/O, coordinate bisection, the solver
//! factory and the benchmark driver.

mod bench;
mod factory;
mod matrix_market;
mod problems;
mod rcb;

pub use matrix_market::{format_matrix_market, mm_read, mm_write, parse_matrix_market, Coordinate};
pub use problems::{
    gen_convection_diffusion_2d, gen_convection_diffusion_2d_on, gen_poisson_1d,
    gen_poisson_1d_on, gen_poisson_2d, gen_poisson_2d_on, ProblemInstance,
};
pub use rcb::{grid_points, partition_map, rcb_partition};
pub use bench::{
    format_residual, run_benchmark, strip_timings, write_csv, BenchConfig, BenchmarkRow,
    Partition, ProblemSpec, CSV_HEADER, TIMING_COLUMNS,
};
pub use factory::{build_preconditioner, build_solver, SolverStack, PRECONDITIONER_TYPES};
