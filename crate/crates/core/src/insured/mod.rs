//! Proportionally insured process with uniform remaining proportions: the
//! fundamental system, the subinterval partition and the recursive solution.

mod cache;
mod fundamental;
mod grid;
mod solver;

pub use cache::{build_solution_cached, cache_key, cache_path, load_solution, save_solution, CACHE_FORMAT};
pub use fundamental::{
    discriminant, fundamental_u, fundamental_v, greens_function, hypergeom_params, wronskian, FundamentalSystem,
    HypergeomTriple, IMAG_RESIDUE_TOL,
};
pub use grid::SubintervalGrid;
pub use solver::{
    build_solution, build_solution_with_rates, evaluate_y, insured_value_unchecked, trapping_prob_insured, IncrementTable, PiecewiseSolution, SolverSettings};
