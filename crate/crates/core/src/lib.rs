//! Granularity-based mixed-integer linear programming by relaxation,
//! constraint tightening, regularized saddle-point computation, and a
//! deterministic simulation of block-partitioned asynchronous agents.
//!
//! Pipeline: certify granularity of an instance, build the enlarged relaxed
//! problem with tightened coupling rows, find the unique regularized saddle
//! point (synchronously as ground truth, or under simulated asynchrony),
//! round the integer part, and certify feasibility of the result against
//! the original constraints. The `analysis` module evaluates the
//! quantitative guarantees (violation bound, dual radius, regularization
//! gap, end-to-end suboptimality, convergence envelopes) next to measured
//! behaviour; `gap` generates assignment benchmarks at configurable scale.
//!
//! With the default `parallel` feature, corpus sweeps and samplers use a
//! work-stealing pool; results are identical for any thread count. Solver
//! and simulator kernels are sequential by construction so traces are
//! bitwise reproducible.

pub mod analysis;
pub mod corpus;
pub mod error;
pub mod gap;
pub mod geometry;
pub mod io;
pub mod lagrangian;
pub mod par;
pub mod partition;
pub mod problem;
pub mod sim;
pub mod slater;
pub mod solver;
pub mod sparse;
pub mod svg;

pub use error::{Error, Result};
pub use geometry::{project_box, project_capped_simplex, BoxSet, CappedSimplex};
pub use lagrangian::{eval_l, grad_lambda, grad_z, radius_r, PrimalDualPoint, SaddleProblem};
pub use partition::{derive_essential_neighbors, Adjacency, BlockPartition};
pub use problem::{
    build_relaxation, build_relaxation_with, certify_granularity, check_feasibility_milp,
    compute_omega, compute_xi_e, floor_omega, granularity, round_solution, FeasibilityReport,
    GranularityCertificate, GranularityData, MilpInstance, PhiPolicy, RelaxOptions, RelaxedPoint,
    RelaxedProblem, RoundedPoint,
};
pub use sim::{run, InitPolicy, SimConfig, SimRun, SimTrace, StalenessReport};
pub use slater::{find_slater_point, SlaterOptions, SlaterPoint};
pub use solver::{default_steps, solve, stable_steps, SaddleSolution, SolveSettings};
pub use sparse::SparseMatrix;
