//! A self-contained sparse linear programming toolkit: problem builder,
//! bounded-variable revised simplex with LU-factorized basis, a presolve
//! for scenario-slack rows, and MPS reading and writing.

pub mod error;
pub mod lu;
pub mod mps;
pub mod presolve;
pub mod problem;
pub mod scale;
pub mod simplex;
pub mod solve;

pub use error::LpError;
pub use problem::{LinearProgram, LpBuilder, RowSense, Sense};
pub use solve::{solve, LpSolution, LpStatus, SolveOptions, WarmStart};
