//! Small dense conic solver: real scalars and Hermitian PSD blocks with
//! affine, second-order-cone, concave-log and PSD constraints.

mod cones;
pub mod dump;
mod problem;
mod solve;

pub use problem::{AffExpr, ConicProblem, PsdKind, PsdVar, Var};
pub use solve::{solve, ConicSolution, SolveStatus, SolverSettings};
