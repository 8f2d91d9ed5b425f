//! Generalized proximal point algorithm (GPPA) for minimizing
//! `f = g1 + g2 - h`, where `g1` is proper lower semicontinuous with a
//! computable prox, `g2` is smooth with an `L`-Lipschitz gradient and `h` is
//! convex.
//!
//! Each iteration picks `y ∈ ∂h(x)` and sets
//!
//! ```text
//! x_next = prox_t^{g1}( x - (∇g2(x) - y) / t ),     t > L
//! ```
//!
//! The crate is split into:
//!
//! * [`model`]: the three oracle traits, [`model::Problem`], objective
//!   evaluation and a power-iteration eigenvalue estimate.
//! * [`prox`]: projections onto balls, halfspaces, boxes, unions and the
//!   parabola region, soft thresholding, and prox adapters.
//! * [`solver`]: the iteration itself with traces and descent checks.
//! * [`gallery`]: trust-region subproblem, set feasibility and small fixtures.
//! * [`diagnostics`]: descent reports, convergence-rate classification and
//!   boundedness monitoring over traces.
//! * [`cli`]: config parsing plus the `solve`, `bench` and `verify` commands.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod cli;
pub mod diagnostics;
pub mod error;
pub mod gallery;
pub mod model;
pub mod prox;
pub mod solver;

pub use error::{GppaError, Result};
pub use model::{ConvexOracle, ExtReal, Point, Problem, ProxOracle, SmoothOracle};
pub use solver::{gppa_step, run_gppa, SolverConfig, Status, Trace};
