//! Toolkit for mathematical programs with complementarity constraints (MPCCs).
//!
//! Problems are stated as
//!
//! ```text
//! min f(z)  s.t.  g(z) <= 0,  h(z) = 0,  0 <= G(z) ⊥ H(z) >= 0
//! ```
//!
//! and solved by smoothing the complementarity pairs with
//! `Phi(a, b; eps) = (a + b - sqrt((a - b)^2 + eps^2)) / 2`, either as a
//! shifted equality (with a bounding loop that brackets the optimal value),
//! as a two-sided band, or by the product regularization `G_i H_i <= eps`.
//! Limit points are then audited against the MPCC stationarity hierarchy
//! (weak, A, C, M, S and piecewise-M / B via branch LPs).
//!
//! The crate is `no_std` (with `alloc`). Linear algebra is dense and sized
//! for problems with tens of variables.

#![no_std]

extern crate alloc;

pub mod bounding;
mod float;
pub mod linalg;
pub mod lp;
pub mod model;
pub mod ncp;
pub mod nlp;
pub mod oracle;
pub mod problems;
pub mod reformulate;
pub mod stationarity;

pub use bounding::{run_bounding, run_homotopy, HomotopyOptions, SolveTrace};
pub use model::{MpccMultipliers, MpccProblem, ScalarFn};
pub use nlp::{KktPoint, KktStatus, NlpInstance, SolverOptions};
pub use reformulate::Scheme;
