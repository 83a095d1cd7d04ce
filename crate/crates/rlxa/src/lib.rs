//! Solvers and certification tools for the hyperbolic relaxation
//!
//! ```text
//!     eps * u_tt + u_t - lap(u) + f(u) = 0        in Omega,
//!     dn(u) + u + u_t = 0                         on Gamma,
//! ```
//!
//! together with its parabolic limit (eps = 0). The crate assembles P1
//! finite element operators on interval and rectangle meshes, time-marches
//! both problems with an energy-exact implicit midpoint / discrete-gradient
//! scheme, instruments the Lyapunov functionals driving the dissipativity
//! and attractor estimates, and certifies the measured trajectories against
//! the expected exponential envelopes and Gronwall-type inequalities.
//!
//! All numerics are generic over the scalar type (`f32`, `f64`) through
//! [`Real`]; concrete aliases such as [`Mesh64`] are provided at the crate
//! root.

pub mod attractor;
pub mod config;
pub mod decomposition;
pub mod evolution;
pub mod functionals;
pub mod linalg;
pub mod mesh;
pub mod nonlin;
pub mod snapshot;
pub mod store;
pub mod verify;

mod scalar;

pub use scalar::Real;

/// Concrete `f64` aliases for the main domain types.
pub type Mesh64 = mesh::Mesh<f64>;
pub type Operators64 = mesh::Operators<f64>;
pub type NonlinearitySpec64 = nonlin::NonlinearitySpec<f64>;
pub type HypState64 = evolution::HypState<f64>;
pub type ParState64 = evolution::ParState<f64>;
pub type FunctionalParams64 = functionals::FunctionalParams<f64>;
pub type ExtState64 = attractor::ExtState<f64>;
pub type Cloud64 = attractor::Cloud<f64>;

/// Concrete `f32` aliases (reduced precision; the default tolerances in
/// the crate assume `f64` and must be relaxed by the caller).
pub type Mesh32 = mesh::Mesh<f32>;
pub type Operators32 = mesh::Operators<f32>;
pub type NonlinearitySpec32 = nonlin::NonlinearitySpec<f32>;

/// Crate-wide error type.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("nonlinear solver failed to converge after {iters} iterations (residual {residual})")]
    NewtonFailure { iters: usize, residual: f64 },
    #[error("eigensolver failed: {0}")]
    EigenFailure(String),
    #[error("config error at line {line}: {msg}")]
    Config { line: usize, msg: String },
    #[error("snapshot format error: {0}")]
    Snapshot(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
