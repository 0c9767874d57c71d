//! Mixed finite-element solver for the Allen-Cahn active-fluid system.
//!
//! The incompressible active-fluid momentum equation (with quartic velocity
//! potential and fourth-order dissipation) is coupled to an Allen-Cahn phase
//! field through the chemical potential. The fourth-order term is rewritten
//! with the auxiliary variable `w = -Δu` and a pressure-like multiplier `ξ`,
//! giving a six-field mixed formulation `(u, w, ξ, p, φ, m)` whose discrete
//! velocity *and* auxiliary variable stay divergence-free. Spatial
//! discretization is Taylor-Hood P2/P1 on structured triangulations; time
//! integration is the variable-step DLN one-leg family with a θ parameter,
//! which is G-stable on arbitrary step sequences. A secant form of the
//! double-well derivative makes every step satisfy a discrete
//! energy-dissipation inequality, which the library monitors at runtime and
//! which also drives the minimum-dissipation adaptive step controller.
//!
//! Crate layout mirrors that structure:
//!
//! * [`mesh`] — structured rectangle triangulations and P1/P2 dof maps
//! * [`fem`] — quadrature, reference bases, sparse assembly, projections
//! * [`dln`] — DLN coefficients, weighted averages, G-norm machinery
//! * [`model`] — physical parameters and the double-well potential
//! * [`solver`] — the monolithic nonlinear step, bootstrap, initial data
//! * [`energy`] — discrete energy, dissipation monitor, ND/VD/PD indicators
//! * [`adapt`] — step controller and the adaptive / constant-step drivers
//! * [`verify`] — manufactured solutions, error norms, convergence studies,
//!   and the scenario library (spinodal decomposition, bubble merge/shrink)
//! * [`config`], [`output`], [`driver`] — run configuration, CSV traces,
//!   VTK snapshots, and the orchestration shared by the CLI and examples
//!
//! The `examples/` directory has one runnable example per capability; the
//! `acflow` binary exposes the same runs as `converge`, `run` and `adapt`
//! subcommands.

pub mod adapt;
pub mod config;
pub mod dln;
pub mod driver;
pub mod energy;
pub mod fem;
pub mod mesh;
pub mod model;
pub mod output;
pub mod solver;
pub mod verify;

/// Crate-wide error type.
#[derive(thiserror::Error, Debug)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("nonlinear solve did not converge after {iters} iterations (residual {residual:.3e})")]
    NonConvergence { iters: usize, residual: f64 },
    #[error("linear solve failed: {0}")]
    LinearSolve(String),
    #[error("step failed at t = {t}: {source}")]
    StepFailed {
        t: f64,
        #[source]
        source: Box<Error>,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
