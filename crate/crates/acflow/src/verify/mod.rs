//! Verification support: manufactured solutions, error norms, convergence
//! studies, and the scenario library.

pub mod convergence;
pub mod jet;
pub mod mms;
pub mod scenarios;

pub use convergence::{
    fit_rate, run_convergence, scalar_error_norm, vector_error_norm, ConvergenceTable, NormKind,
    StudyAxis, StudyConfig, FIELD_NAMES,
};
pub use jet::Jet2;
pub use mms::{MmsProblem, MmsSolution};
pub use scenarios::{scenario_library, Phi0, Scenario, ScenarioKind};
