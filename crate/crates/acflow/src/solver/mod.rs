//! The fully discrete DLN step for the six-field mixed system.
//!
//! Each step solves one monolithic nonlinear system for
//! `(u_{n+1}, w_{n+1}, ξ_{n+1}, p_β, φ_{n+1}, m_β)` plus two scalar
//! multipliers pinning the means of `p_β` and `ξ_{n+1}`. The β-averaged
//! pressure and chemical potential are the natural unknowns of the scheme;
//! the new-level values are recovered afterwards by inverting the
//! β-combination (its leading weight stays near 1/2 over the whole admissible
//! (θ, ε) range, so the recursion is stable).
//!
//! The Newton loop reuses the sparse LU factorization aggressively: the
//! symbolic analysis is done once per mesh, and numeric factorizations are
//! cached per step-size pair and refreshed only when convergence degrades.
//! With mass-dominated Jacobians (small steps) a stale factorization
//! converges in one or two iterations, which is what makes long
//! constant-step runs affordable.

mod init;
mod newton;
mod system;

pub use init::{init_state, init_state_mms, init_state_scenario, InitialData};
pub use newton::{NewtonStats, SolveOutcome};
pub use system::{Layout, StepCtx, StepSystem};

use std::sync::Arc;

use crate::dln::{self, DlnCoeffs};
use crate::fem::{
    assemble_divergence, assemble_mass, assemble_stiffness, integral_vector, CsrMatrix, LinearSolver,
    Spaces,
};
use crate::model::PhysParams;
use crate::{Error, Result};

/// All coefficient vectors of one time level.
#[derive(Clone, Debug)]
pub struct LevelFields {
    pub t: f64,
    pub u: Vec<f64>,
    pub w: Vec<f64>,
    pub xi: Vec<f64>,
    pub p: Vec<f64>,
    pub phi: Vec<f64>,
    pub m: Vec<f64>,
}

impl LevelFields {
    pub fn zeros(spaces: &Spaces, t: f64) -> Self {
        LevelFields {
            t,
            u: vec![0.0; spaces.vel.n_dofs],
            w: vec![0.0; spaces.vel.n_dofs],
            xi: vec![0.0; spaces.pres.n_dofs],
            p: vec![0.0; spaces.pres.n_dofs],
            phi: vec![0.0; spaces.scalar.n_dofs],
            m: vec![0.0; spaces.scalar.n_dofs],
        }
    }
}

/// Two consecutive time levels, the state advanced by the stepper.
#[derive(Clone, Debug)]
pub struct FieldState {
    pub prev: LevelFields,
    pub curr: LevelFields,
}

impl FieldState {
    pub fn k_prev(&self) -> f64 {
        self.curr.t - self.prev.t
    }
}

#[derive(Clone, Copy, Debug)]
pub struct SolverConfig {
    pub newton_tol_abs: f64,
    pub newton_tol_rel: f64,
    pub newton_max_iter: usize,
    pub linear: LinearSolver,
    /// Capacity of the per-(θ, k_n, k_prev) factorization cache; 0 picks a
    /// size-dependent default.
    pub factor_cache: usize,
    /// Evaluate the double-well secant at the two known levels, making the
    /// step linear in the unknowns (diagnostic / oracle mode).
    pub freeze_potential_secant: bool,
    /// Retry a failed step at k/2 down to k_min instead of aborting
    /// (off by default: the published controller never rejects steps).
    pub strict_step_retry: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            newton_tol_abs: 1e-9,
            newton_tol_rel: 1e-10,
            newton_max_iter: 50,
            linear: LinearSolver::Direct,
            factor_cache: 0,
            freeze_potential_secant: false,
            strict_step_retry: false,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if self.newton_tol_abs <= 0.0 || self.newton_tol_rel < 0.0 {
            return Err(Error::invalid("newton tolerances must be positive"));
        }
        if self.newton_max_iter == 0 {
            return Err(Error::invalid("newton_max_iter must be positive"));
        }
        if let LinearSolver::BiCgStab { tol, max_iter } = self.linear {
            if tol <= 0.0 || max_iter == 0 {
                return Err(Error::invalid("iterative solver needs tol > 0 and iterations > 0"));
            }
        }
        Ok(())
    }
}

/// Global operators shared by the stepper, the energy monitor and the
/// indicators. Assembled once per mesh.
pub struct Operators {
    pub mass_vel: CsrMatrix,
    pub stiff_vel: CsrMatrix,
    pub mass_scalar: CsrMatrix,
    pub stiff_scalar: CsrMatrix,
    /// (q, div v) with P1 rows and P2-vector columns.
    pub div: CsrMatrix,
    /// Basis integrals of the P1 space (the multiplier rows).
    pub e_pres: Vec<f64>,
    pub area: f64,
}

impl Operators {
    pub fn new(spaces: &Spaces) -> Self {
        Operators {
            mass_vel: assemble_mass(spaces, &spaces.vel),
            stiff_vel: assemble_stiffness(spaces, &spaces.vel),
            mass_scalar: assemble_mass(spaces, &spaces.scalar),
            stiff_scalar: assemble_stiffness(spaces, &spaces.scalar),
            div: assemble_divergence(spaces, &spaces.vel, &spaces.pres)
                .expect("taylor-hood spaces"),
            e_pres: integral_vector(spaces, &spaces.pres),
            area: spaces.mesh.area(),
        }
    }
}

/// Volumetric forcing and Dirichlet data for one step, filled by the
/// manufactured-solution problem. Scenario runs leave it inactive.
#[derive(Default)]
pub struct ForcingBuffers {
    pub g_u: Vec<[f64; 2]>,
    pub g_phi: Vec<f64>,
    pub bdry_nodes: Vec<usize>,
    pub u_bdry: Vec<[f64; 2]>,
    pub w_bdry: Vec<[f64; 2]>,
}

impl ForcingBuffers {
    pub fn resize(&mut self, n_qp: usize, n_bdry: usize) {
        self.g_u.resize(n_qp, [0.0; 2]);
        self.g_phi.resize(n_qp, 0.0);
        self.bdry_nodes.resize(n_bdry, 0);
        self.u_bdry.resize(n_bdry, [0.0; 2]);
        self.w_bdry.resize(n_bdry, [0.0; 2]);
    }
}

pub trait StepForcing {
    /// Fill the quadrature-point forcing at the one-leg time `t_beta` and the
    /// Dirichlet data at `t_next`.
    fn fill(&self, t_beta: f64, t_next: f64, buf: &mut ForcingBuffers);
    fn has_forcing(&self) -> bool;
}

/// Per-step diagnostics reported alongside the new level.
#[derive(Clone, Copy, Debug, Default)]
pub struct StepStats {
    pub newton_iters: usize,
    pub refactorizations: usize,
    pub residual: f64,
    /// ||B u_{n+1}|| and ||B w_{n+1}||, the discrete divergence defects.
    pub div_u: f64,
    pub div_w: f64,
}

struct CachedFactor {
    key: (u64, u64, u64),
    factor: crate::fem::PatternFactor,
    last_used: u64,
}

/// Owns the assembled system machinery and advances the state.
pub struct Stepper {
    pub spaces: Arc<Spaces>,
    pub ops: Operators,
    pub params: PhysParams,
    pub theta: f64,
    pub cfg: SolverConfig,
    forcing: Option<Box<dyn StepForcing>>,
    system: StepSystem,
    fbuf: ForcingBuffers,
    factors: Vec<CachedFactor>,
    symbolic: Option<faer::sparse::linalg::solvers::SymbolicLu<usize>>,
    clock: u64,
    jac_vals: Vec<f64>,
    /// CSR Jacobian kept for the iterative fallback solver.
    iter_csr: Option<CsrMatrix>,
}

impl Stepper {
    pub fn new(
        spaces: Arc<Spaces>,
        params: PhysParams,
        theta: f64,
        cfg: SolverConfig,
        forcing: Option<Box<dyn StepForcing>>,
    ) -> Result<Self> {
        params.validate()?;
        cfg.validate()?;
        if !(0.0..=1.0).contains(&theta) {
            return Err(Error::invalid(format!("theta = {theta} outside [0, 1]")));
        }
        let ops = Operators::new(&spaces);
        let system = StepSystem::build(&spaces, &ops);
        let n_qp = spaces.mesh.n_triangles() * spaces.tables.nq;
        let mut fbuf = ForcingBuffers::default();
        fbuf.resize(n_qp, system.bdry_scalar_nodes.len());
        // scenario runs: zero Dirichlet on the stepper's own node order
        fbuf.bdry_nodes.copy_from_slice(&system.bdry_scalar_nodes);
        let nnz = system.row_idx.len();
        Ok(Stepper {
            spaces,
            ops,
            params,
            theta,
            cfg,
            forcing,
            system,
            fbuf,
            factors: Vec::new(),
            symbolic: None,
            clock: 0,
            jac_vals: vec![0.0; nnz],
            iter_csr: None,
        })
    }

    pub fn layout(&self) -> &Layout {
        &self.system.layout
    }

    pub fn system(&self) -> &StepSystem {
        &self.system
    }

    pub fn system_mut(&mut self) -> &mut StepSystem {
        &mut self.system
    }

    /// Split borrow for oracle paths that drive the assembler directly.
    pub fn system_and_ops(&mut self) -> (&mut StepSystem, &Operators) {
        (&mut self.system, &self.ops)
    }

    /// An inactive forcing buffer sized for this stepper (zero Dirichlet
    /// data), for driving the system assembler directly in tests/oracles.
    pub fn empty_forcing(&self) -> ForcingBuffers {
        let mut fbuf = ForcingBuffers::default();
        let n_qp = self.spaces.mesh.n_triangles() * self.spaces.tables.nq;
        fbuf.resize(n_qp, self.system.bdry_scalar_nodes.len());
        fbuf.bdry_nodes.copy_from_slice(&self.system.bdry_scalar_nodes);
        fbuf
    }

    fn cache_capacity(&self) -> usize {
        if self.cfg.factor_cache > 0 {
            self.cfg.factor_cache
        } else if self.system.layout.total > 80_000 {
            // a factor at this scale runs to gigabytes
            1
        } else if self.system.layout.total > 40_000 {
            2
        } else {
            4
        }
    }

    /// One DLN step with the configured θ.
    pub fn dln_step(&mut self, state: &FieldState, k_n: f64, k_prev: f64) -> Result<(LevelFields, StepStats)> {
        let coeffs = dln::compute_coeffs(self.theta, k_n, k_prev)?;
        self.step_with_coeffs(state, k_n, coeffs)
    }

    /// First step: the θ = 1 member (implicit midpoint / one-leg
    /// Crank-Nicolson) needs no second back level, so `state` may carry the
    /// initial level twice.
    pub fn cn_bootstrap(&mut self, level0: &LevelFields, k0: f64) -> Result<(LevelFields, StepStats)> {
        let state = FieldState {
            prev: level0.clone(),
            curr: level0.clone(),
        };
        let coeffs = dln::compute_coeffs(1.0, k0, k0)?;
        self.step_with_coeffs(&state, k0, coeffs)
    }

    pub fn step_with_coeffs(
        &mut self,
        state: &FieldState,
        k_n: f64,
        coeffs: DlnCoeffs,
    ) -> Result<(LevelFields, StepStats)> {
        let t_next = state.curr.t + k_n;
        let t_beta = coeffs.beta[2] * t_next + coeffs.beta[1] * state.curr.t
            + coeffs.beta[0] * state.prev.t;

        if let Some(f) = &self.forcing {
            f.fill(t_beta, t_next, &mut self.fbuf);
            debug_assert_eq!(self.fbuf.bdry_nodes, self.system.bdry_scalar_nodes);
        }
        let has_forcing = self.forcing.as_ref().map_or(false, |f| f.has_forcing());

        let x0 = self.system.predictor(state, k_n, &self.fbuf);
        let key = (coeffs.theta.to_bits(), k_n.to_bits(), (state.curr.t - state.prev.t).to_bits());
        let outcome = self.newton_solve(state, &coeffs, x0, key, has_forcing)?;

        let level = self
            .system
            .extract_level(&outcome.x, state, &coeffs, t_next);
        let div_u = norm2(&self.ops.div.matvec(&level.u));
        let div_w = norm2(&self.ops.div.matvec(&level.w));
        let stats = StepStats {
            newton_iters: outcome.stats.iters,
            refactorizations: outcome.stats.refactorizations,
            residual: outcome.stats.residual,
            div_u,
            div_w,
        };
        Ok((level, stats))
    }
}

pub(crate) fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}
