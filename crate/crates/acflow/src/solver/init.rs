//! Initial data: Stokes/Ritz projections for the manufactured solution,
//! nodal interpolation plus constraint solves for the scenario library.

use super::LevelFields;
use crate::fem::{
    chem_potential_from_phi, div_free_l2_project, ritz_project, solve_aux_w_xi, stokes_project,
    Spaces,
};
use crate::model::PhysParams;
use crate::verify::mms::MmsSolution;
use crate::Result;

/// How level 0 is produced.
pub enum InitialData {
    /// Project the manufactured solution at `t0`.
    Mms { t0: f64 },
    /// Nodal phase field and raw velocity; the velocity is L2-projected onto
    /// the discretely divergence-free subspace, the auxiliary pair and the
    /// chemical potential come from their constraint equations.
    Nodal { phi: Vec<f64>, u_raw: Vec<f64>, t0: f64 },
}

pub fn init_state_mms(spaces: &Spaces, params: &PhysParams, t0: f64) -> Result<LevelFields> {
    let u_ex = |x: f64, y: f64| (MmsSolution::u(x, y, t0), MmsSolution::u_grad(x, y, t0));
    let w_ex = |x: f64, y: f64| (MmsSolution::w(x, y, t0), MmsSolution::w_grad(x, y, t0));
    let p_ex = |x: f64, y: f64| (MmsSolution::p(x, y, t0), MmsSolution::p_grad(x, y, t0));
    let xi_ex = |x: f64, y: f64| (MmsSolution::xi(x, y, t0), MmsSolution::xi_grad(x, y, t0));
    let (u, w, p, xi) = stokes_project(spaces, params.mu, params.gamma, &u_ex, &w_ex, &p_ex, &xi_ex)?;

    let phi_ex = |x: f64, y: f64| (MmsSolution::phi(x, y, t0), MmsSolution::phi_grad(x, y, t0));
    let m_ex = |x: f64, y: f64| (MmsSolution::m(x, y, t0), MmsSolution::m_grad(x, y, t0));
    let phi = ritz_project(spaces, &phi_ex)?;
    let m = ritz_project(spaces, &m_ex)?;

    Ok(LevelFields {
        t: t0,
        u,
        w,
        xi,
        p,
        phi,
        m,
    })
}

pub fn init_state_scenario(
    spaces: &Spaces,
    params: &PhysParams,
    phi: Vec<f64>,
    mut u_raw: Vec<f64>,
    t0: f64,
) -> Result<LevelFields> {
    for &d in &spaces.vel.boundary_dofs {
        u_raw[d] = 0.0;
    }
    let (u, p) = div_free_l2_project(spaces, &u_raw)?;
    let (w, xi) = solve_aux_w_xi(spaces, &u)?;
    let m = chem_potential_from_phi(spaces, &phi, params.kappa, params.eta)?;
    Ok(LevelFields {
        t: t0,
        u,
        w,
        xi,
        p,
        phi,
        m,
    })
}

pub fn init_state(spaces: &Spaces, params: &PhysParams, data: InitialData) -> Result<LevelFields> {
    match data {
        InitialData::Mms { t0 } => init_state_mms(spaces, params, t0),
        InitialData::Nodal { phi, u_raw, t0 } => {
            init_state_scenario(spaces, params, phi, u_raw, t0)
        }
    }
}
