//! Discrete model energy, the dissipation monitor, and the ND/VD/PD
//! indicators that drive the adaptive step controller.
//!
//! The stored record for a completed step uses the newest level pair: after
//! the step producing level n+1 the energy is the G(θ) pair norm of
//! (u_{n+1}, u_n), plus κ times the pair norm of the phase-field gradients
//! and the integral of F at the θ-combination φ_{n+1,θ}. Consecutive records
//! are exactly the two sides of the dissipation inequality, so the monitor
//! compares neighbors in the record stream.

use crate::dln::{combine_theta, g_norm_pair_sq, DlnCoeffs};
use crate::fem::{Spaces, N_P2};
use crate::model::{double_well, PhysParams};
use crate::solver::{FieldState, LevelFields, Operators};

/// One row of the energy/indicator trace; mirrors the CSV schema.
#[derive(Clone, Copy, Debug)]
pub struct EnergyRecord {
    pub step: usize,
    pub t: f64,
    pub k: f64,
    pub e: f64,
    pub eps_nd_u: f64,
    pub eps_nd_phi: f64,
    pub eps_vd_u: f64,
    pub eps_pd_phi: f64,
    pub chi_u: f64,
    pub chi_phi: f64,
    pub newton_iters: usize,
}

/// Discrete model energy of the pair (curr, prev) at the given θ.
pub fn discrete_energy(
    spaces: &Spaces,
    ops: &Operators,
    params: &PhysParams,
    theta: f64,
    prev: &LevelFields,
    curr: &LevelFields,
) -> f64 {
    let kinetic = g_norm_pair_sq(theta, &ops.mass_vel, &curr.u, &prev.u);
    let grad_phi = g_norm_pair_sq(theta, &ops.stiff_scalar, &curr.phi, &prev.phi);
    let phi_theta = combine_theta(theta, &prev.phi, &curr.phi).expect("equal lengths");
    let well = integrate_double_well(spaces, &phi_theta, params.eta);
    kinetic + params.kappa * (grad_phi + well)
}

/// ∫ F(φ) by the shared quadrature rule (exact for P2 arguments).
pub fn integrate_double_well(spaces: &Spaces, phi: &[f64], eta: f64) -> f64 {
    let tab = &spaces.tables;
    let mut acc = 0.0;
    for t in 0..spaces.mesh.n_triangles() {
        let det = spaces.geom.elems[t].det;
        let ls = spaces.scalar.elem(t);
        for q in 0..tab.nq {
            let mut v = 0.0;
            for a in 0..N_P2 {
                v += phi[ls[a]] * tab.p2_val[q][a];
            }
            acc += tab.qw[q] * det * double_well(v, eta);
        }
    }
    acc
}

/// Dissipation check: pass iff `e_next <= e_curr + tol`. The gap is returned
/// either way so callers can log it.
pub fn check_dissipation(e_next: f64, e_curr: f64, tol: f64) -> (bool, f64) {
    let gap = e_next - e_curr;
    (gap <= tol, gap)
}

/// Indicator set of one completed step over levels (n-1, n, n+1).
#[derive(Clone, Copy, Debug, Default)]
pub struct Indicators {
    pub eps_nd_u: f64,
    pub eps_nd_phi: f64,
    pub eps_vd_u: f64,
    pub eps_pd_phi: f64,
    pub chi_u: f64,
    pub chi_phi: f64,
}

/// Numerical (ND), viscous (VD) and phase (PD) dissipation rates, and their
/// ratios χ. Denominators are floored at `1e-14 * max(1, ND)`: the controller
/// only compares χ against its tolerance, so a floored, huge χ still triggers
/// refinement.
///
/// ND is the G-stability identity's dissipation term, `(1/k̂)‖Σ a_ℓ z‖²`:
/// the energy the step removes beyond the physical dissipation channels. The
/// a-combination annihilates linear-in-time evolution, so resolved smooth
/// dynamics report ND = O(k⁴) and the controller grows the step, while
/// under-resolved transients report ND = O(1) and trigger refinement.
pub fn dissipation_indicators(
    ops: &Operators,
    params: &PhysParams,
    coeffs: &DlnCoeffs,
    state_before: &FieldState,
    new: &LevelFields,
) -> Indicators {
    let ua = crate::dln::combine3(&coeffs.a, &state_before.prev.u, &state_before.curr.u, &new.u)
        .expect("lengths");
    let ub = crate::dln::combine_beta(coeffs, &state_before.prev.u, &state_before.curr.u, &new.u)
        .expect("lengths");
    let pa = crate::dln::combine3(
        &coeffs.a,
        &state_before.prev.phi,
        &state_before.curr.phi,
        &new.phi,
    )
    .expect("lengths");
    let pb = crate::dln::combine_beta(
        coeffs,
        &state_before.prev.phi,
        &state_before.curr.phi,
        &new.phi,
    )
    .expect("lengths");

    let inv_k = 1.0 / coeffs.k_hat;
    let eps_nd_u = inv_k * ops.mass_vel.bilinear(&ua, &ua);
    let eps_nd_phi = inv_k * ops.mass_scalar.bilinear(&pa, &pa);
    let eps_vd_u = params.mu * ops.stiff_vel.bilinear(&ub, &ub);
    let eps_pd_phi = params.kappa * ops.stiff_scalar.bilinear(&pb, &pb);
    let floor = |nd: f64| 1e-14 * nd.max(1.0);
    let chi_u = eps_nd_u / eps_vd_u.max(floor(eps_nd_u));
    let chi_phi = eps_nd_phi / eps_pd_phi.max(floor(eps_nd_phi));
    Indicators {
        eps_nd_u,
        eps_nd_phi,
        eps_vd_u,
        eps_pd_phi,
        chi_u,
        chi_phi,
    }
}

/// Quadrature-level oracle for the indicator norms, kept independent of the
/// assembled matrices (test support).
pub fn indicator_quadrature_oracle(
    spaces: &Spaces,
    params: &PhysParams,
    coeffs: &DlnCoeffs,
    state_before: &FieldState,
    new: &LevelFields,
) -> Indicators {
    let tab = &spaces.tables;
    let ua = crate::dln::combine3(&coeffs.a, &state_before.prev.u, &state_before.curr.u, &new.u)
        .unwrap();
    let ub =
        crate::dln::combine_beta(coeffs, &state_before.prev.u, &state_before.curr.u, &new.u).unwrap();
    let pa = crate::dln::combine3(
        &coeffs.a,
        &state_before.prev.phi,
        &state_before.curr.phi,
        &new.phi,
    )
    .unwrap();
    let pb = crate::dln::combine_beta(
        coeffs,
        &state_before.prev.phi,
        &state_before.curr.phi,
        &new.phi,
    )
    .unwrap();

    let (mut nd_u, mut nd_phi, mut vd_u, mut pd_phi) = (0.0, 0.0, 0.0, 0.0);
    for t in 0..spaces.mesh.n_triangles() {
        let geom = spaces.geom.elems[t];
        let det = geom.det;
        let lv = spaces.vel.elem(t);
        let ls = spaces.scalar.elem(t);
        for q in 0..tab.nq {
            let wq = tab.qw[q] * det;
            let mut uav = [0.0; 2];
            let mut gub = [[0.0; 2]; 2];
            let mut pav = 0.0;
            let mut gpb = [0.0; 2];
            for a in 0..N_P2 {
                let n = tab.p2_val[q][a];
                let g = geom.phys_grad(tab.p2_grad[q][a]);
                pav += pa[ls[a]] * n;
                gpb[0] += pb[ls[a]] * g[0];
                gpb[1] += pb[ls[a]] * g[1];
                for c in 0..2 {
                    uav[c] += ua[lv[2 * a + c]] * n;
                    gub[c][0] += ub[lv[2 * a + c]] * g[0];
                    gub[c][1] += ub[lv[2 * a + c]] * g[1];
                }
            }
            nd_u += wq * (uav[0] * uav[0] + uav[1] * uav[1]);
            nd_phi += wq * pav * pav;
            vd_u += wq
                * (gub[0][0] * gub[0][0]
                    + gub[0][1] * gub[0][1]
                    + gub[1][0] * gub[1][0]
                    + gub[1][1] * gub[1][1]);
            pd_phi += wq * (gpb[0] * gpb[0] + gpb[1] * gpb[1]);
        }
    }
    let inv_k = 1.0 / coeffs.k_hat;
    let eps_nd_u = inv_k * nd_u;
    let eps_nd_phi = inv_k * nd_phi;
    let eps_vd_u = params.mu * vd_u;
    let eps_pd_phi = params.kappa * pd_phi;
    let floor = |nd: f64| 1e-14 * nd.max(1.0);
    Indicators {
        eps_nd_u,
        eps_nd_phi,
        eps_vd_u,
        eps_pd_phi,
        chi_u: eps_nd_u / eps_vd_u.max(floor(eps_nd_u)),
        chi_phi: eps_nd_phi / eps_pd_phi.max(floor(eps_nd_phi)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::build_rectangle_mesh;
    use crate::solver::Operators;
    use std::sync::Arc;

    fn setup(n: usize, lx: f64) -> (Arc<Spaces>, Operators) {
        let spaces = Arc::new(Spaces::new(
            build_rectangle_mesh((0.0, lx), (0.0, lx), n, n).unwrap(),
        ));
        let ops = Operators::new(&spaces);
        (spaces, ops)
    }

    fn level(spaces: &Spaces, u: Vec<f64>, phi: Vec<f64>) -> LevelFields {
        let mut l = LevelFields::zeros(spaces, 0.0);
        l.u = u;
        l.phi = phi;
        l
    }

    #[test]
    fn energy_at_well_minimum_is_zero() {
        let (sp, ops) = setup(4, 1.0);
        let params = PhysParams::default();
        let l = level(&sp, vec![0.0; sp.vel.n_dofs], vec![1.0; sp.scalar.n_dofs]);
        let e = discrete_energy(&sp, &ops, &params, 0.3, &l, &l);
        assert!(e.abs() < 1e-14);
    }

    #[test]
    fn energy_of_zero_phase_on_paper_domain() {
        // u = 0, phi = 0, kappa = 0.01, |D| = 2.25: E = 0.01 * 2.25/4
        let (sp, ops) = setup(6, 1.5);
        let params = PhysParams {
            kappa: 0.01,
            ..Default::default()
        };
        let l = level(&sp, vec![0.0; sp.vel.n_dofs], vec![0.0; sp.scalar.n_dofs]);
        let e = discrete_energy(&sp, &ops, &params, 0.3, &l, &l);
        assert!((e - 5.625e-3).abs() < 1e-15, "E = {e}");
    }

    #[test]
    fn theta_one_collapses_the_pair_norm() {
        let (sp, ops) = setup(3, 1.0);
        let params = PhysParams::default();
        let mut state = 11u64;
        let mut rnd = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1);
            ((state >> 33) as f64) / (u32::MAX as f64) - 0.5
        };
        let curr = level(
            &sp,
            (0..sp.vel.n_dofs).map(|_| rnd()).collect(),
            (0..sp.scalar.n_dofs).map(|_| rnd()).collect(),
        );
        let prev = level(
            &sp,
            (0..sp.vel.n_dofs).map(|_| rnd()).collect(),
            (0..sp.scalar.n_dofs).map(|_| rnd()).collect(),
        );
        let e = discrete_energy(&sp, &ops, &params, 1.0, &prev, &curr);
        let want = 0.5 * ops.mass_vel.bilinear(&curr.u, &curr.u)
            + params.kappa
                * (0.5 * ops.stiff_scalar.bilinear(&curr.phi, &curr.phi)
                    + integrate_double_well(&sp, &curr.phi, params.eta));
        assert!((e - want).abs() < 1e-12 * (1.0 + want.abs()));
    }

    #[test]
    fn kinetic_part_scales_quadratically() {
        let (sp, ops) = setup(3, 1.0);
        let params = PhysParams::default();
        let phi = vec![1.0; sp.scalar.n_dofs]; // well minimum: F-part zero
        let u: Vec<f64> = (0..sp.vel.n_dofs).map(|i| (i as f64 * 0.01).sin()).collect();
        let l1 = level(&sp, u.clone(), phi.clone());
        let e1 = discrete_energy(&sp, &ops, &params, 0.3, &l1, &l1);
        let c = 3.0;
        let l2 = level(&sp, u.iter().map(|x| c * x).collect(), phi);
        let e2 = discrete_energy(&sp, &ops, &params, 0.3, &l2, &l2);
        assert!((e2 - c * c * e1).abs() < 1e-12 * e2.abs());
    }

    #[test]
    fn dissipation_check_semantics() {
        assert_eq!(check_dissipation(1.0, 1.0, 1e-8), (true, 0.0));
        let (ok, gap) = check_dissipation(1.0 + 1e-6, 1.0, 1e-8);
        assert!(!ok && gap > 0.0);
    }

    #[test]
    fn stationary_fields_have_zero_nd() {
        let (sp, ops) = setup(3, 1.0);
        let params = PhysParams::default();
        let coeffs = crate::dln::compute_coeffs(0.3, 0.1, 0.1).unwrap();
        let l = level(
            &sp,
            (0..sp.vel.n_dofs).map(|i| (i % 5) as f64 * 0.1).collect(),
            (0..sp.scalar.n_dofs).map(|i| (i % 3) as f64 * 0.2).collect(),
        );
        let state = FieldState {
            prev: l.clone(),
            curr: l.clone(),
        };
        let ind = dissipation_indicators(&ops, &params, &coeffs, &state, &l);
        // Σα = 0 only up to rounding, so "zero" here means far below any
        // dissipation scale.
        assert!(ind.eps_nd_u.abs() < 1e-28);
        assert!(ind.eps_nd_phi.abs() < 1e-28);
        assert!(ind.chi_u.abs() < 1e-20);
        assert!(ind.chi_phi.abs() < 1e-20);
    }

    #[test]
    fn constant_in_space_velocity_floors_chi() {
        let (sp, ops) = setup(3, 1.0);
        let params = PhysParams::default();
        let coeffs = crate::dln::compute_coeffs(0.3, 0.1, 0.1).unwrap();
        // spatially constant u at each level but changing in time: VD = 0, ND > 0
        let mk = |a: f64| level(&sp, vec![a; sp.vel.n_dofs], vec![0.0; sp.scalar.n_dofs]);
        let state = FieldState {
            prev: mk(0.0),
            curr: mk(0.5),
        };
        let new = mk(1.5);
        let ind = dissipation_indicators(&ops, &params, &coeffs, &state, &new);
        assert!(ind.eps_vd_u.abs() < 1e-12, "VD = {:.2e}", ind.eps_vd_u);
        assert!(ind.chi_u > 1e6, "floored chi must stay huge: {}", ind.chi_u);
    }

    #[test]
    fn indicators_match_quadrature_oracle() {
        let (sp, ops) = setup(4, 1.5);
        let params = PhysParams {
            mu: 0.37,
            kappa: 0.02,
            ..Default::default()
        };
        let coeffs = crate::dln::compute_coeffs(0.3, 0.02, 0.013).unwrap();
        let mut s = 5u64;
        let mut rnd = || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1);
            ((s >> 33) as f64) / (u32::MAX as f64) - 0.5
        };
        let mk = |rnd: &mut dyn FnMut() -> f64| {
            level(
                &sp,
                (0..sp.vel.n_dofs).map(|_| rnd()).collect(),
                (0..sp.scalar.n_dofs).map(|_| rnd()).collect(),
            )
        };
        let state = FieldState {
            prev: mk(&mut rnd),
            curr: mk(&mut rnd),
        };
        let new = mk(&mut rnd);
        let a = dissipation_indicators(&ops, &params, &coeffs, &state, &new);
        let b = indicator_quadrature_oracle(&sp, &params, &coeffs, &state, &new);
        for (x, y) in [
            (a.eps_nd_u, b.eps_nd_u),
            (a.eps_nd_phi, b.eps_nd_phi),
            (a.eps_vd_u, b.eps_vd_u),
            (a.eps_pd_phi, b.eps_pd_phi),
        ] {
            assert!((x - y).abs() <= 1e-12 * x.abs().max(1e-6), "{x} vs {y}");
            assert!(x >= 0.0);
        }
    }
}
