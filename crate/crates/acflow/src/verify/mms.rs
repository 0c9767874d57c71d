//! The manufactured solution used by the convergence studies, with exact
//! forcing terms.
//!
//! The exact fields live on the unit square. Their spatial parts are
//! evaluated as second-order Taylor jets, so gradients and Laplacians are
//! analytic; time enters through exponential factors only, which lets the
//! forcing be decomposed as a short sum of `c_j(x) exp(r_j t)` terms whose
//! spatial coefficients are cached once per mesh at every quadrature point.
//! The chemical potential is `m = -Δφ + φ³ - φ`, i.e. the κ = η = 1 instance
//! of the constitutive law, which is the regime the convergence protocol
//! runs in.

use std::f64::consts::PI;

use super::jet::Jet2;
use crate::fem::Spaces;
use crate::model::PhysParams;
use crate::solver::{ForcingBuffers, StepForcing};
use crate::{Error, Result};

/// Closed-form exact fields. All methods are pure functions of (x, y, t).
pub struct MmsSolution;

impl MmsSolution {
    /// Spatial part of the velocity; `u = u_hat * exp(2t)`.
    pub fn u_hat(x: f64, y: f64) -> [Jet2; 2] {
        let xj = Jet2::var_x(x);
        let yj = Jet2::var_y(y);
        let u1 = ((xj * (2.0 * PI)).cos() - Jet2::c(1.0)) * (yj * (2.0 * PI)).sin();
        let u2 = -(xj * (2.0 * PI)).sin() * (yj * (2.0 * PI)).cos();
        [u1, u2]
    }

    /// Spatial part of the auxiliary variable; `w = w_hat * exp(2t)`.
    pub fn w_hat(x: f64, y: f64) -> [Jet2; 2] {
        let xj = Jet2::var_x(x);
        let yj = Jet2::var_y(y);
        let pi2 = PI * PI;
        let w1 = -xj * xj * 3.0 + yj * yj * 3.0
            + (yj * (2.0 * PI)).sin() * (xj * (2.0 * PI)).cos() * (8.0 * pi2)
            - (yj * (2.0 * PI)).sin() * (4.0 * pi2);
        let w2 = xj * yj * 6.0 - (xj * (2.0 * PI)).sin() * (yj * (2.0 * PI)).cos() * (8.0 * pi2);
        [w1, w2]
    }

    /// Spatial part of ξ; `xi = xi_hat * exp(2t)`. Harmonic by construction.
    pub fn xi_hat(x: f64, y: f64) -> Jet2 {
        let xj = Jet2::var_x(x);
        let yj = Jet2::var_y(y);
        xj * xj * xj - xj * yj * yj * 3.0
    }

    /// Spatial part of the pressure; `p = p_hat * exp(-t)`.
    pub fn p_hat(x: f64, y: f64) -> Jet2 {
        let xj = Jet2::var_x(x);
        let yj = Jet2::var_y(y);
        (xj * (3.0 * PI * PI)).sin() * (yj * (3.0 * PI * PI)).cos()
    }

    /// Spatial part of the phase field; `phi = phi_hat * exp(-t)`.
    pub fn phi_hat(x: f64, y: f64) -> Jet2 {
        let xj = Jet2::var_x(x);
        let yj = Jet2::var_y(y);
        (xj * (4.0 * PI)).cos() * (yj * (4.0 * PI)).cos()
            + (xj * (3.0 * PI)).cos() * (yj * (3.0 * PI)).cos()
    }

    /// Closed-form Laplacian of `phi_hat`, as a jet so that grad(Δφ) is
    /// available for the chemical-potential gradient.
    pub fn lap_phi_hat(x: f64, y: f64) -> Jet2 {
        let xj = Jet2::var_x(x);
        let yj = Jet2::var_y(y);
        let pi2 = PI * PI;
        -(xj * (4.0 * PI)).cos() * (yj * (4.0 * PI)).cos() * (32.0 * pi2)
            - (xj * (3.0 * PI)).cos() * (yj * (3.0 * PI)).cos() * (18.0 * pi2)
    }

    pub fn u(x: f64, y: f64, t: f64) -> [f64; 2] {
        let h = Self::u_hat(x, y);
        let e = (2.0 * t).exp();
        [h[0].v * e, h[1].v * e]
    }

    /// Velocity gradient, `grad[c][d] = d u_c / d x_d`.
    pub fn u_grad(x: f64, y: f64, t: f64) -> [[f64; 2]; 2] {
        let h = Self::u_hat(x, y);
        let e = (2.0 * t).exp();
        [
            [h[0].dx * e, h[0].dy * e],
            [h[1].dx * e, h[1].dy * e],
        ]
    }

    pub fn w(x: f64, y: f64, t: f64) -> [f64; 2] {
        let h = Self::w_hat(x, y);
        let e = (2.0 * t).exp();
        [h[0].v * e, h[1].v * e]
    }

    pub fn w_grad(x: f64, y: f64, t: f64) -> [[f64; 2]; 2] {
        let h = Self::w_hat(x, y);
        let e = (2.0 * t).exp();
        [
            [h[0].dx * e, h[0].dy * e],
            [h[1].dx * e, h[1].dy * e],
        ]
    }

    pub fn xi(x: f64, y: f64, t: f64) -> f64 {
        Self::xi_hat(x, y).v * (2.0 * t).exp()
    }

    pub fn xi_grad(x: f64, y: f64, t: f64) -> [f64; 2] {
        let h = Self::xi_hat(x, y);
        let e = (2.0 * t).exp();
        [h.dx * e, h.dy * e]
    }

    pub fn p(x: f64, y: f64, t: f64) -> f64 {
        Self::p_hat(x, y).v * (-t).exp()
    }

    pub fn p_grad(x: f64, y: f64, t: f64) -> [f64; 2] {
        let h = Self::p_hat(x, y);
        let e = (-t).exp();
        [h.dx * e, h.dy * e]
    }

    pub fn phi(x: f64, y: f64, t: f64) -> f64 {
        Self::phi_hat(x, y).v * (-t).exp()
    }

    pub fn phi_grad(x: f64, y: f64, t: f64) -> [f64; 2] {
        let h = Self::phi_hat(x, y);
        let e = (-t).exp();
        [h.dx * e, h.dy * e]
    }

    /// Chemical potential `m = -Δφ + φ³ - φ`; not separable in time because
    /// the cubic decays three times as fast as the linear parts.
    pub fn m(x: f64, y: f64, t: f64) -> f64 {
        let (ma, mb) = Self::m_parts(x, y);
        ma.v * (-t).exp() + mb.v * (-3.0 * t).exp()
    }

    pub fn m_grad(x: f64, y: f64, t: f64) -> [f64; 2] {
        let (ma, mb) = Self::m_parts(x, y);
        let e1 = (-t).exp();
        let e3 = (-3.0 * t).exp();
        [ma.dx * e1 + mb.dx * e3, ma.dy * e1 + mb.dy * e3]
    }

    /// `m = m_a exp(-t) + m_b exp(-3t)` with `m_a = -Δφ̂ - φ̂`, `m_b = φ̂³`.
    fn m_parts(x: f64, y: f64) -> (Jet2, Jet2) {
        let phi = Self::phi_hat(x, y);
        let lap = Self::lap_phi_hat(x, y);
        (-lap - phi, phi * phi * phi)
    }
}

/// Per-quadrature-point forcing coefficients for one mesh and parameter set.
///
/// `g_u(x, t) = Σ_j c_j(x) exp(r_j t)` with rates {2, 4, 6, -1, -2, -4} and
/// `g_phi(x, t) = d_{-1} exp(-t) + d_1 exp(t) + d_{-3} exp(-3t)`, derived by
/// substituting the exact fields into the strong momentum and phase
/// equations.
pub struct MmsProblem {
    pub params: PhysParams,
    n_qp: usize,
    // momentum rate coefficients, one [f64; 2] per (elem, qp)
    c2: Vec<[f64; 2]>,
    c4: Vec<[f64; 2]>,
    c6: Vec<[f64; 2]>,
    cm1: Vec<[f64; 2]>,
    cm2: Vec<[f64; 2]>,
    cm4: Vec<[f64; 2]>,
    // phase rate coefficients
    dm1: Vec<f64>,
    d1: Vec<f64>,
    dm3: Vec<f64>,
    // spatial parts of the Dirichlet data at boundary scalar nodes
    bdry_nodes: Vec<usize>,
    u_hat_bdry: Vec<[f64; 2]>,
    w_hat_bdry: Vec<[f64; 2]>,
}

impl MmsProblem {
    pub fn new(spaces: &Spaces, params: PhysParams) -> Result<Self> {
        if (params.kappa - 1.0).abs() > 1e-14 || (params.eta - 1.0).abs() > 1e-14 {
            return Err(Error::invalid(
                "the manufactured solution defines m for kappa = eta = 1",
            ));
        }
        let nt = spaces.mesh.n_triangles();
        let nq = spaces.tables.nq;
        let n = nt * nq;
        let mut c2 = vec![[0.0; 2]; n];
        let mut c4 = vec![[0.0; 2]; n];
        let mut c6 = vec![[0.0; 2]; n];
        let mut cm1 = vec![[0.0; 2]; n];
        let mut cm2 = vec![[0.0; 2]; n];
        let mut cm4 = vec![[0.0; 2]; n];
        let mut dm1 = vec![0.0; n];
        let mut d1 = vec![0.0; n];
        let mut dm3 = vec![0.0; n];
        for t in 0..nt {
            for q in 0..nq {
                let [x, y] = spaces.qp_coords(t, q);
                let idx = t * nq + q;
                let u = MmsSolution::u_hat(x, y);
                let w = MmsSolution::w_hat(x, y);
                let p = MmsSolution::p_hat(x, y);
                let phi = MmsSolution::phi_hat(x, y);
                let lap_phi = MmsSolution::lap_phi_hat(x, y);

                // u_t - mu lap(u) - gamma lap(w) + rho u, all at rate 2
                for c in 0..2 {
                    c2[idx][c] = 2.0 * u[c].v - params.mu * u[c].laplacian()
                        - params.gamma * w[c].laplacian()
                        + params.rho * u[c].v;
                }
                // nu (u . grad) u at rate 4
                for c in 0..2 {
                    c4[idx][c] =
                        params.nu * (u[0].v * u[c].dx + u[1].v * u[c].dy);
                }
                // lambda |u|^2 u at rate 6
                let un2 = u[0].v * u[0].v + u[1].v * u[1].v;
                for c in 0..2 {
                    c6[idx][c] = params.lambda * un2 * u[c].v;
                }
                // grad p at rate -1
                cm1[idx] = [p.dx, p.dy];
                // -m grad(phi): (Δφ̂ + φ̂) ∇φ̂ at rate -2 and -φ̂³ ∇φ̂ at rate -4
                let ma = lap_phi.v + phi.v;
                cm2[idx] = [ma * phi.dx, ma * phi.dy];
                let mb = -phi.v * phi.v * phi.v;
                cm4[idx] = [mb * phi.dx, mb * phi.dy];

                // phase equation: phi_t + u . grad(phi) + sigma m
                dm1[idx] = -phi.v + params.sigma * (-lap_phi.v - phi.v);
                d1[idx] = u[0].v * phi.dx + u[1].v * phi.dy;
                dm3[idx] = params.sigma * phi.v * phi.v * phi.v;
            }
        }

        // boundary scalar nodes (shared by u and w through the vector map)
        let mut bdry_nodes = Vec::new();
        for (s, &[x, y]) in spaces.scalar.node_coords.iter().enumerate() {
            if spaces.vel.is_boundary[2 * s] {
                bdry_nodes.push(s);
                let _ = (x, y);
            }
        }
        let u_hat_bdry = bdry_nodes
            .iter()
            .map(|&s| {
                let [x, y] = spaces.scalar.node_coords[s];
                let u = MmsSolution::u_hat(x, y);
                [u[0].v, u[1].v]
            })
            .collect();
        let w_hat_bdry = bdry_nodes
            .iter()
            .map(|&s| {
                let [x, y] = spaces.scalar.node_coords[s];
                let w = MmsSolution::w_hat(x, y);
                [w[0].v, w[1].v]
            })
            .collect();

        Ok(MmsProblem {
            params,
            n_qp: n,
            c2,
            c4,
            c6,
            cm1,
            cm2,
            cm4,
            dm1,
            d1,
            dm3,
            bdry_nodes,
            u_hat_bdry,
            w_hat_bdry,
        })
    }

    /// Momentum forcing at an arbitrary point (used by tests; the solver goes
    /// through the cached quadrature-point path).
    pub fn forcing_u(&self, x: f64, y: f64, t: f64) -> [f64; 2] {
        let p = &self.params;
        let u = MmsSolution::u_hat(x, y);
        let w = MmsSolution::w_hat(x, y);
        let pj = MmsSolution::p_hat(x, y);
        let phi = MmsSolution::phi_hat(x, y);
        let lap_phi = MmsSolution::lap_phi_hat(x, y);
        let (e2, e4, e6) = ((2.0 * t).exp(), (4.0 * t).exp(), (6.0 * t).exp());
        let (em1, em2, em4) = ((-t).exp(), (-2.0 * t).exp(), (-4.0 * t).exp());
        let un2 = u[0].v * u[0].v + u[1].v * u[1].v;
        let mut g = [0.0; 2];
        for c in 0..2 {
            let adv = u[0].v * u[c].dx + u[1].v * u[c].dy;
            let gphi = if c == 0 { phi.dx } else { phi.dy };
            let gp = if c == 0 { pj.dx } else { pj.dy };
            g[c] = e2
                * (2.0 * u[c].v - p.mu * u[c].laplacian() - p.gamma * w[c].laplacian()
                    + p.rho * u[c].v)
                + e4 * p.nu * adv
                + e6 * p.lambda * un2 * u[c].v
                + em1 * gp
                + em2 * (lap_phi.v + phi.v) * gphi
                - em4 * phi.v * phi.v * phi.v * gphi;
        }
        g
    }

    pub fn forcing_phi(&self, x: f64, y: f64, t: f64) -> f64 {
        let p = &self.params;
        let u = MmsSolution::u_hat(x, y);
        let phi = MmsSolution::phi_hat(x, y);
        let lap_phi = MmsSolution::lap_phi_hat(x, y);
        (-t).exp() * (-phi.v + p.sigma * (-lap_phi.v - phi.v))
            + t.exp() * (u[0].v * phi.dx + u[1].v * phi.dy)
            + (-3.0 * t).exp() * p.sigma * phi.v * phi.v * phi.v
    }
}

impl StepForcing for MmsProblem {
    fn fill(&self, t_beta: f64, t_next: f64, buf: &mut ForcingBuffers) {
        buf.resize(self.n_qp, self.bdry_nodes.len());
        let (e2, e4, e6) = ((2.0 * t_beta).exp(), (4.0 * t_beta).exp(), (6.0 * t_beta).exp());
        let (em1, em2, em4) = (
            (-t_beta).exp(),
            (-2.0 * t_beta).exp(),
            (-4.0 * t_beta).exp(),
        );
        let (e1, em3) = (t_beta.exp(), (-3.0 * t_beta).exp());
        for i in 0..self.n_qp {
            for c in 0..2 {
                buf.g_u[i][c] = e2 * self.c2[i][c]
                    + e4 * self.c4[i][c]
                    + e6 * self.c6[i][c]
                    + em1 * self.cm1[i][c]
                    + em2 * self.cm2[i][c]
                    + em4 * self.cm4[i][c];
            }
            buf.g_phi[i] = em1 * self.dm1[i] + e1 * self.d1[i] + em3 * self.dm3[i];
        }
        let eb = (2.0 * t_next).exp();
        for (k, &s) in self.bdry_nodes.iter().enumerate() {
            buf.bdry_nodes[k] = s;
            buf.u_bdry[k] = [self.u_hat_bdry[k][0] * eb, self.u_hat_bdry[k][1] * eb];
            buf.w_bdry[k] = [self.w_hat_bdry[k][0] * eb, self.w_hat_bdry[k][1] * eb];
        }
    }

    fn has_forcing(&self) -> bool {
        true
    }
}
