//! Residual and Jacobian of the monolithic six-field step system.
//!
//! Unknown layout: `[u | w | ξ | p_β | φ | m_β | λ_p | λ_ξ]` where u, w, φ
//! are the new-level fields, `p_β`, `m_β` the β-averaged pressure and
//! chemical potential the scheme is written in, and the λ's fix the constant
//! modes of `p_β` and `ξ` (anchored locally, stored zero-mean). Dirichlet
//! rows (u, w on the boundary) are replaced by identity rows; their columns
//! stay, which is what carries inhomogeneous boundary data into the interior
//! equations.
//!
//! Linear terms are applied through the cached global operators; the
//! convection, quartic, phase-coupling and secant terms go through one fused
//! element loop. The Jacobian is emitted in a fixed call order, so its
//! sparsity pattern (and the per-entry slot table built from it) is computed
//! once and numeric assemblies just scatter into a value buffer.

use std::sync::Arc;

use super::{ForcingBuffers, LevelFields, Operators, FieldState};
use crate::dln::{combine3_into, DlnCoeffs};
use crate::fem::{Coo, CsrMatrix, Spaces, N_P1, N_P2};
use crate::model::{secant_potential, secant_potential_da, PhysParams};

#[derive(Clone, Copy, Debug)]
pub struct Layout {
    pub nu: usize,
    pub np: usize,
    pub ns: usize,
    pub off_u: usize,
    pub off_w: usize,
    pub off_xi: usize,
    pub off_p: usize,
    pub off_phi: usize,
    pub off_m: usize,
    pub off_lam_p: usize,
    pub off_lam_xi: usize,
    pub total: usize,
}

impl Layout {
    fn new(nu: usize, np: usize, ns: usize) -> Self {
        let off_u = 0;
        let off_w = off_u + nu;
        let off_xi = off_w + nu;
        let off_p = off_xi + np;
        let off_phi = off_p + np;
        let off_m = off_phi + ns;
        let off_lam_p = off_m + ns;
        let off_lam_xi = off_lam_p + 1;
        Layout {
            nu,
            np,
            ns,
            off_u,
            off_w,
            off_xi,
            off_p,
            off_phi,
            off_m,
            off_lam_p,
            off_lam_xi,
            total: off_lam_xi + 1,
        }
    }
}

/// Everything the assembly kernels need for one step.
pub struct StepCtx<'a> {
    pub params: &'a PhysParams,
    pub coeffs: &'a DlnCoeffs,
    pub state: &'a FieldState,
    pub fbuf: &'a ForcingBuffers,
    pub has_forcing: bool,
    pub freeze_secant: bool,
}

struct Scratch {
    u_beta: Vec<f64>,
    u_alpha: Vec<f64>,
    w_beta: Vec<f64>,
    phi_beta: Vec<f64>,
    phi_alpha: Vec<f64>,
    /// θ-combination at the new pair (n+1, n), or the frozen (n, n-1) pair.
    phi_theta_new: Vec<f64>,
    /// θ-combination at the old pair (n, n-1), or frozen (n-1, n-1).
    phi_theta_old: Vec<f64>,
    /// Advecting velocity / quartic magnitude source: equals `u_beta` in the
    /// implicit scheme; in freeze mode the new level is replaced by the
    /// current one so the step is affine.
    u_adv: Vec<f64>,
    /// Coupling-gradient source, same convention.
    phi_src: Vec<f64>,
}

pub struct StepSystem {
    spaces: Arc<Spaces>,
    pub layout: Layout,
    pub col_ptr: Vec<usize>,
    pub row_idx: Vec<usize>,
    prologue_slots: Vec<u32>,
    elem_slots: Vec<u32>,
    /// Scalar P2 nodes on the boundary, ascending; u and w Dirichlet data is
    /// indexed in this order.
    pub bdry_scalar_nodes: Vec<usize>,
    /// Rows replaced by identity (boundary u and w dofs).
    constrained: Vec<bool>,
    e_pres: Vec<f64>,
    area: f64,
    /// The pressure-nullspace border. A dense integral row would double the
    /// LU fill, so the multiplier pins a *local* average (the vertices of
    /// element 0) instead; the solved field is shifted to zero mean
    /// afterwards, which the equations are invariant to. In scenario runs the
    /// multiplier is exactly zero (compatible data), so nothing concentrates
    /// at the anchor element.
    border_dofs: [usize; 3],
    scratch: Scratch,
}

/// Weight of each local-border entry.
const BORDER_W: f64 = 1.0 / 3.0;

impl StepSystem {
    pub fn build(spaces: &Arc<Spaces>, ops: &Operators) -> Self {
        let nu = spaces.vel.n_dofs;
        let np = spaces.pres.n_dofs;
        let ns = spaces.scalar.n_dofs;
        let layout = Layout::new(nu, np, ns);

        let mut constrained = vec![false; layout.total];
        for &d in &spaces.vel.boundary_dofs {
            constrained[layout.off_u + d] = true;
            constrained[layout.off_w + d] = true;
        }
        let bdry_scalar_nodes: Vec<usize> = (0..ns)
            .filter(|&s| spaces.vel.is_boundary[2 * s])
            .collect();

        let border_dofs = {
            let p1 = spaces.pres.elem(0);
            [p1[0], p1[1], p1[2]]
        };
        let mut sys = StepSystem {
            spaces: Arc::clone(spaces),
            layout,
            col_ptr: Vec::new(),
            row_idx: Vec::new(),
            prologue_slots: Vec::new(),
            elem_slots: Vec::new(),
            bdry_scalar_nodes,
            constrained,
            e_pres: ops.e_pres.clone(),
            area: ops.area,
            border_dofs,
            scratch: Scratch {
                u_beta: vec![0.0; nu],
                u_alpha: vec![0.0; nu],
                w_beta: vec![0.0; nu],
                phi_beta: vec![0.0; ns],
                phi_alpha: vec![0.0; ns],
                phi_theta_new: vec![0.0; ns],
                phi_theta_old: vec![0.0; ns],
                u_adv: vec![0.0; nu],
                phi_src: vec![0.0; ns],
            },
        };

        // Pattern pass: emit with a dummy context; only the call sequence
        // matters and it is value-independent.
        let zero_state = FieldState {
            prev: LevelFields::zeros(spaces, 0.0),
            curr: LevelFields::zeros(spaces, 0.0),
        };
        let dummy_coeffs = crate::dln::compute_coeffs(0.3, 1.0, 1.0).unwrap();
        let dummy_params = PhysParams::default();
        let fbuf = ForcingBuffers::default();
        let ctx = StepCtx {
            params: &dummy_params,
            coeffs: &dummy_coeffs,
            state: &zero_state,
            fbuf: &fbuf,
            has_forcing: false,
            freeze_secant: false,
        };
        let x0 = vec![0.0; layout.total];
        let mut pairs: Vec<(u32, u32)> = Vec::new(); // (col, row)
        sys.prepare_combos(&ctx, &x0);
        sys.emit_jacobian(&ctx, &x0, |r, c, _v| {
            pairs.push((c as u32, r as u32));
        });

        // Build the CSC pattern and translate every emission to its slot.
        let mut sorted = pairs.clone();
        sorted.sort_unstable();
        sorted.dedup();
        let n = layout.total;
        let mut col_ptr = vec![0usize; n + 1];
        for &(c, _) in &sorted {
            col_ptr[c as usize + 1] += 1;
        }
        for c in 0..n {
            col_ptr[c + 1] += col_ptr[c];
        }
        let row_idx: Vec<usize> = sorted.iter().map(|&(_, r)| r as usize).collect();

        let slot_of = |c: u32, r: u32| -> u32 {
            let lo = col_ptr[c as usize];
            let hi = col_ptr[c as usize + 1];
            let seg = &row_idx[lo..hi];
            (lo + seg.binary_search(&(r as usize)).unwrap()) as u32
        };
        let all_slots: Vec<u32> = pairs.iter().map(|&(c, r)| slot_of(c, r)).collect();

        // Split the slot list into prologue and element parts by re-counting
        // the prologue emissions (they come first, fixed length).
        let mut prologue_len = 0usize;
        {
            let mut count = |_r: usize, _c: usize, _v: f64| prologue_len += 1;
            sys.emit_prologue(&mut count);
        }
        sys.prologue_slots = all_slots[..prologue_len].to_vec();
        sys.elem_slots = all_slots[prologue_len..].to_vec();
        sys.col_ptr = col_ptr;
        sys.row_idx = row_idx;
        sys
    }

    pub fn nnz(&self) -> usize {
        self.row_idx.len()
    }

    fn prepare_combos(&mut self, ctx: &StepCtx, x: &[f64]) {
        let l = &self.layout;
        let c = ctx.coeffs;
        let s = &mut self.scratch;
        let (up, uc) = (&ctx.state.prev.u, &ctx.state.curr.u);
        let (wp, wc) = (&ctx.state.prev.w, &ctx.state.curr.w);
        let (pp, pc) = (&ctx.state.prev.phi, &ctx.state.curr.phi);
        let xu = &x[l.off_u..l.off_u + l.nu];
        let xw = &x[l.off_w..l.off_w + l.nu];
        let xphi = &x[l.off_phi..l.off_phi + l.ns];
        combine3_into(&c.beta, up, uc, xu, &mut s.u_beta);
        combine3_into(&c.alpha, up, uc, xu, &mut s.u_alpha);
        combine3_into(&c.beta, wp, wc, xw, &mut s.w_beta);
        combine3_into(&c.beta, pp, pc, xphi, &mut s.phi_beta);
        combine3_into(&c.alpha, pp, pc, xphi, &mut s.phi_alpha);
        let th = c.theta;
        let (ct, cp) = (0.5 * (1.0 + th), 0.5 * (1.0 - th));
        if ctx.freeze_secant {
            // Freeze every nonlinear factor at the known levels (the new
            // level replaced by the current one): the step becomes affine and
            // Newton converges in a single solve, which is what the dense
            // linear-algebra oracle checks against.
            for i in 0..l.ns {
                s.phi_theta_new[i] = pc[i];
                s.phi_theta_old[i] = pp[i];
            }
            combine3_into(&c.beta, up, uc, uc, &mut s.u_adv);
            combine3_into(&c.beta, pp, pc, pc, &mut s.phi_src);
        } else {
            for i in 0..l.ns {
                s.phi_theta_new[i] = ct * xphi[i] + cp * pc[i];
                s.phi_theta_old[i] = ct * pc[i] + cp * pp[i];
            }
            s.u_adv.copy_from_slice(&s.u_beta);
            s.phi_src.copy_from_slice(&s.phi_beta);
        }
    }

    /// Extrapolated initial guess with exact Dirichlet values.
    pub fn predictor(&self, state: &FieldState, k_n: f64, fbuf: &ForcingBuffers) -> Vec<f64> {
        let l = &self.layout;
        let mut x = vec![0.0; l.total];
        let k_prev = state.k_prev();
        let r = if k_prev > 0.0 { k_n / k_prev } else { 0.0 };
        for i in 0..l.nu {
            x[l.off_u + i] = state.curr.u[i] + r * (state.curr.u[i] - state.prev.u[i]);
            x[l.off_w + i] = state.curr.w[i] + r * (state.curr.w[i] - state.prev.w[i]);
        }
        for i in 0..l.ns {
            x[l.off_phi + i] = state.curr.phi[i] + r * (state.curr.phi[i] - state.prev.phi[i]);
            x[l.off_m + i] = state.curr.m[i];
        }
        for i in 0..l.np {
            x[l.off_xi + i] = state.curr.xi[i];
            x[l.off_p + i] = state.curr.p[i];
        }
        self.align_anchor(&mut x[l.off_xi..l.off_xi + l.np]);
        self.align_anchor(&mut x[l.off_p..l.off_p + l.np]);
        self.impose_dirichlet(&mut x, fbuf);
        x
    }

    pub fn impose_dirichlet(&self, x: &mut [f64], fbuf: &ForcingBuffers) {
        let l = &self.layout;
        for (k, &s) in self.bdry_scalar_nodes.iter().enumerate() {
            for c in 0..2 {
                x[l.off_u + 2 * s + c] = fbuf.u_bdry[k][c];
                x[l.off_w + 2 * s + c] = fbuf.w_bdry[k][c];
            }
        }
    }

    /// Recover the new level; `p_{n+1}` and `m_{n+1}` come from inverting the
    /// β-average (β₂ ≈ 1/2 over the admissible range, so this is stable).
    /// The pressure-like fields are stored as their zero-mean representatives.
    pub fn extract_level(
        &self,
        x: &[f64],
        state: &FieldState,
        coeffs: &DlnCoeffs,
        t_next: f64,
    ) -> LevelFields {
        let l = &self.layout;
        let b = coeffs.beta;
        let mut level = LevelFields::zeros(&self.spaces, t_next);
        level.u.copy_from_slice(&x[l.off_u..l.off_u + l.nu]);
        level.w.copy_from_slice(&x[l.off_w..l.off_w + l.nu]);
        level.xi.copy_from_slice(&x[l.off_xi..l.off_xi + l.np]);
        level.phi.copy_from_slice(&x[l.off_phi..l.off_phi + l.ns]);
        for i in 0..l.np {
            level.p[i] =
                (x[l.off_p + i] - b[1] * state.curr.p[i] - b[0] * state.prev.p[i]) / b[2];
        }
        for i in 0..l.ns {
            level.m[i] =
                (x[l.off_m + i] - b[1] * state.curr.m[i] - b[0] * state.prev.m[i]) / b[2];
        }
        self.shift_to_zero_mean(&mut level.p);
        self.shift_to_zero_mean(&mut level.xi);
        level
    }

    fn shift_to_zero_mean(&self, q: &mut [f64]) {
        let mean = dot(&self.e_pres, q) / self.area;
        for v in q.iter_mut() {
            *v -= mean;
        }
    }

    /// Subtract the anchor average so a pressure-like predictor starts in the
    /// solution's gauge.
    fn align_anchor(&self, q: &mut [f64]) {
        let avg: f64 = self.border_dofs.iter().map(|&v| BORDER_W * q[v]).sum();
        for v in q.iter_mut() {
            *v -= avg;
        }
    }

    /// The β-averaged unknowns corresponding to a known new level (used to
    /// seed diagnostics and tests).
    pub fn pack_unknowns(&self, level: &LevelFields, state: &FieldState, coeffs: &DlnCoeffs) -> Vec<f64> {
        let l = &self.layout;
        let b = coeffs.beta;
        let mut x = vec![0.0; l.total];
        x[l.off_u..l.off_u + l.nu].copy_from_slice(&level.u);
        x[l.off_w..l.off_w + l.nu].copy_from_slice(&level.w);
        x[l.off_xi..l.off_xi + l.np].copy_from_slice(&level.xi);
        x[l.off_phi..l.off_phi + l.ns].copy_from_slice(&level.phi);
        for i in 0..l.np {
            x[l.off_p + i] = b[2] * level.p[i] + b[1] * state.curr.p[i] + b[0] * state.prev.p[i];
        }
        for i in 0..l.ns {
            x[l.off_m + i] = b[2] * level.m[i] + b[1] * state.curr.m[i] + b[0] * state.prev.m[i];
        }
        x
    }

    /// Full residual at iterate `x`.
    pub fn residual(&mut self, ops: &Operators, ctx: &StepCtx, x: &[f64], out: &mut Vec<f64>) {
        self.prepare_combos(ctx, x);
        let l = self.layout;
        out.clear();
        out.resize(l.total, 0.0);
        let p = ctx.params;
        let c = ctx.coeffs;
        let inv_khat = 1.0 / c.k_hat;

        let xu = &x[l.off_u..l.off_u + l.nu];
        let xw = &x[l.off_w..l.off_w + l.nu];
        let xxi = &x[l.off_xi..l.off_xi + l.np];
        let xp = &x[l.off_p..l.off_p + l.np];
        let xm = &x[l.off_m..l.off_m + l.ns];
        let lam_p = x[l.off_lam_p];
        let lam_xi = x[l.off_lam_xi];

        // --- global sparse part ---
        let s = &self.scratch;
        add_matvec(&ops.mass_vel, &s.u_alpha, inv_khat, &mut out[l.off_u..l.off_u + l.nu]);
        add_matvec(&ops.stiff_vel, &s.u_beta, p.mu, &mut out[l.off_u..l.off_u + l.nu]);
        add_matvec(&ops.stiff_vel, &s.w_beta, p.gamma, &mut out[l.off_u..l.off_u + l.nu]);
        add_matvec(&ops.mass_vel, &s.u_beta, p.rho, &mut out[l.off_u..l.off_u + l.nu]);
        add_matvec_transpose(&ops.div, xp, -1.0, &mut out[l.off_u..l.off_u + l.nu]);

        add_matvec(&ops.mass_vel, xw, 1.0, &mut out[l.off_w..l.off_w + l.nu]);
        add_matvec(&ops.stiff_vel, xu, -1.0, &mut out[l.off_w..l.off_w + l.nu]);
        add_matvec_transpose(&ops.div, xxi, -1.0, &mut out[l.off_w..l.off_w + l.nu]);

        add_matvec(&ops.div, xu, 1.0, &mut out[l.off_p..l.off_p + l.np]);
        add_matvec(&ops.div, xw, 1.0, &mut out[l.off_xi..l.off_xi + l.np]);
        for &v in &self.border_dofs {
            out[l.off_p + v] += lam_p * BORDER_W;
            out[l.off_xi + v] += lam_xi * BORDER_W;
        }

        add_matvec(&ops.mass_scalar, &s.phi_alpha, inv_khat, &mut out[l.off_phi..l.off_phi + l.ns]);
        add_matvec(&ops.mass_scalar, xm, p.sigma, &mut out[l.off_phi..l.off_phi + l.ns]);

        add_matvec(&ops.mass_scalar, xm, 1.0, &mut out[l.off_m..l.off_m + l.ns]);
        add_matvec(&ops.stiff_scalar, &s.phi_beta, -p.kappa, &mut out[l.off_m..l.off_m + l.ns]);

        // --- element loop: convection, quartic, coupling, secant, forcing ---
        let spaces = Arc::clone(&self.spaces);
        let tab = &spaces.tables;
        let nq = tab.nq;
        for t in 0..spaces.mesh.n_triangles() {
            let geom = spaces.geom.elems[t];
            let det = geom.det;
            let lv = spaces.vel.elem(t);
            let ls = spaces.scalar.elem(t);

            let mut r_u = [0.0; 2 * N_P2];
            let mut r_phi = [0.0; N_P2];
            let mut r_m = [0.0; N_P2];

            for q in 0..nq {
                let wq = tab.qw[q] * det;
                let nvals = &tab.p2_val[q];
                let g: [[f64; 2]; N_P2] =
                    std::array::from_fn(|a| geom.phys_grad(tab.p2_grad[q][a]));

                let mut ub = [0.0; 2];
                let mut ubf = [0.0; 2];
                let mut gub = [[0.0; 2]; 2];
                let mut gphib = [0.0; 2];
                let mut gphif = [0.0; 2];
                let mut mv = 0.0;
                let mut tho_new = 0.0;
                let mut tho_old = 0.0;
                for a in 0..N_P2 {
                    let n = nvals[a];
                    let sn = ls[a];
                    gphib[0] += self.scratch.phi_beta[sn] * g[a][0];
                    gphib[1] += self.scratch.phi_beta[sn] * g[a][1];
                    gphif[0] += self.scratch.phi_src[sn] * g[a][0];
                    gphif[1] += self.scratch.phi_src[sn] * g[a][1];
                    mv += xm[sn] * n;
                    tho_new += self.scratch.phi_theta_new[sn] * n;
                    tho_old += self.scratch.phi_theta_old[sn] * n;
                    for cdim in 0..2 {
                        let uv = self.scratch.u_beta[lv[2 * a + cdim]];
                        ub[cdim] += uv * n;
                        ubf[cdim] += self.scratch.u_adv[lv[2 * a + cdim]] * n;
                        gub[cdim][0] += uv * g[a][0];
                        gub[cdim][1] += uv * g[a][1];
                    }
                }

                let un2 = ubf[0] * ubf[0] + ubf[1] * ubf[1];
                // (u_adv . grad) u_beta
                let adv_u = [
                    ubf[0] * gub[0][0] + ubf[1] * gub[0][1],
                    ubf[0] * gub[1][0] + ubf[1] * gub[1][1],
                ];
                let ftil = secant_potential(tho_new, tho_old, p.eta);
                let (gu_f, gphi_f) = if ctx.has_forcing {
                    let idx = t * nq + q;
                    (ctx.fbuf.g_u[idx], ctx.fbuf.g_phi[idx])
                } else {
                    ([0.0; 2], 0.0)
                };
                let adv_phi = ubf[0] * gphib[0] + ubf[1] * gphib[1];

                for a in 0..N_P2 {
                    let n = nvals[a];
                    let ug_a = ubf[0] * g[a][0] + ubf[1] * g[a][1];
                    for cdim in 0..2 {
                        // 1/2 (u.grad u)_c N_a - 1/2 (u.grad N_a) u_c
                        let conv = 0.5 * adv_u[cdim] * n - 0.5 * ug_a * ub[cdim];
                        let cubic = un2 * ub[cdim] * n;
                        let couple = mv * gphif[cdim] * n;
                        r_u[2 * a + cdim] += wq
                            * (p.nu * conv + p.lambda * cubic - couple - gu_f[cdim] * n);
                    }
                    r_phi[a] += wq * (adv_phi - gphi_f) * n;
                    r_m[a] += wq * (-p.kappa * ftil) * n;
                }
            }
            for a in 0..N_P2 {
                for cdim in 0..2 {
                    out[l.off_u + lv[2 * a + cdim]] += r_u[2 * a + cdim];
                }
                out[l.off_phi + ls[a]] += r_phi[a];
                out[l.off_m + ls[a]] += r_m[a];
            }
        }

        // --- nullspace-anchor rows ---
        out[l.off_lam_p] = self.border_dofs.iter().map(|&v| BORDER_W * xp[v]).sum();
        out[l.off_lam_xi] = self.border_dofs.iter().map(|&v| BORDER_W * xxi[v]).sum();

        // --- Dirichlet rows ---
        for (k, &sn) in self.bdry_scalar_nodes.iter().enumerate() {
            for cdim in 0..2 {
                let du = l.off_u + 2 * sn + cdim;
                let dw = l.off_w + 2 * sn + cdim;
                out[du] = x[du] - ctx.fbuf.u_bdry[k][cdim];
                out[dw] = x[dw] - ctx.fbuf.w_bdry[k][cdim];
            }
        }
    }

    /// Numeric Jacobian into the pattern's value buffer.
    pub fn jacobian_values(&mut self, ctx: &StepCtx, x: &[f64], vals: &mut [f64]) {
        debug_assert_eq!(vals.len(), self.row_idx.len());
        self.prepare_combos(ctx, x);
        for v in vals.iter_mut() {
            *v = 0.0;
        }
        // Safety of the slot walk: the emission order is fixed, established
        // by the pattern pass in `build`.
        let prologue = std::mem::take(&mut self.prologue_slots);
        let elems = std::mem::take(&mut self.elem_slots);
        {
            let mut k = 0usize;
            let vals_ptr: &mut [f64] = vals;
            let mut kp = 0usize;
            // split emission: first prologue, then elements, mirroring build()
            self.emit_prologue(&mut |_r, _c, v| {
                vals_ptr[prologue[kp] as usize] += v;
                kp += 1;
            });
            self.emit_elements(ctx, x, &mut |_r, _c, v| {
                vals_ptr[elems[k] as usize] += v;
                k += 1;
            });
            debug_assert_eq!(kp, prologue.len());
            debug_assert_eq!(k, elems.len());
        }
        self.prologue_slots = prologue;
        self.elem_slots = elems;
    }

    /// Jacobian as a CSR matrix (diagnostics and tests).
    pub fn jacobian_csr(&mut self, ctx: &StepCtx, x: &[f64]) -> CsrMatrix {
        self.prepare_combos(ctx, x);
        let mut coo = Coo::new(self.layout.total, self.layout.total);
        self.emit_jacobian(ctx, x, |r, c, v| coo.add(r, c, v));
        coo.to_csr()
    }

    /// Emit prologue then element entries; fixed, value-independent order.
    fn emit_jacobian<F: FnMut(usize, usize, f64)>(&self, ctx: &StepCtx, x: &[f64], mut add: F) {
        self.emit_prologue(&mut add);
        self.emit_elements(ctx, x, &mut add);
    }

    fn emit_prologue<F: FnMut(usize, usize, f64)>(&self, add: &mut F) {
        let l = &self.layout;
        for i in 0..l.total {
            let v = if self.constrained[i] { 1.0 } else { 0.0 };
            add(i, i, v);
        }
        for &v in &self.border_dofs {
            add(l.off_p + v, l.off_lam_p, BORDER_W);
            add(l.off_xi + v, l.off_lam_xi, BORDER_W);
            add(l.off_lam_p, l.off_p + v, BORDER_W);
            add(l.off_lam_xi, l.off_xi + v, BORDER_W);
        }
    }

    fn emit_elements<F: FnMut(usize, usize, f64)>(&self, ctx: &StepCtx, x: &[f64], add: &mut F) {
        let l = self.layout;
        let p = ctx.params;
        let c = ctx.coeffs;
        let a2k = c.alpha[2] / c.k_hat;
        let b2 = c.beta[2];
        let th_new = 0.5 * (1.0 + c.theta);
        let xm = &x[l.off_m..l.off_m + l.ns];

        let spaces = &self.spaces;
        let tab = &spaces.tables;
        let nq = tab.nq;
        let constrained = &self.constrained;

        for t in 0..spaces.mesh.n_triangles() {
            let geom = spaces.geom.elems[t];
            let det = geom.det;
            let lv = spaces.vel.elem(t);
            let ls = spaces.scalar.elem(t);
            let lp = spaces.pres.elem(t);

            // local dense blocks
            let mut j_uu = [[0.0; 2 * N_P2]; 2 * N_P2];
            let mut j_uw_s = [[0.0; N_P2]; N_P2]; // scalar, diagonal components
            let mut j_up = [[0.0; N_P1]; 2 * N_P2];
            let mut j_uphi = [[0.0; N_P2]; 2 * N_P2];
            let mut j_um = [[0.0; N_P2]; 2 * N_P2];
            let mut j_wu_s = [[0.0; N_P2]; N_P2];
            let mut j_ww_s = [[0.0; N_P2]; N_P2];
            let mut j_bu = [[0.0; 2 * N_P2]; N_P1]; // (q, div v): also used for (zeta, div w)
            let mut j_phiphi = [[0.0; N_P2]; N_P2];
            let mut j_phiu = [[0.0; 2 * N_P2]; N_P2];
            let mut j_ss = [[0.0; N_P2]; N_P2]; // scalar mass
            let mut j_mphi = [[0.0; N_P2]; N_P2];

            for q in 0..nq {
                let wq = tab.qw[q] * det;
                let nvals = &tab.p2_val[q];
                let g: [[f64; 2]; N_P2] =
                    std::array::from_fn(|a| geom.phys_grad(tab.p2_grad[q][a]));
                let pv = &tab.p1_val[q];

                let mut ub = [0.0; 2];
                let mut ubf = [0.0; 2];
                let mut gub = [[0.0; 2]; 2];
                let mut gphib = [0.0; 2];
                let mut gphif = [0.0; 2];
                let mut mv = 0.0;
                let mut tho_new = 0.0;
                let mut tho_old = 0.0;
                for a in 0..N_P2 {
                    let n = nvals[a];
                    let sn = ls[a];
                    gphib[0] += self.scratch.phi_beta[sn] * g[a][0];
                    gphib[1] += self.scratch.phi_beta[sn] * g[a][1];
                    gphif[0] += self.scratch.phi_src[sn] * g[a][0];
                    gphif[1] += self.scratch.phi_src[sn] * g[a][1];
                    mv += xm[sn] * n;
                    tho_new += self.scratch.phi_theta_new[sn] * n;
                    tho_old += self.scratch.phi_theta_old[sn] * n;
                    for cdim in 0..2 {
                        let uv = self.scratch.u_beta[lv[2 * a + cdim]];
                        ub[cdim] += uv * n;
                        ubf[cdim] += self.scratch.u_adv[lv[2 * a + cdim]] * n;
                        gub[cdim][0] += uv * g[a][0];
                        gub[cdim][1] += uv * g[a][1];
                    }
                }
                let un2 = ubf[0] * ubf[0] + ubf[1] * ubf[1];
                // frozen factors carry no derivative
                let live = if ctx.freeze_secant { 0.0 } else { 1.0 };
                let dfda = if ctx.freeze_secant {
                    0.0
                } else {
                    secant_potential_da(tho_new, tho_old, p.eta)
                };

                for a in 0..N_P2 {
                    let na = nvals[a];
                    let ga = g[a];
                    let ug_a = ubf[0] * ga[0] + ubf[1] * ga[1];
                    for b in 0..N_P2 {
                        let nb = nvals[b];
                        let gb = g[b];
                        let ug_b = ubf[0] * gb[0] + ubf[1] * gb[1];
                        let mass = na * nb;
                        let stiff = ga[0] * gb[0] + ga[1] * gb[1];

                        // scalar-diagonal parts of (u,u)
                        let diag_uu = a2k * mass
                            + b2 * (p.mu * stiff + p.rho * mass)
                            + b2 * p.nu * 0.5 * (ug_b * na - ug_a * nb)
                            + b2 * p.lambda * un2 * mass;
                        for cdim in 0..2 {
                            for ddim in 0..2 {
                                let mut v = if cdim == ddim { diag_uu } else { 0.0 };
                                // derivatives through the advecting factor
                                v += live
                                    * b2
                                    * (p.nu * 0.5 * (mass * gub[cdim][ddim] - ga[ddim] * ub[cdim] * nb)
                                        + p.lambda * 2.0 * ub[cdim] * ub[ddim] * mass);
                                j_uu[2 * a + cdim][2 * b + ddim] += wq * v;
                            }
                        }
                        j_uw_s[a][b] += wq * b2 * p.gamma * stiff;
                        j_wu_s[a][b] += wq * (-stiff);
                        j_ww_s[a][b] += wq * mass;
                        j_ss[a][b] += wq * mass;
                        j_phiphi[a][b] += wq * (a2k * mass + b2 * ug_b * na);
                        j_mphi[a][b] += wq * (-p.kappa * b2 * stiff - p.kappa * th_new * dfda * mass);
                        for cdim in 0..2 {
                            j_uphi[2 * a + cdim][b] += wq * live * (-b2 * mv * gb[cdim] * na);
                            j_um[2 * a + cdim][b] += wq * (-nb * gphif[cdim] * na);
                            j_phiu[a][2 * b + cdim] += wq * live * (b2 * nb * gphib[cdim] * na);
                        }
                    }
                    for i in 0..N_P1 {
                        for cdim in 0..2 {
                            // -(p, div v) columns and (q, div u) rows
                            j_up[2 * a + cdim][i] += wq * (-pv[i] * ga[cdim]);
                            j_bu[i][2 * a + cdim] += wq * (pv[i] * ga[cdim]);
                        }
                    }
                }
            }

            // scatter, skipping constrained (Dirichlet) rows
            for a in 0..2 * N_P2 {
                let ru = l.off_u + lv[a];
                let rw = l.off_w + lv[a];
                let u_ok = !constrained[ru];
                let w_ok = !constrained[rw];
                for b in 0..2 * N_P2 {
                    if u_ok {
                        add(ru, l.off_u + lv[b], j_uu[a][b]);
                    }
                }
                let (sa, ca) = (a / 2, a % 2);
                for b in 0..N_P2 {
                    for cdim in 0..2 {
                        let col_w = l.off_w + lv[2 * b + cdim];
                        let col_u = l.off_u + lv[2 * b + cdim];
                        if cdim == ca {
                            if u_ok {
                                add(ru, col_w, j_uw_s[sa][b]);
                            }
                            if w_ok {
                                add(rw, col_u, j_wu_s[sa][b]);
                                add(rw, col_w, j_ww_s[sa][b]);
                            }
                        }
                    }
                    if u_ok {
                        add(ru, l.off_phi + ls[b], j_uphi[a][b]);
                        add(ru, l.off_m + ls[b], j_um[a][b]);
                    }
                }
                for i in 0..N_P1 {
                    if u_ok {
                        add(ru, l.off_p + lp[i], j_up[a][i]);
                    }
                    if w_ok {
                        add(rw, l.off_xi + lp[i], j_up[a][i]);
                    }
                }
            }
            for i in 0..N_P1 {
                let rq = l.off_p + lp[i];
                let rz = l.off_xi + lp[i];
                for b in 0..2 * N_P2 {
                    add(rq, l.off_u + lv[b], j_bu[i][b]);
                    add(rz, l.off_w + lv[b], j_bu[i][b]);
                }
            }
            for a in 0..N_P2 {
                let rphi = l.off_phi + ls[a];
                let rm = l.off_m + ls[a];
                for b in 0..N_P2 {
                    add(rphi, l.off_phi + ls[b], j_phiphi[a][b]);
                    add(rphi, l.off_m + ls[b], p.sigma * j_ss[a][b]);
                    add(rm, l.off_m + ls[b], j_ss[a][b]);
                    add(rm, l.off_phi + ls[b], j_mphi[a][b]);
                }
                for b in 0..2 * N_P2 {
                    add(rphi, l.off_u + lv[b], j_phiu[a][b]);
                }
            }
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn add_matvec(m: &CsrMatrix, x: &[f64], scale: f64, out: &mut [f64]) {
    debug_assert_eq!(m.nrows, out.len());
    for r in 0..m.nrows {
        let mut acc = 0.0;
        for k in m.row_ptr[r]..m.row_ptr[r + 1] {
            acc += m.vals[k] * x[m.col_idx[k]];
        }
        out[r] += scale * acc;
    }
}

fn add_matvec_transpose(m: &CsrMatrix, x: &[f64], scale: f64, out: &mut [f64]) {
    debug_assert_eq!(m.ncols, out.len());
    for r in 0..m.nrows {
        let xr = scale * x[r];
        if xr != 0.0 {
            for k in m.row_ptr[r]..m.row_ptr[r + 1] {
                out[m.col_idx[k]] += m.vals[k] * xr;
            }
        }
    }
}
