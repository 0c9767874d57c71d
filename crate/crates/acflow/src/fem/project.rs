//! Ritz and Stokes-type projections, plus the discrete divergence-free L2
//! projection used for random initial velocities.
//!
//! All projections are one-shot bordered sparse solves. Pressure-like
//! unknowns are pinned to zero mean with a single Lagrange multiplier
//! row/column instead of pinning a node, which would distort local errors.

use super::assemble::eval_p2_scalar;
use super::basis::N_P2;
use super::linsolve::DirectFactor;
use super::sparse::Coo;
use super::Spaces;
use crate::Result;

/// Scalar field with gradient, supplied analytically.
pub trait ScalarField2 {
    fn eval(&self, x: f64, y: f64) -> (f64, [f64; 2]);
}

impl<F: Fn(f64, f64) -> (f64, [f64; 2])> ScalarField2 for F {
    fn eval(&self, x: f64, y: f64) -> (f64, [f64; 2]) {
        self(x, y)
    }
}

/// Vector field with Jacobian, supplied analytically. `grad[c][d]` is
/// d v_c / d x_d.
pub trait VectorField2 {
    fn eval(&self, x: f64, y: f64) -> ([f64; 2], [[f64; 2]; 2]);
}

impl<F: Fn(f64, f64) -> ([f64; 2], [[f64; 2]; 2])> VectorField2 for F {
    fn eval(&self, x: f64, y: f64) -> ([f64; 2], [[f64; 2]; 2]) {
        self(x, y)
    }
}

/// Ritz projection onto the P2 scalar space:
/// (grad(Rφ), grad χ) = (grad φ, grad χ) for all χ, with ∫Rφ = ∫φ.
pub fn ritz_project(spaces: &Spaces, field: &impl ScalarField2) -> Result<Vec<f64>> {
    let ns = spaces.scalar.n_dofs;
    let n = ns + 1;
    let mut coo = Coo::new(n, n);
    let mut rhs = vec![0.0; n];
    let tab = &spaces.tables;

    // stiffness + basis-integral border
    let k = super::assemble::assemble_stiffness(spaces, &spaces.scalar);
    for r in 0..ns {
        for idx in k.row_ptr[r]..k.row_ptr[r + 1] {
            coo.add(r, k.col_idx[idx], k.vals[idx]);
        }
    }
    let e = super::assemble::integral_vector(spaces, &spaces.scalar);
    for i in 0..ns {
        coo.add(i, ns, e[i]);
        coo.add(ns, i, e[i]);
    }
    coo.add(ns, ns, 0.0);

    for t in 0..spaces.mesh.n_triangles() {
        let geom = spaces.geom.elems[t];
        let det = geom.det;
        let ls = spaces.scalar.elem(t);
        for q in 0..tab.nq {
            let wq = tab.qw[q] * det;
            let [x, y] = spaces.qp_coords(t, q);
            let (val, grad) = field.eval(x, y);
            for a in 0..N_P2 {
                let ga = geom.phys_grad(tab.p2_grad[q][a]);
                rhs[ls[a]] += wq * (grad[0] * ga[0] + grad[1] * ga[1]);
            }
            rhs[ns] += wq * val;
        }
    }

    let a = coo.to_csr();
    let f = DirectFactor::new(&a)?;
    let mut sol = f.solve(&rhs);
    sol.truncate(ns);
    Ok(sol)
}

/// Stokes-type projection of (u, w, p, ξ): the coupled system enforcing the
/// discrete divergence-free constraints on both projected velocities.
/// Boundary values of u and w are interpolated from the exact fields; p and ξ
/// are stored with zero mean.
pub fn stokes_project(
    spaces: &Spaces,
    mu: f64,
    gamma: f64,
    u_ex: &impl VectorField2,
    w_ex: &impl VectorField2,
    p_ex: &impl ScalarField2,
    xi_ex: &impl ScalarField2,
) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>)> {
    let nu = spaces.vel.n_dofs;
    let np = spaces.pres.n_dofs;
    let off_u = 0;
    let off_w = nu;
    let off_p = 2 * nu;
    let off_xi = 2 * nu + np;
    let off_lp = 2 * nu + 2 * np;
    let off_lxi = off_lp + 1;
    let n = off_lxi + 1;

    let mut coo = Coo::new(n, n);
    let mut rhs = vec![0.0; n];
    let tab = &spaces.tables;

    let kv = super::assemble::assemble_stiffness(spaces, &spaces.vel);
    let mv = super::assemble::assemble_mass(spaces, &spaces.vel);
    let b = super::assemble::assemble_divergence(spaces, &spaces.vel, &spaces.pres)?;
    let e = super::assemble::integral_vector(spaces, &spaces.pres);

    let bdry = &spaces.vel.is_boundary;

    // momentum-type rows: mu K u + gamma K w - B^T p = rhs_v
    for r in 0..nu {
        if bdry[r] {
            coo.add(off_u + r, off_u + r, 1.0);
            continue;
        }
        for idx in kv.row_ptr[r]..kv.row_ptr[r + 1] {
            let c = kv.col_idx[idx];
            coo.add(off_u + r, off_u + c, mu * kv.vals[idx]);
            coo.add(off_u + r, off_w + c, gamma * kv.vals[idx]);
        }
    }
    // w-equation rows: -K u + M w - B^T xi = rhs_w
    for r in 0..nu {
        if bdry[r] {
            coo.add(off_w + r, off_w + r, 1.0);
            continue;
        }
        for idx in kv.row_ptr[r]..kv.row_ptr[r + 1] {
            let c = kv.col_idx[idx];
            coo.add(off_w + r, off_u + c, -kv.vals[idx]);
        }
        for idx in mv.row_ptr[r]..mv.row_ptr[r + 1] {
            let c = mv.col_idx[idx];
            coo.add(off_w + r, off_w + c, mv.vals[idx]);
        }
    }
    // B^T columns into interior rows
    for r in 0..np {
        for idx in b.row_ptr[r]..b.row_ptr[r + 1] {
            let c = b.col_idx[idx];
            let v = b.vals[idx];
            if !bdry[c] {
                coo.add(off_u + c, off_p + r, -v);
                coo.add(off_w + c, off_xi + r, -v);
            }
            // divergence rows (all velocity columns participate)
            coo.add(off_p + r, off_u + c, v);
            coo.add(off_xi + r, off_w + c, v);
        }
    }
    // multiplier borders
    for i in 0..np {
        coo.add(off_p + i, off_lp, e[i]);
        coo.add(off_xi + i, off_lxi, e[i]);
        coo.add(off_lp, off_p + i, e[i]);
        coo.add(off_lxi, off_xi + i, e[i]);
    }
    coo.add(off_lp, off_lp, 0.0);
    coo.add(off_lxi, off_lxi, 0.0);

    // volumetric right-hand sides by quadrature of the exact fields
    for t in 0..spaces.mesh.n_triangles() {
        let geom = spaces.geom.elems[t];
        let det = geom.det;
        let lv = spaces.vel.elem(t);
        for q in 0..tab.nq {
            let wq = tab.qw[q] * det;
            let [x, y] = spaces.qp_coords(t, q);
            let (_, gu) = u_ex.eval(x, y);
            let (wval, gw) = w_ex.eval(x, y);
            let (pval, _) = p_ex.eval(x, y);
            let (xival, _) = xi_ex.eval(x, y);
            for a in 0..N_P2 {
                let na = tab.p2_val[q][a];
                let ga = geom.phys_grad(tab.p2_grad[q][a]);
                for c in 0..2 {
                    let dof = lv[2 * a + c];
                    if bdry[dof] {
                        continue;
                    }
                    // (mu grad u + gamma grad w, grad v) - (p, div v)
                    rhs[off_u + dof] += wq
                        * (mu * (gu[c][0] * ga[0] + gu[c][1] * ga[1])
                            + gamma * (gw[c][0] * ga[0] + gw[c][1] * ga[1])
                            - pval * ga[c]);
                    // (w, phi) - (xi, div phi) - (grad u, grad phi)
                    rhs[off_w + dof] += wq
                        * (wval[c] * na
                            - xival * ga[c]
                            - (gu[c][0] * ga[0] + gu[c][1] * ga[1]));
                }
            }
        }
    }
    // boundary data
    for s in 0..spaces.scalar.n_dofs {
        if !spaces.vel.is_boundary[2 * s] {
            continue;
        }
        let [x, y] = spaces.scalar.node_coords[s];
        let (uval, _) = u_ex.eval(x, y);
        let (wval, _) = w_ex.eval(x, y);
        for c in 0..2 {
            rhs[off_u + 2 * s + c] = uval[c];
            rhs[off_w + 2 * s + c] = wval[c];
        }
    }

    let a = coo.to_csr();
    let f = DirectFactor::new(&a)?;
    let sol = f.solve(&rhs);
    Ok((
        sol[off_u..off_u + nu].to_vec(),
        sol[off_w..off_w + nu].to_vec(),
        sol[off_p..off_p + np].to_vec(),
        sol[off_xi..off_xi + np].to_vec(),
    ))
}

/// L2 projection of a raw velocity onto the discretely divergence-free
/// subspace with homogeneous Dirichlet data:
/// (u, v) - (p, div v) = (u_raw, v), (div u, q) = 0, ∫p = 0.
pub fn div_free_l2_project(spaces: &Spaces, u_raw: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    let nu = spaces.vel.n_dofs;
    let np = spaces.pres.n_dofs;
    let off_p = nu;
    let off_l = nu + np;
    let n = off_l + 1;

    let mv = super::assemble::assemble_mass(spaces, &spaces.vel);
    let b = super::assemble::assemble_divergence(spaces, &spaces.vel, &spaces.pres)?;
    let e = super::assemble::integral_vector(spaces, &spaces.pres);
    let bdry = &spaces.vel.is_boundary;

    let mut coo = Coo::new(n, n);
    let mut rhs = vec![0.0; n];
    for r in 0..nu {
        if bdry[r] {
            coo.add(r, r, 1.0);
            continue;
        }
        for idx in mv.row_ptr[r]..mv.row_ptr[r + 1] {
            coo.add(r, mv.col_idx[idx], mv.vals[idx]);
        }
    }
    let m_uraw = mv.matvec(u_raw);
    for r in 0..nu {
        if !bdry[r] {
            rhs[r] = m_uraw[r];
        }
    }
    for r in 0..np {
        for idx in b.row_ptr[r]..b.row_ptr[r + 1] {
            let c = b.col_idx[idx];
            if !bdry[c] {
                coo.add(c, off_p + r, -b.vals[idx]);
            }
            coo.add(off_p + r, c, b.vals[idx]);
        }
    }
    for i in 0..np {
        coo.add(off_p + i, off_l, e[i]);
        coo.add(off_l, off_p + i, e[i]);
    }
    coo.add(off_l, off_l, 0.0);

    let a = coo.to_csr();
    let f = DirectFactor::new(&a)?;
    let sol = f.solve(&rhs);
    Ok((sol[..nu].to_vec(), sol[nu..nu + np].to_vec()))
}

/// Solve the w/ξ constraint pair for a given velocity:
/// (w, φ) - (ξ, div φ) = (grad u, grad φ), (div w, ζ) = 0, ∫ξ = 0,
/// with w = 0 on the boundary.
pub fn solve_aux_w_xi(spaces: &Spaces, u: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    let nu = spaces.vel.n_dofs;
    let np = spaces.pres.n_dofs;
    let off_xi = nu;
    let off_l = nu + np;
    let n = off_l + 1;

    let mv = super::assemble::assemble_mass(spaces, &spaces.vel);
    let kv = super::assemble::assemble_stiffness(spaces, &spaces.vel);
    let b = super::assemble::assemble_divergence(spaces, &spaces.vel, &spaces.pres)?;
    let e = super::assemble::integral_vector(spaces, &spaces.pres);
    let bdry = &spaces.vel.is_boundary;

    let mut coo = Coo::new(n, n);
    let mut rhs = vec![0.0; n];
    let ku = kv.matvec(u);
    for r in 0..nu {
        if bdry[r] {
            coo.add(r, r, 1.0);
            continue;
        }
        for idx in mv.row_ptr[r]..mv.row_ptr[r + 1] {
            coo.add(r, mv.col_idx[idx], mv.vals[idx]);
        }
        rhs[r] = ku[r];
    }
    for r in 0..np {
        for idx in b.row_ptr[r]..b.row_ptr[r + 1] {
            let c = b.col_idx[idx];
            if !bdry[c] {
                coo.add(c, off_xi + r, -b.vals[idx]);
            }
            coo.add(off_xi + r, c, b.vals[idx]);
        }
    }
    for i in 0..np {
        coo.add(off_xi + i, off_l, e[i]);
        coo.add(off_l, off_xi + i, e[i]);
    }
    coo.add(off_l, off_l, 0.0);

    let a = coo.to_csr();
    let f = DirectFactor::new(&a)?;
    let sol = f.solve(&rhs);
    Ok((sol[..nu].to_vec(), sol[nu..nu + np].to_vec()))
}

/// Chemical potential from the constitutive equation at one level:
/// (m, ς) = κ (grad φ, grad ς) + κ (f(φ), ς).
pub fn chem_potential_from_phi(
    spaces: &Spaces,
    phi: &[f64],
    kappa: f64,
    eta: f64,
) -> Result<Vec<f64>> {
    let ns = spaces.scalar.n_dofs;
    let ms = super::assemble::assemble_mass(spaces, &spaces.scalar);
    let ks = super::assemble::assemble_stiffness(spaces, &spaces.scalar);
    let tab = &spaces.tables;
    let mut rhs = ks.matvec(phi);
    for v in rhs.iter_mut() {
        *v *= kappa;
    }
    for t in 0..spaces.mesh.n_triangles() {
        let det = spaces.geom.elems[t].det;
        let ls = spaces.scalar.elem(t);
        for q in 0..tab.nq {
            let wq = tab.qw[q] * det;
            let (phiq, _) = eval_p2_scalar(spaces, phi, ls, t, q);
            let f = crate::model::double_well_deriv(phiq, eta);
            for a in 0..N_P2 {
                rhs[ls[a]] += wq * kappa * f * tab.p2_val[q][a];
            }
        }
    }
    let f = DirectFactor::new(&ms)?;
    let mut out = rhs;
    out = f.solve(&out);
    out.truncate(ns);
    Ok(out)
}
