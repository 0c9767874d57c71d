//! Assembly of the bilinear and nonlinear forms of the weak formulation.
//!
//! Everything integrates with the shared degree-8 rule, so products of four
//! P2 factors (the quartic velocity term) and the cubic double-well terms are
//! integrated exactly up to rounding.

use super::basis::{N_P1, N_P2, P1_GRADS};
use super::sparse::{Coo, CsrMatrix};
use super::Spaces;
use crate::mesh::{DofMap, SpaceKind};
use crate::{Error, Result};

/// Evaluate an interleaved P2 vector field and its gradient at quadrature
/// point `q` of element `t`. Returns (value, grad) with `grad[c][d]` =
/// d u_c / d x_d.
#[inline]
pub(crate) fn eval_p2_vector(
    spaces: &Spaces,
    coeffs: &[f64],
    loc: &[usize],
    t: usize,
    q: usize,
) -> ([f64; 2], [[f64; 2]; 2]) {
    let tab = &spaces.tables;
    let geom = &spaces.geom.elems[t];
    let mut val = [0.0; 2];
    let mut grad = [[0.0; 2]; 2];
    for a in 0..N_P2 {
        let n = tab.p2_val[q][a];
        let g = geom.phys_grad(tab.p2_grad[q][a]);
        for c in 0..2 {
            let ua = coeffs[loc[2 * a + c]];
            val[c] += ua * n;
            grad[c][0] += ua * g[0];
            grad[c][1] += ua * g[1];
        }
    }
    (val, grad)
}

#[inline]
pub(crate) fn eval_p2_scalar(
    spaces: &Spaces,
    coeffs: &[f64],
    loc: &[usize],
    t: usize,
    q: usize,
) -> (f64, [f64; 2]) {
    let tab = &spaces.tables;
    let geom = &spaces.geom.elems[t];
    let mut val = 0.0;
    let mut grad = [0.0; 2];
    for a in 0..N_P2 {
        let ca = coeffs[loc[a]];
        val += ca * tab.p2_val[q][a];
        let g = geom.phys_grad(tab.p2_grad[q][a]);
        grad[0] += ca * g[0];
        grad[1] += ca * g[1];
    }
    (val, grad)
}

/// Mass matrix (v_i, v_j) for any of the three spaces.
pub fn assemble_mass(spaces: &Spaces, map: &DofMap) -> CsrMatrix {
    let tab = &spaces.tables;
    let mut coo = Coo::new(map.n_dofs, map.n_dofs);
    for t in 0..spaces.mesh.n_triangles() {
        let det = spaces.geom.elems[t].det;
        let loc = map.elem(t);
        match map.kind {
            SpaceKind::P1Scalar => {
                let mut m = [[0.0; N_P1]; N_P1];
                for q in 0..tab.nq {
                    let w = tab.qw[q] * det;
                    for a in 0..N_P1 {
                        for b in 0..N_P1 {
                            m[a][b] += w * tab.p1_val[q][a] * tab.p1_val[q][b];
                        }
                    }
                }
                for a in 0..N_P1 {
                    for b in 0..N_P1 {
                        coo.add(loc[a], loc[b], m[a][b]);
                    }
                }
            }
            SpaceKind::P2Scalar | SpaceKind::P2Vector => {
                let mut m = [[0.0; N_P2]; N_P2];
                for q in 0..tab.nq {
                    let w = tab.qw[q] * det;
                    for a in 0..N_P2 {
                        for b in 0..N_P2 {
                            m[a][b] += w * tab.p2_val[q][a] * tab.p2_val[q][b];
                        }
                    }
                }
                if map.kind == SpaceKind::P2Scalar {
                    for a in 0..N_P2 {
                        for b in 0..N_P2 {
                            coo.add(loc[a], loc[b], m[a][b]);
                        }
                    }
                } else {
                    for a in 0..N_P2 {
                        for b in 0..N_P2 {
                            for c in 0..2 {
                                coo.add(loc[2 * a + c], loc[2 * b + c], m[a][b]);
                            }
                        }
                    }
                }
            }
        }
    }
    coo.to_csr()
}

/// Stiffness matrix (grad v_i, grad v_j).
pub fn assemble_stiffness(spaces: &Spaces, map: &DofMap) -> CsrMatrix {
    let tab = &spaces.tables;
    let mut coo = Coo::new(map.n_dofs, map.n_dofs);
    for t in 0..spaces.mesh.n_triangles() {
        let geom = spaces.geom.elems[t];
        let det = geom.det;
        let loc = map.elem(t);
        match map.kind {
            SpaceKind::P1Scalar => {
                // P1 gradients are constant per element.
                let g: Vec<[f64; 2]> = P1_GRADS.iter().map(|&gr| geom.phys_grad(gr)).collect();
                let area = 0.5 * det;
                for a in 0..N_P1 {
                    for b in 0..N_P1 {
                        coo.add(loc[a], loc[b], area * (g[a][0] * g[b][0] + g[a][1] * g[b][1]));
                    }
                }
            }
            SpaceKind::P2Scalar | SpaceKind::P2Vector => {
                let mut k = [[0.0; N_P2]; N_P2];
                for q in 0..tab.nq {
                    let w = tab.qw[q] * det;
                    let g: [[f64; 2]; N_P2] =
                        std::array::from_fn(|a| geom.phys_grad(tab.p2_grad[q][a]));
                    for a in 0..N_P2 {
                        for b in 0..N_P2 {
                            k[a][b] += w * (g[a][0] * g[b][0] + g[a][1] * g[b][1]);
                        }
                    }
                }
                if map.kind == SpaceKind::P2Scalar {
                    for a in 0..N_P2 {
                        for b in 0..N_P2 {
                            coo.add(loc[a], loc[b], k[a][b]);
                        }
                    }
                } else {
                    for a in 0..N_P2 {
                        for b in 0..N_P2 {
                            for c in 0..2 {
                                coo.add(loc[2 * a + c], loc[2 * b + c], k[a][b]);
                            }
                        }
                    }
                }
            }
        }
    }
    coo.to_csr()
}

/// Divergence operator B with (B v)_q = (q_basis, div v): rows in the
/// pressure space, columns in the P2 vector space.
pub fn assemble_divergence(spaces: &Spaces, vel: &DofMap, pres: &DofMap) -> Result<CsrMatrix> {
    if vel.kind != SpaceKind::P2Vector || pres.kind != SpaceKind::P1Scalar {
        return Err(Error::invalid(
            "divergence expects a P2 vector trial space and a P1 pressure space",
        ));
    }
    let tab = &spaces.tables;
    let mut coo = Coo::new(pres.n_dofs, vel.n_dofs);
    for t in 0..spaces.mesh.n_triangles() {
        let geom = spaces.geom.elems[t];
        let det = geom.det;
        let lv = vel.elem(t);
        let lp = pres.elem(t);
        let mut b = [[[0.0; 2]; N_P2]; N_P1];
        for q in 0..tab.nq {
            let w = tab.qw[q] * det;
            for i in 0..N_P1 {
                let qi = tab.p1_val[q][i];
                for a in 0..N_P2 {
                    let g = geom.phys_grad(tab.p2_grad[q][a]);
                    // div(N_a e_c) = dN_a/dx_c
                    b[i][a][0] += w * qi * g[0];
                    b[i][a][1] += w * qi * g[1];
                }
            }
        }
        for i in 0..N_P1 {
            for a in 0..N_P2 {
                for c in 0..2 {
                    coo.add(lp[i], lv[2 * a + c], b[i][a][c]);
                }
            }
        }
    }
    Ok(coo.to_csr())
}

/// Skew-symmetric convection operator N(u) with entries
/// b(u, psi_j, psi_i) = 1/2 (u . grad psi_j, psi_i) - 1/2 (u . grad psi_i, psi_j).
pub fn assemble_convection(spaces: &Spaces, u: &[f64], map: &DofMap) -> CsrMatrix {
    assert_eq!(map.kind, SpaceKind::P2Vector);
    let tab = &spaces.tables;
    let mut coo = Coo::new(map.n_dofs, map.n_dofs);
    for t in 0..spaces.mesh.n_triangles() {
        let geom = spaces.geom.elems[t];
        let det = geom.det;
        let loc = map.elem(t);
        // (u . grad N_b) N_a  accumulated as a scalar 6x6 block; component
        // structure is diagonal.
        let mut s = [[0.0; N_P2]; N_P2];
        for q in 0..tab.nq {
            let w = tab.qw[q] * det;
            let (uq, _) = eval_p2_vector(spaces, u, loc, t, q);
            for b in 0..N_P2 {
                let g = geom.phys_grad(tab.p2_grad[q][b]);
                let ug = uq[0] * g[0] + uq[1] * g[1];
                for a in 0..N_P2 {
                    s[a][b] += w * tab.p2_val[q][a] * ug;
                }
            }
        }
        for a in 0..N_P2 {
            for b in 0..N_P2 {
                let v = 0.5 * (s[a][b] - s[b][a]);
                for c in 0..2 {
                    coo.add(loc[2 * a + c], loc[2 * b + c], v);
                }
            }
        }
    }
    coo.to_csr()
}

/// Load vector of the quartic velocity term: out_i = (|u|^2 u, psi_i).
pub fn assemble_cubic_velocity(spaces: &Spaces, u: &[f64], map: &DofMap) -> Vec<f64> {
    assert_eq!(map.kind, SpaceKind::P2Vector);
    let tab = &spaces.tables;
    let mut out = vec![0.0; map.n_dofs];
    for t in 0..spaces.mesh.n_triangles() {
        let det = spaces.geom.elems[t].det;
        let loc = map.elem(t);
        for q in 0..tab.nq {
            let w = tab.qw[q] * det;
            let (uq, _) = eval_p2_vector(spaces, u, loc, t, q);
            let norm2 = uq[0] * uq[0] + uq[1] * uq[1];
            for a in 0..N_P2 {
                let n = tab.p2_val[q][a];
                for c in 0..2 {
                    out[loc[2 * a + c]] += w * n * norm2 * uq[c];
                }
            }
        }
    }
    out
}

/// Korteweg-type phase force: out_i = (m grad(phi), psi_i) over the velocity
/// test space.
pub fn assemble_phase_force(
    spaces: &Spaces,
    m: &[f64],
    phi: &[f64],
    vel: &DofMap,
) -> Vec<f64> {
    assert_eq!(vel.kind, SpaceKind::P2Vector);
    let tab = &spaces.tables;
    let scalar = &spaces.scalar;
    let mut out = vec![0.0; vel.n_dofs];
    for t in 0..spaces.mesh.n_triangles() {
        let det = spaces.geom.elems[t].det;
        let lv = vel.elem(t);
        let ls = scalar.elem(t);
        for q in 0..tab.nq {
            let w = tab.qw[q] * det;
            let (mq, _) = eval_p2_scalar(spaces, m, ls, t, q);
            let (_, gphi) = eval_p2_scalar(spaces, phi, ls, t, q);
            for a in 0..N_P2 {
                let n = tab.p2_val[q][a];
                for c in 0..2 {
                    out[lv[2 * a + c]] += w * n * mq * gphi[c];
                }
            }
        }
    }
    out
}

/// Phase advection load: out_i = (u . grad(phi), theta_i) over the scalar
/// test space.
pub fn assemble_phase_advection(
    spaces: &Spaces,
    u: &[f64],
    phi: &[f64],
    scalar: &DofMap,
) -> Vec<f64> {
    assert_eq!(scalar.kind, SpaceKind::P2Scalar);
    let tab = &spaces.tables;
    let mut out = vec![0.0; scalar.n_dofs];
    for t in 0..spaces.mesh.n_triangles() {
        let det = spaces.geom.elems[t].det;
        let lv = spaces.vel.elem(t);
        let ls = scalar.elem(t);
        for q in 0..tab.nq {
            let w = tab.qw[q] * det;
            let (uq, _) = eval_p2_vector(spaces, u, lv, t, q);
            let (_, gphi) = eval_p2_scalar(spaces, phi, ls, t, q);
            let adv = uq[0] * gphi[0] + uq[1] * gphi[1];
            for a in 0..N_P2 {
                out[ls[a]] += w * tab.p2_val[q][a] * adv;
            }
        }
    }
    out
}

/// Vector of basis integrals (v_i, 1) for a scalar space: used for the
/// zero-mean Lagrange multiplier rows.
pub fn integral_vector(spaces: &Spaces, map: &DofMap) -> Vec<f64> {
    let tab = &spaces.tables;
    let mut out = vec![0.0; map.n_dofs];
    for t in 0..spaces.mesh.n_triangles() {
        let det = spaces.geom.elems[t].det;
        let loc = map.elem(t);
        match map.kind {
            SpaceKind::P1Scalar => {
                for q in 0..tab.nq {
                    let w = tab.qw[q] * det;
                    for a in 0..N_P1 {
                        out[loc[a]] += w * tab.p1_val[q][a];
                    }
                }
            }
            SpaceKind::P2Scalar => {
                for q in 0..tab.nq {
                    let w = tab.qw[q] * det;
                    for a in 0..N_P2 {
                        out[loc[a]] += w * tab.p2_val[q][a];
                    }
                }
            }
            SpaceKind::P2Vector => unreachable!("integral vector is for scalar spaces"),
        }
    }
    out
}
