//! Lagrange bases on the reference triangle and per-element affine geometry.
//!
//! Local P2 node order is vertices `v0 v1 v2` then edge midpoints of
//! `(v0,v1), (v1,v2), (v2,v0)`, matching [`crate::mesh::Mesh::p2_nodes`].

use super::quad::QuadratureRule;
use crate::mesh::Mesh;

pub const N_P1: usize = 3;
pub const N_P2: usize = 6;
pub const N_P2V: usize = 12;

pub fn p1_values(x: f64, y: f64) -> [f64; N_P1] {
    [1.0 - x - y, x, y]
}

pub const P1_GRADS: [[f64; 2]; N_P1] = [[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]];

pub fn p2_values(x: f64, y: f64) -> [f64; N_P2] {
    let l = [1.0 - x - y, x, y];
    [
        l[0] * (2.0 * l[0] - 1.0),
        l[1] * (2.0 * l[1] - 1.0),
        l[2] * (2.0 * l[2] - 1.0),
        4.0 * l[0] * l[1],
        4.0 * l[1] * l[2],
        4.0 * l[2] * l[0],
    ]
}

pub fn p2_grads(x: f64, y: f64) -> [[f64; 2]; N_P2] {
    let l = [1.0 - x - y, x, y];
    let dl = P1_GRADS;
    let mut g = [[0.0; 2]; N_P2];
    for i in 0..3 {
        for d in 0..2 {
            g[i][d] = (4.0 * l[i] - 1.0) * dl[i][d];
        }
    }
    let pairs = [(0usize, 1usize), (1, 2), (2, 0)];
    for (k, (i, j)) in pairs.into_iter().enumerate() {
        for d in 0..2 {
            g[3 + k][d] = 4.0 * (l[i] * dl[j][d] + l[j] * dl[i][d]);
        }
    }
    g
}

/// Basis values and reference gradients pre-tabulated at the quadrature points.
#[derive(Clone, Debug)]
pub struct RefTables {
    pub nq: usize,
    pub qw: Vec<f64>,
    pub qp_ref: Vec<(f64, f64)>,
    pub p1_val: Vec<[f64; N_P1]>,
    pub p2_val: Vec<[f64; N_P2]>,
    pub p2_grad: Vec<[[f64; 2]; N_P2]>,
}

impl RefTables {
    pub fn new(rule: &QuadratureRule) -> Self {
        let nq = rule.points.len();
        let mut p1_val = Vec::with_capacity(nq);
        let mut p2_val = Vec::with_capacity(nq);
        let mut p2_grad = Vec::with_capacity(nq);
        for &(x, y) in &rule.points {
            p1_val.push(p1_values(x, y));
            p2_val.push(p2_values(x, y));
            p2_grad.push(p2_grads(x, y));
        }
        RefTables {
            nq,
            qw: rule.weights.clone(),
            qp_ref: rule.points.clone(),
            p1_val,
            p2_val,
            p2_grad,
        }
    }
}

/// Affine map data for one triangle: `x = v0 + J xi`.
#[derive(Clone, Copy, Debug)]
pub struct ElemGeom {
    /// Inverse-transpose of the Jacobian; maps reference gradients to
    /// physical ones.
    pub inv_jt: [[f64; 2]; 2],
    /// |det J| = twice the triangle area.
    pub det: f64,
}

impl ElemGeom {
    #[inline]
    pub fn phys_grad(&self, g_ref: [f64; 2]) -> [f64; 2] {
        [
            self.inv_jt[0][0] * g_ref[0] + self.inv_jt[0][1] * g_ref[1],
            self.inv_jt[1][0] * g_ref[0] + self.inv_jt[1][1] * g_ref[1],
        ]
    }
}

#[derive(Clone, Debug)]
pub struct Geometry {
    pub elems: Vec<ElemGeom>,
}

impl Geometry {
    pub fn new(mesh: &Mesh) -> Self {
        let elems = (0..mesh.n_triangles())
            .map(|t| {
                let [a, b, c] = mesh.triangles[t];
                let pa = mesh.vertices[a];
                let pb = mesh.vertices[b];
                let pc = mesh.vertices[c];
                let j = [[pb[0] - pa[0], pc[0] - pa[0]], [pb[1] - pa[1], pc[1] - pa[1]]];
                let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
                assert!(det > 0.0, "triangle {t} is degenerate or flipped");
                // inv(J)^T = 1/det [[ J22, -J21], [-J12, J11]]
                let inv_jt = [
                    [j[1][1] / det, -j[1][0] / det],
                    [-j[0][1] / det, j[0][0] / det],
                ];
                ElemGeom { inv_jt, det }
            })
            .collect();
        Geometry { elems }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partition_of_unity() {
        for &(x, y) in &[(0.2, 0.3), (0.0, 0.0), (0.5, 0.5), (0.1, 0.7)] {
            let s1: f64 = p1_values(x, y).iter().sum();
            let s2: f64 = p2_values(x, y).iter().sum();
            assert!((s1 - 1.0).abs() < 1e-14);
            assert!((s2 - 1.0).abs() < 1e-14);
            let g = p2_grads(x, y);
            for d in 0..2 {
                let s: f64 = g.iter().map(|gi| gi[d]).sum();
                assert!(s.abs() < 1e-13);
            }
        }
    }

    #[test]
    fn p2_nodal_property() {
        let nodes = [
            (0.0, 0.0),
            (1.0, 0.0),
            (0.0, 1.0),
            (0.5, 0.0),
            (0.5, 0.5),
            (0.0, 0.5),
        ];
        for (i, &(x, y)) in nodes.iter().enumerate() {
            let v = p2_values(x, y);
            for (j, &vj) in v.iter().enumerate() {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((vj - want).abs() < 1e-14, "N_{j}({x},{y}) = {vj}");
            }
        }
    }

    #[test]
    fn p2_grads_match_finite_differences() {
        let h = 1e-6;
        for &(x, y) in &[(0.23, 0.31), (0.11, 0.52)] {
            let g = p2_grads(x, y);
            for i in 0..N_P2 {
                let fdx = (p2_values(x + h, y)[i] - p2_values(x - h, y)[i]) / (2.0 * h);
                let fdy = (p2_values(x, y + h)[i] - p2_values(x, y - h)[i]) / (2.0 * h);
                assert!((g[i][0] - fdx).abs() < 1e-8);
                assert!((g[i][1] - fdy).abs() < 1e-8);
            }
        }
    }
}
