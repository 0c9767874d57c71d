//! Reference-element machinery and sparse assembly for the Taylor-Hood pair.

mod assemble;
mod basis;
mod linsolve;
mod project;
mod quad;
mod sparse;

pub use assemble::{
    assemble_convection, assemble_cubic_velocity, assemble_divergence, assemble_mass,
    assemble_phase_advection, assemble_phase_force, assemble_stiffness, integral_vector,
};
pub use basis::{ElemGeom, Geometry, RefTables, N_P1, N_P2, N_P2V, P1_GRADS};
pub use linsolve::{bicgstab, DirectFactor, LinearSolver, PatternFactor};
pub use project::{
    chem_potential_from_phi, div_free_l2_project, ritz_project, solve_aux_w_xi, stokes_project,
    ScalarField2, VectorField2,
};
pub use quad::QuadratureRule;
pub use sparse::{Coo, CsrMatrix};

use crate::mesh::{build_dof_map, DofMap, Mesh, SpaceKind};

/// Coefficient vector of a discrete function in one of the three spaces.
#[derive(Clone, Debug)]
pub struct Field {
    pub kind: SpaceKind,
    pub coeffs: Vec<f64>,
}

impl Field {
    pub fn new(map: &DofMap, coeffs: Vec<f64>) -> crate::Result<Self> {
        if coeffs.len() != map.n_dofs {
            return Err(crate::Error::invalid(format!(
                "coefficient length {} does not match dof count {}",
                coeffs.len(),
                map.n_dofs
            )));
        }
        Ok(Field { kind: map.kind, coeffs })
    }

    pub fn zeros(map: &DofMap) -> Self {
        Field {
            kind: map.kind,
            coeffs: vec![0.0; map.n_dofs],
        }
    }
}

/// Mesh plus everything assembly needs: dof maps for the three spaces,
/// per-element affine geometry, and reference-element tables for the shared
/// degree-8 quadrature rule. Immutable after construction.
#[derive(Clone, Debug)]
pub struct Spaces {
    pub mesh: Mesh,
    pub vel: DofMap,
    pub scalar: DofMap,
    pub pres: DofMap,
    pub geom: Geometry,
    pub tables: RefTables,
}

impl Spaces {
    pub fn new(mesh: Mesh) -> Self {
        let vel = build_dof_map(&mesh, SpaceKind::P2Vector);
        let scalar = build_dof_map(&mesh, SpaceKind::P2Scalar);
        let pres = build_dof_map(&mesh, SpaceKind::P1Scalar);
        let rule = QuadratureRule::triangle_degree8();
        let tables = RefTables::new(&rule);
        let geom = Geometry::new(&mesh);
        Spaces {
            mesh,
            vel,
            scalar,
            pres,
            geom,
            tables,
        }
    }

    pub fn map(&self, kind: SpaceKind) -> &DofMap {
        match kind {
            SpaceKind::P1Scalar => &self.pres,
            SpaceKind::P2Scalar => &self.scalar,
            SpaceKind::P2Vector => &self.vel,
        }
    }

    /// Physical coordinates of quadrature point `q` in element `t`.
    pub fn qp_coords(&self, t: usize, q: usize) -> [f64; 2] {
        let [a, b, c] = self.mesh.triangles[t];
        let pa = self.mesh.vertices[a];
        let pb = self.mesh.vertices[b];
        let pc = self.mesh.vertices[c];
        let (x, y) = self.tables.qp_ref[q];
        [
            pa[0] + (pb[0] - pa[0]) * x + (pc[0] - pa[0]) * y,
            pa[1] + (pb[1] - pa[1]) * x + (pc[1] - pa[1]) * y,
        ]
    }

    /// Interpolate a scalar callable at the P2 scalar nodes.
    pub fn interpolate_scalar(&self, f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
        self.scalar
            .node_coords
            .iter()
            .map(|&[x, y]| f(x, y))
            .collect()
    }

    /// Interpolate a 2-vector callable at the P2 nodes (interleaved dofs).
    pub fn interpolate_vector(&self, f: impl Fn(f64, f64) -> [f64; 2]) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.vel.n_dofs);
        for &[x, y] in &self.scalar.node_coords {
            let v = f(x, y);
            out.push(v[0]);
            out.push(v[1]);
        }
        out
    }
}
