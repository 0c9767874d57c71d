//! Structured triangulations of axis-aligned rectangles and degree-of-freedom
//! maps for the P1 / P2 Lagrange spaces used by the Taylor-Hood pair.
//!
//! Each grid cell is split along its lower-left to upper-right diagonal, so
//! the triangulation is deterministic and every triangle is positively
//! oriented. P2 nodes are the vertices followed by the edge midpoints, in
//! construction order.

use std::collections::HashMap;

use crate::{Error, Result};

#[derive(Clone, Debug)]
pub struct Mesh {
    pub vertices: Vec<[f64; 2]>,
    /// Vertex index triples, counter-clockwise.
    pub triangles: Vec<[usize; 3]>,
    /// Unique edges as vertex pairs (lo, hi).
    pub edges: Vec<[usize; 2]>,
    /// For each triangle, the edge ids of (v0,v1), (v1,v2), (v2,v0).
    pub tri_edges: Vec<[usize; 3]>,
    pub boundary_vertex: Vec<bool>,
    pub boundary_edge: Vec<bool>,
    /// Nominal mesh size: the larger cell side, e.g. 1/64 for a 96x96 grid
    /// on [0,1.5]^2.
    pub h: f64,
    pub x_range: (f64, f64),
    pub y_range: (f64, f64),
}

impl Mesh {
    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn n_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn tri_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangles[t];
        let p = self.vertices[a];
        let q = self.vertices[b];
        let r = self.vertices[c];
        0.5 * ((q[0] - p[0]) * (r[1] - p[1]) - (r[0] - p[0]) * (q[1] - p[1]))
    }

    pub fn area(&self) -> f64 {
        (0..self.n_triangles()).map(|t| self.tri_area(t)).sum()
    }

    pub fn edge_midpoint(&self, e: usize) -> [f64; 2] {
        let [a, b] = self.edges[e];
        let p = self.vertices[a];
        let q = self.vertices[b];
        [0.5 * (p[0] + q[0]), 0.5 * (p[1] + q[1])]
    }

    /// Scalar P2 node coordinates: vertices first, then edge midpoints.
    pub fn p2_node_coords(&self) -> Vec<[f64; 2]> {
        let mut coords = self.vertices.clone();
        coords.extend((0..self.n_edges()).map(|e| self.edge_midpoint(e)));
        coords
    }

    /// The six P2 scalar node ids of triangle `t`: three vertices, then the
    /// midpoints of (v0,v1), (v1,v2), (v2,v0).
    pub fn p2_nodes(&self, t: usize) -> [usize; 6] {
        let [a, b, c] = self.triangles[t];
        let nv = self.n_vertices();
        let [e01, e12, e20] = self.tri_edges[t];
        [a, b, c, nv + e01, nv + e12, nv + e20]
    }

    /// Plain-text node/element listing for debugging.
    pub fn dump(&self) -> String {
        use std::fmt::Write;
        let mut s = String::new();
        writeln!(s, "# vertices {}", self.n_vertices()).unwrap();
        for (i, v) in self.vertices.iter().enumerate() {
            writeln!(s, "v {} {:.17e} {:.17e}", i, v[0], v[1]).unwrap();
        }
        writeln!(s, "# triangles {}", self.n_triangles()).unwrap();
        for (i, t) in self.triangles.iter().enumerate() {
            writeln!(s, "t {} {} {} {}", i, t[0], t[1], t[2]).unwrap();
        }
        writeln!(s, "# edges {}", self.n_edges()).unwrap();
        for (i, e) in self.edges.iter().enumerate() {
            let b = if self.boundary_edge[i] { 1 } else { 0 };
            writeln!(s, "e {} {} {} {}", i, e[0], e[1], b).unwrap();
        }
        s
    }
}

/// Triangulate `[x0,x1] x [y0,y1]` with an `nx` by `ny` grid of cells, each
/// split along the lower-left to upper-right diagonal.
pub fn build_rectangle_mesh(
    x_range: (f64, f64),
    y_range: (f64, f64),
    nx: usize,
    ny: usize,
) -> Result<Mesh> {
    if nx < 1 || ny < 1 {
        return Err(Error::invalid(format!(
            "subdivision counts must be at least 1, got nx={nx}, ny={ny}"
        )));
    }
    if !(x_range.1 > x_range.0) || !(y_range.1 > y_range.0) {
        return Err(Error::invalid("empty or inverted coordinate range"));
    }

    let (x0, x1) = x_range;
    let (y0, y1) = y_range;
    let dx = (x1 - x0) / nx as f64;
    let dy = (y1 - y0) / ny as f64;

    let mut vertices = Vec::with_capacity((nx + 1) * (ny + 1));
    for j in 0..=ny {
        for i in 0..=nx {
            // Exact endpoints keep boundary classification robust.
            let x = if i == nx { x1 } else { x0 + i as f64 * dx };
            let y = if j == ny { y1 } else { y0 + j as f64 * dy };
            vertices.push([x, y]);
        }
    }
    let vid = |i: usize, j: usize| j * (nx + 1) + i;

    let mut triangles = Vec::with_capacity(2 * nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let a = vid(i, j);
            let b = vid(i + 1, j);
            let c = vid(i + 1, j + 1);
            let d = vid(i, j + 1);
            triangles.push([a, b, c]);
            triangles.push([a, c, d]);
        }
    }

    let mut edge_ids: HashMap<(usize, usize), usize> = HashMap::new();
    let mut edges: Vec<[usize; 2]> = Vec::new();
    let mut edge_count: Vec<u8> = Vec::new();
    let mut tri_edges = Vec::with_capacity(triangles.len());
    for t in &triangles {
        let mut ids = [0usize; 3];
        for (k, (a, b)) in [(t[0], t[1]), (t[1], t[2]), (t[2], t[0])].into_iter().enumerate() {
            let key = (a.min(b), a.max(b));
            let id = *edge_ids.entry(key).or_insert_with(|| {
                edges.push([key.0, key.1]);
                edge_count.push(0);
                edges.len() - 1
            });
            edge_count[id] += 1;
            ids[k] = id;
        }
        tri_edges.push(ids);
    }

    let boundary_edge: Vec<bool> = edge_count.iter().map(|&c| c == 1).collect();
    let mut boundary_vertex = vec![false; vertices.len()];
    for (e, &is_b) in boundary_edge.iter().enumerate() {
        if is_b {
            boundary_vertex[edges[e][0]] = true;
            boundary_vertex[edges[e][1]] = true;
        }
    }

    Ok(Mesh {
        vertices,
        triangles,
        edges,
        tri_edges,
        boundary_vertex,
        boundary_edge,
        h: dx.max(dy),
        x_range,
        y_range,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SpaceKind {
    P1Scalar,
    P2Scalar,
    P2Vector,
}

impl SpaceKind {
    pub fn dofs_per_elem(self) -> usize {
        match self {
            SpaceKind::P1Scalar => 3,
            SpaceKind::P2Scalar => 6,
            SpaceKind::P2Vector => 12,
        }
    }
}

/// Global dof numbering for one space over a [`Mesh`].
///
/// Scalar nodes are vertices first, then edge midpoints. Vector dofs
/// interleave components: scalar node `s` owns dofs `2s` and `2s+1`.
#[derive(Clone, Debug)]
pub struct DofMap {
    pub kind: SpaceKind,
    pub n_dofs: usize,
    pub n_scalar_nodes: usize,
    /// Flattened per-element local-to-global table, `dofs_per_elem` wide.
    pub elem_dofs: Vec<usize>,
    pub boundary_dofs: Vec<usize>,
    pub is_boundary: Vec<bool>,
    /// Coordinates of the scalar nodes backing each dof.
    pub node_coords: Vec<[f64; 2]>,
}

impl DofMap {
    pub fn elem(&self, t: usize) -> &[usize] {
        let k = self.kind.dofs_per_elem();
        &self.elem_dofs[t * k..(t + 1) * k]
    }

    /// Coordinates of dof `d` (for vector spaces both components share a node).
    pub fn dof_coords(&self, d: usize) -> [f64; 2] {
        match self.kind {
            SpaceKind::P2Vector => self.node_coords[d / 2],
            _ => self.node_coords[d],
        }
    }
}

pub fn build_dof_map(mesh: &Mesh, kind: SpaceKind) -> DofMap {
    let nv = mesh.n_vertices();
    let ne = mesh.n_edges();
    let nt = mesh.n_triangles();

    let (n_scalar, coords): (usize, Vec<[f64; 2]>) = match kind {
        SpaceKind::P1Scalar => (nv, mesh.vertices.clone()),
        _ => (nv + ne, mesh.p2_node_coords()),
    };
    let n_dofs = match kind {
        SpaceKind::P2Vector => 2 * n_scalar,
        _ => n_scalar,
    };

    let k = kind.dofs_per_elem();
    let mut elem_dofs = Vec::with_capacity(nt * k);
    for t in 0..nt {
        match kind {
            SpaceKind::P1Scalar => elem_dofs.extend_from_slice(&mesh.triangles[t]),
            SpaceKind::P2Scalar => elem_dofs.extend_from_slice(&mesh.p2_nodes(t)),
            SpaceKind::P2Vector => {
                for s in mesh.p2_nodes(t) {
                    elem_dofs.push(2 * s);
                    elem_dofs.push(2 * s + 1);
                }
            }
        }
    }

    let mut scalar_boundary = vec![false; n_scalar];
    for v in 0..nv {
        scalar_boundary[v] = mesh.boundary_vertex[v];
    }
    if kind != SpaceKind::P1Scalar {
        for e in 0..ne {
            scalar_boundary[nv + e] = mesh.boundary_edge[e];
        }
    }

    let mut is_boundary = vec![false; n_dofs];
    let mut boundary_dofs = Vec::new();
    for (s, &b) in scalar_boundary.iter().enumerate() {
        if !b {
            continue;
        }
        match kind {
            SpaceKind::P2Vector => {
                is_boundary[2 * s] = true;
                is_boundary[2 * s + 1] = true;
                boundary_dofs.push(2 * s);
                boundary_dofs.push(2 * s + 1);
            }
            _ => {
                is_boundary[s] = true;
                boundary_dofs.push(s);
            }
        }
    }

    DofMap {
        kind,
        n_dofs,
        n_scalar_nodes: n_scalar,
        elem_dofs,
        boundary_dofs,
        is_boundary,
        node_coords: coords,
    }
}
