//! Run outputs: CSV energy traces, legacy-VTK field snapshots, convergence
//! tables and a metadata file. All text formats are deterministic, so a
//! fixed config and seed reproduce byte-identical files.

use std::fs::{create_dir_all, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::energy::EnergyRecord;
use crate::fem::Spaces;
use crate::solver::LevelFields;
use crate::verify::{ConvergenceTable, StudyAxis, FIELD_NAMES};
use crate::Result;

/// CSV schema of the energy/indicator trace.
pub const TRACE_HEADER: &str =
    "step,t,k,E,eps_ND_u,eps_ND_phi,eps_VD_u,eps_PD_phi,chi_u,chi_phi,newton_iters";

pub fn emit_energy_trace(records: &[EnergyRecord], path: &Path) -> Result<()> {
    if let Some(dir) = path.parent() {
        create_dir_all(dir)?;
    }
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "{TRACE_HEADER}")?;
    for r in records {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{},{}",
            r.step,
            r.t,
            r.k,
            r.e,
            r.eps_nd_u,
            r.eps_nd_phi,
            r.eps_vd_u,
            r.eps_pd_phi,
            r.chi_u,
            r.chi_phi,
            r.newton_iters
        )?;
    }
    w.flush()?;
    Ok(())
}

/// Legacy-VTK unstructured-grid snapshot on the P2 node set.
///
/// Each P2 triangle is split into its four corner/midpoint sub-triangles so
/// standard viewers render the quadratic fields piecewise-linearly. Point
/// data: `u` and `w` as 3-vectors (zero third component), `p`, `xi`, `phi`,
/// `m` as scalars; the P1 fields are interpolated to edge midpoints.
pub fn emit_snapshot(spaces: &Spaces, level: &LevelFields, path: &Path) -> Result<()> {
    if let Some(dir) = path.parent() {
        create_dir_all(dir)?;
    }
    let mut w = BufWriter::new(File::create(path)?);
    let coords = &spaces.scalar.node_coords;
    let n_pts = coords.len();
    writeln!(w, "# vtk DataFile Version 2.0")?;
    writeln!(w, "acflow snapshot t = {:.12e}", level.t)?;
    writeln!(w, "ASCII")?;
    writeln!(w, "DATASET UNSTRUCTURED_GRID")?;
    writeln!(w, "POINTS {n_pts} double")?;
    for &[x, y] in coords {
        writeln!(w, "{:.17e} {:.17e} 0.0", x, y)?;
    }
    let nt = spaces.mesh.n_triangles();
    writeln!(w, "CELLS {} {}", 4 * nt, 4 * nt * 4)?;
    for t in 0..nt {
        let [v0, v1, v2, e01, e12, e20] = spaces.mesh.p2_nodes(t);
        for tri in [[v0, e01, e20], [e01, v1, e12], [e20, e12, v2], [e01, e12, e20]] {
            writeln!(w, "3 {} {} {}", tri[0], tri[1], tri[2])?;
        }
    }
    writeln!(w, "CELL_TYPES {}", 4 * nt)?;
    for _ in 0..4 * nt {
        writeln!(w, "5")?;
    }

    writeln!(w, "POINT_DATA {n_pts}")?;
    for (name, field) in [("u", &level.u), ("w", &level.w)] {
        writeln!(w, "VECTORS {name} double")?;
        for s in 0..n_pts {
            writeln!(w, "{:.17e} {:.17e} 0.0", field[2 * s], field[2 * s + 1])?;
        }
    }
    let p_on_p2 = p1_to_p2_nodes(spaces, &level.p);
    let xi_on_p2 = p1_to_p2_nodes(spaces, &level.xi);
    for (name, field) in [
        ("p", &p_on_p2),
        ("xi", &xi_on_p2),
        ("phi", &level.phi),
        ("m", &level.m),
    ] {
        writeln!(w, "SCALARS {name} double 1")?;
        writeln!(w, "LOOKUP_TABLE default")?;
        for v in field {
            writeln!(w, "{:.17e}", v)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// A P1 field on the P2 node set: vertex values pass through, edge midpoints
/// average the endpoints (exact for linear functions).
pub fn p1_to_p2_nodes(spaces: &Spaces, p1: &[f64]) -> Vec<f64> {
    let nv = spaces.mesh.n_vertices();
    let mut out = Vec::with_capacity(spaces.scalar.n_dofs);
    out.extend_from_slice(&p1[..nv]);
    for e in 0..spaces.mesh.n_edges() {
        let [a, b] = spaces.mesh.edges[e];
        out.push(0.5 * (p1[a] + p1[b]));
    }
    out
}

pub fn emit_convergence_csv(table: &ConvergenceTable, path: &Path) -> Result<()> {
    if let Some(dir) = path.parent() {
        create_dir_all(dir)?;
    }
    let mut w = BufWriter::new(File::create(path)?);
    write!(w, "level")?;
    for f in FIELD_NAMES {
        write!(w, ",{f}_l2,{f}_h1")?;
    }
    writeln!(w)?;
    for (lvl, errs) in table.levels.iter().zip(&table.errors) {
        write!(w, "{lvl}")?;
        for e in errs {
            write!(w, ",{},{}", e.l2, e.h1)?;
        }
        writeln!(w)?;
    }
    write!(w, "rate_l2")?;
    for r in table.rates_l2 {
        write!(w, ",{r},")?;
    }
    writeln!(w)?;
    write!(w, "rate_h1")?;
    for r in table.rates_h1 {
        write!(w, ",,{r}")?;
    }
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

/// Human-readable table in the style of the published error tables.
pub fn convergence_table_text(table: &ConvergenceTable) -> String {
    use std::fmt::Write as _;
    let mut s = String::new();
    let axis = match table.axis {
        StudyAxis::Time => "1/dt",
        StudyAxis::Space => "1/h",
    };
    for (norm, pick, rates) in [
        ("L2", 0usize, &table.rates_l2),
        ("H1", 1, &table.rates_h1),
    ] {
        writeln!(s, "{norm} errors").unwrap();
        write!(s, "{axis:>8}").unwrap();
        for f in FIELD_NAMES {
            write!(s, " {f:>12}").unwrap();
        }
        writeln!(s).unwrap();
        for (lvl, errs) in table.levels.iter().zip(&table.errors) {
            write!(s, "{:>8.0}", 1.0 / lvl).unwrap();
            for e in errs {
                let v = if pick == 0 { e.l2 } else { e.h1 };
                write!(s, " {v:>12.3e}").unwrap();
            }
            writeln!(s).unwrap();
        }
        write!(s, "{:>8}", "rate").unwrap();
        for r in rates.iter() {
            write!(s, " {r:>12.3}").unwrap();
        }
        writeln!(s).unwrap();
        writeln!(s).unwrap();
    }
    s
}

/// Every run writes one of these next to its outputs.
pub fn write_metadata(path: &Path, command: &str, config_dump: &str, seed: u64) -> Result<()> {
    if let Some(dir) = path.parent() {
        create_dir_all(dir)?;
    }
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "tool = acflow {}", env!("CARGO_PKG_VERSION"))?;
    writeln!(w, "command = {command}")?;
    writeln!(w, "seed = {seed}")?;
    writeln!(w, "profile = {}", if cfg!(debug_assertions) { "dev" } else { "release" })?;
    writeln!(w, "--- config ---")?;
    w.write_all(config_dump.as_bytes())?;
    w.flush()?;
    Ok(())
}
