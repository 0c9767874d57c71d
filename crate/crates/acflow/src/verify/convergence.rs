//! Error norms against exact fields, least-squares rate fitting, and the
//! space/time convergence studies over the manufactured solution.

use std::sync::Arc;

use super::mms::{MmsProblem, MmsSolution};
use crate::adapt::{run_constant, RunOptions};
use crate::fem::{Spaces, N_P1, N_P2};
use crate::mesh::{build_rectangle_mesh, DofMap, SpaceKind};
use crate::model::PhysParams;
use crate::solver::{init_state_mms, SolverConfig, Stepper};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NormKind {
    L2,
    /// Full H1 norm (L2 part plus gradient part).
    H1,
}

/// Quadrature error norm of a scalar P1/P2 field against an exact closure
/// returning (value, gradient). With `align_means` the comparison is made
/// between zero-mean representatives, which is how pressure-like fields
/// (defined up to a constant) are measured.
pub fn scalar_error_norm(
    spaces: &Spaces,
    map: &DofMap,
    coeffs: &[f64],
    exact: &dyn Fn(f64, f64) -> (f64, [f64; 2]),
    norm: NormKind,
    align_means: bool,
) -> f64 {
    let tab = &spaces.tables;
    let mut shift = 0.0;
    if align_means {
        let mut int_diff = 0.0;
        let mut area = 0.0;
        for t in 0..spaces.mesh.n_triangles() {
            let det = spaces.geom.elems[t].det;
            let loc = map.elem(t);
            for q in 0..tab.nq {
                let wq = tab.qw[q] * det;
                let [x, y] = spaces.qp_coords(t, q);
                let num = eval_scalar(map, coeffs, loc, tab, q, spaces, t).0;
                int_diff += wq * (exact(x, y).0 - num);
                area += wq;
            }
        }
        shift = int_diff / area;
    }

    let mut acc = 0.0;
    for t in 0..spaces.mesh.n_triangles() {
        let det = spaces.geom.elems[t].det;
        let loc = map.elem(t);
        for q in 0..tab.nq {
            let wq = tab.qw[q] * det;
            let [x, y] = spaces.qp_coords(t, q);
            let (num, gnum) = eval_scalar(map, coeffs, loc, tab, q, spaces, t);
            let (ex, gex) = exact(x, y);
            let d = ex - num - shift;
            match norm {
                NormKind::L2 => acc += wq * d * d,
                NormKind::H1 => {
                    let gx = gex[0] - gnum[0];
                    let gy = gex[1] - gnum[1];
                    acc += wq * (d * d + gx * gx + gy * gy);
                }
            }
        }
    }
    acc.sqrt()
}

fn eval_scalar(
    map: &DofMap,
    coeffs: &[f64],
    loc: &[usize],
    tab: &crate::fem::RefTables,
    q: usize,
    spaces: &Spaces,
    t: usize,
) -> (f64, [f64; 2]) {
    let geom = spaces.geom.elems[t];
    match map.kind {
        SpaceKind::P1Scalar => {
            let mut v = 0.0;
            let mut g = [0.0; 2];
            for a in 0..N_P1 {
                v += coeffs[loc[a]] * tab.p1_val[q][a];
                let ga = geom.phys_grad(crate::fem::P1_GRADS[a]);
                g[0] += coeffs[loc[a]] * ga[0];
                g[1] += coeffs[loc[a]] * ga[1];
            }
            (v, g)
        }
        _ => {
            let mut v = 0.0;
            let mut g = [0.0; 2];
            for a in 0..N_P2 {
                v += coeffs[loc[a]] * tab.p2_val[q][a];
                let ga = geom.phys_grad(tab.p2_grad[q][a]);
                g[0] += coeffs[loc[a]] * ga[0];
                g[1] += coeffs[loc[a]] * ga[1];
            }
            (v, g)
        }
    }
}

/// Error norm of an interleaved P2 vector field against (value, jacobian).
pub fn vector_error_norm(
    spaces: &Spaces,
    coeffs: &[f64],
    exact: &dyn Fn(f64, f64) -> ([f64; 2], [[f64; 2]; 2]),
    norm: NormKind,
) -> f64 {
    let tab = &spaces.tables;
    let mut acc = 0.0;
    for t in 0..spaces.mesh.n_triangles() {
        let geom = spaces.geom.elems[t];
        let det = geom.det;
        let lv = spaces.vel.elem(t);
        for q in 0..tab.nq {
            let wq = tab.qw[q] * det;
            let [x, y] = spaces.qp_coords(t, q);
            let mut val = [0.0; 2];
            let mut grad = [[0.0; 2]; 2];
            for a in 0..N_P2 {
                let n = tab.p2_val[q][a];
                let g = geom.phys_grad(tab.p2_grad[q][a]);
                for c in 0..2 {
                    let ua = coeffs[lv[2 * a + c]];
                    val[c] += ua * n;
                    grad[c][0] += ua * g[0];
                    grad[c][1] += ua * g[1];
                }
            }
            let (ex, gex) = exact(x, y);
            for c in 0..2 {
                let d = ex[c] - val[c];
                match norm {
                    NormKind::L2 => acc += wq * d * d,
                    NormKind::H1 => {
                        let gx = gex[c][0] - grad[c][0];
                        let gy = gex[c][1] - grad[c][1];
                        acc += wq * (d * d + gx * gx + gy * gy);
                    }
                }
            }
        }
    }
    acc.sqrt()
}

/// Least-squares slope of log(error) against log(step).
pub fn fit_rate(steps: &[f64], errors: &[f64]) -> Result<f64> {
    if steps.len() != errors.len() || steps.len() < 2 {
        return Err(Error::invalid("rate fit needs at least two matching samples"));
    }
    if steps.iter().chain(errors.iter()).any(|&v| !(v > 0.0)) {
        return Err(Error::invalid("rate fit needs positive steps and errors"));
    }
    let xs: Vec<f64> = steps.iter().map(|s| s.ln()).collect();
    let ys: Vec<f64> = errors.iter().map(|e| e.ln()).collect();
    let n = xs.len() as f64;
    let xb = xs.iter().sum::<f64>() / n;
    let yb = ys.iter().sum::<f64>() / n;
    let num: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - xb) * (y - yb)).sum();
    let den: f64 = xs.iter().map(|x| (x - xb) * (x - xb)).sum();
    Ok(num / den)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StudyAxis {
    Time,
    Space,
}

pub const FIELD_NAMES: [&str; 6] = ["u", "w", "xi", "p", "phi", "m"];

#[derive(Clone, Debug)]
pub struct StudyConfig {
    pub axis: StudyAxis,
    /// Step sizes (time axis) or cell sizes (space axis).
    pub levels: Vec<f64>,
    /// Cell size for the time study.
    pub fixed_h: f64,
    /// Step size for the space study.
    pub fixed_dt: f64,
    pub horizon: f64,
    pub theta: f64,
    pub params: PhysParams,
    pub solver: SolverConfig,
}

impl StudyConfig {
    /// Desk-scale defaults; the paper-scale protocol (h = 1/64 time grid,
    /// Δt = 1e-5 space grid up to h = 1/128, horizon 1) is a config choice.
    pub fn desk_default(axis: StudyAxis) -> Self {
        match axis {
            StudyAxis::Time => StudyConfig {
                axis,
                levels: vec![0.25, 0.125, 0.0625, 0.03125],
                fixed_h: 1.0 / 32.0,
                fixed_dt: 0.0,
                horizon: 1.0,
                theta: 0.3,
                params: PhysParams::default(),
                solver: SolverConfig::default(),
            },
            StudyAxis::Space => StudyConfig {
                axis,
                levels: vec![1.0 / 8.0, 1.0 / 16.0, 1.0 / 32.0],
                fixed_h: 0.0,
                fixed_dt: 1e-4,
                horizon: 0.1,
                theta: 0.3,
                params: PhysParams::default(),
                solver: SolverConfig::default(),
            },
        }
    }
}

#[derive(Clone, Copy, Debug, Default)]
pub struct FieldErrors {
    pub l2: f64,
    pub h1: f64,
}

#[derive(Clone, Debug)]
pub struct ConvergenceTable {
    pub axis: StudyAxis,
    pub levels: Vec<f64>,
    /// errors[level][field], fields ordered as [`FIELD_NAMES`].
    pub errors: Vec<[FieldErrors; 6]>,
    pub rates_l2: [f64; 6],
    pub rates_h1: [f64; 6],
}

impl ConvergenceTable {
    pub fn rate_l2(&self, field: &str) -> f64 {
        self.rates_l2[field_index(field)]
    }

    pub fn rate_h1(&self, field: &str) -> f64 {
        self.rates_h1[field_index(field)]
    }
}

pub fn field_index(name: &str) -> usize {
    FIELD_NAMES
        .iter()
        .position(|&f| f == name)
        .unwrap_or_else(|| panic!("unknown field {name}"))
}

/// Run the manufactured-solution study on the unit square and fit rates.
pub fn run_convergence(cfg: &StudyConfig) -> Result<ConvergenceTable> {
    if cfg.levels.len() < 2 {
        return Err(Error::invalid("a convergence study needs at least two levels"));
    }
    let mut errors = Vec::new();
    for &level in &cfg.levels {
        let (h, dt) = match cfg.axis {
            StudyAxis::Time => (cfg.fixed_h, level),
            StudyAxis::Space => (level, cfg.fixed_dt),
        };
        errors.push(run_single_level(cfg, h, dt)?);
    }
    let mut rates_l2 = [0.0; 6];
    let mut rates_h1 = [0.0; 6];
    for f in 0..6 {
        let l2: Vec<f64> = errors.iter().map(|e| e[f].l2).collect();
        let h1: Vec<f64> = errors.iter().map(|e| e[f].h1).collect();
        rates_l2[f] = fit_rate(&cfg.levels, &l2)?;
        rates_h1[f] = fit_rate(&cfg.levels, &h1)?;
    }
    Ok(ConvergenceTable {
        axis: cfg.axis,
        levels: cfg.levels.clone(),
        errors,
        rates_l2,
        rates_h1,
    })
}

fn run_single_level(cfg: &StudyConfig, h: f64, dt: f64) -> Result<[FieldErrors; 6]> {
    let n = (1.0 / h).round() as usize;
    if n == 0 || (1.0 / n as f64 - h).abs() > 1e-9 {
        return Err(Error::invalid(format!("cell size {h} is not 1/n for integer n")));
    }
    let spaces = Arc::new(Spaces::new(build_rectangle_mesh((0.0, 1.0), (0.0, 1.0), n, n)?));
    let problem = MmsProblem::new(&spaces, cfg.params)?;
    let mut stepper = Stepper::new(
        Arc::clone(&spaces),
        cfg.params,
        cfg.theta,
        cfg.solver,
        Some(Box::new(problem)),
    )?;
    let level0 = init_state_mms(&spaces, &cfg.params, 0.0)?;
    let opts = RunOptions {
        horizon: cfg.horizon,
        snapshot_times: Vec::new(),
        record_stride: usize::MAX,
    };
    let result = run_constant(&mut stepper, level0, dt, &opts)?;
    let tf = result.state.curr.t;
    debug_assert!((tf - cfg.horizon).abs() < 1e-10);

    let curr = &result.state.curr;
    let mut out = [FieldErrors::default(); 6];
    let u_ex = |x: f64, y: f64| (MmsSolution::u(x, y, tf), MmsSolution::u_grad(x, y, tf));
    let w_ex = |x: f64, y: f64| (MmsSolution::w(x, y, tf), MmsSolution::w_grad(x, y, tf));
    let xi_ex = |x: f64, y: f64| (MmsSolution::xi(x, y, tf), MmsSolution::xi_grad(x, y, tf));
    let p_ex = |x: f64, y: f64| (MmsSolution::p(x, y, tf), MmsSolution::p_grad(x, y, tf));
    let phi_ex = |x: f64, y: f64| (MmsSolution::phi(x, y, tf), MmsSolution::phi_grad(x, y, tf));
    let m_ex = |x: f64, y: f64| (MmsSolution::m(x, y, tf), MmsSolution::m_grad(x, y, tf));

    for (i, norm) in [(0usize, NormKind::L2), (1, NormKind::H1)] {
        let get = |fe: &mut FieldErrors, v: f64| {
            if i == 0 {
                fe.l2 = v;
            } else {
                fe.h1 = v;
            }
        };
        get(&mut out[0], vector_error_norm(&spaces, &curr.u, &u_ex, norm));
        get(&mut out[1], vector_error_norm(&spaces, &curr.w, &w_ex, norm));
        get(
            &mut out[2],
            scalar_error_norm(&spaces, &spaces.pres, &curr.xi, &xi_ex, norm, true),
        );
        get(
            &mut out[3],
            scalar_error_norm(&spaces, &spaces.pres, &curr.p, &p_ex, norm, true),
        );
        get(
            &mut out[4],
            scalar_error_norm(&spaces, &spaces.scalar, &curr.phi, &phi_ex, norm, false),
        );
        get(
            &mut out[5],
            scalar_error_norm(&spaces, &spaces.scalar, &curr.m, &m_ex, norm, false),
        );
    }
    Ok(out)
}
